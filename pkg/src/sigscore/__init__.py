"""Distribution-level scoring of probabilistic forecasts with signature
kernels, tail censoring, classical proper scores, permutation testing and a
batch evaluation harness."""

from ._version import __version__
from .baselines import (
    DECILE_LEVELS,
    ForecastInstance,
    crps,
    energy_score,
    quantile_loss,
    score_instance,
    variogram_score,
)
from .censoring import (
    CensorModel,
    RobustEstimate,
    censor_weight,
    censored_kernel_block,
    consistency_factor,
    csig_mmd,
    fit_censor_model,
    fit_mcd,
    mahalanobis,
)
from .exceptions import NumericalError, ValidationError
from .experiments import (
    dependency_success,
    emit_synthetic,
    focus_success,
    quantile_sweep,
    run_dependency_experiment,
    run_focus_experiment,
)
from .harness import (
    EvalConfig,
    EvalManifest,
    ModelEntry,
    ScoreReport,
    emit_report,
    ingest,
    load_manifest,
    read_samples_csv,
    read_trajectory_csv,
    run_eval,
    tally_outcomes,
    write_samples_csv,
    write_trajectory_csv,
)
from .mmd import MmdResult, mmd2_biased, mmd2_unbiased, rbf_mmd, sig_mmd
from .paths import (
    NormStats,
    Trajectory,
    augment,
    augment_all,
    fit_norm_stats,
    split_augmented,
    zero_pivot,
)
from .power import PowerGrid, TestResult, permutation_test, power_grid, render_heatmap
from .sigkernel import (
    Gram,
    KernelConfig,
    gram,
    median_heuristic,
    sig_kernel,
    solve_goursat,
    static_increment_grid,
)
from .synthetic import (
    POWER_SCENARIOS,
    GpSpec,
    ScenarioSpec,
    build_spatial_corr,
    make_dependency_set,
    make_focus_set,
    make_power_pair,
    rng_for,
    sample_gp,
)
from .truncsig import (
    TruncSig,
    batch_signatures,
    capped_depth,
    chen_concat,
    segment_exp,
    sig_dim,
    truncated_signature,
)

__all__ = [
    "__version__",
    "CensorModel",
    "DECILE_LEVELS",
    "EvalConfig",
    "EvalManifest",
    "ForecastInstance",
    "GpSpec",
    "Gram",
    "KernelConfig",
    "MmdResult",
    "ModelEntry",
    "NormStats",
    "NumericalError",
    "POWER_SCENARIOS",
    "PowerGrid",
    "RobustEstimate",
    "ScenarioSpec",
    "ScoreReport",
    "TestResult",
    "Trajectory",
    "TruncSig",
    "ValidationError",
    "augment",
    "augment_all",
    "batch_signatures",
    "build_spatial_corr",
    "capped_depth",
    "censor_weight",
    "censored_kernel_block",
    "chen_concat",
    "consistency_factor",
    "crps",
    "csig_mmd",
    "dependency_success",
    "emit_report",
    "emit_synthetic",
    "energy_score",
    "fit_censor_model",
    "fit_mcd",
    "fit_norm_stats",
    "focus_success",
    "gram",
    "ingest",
    "load_manifest",
    "mahalanobis",
    "make_dependency_set",
    "make_focus_set",
    "make_power_pair",
    "median_heuristic",
    "mmd2_biased",
    "mmd2_unbiased",
    "permutation_test",
    "power_grid",
    "quantile_loss",
    "quantile_sweep",
    "rbf_mmd",
    "read_samples_csv",
    "read_trajectory_csv",
    "render_heatmap",
    "rng_for",
    "run_dependency_experiment",
    "run_eval",
    "run_focus_experiment",
    "sample_gp",
    "score_instance",
    "segment_exp",
    "sig_dim",
    "sig_kernel",
    "sig_mmd",
    "solve_goursat",
    "split_augmented",
    "static_increment_grid",
    "tally_outcomes",
    "truncated_signature",
    "variogram_score",
    "write_samples_csv",
    "write_trajectory_csv",
    "zero_pivot",
]
