"""Numerical laboratory for determinantal point processes with J-Hermitian
kernels on finite split spaces.

The package covers the full desk-scale workflow: kernel representation and
validity checking through the Hermitian hat transform (``core``), circulant
torus kernels handled frequency-by-frequency (``spectral``), exact moments
and cumulants of linear statistics via trace formulas (``moments``),
brute-force configuration laws and particle-hole duality checks on tiny
spaces (``oracle``), exact sampling through the Hermitian dual (``sampler``),
and config-driven Monte Carlo central-limit experiments with delimited /
JSON / figure reports (``harness``, ``plots``, ``cli``).
"""

from .core import (
    DEFAULT_TOL,
    HatKernel,
    InvalidKernelError,
    JKernelMatrix,
    SplitSpace,
    ValidityReport,
    assemble_from_blocks,
    check_j_hermitian,
    hat_transform,
    load_kernel,
    save_kernel,
    unhat_transform,
    validity_check,
    weighted_matrix,
)
from .harness import (
    BandFamily,
    CltReport,
    CltRow,
    DegenerateConfigError,
    ExperimentConfig,
    KappaRule,
    StatisticalAcceptanceError,
    clt_hypothesis_diagnostics,
    emit_report,
    load_experiment_config,
    normality_test,
    parse_experiment_config,
    run_clt_experiment,
    run_experiment,
    run_scaling_experiment,
)
from .moments import (
    CumulantSeries,
    TestFunction,
    compositions,
    cumulants,
    expectation,
    load_test_function,
    save_test_function,
    signed_mean_identity,
    trace_product,
    variance,
    variance_spectral,
)
from .oracle import (
    ConfigurationDistribution,
    correlation,
    duality_check,
    exact_cumulants,
    exact_statistic_distribution,
    indices_to_mask,
    mask_to_indices,
    particle_hole_map,
    subset_probabilities,
)
from .sampler import (
    EigenSystem,
    SampleBatch,
    eigendecompose_hat,
    eigendecompose_torus,
    sample_hermitian_dpp,
    sample_jdpp,
    sample_jdpp_batch,
    sample_torus_batch,
)
from .spectral import (
    FrequencyValidity,
    SpectralTriple,
    TranslationKernel,
    block_diagonalize,
    check_frequency_admissibility,
    dft_forward,
    dft_inverse,
    dft_pair,
    load_spectral_triple,
    save_spectral_triple,
    sigma_squared,
    synthesize_kernel,
    tail_diagnostic,
    to_jkernel,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOL",
    "HatKernel",
    "InvalidKernelError",
    "JKernelMatrix",
    "SplitSpace",
    "ValidityReport",
    "assemble_from_blocks",
    "check_j_hermitian",
    "hat_transform",
    "load_kernel",
    "save_kernel",
    "unhat_transform",
    "validity_check",
    "weighted_matrix",
    "BandFamily",
    "CltReport",
    "CltRow",
    "DegenerateConfigError",
    "ExperimentConfig",
    "KappaRule",
    "StatisticalAcceptanceError",
    "clt_hypothesis_diagnostics",
    "emit_report",
    "load_experiment_config",
    "normality_test",
    "parse_experiment_config",
    "run_clt_experiment",
    "run_experiment",
    "run_scaling_experiment",
    "CumulantSeries",
    "TestFunction",
    "compositions",
    "cumulants",
    "expectation",
    "load_test_function",
    "save_test_function",
    "signed_mean_identity",
    "trace_product",
    "variance",
    "variance_spectral",
    "ConfigurationDistribution",
    "correlation",
    "duality_check",
    "exact_cumulants",
    "exact_statistic_distribution",
    "indices_to_mask",
    "mask_to_indices",
    "particle_hole_map",
    "subset_probabilities",
    "EigenSystem",
    "SampleBatch",
    "eigendecompose_hat",
    "eigendecompose_torus",
    "sample_hermitian_dpp",
    "sample_jdpp",
    "sample_jdpp_batch",
    "sample_torus_batch",
    "FrequencyValidity",
    "SpectralTriple",
    "TranslationKernel",
    "block_diagonalize",
    "check_frequency_admissibility",
    "dft_forward",
    "dft_inverse",
    "dft_pair",
    "load_spectral_triple",
    "save_spectral_triple",
    "sigma_squared",
    "synthesize_kernel",
    "tail_diagnostic",
    "to_jkernel",
    "__version__",
]
