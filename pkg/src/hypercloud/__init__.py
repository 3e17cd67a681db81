"""Hypergraph spectral analysis and processing for 3D point clouds.

The package estimates a hypergraph spectral model directly from point
coordinates (no explicit hyperedge construction), fits normalized frequency
coefficients by constrained quadratic optimization, and uses the resulting
spectral pairs for denoising, feature-preserving sampling, and bandlimited
downsampling.  Graph-signal-processing baselines and an experiment harness
round out the toolkit.
"""

__version__ = "0.1.0"

from .pointcloud import (
    PointCloud,
    NoiseSpec,
    ErrorReport,
    load,
    save,
    generate_shape,
    add_noise,
    error_metrics,
)
from .spectral import (
    SpectrumBasis,
    SpectralPairs,
    SupportingMatrix,
    HgftCoefficients,
    estimate_spectrum,
    supporting_matrix,
    total_variation_component,
    total_variation_signal,
    order_by_frequency,
    hgft,
    ihgft,
)
from .tensor import (
    AdjacencyTensor,
    reconstruct_adjacency,
    contract,
    tensor_norm_sq,
)
from .coeffopt import (
    SmoothnessSystem,
    QpSolution,
    build_smoothness_system,
    most_violated_triples,
    solve_qp_fixed_max,
    estimate_coefficients,
)
from .denoise import (
    DenoiseConfig,
    DenoiseResult,
    denoise_closed_form,
    eval_joint_objective,
    joint_denoise,
)
from .sampling import (
    HpfScores,
    hpf_scores,
    sample_top_k,
    hgft_downsample,
)
from .baselines import (
    GspGraph,
    build_gaussian_graph,
    gft_downsample,
    gsp_tv_denoise,
    laplacian_reg_denoise,
    mls_denoise,
)

__all__ = [
    "PointCloud", "NoiseSpec", "ErrorReport",
    "load", "save", "generate_shape", "add_noise", "error_metrics",
    "SpectrumBasis", "SpectralPairs", "SupportingMatrix", "HgftCoefficients",
    "estimate_spectrum", "supporting_matrix", "total_variation_component",
    "total_variation_signal", "order_by_frequency", "hgft", "ihgft",
    "AdjacencyTensor", "reconstruct_adjacency", "contract", "tensor_norm_sq",
    "SmoothnessSystem", "QpSolution", "build_smoothness_system",
    "most_violated_triples", "solve_qp_fixed_max", "estimate_coefficients",
    "DenoiseConfig", "DenoiseResult", "denoise_closed_form",
    "eval_joint_objective", "joint_denoise",
    "HpfScores", "hpf_scores", "sample_top_k", "hgft_downsample",
    "GspGraph", "build_gaussian_graph", "gft_downsample",
    "gsp_tv_denoise", "laplacian_reg_denoise", "mls_denoise",
]
