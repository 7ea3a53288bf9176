"""Multi-modal domain-mixture weights and hierarchical sampling plans."""

from .estimator import DomainMixer
from .exceptions import (
    EmbeddingFormatError,
    MadmixError,
    ManifestError,
    NumericalError,
    ValidationError,
)
from .kernels import (
    Kernel,
    KernelSet,
    build_kernel_set,
    modality_kernel,
    multimodal_kernel,
    unit_trace_normalize,
)
from .manifest import (
    DatasetSpec,
    DomainEmbeddingSet,
    DomainSpec,
    Manifest,
    build_domain_embeddings,
    dataset_centroid,
    domain_centroid,
    load_manifest,
    read_embedding_file,
    write_embedding_file,
)
from .mixer import (
    DEFAULT_LAMBDA,
    Diagnostics,
    MixtureConfig,
    MixtureResult,
    aggregate_and_softmax,
    baseline_avg,
    baseline_single_modality,
    baseline_uniform,
    lambda_sweep,
    madmix,
    modality_scores,
    orthogonal_score,
    primal_score,
    softmax,
    solve_latent,
    spectral_score,
    unimodal_score,
)
from .sampling import (
    DrawStream,
    PlanEntry,
    SamplingPlan,
    build_plan,
    draws_to_csv,
    expected_counts,
)

__version__ = "0.1.0"

__all__ = [
    "DomainMixer",
    "MadmixError",
    "ValidationError",
    "ManifestError",
    "EmbeddingFormatError",
    "NumericalError",
    "Kernel",
    "KernelSet",
    "build_kernel_set",
    "modality_kernel",
    "multimodal_kernel",
    "unit_trace_normalize",
    "Manifest",
    "DomainSpec",
    "DatasetSpec",
    "DomainEmbeddingSet",
    "load_manifest",
    "read_embedding_file",
    "write_embedding_file",
    "dataset_centroid",
    "domain_centroid",
    "build_domain_embeddings",
    "DEFAULT_LAMBDA",
    "MixtureConfig",
    "MixtureResult",
    "Diagnostics",
    "solve_latent",
    "modality_scores",
    "softmax",
    "aggregate_and_softmax",
    "madmix",
    "unimodal_score",
    "primal_score",
    "spectral_score",
    "orthogonal_score",
    "baseline_uniform",
    "baseline_single_modality",
    "baseline_avg",
    "lambda_sweep",
    "SamplingPlan",
    "PlanEntry",
    "DrawStream",
    "build_plan",
    "expected_counts",
    "draws_to_csv",
    "__version__",
]
