"""Domain-affinity kernels: per-modality Gram matrices and their coupled sum."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import NumericalError, ValidationError
from .manifest import DomainEmbeddingSet

NORMALIZATIONS = ("none", "unit_trace")

# PSD tolerance: min eigenvalue may dip below zero by roundoff only
_PSD_REL_TOL = 1e-8


@dataclass(frozen=True)
class Kernel:
    """A k x k symmetric PSD-up-to-roundoff matrix of domain affinities."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValidationError(f"kernel must be square, got shape {vals.shape}")
        # symmetrize before any check; guards the downstream SPD solve
        vals = (vals + vals.T) / 2.0
        object.__setattr__(self, "values", vals)
        tr = float(np.trace(vals))
        min_eig = float(np.linalg.eigvalsh(vals)[0]) if vals.shape[0] else 0.0
        if min_eig < -_PSD_REL_TOL * max(tr, 0.0):
            raise ValidationError(
                f"kernel is not PSD within tolerance: min eigenvalue {min_eig:.3e}, "
                f"trace {tr:.3e}"
            )

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.values))


@dataclass(frozen=True)
class KernelSet:
    """Per-modality kernels plus their elementwise sum."""

    per_modality: tuple[Kernel, ...]
    multimodal: Kernel
    normalization: str = "none"

    def __post_init__(self) -> None:
        total = sum(kern.values for kern in self.per_modality)
        if not np.allclose(total, self.multimodal.values, rtol=0.0, atol=1e-12):
            raise ValidationError("multimodal kernel is not the sum of the per-modality kernels")


def modality_kernel(emb: DomainEmbeddingSet, v: int) -> Kernel:
    """Gram matrix of modality v's centroids; absent domains give zero rows."""
    if not 0 <= v < emb.n_modalities:
        raise ValidationError(f"modality index {v} out of range [0, {emb.n_modalities})")
    x = emb.centroids[v]
    return Kernel(x @ x.T)


def multimodal_kernel(kernels: Sequence[Kernel]) -> Kernel:
    """Elementwise sum of per-modality kernels."""
    if not kernels:
        raise ValidationError("no kernels to sum")
    orders = {kern.k for kern in kernels}
    if len(orders) != 1:
        raise ValidationError(f"kernel order mismatch: {sorted(orders)}")
    return Kernel(sum(kern.values for kern in kernels))


def unit_trace_normalize(kern: Kernel) -> Kernel:
    """Rescale so the trace equals one."""
    tr = kern.trace
    if tr <= 0.0:
        raise NumericalError(
            "cannot unit-trace normalize a kernel with nonpositive trace "
            "(modality absent everywhere?)"
        )
    return Kernel(kern.values / tr)


def build_kernel_set(emb: DomainEmbeddingSet, normalization: str = "none") -> KernelSet:
    """Per-modality kernels (optionally unit-trace normalized) and their sum."""
    if normalization not in NORMALIZATIONS:
        raise ValidationError(f"unknown normalization {normalization!r}")
    per_mod = [modality_kernel(emb, v) for v in range(emb.n_modalities)]
    if normalization == "unit_trace":
        per_mod = [unit_trace_normalize(kern) for kern in per_mod]
    return KernelSet(tuple(per_mod), multimodal_kernel(per_mod), normalization)
