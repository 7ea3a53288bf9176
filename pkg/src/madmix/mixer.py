"""Closed-form multi-modal mixture weights.

The coupled dual system (K_MM + lambda*I) alpha = delta is solved by
Cholesky factorization; per-modality alignment scores are K^[v] alpha,
and domain weights are the softmax of the summed scores. Baseline and
variant scoring rules (uniform, single-modality, averaged, spectral,
orthogonal) live here too, along with the primal ridge form used as a
Woodbury cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh, LinAlgError

from .exceptions import NumericalError, ValidationError
from .kernels import NORMALIZATIONS, Kernel, KernelSet, build_kernel_set
from .manifest import AGGREGATION_STRATEGIES, DomainEmbeddingSet

DEFAULT_LAMBDA = 10.0

# one Cholesky retry with this much diagonal jitter (relative to trace)
_JITTER_REL = 1e-10
_REFINE_REL_RESIDUAL = 1e-12


@dataclass(frozen=True)
class MixtureConfig:
    """Knobs for the weight computation."""

    lam: float = DEFAULT_LAMBDA
    aggregation: str = "equal"
    normalization: str = "none"
    target: np.ndarray | None = None  # override for delta; defaults to modality counts
    temperature: float = 1.0

    def __post_init__(self) -> None:
        if not self.lam > 0.0:
            raise ValidationError("lambda must be positive")
        if self.aggregation not in AGGREGATION_STRATEGIES:
            raise ValidationError(f"unknown aggregation {self.aggregation!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError(f"unknown normalization {self.normalization!r}")
        if not self.temperature > 0.0:
            raise ValidationError("temperature must be positive")


@dataclass(frozen=True)
class Diagnostics:
    residual: float  # ||(K_MM + lam I) alpha - delta||
    residual_relative: float
    condition: float

    def to_dict(self) -> dict:
        return {
            "residual": self.residual,
            "residual_relative": self.residual_relative,
            "condition": self.condition,
        }


@dataclass(frozen=True)
class MixtureResult:
    domain_names: tuple[str, ...]
    modality_names: tuple[str, ...]
    lam: float
    delta: np.ndarray
    alpha: np.ndarray
    scores_per_modality: np.ndarray  # (V, k)
    scores_total: np.ndarray  # (k,)
    weights: np.ndarray  # (k,), on the simplex
    config: MixtureConfig
    diagnostics: Diagnostics

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "delta": [int(d) for d in self.delta],
            "alpha": [float(a) for a in self.alpha],
            "scores": {
                mod: [float(s) for s in self.scores_per_modality[v]]
                for v, mod in enumerate(self.modality_names)
            },
            "scores_total": [float(s) for s in self.scores_total],
            "weights": {
                name: float(w) for name, w in zip(self.domain_names, self.weights)
            },
            "diagnostics": self.diagnostics.to_dict(),
        }


def _spd_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Cholesky solve with one jittered retry, then iterative refinement."""
    sym = (matrix + matrix.T) / 2.0
    try:
        factor = cho_factor(sym, lower=True)
    except LinAlgError:
        jitter = _JITTER_REL * max(float(np.trace(sym)), 1.0)
        try:
            factor = cho_factor(sym + jitter * np.eye(sym.shape[0]), lower=True)
        except LinAlgError as exc:
            raise NumericalError(
                "Cholesky factorization failed even with jitter; kernel is corrupted"
            ) from exc
    x = cho_solve(factor, rhs)
    resid = rhs - sym @ x
    if np.linalg.norm(resid) > _REFINE_REL_RESIDUAL * np.linalg.norm(rhs):
        x = x + cho_solve(factor, resid)
    return x


def _condition_estimate(matrix: np.ndarray, steps: int = 100, tol: float = 1e-6) -> float:
    """Extreme-eigenvalue ratio of an SPD matrix via power iteration."""
    k = matrix.shape[0]
    if k == 1:
        return 1.0
    rng = np.random.default_rng(0)

    def dominant(apply) -> float:
        x = rng.standard_normal(k)
        x /= np.linalg.norm(x)
        prev = 0.0
        for _ in range(steps):
            y = apply(x)
            norm = np.linalg.norm(y)
            if norm == 0.0:
                return 0.0
            x = y / norm
            est = float(x @ apply(x))
            if abs(est - prev) <= tol * abs(est):
                return est
            prev = est
        return prev

    lam_max = dominant(lambda x: matrix @ x)
    factor = cho_factor((matrix + matrix.T) / 2.0, lower=True)
    inv_lam_min = dominant(lambda x: cho_solve(factor, x))
    if inv_lam_min <= 0.0:
        return float("inf")
    return lam_max * inv_lam_min


def solve_latent(
    kmm: Kernel, delta: np.ndarray, lam: float
) -> tuple[np.ndarray, Diagnostics]:
    """Solve (K_MM + lambda*I) alpha = delta for the coupling variables."""
    if not lam > 0.0:
        raise ValidationError("lambda must be positive")
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (kmm.k,):
        raise ValidationError(f"delta shape {delta.shape} != ({kmm.k},)")
    if np.any(delta < 1):
        raise ValidationError("every domain must have at least one present modality")
    system = kmm.values + lam * np.eye(kmm.k)
    alpha = _spd_solve(system, delta)
    residual = float(np.linalg.norm(system @ alpha - delta))
    rel = residual / float(np.linalg.norm(delta))
    return alpha, Diagnostics(residual, rel, _condition_estimate(system))


def modality_scores(kv: Kernel, alpha: np.ndarray) -> np.ndarray:
    """Alignment scores K^[v] alpha for one modality."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (kv.k,):
        raise ValidationError(f"alpha shape {alpha.shape} != ({kv.k},)")
    return kv.values @ alpha


def softmax(scores: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Numerically stable softmax (max-subtraction is mandatory)."""
    scores = np.asarray(scores, dtype=np.float64) / temperature
    if not np.all(np.isfinite(scores)):
        raise ValidationError("scores must be finite")
    shifted = scores - scores.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def aggregate_and_softmax(
    scores_per_modality: np.ndarray, temperature: float = 1.0
) -> np.ndarray:
    """Sum scores over modalities, then softmax onto the simplex."""
    totals = np.asarray(scores_per_modality, dtype=np.float64).sum(axis=0)
    return softmax(totals, temperature)


def madmix(emb: DomainEmbeddingSet, cfg: MixtureConfig | None = None) -> MixtureResult:
    """Full pipeline: kernels -> coupled solve -> scores -> softmax weights."""
    cfg = cfg or MixtureConfig()
    kset = build_kernel_set(emb, cfg.normalization)
    delta = emb.modality_counts if cfg.target is None else np.asarray(cfg.target)
    alpha, diag = solve_latent(kset.multimodal, delta, cfg.lam)
    scores = np.vstack([modality_scores(kv, alpha) for kv in kset.per_modality])
    weights = aggregate_and_softmax(scores, cfg.temperature)
    return MixtureResult(
        domain_names=emb.domain_names,
        modality_names=emb.modality_names,
        lam=cfg.lam,
        delta=np.asarray(delta, dtype=np.float64),
        alpha=alpha,
        scores_per_modality=scores,
        scores_total=scores.sum(axis=0),
        weights=weights,
        config=cfg,
        diagnostics=diag,
    )


def unimodal_score(
    kern: Kernel, lam: float, target: np.ndarray | None = None
) -> np.ndarray:
    """Dual-form score K (K + lambda*I)^{-1} target (default target: ones)."""
    if not lam > 0.0:
        raise ValidationError("lambda must be positive")
    target = np.ones(kern.k) if target is None else np.asarray(target, dtype=np.float64)
    if target.shape != (kern.k,):
        raise ValidationError(f"target shape {target.shape} != ({kern.k},)")
    z = _spd_solve(kern.values + lam * np.eye(kern.k), target)
    return kern.values @ z


def primal_score(
    centroids: np.ndarray, lam: float, target: np.ndarray | None = None
) -> np.ndarray:
    """Covariance-form score X (X^T X + lambda*I_d)^{-1} X^T target.

    Kept as an independent cross-check of :func:`unimodal_score`; the two
    agree by the Woodbury identity.
    """
    if not lam > 0.0:
        raise ValidationError("lambda must be positive")
    x = np.asarray(centroids, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("centroids must be a (k, d) matrix")
    k, d = x.shape
    target = np.ones(k) if target is None else np.asarray(target, dtype=np.float64)
    if target.shape != (k,):
        raise ValidationError(f"target shape {target.shape} != ({k},)")
    w = _spd_solve(x.T @ x + lam * np.eye(d), x.T @ target)
    return x @ w


def spectral_score(kmm: Kernel, delta: np.ndarray, lam: float) -> np.ndarray:
    """Total scores via the eigenfilter sigma/(sigma + lambda) of K_MM."""
    if not lam > 0.0:
        raise ValidationError("lambda must be positive")
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (kmm.k,):
        raise ValidationError(f"delta shape {delta.shape} != ({kmm.k},)")
    try:
        eigvals, eigvecs = eigh(kmm.values)
    except LinAlgError as exc:  # pragma: no cover - eigh on symmetric input
        raise NumericalError("eigendecomposition failed") from exc
    filt = eigvals / (eigvals + lam)
    return eigvecs @ (filt * (eigvecs.T @ delta))


def orthogonal_score(
    kernels: KernelSet, presence: np.ndarray, lam: float
) -> np.ndarray:
    """Uniqueness-style scores delta_j * diag(K^[v] (K_MM + lambda*I)^{-1}).

    Returns a (V, k) matrix; softmax aggregation downstream is the same
    as for the alignment scores.
    """
    if not lam > 0.0:
        raise ValidationError("lambda must be positive")
    kmm = kernels.multimodal
    delta = np.asarray(presence, dtype=np.float64).sum(axis=1)
    inv = _spd_solve(kmm.values + lam * np.eye(kmm.k), np.eye(kmm.k))
    scores = np.empty((len(kernels.per_modality), kmm.k))
    for v, kv in enumerate(kernels.per_modality):
        scores[v] = delta * np.einsum("ij,ji->i", kv.values, inv)
    return scores


def baseline_uniform(k: int) -> np.ndarray:
    """Equal weight per domain."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    return np.full(k, 1.0 / k)


def baseline_single_modality(
    emb: DomainEmbeddingSet, v: int | str, lam: float = DEFAULT_LAMBDA
) -> np.ndarray:
    """Weights from one modality alone; absent domains get exactly zero.

    Scores come from the single-modality dual form on the sub-kernel of
    present domains, softmax-normalized over those domains.
    """
    if isinstance(v, str):
        if v not in emb.modality_names:
            raise ValidationError(f"unknown modality {v!r}")
        v = emb.modality_names.index(v)
    present = emb.presence[:, v] == 1
    if not present.any():
        raise ValidationError(f"modality {emb.modality_names[v]!r} is present nowhere")
    x = emb.centroids[v][present]
    sub_kernel = Kernel(x @ x.T)
    scores = unimodal_score(sub_kernel, lam)
    weights = np.zeros(emb.k)
    weights[present] = softmax(scores)
    return weights


def baseline_avg(per_modality_weights: np.ndarray) -> np.ndarray:
    """Arithmetic mean of per-modality weight vectors; stays on the simplex."""
    mat = np.asarray(per_modality_weights, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise ValidationError("expected a (V, k) stack of weight vectors")
    for row in mat:
        if abs(row.sum() - 1.0) > 1e-9 or np.any(row < 0.0):
            raise ValidationError("each input vector must lie on the simplex")
    return mat.mean(axis=0)


def lambda_sweep(
    emb: DomainEmbeddingSet, cfg: MixtureConfig, lambdas: list[float]
) -> list[tuple[float, MixtureResult]]:
    """Run the pipeline once per lambda, preserving input order."""
    if not lambdas:
        raise ValidationError("lambda list must be nonempty")
    return [(lam, madmix(emb, replace(cfg, lam=lam))) for lam in lambdas]
