"""Hierarchical sampling plans and reproducible weighted draw streams.

A plan assigns each (domain, dataset) pair the probability
P = (|DS| / |D_i|) * p_i, where p_i is the domain weight and |D_i| the
total sample count of domain i. Draws use NumPy's PCG64 generator seeded
through SeedSequence, with inverse-CDF lookup over the cumulative plan
probabilities, so a (plan, seed) pair always reproduces the same stream.
Worker streams derive from spawn key (seed, worker_index).
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .manifest import Manifest

# entries below this probability are roundoff noise; clamp and renormalize
_CLAMP_THRESHOLD = 1e-15


@dataclass(frozen=True)
class PlanEntry:
    domain: str
    dataset: str
    probability: float


@dataclass(frozen=True)
class SamplingPlan:
    entries: tuple[PlanEntry, ...]
    seed: int

    def __post_init__(self) -> None:
        probs = self.probabilities
        if np.any(probs < 0.0):
            raise ValidationError("plan probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError(f"plan probabilities sum to {probs.sum()!r}, not 1")

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([e.probability for e in self.entries], dtype=np.float64)

    def domain_marginals(self) -> dict[str, float]:
        totals: dict[str, float] = {}
        for e in self.entries:
            totals[e.domain] = totals.get(e.domain, 0.0) + e.probability
        return totals

    def weights_checksum(self) -> str:
        """SHA-256 over the float64 little-endian bytes of the probabilities."""
        return hashlib.sha256(self.probabilities.astype("<f8").tobytes()).hexdigest()

    def to_jsonl(self) -> str:
        """Header line with seed and checksum, then one entry per line."""
        lines = [json.dumps({"seed": self.seed, "checksum": self.weights_checksum()})]
        for e in self.entries:
            lines.append(
                json.dumps({"domain": e.domain, "dataset": e.dataset, "p": e.probability})
            )
        return "\n".join(lines) + "\n"


def build_plan(weights: np.ndarray, manifest: Manifest, seed: int = 0) -> SamplingPlan:
    """Split each domain weight over its datasets proportionally to size."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (manifest.k,):
        raise ValidationError(
            f"got {weights.shape[0] if weights.ndim == 1 else weights.shape} weights "
            f"for {manifest.k} domains"
        )
    if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValidationError("weights must lie on the probability simplex")

    entries = []
    for dom, p_i in zip(manifest.domains, weights):
        total = dom.total_size
        for ds in dom.datasets:
            entries.append(PlanEntry(dom.name, ds.name, (ds.size / total) * p_i))

    probs = np.array([e.probability for e in entries])
    tiny = (probs > 0.0) & (probs < _CLAMP_THRESHOLD)
    if tiny.any():
        warnings.warn(
            f"clamping {int(tiny.sum())} plan entries below {_CLAMP_THRESHOLD} to zero",
            stacklevel=2,
        )
        probs[tiny] = 0.0
        probs /= probs.sum()
        entries = [
            PlanEntry(e.domain, e.dataset, float(p)) for e, p in zip(entries, probs)
        ]
    return SamplingPlan(tuple(entries), int(seed))


class DrawStream:
    """Single-consumer stream of categorical draws over a plan.

    Deterministic for a given (plan, seed, worker): the PCG64 state comes
    from ``SeedSequence(seed, spawn_key=(worker,))``. Ties on the CDF
    boundaries resolve toward the lower index.
    """

    def __init__(self, plan: SamplingPlan, worker: int = 0):
        self.plan = plan
        self.worker = int(worker)
        self.counter = 0
        seq = np.random.SeedSequence(plan.seed, spawn_key=(self.worker,))
        self._rng = np.random.Generator(np.random.PCG64(seq))
        probs = plan.probabilities
        self._live = np.flatnonzero(probs > 0.0)
        self._cdf = np.cumsum(probs[self._live])
        self._cdf[-1] = 1.0

    def draw(self, n: int) -> list[tuple[str, str]]:
        """n categorical draws, with replacement, as (domain, dataset) pairs."""
        if n < 0:
            raise ValidationError("draw count must be nonnegative")
        if n == 0:
            return []
        u = self._rng.random(n)
        idx = self._live[np.searchsorted(self._cdf, u, side="left")]
        self.counter += n
        return [(self.plan.entries[i].domain, self.plan.entries[i].dataset) for i in idx]


def expected_counts(plan: SamplingPlan, n: int) -> list[tuple[PlanEntry, float]]:
    """Exact expected draw counts n*P per plan entry."""
    if n < 0:
        raise ValidationError("count must be nonnegative")
    return [(e, n * e.probability) for e in plan.entries]


def draws_to_csv(draws: list[tuple[str, str]]) -> str:
    """CSV export with columns step, domain, dataset."""
    lines = ["step,domain,dataset"]
    lines.extend(f"{i},{dom},{ds}" for i, (dom, ds) in enumerate(draws))
    return "\n".join(lines) + "\n"
