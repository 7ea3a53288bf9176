"""In-process binding for training pipelines.

Thin wrappers around the core package: weight computation and sampling
plan construction take a manifest path only, so every caller goes through
the same validated ingestion path as the CLI and the results match its
JSON output exactly. Errors surface as the core's exception types
(``madmix.ValidationError``, ``madmix.NumericalError``, ``OSError``).
"""

from __future__ import annotations

from dataclasses import dataclass

import madmix

__version__ = madmix.__version__

__all__ = ["WeightsResult", "compute_weights", "compute_plan", "__version__"]


@dataclass(frozen=True)
class WeightsResult:
    """Domain weights plus solver diagnostics."""

    weights: dict[str, float]
    diagnostics: dict[str, float]
    lam: float
    delta: list[int]
    alpha: list[float]

    def __getitem__(self, domain: str) -> float:
        return self.weights[domain]


def compute_weights(
    manifest_path,
    lam: float = madmix.DEFAULT_LAMBDA,
    aggregation: str = "equal",
    normalization: str = "none",
) -> WeightsResult:
    """Domain weights for a manifest; values match the CLI JSON exactly."""
    manifest = madmix.load_manifest(manifest_path)
    emb = madmix.build_domain_embeddings(manifest, strategy=aggregation)
    cfg = madmix.MixtureConfig(lam=lam, aggregation=aggregation, normalization=normalization)
    doc = madmix.madmix(emb, cfg).to_json_dict()
    return WeightsResult(
        weights=doc["weights"],
        diagnostics=doc["diagnostics"],
        lam=doc["lambda"],
        delta=doc["delta"],
        alpha=doc["alpha"],
    )


def compute_plan(
    manifest_path, weights: dict[str, float], seed: int = 0
) -> list[tuple[str, str, float]]:
    """Hierarchical (domain, dataset, probability) plan entries.

    ``weights`` maps every domain in the manifest to its weight, e.g. the
    ``weights`` mapping of :func:`compute_weights`.
    """
    import numpy as np

    manifest = madmix.load_manifest(manifest_path)
    missing = [name for name in manifest.domain_names if name not in weights]
    if missing:
        raise madmix.ValidationError(f"weights missing for domains: {missing}")
    vec = np.array([weights[name] for name in manifest.domain_names])
    plan = madmix.build_plan(vec, manifest, seed=seed)
    return [(e.domain, e.dataset, e.probability) for e in plan.entries]
