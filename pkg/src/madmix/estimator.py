"""Estimator-style wrapper so the mixer composes with sklearn pipelines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .manifest import DomainEmbeddingSet, Manifest, build_domain_embeddings
from .mixer import MixtureConfig, madmix
from .sampling import SamplingPlan, build_plan


class DomainMixer(BaseEstimator):
    """Compute domain-mixture weights from per-modality centroid matrices.

    Parameters
    ----------
    regularization : float, default=10.0
        Positive ridge parameter of the coupled dual solve.
    aggregation : {"equal", "size_weighted"}, default="equal"
        How dataset centroids fold into domain centroids (manifest input only).
    normalization : {"none", "unit_trace"}, default="none"
        Optional per-modality kernel rescaling before coupling.

    Attributes
    ----------
    weights_ : ndarray of shape (k,)
        Softmax-normalized domain weights (sums to one).
    alpha_ : ndarray of shape (k,)
        Latent coupling variables of the dual solve.
    scores_ : ndarray of shape (V, k)
        Per-modality alignment scores; zero where a modality is absent.
    result_ : MixtureResult
        The full result object, including diagnostics.
    """

    def __init__(
        self,
        regularization: float = 10.0,
        aggregation: str = "equal",
        normalization: str = "none",
    ):
        self.regularization = regularization
        self.aggregation = aggregation
        self.normalization = normalization

    def _config(self) -> MixtureConfig:
        return MixtureConfig(
            lam=self.regularization,
            aggregation=self.aggregation,
            normalization=self.normalization,
        )

    def fit(self, X, y=None, presence=None):
        """Fit on domain embeddings.

        X may be a DomainEmbeddingSet, a dict mapping modality name to a
        (k, d_v) centroid array (with optional (k, V) ``presence`` mask),
        or a single (k, d) array treated as one modality.
        """
        if isinstance(X, DomainEmbeddingSet):
            emb = X
        elif isinstance(X, dict):
            checked = {m: check_array(a, dtype=np.float64) for m, a in X.items()}
            emb = DomainEmbeddingSet.from_centroids(checked, presence=presence)
        else:
            arr = check_array(X, dtype=np.float64)
            emb = DomainEmbeddingSet.from_centroids({"modality_0": arr}, presence=presence)
        self.result_ = madmix(emb, self._config())
        self.weights_ = self.result_.weights
        self.alpha_ = self.result_.alpha
        self.scores_ = self.result_.scores_per_modality
        self.domain_names_ = self.result_.domain_names
        self.n_domains_ = len(self.domain_names_)
        return self

    def fit_manifest(self, manifest: Manifest):
        """Fit from a loaded manifest (reads the embedding files)."""
        emb = build_domain_embeddings(manifest, strategy=self.aggregation)
        return self.fit(emb)

    def transform(self, X=None) -> np.ndarray:
        """Return the fitted weight vector (X is ignored)."""
        check_is_fitted(self, "weights_")
        return self.weights_

    def sampling_plan(self, manifest: Manifest, seed: int = 0) -> SamplingPlan:
        """Hierarchical per-dataset plan from the fitted weights."""
        check_is_fitted(self, "weights_")
        return build_plan(self.weights_, manifest, seed=seed)
