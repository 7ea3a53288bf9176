"""Manifest loading, embedding I/O, and centroid aggregation.

A manifest is a JSON file declaring domains, their datasets (with sample
counts) and per-modality embedding files. Embedding files hold raw
per-sample embeddings; this module reduces them to one centroid per
(domain, modality), zero-filling modalities a domain does not have.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import EmbeddingFormatError, ManifestError

EMBEDDING_MAGIC = b"MDX1"
_HEADER = struct.Struct("<4sIII")

AGGREGATION_STRATEGIES = ("equal", "size_weighted")


@dataclass(frozen=True)
class DatasetSpec:
    """One dataset inside a domain."""

    name: str
    size: int
    embedding_files: dict[str, Path]


@dataclass(frozen=True)
class DomainSpec:
    name: str
    datasets: tuple[DatasetSpec, ...]

    @property
    def total_size(self) -> int:
        return sum(ds.size for ds in self.datasets)

    @property
    def present_modalities(self) -> frozenset[str]:
        # validated at load time: identical across the domain's datasets
        return frozenset(self.datasets[0].embedding_files)


@dataclass(frozen=True)
class Manifest:
    modalities: tuple[str, ...]
    domains: tuple[DomainSpec, ...]

    @property
    def k(self) -> int:
        return len(self.domains)

    @property
    def domain_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.domains)


@dataclass(frozen=True)
class DomainEmbeddingSet:
    """Per-domain, per-modality centroids with presence indicators.

    ``centroids[v]`` is a (k, d_v) array; row i is the zero vector exactly
    when domain i lacks modality v (``presence[i, v] == 0``).
    """

    domain_names: tuple[str, ...]
    modality_names: tuple[str, ...]
    centroids: tuple[np.ndarray, ...]
    presence: np.ndarray  # (k, V) of {0, 1}

    def __post_init__(self) -> None:
        k, n_mod = len(self.domain_names), len(self.modality_names)
        if self.presence.shape != (k, n_mod):
            raise ManifestError(
                f"presence shape {self.presence.shape} != ({k}, {n_mod})"
            )
        if len(self.centroids) != n_mod:
            raise ManifestError("one centroid matrix required per modality")
        for v, mat in enumerate(self.centroids):
            if mat.shape[0] != k:
                raise ManifestError(
                    f"modality {self.modality_names[v]!r}: {mat.shape[0]} rows, expected {k}"
                )
            for i in range(k):
                if not self.presence[i, v] and np.any(mat[i] != 0.0):
                    raise ManifestError(
                        f"domain {self.domain_names[i]!r} marked absent for "
                        f"{self.modality_names[v]!r} but has nonzero centroid"
                    )
        if np.any(self.modality_counts < 1):
            bad = self.domain_names[int(np.argmin(self.modality_counts))]
            raise ManifestError(f"domain {bad!r} has no present modality")

    @property
    def k(self) -> int:
        return len(self.domain_names)

    @property
    def n_modalities(self) -> int:
        return len(self.modality_names)

    @property
    def modality_counts(self) -> np.ndarray:
        """Number of present modalities per domain (the regression target)."""
        return self.presence.sum(axis=1).astype(np.int64)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(mat.shape[1] for mat in self.centroids)

    @classmethod
    def from_centroids(
        cls,
        centroids: dict[str, np.ndarray],
        presence: np.ndarray | None = None,
        domain_names: Sequence[str] | None = None,
    ) -> "DomainEmbeddingSet":
        """Build directly from per-modality (k, d_v) centroid arrays.

        With ``presence=None`` every modality is treated as present in
        every domain. Rows for absent modalities are forced to zero.
        """
        modality_names = tuple(centroids)
        mats = [np.ascontiguousarray(centroids[m], dtype=np.float64) for m in modality_names]
        k = mats[0].shape[0]
        if presence is None:
            presence = np.ones((k, len(mats)), dtype=np.int8)
        presence = np.asarray(presence, dtype=np.int8)
        for v, mat in enumerate(mats):
            mat[presence[:, v] == 0] = 0.0
        if domain_names is None:
            domain_names = tuple(f"domain_{i}" for i in range(k))
        return cls(tuple(domain_names), modality_names, tuple(mats), presence)


def load_manifest(path: str | Path) -> Manifest:
    """Load and validate a manifest JSON file.

    Embedding paths are resolved relative to the manifest's directory.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from exc

    if not isinstance(raw, dict) or "modalities" not in raw or "domains" not in raw:
        raise ManifestError(f"{path}: expected object with 'modalities' and 'domains'")

    modalities = tuple(raw["modalities"])
    if len(set(modalities)) != len(modalities):
        dupes = sorted({m for m in modalities if modalities.count(m) > 1})
        raise ManifestError(f"duplicate modality names: {dupes}")
    if not modalities:
        raise ManifestError("manifest declares no modalities")

    base = path.parent
    domains = []
    seen_domains: set[str] = set()
    for dom in raw["domains"]:
        name = dom.get("name")
        if not name:
            raise ManifestError("domain without a name")
        if name in seen_domains:
            raise ManifestError(f"duplicate domain name: {name!r}")
        seen_domains.add(name)

        datasets = []
        seen_ds: set[str] = set()
        for ds in dom.get("datasets", []):
            ds_name = ds.get("name")
            if not ds_name:
                raise ManifestError(f"domain {name!r}: dataset without a name")
            if ds_name in seen_ds:
                raise ManifestError(f"domain {name!r}: duplicate dataset name {ds_name!r}")
            seen_ds.add(ds_name)
            size = ds.get("size")
            if not isinstance(size, int) or size < 1:
                raise ManifestError(
                    f"domain {name!r}, dataset {ds_name!r}: size must be a positive integer"
                )
            files = {}
            for mod, rel in ds.get("embeddings", {}).items():
                if mod not in modalities:
                    raise ManifestError(
                        f"domain {name!r}, dataset {ds_name!r}: unknown modality {mod!r}"
                    )
                files[mod] = base / rel
            datasets.append(DatasetSpec(ds_name, size, files))

        if not datasets:
            raise ManifestError(f"domain {name!r} has no datasets")
        key_sets = {frozenset(ds.embedding_files) for ds in datasets}
        if len(key_sets) != 1:
            raise ManifestError(
                f"domain {name!r}: datasets disagree on available modalities"
            )
        if not next(iter(key_sets)):
            raise ManifestError(f"domain {name!r} has no present modality")
        domains.append(DomainSpec(name, tuple(datasets)))

    if not domains:
        raise ManifestError("manifest declares no domains")

    present_anywhere = set().union(*(d.present_modalities for d in domains))
    missing = [m for m in modalities if m not in present_anywhere]
    if missing:
        raise ManifestError(f"modalities present in no domain: {missing}")

    return Manifest(modalities, tuple(domains))


def read_embedding_file(path: str | Path) -> np.ndarray:
    """Read an embedding file as a float64 (n, d) matrix.

    Binary files start with magic ``MDX1`` followed by little-endian
    u32 n_rows, u32 dim, u32 reserved(=0), then n_rows*dim float32 values
    row-major. Anything else is parsed as headerless CSV.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[:4] == EMBEDDING_MAGIC:
        if len(data) < _HEADER.size:
            raise EmbeddingFormatError(f"{path}: truncated header")
        _, n, d, reserved = _HEADER.unpack_from(data)
        if reserved != 0:
            raise EmbeddingFormatError(f"{path}: reserved header field must be 0")
        if n < 1 or d < 1:
            raise EmbeddingFormatError(f"{path}: empty matrix ({n}x{d})")
        payload = data[_HEADER.size:]
        if len(payload) != 4 * n * d:
            raise EmbeddingFormatError(
                f"{path}: payload holds {len(payload) // 4} floats, header declares {n * d}"
            )
        mat = np.frombuffer(payload, dtype="<f4").reshape(n, d)
    else:
        try:
            mat = np.loadtxt(path.open("r", encoding="utf-8"), delimiter=",", ndmin=2)
        except ValueError as exc:
            raise EmbeddingFormatError(f"{path}: CSV parse failed: {exc}") from exc
        if mat.size == 0:
            raise EmbeddingFormatError(f"{path}: empty CSV")
    mat = np.asarray(mat, dtype=np.float64)
    if not np.all(np.isfinite(mat)):
        raise EmbeddingFormatError(f"{path}: non-finite value in embeddings")
    return mat


def write_embedding_file(path: str | Path, matrix: np.ndarray) -> None:
    """Write a matrix in the binary embedding format (float32 payload)."""
    mat = np.ascontiguousarray(matrix, dtype="<f4")
    n, d = mat.shape
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(EMBEDDING_MAGIC, n, d, 0))
        fh.write(mat.tobytes())


def dataset_centroid(matrix: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the rows, in double precision."""
    return np.asarray(matrix, dtype=np.float64).mean(axis=0)


def domain_centroid(
    centroids_with_sizes: Sequence[tuple[np.ndarray, int]],
    strategy: str = "equal",
) -> np.ndarray:
    """Aggregate dataset centroids into one domain centroid.

    ``equal`` takes the unweighted mean; ``size_weighted`` weights each
    dataset centroid by its sample count.
    """
    if strategy not in AGGREGATION_STRATEGIES:
        raise ManifestError(f"unknown aggregation strategy {strategy!r}")
    if not centroids_with_sizes:
        raise ManifestError("no dataset centroids to aggregate")
    vecs = [np.asarray(c, dtype=np.float64) for c, _ in centroids_with_sizes]
    dims = {v.shape for v in vecs}
    if len(dims) != 1:
        raise ManifestError(f"centroid dimension mismatch: {sorted(dims)}")
    if strategy == "equal":
        return np.mean(vecs, axis=0)
    sizes = np.array([s for _, s in centroids_with_sizes], dtype=np.float64)
    return np.tensordot(sizes, np.stack(vecs), axes=1) / sizes.sum()


def build_domain_embeddings(
    manifest: Manifest,
    strategy: str = "equal",
    center: bool = False,
    l2_normalize: bool = False,
) -> DomainEmbeddingSet:
    """Reduce all embedding files to per-(domain, modality) centroids.

    ``l2_normalize`` rescales each sample row to unit norm before
    averaging; ``center`` subtracts the per-modality mean of the present
    domain centroids afterwards (absent rows stay exactly zero). Both are
    off by default.
    """
    if strategy not in AGGREGATION_STRATEGIES:
        raise ManifestError(f"unknown aggregation strategy {strategy!r}")
    k = manifest.k
    n_mod = len(manifest.modalities)
    presence = np.zeros((k, n_mod), dtype=np.int8)
    per_modality: list[np.ndarray | None] = [None] * n_mod

    for v, mod in enumerate(manifest.modalities):
        dim: int | None = None
        rows: list[np.ndarray | None] = [None] * k
        for i, dom in enumerate(manifest.domains):
            if mod not in dom.present_modalities:
                continue
            pairs = []
            for ds in dom.datasets:
                mat = read_embedding_file(ds.embedding_files[mod])
                if l2_normalize:
                    norms = np.linalg.norm(mat, axis=1, keepdims=True)
                    norms[norms == 0.0] = 1.0
                    mat = mat / norms
                if dim is None:
                    dim = mat.shape[1]
                elif mat.shape[1] != dim:
                    raise ManifestError(
                        f"modality {mod!r}: dimension {mat.shape[1]} in "
                        f"{dom.name}/{ds.name} differs from {dim}"
                    )
                pairs.append((dataset_centroid(mat), ds.size))
            rows[i] = domain_centroid(pairs, strategy)
            presence[i, v] = 1
        assert dim is not None  # modality presence validated at load
        mat = np.zeros((k, dim), dtype=np.float64)
        for i, row in enumerate(rows):
            if row is not None:
                mat[i] = row
        if center:
            mask = presence[:, v] == 1
            mat[mask] -= mat[mask].mean(axis=0)
        per_modality[v] = mat

    return DomainEmbeddingSet(
        manifest.domain_names,
        manifest.modalities,
        tuple(per_modality),  # type: ignore[arg-type]
        presence,
    )
