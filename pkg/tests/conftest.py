import json
from pathlib import Path

import numpy as np
import pytest

from madmix.manifest import write_embedding_file


def write_manifest(root: Path, modalities, domains) -> Path:
    """Write a manifest plus binary embedding files under ``root``.

    ``domains`` is a list of (name, datasets) where each dataset is
    (ds_name, size, {modality: (n, d) array}).
    """
    root.mkdir(parents=True, exist_ok=True)
    doc = {"modalities": list(modalities), "domains": []}
    for dom_name, datasets in domains:
        dom = {"name": dom_name, "datasets": []}
        for ds_name, size, mats in datasets:
            files = {}
            for mod, mat in mats.items():
                rel = f"{dom_name}_{ds_name}_{mod}.mdx"
                write_embedding_file(root / rel, np.asarray(mat))
                files[mod] = rel
            dom["datasets"].append({"name": ds_name, "size": int(size), "embeddings": files})
        doc["domains"].append(dom)
    path = root / "manifest.json"
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return path


@pytest.fixture
def two_domain_manifest(tmp_path):
    """The hand-derived fixture: K_MM = diag(2, 1), delta = (2, 1).

    Domain A has centroids (1,0) in both modalities; domain B has (0,1)
    in modality m1 only. At lambda=1 the weights are (0.6971, 0.3029).
    """
    return write_manifest(
        tmp_path / "two_domain",
        ["m1", "m2"],
        [
            ("A", [("a0", 4, {"m1": [[1.0, 0.0]] * 2, "m2": [[1.0, 0.0]] * 2})]),
            ("B", [("b0", 4, {"m1": [[0.0, 1.0]] * 2})]),
        ],
    )


@pytest.fixture
def five_domain_manifest(tmp_path):
    """Image-text fixture: 5 domains, the Language domain lacks images."""
    rng = np.random.default_rng(42)
    names = ["General", "DocChartScreen", "MathReasoning", "GeneralOCR", "Language"]
    domains = []
    for i, name in enumerate(names):
        datasets = []
        for j in range(2):
            mats = {"text": rng.standard_normal((8, 6))}
            if name != "Language":
                mats["image"] = rng.standard_normal((8, 10))
            datasets.append((f"ds{j}", 10 * (i + 1) + j, mats))
        domains.append((name, datasets))
    return write_manifest(tmp_path / "five_domain", ["text", "image"], domains)


def random_embedding_set(rng, k=None, n_modalities=None, max_dim=8):
    """Random DomainEmbeddingSet with a random missing-modality pattern."""
    from madmix.manifest import DomainEmbeddingSet

    k = k or int(rng.integers(1, 13))
    n_modalities = n_modalities or int(rng.integers(1, 5))
    presence = (rng.random((k, n_modalities)) < 0.7).astype(np.int8)
    for i in range(k):  # every domain needs >= 1 modality
        if presence[i].sum() == 0:
            presence[i, rng.integers(n_modalities)] = 1
    centroids = {}
    for v in range(n_modalities):
        d = int(rng.integers(2, max_dim + 1))
        centroids[f"mod{v}"] = rng.standard_normal((k, d))
    return DomainEmbeddingSet.from_centroids(centroids, presence=presence)
