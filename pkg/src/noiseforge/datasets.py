"""Converters from third-party archives into the manifest format.

Cora-ML ships as ``cora_ml.npz`` (CSR adjacency + sparse bag-of-words
attributes + labels); this sandboxed build cannot download it, so the
converter takes a local copy and writes the TSV/CSV/JSON layout the
loader consumes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DatasetError

CORA_ML_CLASS_NAMES = [
    "Case-Based", "Genetic Algorithms", "Neural Networks",
    "Probabilistic Methods", "Reinforcement Learning", "Rule Learning", "Theory",
]


def convert_cora_ml_npz(npz_path: str | Path, out_dir: str | Path,
                        write_features: bool = True) -> Path:
    """Convert the published cora_ml.npz into a dataset directory.

    Directed citation arcs are symmetrized and deduplicated; self-loops
    are dropped. Returns the manifest path.
    """
    npz_path = Path(npz_path)
    if not npz_path.exists():
        raise DatasetError(f"npz file not found: {npz_path}")
    data = np.load(npz_path, allow_pickle=True)
    adj = sp.csr_matrix(
        (data["adj_data"], data["adj_indices"], data["adj_indptr"]),
        shape=tuple(data["adj_shape"]),
    )
    labels = np.asarray(data["labels"], dtype=np.int64)
    n = adj.shape[0]
    rows, cols = adj.nonzero()
    pairs = set()
    for u, v in zip(rows.tolist(), cols.tolist()):
        if u == v:
            continue
        pairs.add((min(u, v), max(u, v)))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.tsv", "w") as f:
        for u, v in sorted(pairs):
            f.write(f"{u + 1}\t{v + 1}\n")
    with open(out / "labels.csv", "w") as f:
        f.write("node_id,label\n")
        for i, y in enumerate(labels):
            f.write(f"{i + 1},{int(y) + 1}\n")
    manifest = {
        "name": "cora-ml",
        "directed": False,
        "num_classes": int(labels.max()) + 1,
        "edges": "edges.tsv",
        "labels": "labels.csv",
    }
    if int(labels.max()) + 1 == len(CORA_ML_CLASS_NAMES):
        manifest["class_names"] = CORA_ML_CLASS_NAMES
    if write_features and "attr_data" in data:
        attrs = sp.csr_matrix(
            (data["attr_data"], data["attr_indices"], data["attr_indptr"]),
            shape=tuple(data["attr_shape"]),
        ).toarray()
        np.savetxt(out / "features.csv", attrs, delimiter=",", fmt="%g")
        manifest["features"] = "features.csv"
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path
