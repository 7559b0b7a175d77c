"""Shared matrix and label I/O.

Binary matrix format: 8-byte magic ``NFMATRX\\0``, two little-endian
uint64 (rows, cols), then row-major float64 payload. A plain CSV variant
is accepted everywhere the binary one is.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .graph import LabelSet

MAGIC = b"NFMATRX\x00"


def write_matrix_bin(path: str | Path, m: np.ndarray):
    m = np.ascontiguousarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DatasetError("binary matrix format stores 2-D matrices only")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<QQ", m.shape[0], m.shape[1]))
        f.write(m.tobytes())


def read_matrix_bin(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MAGIC:
            raise DatasetError(f"{path}: bad magic, not a noiseforge matrix file")
        rows, cols = struct.unpack("<QQ", f.read(16))
        data = np.frombuffer(f.read(), dtype=np.float64)
    if data.size != rows * cols:
        raise DatasetError(f"{path}: truncated matrix payload")
    return data.reshape(rows, cols).copy()


def write_matrix_csv(path: str | Path, m: np.ndarray):
    np.savetxt(path, np.asarray(m, dtype=np.float64), delimiter=",", fmt="%.17g")


def read_matrix_csv(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)


def load_matrix(path: str | Path) -> np.ndarray:
    """Dispatch on extension: .bin/.nfm binary, anything else CSV."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"matrix file not found: {path}")
    if path.suffix in (".bin", ".nfm"):
        return read_matrix_bin(path)
    return read_matrix_csv(path)


def write_trajectory_csv(path: str | Path, losses: np.ndarray):
    """Per-node per-epoch losses; header ``node_id,epoch_0,...``."""
    losses = np.asarray(losses, dtype=np.float64)
    n, e = losses.shape
    with open(path, "w") as f:
        f.write("node_id," + ",".join(f"epoch_{j}" for j in range(e)) + "\n")
        for i in range(n):
            f.write(str(i + 1) + "," + ",".join(f"{v:.17g}" for v in losses[i]) + "\n")


def read_trajectory_csv(path: str | Path) -> np.ndarray:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    order = np.argsort(raw[:, 0])
    return raw[order, 1:]


def write_labels_csv(path: str | Path, labels: LabelSet):
    with open(path, "w") as f:
        f.write("node_id,label,provenance\n")
        for i, y in enumerate(labels.values):
            f.write(f"{i + 1},{y + 1},{labels.provenance}\n")


def read_labels_csv(path: str | Path) -> LabelSet:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"labels file not found: {path}")
    values = {}
    provenance = "clean"
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.lower().startswith("node_id"):
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise DatasetError(f"{path}:{lineno}: expected 'node_id,label[,provenance]'")
            values[int(parts[0]) - 1] = int(parts[1]) - 1
            if len(parts) >= 3:
                provenance = parts[2]
    n = max(values) + 1 if values else 0
    if set(values) != set(range(n)):
        raise DatasetError(f"{path}: labels must cover node ids 1..N without gaps")
    return LabelSet(np.array([values[i] for i in range(n)]), provenance)
