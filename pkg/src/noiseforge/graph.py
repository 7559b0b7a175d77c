"""Graph dataset representation, ingestion, splits, and basic statistics.

File formats (all node/class ids 1-indexed on disk, 0-indexed in memory):
  edges     TSV, two integer columns ``src<TAB>dst``
  features  CSV of reals, one row per node
  labels    CSV ``node_id,label``
  texts     JSON-lines ``{"id": ..., "title": ..., "description": ...}``
  manifest  JSON tying the files together
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DatasetError

__all__ = [
    "Graph",
    "LabelSet",
    "DatasetManifest",
    "build_graph",
    "load_dataset",
    "save_dataset",
    "node_homophily",
    "split_nodes",
]


@dataclass(frozen=True)
class LabelSet:
    """Length-N label vector with a provenance tag.

    Values are 0-indexed class ids; conversion to the 1-indexed external
    convention happens only at file boundaries.
    """

    values: np.ndarray
    provenance: str = "clean"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class Graph:
    """Immutable sparse graph with labels and optional features/texts.

    Adjacency is CSR over directed arcs; undirected graphs store both
    directions. Stored adjacency never contains self-loops.
    """

    indptr: np.ndarray
    indices: np.ndarray
    labels: np.ndarray  # 0-indexed class ids
    num_classes: int
    directed: bool = False
    node_features: np.ndarray | None = None
    edge_features: np.ndarray | None = None
    text_attrs: tuple[dict, ...] | None = None
    class_names: tuple[str, ...] | None = None
    name: str = ""

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    @property
    def num_arcs(self) -> int:
        return len(self.indices)

    @property
    def num_edges(self) -> int:
        """Edge count: undirected pairs for undirected graphs, arcs otherwise."""
        return self.num_arcs // 2 if not self.directed else self.num_arcs

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def adjacency(self) -> sp.csr_matrix:
        n = self.num_nodes
        data = np.ones(self.num_arcs, dtype=np.float64)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(n, n))

    def with_labels(self, labels: np.ndarray) -> "Graph":
        labels = np.asarray(labels, dtype=np.int64)
        if len(labels) != self.num_nodes:
            raise DatasetError("label vector length does not match node count")
        return replace(self, labels=labels)

    def validate(self):
        n = self.num_nodes
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= n):
            raise DatasetError("edge endpoint out of range")
        if len(self.labels) != n:
            raise DatasetError("label vector length does not match node count")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetError("label out of range")
        for v in range(n):
            if v in self.neighbors(v):
                raise DatasetError(f"self-loop stored at node {v + 1}")
        if self.node_features is not None and self.node_features.shape[0] != n:
            raise DatasetError("feature matrix row count does not match node count")
        if not self.directed:
            a = self.adjacency()
            if (a != a.T).nnz != 0:
                raise DatasetError("undirected adjacency is not symmetric")


@dataclass
class DatasetManifest:
    """Paths and metadata describing one on-disk dataset."""

    name: str
    edges: Path
    labels: Path
    num_classes: int
    directed: bool = False
    features: Path | None = None
    edge_features: Path | None = None
    texts: Path | None = None
    class_names: list[str] | None = None
    split_ratios: tuple[float, float, float] | None = None
    split_files: dict[str, Path] | None = None

    @classmethod
    def from_json(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        if not path.exists():
            raise DatasetError(f"manifest not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise DatasetError(f"manifest {path} is not valid JSON: {e}") from e
        base = path.parent

        def resolve(key):
            return (base / raw[key]).resolve() if raw.get(key) else None

        split = raw.get("split") or {}
        ratios = tuple(split["ratios"]) if "ratios" in split else None
        if ratios is not None and abs(sum(ratios) - 1.0) > 1e-9:
            raise DatasetError(f"split ratios must sum to 1, got {sum(ratios)!r}")
        split_files = None
        if "files" in split:
            split_files = {k: (base / v).resolve() for k, v in split["files"].items()}
        m = cls(
            name=raw.get("name", path.stem),
            edges=resolve("edges"),
            labels=resolve("labels"),
            num_classes=int(raw["num_classes"]),
            directed=bool(raw.get("directed", False)),
            features=resolve("features"),
            edge_features=resolve("edge_features"),
            texts=resolve("texts"),
            class_names=raw.get("class_names"),
            split_ratios=ratios,
            split_files=split_files,
        )
        if m.edges is None or m.labels is None:
            raise DatasetError(f"manifest {path} must name 'edges' and 'labels' files")
        for p in (m.edges, m.labels, m.features, m.edge_features, m.texts):
            if p is not None and not p.exists():
                raise DatasetError(f"manifest references missing file: {p}")
        if m.class_names is not None and len(m.class_names) != m.num_classes:
            raise DatasetError("class_names length does not match num_classes")
        return m


def build_graph(
    num_nodes: int,
    edges,
    labels,
    num_classes: int,
    directed: bool = False,
    node_features=None,
    edge_features=None,
    text_attrs=None,
    class_names=None,
    name: str = "",
) -> Graph:
    """Assemble a Graph from 0-indexed (src, dst) pairs.

    Undirected inputs are symmetrized; duplicate undirected edges collapse
    to one; self-loops are rejected.
    """
    labels = np.asarray(labels, dtype=np.int64)
    pairs = set()
    for src, dst in edges:
        src, dst = int(src), int(dst)
        if not (0 <= src < num_nodes and 0 <= dst < num_nodes):
            raise DatasetError(f"edge endpoint out of range: ({src + 1}, {dst + 1})")
        if src == dst:
            raise DatasetError(f"self-loop at node {src + 1}")
        if directed:
            pairs.add((src, dst))
        else:
            pairs.add((src, dst))
            pairs.add((dst, src))
    if pairs:
        arr = np.array(sorted(pairs), dtype=np.int64)
        rows, cols = arr[:, 0], arr[:, 1]
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
    counts = np.bincount(rows, minlength=num_nodes)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    g = Graph(
        indptr=indptr,
        indices=cols,
        labels=labels,
        num_classes=num_classes,
        directed=directed,
        node_features=None if node_features is None else np.asarray(node_features, dtype=np.float64),
        edge_features=None if edge_features is None else np.asarray(edge_features, dtype=np.float64),
        text_attrs=None if text_attrs is None else tuple(text_attrs),
        class_names=None if class_names is None else tuple(class_names),
        name=name,
    )
    g.validate()
    return g


def _read_edges(path: Path, directed: bool):
    """Parse the TSV edge file into 0-indexed pairs."""
    pairs = []
    seen_directed = set()
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected two columns, got {len(parts)}")
            try:
                src, dst = int(parts[0]), int(parts[1])
            except ValueError as e:
                raise DatasetError(f"{path}:{lineno}: malformed edge row: {e}") from e
            if directed:
                if (src, dst) in seen_directed:
                    raise DatasetError(f"{path}:{lineno}: duplicate directed edge ({src}, {dst})")
                seen_directed.add((src, dst))
            pairs.append((src - 1, dst - 1))
    return pairs


def _read_labels(path: Path, num_classes: int):
    rows = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.lower().startswith("node_id"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 'node_id,label'")
            try:
                node, label = int(parts[0]), int(parts[1])
            except ValueError as e:
                raise DatasetError(f"{path}:{lineno}: malformed label row: {e}") from e
            if not (1 <= label <= num_classes):
                raise DatasetError(f"{path}:{lineno}: label out of range: {label} (C={num_classes})")
            rows[node - 1] = label - 1
    n = max(rows) + 1 if rows else 0
    if set(rows) != set(range(n)):
        raise DatasetError(f"{path}: labels must cover node ids 1..N without gaps")
    return np.array([rows[i] for i in range(n)], dtype=np.int64)


def _read_texts(path: Path):
    records = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{lineno}: malformed JSON line: {e}") from e
            records[int(rec["id"]) - 1] = {
                "title": rec.get("title", ""),
                "description": rec.get("description", ""),
            }
    return records


def load_dataset(manifest: DatasetManifest | str | Path) -> Graph:
    """Load and validate a Graph from a manifest (path or parsed object)."""
    if not isinstance(manifest, DatasetManifest):
        manifest = DatasetManifest.from_json(manifest)
    labels = _read_labels(manifest.labels, manifest.num_classes)
    n = len(labels)
    pairs = _read_edges(manifest.edges, manifest.directed)
    features = None
    if manifest.features is not None:
        features = np.loadtxt(manifest.features, delimiter=",", ndmin=2, dtype=np.float64)
        if features.shape[0] != n:
            raise DatasetError(
                f"{manifest.features}: {features.shape[0]} feature rows for {n} nodes"
            )
    edge_features = None
    if manifest.edge_features is not None:
        edge_features = np.loadtxt(manifest.edge_features, delimiter=",", ndmin=2, dtype=np.float64)
    texts = None
    if manifest.texts is not None:
        recs = _read_texts(manifest.texts)
        texts = tuple(recs.get(i, {"title": "", "description": ""}) for i in range(n))
    return build_graph(
        num_nodes=n,
        edges=pairs,
        labels=labels,
        num_classes=manifest.num_classes,
        directed=manifest.directed,
        node_features=features,
        edge_features=edge_features,
        text_attrs=texts,
        class_names=manifest.class_names,
        name=manifest.name,
    )


def save_dataset(g: Graph, out_dir: str | Path) -> Path:
    """Write a Graph back out in the manifest formats; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.tsv", "w") as f:
        for u in range(g.num_nodes):
            for v in g.neighbors(u):
                if g.directed or u < v:  # one line per undirected pair
                    f.write(f"{u + 1}\t{v + 1}\n")
    with open(out / "labels.csv", "w") as f:
        f.write("node_id,label\n")
        for i, y in enumerate(g.labels):
            f.write(f"{i + 1},{y + 1}\n")
    manifest = {
        "name": g.name or "dataset",
        "directed": g.directed,
        "num_classes": g.num_classes,
        "edges": "edges.tsv",
        "labels": "labels.csv",
    }
    if g.node_features is not None:
        np.savetxt(out / "features.csv", g.node_features, delimiter=",", fmt="%.17g")
        manifest["features"] = "features.csv"
    if g.edge_features is not None:
        np.savetxt(out / "edge_features.csv", g.edge_features, delimiter=",", fmt="%.17g")
        manifest["edge_features"] = "edge_features.csv"
    if g.text_attrs is not None:
        with open(out / "texts.jsonl", "w", encoding="utf-8") as f:
            for i, rec in enumerate(g.text_attrs):
                f.write(json.dumps({"id": i + 1, **rec}, ensure_ascii=False) + "\n")
        manifest["texts"] = "texts.jsonl"
    if g.class_names is not None:
        manifest["class_names"] = list(g.class_names)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def node_homophily(g: Graph) -> float:
    """Mean over nodes of the fraction of neighbors sharing the node's label.

    Zero-degree nodes are excluded from the mean; a graph with no edges has
    no defined homophily.
    """
    deg = g.degrees()
    if g.num_arcs == 0:
        raise DatasetError("homophily undefined: graph has no edges")
    fractions = []
    for v in range(g.num_nodes):
        if deg[v] == 0:
            continue
        nbrs = g.neighbors(v)
        fractions.append(np.mean(g.labels[nbrs] == g.labels[v]))
    return float(np.mean(fractions))


def split_nodes(
    g: Graph,
    ratios: tuple[float, float, float],
    seed: int,
    stratified: bool = False,
):
    """Partition node indices into (train, val, test) index arrays.

    Sizes follow the ratios with floor rounding for val/test; the remainder
    goes to train. Deterministic per seed.
    """
    r_train, r_val, r_test = ratios
    if min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise DatasetError(f"ratios must be nonnegative and sum to 1: {ratios}")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = g.num_nodes

    def partition(idx):
        idx = rng.permutation(idx)
        m = len(idx)
        n_val = int(np.floor(m * r_val))
        n_test = int(np.floor(m * r_test))
        n_train = m - n_val - n_test
        return idx[:n_train], idx[n_train:n_train + n_val], idx[n_train + n_val:]

    if not stratified:
        train, val, test = partition(np.arange(n))
    else:
        parts = ([], [], [])
        for c in range(g.num_classes):
            members = np.flatnonzero(g.labels == c)
            if len(members) == 0:
                raise DatasetError(f"stratified split: class {c + 1} has no nodes")
            for bucket, chunk in zip(parts, partition(members)):
                bucket.append(chunk)
        train, val, test = (np.concatenate(p) for p in parts)
    return np.sort(train), np.sort(val), np.sort(test)
