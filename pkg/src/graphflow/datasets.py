"""Dataset I/O, splits, synthetic generators, and structure statistics.

On-disk layout of a dataset directory (plain TSV + JSON, LF endings,
0-based indices):

* ``meta.json``   -- {"n": <nodes>, "d": <feature dim>, "c": <classes>}
* ``edges.tsv``   -- one "u<TAB>v" line per edge (u == v tolerated, ignored)
* ``features.tsv``-- sparse triplets "node<TAB>dim<TAB>value"
* ``labels.tsv``  -- "node<TAB>class"; nodes absent from the file are unlabeled
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import GraphError, SparseGraph

UNLABELED = -1


class DataFormatError(ValueError):
    """Malformed dataset file; message carries file and line number."""


@dataclass(frozen=True)
class Split:
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    seed: int


@dataclass(frozen=True)
class Dataset:
    graph: SparseGraph
    features: object  # (n, d) ndarray or scipy CSR
    labels: np.ndarray  # int per node, UNLABELED sentinel for unknown
    n_classes: int
    split: Split | None = None

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def with_split(self, split: Split) -> "Dataset":
        for mask in (split.train_mask, split.val_mask, split.test_mask):
            if np.any(self.labels[mask] == UNLABELED):
                raise DataFormatError("split assigns an unlabeled node")
        return replace(self, split=split)


def _parse_tsv(path: Path, n_fields: int, casts):
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != n_fields:
                raise DataFormatError(
                    f"{path.name}:{lineno}: expected {n_fields} fields, got {len(parts)}")
            try:
                yield lineno, tuple(c(p) for c, p in zip(casts, parts))
            except ValueError as e:
                raise DataFormatError(f"{path.name}:{lineno}: {e}") from e


def load_dataset(directory) -> Dataset:
    """Load a dataset directory into canonical form (split not yet assigned)."""
    directory = Path(directory)
    with open(directory / "meta.json") as f:
        meta = json.load(f)
    try:
        n, d, c = int(meta["n"]), int(meta["d"]), int(meta["c"])
    except (KeyError, TypeError) as e:
        raise DataFormatError(f"meta.json: missing or bad field ({e})") from e
    if c < 2:
        raise DataFormatError(f"meta.json: need at least 2 classes, got {c}")
    if n < 1 or d < 1:
        raise DataFormatError(f"meta.json: bad sizes n={n} d={d}")

    edges = []
    for lineno, (u, v) in _parse_tsv(directory / "edges.tsv", 2, (int, int)):
        if not (0 <= u < n and 0 <= v < n):
            raise DataFormatError(f"edges.tsv:{lineno}: node index out of range")
        edges.append((u, v))
    graph = SparseGraph.from_edges(n, edges)

    rows, cols, vals = [], [], []
    for lineno, (node, dim, value) in _parse_tsv(
            directory / "features.tsv", 3, (int, int, float)):
        if not (0 <= node < n and 0 <= dim < d):
            raise DataFormatError(f"features.tsv:{lineno}: index out of range")
        rows.append(node)
        cols.append(dim)
        vals.append(value)
    features = sp.csr_matrix(
        (vals, (rows, cols)), shape=(n, d), dtype=np.float64)
    features.sum_duplicates()

    labels = np.full(n, UNLABELED, dtype=np.int64)
    for lineno, (node, cls) in _parse_tsv(directory / "labels.tsv", 2, (int, int)):
        if not (0 <= node < n) or not (0 <= cls < c):
            raise DataFormatError(f"labels.tsv:{lineno}: index out of range")
        labels[node] = cls
    return Dataset(graph=graph, features=features, labels=labels, n_classes=c)


def save_dataset(dataset: Dataset, directory) -> None:
    """Write the dataset in the directory layout read by load_dataset."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {"n": dataset.n_nodes, "d": dataset.feature_dim, "c": dataset.n_classes}
    with open(directory / "meta.json", "w") as f:
        json.dump(meta, f)
        f.write("\n")
    with open(directory / "edges.tsv", "w") as f:
        for u, v in dataset.graph.nonloop_pairs():
            f.write(f"{u}\t{v}\n")
    feats = sp.coo_matrix(dataset.features)
    with open(directory / "features.tsv", "w") as f:
        for i, j, v in zip(feats.row, feats.col, feats.data):
            f.write(f"{i}\t{j}\t{float(v)!r}\n")
    with open(directory / "labels.tsv", "w") as f:
        for i, y in enumerate(dataset.labels):
            if y != UNLABELED:
                f.write(f"{i}\t{y}\n")


def make_split(dataset: Dataset, ratios, seed: int) -> Split:
    """Uniformly random partition of the labeled nodes by the given ratios.

    Val and test sizes are floor(ratio * m); train takes the remainder.
    Deterministic per seed.
    """
    r_train, r_val, r_test = ratios
    if min(r_train, r_val, r_test) <= 0:
        raise ValueError(f"ratios must be positive, got {ratios}")
    if abs(r_train + r_val + r_test - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    labeled = np.flatnonzero(dataset.labels != UNLABELED)
    m = len(labeled)
    if m < 3:
        raise ValueError(f"need at least 3 labeled nodes, got {m}")
    n_val = int(np.floor(r_val * m))
    n_test = int(np.floor(r_test * m))
    n_train = m - n_val - n_test
    rng = np.random.default_rng(seed)
    perm = labeled[rng.permutation(m)]
    n = dataset.n_nodes
    train_mask = np.zeros(n, dtype=bool)
    val_mask = np.zeros(n, dtype=bool)
    test_mask = np.zeros(n, dtype=bool)
    train_mask[perm[:n_train]] = True
    val_mask[perm[n_train:n_train + n_val]] = True
    test_mask[perm[n_train + n_val:]] = True
    return Split(train_mask, val_mask, test_mask, seed)


def row_normalize_features(features):
    """Divide each nonzero row by its sum; all-zero rows pass through."""
    if sp.issparse(features):
        mat = sp.csr_matrix(features, copy=True, dtype=np.float64)
        if mat.nnz and mat.data.min() < 0:
            raise ValueError("row normalization requires nonnegative features")
        sums = np.asarray(mat.sum(axis=1)).ravel()
        scale = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums != 0)
        return sp.diags(scale) @ mat
    features = np.asarray(features, dtype=np.float64)
    if features.size and features.min() < 0:
        raise ValueError("row normalization requires nonnegative features")
    sums = features.sum(axis=1, keepdims=True)
    return np.divide(features, sums, out=features.copy(), where=sums != 0)


def intra_class_edge_rate(graph: SparseGraph, labels: np.ndarray) -> float:
    """Fraction of undirected non-loop edges joining same-labeled endpoints."""
    if np.any(labels == UNLABELED):
        raise ValueError("intra-class edge rate needs labels for all nodes")
    pairs = graph.undirected_pairs()[graph.n_nodes:]
    if len(pairs) == 0:
        raise GraphError("graph has no non-loop edges")
    same = labels[pairs[:, 0]] == labels[pairs[:, 1]]
    return float(same.mean())


def synth_random_graph(n: int, avg_degree: float, seed: int) -> Dataset:
    """Random graph with floor(n * avg_degree / 2) distinct undirected edges.

    Features are a sparse one-hot identity; all labels are 0 (2 classes so
    the classification loss stays well defined). Deterministic per seed.
    """
    if n < 2 or avg_degree < 1:
        raise ValueError(f"need n >= 2 and avg_degree >= 1, got {n}, {avg_degree}")
    n_edges = int(n * avg_degree // 2)
    max_edges = n * (n - 1) // 2
    if n_edges > max_edges:
        raise ValueError(f"{n_edges} edges requested, only {max_edges} possible")
    rng = np.random.default_rng(seed)
    pairs = set()
    while len(pairs) < n_edges:
        batch = rng.integers(0, n, size=(2 * (n_edges - len(pairs)) + 8, 2))
        for u, v in batch:
            if u != v:
                pairs.add((min(u, v), max(u, v)))
            if len(pairs) == n_edges:
                break
    graph = SparseGraph.from_edges(n, pairs)
    features = sp.identity(n, dtype=np.float64, format="csr")
    labels = np.zeros(n, dtype=np.int64)
    return Dataset(graph=graph, features=features, labels=labels, n_classes=2)


# Zachary's karate club: 34 nodes, 78 edges, two factions.
def karate_club() -> Dataset:
    import networkx as nx

    g = nx.karate_club_graph()
    n = g.number_of_nodes()
    graph = SparseGraph.from_edges(n, g.edges())
    labels = np.array(
        [0 if g.nodes[i]["club"] == "Mr. Hi" else 1 for i in range(n)],
        dtype=np.int64)
    features = sp.identity(n, dtype=np.float64, format="csr")
    return Dataset(graph=graph, features=features, labels=labels, n_classes=2)


def add_noise_edges(dataset: Dataset, count: int, seed: int) -> Dataset:
    """Add `count` new undirected edges between differently-labeled nodes."""
    if count == 0:
        return dataset
    labels = dataset.labels
    n = dataset.n_nodes
    candidates = [
        (u, v)
        for u in range(n)
        for v in range(u + 1, n)
        if labels[u] != labels[v] and not dataset.graph.has_edge(u, v)
    ]
    if len(candidates) < count:
        raise GraphError(
            f"only {len(candidates)} absent inter-class pairs, need {count}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(candidates), size=count, replace=False)
    new_pairs = [candidates[i] for i in chosen]
    graph = dataset.graph.with_extra_edges(new_pairs)
    return replace(dataset, graph=graph)
