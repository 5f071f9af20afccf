"""Row-stochastic propagation operator D^-1 A and its differentiable apply.

The operator is rebuilt from the supplied per-edge weights on every
construction, so a fresh degree vector always reflects the current weights.
``GRAPHFLOW_THREADS`` caps internal parallelism; the implementation is
single-threaded (the default of 1) so outputs are bit-reproducible.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from .autodiff import Tensor, _make, as_tensor
from .graph import SparseGraph


def spmm_threads() -> int:
    raw = os.environ.get("GRAPHFLOW_THREADS", "1")
    try:
        val = int(raw)
    except ValueError as e:
        raise ValueError(f"GRAPHFLOW_THREADS must be an integer, got {raw!r}") from e
    if val < 1:
        raise ValueError(f"GRAPHFLOW_THREADS must be >= 1, got {val}")
    return val


class RowStochasticOperator:
    """T = D^-1 A over a SparseGraph, with one weight per undirected edge uid.

    `weights` may be a plain array (fixed adjacency) or a Tensor, in which
    case spmm backpropagates into the per-uid weights through the degree
    normalization.
    """

    def __init__(self, graph: SparseGraph, weights):
        self.graph = graph
        self.weights = weights if isinstance(weights, Tensor) else np.asarray(
            weights, dtype=np.float64)
        w_uid = self.weights.data if isinstance(self.weights, Tensor) else self.weights
        if w_uid.shape != (graph.n_undirected_edges,):
            raise ValueError(
                f"need one weight per undirected edge "
                f"({graph.n_undirected_edges}), got shape {w_uid.shape}")
        if np.any(w_uid <= 0):
            raise ValueError("edge weights must be strictly positive")
        self.entry_w = w_uid[graph.edge_uid]
        self.deg = np.bincount(graph.rows, weights=self.entry_w,
                               minlength=graph.n_nodes)
        self.matrix = sp.csr_matrix(
            (self.entry_w / self.deg[graph.rows],
             graph.col_idx, graph.row_ptr),
            shape=(graph.n_nodes, graph.n_nodes))

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.matrix @ x)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalized_adjacency(graph: SparseGraph, edge_weights=None) -> RowStochasticOperator:
    """Operator with T[i,j] = a_ij / d_ii; every row sums to 1."""
    if edge_weights is None:
        edge_weights = np.ones(graph.n_undirected_edges)
    return RowStochasticOperator(graph, edge_weights)


def spmm(op: RowStochasticOperator, x) -> Tensor:
    """y = T x, differentiable in x and (when trainable) the edge weights.

    Per stored entry (i, j) with weight a = w[uid]:
    d y_i / d a = (x_j - y_i) / d_i, accumulated over both directions of a uid.
    """
    x = as_tensor(x)
    if op.shape[1] != x.data.shape[0]:
        raise ValueError(f"spmm shape mismatch: {op.shape} x {x.shape}")
    y = op.apply(x.data)
    w = op.weights
    parents = (x, w) if isinstance(w, Tensor) else (x,)

    def backward():
        g = out.grad
        if x.requires_grad:
            x.accumulate(np.asarray(op.matrix.T @ g))
        if isinstance(w, Tensor) and w.requires_grad:
            graph = op.graph
            rows, cols = graph.rows, graph.col_idx
            # per-entry: g_i . (x_j - y_i) / d_i
            s = np.einsum("ef,ef->e", g[rows], x.data[cols])
            r = (g * y).sum(axis=1)
            contrib = (s - r[rows]) / op.deg[rows]
            gw = np.zeros_like(w.data)
            np.add.at(gw, graph.edge_uid, contrib)
            w.accumulate(gw)

    out = _make(y, parents, backward)
    return out
