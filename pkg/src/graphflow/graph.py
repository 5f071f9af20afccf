"""Immutable symmetric CSR graph with self-loops and undirected edge ids.

Every graph built here is canonical:

* a self-loop entry (i, i) exists for every node,
* entry (i, j) exists iff (j, i) exists and both carry the same edge uid,
* column indices are strictly increasing within each row.

Undirected edge uids are assigned deterministically: uid ``i`` for the
self-loop of node ``i`` (0 <= i < n), then uids ``n, n+1, ...`` for the
non-loop edges in lexicographic (u, v) order with u < v.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    """Malformed graph structure or arguments."""


@dataclass(frozen=True)
class SparseGraph:
    n_nodes: int
    row_ptr: np.ndarray   # int64, length n_nodes + 1
    col_idx: np.ndarray   # int64, length nnz
    edge_uid: np.ndarray  # int64, length nnz
    n_undirected_edges: int  # self-loops counted once each
    # row index of every stored entry; derived, cached for spmm backward
    rows: np.ndarray = field(repr=False, default=None)

    @property
    def nnz(self) -> int:
        return len(self.col_idx)

    @property
    def n_nonloop_edges(self) -> int:
        return self.n_undirected_edges - self.n_nodes

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "SparseGraph":
        """Build the canonical graph from an iterable of (u, v) pairs.

        Duplicates and orientations are merged; self-loops in the input are
        ignored (loops are always added for every node regardless).
        """
        if n_nodes < 1:
            raise GraphError(f"need at least one node, got {n_nodes}")
        pairs = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise GraphError(f"edge ({u}, {v}) out of range for n={n_nodes}")
            if u == v:
                continue
            pairs.add((min(u, v), max(u, v)))
        return cls._from_pair_set(n_nodes, pairs)

    @classmethod
    def _from_pair_set(cls, n_nodes: int, pairs: set) -> "SparseGraph":
        sorted_pairs = sorted(pairs)
        # neighbor list per node: (col, uid), loop uid = node index
        adj = [[(i, i)] for i in range(n_nodes)]
        for j, (u, v) in enumerate(sorted_pairs):
            uid = n_nodes + j
            adj[u].append((v, uid))
            adj[v].append((u, uid))
        row_ptr = np.zeros(n_nodes + 1, dtype=np.int64)
        cols, uids = [], []
        for i in range(n_nodes):
            adj[i].sort()
            row_ptr[i + 1] = row_ptr[i] + len(adj[i])
            for c, uid in adj[i]:
                cols.append(c)
                uids.append(uid)
        col_idx = np.asarray(cols, dtype=np.int64)
        edge_uid = np.asarray(uids, dtype=np.int64)
        rows = np.repeat(np.arange(n_nodes, dtype=np.int64), np.diff(row_ptr))
        for a in (row_ptr, col_idx, edge_uid, rows):
            a.setflags(write=False)
        return cls(
            n_nodes=n_nodes,
            row_ptr=row_ptr,
            col_idx=col_idx,
            edge_uid=edge_uid,
            n_undirected_edges=n_nodes + len(sorted_pairs),
            rows=rows,
        )

    def undirected_pairs(self) -> np.ndarray:
        """(n_undirected_edges, 2) array of endpoints in uid order.

        Self-loop uid i maps to (i, i); non-loop uid n+j to its (u, v), u < v.
        """
        out = np.empty((self.n_undirected_edges, 2), dtype=np.int64)
        out[: self.n_nodes, 0] = np.arange(self.n_nodes)
        out[: self.n_nodes, 1] = np.arange(self.n_nodes)
        mask = (self.col_idx > self.rows)
        order = np.argsort(self.edge_uid[mask])
        out[self.n_nodes:, 0] = self.rows[mask][order]
        out[self.n_nodes:, 1] = self.col_idx[mask][order]
        return out

    def has_edge(self, u: int, v: int) -> bool:
        lo, hi = self.row_ptr[u], self.row_ptr[u + 1]
        k = np.searchsorted(self.col_idx[lo:hi], v)
        return k < hi - lo and self.col_idx[lo + k] == v

    def neighbors(self, i: int) -> np.ndarray:
        return self.col_idx[self.row_ptr[i]: self.row_ptr[i + 1]]

    def with_extra_edges(self, new_pairs) -> "SparseGraph":
        """New canonical graph with additional undirected edges (uids reassigned)."""
        pairs = {(min(u, v), max(u, v)) for u, v in self.nonloop_pairs()}
        for u, v in new_pairs:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError("cannot add a self-loop; loops always exist")
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise GraphError(f"edge ({u}, {v}) out of range")
            pairs.add((min(u, v), max(u, v)))
        return SparseGraph._from_pair_set(self.n_nodes, pairs)

    def nonloop_pairs(self):
        mask = self.col_idx > self.rows
        return list(zip(self.rows[mask].tolist(), self.col_idx[mask].tolist()))

    def validate(self) -> None:
        """Check the canonical-form invariants; raises GraphError on violation."""
        n = self.n_nodes
        if self.row_ptr[0] != 0 or self.row_ptr[n] != self.nnz:
            raise GraphError("row_ptr endpoints inconsistent")
        if np.any(np.diff(self.row_ptr) < 0):
            raise GraphError("row_ptr not non-decreasing")
        uid_of = {}
        for i in range(n):
            cols = self.col_idx[self.row_ptr[i]: self.row_ptr[i + 1]]
            uids = self.edge_uid[self.row_ptr[i]: self.row_ptr[i + 1]]
            if np.any(np.diff(cols) <= 0):
                raise GraphError(f"row {i}: columns not strictly increasing")
            if i not in cols:
                raise GraphError(f"row {i}: missing self-loop")
            for c, u in zip(cols.tolist(), uids.tolist()):
                uid_of[(i, c)] = u
        for (i, j), u in uid_of.items():
            if uid_of.get((j, i)) != u:
                raise GraphError(f"entry ({i},{j}) not symmetric with shared uid")
