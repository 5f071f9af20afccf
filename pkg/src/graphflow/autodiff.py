"""Minimal dense-tensor reverse-mode differentiation.

Define-by-run: every op links its output to its inputs with a closure that
scatters gradients backward. ``backward()`` on a scalar does a topological
sweep; repeated calls without ``zero_grad`` accumulate additively.
All values are 64-bit floats.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._backward = None
        self._parents = ()

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ValueError(f"backward needs a scalar, got shape {self.shape}")
        topo, seen = [], set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            topo.append(t)

        visit(self)
        self.accumulate(np.ones_like(self.data))
        for t in reversed(topo):
            if t._backward is not None:
                t._backward()

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _make(data, parents, backward):
    out = Tensor(data)
    if any(p.requires_grad for p in parents if isinstance(p, Tensor)):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if isinstance(p, Tensor))
        out._backward = backward
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out_data = a.data @ b.data

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate(g @ b.data.T)
        if b.requires_grad:
            b.accumulate(a.data.T @ g)

    out = _make(out_data, (a, b), backward)
    return out


def sparse_matmul(a_sparse, b: Tensor) -> Tensor:
    """Constant sparse matrix times dense tensor; differentiable in b only."""
    b = as_tensor(b)
    if a_sparse.shape[1] != b.data.shape[0]:
        raise ValueError(f"sparse_matmul shape mismatch: {a_sparse.shape} x {b.shape}")
    out_data = np.asarray(a_sparse @ b.data)

    def backward():
        if b.requires_grad:
            b.accumulate(np.asarray(a_sparse.T @ out.grad))

    out = _make(out_data, (b,), backward)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")

    def backward():
        if a.requires_grad:
            a.accumulate(out.grad)
        if b.requires_grad:
            b.accumulate(out.grad)

    out = _make(a.data + b.data, (a, b), backward)
    return out


def scale(a: Tensor, s: float) -> Tensor:
    a = as_tensor(a)
    s = float(s)

    def backward():
        if a.requires_grad:
            a.accumulate(s * out.grad)

    out = _make(s * a.data, (a,), backward)
    return out


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    keep = x.data > 0  # subgradient 0 at 0

    def backward():
        if x.requires_grad:
            x.accumulate(out.grad * keep)

    out = _make(np.where(keep, x.data, 0.0), (x,), backward)
    return out


def _softplus(v: np.ndarray) -> np.ndarray:
    # ln(1 + e^v), linear asymptote used for v > 30 to avoid overflow
    return np.where(v > 30, v, np.log1p(np.exp(np.minimum(v, 30.0))))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def softplus(x: Tensor) -> Tensor:
    x = as_tensor(x)

    def backward():
        if x.requires_grad:
            x.accumulate(out.grad * _sigmoid(x.data))

    out = _make(_softplus(x.data), (x,), backward)
    return out


def dropout(x: Tensor, rate: float, training: bool, rng) -> Tensor:
    """Inverted dropout; identity at inference. Deterministic per rng state."""
    if not (0 <= rate < 1):
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0:
        return x
    keep = rng.random(x.data.shape) >= rate
    factor = 1.0 / (1.0 - rate)

    def backward():
        if x.requires_grad:
            x.accumulate(out.grad * keep * factor)

    out = _make(x.data * keep * factor, (x,), backward)
    return out


def sparse_dropout(x_sparse, rate: float, training: bool, rng):
    """Dropout over the stored values of a constant sparse matrix."""
    if not (0 <= rate < 1):
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0:
        return x_sparse
    x = sp.csr_matrix(x_sparse, copy=True)
    keep = rng.random(x.data.shape) >= rate
    x.data = np.where(keep, x.data / (1.0 - rate), 0.0)
    return x


def masked_softmax_cross_entropy(logits: Tensor, labels, mask) -> Tensor:
    """Mean over masked rows of -log softmax(logits[i])[label_i]."""
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=bool)
    m = int(mask.sum())
    if m == 0:
        raise ValueError("cross-entropy over an empty mask")
    rows = logits.data[mask]
    y = labels[mask]
    if np.any(y < 0):
        raise ValueError("masked row without a known label")
    shifted = rows - rows.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(logz - shifted[np.arange(m), y]))

    def backward():
        if logits.requires_grad:
            softmax = np.exp(shifted)
            softmax /= softmax.sum(axis=1, keepdims=True)
            softmax[np.arange(m), y] -= 1.0
            g = np.zeros_like(logits.data)
            g[mask] = softmax * (float(out.grad) / m)
            logits.accumulate(g)

    out = _make(loss, (logits,), backward)
    return out


_RENORM_EPS = 1e-12


def renorm_cross_entropy(soft: Tensor, labels, mask) -> Tensor:
    """Cross-entropy of row-renormalized nonnegative scores.

    Rows are renormalized to sum 1 with a tiny additive smoothing so that
    all-zero rows fall back to the uniform distribution (loss ln c).
    """
    soft = as_tensor(soft)
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=bool)
    m = int(mask.sum())
    if m == 0:
        raise ValueError("cross-entropy over an empty mask")
    c = soft.data.shape[1]
    rows = soft.data[mask]
    y = labels[mask]
    if np.any(y < 0):
        raise ValueError("masked row without a known label")
    sums = rows.sum(axis=1)
    hits = rows[np.arange(m), y]
    p = (hits + _RENORM_EPS) / (sums + c * _RENORM_EPS)
    loss = float(np.mean(-np.log(p)))

    def backward():
        if soft.requires_grad:
            g = np.zeros_like(soft.data)
            gm = np.zeros_like(rows)
            gm += (1.0 / (sums + c * _RENORM_EPS))[:, None]
            gm[np.arange(m), y] -= 1.0 / (hits + _RENORM_EPS)
            g[mask] = gm * (float(out.grad) / m)
            soft.accumulate(g)

    out = _make(loss, (soft,), backward)
    return out


def row_reset(x: Tensor, mask, values: Tensor) -> Tensor:
    """Copy of x with masked rows replaced by the matching rows of `values`.

    Gradients flow into x on unmasked rows and into `values` on masked rows.
    """
    x, values = as_tensor(x), as_tensor(values)
    mask = np.asarray(mask, dtype=bool)
    out_data = x.data.copy()
    out_data[mask] = values.data[mask]

    def backward():
        if x.requires_grad:
            g = out.grad.copy()
            g[mask] = 0.0
            x.accumulate(g)
        if values.requires_grad:
            g = np.zeros_like(values.data)
            g[mask] = out.grad[mask]
            values.accumulate(g)

    out = _make(out_data, (x, values), backward)
    return out


def pick(x: Tensor, row: int, col: int = 0) -> Tensor:
    x = as_tensor(x)

    def backward():
        if x.requires_grad:
            g = np.zeros_like(x.data)
            g[row, col] = float(out.grad)
            x.accumulate(g)

    out = _make(x.data[row, col], (x,), backward)
    return out


def sum_squares(x: Tensor) -> Tensor:
    """Squared Frobenius norm as a differentiable scalar."""
    x = as_tensor(x)

    def backward():
        if x.requires_grad:
            x.accumulate(2.0 * x.data * float(out.grad))

    out = _make(float((x.data ** 2).sum()), (x,), backward)
    return out


def edge_bilinear(h: Tensor, features, u_idx, v_idx) -> Tensor:
    """Per-pair bilinear scores s_e = x_u^T H x_v for fixed feature rows."""
    h = as_tensor(h)
    if sp.issparse(features):
        xu = np.asarray(features[u_idx].todense())
        xv = np.asarray(features[v_idx].todense())
    else:
        xu = np.asarray(features)[u_idx]
        xv = np.asarray(features)[v_idx]
    scores = np.einsum("ed,ed->e", xu @ h.data, xv)

    def backward():
        if h.requires_grad:
            h.accumulate(xu.T @ (out.grad[:, None] * xv))

    out = _make(scores, (h,), backward)
    return out
