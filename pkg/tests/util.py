"""Shared test helpers: central finite differences against tape gradients."""

import numpy as np

from graphflow.autodiff import Tensor


def numeric_grad(f, t: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the scalar-valued f wrt tensor t."""
    g = np.zeros_like(t.data)
    flat = t.data.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f())
        flat[i] = orig - h
        fm = float(f())
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return float(np.abs(a - b).max() / denom)


def check_grad(build_loss, params, tol=1e-6):
    """build_loss() returns a fresh scalar Tensor; checks every param's grad."""
    loss = build_loss()
    for p in params:
        p.zero_grad()
    loss.backward()
    for p in params:
        num = numeric_grad(lambda: build_loss().data, p)
        assert p.grad is not None
        err = rel_err(p.grad, num)
        assert err <= tol, f"gradient mismatch {err:.3g} > {tol}"
