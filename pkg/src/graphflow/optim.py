"""Glorot initialization, Adam updates, and the L2 penalty on weight matrices."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, add, scale, sum_squares


def glorot_init(rows: int, cols: int, rng) -> Tensor:
    """Uniform samples in [-s, s] with s = sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ValueError(f"bad init shape ({rows}, {cols})")
    s = np.sqrt(6.0 / (rows + cols))
    return Tensor(rng.uniform(-s, s, size=(rows, cols)), requires_grad=True)


class Adam:
    """Standard Adam with bias correction over a list of Tensors."""

    def __init__(self, params, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape {g.shape} != param {p.data.shape}")
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g ** 2
            m_hat = self.m[i] / (1 - self.beta1 ** t)
            v_hat = self.v[i] / (1 - self.beta2 ** t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(params, state: Adam):
    """One Adam update over `state.params`; gradients read from .grad."""
    if list(params) != state.params:
        raise ValueError("params do not match optimizer state")
    state.step()
    return params


def l2_penalty(weight_matrices, weight: float) -> Tensor:
    """weight * sum of squared Frobenius norms of the transformation matrices.

    Edge-weight parameters and kernel matrices are deliberately excluded by
    the caller; only the W matrices are regularized here.
    """
    if weight < 0:
        raise ValueError(f"L2 weight must be nonnegative, got {weight}")
    total = Tensor(0.0)
    for w in weight_matrices:
        total = add(total, sum_squares(w))
    return scale(total, weight)
