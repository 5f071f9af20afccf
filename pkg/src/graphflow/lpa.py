"""Label propagation: clamped iterative inference and the differentiable
unrolled loss used to learn edge weights.

One iteration is propagate (Y <- D^-1 A Y) followed by resetting the clamped
rows to their initial one-hot values. Inference returns the post-reset state;
the loss reads the post-propagation, pre-reset state of the final iteration
(otherwise clamping would make the loss on labeled nodes identically zero).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, renorm_cross_entropy, row_reset
from .datasets import UNLABELED
from .graph import SparseGraph
from .propagation import normalized_adjacency, spmm

DEFAULT_INFER_ITERS = 20


@dataclass
class SoftLabels:
    matrix: np.ndarray        # node-by-class soft scores
    predictions: np.ndarray   # argmax per row, ties to the lowest class
    unreached: np.ndarray     # rows with no label mass (predict class 0)

    def accuracy(self, labels, mask) -> float:
        mask = np.asarray(mask, dtype=bool)
        return float((self.predictions[mask] == labels[mask]).mean())


def one_hot(labels: np.ndarray, n_classes: int, mask) -> np.ndarray:
    out = np.zeros((len(labels), n_classes))
    idx = np.flatnonzero(mask)
    out[idx, labels[idx]] = 1.0
    return out


def lpa_infer(graph: SparseGraph, labels, clamp_mask, n_classes: int,
              edge_weights=None, iters: int = DEFAULT_INFER_ITERS) -> SoftLabels:
    """Clamped label propagation; returns the state after the final reset."""
    if iters < 1:
        raise ValueError(f"need at least one iteration, got {iters}")
    labels = np.asarray(labels)
    clamp_mask = np.asarray(clamp_mask, dtype=bool)
    if not clamp_mask.any():
        raise ValueError("clamp mask is empty")
    if np.any(labels[clamp_mask] == UNLABELED):
        raise ValueError("clamped node without a known label")
    op = normalized_adjacency(graph, edge_weights)
    y0 = one_hot(labels, n_classes, clamp_mask)
    y = y0
    for _ in range(iters):
        y = op.apply(y)
        y[clamp_mask] = y0[clamp_mask]
    unreached = y.sum(axis=1) == 0
    return SoftLabels(matrix=y, predictions=np.argmax(y, axis=1),
                      unreached=unreached)


def lpa_loss(graph: SparseGraph, edge_weights, labels, clamp_mask, loss_mask,
             iters: int, n_classes: int) -> Tensor:
    """Cross-entropy of unrolled LPA predictions, differentiable in the weights.

    Predictions for the loss are the final iteration's pre-reset rows,
    renormalized to sum 1 (all-zero rows fall back to uniform).
    """
    if iters < 1:
        raise ValueError(f"need at least one iteration, got {iters}")
    labels = np.asarray(labels)
    clamp_mask = np.asarray(clamp_mask, dtype=bool)
    loss_mask = np.asarray(loss_mask, dtype=bool)
    if not loss_mask.any():
        raise ValueError("loss mask is empty")
    if np.any(labels[loss_mask] == UNLABELED):
        raise ValueError("loss node without a known label")
    op = normalized_adjacency(graph, edge_weights)
    y0 = Tensor(one_hot(labels, n_classes, clamp_mask))
    y = y0
    for step in range(iters):
        y = spmm(op, y)
        if step < iters - 1:
            y = row_reset(y, clamp_mask, y0)
    return renorm_cross_entropy(y, labels, loss_mask)


def lpa_clamp_subset(train_mask, ratio: float, seed: int) -> np.ndarray:
    """Uniform sample of floor(ratio * |train|) train nodes to clamp."""
    if not (0 <= ratio <= 1):
        raise ValueError(f"ratio must be in [0, 1], got {ratio}")
    train_mask = np.asarray(train_mask, dtype=bool)
    idx = np.flatnonzero(train_mask)
    count = int(np.floor(ratio * len(idx)))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(idx), size=count, replace=False)
    out = np.zeros_like(train_mask)
    out[idx[chosen]] = True
    return out
