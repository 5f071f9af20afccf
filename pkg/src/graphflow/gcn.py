"""Multi-layer GCN forward pass over a row-stochastic adjacency.

Layer rule: X_{k+1} = relu(T X_k W_k), final layer linear (softmax lives in
the loss). Dropout is applied to the input and after every hidden activation.
No bias terms. Sparse input features take the algebraically equivalent
T (X W) route so the one-hot-identity case never densifies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .propagation import RowStochasticOperator, spmm


@dataclass
class GcnParams:
    w_list: list  # layer k maps dim_k -> dim_{k+1}; no biases

    @property
    def n_layers(self) -> int:
        return len(self.w_list)


def gcn_forward(op: RowStochasticOperator, features, params: GcnParams,
                dropout_rate: float = 0.0, training: bool = False, rng=None,
                return_hidden: bool = False):
    """Logits tensor; optionally also the post-activation output of each layer."""
    if params.n_layers < 1:
        raise ValueError("need at least one layer")
    if training and dropout_rate > 0 and rng is None:
        raise ValueError("training dropout needs an rng")
    hidden = []
    if sp.issparse(features):
        xs = ad.sparse_dropout(features, dropout_rate, training, rng)
        x = spmm(op, ad.sparse_matmul(xs, params.w_list[0]))
    else:
        x = ad.dropout(ad.as_tensor(features), dropout_rate, training, rng)
        x = ad.matmul(spmm(op, x), params.w_list[0])
    for k in range(1, params.n_layers + 1):
        if k < params.n_layers:
            x = ad.relu(x)
            hidden.append(x)
            x = ad.dropout(x, dropout_rate, training, rng)
            x = ad.matmul(spmm(op, x), params.w_list[k])
        else:
            hidden.append(x)  # final layer stays linear
    logits = x
    if return_hidden:
        return logits, hidden
    return logits


def predict(logits) -> np.ndarray:
    """Row argmax; ties break toward the lowest class index."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    if np.any(np.isnan(data)):
        raise ValueError("NaN logits")
    return np.argmax(data, axis=1)


def aggregate_step(op: RowStochasticOperator, x) -> Tensor:
    """A single neighborhood-averaging step h = T x, exposed for analysis."""
    return spmm(op, x)
