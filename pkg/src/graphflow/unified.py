"""Joint model: GCN over a learned symmetric edge-weight mask, regularized by
the unrolled label-propagation loss on the same weights.

The objective is L_gcn(W, A) + lambda * L_lpa(A) + l2(W). Both terms share
one set of effective edge weights per step, so gradients from the LPA
regularizer and the GCN loss both reach the raw edge parameters.
"""

from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .datasets import Dataset
from .gcn import GcnParams, gcn_forward, predict
from .lpa import lpa_clamp_subset, lpa_loss
from .optim import Adam, glorot_init, l2_penalty
from .propagation import normalized_adjacency

# softplus(THETA_UNIT) == 1, so training starts from the unweighted graph
THETA_UNIT = float(np.log(np.e - 1.0))

FREE_MODE = "free"
KERNEL_MODE = "kernel"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class EdgeWeightParams:
    """One raw parameter per undirected edge uid, positive via softplus.

    In kernel mode the raw scores are bilinear forms x_u^T H x_v instead and
    H is the trainable object.
    """
    theta: Tensor
    mode: str = FREE_MODE
    kernel: Tensor | None = None

    @classmethod
    def init(cls, graph, mode=FREE_MODE, feature_dim=None, rng=None,
             trainable=True):
        theta = Tensor(np.full(graph.n_undirected_edges, THETA_UNIT),
                       requires_grad=trainable and mode == FREE_MODE)
        kernel = None
        if mode == KERNEL_MODE:
            if feature_dim is None or rng is None:
                raise ValueError("kernel mode needs feature_dim and rng")
            kernel = glorot_init(feature_dim, feature_dim, rng)
            kernel.requires_grad = trainable
        elif mode != FREE_MODE:
            raise ValueError(f"unknown edge mode {mode!r}")
        return cls(theta=theta, mode=mode, kernel=kernel)

    def trainable(self):
        if self.mode == FREE_MODE:
            return [self.theta] if self.theta.requires_grad else []
        return [self.kernel] if self.kernel.requires_grad else []


def effective_weights(edge_params: EdgeWeightParams, dataset: Dataset) -> Tensor:
    """Positive per-uid weights: softplus of the raw scores."""
    if edge_params.mode == FREE_MODE:
        return ad.softplus(edge_params.theta)
    pairs = dataset.graph.undirected_pairs()
    scores = ad.edge_bilinear(edge_params.kernel, dataset.features,
                              pairs[:, 0], pairs[:, 1])
    return ad.softplus(scores)


@dataclass
class ModelConfig:
    hidden_dim: int = 16
    n_gcn_layers: int = 2
    n_lpa_iters: int = 5
    l2_weight: float = 5e-4
    lam: float = 1.0
    dropout_rate: float = 0.0
    learning_rate: float = 0.2
    epochs: int = 200
    seed: int = 0
    lpa_label_ratio: float = 1.0
    edge_mode: str = FREE_MODE
    train_edge_weights: bool = True

    # per-dataset settings; unknown names fall back to the citeseer row
    _TABLE = {
        "cora": dict(hidden_dim=32, n_gcn_layers=5, n_lpa_iters=5,
                     l2_weight=1e-4, lam=10.0, dropout_rate=0.2,
                     learning_rate=0.05),
        "citeseer": dict(hidden_dim=16, n_gcn_layers=2, n_lpa_iters=5,
                         l2_weight=5e-4, lam=1.0, dropout_rate=0.0,
                         learning_rate=0.2),
        "pubmed": dict(hidden_dim=32, n_gcn_layers=2, n_lpa_iters=1,
                       l2_weight=2e-4, lam=1.0, dropout_rate=0.0,
                       learning_rate=0.1),
        "coauthor-cs": dict(hidden_dim=32, n_gcn_layers=2, n_lpa_iters=2,
                            l2_weight=1e-4, lam=2.0, dropout_rate=0.2,
                            learning_rate=0.1),
        "coauthor-phy": dict(hidden_dim=32, n_gcn_layers=2, n_lpa_iters=3,
                             l2_weight=1e-4, lam=1.0, dropout_rate=0.2,
                             learning_rate=0.05),
        "karate": dict(hidden_dim=2, n_gcn_layers=2, n_lpa_iters=5,
                       l2_weight=1e-5, lam=1.0, dropout_rate=0.0,
                       learning_rate=0.1),
    }

    @classmethod
    def for_dataset(cls, name: str, **overrides) -> "ModelConfig":
        base = dict(cls._TABLE.get(name.lower(), cls._TABLE["citeseer"]))
        base.update(overrides)
        return cls(**base)

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    test_acc: float
    lpa_loss: float
    gcn_loss: float
    epoch_ms: float


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    test_accuracy: float = float("nan")

    def to_jsonl(self) -> str:
        """One JSON object per epoch. epoch_ms is written as null so that
        re-runs of the same manifest are byte-identical; measured timings
        stay in memory (and on stdout when the CLI reports them)."""
        lines = []
        for rec in self.epochs:
            d = asdict(rec)
            d["epoch_ms"] = None
            lines.append(json.dumps(d))
        return "\n".join(lines) + "\n"

    def mean_epoch_ms(self) -> float:
        return float(np.mean([r.epoch_ms for r in self.epochs]))


@dataclass
class ModelParams:
    gcn: GcnParams
    edges: EdgeWeightParams

    def all_trainable(self):
        return list(self.gcn.w_list) + self.edges.trainable()

    def snapshot(self) -> "ModelParams":
        return copy.deepcopy(self)


def init_params(dataset: Dataset, config: ModelConfig, rng) -> ModelParams:
    dims = ([dataset.feature_dim]
            + [config.hidden_dim] * (config.n_gcn_layers - 1)
            + [dataset.n_classes])
    w_list = [glorot_init(dims[k], dims[k + 1], rng)
              for k in range(config.n_gcn_layers)]
    edges = EdgeWeightParams.init(
        dataset.graph, mode=config.edge_mode, feature_dim=dataset.feature_dim,
        rng=rng, trainable=config.train_edge_weights)
    return ModelParams(gcn=GcnParams(w_list), edges=edges)


def joint_loss(dataset: Dataset, params: ModelParams, config: ModelConfig,
               clamp_mask, training: bool = False, rng=None):
    """Returns (scalar loss Tensor, dict of term values)."""
    split = dataset.split
    weights = effective_weights(params.edges, dataset)
    op = normalized_adjacency(dataset.graph, weights)
    logits = gcn_forward(op, dataset.features, params.gcn,
                         dropout_rate=config.dropout_rate,
                         training=training, rng=rng)
    gcn_term = ad.masked_softmax_cross_entropy(
        logits, dataset.labels, split.train_mask)
    loss = ad.add(gcn_term, l2_penalty(params.gcn.w_list, config.l2_weight))
    parts = {"gcn_loss": float(gcn_term.data), "lpa_loss": 0.0}
    if config.lam > 0:
        lpa_term = lpa_loss(dataset.graph, weights, dataset.labels,
                            clamp_mask, split.train_mask,
                            config.n_lpa_iters, dataset.n_classes)
        parts["lpa_loss"] = float(lpa_term.data)
        loss = ad.add(loss, ad.scale(lpa_term, config.lam))
    return loss, parts, logits


def _forward_eval(dataset, params, config):
    weights = effective_weights(params.edges, dataset)
    op = normalized_adjacency(dataset.graph, weights)
    return gcn_forward(op, dataset.features, params.gcn, training=False)


def evaluate(dataset: Dataset, params: ModelParams, mask) -> float:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty evaluation mask")
    preds = predict(_forward_eval(dataset, params, None))
    return float((preds[mask] == dataset.labels[mask]).mean())


def train(dataset: Dataset, config: ModelConfig, select: str = "best"):
    """Full-batch Adam on the joint objective.

    Returns (TrainReport, ModelParams): the best-validation snapshot by
    default, or the final-epoch parameters with select="final" (used by the
    demo paths that probe all nodes instead of a held-out set).
    Deterministic per config.seed.
    """
    if select not in ("best", "final"):
        raise ValueError(f"select must be 'best' or 'final', got {select!r}")
    config.validate()
    if dataset.split is None:
        raise ValueError("dataset has no split")
    ss = np.random.SeedSequence(config.seed)
    rng_init, rng_drop = [np.random.default_rng(s) for s in ss.spawn(2)]
    params = init_params(dataset, config, rng_init)
    clamp_mask = lpa_clamp_subset(dataset.split.train_mask,
                                  config.lpa_label_ratio, config.seed)
    opt = Adam(params.all_trainable(), lr=config.learning_rate)
    report = TrainReport()
    best_val = -1.0
    best_params = params.snapshot()
    labels = dataset.labels
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        opt.zero_grad()
        loss, parts, _ = joint_loss(dataset, params, config, clamp_mask,
                                    training=True, rng=rng_drop)
        if not np.isfinite(loss.data):
            raise TrainingDiverged(
                f"non-finite loss at epoch {epoch}: "
                f"gcn={parts['gcn_loss']:.4g} lpa={parts['lpa_loss']:.4g}")
        loss.backward()
        opt.step()
        logits = _forward_eval(dataset, params, config)
        preds = predict(logits)
        split = dataset.split
        train_acc = float((preds[split.train_mask] == labels[split.train_mask]).mean())
        val_acc = float((preds[split.val_mask] == labels[split.val_mask]).mean())
        test_acc = float((preds[split.test_mask] == labels[split.test_mask]).mean())
        epoch_ms = (time.perf_counter() - t0) * 1e3
        report.epochs.append(EpochRecord(
            epoch=epoch, train_loss=float(loss.data), train_acc=train_acc,
            val_acc=val_acc, test_acc=test_acc, lpa_loss=parts["lpa_loss"],
            gcn_loss=parts["gcn_loss"], epoch_ms=epoch_ms))
        if val_acc > best_val:  # strict: ties keep the earlier epoch
            best_val = val_acc
            report.best_epoch = epoch
            best_params = params.snapshot()
    report.test_accuracy = report.epochs[report.best_epoch].test_acc
    if select == "final":
        return report, params
    return report, best_params


def export_embeddings(dataset: Dataset, params: ModelParams, layer_index: int,
                      path) -> np.ndarray:
    """TSV "node, label, v1..vd" of a layer's post-activation representation.

    Layer indices are 1-based layer counts; the final layer exports logits.
    Returns the exported matrix.
    """
    weights = effective_weights(params.edges, dataset)
    op = normalized_adjacency(dataset.graph, weights)
    _, hidden = gcn_forward(op, dataset.features, params.gcn,
                            training=False, return_hidden=True)
    if not (1 <= layer_index <= len(hidden)):
        raise ValueError(f"layer {layer_index} not in 1..{len(hidden)}")
    emb = hidden[layer_index - 1].data
    with open(path, "w") as f:
        for i in range(dataset.n_nodes):
            vals = "\t".join(repr(float(v)) for v in emb[i])
            f.write(f"{i}\t{dataset.labels[i]}\t{vals}\n")
    return emb
