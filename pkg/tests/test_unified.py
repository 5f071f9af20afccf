import json

import numpy as np
import pytest

from graphflow.datasets import karate_club, make_split
from graphflow.unified import (
    FREE_MODE, KERNEL_MODE, THETA_UNIT, EdgeWeightParams, ModelConfig,
    ModelParams, TrainingDiverged, effective_weights, init_params, joint_loss,
    train, export_embeddings,
)
from graphflow import autodiff as ad

from util import numeric_grad, rel_err


def karate_with_split(seed=0):
    ds = karate_club()
    return ds.with_split(make_split(ds, (0.6, 0.2, 0.2), seed=seed))


def test_initial_effective_weights_are_one():
    ds = karate_with_split()
    edges = EdgeWeightParams.init(ds.graph)
    w = effective_weights(edges, ds)
    np.testing.assert_allclose(w.data, 1.0, atol=1e-12)
    assert np.exp(THETA_UNIT) == pytest.approx(np.e - 1.0)


def test_config_table_and_overrides():
    cfg = ModelConfig.for_dataset("cora")
    assert cfg.n_gcn_layers == 5 and cfg.lam == 10.0
    cfg = ModelConfig.for_dataset("karate", epochs=50)
    assert cfg.hidden_dim == 2 and cfg.epochs == 50
    # unknown names fall back to a generic small-dataset row
    assert ModelConfig.for_dataset("nosuch").hidden_dim == \
        ModelConfig.for_dataset("citeseer").hidden_dim
    with pytest.raises(ValueError):
        ModelConfig(epochs=0).validate()
    with pytest.raises(ValueError):
        ModelConfig(lam=-1.0).validate()


def test_joint_loss_terms_and_lambda_zero():
    ds = karate_with_split()
    cfg = ModelConfig.for_dataset("karate", seed=1)
    params = init_params(ds, cfg, np.random.default_rng(1))
    clamp = ds.split.train_mask
    loss, parts, logits = joint_loss(ds, params, cfg, clamp)
    assert logits.data.shape == (34, 2)
    assert parts["lpa_loss"] > 0
    # lam=0 removes the propagation term entirely
    cfg0 = ModelConfig.for_dataset("karate", lam=0.0, seed=1)
    loss0, parts0, _ = joint_loss(ds, params, cfg0, clamp)
    assert parts0["lpa_loss"] == 0.0
    assert float(loss0.data) < float(loss.data)


def test_joint_loss_gradient_reaches_edge_weights():
    ds = karate_with_split()
    cfg = ModelConfig.for_dataset("karate", seed=2)
    params = init_params(ds, cfg, np.random.default_rng(2))
    clamp = ds.split.train_mask

    def loss():
        l, _, _ = joint_loss(ds, params, cfg, clamp)
        return l

    loss().backward()
    theta = params.edges.theta
    assert theta.grad is not None and np.any(theta.grad != 0)
    # spot check a handful of coordinates against finite differences
    rng = np.random.default_rng(0)
    idx = rng.choice(theta.data.size, size=8, replace=False)
    for i in idx:
        old = theta.data[i]
        h = 1e-5
        theta.data[i] = old + h
        up = float(loss().data)
        theta.data[i] = old - h
        down = float(loss().data)
        theta.data[i] = old
        num = (up - down) / (2 * h)
        assert abs(theta.grad[i] - num) <= 1e-5 * max(1.0, abs(num))


def test_frozen_edge_weights_not_trained():
    ds = karate_with_split()
    cfg = ModelConfig.for_dataset("karate", epochs=3, train_edge_weights=False)
    report, best = train(ds, cfg)
    np.testing.assert_allclose(best.edges.theta.data, THETA_UNIT)
    assert best.edges.trainable() == []


def test_kernel_mode_trains():
    ds = karate_with_split()
    cfg = ModelConfig.for_dataset("karate", epochs=3, edge_mode=KERNEL_MODE)
    report, best = train(ds, cfg)
    assert best.edges.kernel is not None
    assert len(report.epochs) == 3
    w = effective_weights(best.edges, ds)
    assert np.all(w.data > 0)


def test_train_determinism_and_report_shape():
    ds = karate_with_split()
    cfg = ModelConfig.for_dataset("karate", epochs=10, seed=7)
    r1, p1 = train(ds, cfg)
    r2, p2 = train(karate_with_split(), ModelConfig.for_dataset(
        "karate", epochs=10, seed=7))
    assert r1.to_jsonl() == r2.to_jsonl()
    np.testing.assert_array_equal(p1.gcn.w_list[0].data, p2.gcn.w_list[0].data)
    assert len(r1.epochs) == 10
    assert 0 <= r1.best_epoch < 10
    assert r1.test_accuracy == r1.epochs[r1.best_epoch].test_acc
    rec = json.loads(r1.to_jsonl().splitlines()[0])
    assert set(rec) == {"epoch", "train_loss", "train_acc", "val_acc",
                        "test_acc", "lpa_loss", "gcn_loss", "epoch_ms"}
    assert rec["epoch_ms"] is None
    assert r1.mean_epoch_ms() > 0


def test_training_improves_train_accuracy():
    ds = karate_with_split()
    cfg = ModelConfig.for_dataset("karate", epochs=60, seed=1)
    report, best = train(ds, cfg)
    assert report.epochs[-1].train_acc >= 0.9
    assert report.epochs[-1].train_loss < report.epochs[0].train_loss


def test_best_epoch_snapshot_matches_best_val():
    ds = karate_with_split()
    cfg = ModelConfig.for_dataset("karate", epochs=30, seed=4)
    report, best = train(ds, cfg)
    vals = [r.val_acc for r in report.epochs]
    assert report.best_epoch == int(np.argmax(vals))
    from graphflow.unified import evaluate
    assert evaluate(ds, best, ds.split.val_mask) == pytest.approx(
        max(vals))


def test_label_ratio_shrinks_clamped_set():
    ds = karate_with_split()
    cfg = ModelConfig.for_dataset("karate", epochs=2, lpa_label_ratio=0.5)
    report, _ = train(ds, cfg)  # just exercises the path
    assert len(report.epochs) == 2


def test_train_requires_split():
    ds = karate_club()
    with pytest.raises(ValueError, match="split"):
        train(ds, ModelConfig.for_dataset("karate", epochs=1))


def test_divergence_raises():
    ds = karate_with_split()
    cfg = ModelConfig.for_dataset("karate", epochs=5, seed=0)
    params = init_params(ds, cfg, np.random.default_rng(0))
    params.gcn.w_list[0].data[:] = np.inf
    with pytest.raises(TrainingDiverged):
        loss, parts, _ = joint_loss(ds, params, cfg, ds.split.train_mask)
        if not np.isfinite(loss.data):
            raise TrainingDiverged("non-finite loss")


def test_export_embeddings(tmp_path):
    ds = karate_with_split()
    cfg = ModelConfig.for_dataset("karate", epochs=2, seed=5)
    _, best = train(ds, cfg)
    path = tmp_path / "emb.tsv"
    emb = export_embeddings(ds, best, layer_index=1, path=path)
    assert emb.shape == (34, 2)
    lines = path.read_text().splitlines()
    assert len(lines) == 34
    first = lines[0].split("\t")
    assert first[0] == "0"
    assert int(first[1]) in (0, 1)
    assert len(first) == 4
    with pytest.raises(ValueError):
        export_embeddings(ds, best, layer_index=9, path=path)
