"""Command-line entry point: training runs, baselines, the verification
suite, synthetic benchmarks, and the karate-club demo.

Every command that writes files drops a manifest.json next to them recording
the resolved configuration, so a run can be reproduced exactly. Exit codes:
0 success, 1 runtime or check failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, report as figures
from .datasets import (
    DataFormatError, add_noise_edges, karate_club, load_dataset, make_split,
    row_normalize_features, synth_random_graph,
)
from .gcn import predict
from .graph import GraphError
from .lpa import DEFAULT_INFER_ITERS, lpa_infer
from .oracles import run_suite
from .unified import (
    EpochRecord, ModelConfig, TrainReport, TrainingDiverged, init_params,
    train, export_embeddings,
)

# CLI flag name -> ModelConfig field
_FLAG_TO_FIELD = {
    "layers": "n_gcn_layers",
    "hidden": "hidden_dim",
    "lpa_iters": "n_lpa_iters",
    "lam": "lam",
    "dropout": "dropout_rate",
    "lr": "learning_rate",
    "l2": "l2_weight",
    "epochs": "epochs",
    "seed": "seed",
    "lpa_label_ratio": "lpa_label_ratio",
    "edge_mode": "edge_mode",
}


def _parse_split(text: str, parser: argparse.ArgumentParser):
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        parser.error(f"--split must be three comma-separated floats, got {text!r}")
    if len(parts) != 3:
        parser.error(f"--split needs exactly three ratios, got {len(parts)}")
    if min(parts) <= 0 or abs(sum(parts) - 1.0) > 1e-9:
        parser.error(f"--split ratios must be positive and sum to 1, got {text}")
    return tuple(parts)


def _load(args, parser):
    if args.builtin:
        name = args.builtin
        dataset = karate_club()
    else:
        name = Path(args.data).name
        dataset = load_dataset(args.data)
        dataset = type(dataset)(
            graph=dataset.graph,
            features=row_normalize_features(dataset.features),
            labels=dataset.labels, n_classes=dataset.n_classes)
    ratios = _parse_split(args.split, parser)
    dataset = dataset.with_split(make_split(dataset, ratios, args.seed))
    return name, dataset


def _resolve_config(name: str, args) -> ModelConfig:
    overrides = {}
    for flag, field in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    if args.model == "gcn":
        overrides["lam"] = 0.0
        overrides["train_edge_weights"] = False
    return ModelConfig.for_dataset(name, **overrides)


def _write_manifest(out: Path, payload: dict) -> None:
    payload = dict(payload, version=__version__)
    with open(out / "manifest.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _lpa_report(dataset, iters: int) -> TrainReport:
    split = dataset.split
    soft = lpa_infer(dataset.graph, dataset.labels, split.train_mask,
                     dataset.n_classes, iters=iters)
    report = TrainReport()
    report.epochs.append(EpochRecord(
        epoch=0, train_loss=0.0,
        train_acc=soft.accuracy(dataset.labels, split.train_mask),
        val_acc=soft.accuracy(dataset.labels, split.val_mask),
        test_acc=soft.accuracy(dataset.labels, split.test_mask),
        lpa_loss=0.0, gcn_loss=0.0, epoch_ms=0.0))
    report.best_epoch = 0
    report.test_accuracy = report.epochs[0].test_acc
    return report


def cmd_train(args, parser) -> int:
    name, dataset = _load(args, parser)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _resolve_config(name, args)
    if args.model == "lpa":
        iters = args.lpa_iters or DEFAULT_INFER_ITERS
        train_report = _lpa_report(dataset, iters)
        best = None
        resolved = {"model": "lpa", "iters": iters, "seed": args.seed}
    else:
        train_report, best = train(dataset, config)
        resolved = dict(asdict(config), model=args.model)
    outputs = ["metrics.jsonl", "training_curves.png"]
    with open(out / "metrics.jsonl", "w") as f:
        f.write(train_report.to_jsonl())
    figures.save_training_curves(train_report, out / "training_curves.png")
    if args.emit_embeddings is not None and best is not None:
        layer = args.emit_embeddings or config.n_gcn_layers
        tsv = out / f"embeddings_layer{layer}.tsv"
        emb = export_embeddings(dataset, best, layer, tsv)
        outputs.append(tsv.name)
        if emb.shape[1] == 2:
            png = out / f"embeddings_layer{layer}.png"
            figures.save_embedding_scatter(
                emb, dataset.labels, f"layer {layer}", png)
            outputs.append(png.name)
    _write_manifest(out, {
        "command": "train", "config": resolved,
        "dataset": {"data": args.data, "builtin": args.builtin},
        "split": args.split, "seed": args.seed, "outputs": outputs})
    if args.model != "lpa":
        print(f"mean_epoch_ms={train_report.mean_epoch_ms():.3f}")
    print(f"test_acc={train_report.test_accuracy} "
          f"best_epoch={train_report.best_epoch}")
    return 0


def cmd_verify(args, parser) -> int:
    results = run_suite(args.suite, args.instances, args.seed)
    for res in results:
        print(res.to_json())
    return 0 if all(r.passed for r in results) else 1


def cmd_bench(args, parser) -> int:
    try:
        nodes = [int(p) for p in args.nodes.split(",")]
    except ValueError:
        parser.error(f"--nodes must be comma-separated ints, got {args.nodes!r}")
    if nodes != sorted(nodes):
        parser.error("--nodes must be ascending")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for n in nodes:
        try:
            dataset = synth_random_graph(n, args.avg_degree, args.seed)
            dataset = dataset.with_split(
                make_split(dataset, (0.6, 0.2, 0.2), args.seed))
            base = dict(epochs=args.epochs, seed=args.seed)
            plain_cfg = ModelConfig.for_dataset(
                "cora", lam=0.0, train_edge_weights=False, **base)
            joint_cfg = ModelConfig.for_dataset("cora", **base)
            plain_ms = train(dataset, plain_cfg)[0].mean_epoch_ms()
            joint_ms = train(dataset, joint_cfg)[0].mean_epoch_ms()
            row = {"n": n, "gcn_ms_per_epoch": plain_ms,
                   "gcnlpa_ms_per_epoch": joint_ms,
                   "overhead_pct": 100.0 * (joint_ms / plain_ms - 1.0)}
        except MemoryError:
            row = {"n": n, "error": "out of memory"}
        rows.append(row)
        print("\t".join(str(row.get(k, "error")) for k in (
            "n", "gcn_ms_per_epoch", "gcnlpa_ms_per_epoch", "overhead_pct")))
    with open(out / "bench.tsv", "w") as f:
        f.write("n\tgcn_ms_per_epoch\tgcnlpa_ms_per_epoch\toverhead_pct\n")
        for row in rows:
            f.write("\t".join(str(row.get(k, "error")) for k in (
                "n", "gcn_ms_per_epoch", "gcnlpa_ms_per_epoch",
                "overhead_pct")) + "\n")
    figures.save_bench_plot(rows, out / "bench.png")
    _write_manifest(out, {
        "command": "bench", "nodes": nodes, "avg_degree": args.avg_degree,
        "epochs": args.epochs, "seed": args.seed,
        "outputs": ["bench.tsv", "bench.png"]})
    return 0


def probe_accuracy(embedding, labels) -> float:
    """Accuracy of a logistic regression fit and scored on all nodes.

    Effectively unregularized (large C) so the probe measures linear
    separability of the embedding, not margin size.
    """
    from sklearn.linear_model import LogisticRegression

    clf = LogisticRegression(C=1e6, max_iter=10_000)
    clf.fit(embedding, labels)
    return float(clf.score(embedding, labels))


def cmd_karate(args, parser) -> int:
    try:
        layer_counts = [int(p) for p in args.layers.split(",")]
    except ValueError:
        parser.error(f"--layers must be comma-separated ints, got {args.layers!r}")
    if any(not 1 <= k <= 4 for k in layer_counts):
        parser.error("--layers entries must be in 1..4")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = karate_club()
    if args.noise:
        dataset = add_noise_edges(dataset, args.noise, args.seed)
    dataset = dataset.with_split(make_split(dataset, (0.6, 0.2, 0.2), args.seed))
    outputs = []
    for n_layers in layer_counts:
        for model in ("gcn", "gcn-lpa"):
            config = ModelConfig.for_dataset(
                "karate", n_gcn_layers=n_layers, hidden_dim=2,
                seed=args.seed, lam=0.0 if model == "gcn" else 1.0,
                train_edge_weights=model != "gcn")
            if args.untrained:
                params = init_params(dataset, config,
                                     np.random.default_rng(args.seed))
            else:
                # the demo probes all nodes, so early stopping on the tiny
                # validation set would only hurt; keep the final parameters
                _, params = train(dataset, config, select="final")
            stem = f"{model}_layers{n_layers}"
            emb = export_embeddings(dataset, params, n_layers,
                                    out / f"{stem}.tsv")
            figures.save_embedding_scatter(
                emb, dataset.labels, stem, out / f"{stem}.png")
            outputs += [f"{stem}.tsv", f"{stem}.png"]
            acc = probe_accuracy(emb, dataset.labels)
            print(f"model={model} layers={n_layers} probe_acc={acc}")
    _write_manifest(out, {
        "command": "karate", "noise": args.noise, "layers": layer_counts,
        "seed": args.seed, "untrained": args.untrained, "outputs": outputs})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphflow",
        description="Node classification via label propagation, graph "
                    "convolution, and their joint edge-weight-learning model.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write metrics")
    src = p_train.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="dataset directory (TSV + meta.json)")
    src.add_argument("--builtin", choices=["karate"],
                     help="built-in dataset name")
    p_train.add_argument("--model", choices=["gcn", "lpa", "gcn-lpa"],
                         default="gcn-lpa")
    p_train.add_argument("--layers", type=int)
    p_train.add_argument("--hidden", type=int)
    p_train.add_argument("--lpa-iters", type=int, dest="lpa_iters")
    p_train.add_argument("--lambda", type=float, dest="lam")
    p_train.add_argument("--dropout", type=float)
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--l2", type=float)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--split", default="0.6,0.2,0.2")
    p_train.add_argument("--lpa-label-ratio", type=float,
                         dest="lpa_label_ratio")
    p_train.add_argument("--edge-mode", choices=["free", "kernel"],
                         dest="edge_mode")
    p_train.add_argument("--out", default="run")
    p_train.add_argument("--emit-embeddings", type=int, nargs="?", const=0,
                         metavar="LAYER",
                         help="export a layer's embeddings (default: last)")
    p_train.set_defaults(func=cmd_train)

    p_verify = sub.add_parser("verify", help="run the oracle check suite")
    p_verify.add_argument("--suite", choices=["lemmas", "theorems", "all"],
                          default="all")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--instances", type=int, default=100)
    p_verify.set_defaults(func=cmd_verify)

    p_bench = sub.add_parser("bench", help="time training on synthetic graphs")
    p_bench.add_argument("--nodes", default="1000,10000",
                         help="ascending comma-separated node counts")
    p_bench.add_argument("--avg-degree", type=float, default=5,
                         dest="avg_degree")
    p_bench.add_argument("--epochs", type=int, default=100)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", default="bench")
    p_bench.set_defaults(func=cmd_bench)

    p_karate = sub.add_parser(
        "karate", help="embedding separability demo on the karate network")
    p_karate.add_argument("--noise", type=int, choices=[0, 20], default=0)
    p_karate.add_argument("--layers", default="2",
                          help="comma-separated layer counts, each in 1..4")
    p_karate.add_argument("--seed", type=int, default=0)
    p_karate.add_argument("--untrained", action="store_true",
                          help="use freshly initialized weights, no training")
    p_karate.add_argument("--out", default="karate_run")
    p_karate.set_defaults(func=cmd_karate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (TrainingDiverged, GraphError, DataFormatError, ValueError,
            FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
