"""Command-line entry point.

Errors exit with status 2 and a JSON object on stderr:
``{"error": <code>, "message": <text>}``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .classifier import TrainConfig, evaluate, load_model, save_model, train
from .diagram_metrics import bottleneck_distance, wasserstein_distance
from .errors import InvalidParameter, WaferTDAError
from .io import read_diagrams, read_features, write_diagrams, write_features, write_json
from .persistence_image import PIConfig, featurize_many
from .ph_engine import compute_persistence
from .plotting import plot_file
from .wafer_sim import CLASSES, generate_dataset, load_dataset, write_dataset

log = logging.getLogger("wafertda")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidParameter(f"config {path} is not valid JSON: {exc}") from exc


def _emit(args, payload: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print("\n".join(lines))


def _pi_config(conf: dict) -> PIConfig:
    return PIConfig.from_dict(conf.get("pi_config", {}))


# --- subcommands --------------------------------------------------------------


def cmd_generate(args) -> None:
    if len(args.counts) != len(CLASSES):
        raise InvalidParameter(f"--counts needs {len(CLASSES)} values ({','.join(CLASSES)})")
    wafers, manifest = generate_dataset(args.counts, args.seed, split=args.split)
    manifest = write_dataset(wafers, manifest, args.out)
    sizes = {k: len(v) for k, v in manifest["splits"].items()}
    _emit(args, {"out": str(args.out), "counts": manifest["counts"], "splits": sizes},
          [f"wrote {len(wafers)} wafers to {args.out}", f"counts {manifest['counts']}", f"splits {sizes}"])


def cmd_featurize(args) -> None:
    conf = _load_config(args.config)
    cfg = _pi_config(conf)
    wafers, manifest = load_dataset(args.data)
    if args.split == "all":
        idx = list(range(len(wafers)))
    else:
        idx = manifest["splits"][args.split]
    chosen = [wafers[i] for i in idx]
    X = featurize_many([w.points for w in chosen], cfg, workers=args.workers)
    y = np.array([w.label_index for w in chosen], dtype=np.int64)
    write_features(args.out, X, y, cfg, {"dataset": str(args.data), "split": args.split, "indices": idx})
    if args.diagrams:
        ddir = Path(args.diagrams)
        ddir.mkdir(parents=True, exist_ok=True)
        for i, w in zip(idx, chosen):
            write_diagrams(ddir / f"{i:05d}.json", compute_persistence(w.points))
    _emit(args, {"out": str(args.out), "rows": len(y), "features": X.shape[1]},
          [f"wrote {len(y)} x {X.shape[1]} features to {args.out}"])


def cmd_dist(args) -> None:
    a, b = read_diagrams(args.a), read_diagrams(args.b)
    if len(a) != len(b):
        raise InvalidParameter(f"{args.a} holds {len(a)} diagrams, {args.b} holds {len(b)}")
    dists = []
    for da, db in zip(a, b):
        if args.bottleneck:
            dists.append(bottleneck_distance(da, db))
        else:
            dists.append(wasserstein_distance(da, db, args.p))
    metric = "bottleneck" if args.bottleneck else f"W{args.p:g}"
    _emit(args, {"metric": metric, "distances": dists},
          [f"{metric} H{d.dim}: {v!r}" for d, v in zip(a, dists)])


def cmd_train(args) -> None:
    conf = _load_config(args.config)
    train_conf = dict(conf.get("train", {}))
    if args.seed is not None:
        train_conf["seed"] = args.seed
    if args.epochs is not None:
        train_conf["epochs"] = args.epochs
    cfg = TrainConfig.from_dict(train_conf)
    X, y = read_features(args.features)
    Xv, yv = read_features(args.val) if args.val else (None, None)
    model, curves = train(X, y, Xv, yv, cfg)
    save_model(model, args.out, cfg)
    timing = {"epoch_time": curves.pop("epoch_time")}
    write_json(str(args.out) + ".curves.json", {"curves": curves, "timing": timing, "features": str(args.features)})
    last = {k: v[-1] for k, v in curves.items() if v}
    _emit(args, {"out": str(args.out), "final": last},
          [f"trained {cfg.epochs} epochs on {len(y)} wafers -> {args.out}"] + [f"{k}: {v:.4f}" for k, v in last.items()])


def cmd_eval(args) -> None:
    model, header = load_model(args.model)
    X, y = read_features(args.features)
    rep = evaluate(model, X, y, config=header.get("config") or {})
    curves_path = Path(str(args.model) + ".curves.json")
    if curves_path.exists():
        rep.curves = json.loads(curves_path.read_text())["curves"]
    out = rep.to_dict()
    out.update({"model": str(args.model), "features": str(args.features), "classes": list(CLASSES)})
    if args.report:
        write_json(args.report, out)
    lines = [f"accuracy {rep.accuracy:.4f} on {len(y)} wafers", "confusion (rows true, cols predicted):"]
    lines += ["  " + " ".join(f"{v:4d}" for v in row) for row in rep.confusion.tolist()]
    _emit(args, {k: out[k] for k in ("accuracy", "confusion", "recall")}, lines)


def _spec(kind: str, args) -> ex.ExperimentSpec:
    conf = _load_config(args.config)
    params = dict(conf.get("params", {}))
    for key in ("epochs", "workers", "repeats"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    for key in ("ratios", "totals", "sizes"):
        val = getattr(args, key, None)
        if val:
            params[key] = val
    seeds = args.seeds or conf.get("seeds") or [args.seed if args.seed is not None else 0]
    return ex.ExperimentSpec(kind, tuple(seeds), params)


def _write_report(args, report: ex.ExperimentReport) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{report.kind}_report.json"
    write_json(path, report.to_dict())
    plot_file(path, out / "figures")
    return path


def cmd_experiment(args) -> None:
    report = ex.run_experiment(_spec(args.kind, args))
    path = _write_report(args, report)
    s = report.summary
    lines = [f"{report.kind} report -> {path}"]
    if report.kind == "basic":
        lines += [f"seed {r['seed']}: accuracy {r['accuracy']:.4f}, 90% train accuracy at epoch {r['epochs_to_90']}" for r in report.runs]
    elif report.kind == "small_data":
        lines += [f"{k:>4} per class: mean accuracy {v:.4f}" for k, v in s["mean_by_size"].items()]
    elif report.kind == "imbalanced":
        lines += [f"draw {r['draw']} {list(r['counts'].values())}: accuracy {r['accuracy']:.4f}" for r in report.runs]
        lines.append(f"mean accuracy {s['mean_accuracy']:.4f}")
    _emit(args, {"report": str(path), "summary": s}, lines)


def cmd_bench(args) -> None:
    report = ex.run_bench(_spec("bench", args))
    path = _write_report(args, report)
    lines = [f"bench report -> {path}", f"{'total':>6} {'random':>7} {'ms/wafer':>9} {'featurize s':>12} {'inference s':>12}"]
    for r in report.runs:
        t = r["timing"]
        lines.append(f"{r['total']:>6} {r['ratio']:>7.1f} {t['per_wafer_ms']:>9.3f} {t['featurize_s']:>12.4f} {t['inference_s']:>12.4f}")
    _emit(args, {"report": str(path), "runs": report.runs, "environment": report.environment}, lines)


def cmd_plot(args) -> None:
    written = plot_file(args.input, args.out, row=args.row)
    _emit(args, {"files": [str(p) for p in written]}, [str(p) for p in written])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--json", action="store_true", help="print JSON instead of tables")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="wafertda", description="Topological wafer-map defect classification")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="simulate a labelled wafer dataset")
    g.add_argument("--counts", type=_ints, required=True, help="per-class counts: random,ring,scratch,dense,cluster")
    g.add_argument("--split", type=_ints, default=None, help="per-class train,val,test sizes")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate, seed=0)

    f = sub.add_parser("featurize", parents=[common], help="persistence-image features for a dataset")
    f.add_argument("--data", required=True, help="dataset directory")
    f.add_argument("--split", choices=["train", "val", "test", "all"], default="all")
    f.add_argument("--out", required=True, help="output .csv or .npy")
    f.add_argument("--workers", type=int, default=1)
    f.add_argument("--diagrams", help="also write per-wafer diagram JSON files here")
    f.set_defaults(func=cmd_featurize)

    d = sub.add_parser("dist", parents=[common], help="distance between two diagram files")
    d.add_argument("a")
    d.add_argument("b")
    d.add_argument("--p", type=float, default=1.0, help="Wasserstein order")
    d.add_argument("--bottleneck", action="store_true")
    d.set_defaults(func=cmd_dist)

    t = sub.add_parser("train", parents=[common], help="train the classifier")
    t.add_argument("--features", required=True)
    t.add_argument("--val")
    t.add_argument("--epochs", type=int)
    t.add_argument("--out", required=True, help="model checkpoint path")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    e.add_argument("--model", required=True)
    e.add_argument("--features", required=True)
    e.add_argument("--report")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", parents=[common], help="raw-wafer-to-prediction timing")
    b.add_argument("--ratios", type=_floats)
    b.add_argument("--totals", type=_ints)
    b.add_argument("--repeats", type=int)
    b.add_argument("--seeds", type=_ints)
    b.add_argument("--workers", type=int)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    x = sub.add_parser("experiment", parents=[common], help="reproduce an experiment table")
    x.add_argument("kind", choices=["basic", "small-data", "imbalanced"])
    x.add_argument("--seeds", type=_ints)
    x.add_argument("--epochs", type=int)
    x.add_argument("--sizes", type=_ints, help="small-data training sizes per class")
    x.add_argument("--workers", type=int)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_experiment)

    pl = sub.add_parser("plot", parents=[common], help="render a wafer, diagram, feature file or report")
    pl.add_argument("input")
    pl.add_argument("--row", type=int, default=0, help="feature row to render")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (WaferTDAError, OSError) as exc:
        code = getattr(exc, "code", "io_error")
        print(json.dumps({"error": code, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
