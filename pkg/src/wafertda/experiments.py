"""Desk-scale experiment drivers: basic accuracy, prediction throughput,
small training sets and imbalanced training sets.

Every wafer comes from a stream keyed by (seed, index), and each dataset
role uses its own index range, so a report can be replayed from its spec.
Wall-clock numbers live under ``timing`` keys and are the only part of a
report that changes between replays.
"""
from __future__ import annotations

import copy
import logging
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np
import numba
import scipy

from .classifier import TrainConfig, evaluate, predict, train
from .errors import InvalidParameter
from .persistence_image import PIConfig, featurize_many
from .wafer_sim import CLASSES, draw_imbalanced_counts, generate_dataset

log = logging.getLogger(__name__)

__all__ = [
    "KINDS",
    "ExperimentSpec",
    "ExperimentReport",
    "environment_fingerprint",
    "epochs_to_reach",
    "strip_timing",
    "run_basic",
    "run_small_data",
    "run_imbalanced",
    "run_bench",
    "run_experiment",
]

KINDS = ("basic", "small_data", "imbalanced", "bench")

# wafer index ranges per dataset role
TEST_OFFSET = 10_000_000
DRAW_OFFSET = 1_000_000
BENCH_OFFSET = 20_000_000
BENCH_MODEL_OFFSET = 30_000_000

DEFAULTS = {
    "basic": {"per_class": 500, "split": [300, 100, 100], "epochs": 700},
    "small_data": {"sizes": list(range(10, 101, 10)), "test_per_class": 100, "test_seed": 2024, "epochs": 700},
    "imbalanced": {"n_draws": 10, "low": 1, "high": 300, "test_per_class": 100, "test_seed": 2024, "epochs": 700},
    "bench": {
        "ratios": [0.7, 0.8, 0.9],
        "totals": [500, 1000],
        "repeats": 3,
        "model_per_class": 60,
        "model_epochs": 30,
    },
}
COMMON = {"workers": 1, "batch_size": 32, "learning_rate": 1e-3}


@dataclass
class ExperimentSpec:
    kind: str
    seeds: tuple = (0,)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        if kind not in KINDS:
            raise InvalidParameter(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        self.kind = kind
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise InvalidParameter("at least one seed is required")
        unknown = set(self.params) - set(DEFAULTS[kind]) - set(COMMON) - {"pi_config"}
        if unknown:
            raise InvalidParameter(f"unknown {kind} parameters: {sorted(unknown)}")
        self.params = {**COMMON, **copy.deepcopy(DEFAULTS[kind]), **self.params}
        self._validate()

    def _validate(self):
        p = self.params
        if self.kind == "basic":
            if sum(p["split"]) != p["per_class"]:
                raise InvalidParameter(f"split {p['split']} must add up to {p['per_class']} per class")
        elif self.kind == "small_data":
            if not p["sizes"] or min(p["sizes"]) < 1:
                raise InvalidParameter("training sizes must be positive")
        elif self.kind == "imbalanced":
            if not 1 <= p["low"] < p["high"]:
                raise InvalidParameter("need 1 <= low < high for the count draws")
        elif self.kind == "bench":
            if not set(p["ratios"]) <= {0.7, 0.8, 0.9}:
                raise InvalidParameter(f"random ratios must be drawn from 0.7, 0.8, 0.9, got {p['ratios']}")
            if not set(p["totals"]) <= {500, 1000}:
                raise InvalidParameter(f"totals must be drawn from 500, 1000, got {p['totals']}")
        if p["epochs" if "epochs" in p else "model_epochs"] < 1:
            raise InvalidParameter("epochs must be >= 1")

    def pi_config(self) -> PIConfig:
        return PIConfig.from_dict(self.params["pi_config"]) if "pi_config" in self.params else PIConfig()

    def train_config(self, seed: int, epochs: int | None = None) -> TrainConfig:
        p = self.params
        return TrainConfig(
            learning_rate=p["learning_rate"],
            batch_size=p["batch_size"],
            epochs=epochs if epochs is not None else p["epochs"],
            seed=seed,
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seeds": list(self.seeds), "params": self.params}


@dataclass
class ExperimentReport:
    kind: str
    spec: dict
    runs: list
    summary: dict
    environment: dict

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "spec": self.spec,
            "runs": self.runs,
            "summary": self.summary,
            "environment": self.environment,
        }


def environment_fingerprint() -> dict:
    cpu = platform.processor() or ""
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return {
        "cpu_model": cpu,
        "cpu_count": os.cpu_count(),
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def strip_timing(obj):
    """Copy of a report with every ``timing`` entry and the environment removed."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in ("timing", "environment")}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def epochs_to_reach(acc_curve, target: float = 0.9) -> int | None:
    """1-based index of the first epoch whose accuracy reaches ``target``."""
    for i, a in enumerate(acc_curve):
        if a >= target:
            return i + 1
    return None


def _features(wafers, cfg: PIConfig, workers: int):
    t0 = time.perf_counter()
    X = featurize_many([w.points for w in wafers], cfg, workers=workers)
    y = np.array([w.label_index for w in wafers], dtype=np.int64)
    return X, y, time.perf_counter() - t0


def _fit(X, y, Xv, yv, cfg: TrainConfig):
    model, curves = train(X, y, Xv, yv, cfg)
    epoch_time = curves.pop("epoch_time")
    if Xv is None:
        curves.pop("val_acc")
        curves.pop("val_loss")
    return model, curves, epoch_time


def _run_record(seed, report, curves, epoch_time, **extra) -> dict:
    rec = {
        "seed": seed,
        "accuracy": report.accuracy,
        "confusion": report.confusion.tolist(),
        "recall": report.recall.tolist(),
        "epochs_to_90": epochs_to_reach(curves["train_acc"]),
        "curves": curves,
        "timing": {"median_epoch_s": float(np.median(epoch_time)), "train_s": float(np.sum(epoch_time))},
    }
    rec.update(extra)
    return rec


def _test_set(spec: ExperimentSpec, cfg: PIConfig):
    p = spec.params
    wafers, _ = generate_dataset([p["test_per_class"]] * len(CLASSES), p["test_seed"], index_offset=TEST_OFFSET)
    return _features(wafers, cfg, p["workers"])


def run_basic(spec: ExperimentSpec) -> ExperimentReport:
    """500 wafers per class split 300/100/100, full training, test accuracy."""
    p, cfg = spec.params, spec.pi_config()
    runs = []
    for seed in spec.seeds:
        wafers, manifest = generate_dataset([p["per_class"]] * len(CLASSES), seed, split=p["split"])
        X, y, feat_s = _features(wafers, cfg, p["workers"])
        sp = manifest["splits"]
        tr, va, te = (np.array(sp[k], dtype=np.int64) for k in ("train", "val", "test"))
        model, curves, epoch_time = _fit(X[tr], y[tr], X[va] if len(va) else None, y[va], spec.train_config(seed))
        rep = evaluate(model, X[te], y[te])
        rec = _run_record(seed, rep, curves, epoch_time, dataset={"seed": seed, "counts": manifest["counts"], "split": p["split"]})
        rec["timing"]["featurize_s"] = feat_s
        runs.append(rec)
        log.info("basic seed %d: accuracy %.4f", seed, rep.accuracy)
    accs = [r["accuracy"] for r in runs]
    summary = {
        "accuracies": accs,
        "mean_accuracy": float(np.mean(accs)),
        "min_accuracy": float(np.min(accs)),
        "epochs_to_90": [r["epochs_to_90"] for r in runs],
    }
    return ExperimentReport("basic", spec.to_dict(), runs, summary, environment_fingerprint())


def run_small_data(spec: ExperimentSpec) -> ExperimentReport:
    """One model per training size, all scored on one shared test set.

    For each seed the training sets are nested: size k takes the first k
    wafers of each class from a pool of ``max(sizes)`` per class.
    """
    p, cfg = spec.params, spec.pi_config()
    Xt, yt, _ = _test_set(spec, cfg)
    sizes = sorted(p["sizes"])
    runs = []
    for seed in spec.seeds:
        pool, _ = generate_dataset([sizes[-1]] * len(CLASSES), seed)
        Xp, yp, _ = _features(pool, cfg, p["workers"])
        for size in sizes:
            idx = np.concatenate([np.flatnonzero(yp == c)[:size] for c in range(len(CLASSES))])
            model, curves, epoch_time = _fit(Xp[idx], yp[idx], None, None, spec.train_config(seed))
            rep = evaluate(model, Xt, yt)
            runs.append(_run_record(seed, rep, curves, epoch_time, size=size))
            log.info("small-data seed %d size %d: accuracy %.4f", seed, size, rep.accuracy)
    table = {str(s): [r["accuracy"] for r in runs if r["size"] == s] for s in sizes}
    summary = {
        "sizes": sizes,
        "accuracy_by_size": table,
        "mean_by_size": {k: float(np.mean(v)) for k, v in table.items()},
        "test_set": {"seed": p["test_seed"], "per_class": p["test_per_class"], "index_offset": TEST_OFFSET},
    }
    return ExperimentReport("small_data", spec.to_dict(), runs, summary, environment_fingerprint())


def run_imbalanced(spec: ExperimentSpec) -> ExperimentReport:
    """Training sets with per-class counts drawn i.i.d. from Int(Uniform(low, high))."""
    p, cfg = spec.params, spec.pi_config()
    Xt, yt, _ = _test_set(spec, cfg)
    runs = []
    for seed in spec.seeds:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 4]))
        for i in range(p["n_draws"]):
            counts = draw_imbalanced_counts(rng, p["low"], p["high"])
            wafers, manifest = generate_dataset(counts, seed, index_offset=(i + 1) * DRAW_OFFSET)
            X, y, _ = _features(wafers, cfg, p["workers"])
            model, curves, epoch_time = _fit(X, y, None, None, spec.train_config(seed * 1000 + i))
            rep = evaluate(model, Xt, yt)
            runs.append(_run_record(seed, rep, curves, epoch_time, draw=i, counts=dict(zip(CLASSES, counts))))
            log.info("imbalanced seed %d draw %d %s: accuracy %.4f", seed, i, counts, rep.accuracy)
    accs = [r["accuracy"] for r in runs]
    rich = [r["accuracy"] for r in runs if min(r["counts"].values()) >= 150]
    summary = {
        "accuracies": accs,
        "mean_accuracy": float(np.mean(accs)),
        "rich_draw_accuracies": rich,
        "test_set": {"seed": p["test_seed"], "per_class": p["test_per_class"], "index_offset": TEST_OFFSET},
    }
    return ExperimentReport("imbalanced", spec.to_dict(), runs, summary, environment_fingerprint())


def bench_counts(total: int, ratio: float) -> list[int]:
    """Random share ``ratio``; the rest spread as evenly as possible over the other classes."""
    n_random = int(round(total * ratio))
    rest = total - n_random
    k = len(CLASSES) - 1
    return [n_random] + [rest // k + (1 if i < rest % k else 0) for i in range(k)]


def run_bench(spec: ExperimentSpec) -> ExperimentReport:
    """Raw wafer to prediction wall time on mixed datasets with many random wafers.

    The model is trained briefly on a small balanced set; inference cost does
    not depend on how well it is trained. Each configuration is timed
    ``repeats`` times and the medians are reported.
    """
    p, cfg = spec.params, spec.pi_config()
    runs = []
    for seed in spec.seeds:
        mw, _ = generate_dataset([p["model_per_class"]] * len(CLASSES), seed, index_offset=BENCH_MODEL_OFFSET)
        Xm, ym, _ = _features(mw, cfg, p["workers"])
        model, _, _ = _fit(Xm, ym, None, None, spec.train_config(seed, p["model_epochs"]))
        # warm-up so that compiled kernels and caches are hot
        featurize_many([w.points for w in mw[:3]], cfg)
        k = 0
        for total in p["totals"]:
            for ratio in p["ratios"]:
                counts = bench_counts(total, ratio)
                wafers, _ = generate_dataset(counts, seed, index_offset=BENCH_OFFSET + k * DRAW_OFFSET)
                k += 1
                clouds = [w.points for w in wafers]
                y = np.array([w.label_index for w in wafers])
                reps = []
                for _ in range(p["repeats"]):
                    t0 = time.perf_counter()
                    X = featurize_many(clouds, cfg, workers=p["workers"])
                    t1 = time.perf_counter()
                    pred = predict(model, X)
                    t2 = time.perf_counter()
                    reps.append((t2 - t0, t1 - t0, t2 - t1))
                tot, feat, inf = (float(np.median([r[j] for r in reps])) for j in range(3))
                runs.append({
                    "seed": seed,
                    "total": total,
                    "ratio": ratio,
                    "counts": dict(zip(CLASSES, counts)),
                    "accuracy": float(np.mean(pred == y)),
                    "timing": {
                        "total_s": tot,
                        "featurize_s": feat,
                        "inference_s": inf,
                        "per_wafer_ms": 1e3 * tot / total,
                        "repeats_total_s": [r[0] for r in reps],
                    },
                })
                log.info("bench total %d ratio %.1f: %.3f ms/wafer", total, ratio, 1e3 * tot / total)
    summary = {"configs": [{"total": r["total"], "ratio": r["ratio"], "seed": r["seed"]} for r in runs]}
    return ExperimentReport("bench", spec.to_dict(), runs, summary, environment_fingerprint())


RUNNERS = {"basic": run_basic, "small_data": run_small_data, "imbalanced": run_imbalanced, "bench": run_bench}


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    return RUNNERS[spec.kind](spec)
