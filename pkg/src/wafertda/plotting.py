"""Figures for wafers, diagrams, images and experiment reports.

Every figure is written together with a CSV holding exactly the plotted
numbers, under the same file stem.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import FormatError  # noqa: E402
from .io import read_diagrams, read_features  # noqa: E402
from .ph_engine import PersistenceDiagram  # noqa: E402
from .wafer_sim import CLASSES, WAFER_RADIUS, WaferMap  # noqa: E402

__all__ = [
    "plot_wafer",
    "plot_diagrams",
    "plot_pi",
    "plot_curves",
    "plot_confusion",
    "plot_file",
]


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_wafer(wafer: WaferMap, out_dir, stem: str = "wafer") -> list[Path]:
    out = Path(out_dir)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.add_patch(plt.Circle((0, 0), WAFER_RADIUS, fill=False, color="0.5"))
    ax.scatter(wafer.points[:, 0], wafer.points[:, 1], s=6, color="k")
    ax.set_xlim(-WAFER_RADIUS - 0.5, WAFER_RADIUS + 0.5)
    ax.set_ylim(-WAFER_RADIUS - 0.5, WAFER_RADIUS + 0.5)
    ax.set_aspect("equal")
    ax.set_title(f"{wafer.label} ({len(wafer.points)} defects)")
    _write_csv(out / f"{stem}.csv", ["x", "y"], wafer.points.tolist())
    return [_save(fig, out / f"{stem}.png"), out / f"{stem}.csv"]


def plot_diagrams(diagrams, out_dir, stem: str = "diagram") -> list[Path]:
    """Birth-death scatter with the diagonal drawn for reference."""
    out = Path(out_dir)
    if isinstance(diagrams, PersistenceDiagram):
        diagrams = [diagrams]
    fig, ax = plt.subplots(figsize=(4, 4))
    rows = []
    hi = 1.0
    for d in diagrams:
        if len(d):
            ax.scatter(d.pairs[:, 0], d.pairs[:, 1], s=12, label=f"H{d.dim}")
            hi = max(hi, float(d.pairs.max()))
        rows.extend([d.dim, b, e] for b, e in d.pairs.tolist())
    ax.plot([0, hi * 1.05], [0, hi * 1.05], color="0.5", lw=1)
    ax.set_xlim(0, hi * 1.05)
    ax.set_ylim(0, hi * 1.05)
    ax.set_xlabel("birth")
    ax.set_ylabel("death")
    if rows:
        ax.legend(loc="lower right")
    _write_csv(out / f"{stem}.csv", ["dim", "birth", "death"], rows)
    return [_save(fig, out / f"{stem}.png"), out / f"{stem}.csv"]


def plot_pi(pixels: np.ndarray, out_dir, stem: str = "pi", extent=(0, 10, 0, 10)) -> list[Path]:
    """Heat map plus a plain grayscale image of the raw pixel grid."""
    out = Path(out_dir)
    pixels = np.asarray(pixels, dtype=float)
    fig, ax = plt.subplots(figsize=(4, 3.4))
    im = ax.imshow(pixels, origin="lower", extent=extent, cmap="viridis", aspect="auto")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("birth")
    ax.set_ylabel("persistence")
    np.savetxt(out / f"{stem}.csv", pixels, delimiter=",", fmt="%.17g")
    plt.imsave(out / f"{stem}_gray.png", pixels, cmap="gray", origin="lower")
    return [_save(fig, out / f"{stem}.png"), out / f"{stem}_gray.png", out / f"{stem}.csv"]


def plot_curves(curves: dict, out_dir, stem: str = "curves") -> list[Path]:
    """One figure per metric; train and validation share a figure."""
    out = Path(out_dir)
    written = []
    metrics = sorted({k.split("_", 1)[1] for k in curves if k.startswith(("train_", "val_"))})
    for metric in metrics:
        series = {k: curves[k] for k in (f"train_{metric}", f"val_{metric}") if curves.get(k)}
        if not series:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for name, vals in series.items():
            ax.plot(np.arange(1, len(vals) + 1), vals, label=name.split("_")[0])
        ax.set_xlabel("epoch")
        ax.set_ylabel(metric)
        ax.legend()
        n = max(len(v) for v in series.values())
        rows = [[e + 1] + [v[e] if e < len(v) else "" for v in series.values()] for e in range(n)]
        _write_csv(out / f"{stem}_{metric}.csv", ["epoch"] + list(series), rows)
        written += [_save(fig, out / f"{stem}_{metric}.png"), out / f"{stem}_{metric}.csv"]
    return written


def plot_confusion(confusion, out_dir, stem: str = "confusion") -> list[Path]:
    out = Path(out_dir)
    cm = np.asarray(confusion)
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    ax.imshow(cm, cmap="Blues")
    for (i, j), v in np.ndenumerate(cm):
        ax.text(j, i, str(v), ha="center", va="center", color="white" if v > cm.max() / 2 else "black")
    ax.set_xticks(range(len(CLASSES)), CLASSES, rotation=45, ha="right")
    ax.set_yticks(range(len(CLASSES)), CLASSES)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    _write_csv(out / f"{stem}.csv", ["true"] + list(CLASSES), [[CLASSES[i]] + row for i, row in enumerate(cm.tolist())])
    return [_save(fig, out / f"{stem}.png"), out / f"{stem}.csv"]


def _plot_experiment(data: dict, out: Path) -> list[Path]:
    written = []
    kind = data["kind"]
    for i, run in enumerate(data["runs"]):
        tag = f"{kind}_run{i}"
        if run.get("curves"):
            written += plot_curves(run["curves"], out, f"{tag}_curves")
        if run.get("confusion"):
            written += plot_confusion(run["confusion"], out, f"{tag}_confusion")
    if kind == "small_data":
        s = data["summary"]
        fig, ax = plt.subplots(figsize=(5, 3.2))
        sizes = s["sizes"]
        means = [s["mean_by_size"][str(k)] for k in sizes]
        ax.plot(sizes, means, marker="o")
        ax.set_xlabel("training wafers per class")
        ax.set_ylabel("test accuracy")
        _write_csv(out / "small_data_accuracy.csv", ["size", "mean_accuracy"], list(zip(sizes, means)))
        written += [_save(fig, out / "small_data_accuracy.png"), out / "small_data_accuracy.csv"]
    if kind == "bench":
        fig, ax = plt.subplots(figsize=(5, 3.2))
        rows = []
        for total in sorted({r["total"] for r in data["runs"]}):
            sel = [r for r in data["runs"] if r["total"] == total]
            ax.plot([r["ratio"] for r in sel], [r["timing"]["per_wafer_ms"] for r in sel], marker="o", label=f"{total} wafers")
            rows += [[total, r["ratio"], r["timing"]["per_wafer_ms"]] for r in sel]
        ax.set_xlabel("share of random wafers")
        ax.set_ylabel("ms per wafer")
        ax.legend()
        _write_csv(out / "bench_latency.csv", ["total", "ratio", "per_wafer_ms"], rows)
        written += [_save(fig, out / "bench_latency.png"), out / "bench_latency.csv"]
    return written


def plot_file(path, out_dir, row: int = 0) -> list[Path]:
    """Render whatever ``path`` holds: wafer, diagram(s), feature matrix,
    evaluation report or experiment report."""
    path = Path(path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    if path.suffix in (".csv", ".npy"):
        X, y = read_features(path)
        if not 0 <= row < len(X):
            raise FormatError(f"row {row} out of range for {len(X)} feature rows")
        half = X.shape[1] // 2
        side = int(round(np.sqrt(half)))
        if side * side != half:
            raise FormatError(f"{path}: feature length {X.shape[1]} is not two square images")
        return plot_pi(X[row, :half].reshape(side, side), out, f"{stem}_row{row}_H0") + plot_pi(
            X[row, half:].reshape(side, side), out, f"{stem}_row{row}_H1"
        )
    try:
        data = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot plot {path}: not a JSON or feature file") from exc
    if not isinstance(data, dict):
        raise FormatError(f"cannot plot {path}: unrecognised content")
    if {"dim", "pairs"} <= set(data) or "diagrams" in data:
        return plot_diagrams(read_diagrams(path), out, stem)
    if {"label", "points"} <= set(data):
        return plot_wafer(WaferMap.from_dict(data), out, stem)
    if "kind" in data and "runs" in data:
        return _plot_experiment(data, out)
    if "confusion" in data:
        written = plot_confusion(data["confusion"], out, f"{stem}_confusion")
        if data.get("curves"):
            written += plot_curves(data["curves"], out, f"{stem}_curves")
        return written
    raise FormatError(f"cannot plot {path}: unrecognised content")
