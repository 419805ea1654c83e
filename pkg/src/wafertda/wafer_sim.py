"""Synthetic wafer maps for five defect classes on a radius-10 disk.

Every wafer draws from its own random stream, derived from the dataset seed
and the wafer index, so datasets can be generated in any order or in
parallel without changing a single coordinate.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError, InvalidParameter, LabelError

__all__ = [
    "CLASSES",
    "WAFER_RADIUS",
    "WaferMap",
    "gen_random",
    "gen_ring",
    "gen_scratch",
    "gen_dense",
    "gen_cluster",
    "GENERATORS",
    "wafer_seed",
    "make_wafer",
    "generate_dataset",
    "write_dataset",
    "load_dataset",
    "draw_imbalanced_counts",
]

CLASSES = ("Random", "Ring", "Scratch", "Dense", "Cluster")
WAFER_RADIUS = 10.0
CLUSTER_CENTER_RADIUS = 7.0


@dataclass
class WaferMap:
    points: np.ndarray
    label: str
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if self.label not in CLASSES:
            raise LabelError(f"unknown wafer label {self.label!r}")

    @property
    def label_index(self) -> int:
        return CLASSES.index(self.label)

    def to_dict(self) -> dict:
        return {"label": self.label, "seed": int(self.seed), "points": self.points.tolist(), "meta": self.meta}

    @classmethod
    def from_dict(cls, data: dict) -> "WaferMap":
        try:
            return cls(np.asarray(data["points"], dtype=float), data["label"], int(data["seed"]), dict(data.get("meta", {})))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, LabelError):
                raise
            raise FormatError(f"malformed wafer record: {exc}") from exc


def _polar(rng, n, r_lo, r_hi):
    theta = rng.uniform(0, 2 * np.pi, n)
    r = rng.uniform(r_lo, r_hi, n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _inside(points):
    return points[np.einsum("ij,ij->i", points, points) <= WAFER_RADIUS ** 2]


def _with_noise(rng, points, meta):
    n_noise = int(rng.integers(10, 61))
    meta["n_noise"] = n_noise
    return np.vstack([points, _polar(rng, n_noise, 0, WAFER_RADIUS)])


def gen_random(rng, seed: int = 0) -> WaferMap:
    n = int(rng.integers(10, 61))
    return WaferMap(_polar(rng, n, 0, WAFER_RADIUS), "Random", seed, {"n_random": n})


def gen_ring(rng, seed: int = 0) -> WaferMap:
    n = int(rng.integers(150, 301))
    r0 = float(rng.uniform(3, 6))
    delta = float(rng.uniform(0, 4))
    meta = {"n_ring": n, "r0": r0, "delta": delta}
    return WaferMap(_with_noise(rng, _polar(rng, n, r0, r0 + delta), meta), "Ring", seed, meta)


def gen_scratch(rng, seed: int = 0) -> WaferMap:
    while True:
        a, b = rng.uniform(-10, 10, 2)
        if abs(a - b) > 5:
            break
    k = 0.0
    while k == 0.0:
        k = float(rng.uniform(-1 / 15, 1 / 15))
    n = int(rng.integers(50, 101))
    theta = float(rng.uniform(0, 2 * np.pi))
    x = np.linspace(a, b, n)
    curve = np.column_stack([x, k * x ** 2])
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    kept = _inside(curve @ rot.T)
    meta = {"n_scratch": n, "a": float(a), "b": float(b), "k": k, "theta": theta, "n_scratch_kept": len(kept)}
    return WaferMap(_with_noise(rng, kept, meta), "Scratch", seed, meta)


def gen_dense(rng, seed: int = 0) -> WaferMap:
    n = int(rng.integers(150, 301))
    meta = {"n_dense": n}
    return WaferMap(_with_noise(rng, _polar(rng, n, 0, WAFER_RADIUS), meta), "Dense", seed, meta)


def gen_cluster(rng, seed: int = 0) -> WaferMap:
    n = int(rng.integers(150, 301))
    n_clusters = int(rng.integers(1, 4))
    # centers uniform on a disk of radius 7
    rc = CLUSTER_CENTER_RADIUS * np.sqrt(rng.uniform(0, 1, n_clusters))
    tc = rng.uniform(0, 2 * np.pi, n_clusters)
    centers = np.column_stack([rc * np.cos(tc), rc * np.sin(tc)])
    stds = rng.uniform(0.1, 2, n_clusters)
    sizes = [n // n_clusters + (1 if i < n % n_clusters else 0) for i in range(n_clusters)]
    blobs = [c + s * rng.standard_normal((m, 2)) for c, s, m in zip(centers, stds, sizes)]
    kept = _inside(np.vstack(blobs))
    meta = {
        "n_cluster": n,
        "n_clusters": n_clusters,
        "centers": centers.tolist(),
        "stds": stds.tolist(),
        "sizes": sizes,
        "n_cluster_kept": len(kept),
    }
    return WaferMap(_with_noise(rng, kept, meta), "Cluster", seed, meta)


GENERATORS = {
    "Random": gen_random,
    "Ring": gen_ring,
    "Scratch": gen_scratch,
    "Dense": gen_dense,
    "Cluster": gen_cluster,
}


def wafer_seed(global_seed: int, index: int) -> int:
    """64-bit seed of the wafer at ``index`` in a dataset seeded by ``global_seed``."""
    ss = np.random.SeedSequence([int(global_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_wafer(label: str, seed: int) -> WaferMap:
    if label not in GENERATORS:
        raise LabelError(f"unknown wafer label {label!r}")
    return GENERATORS[label](np.random.default_rng(seed), seed)


def _check_counts(counts) -> list[int]:
    if isinstance(counts, dict):
        counts = [counts.get(c, 0) for c in CLASSES]
    counts = [int(c) for c in counts]
    if len(counts) != len(CLASSES) or any(c < 0 for c in counts):
        raise InvalidParameter(f"need {len(CLASSES)} non-negative class counts, got {counts}")
    return counts


def generate_dataset(counts, seed: int, split: Sequence[int] | None = None, index_offset: int = 0):
    """Wafers and manifest for per-class ``counts``.

    ``split`` gives per-class (train, val, test) sizes that must add up to
    each non-zero class count; without it every wafer is a training wafer.
    ``index_offset`` shifts the wafer indices so that several datasets can
    share one seed without reusing streams.
    """
    counts = _check_counts(counts)
    wafers = []
    idx = index_offset
    for label, count in zip(CLASSES, counts):
        for _ in range(count):
            wafers.append(make_wafer(label, wafer_seed(seed, idx)))
            idx += 1
    names = ("train", "val", "test")
    splits = {name: [] for name in names}
    if split is None:
        splits["train"] = list(range(len(wafers)))
        sizes = None
    else:
        sizes = [int(s) for s in split]
        if len(sizes) != 3 or any(s < 0 for s in sizes):
            raise InvalidParameter(f"split must be three non-negative sizes, got {split}")
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index_offset), 1]))
        start = 0
        for count in counts:
            if count and count != sum(sizes):
                raise InvalidParameter(f"split {sizes} does not add up to class count {count}")
            members = start + rng.permutation(count)
            lo = 0
            for name, size in zip(names, sizes):
                if count:
                    splits[name].extend(int(i) for i in members[lo:lo + size])
                lo += size
            start += count
        for name in names:
            splits[name].sort()
    manifest = {
        "classes": list(CLASSES),
        "counts": dict(zip(CLASSES, counts)),
        "seed": int(seed),
        "index_offset": int(index_offset),
        "split_sizes": sizes,
        "splits": splits,
    }
    return wafers, manifest


def write_dataset(wafers: Sequence[WaferMap], manifest: dict, out_dir) -> dict:
    """Write one JSON file per wafer plus ``manifest.json``; returns the manifest."""
    out = Path(out_dir)
    wdir = out / "wafers"
    try:
        wdir.mkdir(parents=True, exist_ok=True)
        files = []
        for i, w in enumerate(wafers):
            name = f"wafers/{i:05d}.json"
            (out / name).write_text(json.dumps(w.to_dict()))
            files.append(name)
        manifest = dict(manifest, files=files, labels=[w.label for w in wafers])
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    except OSError as exc:
        raise OSError(f"writing dataset to {out}: {exc}") from exc
    return manifest


def load_dataset(path) -> tuple[list[WaferMap], dict]:
    root = Path(path)
    if root.is_file():
        root = root.parent
    try:
        manifest = json.loads((root / "manifest.json").read_text())
        wafers = [WaferMap.from_dict(json.loads((root / f).read_text())) for f in manifest["files"]]
    except OSError as exc:
        raise OSError(f"reading dataset from {root}: {exc}") from exc
    except (KeyError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad dataset at {root}: {exc}") from exc
    return wafers, manifest


def draw_imbalanced_counts(rng, low: int = 1, high: int = 300) -> list[int]:
    """Per-class counts drawn i.i.d. as the integer part of Uniform(low, high)."""
    return [int(v) for v in np.floor(rng.uniform(low, high, len(CLASSES)))]
