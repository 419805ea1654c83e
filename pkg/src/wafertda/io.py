"""File formats for feature matrices and diagrams."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import FormatError, LabelError
from .persistence_image import PIConfig
from .ph_engine import PersistenceDiagram
from .wafer_sim import CLASSES

__all__ = [
    "write_features_csv",
    "read_features_csv",
    "write_features_npy",
    "read_features_npy",
    "write_features",
    "read_features",
    "write_diagrams",
    "read_diagrams",
    "write_json",
]


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _label_names(y) -> list[str]:
    return [CLASSES[int(i)] for i in y]


def _label_indices(names) -> np.ndarray:
    try:
        return np.array([CLASSES.index(n) for n in names], dtype=np.int64)
    except ValueError as exc:
        raise LabelError(f"unknown class label in feature file: {exc}") from exc


def write_features_csv(path, X, y) -> None:
    """One row per wafer: class name, then the feature values.

    Values are written with 17 significant digits, which round-trips float64
    exactly.
    """
    X = np.asarray(X, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"f{i:03d}" for i in range(X.shape[1])])
        for name, row in zip(_label_names(y), X):
            w.writerow([name] + [format(v, ".17g") for v in row])


def read_features_csv(path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"reading features from {path}: {exc}") from exc
    if not rows or rows[0][:1] != ["label"]:
        raise FormatError(f"{path}: missing 'label' header")
    body = rows[1:]
    try:
        X = np.array([[float(v) for v in r[1:]] for r in body], dtype=float).reshape(len(body), len(rows[0]) - 1)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return X, _label_indices([r[0] for r in body])


def write_features_npy(path, X, y, cfg: PIConfig, extra: dict | None = None) -> None:
    """Raw float64 matrix plus a JSON sidecar with labels and the image settings."""
    path = Path(path)
    np.save(path, np.asarray(X, dtype="<f8"))
    side = {"labels": _label_names(y), "shape": list(np.shape(X)), "pi_config": cfg.to_dict()}
    side.update(extra or {})
    write_json(path.with_suffix(".json"), side)


def read_features_npy(path) -> tuple[np.ndarray, np.ndarray, dict]:
    path = Path(path)
    X = np.load(path)
    try:
        side = json.loads(path.with_suffix(".json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: missing or unreadable sidecar: {exc}") from exc
    return X, _label_indices(side["labels"]), side


def write_features(path, X, y, cfg: PIConfig, extra: dict | None = None) -> None:
    if str(path).endswith(".npy"):
        write_features_npy(path, X, y, cfg, extra)
    else:
        write_features_csv(path, X, y)


def read_features(path) -> tuple[np.ndarray, np.ndarray]:
    if str(path).endswith(".npy"):
        X, y, _ = read_features_npy(path)
        return X, y
    return read_features_csv(path)


def write_diagrams(path, diagrams) -> None:
    """A single diagram as ``{"dim", "pairs"}``, several as ``{"diagrams": [...]}``."""
    if isinstance(diagrams, PersistenceDiagram):
        write_json(path, diagrams.to_dict())
    else:
        write_json(path, {"diagrams": [d.to_dict() for d in diagrams]})


def read_diagrams(path) -> list[PersistenceDiagram]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not JSON: {exc}") from exc
    if isinstance(data, dict) and "diagrams" in data:
        return [PersistenceDiagram.from_dict(d) for d in data["diagrams"]]
    return [PersistenceDiagram.from_dict(data)]
