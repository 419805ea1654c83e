"""Persistence images and the wafer feature vector.

A diagram is mapped to birth-persistence coordinates, each point is replaced
by an isotropic Gaussian scaled by a linear ramp weight, and the resulting
surface is integrated over each pixel of a fixed grid. The pixel integral of
a separable Gaussian is a product of two differences of the normal CDF, so
it is evaluated exactly.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import InvalidDiagram, InvalidParameter
from .ph_engine import PersistenceDiagram, compute_persistence

__all__ = [
    "PIConfig",
    "PersistenceImage",
    "to_birth_persistence",
    "weight",
    "compute_pi",
    "featurize_wafer",
    "featurize_many",
    "diagrams_to_vector",
    "stability_constant",
]


@dataclass(frozen=True)
class PIConfig:
    grid_nx: int = 20
    grid_ny: int = 20
    birth_range: tuple[float, float] = (0.0, 10.0)
    persistence_range: tuple[float, float] = (0.0, 10.0)
    sigma2: float = 0.01
    cutoff_c: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "birth_range", tuple(float(v) for v in self.birth_range))
        object.__setattr__(self, "persistence_range", tuple(float(v) for v in self.persistence_range))
        if self.grid_nx < 1 or self.grid_ny < 1:
            raise InvalidParameter("grid counts must be >= 1")
        for name in ("birth_range", "persistence_range"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise InvalidParameter(f"{name} must have positive length, got {(lo, hi)}")
        if not self.sigma2 > 0:
            raise InvalidParameter(f"sigma2 must be positive, got {self.sigma2}")
        if not self.cutoff_c > 0:
            raise InvalidParameter(f"cutoff_c must be positive, got {self.cutoff_c}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def n_features(self) -> int:
        return 2 * self.grid_nx * self.grid_ny

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.linspace(*self.birth_range, self.grid_nx + 1)
        y = np.linspace(*self.persistence_range, self.grid_ny + 1)
        return x, y

    def to_dict(self) -> dict:
        d = asdict(self)
        d["birth_range"] = list(self.birth_range)
        d["persistence_range"] = list(self.persistence_range)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PIConfig":
        return cls(**data)


@dataclass(frozen=True)
class PersistenceImage:
    dim: int
    pixels: np.ndarray  # (grid_ny, grid_nx); row j is persistence bin j


def _finite_pairs(B) -> np.ndarray:
    pairs = B.pairs if isinstance(B, PersistenceDiagram) else np.asarray(B, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(pairs)):
        raise InvalidDiagram("persistence images need finite pairs")
    return pairs


def to_birth_persistence(B) -> np.ndarray:
    """Map (birth, death) rows to (birth, death - birth)."""
    pairs = _finite_pairs(B)
    return np.column_stack([pairs[:, 0], pairs[:, 1] - pairs[:, 0]])


def weight(u, c: float = 10.0):
    """Linear ramp on persistence: 0 below 0, pers/c up to c, 1 beyond.

    ``u`` is a single (birth, persistence) point or an array of them.
    """
    if not c > 0:
        raise InvalidParameter(f"cutoff must be positive, got {c}")
    pers = np.asarray(u, dtype=float)[..., 1]
    w = np.clip(pers / c, 0.0, 1.0)
    return float(w) if w.ndim == 0 else w


def _axis_mass(centers: np.ndarray, edges: np.ndarray, sigma: float) -> np.ndarray:
    # (k, bins) mass of N(center, sigma^2) in each interval
    cdf = ndtr((edges[None, :] - centers[:, None]) / sigma)
    return np.diff(cdf, axis=1)


def compute_pi(B, cfg: PIConfig = PIConfig()) -> PersistenceImage:
    """Persistence image of one diagram; mass falling outside the grid is dropped."""
    dim = B.dim if isinstance(B, PersistenceDiagram) else -1
    bp = to_birth_persistence(B)
    x_edges, y_edges = cfg.edges()
    if bp.shape[0] == 0:
        return PersistenceImage(dim, np.zeros((cfg.grid_ny, cfg.grid_nx)))
    w = weight(bp, cfg.cutoff_c)
    gx = _axis_mass(bp[:, 0], x_edges, cfg.sigma)
    gy = _axis_mass(bp[:, 1], y_edges, cfg.sigma)
    pixels = (gy * w[:, None]).T @ gx
    return PersistenceImage(dim, np.maximum(pixels, 0.0))


def stability_constant(cfg: PIConfig = PIConfig()) -> float:
    """Lipschitz constant of the image map w.r.t. the 1-Wasserstein distance,
    for the ramp weight (gradient bound 1/c, sup bound 1)."""
    return math.sqrt(5) / cfg.cutoff_c + math.sqrt(10 / math.pi) / cfg.sigma


def diagrams_to_vector(dgm0, dgm1, cfg: PIConfig = PIConfig()) -> np.ndarray:
    return np.concatenate([compute_pi(dgm0, cfg).pixels.ravel(), compute_pi(dgm1, cfg).pixels.ravel()])


def featurize_wafer(cloud, cfg: PIConfig = PIConfig()) -> np.ndarray:
    """Dim-0 image then dim-1 image, each flattened row-major."""
    dgm0, dgm1 = compute_persistence(cloud)
    return diagrams_to_vector(dgm0, dgm1, cfg)


def _featurize_job(args):
    cloud, cfg = args
    return featurize_wafer(cloud, cfg)


def featurize_many(clouds: Sequence, cfg: PIConfig = PIConfig(), workers: int | None = 1) -> np.ndarray:
    """Feature matrix with one row per cloud, in input order.

    ``workers`` > 1 fans out over a process pool; each row depends only on
    its own cloud, so the result is identical to the sequential run.
    ``workers=None`` uses every available core.
    """
    n = len(clouds)
    out = np.zeros((n, cfg.n_features))
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or n < 2:
        for i, cloud in enumerate(clouds):
            out[i] = featurize_wafer(cloud, cfg)
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, n // (4 * workers))
        for i, row in enumerate(pool.map(_featurize_job, [(c, cfg) for c in clouds], chunksize=chunk)):
            out[i] = row
    return out
