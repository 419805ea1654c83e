"""Exact Wasserstein and bottleneck distances between persistence diagrams.

Points may be matched to the diagonal. The ground cost is the sup-norm on
the plane, so matching (b, d) to the diagonal costs (d - b) / 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import InvalidDiagram, InvalidParameter
from .ph_engine import PersistenceDiagram

__all__ = ["DIAGONAL", "DiagramMatching", "wasserstein_distance", "wasserstein_matching", "bottleneck_distance"]

DIAGONAL = -1


@dataclass(frozen=True)
class DiagramMatching:
    """Optimal partial matching; unmatched points pair with ``DIAGONAL``."""

    assignments: list[tuple[int, int]]
    cost: float


def _pairs(dgm) -> tuple[np.ndarray, int | None]:
    if isinstance(dgm, PersistenceDiagram):
        pairs, dim = dgm.pairs, dgm.dim
    else:
        pairs, dim = np.asarray(dgm, dtype=float).reshape(-1, 2), None
    if not np.all(np.isfinite(pairs)):
        raise InvalidDiagram("diagram contains infinite or NaN pairs")
    return pairs, dim


def _prepare(B, B2):
    a, da = _pairs(B)
    b, db = _pairs(B2)
    if da is not None and db is not None and da != db:
        raise InvalidDiagram(f"cannot compare diagrams of dimension {da} and {db}")
    return a, b


def _lex_order(x: np.ndarray) -> np.ndarray:
    return np.lexsort((x[:, 1], x[:, 0]))


def _sup_cost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=2)


def wasserstein_matching(B, B2, p: float = 1.0) -> DiagramMatching:
    """Optimal matching for the p-Wasserstein distance.

    Solved as a square assignment problem: each diagram is padded with one
    diagonal slot per point of the other, and diagonal-to-diagonal edges are
    free.
    """
    if not p >= 1:
        raise InvalidParameter(f"p must be >= 1, got {p}")
    if math.isinf(p):
        raise InvalidParameter("use bottleneck_distance for p = inf")
    a, b = _prepare(B, B2)
    # canonical orientation and row order, so that swapping or permuting the
    # inputs replays the same floating-point computation
    ia, ib = _lex_order(a), _lex_order(b)
    a, b = a[ia], b[ib]
    swapped = (len(b), b.tobytes()) < (len(a), a.tobytes())
    if swapped:
        a, b, ia, ib = b, a, ib, ia
    m, n = len(a), len(b)
    if m + n == 0:
        return DiagramMatching([], 0.0)
    half_a = (a[:, 1] - a[:, 0]) / 2
    half_b = (b[:, 1] - b[:, 0]) / 2
    cost = np.zeros((m + n, n + m))
    cost[:m, :n] = _sup_cost(a, b) ** p
    cost[:m, n:] = (half_a ** p)[:, None]
    cost[m:, :n] = (half_b ** p)[None, :]
    rows, cols = linear_sum_assignment(cost)
    assignments = []
    for r, c in zip(rows, cols):
        i = int(ia[r]) if r < m else DIAGONAL
        j = int(ib[c]) if c < n else DIAGONAL
        if i != DIAGONAL or j != DIAGONAL:
            assignments.append((j, i) if swapped else (i, j))
    total = math.fsum(sorted(cost[rows, cols]))
    return DiagramMatching(assignments, total ** (1.0 / p))


def wasserstein_distance(B, B2, p: float = 1.0) -> float:
    """p-Wasserstein distance with sup-norm ground cost, p >= 1."""
    return wasserstein_matching(B, B2, p).cost


def _perfect_at(adj_blocks, m: int, n: int, t: float) -> bool:
    d_ab, half_a, half_b = adj_blocks
    # rows: points of B then diagonal copies of B2's points;
    # columns: points of B2 then diagonal copies of B's points
    size = m + n
    dense = np.zeros((size, size), dtype=bool)
    dense[:m, :n] = d_ab <= t
    dense[np.arange(m), n + np.arange(m)] = half_a <= t
    dense[m + np.arange(n), np.arange(n)] = half_b <= t
    dense[m:, n:] = True
    match = maximum_bipartite_matching(csr_matrix(dense), perm_type="column")
    return bool(np.all(match >= 0))


def bottleneck_distance(B, B2) -> float:
    """Bottleneck distance: binary search over candidate costs with a
    bipartite perfect-matching test at each threshold."""
    a, b = _prepare(B, B2)
    m, n = len(a), len(b)
    if m + n == 0:
        return 0.0
    d_ab = _sup_cost(a, b) if m and n else np.zeros((m, n))
    half_a = (a[:, 1] - a[:, 0]) / 2
    half_b = (b[:, 1] - b[:, 0]) / 2
    candidates = np.unique(np.concatenate([d_ab.ravel(), half_a, half_b, [0.0]]))
    blocks = (d_ab, half_a, half_b)
    lo, hi = 0, candidates.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _perfect_at(blocks, m, n, candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])
