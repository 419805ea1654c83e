"""Vietoris-Rips persistent homology in dimensions 0 and 1.

Dimension 0 is computed with union-find over the edges in filtration order.
Dimension 1 is computed by reducing the coboundary matrix of the edges
(persistent cohomology gives the same barcode), with the edges that kill a
connected component cleared up front. All arithmetic is over the two-element
field.

The filtration order is the total order ``(diameter, dimension, vertices)``
where vertex tuples are compared lexicographically. Triangles are encoded as
``rank * n**3 + i * n**2 + j * n + k`` with ``i < j < k`` and ``rank`` the dense
rank of the triangle diameter among all edge lengths, so integer order on the
codes is filtration order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numba
import numpy as np
from numba import types
from numba.typed import Dict

from .errors import InvalidComplex, InvalidDiagram, InvalidInput, InvalidParameter

__all__ = [
    "FiltrationSimplex",
    "PersistenceDiagram",
    "as_point_cloud",
    "compute_distance_matrix",
    "build_rips_filtration",
    "persistence_pairs",
    "compute_persistence",
    "oracle_betti",
    "betti_from_diagrams",
]


class FiltrationSimplex(NamedTuple):
    vertices: tuple[int, ...]
    diameter: float

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """Multiset of finite (birth, death) pairs in one homology dimension."""

    dim: int
    pairs: np.ndarray

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PersistenceDiagram):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.sorted_pairs(), other.sorted_pairs())

    def sorted_pairs(self) -> np.ndarray:
        if len(self) == 0:
            return self.pairs
        order = np.lexsort((self.pairs[:, 1], self.pairs[:, 0]))
        return self.pairs[order]

    @property
    def persistence(self) -> np.ndarray:
        return self.pairs[:, 1] - self.pairs[:, 0]

    def to_dict(self) -> dict:
        return {"dim": int(self.dim), "pairs": self.pairs.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "PersistenceDiagram":
        try:
            dim = int(data["dim"])
            pairs = np.asarray(data["pairs"], dtype=float).reshape(-1, 2)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidDiagram(f"malformed diagram record: {exc}") from exc
        return cls(dim, pairs)


def as_point_cloud(points) -> np.ndarray:
    """Coerce ``points`` to a float array of shape (n, 2)."""
    cloud = np.asarray(points, dtype=float)
    if cloud.size == 0:
        raise InvalidInput("point cloud is empty")
    if cloud.ndim != 2 or cloud.shape[1] != 2:
        raise InvalidInput(f"expected an (n, 2) array of points, got shape {cloud.shape}")
    if not np.all(np.isfinite(cloud)):
        raise InvalidInput("point cloud contains non-finite coordinates")
    return cloud


def compute_distance_matrix(points) -> np.ndarray:
    """Exact pairwise Euclidean distances of a planar point cloud."""
    cloud = as_point_cloud(points)
    diff = cloud[:, None, :] - cloud[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def build_rips_filtration(dm, max_dim: int = 2, max_scale: float | None = None) -> list[FiltrationSimplex]:
    """Enumerate every simplex of dimension <= ``max_dim`` with diameter <= ``max_scale``.

    Explicit enumeration, meant for small clouds (plots, oracles, tests).
    The result is sorted by (diameter, dimension, vertices), so each prefix
    is a simplicial complex.
    """
    dm = np.asarray(dm, dtype=float)
    if max_dim not in (1, 2):
        raise InvalidParameter(f"max_dim must be 1 or 2, got {max_dim}")
    n = dm.shape[0]
    if max_scale is None:
        max_scale = float(dm.max()) if n > 1 else 0.0
    elif max_scale <= 0:
        raise InvalidParameter(f"max_scale must be positive, got {max_scale}")
    simplices = [FiltrationSimplex((i,), 0.0) for i in range(n)]
    for k in range(2, max_dim + 2):
        for verts in itertools.combinations(range(n), k):
            diam = max(dm[a, b] for a, b in itertools.combinations(verts, 2))
            if diam <= max_scale:
                simplices.append(FiltrationSimplex(verts, float(diam)))
    simplices.sort(key=lambda s: (s.diameter, len(s.vertices), s.vertices))
    return simplices


# --- compiled kernels -------------------------------------------------------


@numba.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def _tri_code(rank, a, b, c, n):
    # a < b always; place c to get the sorted vertex triple
    if c < a:
        x, y, z = c, a, b
    elif c < b:
        x, y, z = a, c, b
    else:
        x, y, z = a, b, c
    return ((rank * n + x) * n + y) * n + z


@numba.njit(cache=True)
def _first_cofacet(R, a, b, r, cap_rank):
    # For a fixed edge (a, b) lexicographic order on the cofacets is increasing c,
    # so the first c reaching the minimal rank gives the pivot.
    n = R.shape[0]
    best_rank = -1
    best_c = -1
    for c in range(n):
        if c == a or c == b:
            continue
        rac = R[a, c]
        rbc = R[b, c]
        if rac > cap_rank or rbc > cap_rank:
            continue
        t = r
        if rac > t:
            t = rac
        if rbc > t:
            t = rbc
        if t == r:
            return _tri_code(t, a, b, c, n)
        if best_rank < 0 or t < best_rank:
            best_rank = t
            best_c = c
    if best_c < 0:
        return -1
    return _tri_code(best_rank, a, b, best_c, n)


@numba.njit(cache=True)
def _heap_push(heap, size, item):
    if size == heap.size:
        grown = np.empty(2 * heap.size, dtype=np.int64)
        grown[:size] = heap[:size]
        heap = grown
    i = size
    heap[i] = item
    while i > 0:
        up = (i - 1) >> 1
        if heap[up] <= heap[i]:
            break
        heap[up], heap[i] = heap[i], heap[up]
        i = up
    return heap, size + 1


@numba.njit(cache=True)
def _heap_pop(heap, size):
    top = heap[0]
    size -= 1
    heap[0] = heap[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        small = left
        if left + 1 < size and heap[left + 1] < heap[left]:
            small = left + 1
        if heap[i] <= heap[small]:
            break
        heap[i], heap[small] = heap[small], heap[i]
        i = small
    return top, size


@numba.njit(cache=True)
def _pop_pivot(heap, size):
    # entries are mod-2 coefficients: equal codes cancel in pairs
    while size > 0:
        top, size = _heap_pop(heap, size)
        if size > 0 and heap[0] == top:
            _, size = _heap_pop(heap, size)
        else:
            return top, size
    return -1, size


@numba.njit(cache=True)
def _push_coboundary(heap, size, R, a, b, r, cap_rank):
    n = R.shape[0]
    for c in range(n):
        if c == a or c == b:
            continue
        rac = R[a, c]
        rbc = R[b, c]
        if rac > cap_rank or rbc > cap_rank:
            continue
        t = max(r, max(rac, rbc))
        heap, size = _heap_push(heap, size, _tri_code(t, a, b, c, n))
    return heap, size


@numba.njit(cache=True)
def _mod2(items):
    s = np.sort(items)
    out = np.empty(s.size, dtype=np.int64)
    k = 0
    i = 0
    while i < s.size:
        j = i
        while j < s.size and s[j] == s[i]:
            j += 1
        if (j - i) % 2 == 1:
            out[k] = s[i]
            k += 1
        i = j
    return out[:k]


@numba.njit(cache=True)
def _rips_pairs(R, ei, ej, er, cap_rank, n_points):
    n = n_points
    m = ei.size
    n3 = np.int64(n) * n * n

    # dimension 0: union-find in filtration order
    parent = np.arange(n)
    cleared = np.zeros(m, dtype=np.bool_)
    death0 = np.empty(max(n - 1, 0), dtype=np.int64)
    merged = 0
    for e in range(m):
        if merged == n - 1:
            break
        ra = _find(parent, ei[e])
        rb = _find(parent, ej[e])
        if ra != rb:
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
            cleared[e] = True
            death0[merged] = er[e]
            merged += 1

    # dimension 1: coboundary reduction, latest edge first; only the
    # reduction (V) columns of non-trivial reductions are stored
    pivots = Dict.empty(key_type=types.int64, value_type=types.int64)
    vcols = Dict.empty(key_type=types.int64, value_type=types.int64[:])
    birth1 = np.empty(m, dtype=np.int64)
    death1 = np.empty(m, dtype=np.int64)
    heap = np.empty(max(4 * n, 16), dtype=np.int64)
    n_essential = 0
    k1 = 0
    for e in range(m - 1, -1, -1):
        if cleared[e]:
            continue
        a = ei[e]
        b = ej[e]
        piv = _first_cofacet(R, a, b, er[e], cap_rank)
        if piv < 0:
            n_essential += 1
            continue
        if piv not in pivots:
            pivots[piv] = e
            birth1[k1] = er[e]
            death1[k1] = piv // n3
            k1 += 1
            continue
        size = 0
        heap, size = _push_coboundary(heap, size, R, a, b, er[e], cap_rank)
        added = np.empty(16, dtype=np.int64)
        added[0] = e
        n_added = 1
        while True:
            piv, size = _pop_pivot(heap, size)
            if piv < 0:
                n_essential += 1
                break
            if piv not in pivots:
                pivots[piv] = e
                vcols[e] = _mod2(added[:n_added])
                birth1[k1] = er[e]
                death1[k1] = piv // n3
                k1 += 1
                break
            # put the pivot back before adding the other column
            heap, size = _heap_push(heap, size, piv)
            other = pivots[piv]
            if other in vcols:
                vo = vcols[other]
            else:
                vo = np.array([other], dtype=np.int64)
            for f in vo:
                heap, size = _push_coboundary(heap, size, R, ei[f], ej[f], er[f], cap_rank)
                if n_added == added.size:
                    grown = np.empty(2 * added.size, dtype=np.int64)
                    grown[:n_added] = added[:n_added]
                    added = grown
                added[n_added] = f
                n_added += 1
    return death0[:merged], birth1[:k1], death1[:k1], n_essential


# --- public API --------------------------------------------------------------


def _edge_ranks(dm: np.ndarray, max_scale: float):
    n = dm.shape[0]
    iu, ju = np.triu_indices(n, 1)
    d = dm[iu, ju]
    keep = d <= max_scale
    iu, ju, d = iu[keep], ju[keep], d[keep]
    values, rank = np.unique(d, return_inverse=True)
    rank = rank.astype(np.int64)
    # ranks above every real edge mark "absent" entries
    R = np.full((n, n), values.size, dtype=np.int64)
    R[iu, ju] = rank
    R[ju, iu] = rank
    order = np.lexsort((ju, iu, rank))
    return R, iu[order].astype(np.int64), ju[order].astype(np.int64), rank[order], values


def persistence_pairs(dm, max_scale: float | None = None) -> dict:
    """Raw persistence pairs of the Rips filtration of a distance matrix.

    Zero-persistence pairs are kept here. Returns a dict with ``dim0`` and
    ``dim1`` arrays of (birth, death) rows plus the number of essential
    classes (``essential0`` is always 1; ``essential1`` is nonzero only when
    ``max_scale`` truncates the filtration).
    """
    dm = np.asarray(dm, dtype=float)
    n = dm.shape[0]
    if n == 0:
        raise InvalidInput("point cloud is empty")
    if max_scale is None:
        max_scale = float(dm.max())
    elif max_scale <= 0:
        raise InvalidParameter(f"max_scale must be positive, got {max_scale}")
    R, ei, ej, er, values = _edge_ranks(dm, max_scale)
    death0, birth1, death1, n_ess1 = _rips_pairs(R, ei, ej, er, values.size - 1, n)
    dim0 = np.column_stack([np.zeros(death0.size), values[death0]])
    dim1 = np.column_stack([values[birth1], values[death1]])
    return {
        "dim0": dim0,
        "dim1": dim1,
        "essential0": 1 + (n - 1 - death0.size),
        "essential1": int(n_ess1),
    }


def compute_persistence(points, max_scale: float | None = None) -> tuple[PersistenceDiagram, PersistenceDiagram]:
    """Dimension-0 and dimension-1 diagrams of the Rips filtration of a planar cloud.

    Essential classes and zero-persistence pairs are dropped. ``max_scale``
    defaults to the largest pairwise distance, i.e. the full filtration.
    """
    raw = persistence_pairs(compute_distance_matrix(points), max_scale)
    out = []
    for dim in (0, 1):
        pairs = raw[f"dim{dim}"]
        out.append(PersistenceDiagram(dim, pairs[pairs[:, 1] > pairs[:, 0]]))
    return out[0], out[1]


def _gf2_rank(rows: np.ndarray) -> int:
    m = rows.astype(np.uint8) & 1
    rank = 0
    n_rows, n_cols = m.shape
    for col in range(n_cols):
        hits = np.flatnonzero(m[rank:, col]) + rank
        if hits.size == 0:
            continue
        p = hits[0]
        if p != rank:
            m[[rank, p]] = m[[p, rank]]
        below = np.flatnonzero(m[rank + 1:, col]) + rank + 1
        m[below] ^= m[rank]
        rank += 1
        if rank == n_rows:
            break
    return rank


def _boundary_gf2(faces: Sequence[tuple], cofaces: Sequence[tuple]) -> np.ndarray:
    index = {f: i for i, f in enumerate(faces)}
    mat = np.zeros((len(faces), len(cofaces)), dtype=np.uint8)
    for j, s in enumerate(cofaces):
        for f in itertools.combinations(s, len(s) - 1):
            mat[index[f], j] = 1
    return mat


def oracle_betti(simplices: Iterable) -> tuple[int, int]:
    """Betti numbers (b0, b1) by brute-force rank of the mod-2 boundary matrices.

    Accepts ``FiltrationSimplex`` records or bare vertex tuples. Slow; used to
    check the fast path.
    """
    by_dim: dict[int, set] = {0: set(), 1: set(), 2: set()}
    for s in simplices:
        verts = tuple(sorted(s.vertices if isinstance(s, FiltrationSimplex) else s))
        if not 1 <= len(verts) <= 3:
            raise InvalidComplex(f"only simplices of dimension 0-2 are supported, got {verts}")
        by_dim[len(verts) - 1].add(verts)
    for dim in (1, 2):
        for s in by_dim[dim]:
            for f in itertools.combinations(s, dim):
                if f not in by_dim[dim - 1]:
                    raise InvalidComplex(f"face {f} of simplex {s} is missing")
    verts, edges, tris = (sorted(by_dim[d]) for d in (0, 1, 2))
    rank1 = _gf2_rank(_boundary_gf2(verts, edges)) if edges else 0
    rank2 = _gf2_rank(_boundary_gf2(edges, tris)) if tris else 0
    return len(verts) - rank1, len(edges) - rank1 - rank2


def betti_from_diagrams(dgm0: PersistenceDiagram, dgm1: PersistenceDiagram, scale: float) -> tuple[int, int]:
    """Betti numbers of the Rips complex at ``scale`` read off the diagrams.

    Assumes the essential component was dropped from ``dgm0`` and that the
    dimension-1 diagram comes from an untruncated filtration.
    """
    b0 = 1 + int(np.count_nonzero(dgm0.pairs[:, 1] > scale))
    p1 = dgm1.pairs
    b1 = int(np.count_nonzero((p1[:, 0] <= scale) & (p1[:, 1] > scale)))
    return b0, b1
