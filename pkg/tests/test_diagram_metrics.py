import math

import numpy as np
import pytest

from oracles import brute_force_matching_cost
from wafertda.diagram_metrics import (
    DIAGONAL,
    bottleneck_distance,
    wasserstein_distance,
    wasserstein_matching,
)
from wafertda.errors import InvalidDiagram, InvalidParameter
from wafertda.ph_engine import PersistenceDiagram


def random_diagram(rng, max_points=10):
    k = int(rng.integers(0, max_points + 1))
    if rng.random() < 0.3:
        # integer lattice values make ties and exact coincidences likely
        b = rng.integers(0, 5, k).astype(float)
        d = b + rng.integers(1, 5, k)
    else:
        b = rng.uniform(0, 5, k)
        d = b + rng.uniform(0.01, 5, k)
    return np.column_stack([b, d])


def test_identical_diagrams_are_at_distance_zero():
    dgm = [[0, 2], [1, 3.5], [1, 3.5]]
    assert wasserstein_distance(dgm, dgm, 1) == 0
    assert wasserstein_distance(dgm, dgm, 2) == 0
    assert bottleneck_distance(dgm, dgm) == 0


def test_single_point_against_empty():
    assert wasserstein_distance([[0, 2]], [], 1) == pytest.approx(1.0)
    assert bottleneck_distance([[0, 2]], []) == pytest.approx(1.0)


def test_direct_match_beats_diagonal_route():
    assert wasserstein_distance([[1, 3]], [[1, 4]], 1) == pytest.approx(1.0)
    assert brute_force_matching_cost([[1, 3]], [[1, 4]], 1) == pytest.approx(1.0)
    m = wasserstein_matching([[1, 3]], [[1, 4]], 1)
    assert m.assignments == [(0, 0)]


def test_bottleneck_small_point_to_diagonal():
    assert bottleneck_distance([[0, 10], [0, 1]], [[0, 10]]) == pytest.approx(0.5)
    assert brute_force_matching_cost([[0, 10], [0, 1]], [[0, 10]], math.inf) == pytest.approx(0.5)


def test_both_empty():
    assert wasserstein_distance([], [], 1) == 0
    assert bottleneck_distance([], []) == 0


def test_bad_inputs():
    with pytest.raises(InvalidParameter):
        wasserstein_distance([[0, 1]], [[0, 2]], 0.5)
    with pytest.raises(InvalidDiagram):
        wasserstein_distance([[0, np.inf]], [[0, 2]], 1)
    with pytest.raises(InvalidDiagram):
        bottleneck_distance([[0, np.inf]], [])
    with pytest.raises(InvalidDiagram):
        bottleneck_distance(PersistenceDiagram(0, [[0, 1]]), PersistenceDiagram(1, [[0, 1]]))


def test_matching_covers_every_point_once():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a, b = random_diagram(rng), random_diagram(rng)
        m = wasserstein_matching(a, b, 2)
        left = sorted(i for i, _ in m.assignments if i != DIAGONAL)
        right = sorted(j for _, j in m.assignments if j != DIAGONAL)
        assert left == list(range(len(a)))
        assert right == list(range(len(b)))


def test_brute_force_equivalence():
    rng = np.random.default_rng(5)
    for _ in range(150):
        a, b = random_diagram(rng, 5), random_diagram(rng, 5)
        for p in (1, 2, 3.5):
            assert abs(wasserstein_distance(a, b, p) - brute_force_matching_cost(a, b, p)) <= 1e-9
        assert abs(bottleneck_distance(a, b) - brute_force_matching_cost(a, b, math.inf)) <= 1e-9


def test_metric_axioms():
    rng = np.random.default_rng(9)
    metrics = {
        "W1": lambda x, y: wasserstein_distance(x, y, 1),
        "W2": lambda x, y: wasserstein_distance(x, y, 2),
        "bottleneck": bottleneck_distance,
    }
    for _ in range(500):
        a, b, c = random_diagram(rng), random_diagram(rng), random_diagram(rng)
        shuffled = a[rng.permutation(len(a))]
        for f in metrics.values():
            ab = f(a, b)
            assert ab == f(b, a)
            assert f(a, c) <= ab + f(b, c) + 1e-9
            assert f(a, shuffled) == 0
            assert ab >= 0


def test_bottleneck_below_wasserstein_and_monotone_in_p():
    rng = np.random.default_rng(13)
    for _ in range(300):
        a, b = random_diagram(rng), random_diagram(rng)
        ws = [wasserstein_distance(a, b, p) for p in (1, 1.5, 2, 4, 8)]
        assert all(x >= y - 1e-9 for x, y in zip(ws, ws[1:]))
        assert bottleneck_distance(a, b) <= ws[-1] + 1e-9
