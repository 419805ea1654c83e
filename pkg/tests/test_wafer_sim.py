import json
import math

import numpy as np
import pytest
from scipy import stats

from wafertda.errors import InvalidParameter, LabelError
from wafertda.ph_engine import compute_persistence
from wafertda.wafer_sim import (
    CLASSES,
    WaferMap,
    draw_imbalanced_counts,
    gen_cluster,
    gen_dense,
    gen_random,
    gen_ring,
    gen_scratch,
    generate_dataset,
    load_dataset,
    make_wafer,
    wafer_seed,
    write_dataset,
)

SEEDS = range(200)


def radii(points):
    return np.hypot(points[:, 0], points[:, 1])


def test_all_generators_stay_on_the_wafer():
    for label in CLASSES:
        for s in SEEDS:
            w = make_wafer(label, s)
            assert len(w.points) > 0
            assert np.all(radii(w.points) <= 10.0)


def test_fixed_seed_is_bit_identical():
    for label in CLASSES:
        a, b = make_wafer(label, 42), make_wafer(label, 42)
        assert a.points.tobytes() == b.points.tobytes()
        assert a.meta == b.meta


def test_random_counts():
    counts = [len(gen_random(np.random.default_rng(s)).points) for s in SEEDS]
    assert min(counts) >= 10 and max(counts) <= 60
    # both endpoints are reachable
    assert {10, 60} <= set(len(gen_random(np.random.default_rng(s)).points) for s in range(2000))


def test_noise_counts_non_random_classes():
    for gen in (gen_ring, gen_scratch, gen_dense, gen_cluster):
        for s in SEEDS:
            w = gen(np.random.default_rng(s))
            assert 10 <= w.meta["n_noise"] <= 60
    assert "n_noise" not in gen_random(np.random.default_rng(0)).meta


def test_ring_structure():
    for s in SEEDS:
        w = gen_ring(np.random.default_rng(s))
        m = w.meta
        assert 150 <= m["n_ring"] <= 300
        assert 3 <= m["r0"] <= 6 and 0 <= m["delta"] <= 4
        ring = w.points[: m["n_ring"]]
        r = radii(ring)
        assert np.all(r >= m["r0"] - 1e-12) and np.all(r <= m["r0"] + m["delta"] + 1e-12)
        assert np.all((r >= 3) & (r <= 10))
        assert len(w.points) == m["n_ring"] + m["n_noise"]


def test_scratch_parameters():
    for s in SEEDS:
        m = gen_scratch(np.random.default_rng(s)).meta
        assert abs(m["a"] - m["b"]) > 5
        assert m["k"] != 0 and abs(m["k"]) <= 1 / 15
        assert 50 <= m["n_scratch"] <= 100
        assert 0 < m["n_scratch_kept"] <= m["n_scratch"]


def test_scratch_rotation_preserves_distances():
    rng = np.random.default_rng(0)
    x = np.linspace(-4, 4, 30)
    curve = np.column_stack([x, 0.05 * x ** 2])
    t = rng.uniform(0, 2 * np.pi)
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    d = lambda p: np.hypot(*(p[:, None, :] - p[None, :, :]).transpose(2, 0, 1))
    np.testing.assert_allclose(d(curve @ rot.T), d(curve), atol=1e-12)


def test_dense_counts():
    for s in SEEDS:
        m = gen_dense(np.random.default_rng(s)).meta
        assert 150 <= m["n_dense"] <= 300


def test_cluster_parameters():
    for s in SEEDS:
        w = gen_cluster(np.random.default_rng(s))
        m = w.meta
        assert m["n_clusters"] in (1, 2, 3)
        assert all(0.1 <= v <= 2 for v in m["stds"])
        assert sum(m["sizes"]) == m["n_cluster"]
        assert max(m["sizes"]) - min(m["sizes"]) <= 1
        assert len(w.points) == m["n_cluster_kept"] + m["n_noise"]


def test_cluster_count_distribution():
    k = [gen_cluster(np.random.default_rng(s)).meta["n_clusters"] for s in range(3000)]
    observed = np.bincount(k, minlength=4)[1:]
    assert stats.chisquare(observed).pvalue > 0.01


def test_rings_make_longer_loops_than_dense():
    def mean_max_h1(label):
        vals = []
        for s in range(100):
            _, d1 = compute_persistence(make_wafer(label, wafer_seed(99, s)).points)
            vals.append(d1.persistence.max() if len(d1) else 0.0)
        return np.mean(vals)

    assert mean_max_h1("Ring") > mean_max_h1("Dense")


def test_dataset_basic_split():
    counts = [5, 5, 5, 5, 5]
    wafers, manifest = generate_dataset(counts, seed=3, split=(3, 1, 1))
    sp = manifest["splits"]
    assert len(sp["train"]) == 15 and len(sp["val"]) == 5 and len(sp["test"]) == 5
    everything = sp["train"] + sp["val"] + sp["test"]
    assert sorted(everything) == list(range(25))
    for name, size in zip(("train", "val", "test"), (3, 1, 1)):
        labels = [wafers[i].label for i in sp[name]]
        assert all(labels.count(c) == size for c in CLASSES)


def test_dataset_basic_layout():
    wafers, manifest = generate_dataset([500] * 5, seed=0, split=(300, 100, 100))
    assert manifest["counts"] == {c: 500 for c in CLASSES}
    assert manifest["split_sizes"] == [300, 100, 100]
    assert [len(manifest["splits"][k]) for k in ("train", "val", "test")] == [1500, 500, 500]
    with pytest.raises(InvalidParameter):
        generate_dataset([5, 5, 5, 5, 4], seed=0, split=(3, 1, 1))


def test_zero_count_class_is_absent():
    wafers, manifest = generate_dataset([3, 0, 2, 2, 2], seed=1)
    assert all(w.label != "Ring" for w in wafers)
    assert manifest["counts"]["Ring"] == 0


def test_dataset_determinism_and_roundtrip(tmp_path):
    a, ma = generate_dataset([2, 2, 2, 2, 2], seed=5, split=(1, 1, 0))
    b, mb = generate_dataset([2, 2, 2, 2, 2], seed=5, split=(1, 1, 0))
    assert ma == mb
    assert all(x.points.tobytes() == y.points.tobytes() for x, y in zip(a, b))
    written = write_dataset(a, ma, tmp_path / "ds")
    loaded, lm = load_dataset(tmp_path / "ds")
    assert lm == written
    assert all(x.points.tobytes() == y.points.tobytes() and x.label == y.label for x, y in zip(a, loaded))
    record = json.loads((tmp_path / "ds" / written["files"][0]).read_text())
    assert set(record) == {"label", "seed", "points", "meta"}


def test_imbalanced_counts_recorded():
    rng = np.random.default_rng(0)
    draws = [draw_imbalanced_counts(rng) for _ in range(200)]
    flat = np.array(draws).ravel()
    assert flat.min() >= 1 and flat.max() <= 299
    wafers, manifest = generate_dataset(draws[0], seed=2)
    assert [manifest["counts"][c] for c in CLASSES] == draws[0]


def test_bad_inputs():
    with pytest.raises(LabelError):
        make_wafer("Donut", 0)
    with pytest.raises(LabelError):
        WaferMap([[0, 0]], "Donut", 0)
    with pytest.raises(InvalidParameter):
        generate_dataset([1, 2, 3], seed=0)
    with pytest.raises(InvalidParameter):
        generate_dataset([1, -1, 0, 0, 0], seed=0)
