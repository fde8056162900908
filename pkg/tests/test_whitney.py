import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostmin.exceptions import AccuracyError, EmptyComplementError, OutOfBox, SpecError
from almostmin.sets import (CantorProduct, FinitePoints, UnitDiskComplement, build_oracle)
from almostmin.whitney import InE, Unresolved, WhitneyDecomposition, build_whitney


@pytest.fixture(scope="module")
def point_1d():
    return build_whitney(FinitePoints(((0.0,),)), ((-1.0,), (1.0,)), 12)


@pytest.fixture(scope="module")
def cloud_2d():
    K = FinitePoints(((0.1, 0.2), (0.6, 0.7), (0.8, 0.1)))
    return build_whitney(K, ((-1.0, -1.0), (1.0, 1.0)), 8)


def test_point_intervals_brute_force(point_1d):
    w = point_1d
    lo = w.centers_[:, 0] - 0.5 * w.sides_
    hi = w.centers_[:, 0] + 0.5 * w.sides_
    dist = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))
    ratio = dist / w.sides_
    assert ratio.min() >= 1.0 and ratio.max() <= 4.0


def test_disk_complement_center_cube():
    w = build_whitney(UnitDiskComplement(2), ((-1.0, -1.0), (1.0, 1.0)), 8)
    L = w.locate(np.zeros(2))
    assert L is not InE and L is not Unresolved
    assert L.side >= 1 / 16


def test_whole_box_in_e():
    with pytest.raises(EmptyComplementError):
        build_whitney(UnitDiskComplement(2, radius=0.1), ((2.0, 2.0), (3.0, 3.0)), 6)


def test_accuracy_too_coarse():
    with pytest.raises(AccuracyError):
        build_whitney(CantorProduct(1 / 3, 3), ((-1.0,), (2.0,)), 10)


def test_box_validation():
    with pytest.raises(SpecError):
        WhitneyDecomposition(((0.0, 0.0), (1.0, 2.5)), 4, root_scale=1.0).fit(
            FinitePoints(((0.5, 0.5),)))


def test_invariants(cloud_2d):
    inv = cloud_2d.check_invariants()
    assert inv["min_dist_ratio"] >= 1.0 and inv["max_dist_ratio"] <= 4.0
    assert inv["max_side_ratio"] <= 4.0
    assert abs(inv["volume_balance"]) <= 1e-6 * inv["volume_box"]


def test_cube_geometry(cloud_2d):
    w = cloud_2d
    expect = w.lo_ + (w.indices_ + 0.5) * w.sides_[:, None]
    assert np.allclose(w.centers_, expect, atol=1e-15)


def test_disjoint_interiors(cloud_2d):
    w = cloud_2d
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(20000, 2))
    p, c = w.hits(X, 1.0, open_=True)
    assert np.bincount(p, minlength=len(X)).max() <= 1


def test_locate_center_and_in_e(cloud_2d):
    w = cloud_2d
    for i in (0, w.n_cubes_ // 2, w.n_cubes_ - 1):
        assert w.locate(w.centers_[i]).id == i
    assert w.locate(np.array([0.1, 0.2])) is InE
    with pytest.raises(OutOfBox):
        w.locate(np.array([3.0, 0.0]))


def test_locate_face_tie_break(cloud_2d):
    w = cloud_2d
    pairs = w.touching_pairs()
    same = pairs[w.levels_[pairs[:, 0]] == w.levels_[pairs[:, 1]]]
    offset = np.abs(w.indices_[same[:, 0]] - w.indices_[same[:, 1]])
    same = same[offset.sum(axis=1) == 1]
    i, j = same[0]
    mid = 0.5 * (w.centers_[i] + w.centers_[j])
    L = w.locate(mid)
    assert L.index == min(w.cube(i).index, w.cube(j).index)


def test_enlarged_hits_factor_one(cloud_2d):
    w = cloud_2d
    x = w.centers_[5]
    hits = w.enlarged_hits(x, 1.0)
    assert [h.id for h in hits] == [5]
    assert 5 in [h.id for h in w.enlarged_hits(x, 1.2)]


def test_enlarged_hits_brute_force(cloud_2d):
    w = cloud_2d
    rng = np.random.default_rng(5)
    X = rng.uniform(-1, 1, size=(300, 2))
    p, c = w.hits(X, 1.2)
    for k, x in enumerate(X):
        gap = np.max(np.abs(x - w.centers_), axis=1)
        brute = np.flatnonzero(gap <= 0.6 * w.sides_ * (1 + 1e-13))
        assert sorted(c[p == k]) == sorted(brute)


def test_hits_distance_prefilter_identical(cloud_2d):
    w = cloud_2d
    X = np.random.default_rng(9).uniform(-1, 1, size=(5000, 2))
    a = w.hits(X, 1.2, open_=True)
    b = w.hits(X, 1.2, open_=True, dist=w.oracle_(X))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_refinement_consistency():
    K = FinitePoints(((0.3, 0.4),))
    box = ((-1.0, -1.0), (1.0, 1.0))
    w1, w2 = build_whitney(K, box, 6), build_whitney(K, box, 8)
    J = 6
    far1 = w1.dist_ >= 8 * 2.0 ** (-J + 2) * w1.root_scale_ / 2.0
    key = lambda w, s: {(int(l), tuple(i)) for l, i in zip(w.levels_[s], w.indices_[s])}
    far2 = w2.dist_ >= 8 * 2.0 ** (-J + 2) * w2.root_scale_ / 2.0
    assert key(w1, far1) == key(w2, far2)
    assert w2.n_cubes_ > w1.n_cubes_


def test_deterministic():
    K = FinitePoints(((0.3, 0.4), (-0.2, 0.1)))
    a = build_whitney(K, ((-1.0, -1.0), (1.0, 1.0)), 7)
    b = build_whitney(K, ((-1.0, -1.0), (1.0, 1.0)), 7)
    assert np.array_equal(a.indices_, b.indices_) and np.array_equal(a.dist_, b.dist_)


def test_to_csv_full_precision(cloud_2d, tmp_path):
    p = tmp_path / "cubes.csv"
    cloud_2d.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0].split(",")[0] == "level" and len(lines) == cloud_2d.n_cubes_ + 1
    fields = lines[1].split(",")
    assert float(fields[3]) == cloud_2d.centers_[0, 0] and "e" in fields[3]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9)), min_size=1, max_size=5))
def test_invariants_random_point_sets(points):
    w = build_whitney(FinitePoints(tuple(points)), ((-1.0, -1.0), (1.0, 1.0)), 7)
    inv = w.check_invariants()
    assert inv["min_dist_ratio"] >= 1.0 and inv["max_dist_ratio"] <= 4.0
    assert inv["max_side_ratio"] <= 4.0
    assert abs(inv["volume_balance"]) <= 1e-6 * inv["volume_box"]
