import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostmin.exceptions import InsufficientSamples, OrderError, UnresolvedRegion
from almostmin.examples import branched_alpha
from almostmin.jets import Jet, bump_profile_derivatives
from almostmin.regdist import (BumpFunction, RegularizedDistance, comparability_scan,
                               holder_seminorm, lip_upper_bound)
from almostmin.sets import CantorProduct, FinitePoints, UnitDiskComplement


@pytest.fixture(scope="module")
def eta_point():
    return RegularizedDistance(1, 1.0, ((-1.0,), (1.0,)), 12).fit(FinitePoints(((0.0,),)))


@pytest.fixture(scope="module")
def eta_disk():
    return RegularizedDistance(1, 1.0, ((-1.0, -1.0), (1.0, 1.0)), 8).fit(UnitDiskComplement(2))


def test_bump_plateau_and_support():
    phi = BumpFunction(2)
    rng = np.random.default_rng(0)
    assert np.all(phi(rng.uniform(-0.5, 0.5, size=(1000, 2))) == 1.0)
    out = rng.uniform(-2, 2, size=(5000, 2))
    out = out[np.max(np.abs(out), axis=1) >= 0.6]
    assert np.all(phi(out) == 0.0)
    v = phi(rng.uniform(-0.7, 0.7, size=(5000, 2)))
    assert v.min() >= 0.0 and v.max() <= 1.0


def test_bump_derivatives_match_differences():
    rng = np.random.default_rng(1)
    t = rng.uniform(0.505, 0.595, size=200) * rng.choice([-1, 1], size=200)
    h = 1e-6
    D = bump_profile_derivatives(t, 3)
    for o in range(3):
        fd = (bump_profile_derivatives(t + h, o)[o] - bump_profile_derivatives(t - h, o)[o]) / (2 * h)
        scale = np.max(np.abs(D[o + 1])) + 1e-300
        assert np.max(np.abs(fd - D[o + 1])) <= 1e-5 * scale


def test_bump_order_guard():
    with pytest.raises(OrderError):
        BumpFunction(1)(np.zeros((1, 2)), (1, 1))


def test_jet_arithmetic():
    t = np.array([0.3, 1.1])
    x = Jet.variable(t, 4)
    f = (x * x + 1.0).reciprocal() * (x * 2.0).exp()
    # f = exp(2x) / (1 + x^2): derivatives by hand at order 1
    d = f.derivatives()
    f0 = np.exp(2 * t) / (1 + t * t)
    f1 = f0 * (2 - 2 * t / (1 + t * t))
    assert np.allclose(d[0], f0) and np.allclose(d[1], f1)


def test_eta_vanishes_on_e(eta_disk, eta_point):
    assert eta_point.transform(np.zeros((1, 1)))[0] == 0.0
    P = np.array([[0.8, 0.0], [0.0, -0.9], [0.6, 0.6]])
    assert np.all(eta_disk.transform(P) == 0.0)


def test_eta_positive_when_resolved(eta_point):
    X = np.linspace(-1, 1, 4001)[:, None]
    d = np.abs(X[:, 0])
    assert np.all(eta_point.transform(X)[d >= 4 * 2.0 ** -12 * 2] > 0)


def test_eta_plateau_value(eta_disk):
    w = eta_disk.decomposition_
    # a cube center where only one enlarged cube reaches
    for i in range(w.n_cubes_):
        x = w.centers_[i]
        if eta_disk.n_summands(x[None])[0] == 1:
            assert eta_disk.transform(x[None])[0] == pytest.approx(w.sides_[i] ** 2, rel=1e-15)
            assert np.all(eta_disk.gradient(x[None]) == 0.0)
            break
    else:
        pytest.fail("no isolated cube center")


def test_eta_at_origin_brute_force(eta_disk):
    w = eta_disk.decomposition_
    U = (np.zeros(2) - w.centers_) / w.sides_[:, None]
    brute = np.sum(w.sides_ ** 2 * BumpFunction(2)(U))
    assert eta_disk.transform(np.zeros((1, 2)))[0] == pytest.approx(brute, rel=1e-12)


def test_sum_locality(eta_disk):
    w = eta_disk.decomposition_
    X = eta_disk.sample_points(500, 3)
    phi = BumpFunction(2)
    for x in X[:60]:
        U = (x - w.centers_) / w.sides_[:, None]
        contrib = np.flatnonzero(phi(U) > 0)
        hits = [L.id for L in w.enlarged_hits(x, 1.2)]
        assert set(contrib) <= set(hits)


def test_order_guard(eta_point):
    with pytest.raises(OrderError):
        eta_point.derivative(np.array([[0.5]]), (3,))


def test_strict_mode_raises_in_collar():
    eta = RegularizedDistance(1, 1.0, ((-1.0,), (1.0,)), 6, strict=True).fit(FinitePoints(((0.0,),)))
    with pytest.raises(UnresolvedRegion):
        eta.transform(np.array([[2.0 ** -8]]))


def test_degenerate_eta_is_zero():
    eta = RegularizedDistance(1, 1.0, ((2.0, 2.0), (3.0, 3.0)), 5).fit(UnitDiskComplement(2, 0.1))
    assert eta.degenerate_
    assert np.all(eta.transform(np.array([[2.5, 2.5]])) == 0)
    assert holder_seminorm(eta) == 0.0 and lip_upper_bound(eta) == 0.0


def test_comparability_point(eta_point):
    rep = comparability_scan(eta_point, n_samples=10000)
    assert rep["c_low"] > 0 and np.isfinite(rep["c_high"])
    assert rep["n_used"] + rep["n_skipped"] == 10000


def test_comparability_stable_across_levels():
    ratios = []
    for J in (8, 10, 12):
        eta = RegularizedDistance(1, 1.0, ((-1.0,), (1.0,)), J).fit(FinitePoints(((0.0,),)))
        rep = comparability_scan(eta, n_samples=10000)
        ratios.append(rep["c_high"] / rep["c_low"])
    assert max(ratios) / min(ratios) <= 1.2


def test_comparability_needs_samples(eta_point):
    with pytest.raises(InsufficientSamples):
        comparability_scan(eta_point, np.zeros((5, 1)))


def test_holder_stable_point(eta_point):
    a = holder_seminorm(eta_point, n_pairs=2000, random_state=0)
    b = holder_seminorm(eta_point, n_pairs=8000, random_state=1)
    assert np.isfinite(a) and abs(a - b) <= 0.1 * max(a, b)


def test_holder_top_order_not_available(eta_point):
    with pytest.raises(OrderError):
        holder_seminorm(eta_point, order=2)


def test_lip_bound_dominates_grid(eta_point):
    L = lip_upper_bound(eta_point)
    X = np.linspace(-1, 1, 10001)[:, None]
    v = eta_point.transform(X)
    fd = np.max(np.abs(np.diff(v)) / np.diff(X[:, 0]))
    assert L >= fd
    assert lip_upper_bound(eta_point, safety=1.0) <= L


def test_scaling_covariance():
    t = 2.0
    a = RegularizedDistance(1, 1.0, ((-1.0, -1.0), (1.0, 1.0)), 7).fit(
        FinitePoints(((0.25, -0.5),)))
    b = RegularizedDistance(1, 1.0, ((-t, -t), (t, t)), 7).fit(FinitePoints(((0.25 * t, -0.5 * t),)))
    X = a.sample_points(500, 0)
    assert np.allclose(b.transform(t * X), t ** a.s_ * a.transform(X), rtol=1e-10, atol=0)


def test_gradient_over_power_bounded_on_disk():
    Q, k = 2, 1
    alpha = branched_alpha(Q, k)
    maxima = []
    for J in (6, 8, 10):
        eta = RegularizedDistance(k, 1 / Q, ((-0.5, -0.5), (0.5, 0.5)), J).fit(
            UnitDiskComplement(2))
        X = eta.sample_points(40000, 0)
        v = eta.transform(X)
        keep = v > 0
        ratio = np.linalg.norm(eta.gradient(X[keep]), axis=1) * v[keep] ** -alpha
        d = eta.oracle_(X[keep])
        near = ratio[d < 4 * 2.0 ** -J]
        assert np.isfinite(ratio).all()
        maxima.append(ratio.max())
        # no growth toward E
        if near.size:
            assert near.max() <= 1.05 * ratio.max()
    assert max(maxima) <= 1.05 * min(maxima)


def _fd4(f, X, h, e):
    return (-f(X + 2 * h * e) + 8 * f(X + h * e) - 8 * f(X - h * e) + f(X - 2 * h * e)) / (12 * h)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.05, 0.25))
def test_cantor_gradient_matches_differences(x, y):
    eta = _cantor_eta()
    P = np.array([[x, y]])
    d = eta.oracle_(P)[0]
    g = eta.gradient(P)[0]
    fd = np.array([_fd4(eta.transform, P, 1e-4 * d, e)[0] for e in np.eye(2)])
    assert np.max(np.abs(fd - g)) <= 1e-5 * d ** (eta.s_ - 1)


_CACHE = {}


def _cantor_eta():
    if "c" not in _CACHE:
        _CACHE["c"] = RegularizedDistance(1, 1.0, ((-0.5, -1.0), (1.5, 1.0)), 10).fit(
            CantorProduct(1 / 3, 9, dim=2))
    return _CACHE["c"]
