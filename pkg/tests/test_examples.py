import numpy as np
import pytest

from almostmin.currents import GraphSheet, _disk_integral, excess_density
from almostmin.examples import (FlatFamily, blowup_flatness, branched_alpha, build_branched_family,
                                build_graph_family, build_single_sheet, check_pairwise_condition,
                                check_tangential_implies_condition, classify_ball, eval_branched,
                                family_from_metadata, graph_alpha, lens_area, mass_ratio_example,
                                monodromy)
from almostmin.exceptions import SpecError
from almostmin.quadrature import QuadratureConfig
from almostmin.sets import CantorProduct, FinitePoints

CAMPAIGN = QuadratureConfig(target_rel_tol=1e-3, max_cells=400000)
ORIGIN = FinitePoints(((0.0, 0.0),))


@pytest.fixture(scope="module")
def graphs():
    return build_graph_family(ORIGIN, Q=2, k=1, alpha_star=1.0, J=10)


@pytest.fixture(scope="module")
def branched():
    return build_branched_family(ORIGIN, Q=2, k=1, J=8)


@pytest.fixture(scope="module")
def branched3():
    return build_branched_family(ORIGIN, Q=3, k=1, J=8)


# ---------------------------------------------------------------------------
# exponents


@pytest.mark.parametrize("k,alpha_star,alpha", [(1, 1.0, 0.5), (3, 1.0, 0.75), (1, 0.5, 1 / 3)])
def test_graph_alpha(k, alpha_star, alpha):
    assert graph_alpha(k, alpha_star) == pytest.approx(alpha)


@pytest.mark.parametrize("Q,k,alpha", [(2, 1, 1 / 3), (3, 1, 1 / 4), (2, 2, 3 / 5)])
def test_branched_alpha(Q, k, alpha):
    assert branched_alpha(Q, k) == pytest.approx(alpha)


# ---------------------------------------------------------------------------
# graph family


def test_graph_family_invariants(graphs):
    inv = graphs.check_invariants(n_samples=10000)
    assert inv["lip_ok"] and inv["max_lip"] <= 0.25 + 1e-6
    assert inv["ordered"] and inv["zero_on_E"]
    v, J = graphs.evaluate(np.zeros((1, 2)))
    assert np.all(v == 0) and np.all(J == 0)
    # on {dist >= 1} too
    v, _ = graphs.evaluate(np.array([[1.05, 0.0], [0.0, -1.1]]))
    assert np.all(v == 0)


def test_graph_family_rejects_single_sheet():
    with pytest.raises(SpecError):
        build_graph_family(ORIGIN, Q=1, J=6)


def test_pairwise_constant_stable(graphs):
    a = check_pairwise_condition(graphs, n_samples=10000, random_state=0)["C4"]
    b = check_pairwise_condition(graphs, n_samples=20000, random_state=1)["C4"]
    assert np.isfinite(a) and a > 0
    assert abs(a - b) / max(a, b) < 0.1


def test_singular_witness_near_K(graphs):
    # finest cube side times 4
    side = graphs.box[1][0] - graphs.box[0][0]
    for delta in (side * 2.0 ** (-graphs.J + 2), 0.01, 0.1):
        w = graphs.singular_witness([0.0, 0.0], delta)
        assert w is not None and np.linalg.norm(w) <= delta
        assert graphs.evaluate(w[None])[0][0, 0, 0] > 0


def test_tangential_equal_sheets_vacuous():
    f = GraphSheet.affine([[0.1, 0.2]])
    out = check_tangential_implies_condition([f, f, f], 1.0, np.zeros(2), 0.5)
    assert out["passed"] and out["worst_ratio"] == 0.0


def test_tangential_family_passes(graphs):
    out = check_tangential_implies_condition(graphs.sheets(), 1.0, np.array([0.3, 0.1]), 0.25)
    assert out["passed"]


def test_tangential_crossing_pair_fails():
    f1, f2 = GraphSheet.constant(2, 1), GraphSheet.affine([[1.0, 0.0]])
    out = check_tangential_implies_condition([f1, f2], 1.0, np.zeros(2), 0.5)
    assert not out["passed"]
    assert abs(out["witness"][0]) < 0.05 and out["pair"] == (1, 2)


def test_single_sheet_and_flat_families():
    fam = build_single_sheet(m=2, alpha=0.5, c=0.1)
    res = fam.ball_excess(fam.ball_center([0.0, 0.0]), 0.1, CAMPAIGN)
    assert res.q == 1 and res.excess > 0
    flat = FlatFamily(Q=3)
    res = flat.ball_excess(flat.ball_center([0.2, 0.1]), 0.3, CAMPAIGN)
    assert res.q == 3 and res.excess == 0.0 and res.competitor_gap == pytest.approx(0, abs=1e-14)
    assert res.mass == pytest.approx(3 * np.pi * 0.09, rel=1e-14)


def test_family_from_metadata_roundtrip(graphs, branched):
    g2 = family_from_metadata(graphs.metadata())
    assert g2.lipbound == graphs.lipbound and g2.scale == graphs.scale
    X = graphs.sample_points(200, 0)
    np.testing.assert_array_equal(g2.evaluate(X)[0], graphs.evaluate(X)[0])
    b2 = family_from_metadata(branched.metadata())
    assert b2.kappa == branched.kappa and b2.n_patches == branched.n_patches
    np.testing.assert_array_equal(b2.centers, branched.centers)
    for fam in (build_single_sheet(), FlatFamily(2, 2, 0.5)):
        assert family_from_metadata(fam.metadata()).metadata() == fam.metadata()
    with pytest.raises(SpecError):
        family_from_metadata({"kind": "nope"})


# ---------------------------------------------------------------------------
# branched family


def test_branched_invariants(branched):
    inv = branched.check_invariants(n_samples=10000)
    assert inv["grad_ok"] and inv["disjoint"]
    assert 0 < branched.kappa <= 1


def test_branched_roots_before_cutoff(branched):
    # eta(u) u^{3/2} e^{i pi j}: at u on the positive axis the values are +-eta(u) |u|^{3/2}
    u = np.array([[0.2, 0.0]])
    v, _ = branched.unit_patch(u)
    e = branched.eta.transform(u)[0]
    np.testing.assert_allclose(v[0], [[e * 0.2 ** 1.5, 0.0], [-e * 0.2 ** 1.5, 0.0]], atol=1e-15)


def test_branched_zero_off_patches(branched):
    l = int(np.argmax(branched.radii))
    z, r = branched.centers[l], branched.radii[l]
    th = np.linspace(0, 2 * np.pi, 50)
    ring = np.vstack([z + f * r * np.stack([np.cos(th), np.sin(th)], 1) for f in (0.5, 0.6)])
    pts = np.vstack([ring, z[None], np.asarray(branched.box[0])[None] - 1.0, np.array([[0.0, 0.0]])])
    v, J = eval_branched(branched, pts)
    assert np.all(v == 0) and np.all(J == 0)


def test_branched_opposite_cut_polar_oracle(branched):
    l = int(np.argmax(branched.radii))
    z, r = branched.centers[l], branched.radii[l]
    v, _ = eval_branched(branched, z + r * np.array([-0.25, 0.0]))
    e = branched.eta.transform(np.array([[-0.25, 0.0]]))[0]
    # (1/4)^{3/2} e^{i 3 pi / 2} = -i / 8
    mag = branched.kappa * r ** 1.5 * e * 0.25 ** 1.5
    np.testing.assert_allclose(v[0], [[0.0, -mag], [0.0, mag]], atol=1e-15)


def test_classify_cases(branched):
    l = int(np.argmax(branched.radii))
    z, rl = branched.centers[l], branched.radii[l]
    assert classify_ball(branched, np.r_[np.asarray(branched.box[1]) + 5.0, 0, 0], 0.01)[0] == "a"
    assert classify_ball(branched, np.r_[z, 0, 0], rl / 8)[0] == "c"
    # a small ball inside the patch, away from the center
    r = rl / 16
    case, I, Istar = classify_ball(branched, np.r_[z + np.array([0.3 * rl, 0.0]), 0, 0], r)
    assert case == "b" and I == [] and l in Istar


def test_monodromy_cycles(branched, branched3):
    for fam, Q in ((branched, 2), (branched3, 3)):
        l = int(np.argmax(fam.radii))
        perm = monodromy(fam, fam.centers[l], 0.3 * fam.radii[l])
        assert sorted(perm) == list(range(Q))
        # a single Q-cycle
        seen, j = [], 0
        for _ in range(Q):
            seen.append(j)
            j = perm[j]
        assert j == 0 and len(set(seen)) == Q
        off = fam.centers[l] + np.array([0.0, 0.25]) * fam.radii[l]
        assert monodromy(fam, off, 0.1 * fam.radii[l]) == list(range(Q))


def test_slit_domain_path_continuity(branched):
    rng = np.random.default_rng(0)
    ids = rng.integers(0, branched.n_patches, 1000)
    z, rl = branched.centers[ids], branched.radii[ids]
    U = rng.uniform(-0.5, 0.5, size=(1000, 2))
    step = 1e-4 * rng.normal(size=(1000, 2))
    P0 = z + rl[:, None] * U
    P1 = P0 + rl[:, None] * step
    # a short path crosses the slit when it changes side of the +x ray
    y0, y1 = U[:, 1], U[:, 1] + step[:, 1]
    crosses = (np.sign(y0) != np.sign(y1)) & (U[:, 0] > -1e-3)
    v0, _ = branched.evaluate(P0[~crosses])
    v1, _ = branched.evaluate(P1[~crosses])
    d = np.linalg.norm(v1 - v0, axis=2).max(axis=1)
    h = np.linalg.norm(P1 - P0, axis=1)[~crosses]
    assert np.all(d <= 0.25 * h * (1 + 1e-6) + 1e-15)


def test_blowup_flatness(branched):
    radii = 2.0 ** -np.arange(2, 7)
    out = blowup_flatness(branched, [0.0, 0.0], radii)
    assert out["slope"] >= branched.p - 0.1
    far = blowup_flatness(branched, np.asarray(branched.box[1]) + 5.0, radii)
    assert far["heights"] == [0.0] * len(radii) and far["slope"] is None


def test_patch_integrals_dual_route(branched):
    l = int(np.argmax(branched.radii))
    c, r = branched.centers[l], 0.6 * branched.radii[l]
    _, Istar = branched.index_sets(c, r)
    ex, dr, err = branched.patch_integrals(c, r, Istar, CAMPAIGN)
    G = branched.view(singular=[branched.centers[l]])
    direct = _disk_integral(
        G, c, r, lambda v, J, P: np.stack([np.sum(excess_density(J), 1),
                                           np.sum(J ** 2, axis=(1, 2, 3))], 1),
        CAMPAIGN)
    # both routes work at relative accuracy 1e-3
    assert ex == pytest.approx(direct.value[0], rel=2e-3)
    assert dr == pytest.approx(direct.value[1], rel=2e-3)


# ---------------------------------------------------------------------------
# mass ratio


def test_lens_area():
    assert lens_area(0.0, 1.0, 0.3) == pytest.approx(np.pi * 0.09)
    assert lens_area(1.4, 1.0, 0.3) == 0.0
    # grid oracle
    d, r1, r2 = 0.8, 1.0, 0.5
    h = 2e-3
    x, y = np.meshgrid(np.arange(-1, 1.5, h) + h / 2, np.arange(-1, 1, h) + h / 2)
    inside = (x * x + y * y < r1 * r1) & ((x - d) ** 2 + y * y < r2 * r2)
    assert lens_area(d, r1, r2) == pytest.approx(inside.sum() * h * h, rel=5e-3)


def test_mass_ratio_small_case():
    out = mass_ratio_example(0.5, N=4)
    assert 0 < out["ratio"] <= 1
    assert out["ratio"] >= out["lower_bound"] - 0.02
    assert mass_ratio_example(1.0, N=2)["ratio"] > 0
    with pytest.raises(SpecError):
        mass_ratio_example(0.5, N=0)


def test_cantor_branched_blowup_exponent():
    K = CantorProduct(ratio=1 / 3, depth=8, dim=2, axis=0)
    fam = build_branched_family(K, Q=2, k=1, J=10)
    out = blowup_flatness(fam, np.zeros(2), 2.0 ** -np.arange(3, 8))
    assert out["slope"] >= 1.5 - 0.1
