import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostmin.currents import (GraphSheet, MultiGraph, affine_competitor_mass, check_hseminorm,
                                check_relgrad, dirichlet, dirichlet_hypotheses, excess,
                                mass_over_cylinder, preimage_excess, reparametrize, tangent_plane)
from almostmin.exceptions import CloseEnoughViolation, DomainMismatch, SpecError
from almostmin.geom import Cylinder, MPlane, plane_of_linear_map
from almostmin.quadrature import QuadratureConfig

FAST = QuadratureConfig(target_rel_tol=1e-7)


def paraboloid(a=0.2, b=0.0, c=0.0):
    """Sheet ``a|y|^2 + b y_1 + c`` over R^2."""

    def fn(Y):
        v = a * np.sum(Y ** 2, 1) + b * Y[:, 0] + c
        J = 2 * a * Y
        J[:, 0] += b
        return v[:, None], J[:, None, :]

    return GraphSheet(fn, 2, 1, lip=2 * abs(a) * 1.5 + abs(b))


def parabola_1d():
    """``x^2 / 10`` over R^1."""

    def fn(Y):
        return (Y[:, 0] ** 2 / 10)[:, None], (Y[:, 0] / 5)[:, None, None]

    return GraphSheet(fn, 1, 1, lip=0.3)


# ---------------------------------------------------------------------------
# mass and Dirichlet integrals


@pytest.mark.parametrize("Q", [1, 2, 3])
def test_mass_of_flat_sheets(Q):
    F = MultiGraph.from_sheets([GraphSheet.constant(2, 1, 0.1 * i) for i in range(Q)])
    r = 0.7
    mass, err = mass_over_cylinder(F, Cylinder(MPlane.coordinate(2, 1), np.zeros(3), r))
    assert mass == pytest.approx(Q * np.pi * r * r, rel=1e-12)


def test_mass_of_segment_slope_half():
    F = MultiGraph.from_sheets([GraphSheet.affine([[0.5]])])
    mass, _ = mass_over_cylinder(F, Cylinder(MPlane.coordinate(1, 1), np.zeros(2), 1.0))
    assert mass == pytest.approx(np.sqrt(5.0), rel=1e-12)


def test_mass_rejects_tilted_cylinder():
    F = MultiGraph.from_sheets([GraphSheet.constant(2, 1)])
    tilted = plane_of_linear_map([[0.3, 0.0]])
    with pytest.raises(DomainMismatch):
        mass_over_cylinder(F, Cylinder(tilted, np.zeros(3), 0.5))


def test_paraboloid_mass_radial_oracle():
    # area of a|y|^2 over B_r: (pi / (6 a^2)) ((1 + 4 a^2 r^2)^{3/2} - 1)
    a, r = 0.2, 0.8
    F = MultiGraph.from_sheets([paraboloid(a)])
    mass, _ = mass_over_cylinder(F, Cylinder(MPlane.coordinate(2, 1), np.zeros(3), r))
    ref = np.pi / (6 * a * a) * ((1 + 4 * a * a * r * r) ** 1.5 - 1)
    assert mass == pytest.approx(ref, rel=1e-9)


def test_dirichlet_constant_and_affine():
    F0 = MultiGraph.from_sheets([GraphSheet.constant(2, 1, 0.3)] * 2)
    assert dirichlet(F0, np.zeros(2), 0.5)[0] == 0.0
    s, r = 0.3, 0.5
    F1 = MultiGraph.from_sheets([GraphSheet.affine([[s, 0.0]])])
    assert dirichlet(F1, np.zeros(2), r)[0] == pytest.approx(s * s * np.pi * r * r, rel=1e-12)


def test_dirichlet_paraboloid_radial_oracle():
    # |grad|^2 = 4 a^2 rho^2, integral 2 pi a^2 r^4
    a, r = 0.2, 0.6
    F = MultiGraph.from_sheets([paraboloid(a)])
    assert dirichlet(F, np.zeros(2), r)[0] == pytest.approx(2 * np.pi * a * a * r ** 4, rel=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.5), st.floats(0.1, 0.9), st.floats(-0.2, 0.2))
def test_mass_monotone_in_radius(a, frac, b):
    F = MultiGraph.from_sheets([paraboloid(a, b), GraphSheet.constant(2, 1, 1.0)])
    plane = MPlane.coordinate(2, 1)
    big = mass_over_cylinder(F, Cylinder(plane, np.zeros(3), 0.6), FAST)[0]
    small = mass_over_cylinder(F, Cylinder(plane, np.zeros(3), 0.6 * frac), FAST)[0]
    assert small <= big


def test_quadrature_config_validation():
    for tol in (1e-12, 1e-2, 0.5):
        with pytest.raises(SpecError):
            QuadratureConfig(target_rel_tol=tol)
    with pytest.raises(SpecError):
        QuadratureConfig(order=1)
    QuadratureConfig(target_rel_tol=1e-6)


# ---------------------------------------------------------------------------
# reparametrization


def test_reparametrize_identity():
    f = GraphSheet.constant(2, 1)
    res = reparametrize(f, np.zeros((1, 2)), np.zeros(3), 0.4)
    Z = np.random.default_rng(0).uniform(-0.2, 0.2, size=(100, 2))
    np.testing.assert_allclose(res.inverse(Z), Z, atol=1e-14)
    v, J = res.g.evaluate(Z)
    assert np.abs(v).max() < 1e-14 and np.abs(J).max() < 1e-14


def test_reparametrize_affine_over_itself():
    A = np.array([[0.3, -0.2]])
    f = GraphSheet.affine(A)
    res = reparametrize(f, A, np.zeros(3), 0.3)
    Z = np.random.default_rng(1).uniform(-0.2, 0.2, size=(100, 2))
    v, J = res.g.evaluate(Z)
    assert np.abs(v).max() < 1e-14 and np.abs(J).max() < 1e-13


def test_reparametrize_parabola_closed_form():
    f = parabola_1d()
    x0 = np.array([0.2, 0.004])
    A = tangent_plane(f, x0[:1])
    a = A[0, 0]
    res = reparametrize(f, A, x0, 0.5)
    T, N = res.plane.tangent[0], res.plane.normal[0]
    Z = res.center + np.linspace(-0.9, 0.9, 1000)[:, None] * res.radius
    # (x + a x^2 / 10) / s = z is a quadratic in x
    s = np.hypot(1.0, a)
    assert T[0] * T[1] > 0 and T[0] == pytest.approx(1 / s)
    z = Z[:, 0]
    x = (-1 + np.sqrt(1 + 4 * (a / 10) * s * z)) / (2 * a / 10)
    X = res.inverse(Z)[:, 0]
    assert np.abs(X - x).max() < 1e-9
    P = np.stack([x, x ** 2 / 10], 1)
    np.testing.assert_allclose(res.g.value(Z)[:, 0], P @ N, atol=1e-12)
    # round trip on the graph of f
    back = Z[:, :1] * T + res.g.value(Z) * N
    assert np.abs(back[:, 1] - back[:, 0] ** 2 / 10).max() < 1e-9
    assert res.diagnostics["max_residual"] <= 1e-12


def test_reparametrize_jacobian_matches_fd():
    f = paraboloid(0.2)
    x0 = np.array([0.1, 0.0, 0.002])
    res = reparametrize(f, tangent_plane(f, x0[:2]), x0, 0.2)
    rng = np.random.default_rng(2)
    Z = res.center + 0.3 * res.radius * rng.uniform(-1, 1, size=(1000, 2))
    J = res.g.jacobian(Z)[:, 0]
    h = 1e-5
    fd = np.stack([(res.g.value(Z + h * e) - res.g.value(Z - h * e))[:, 0] / (2 * h)
                   for e in np.eye(2)], 1)
    assert np.abs(J - fd).max() < 1e-5
    assert res.containment()


def test_reparametrize_close_enough_violation():
    f = paraboloid(0.2)
    with pytest.raises(CloseEnoughViolation):
        reparametrize(f, [[2.0, 0.0]], np.zeros(3), 0.2, delta=0.9, Lambda=2.5)


def test_reparam_invariance_of_excess():
    f = paraboloid(0.2)
    x0 = np.array([0.1, 0.0, 0.002])
    r = 0.2
    plane = plane_of_linear_map(tangent_plane(f, [0.15, 0.05]))
    e1 = excess(MultiGraph.from_sheets([f]), x0, r, plane=plane, config=FAST)
    e2, err = preimage_excess(f, plane, x0, r, config=FAST)
    assert e1.excess == pytest.approx(e2, abs=2 * (1e-7 * np.pi * r * r + err + e1.error))


def test_hseminorm_affine_and_untilted():
    f = GraphSheet.affine([[0.2, 0.1]])
    res = reparametrize(f, [[0.1, 0.0]], np.zeros(3), 0.2)
    out = check_hseminorm(f, res, 0.5)
    assert out["ratio"] == 0.0 and out["rhs"] == 0.0
    g = paraboloid(0.2)
    res = reparametrize(g, np.zeros((1, 2)), np.array([0.1, 0.0, 0.002]), 0.2)
    Z = res.center + 0.5 * res.radius * np.random.default_rng(3).uniform(-1, 1, size=(50, 2))
    np.testing.assert_allclose(res.g.jacobian(Z), g.jacobian(Z), atol=1e-14)
    # g = f, but on the smaller disk of radius tau r / delta; [2 a y]_{1/2} grows like sqrt(R)
    out = check_hseminorm(g, res, 0.5)
    assert out["ratio"] == pytest.approx(np.sqrt(res.tau), rel=1e-3)
    assert check_hseminorm(g, res, 1.0)["ratio"] == pytest.approx(1.0, rel=1e-9)


def test_hseminorm_parabola_stable_under_doubling():
    f = paraboloid(0.2)
    x0 = np.array([0.1, 0.0, 0.002])
    res = reparametrize(f, tangent_plane(f, x0[:2]), x0, 0.2)
    a = check_hseminorm(f, res, 0.5, n_pairs=2000)["ratio"]
    b = check_hseminorm(f, res, 0.5, n_pairs=4000, random_state=1)["ratio"]
    assert np.isfinite(a) and abs(a - b) / b < 0.02
    assert check_hseminorm(f, res, 0.5, C_max=0.5 * a)["flag"]


def test_relgrad_equal_sheets_and_untilted():
    f = paraboloid(0.2)
    x0 = np.array([0.1, 0.0, 0.002])
    out = check_relgrad(f, f, tangent_plane(f, x0[:2]), x0, 0.05, 1.0, n_samples=200)
    assert np.abs(out["lhs"]).max() < 1e-12 and out["max_violation"] <= 1e-12
    g = GraphSheet.affine([[0.05, 0.0]], [0.01])
    out = check_relgrad(f, g, np.zeros((1, 2)), x0, 0.05, 1.0, n_samples=200)
    assert out["max_violation"] <= 1e-8
    # untilted: lhs is the plain gradient difference
    Z = np.vstack([x0[:2]])
    assert out["lhs"][0] == pytest.approx(np.linalg.norm(f.jacobian(Z)[0] - g.jacobian(Z)[0], 2))


def test_relgrad_tangent_regime_and_shifted_pair():
    f = paraboloid(0.2)
    x0 = np.array([0.1, 0.0, 0.002])
    A = tangent_plane(f, x0[:2])
    g = paraboloid(0.2, c=0.01)
    out = check_relgrad(f, g, A, x0, 0.02, 1.0, n_samples=300)
    assert out["max_violation"] <= 1e-8
    assert np.abs(out["lhs"]).max() > 0
    # the bound is asymptotic in r: a small relative violation appears at r = 0.05
    out = check_relgrad(f, g, A, x0, 0.05, 1.0, n_samples=300)
    i = np.argmax(out["lhs"] - out["rhs"])
    assert out["max_violation"] <= 1e-3 * out["lhs"][i]


def test_relgrad_counterexample_detected():
    # f1 = 0, f2 = eps x_1 over the plane of slope 1/2: the bound fails
    eps = 0.01
    f1, f2 = GraphSheet.constant(2, 1), GraphSheet.affine([[eps, 0.0]])
    out = check_relgrad(f1, f2, [[0.5, 0.0]], np.zeros(3), 0.05, 1.0, n_samples=200,
                        Lambda=0.6)
    assert out["max_violation"] > 0.1 * eps


# ---------------------------------------------------------------------------
# excess, competitors, Dirichlet hypotheses


def test_excess_flat_and_affine():
    F = MultiGraph.from_sheets([GraphSheet.constant(2, 1, 0.0), GraphSheet.constant(2, 1, 0.05)])
    e = excess(F, np.zeros(3), 0.3)
    assert e.q == 2 and e.excess == 0.0
    s, r = 0.3, 0.5
    e = excess(MultiGraph.from_sheets([GraphSheet.affine([[s, 0.0]])]), np.zeros(3), r)
    assert e.q == 1
    assert e.excess == pytest.approx((np.sqrt(1 + s * s) - 1) * np.pi * r * r, rel=1e-10)


def test_excess_counts_sheets_meeting_ball():
    F = MultiGraph.from_sheets([GraphSheet.constant(2, 1, 0.0), GraphSheet.constant(2, 1, 1.0)])
    assert excess(F, np.zeros(3), 0.3).q == 1
    assert excess(F, np.zeros(3), 0.3, all_sheets=True).q == 2


def test_excess_below_half_dirichlet_plus_quartic():
    # sqrt(1 + t) - 1 <= t / 2 for one sheet with n = 1
    F = MultiGraph.from_sheets([paraboloid(0.3, 0.1)])
    e = excess(F, np.zeros(3), 0.4, config=FAST)
    assert e.excess <= 0.5 * e.dirichlet
    assert 0.5 * e.dirichlet - e.excess <= 0.125 * (0.6 * 0.4 + 0.1) ** 2 * e.dirichlet


@pytest.mark.parametrize("F", [
    MultiGraph.from_sheets([GraphSheet.constant(2, 1, 0.0)] * 2),
    MultiGraph.from_sheets([GraphSheet.affine([[0.2, -0.1]], [0.3]), GraphSheet.affine([[0.1, 0.0]])]),
    MultiGraph.from_sheets([GraphSheet.affine([[0.25]])]),
])
def test_affine_competitor_exact_on_affine(F):
    out = affine_competitor_mass(F, np.zeros(F.m), 0.4, config=FAST)
    assert out["gap"] == pytest.approx(0.0, abs=1e-12)


def test_affine_competitor_bounded_by_excess():
    F = MultiGraph.from_sheets([paraboloid(0.3, 0.1)])
    out = affine_competitor_mass(F, np.zeros(2), 0.4, config=FAST)
    assert 0 < out["gap"] <= out["excess"]


@pytest.mark.parametrize("s", [0.0, 0.5, 0.7])
def test_affine_competitor_collar_range(s):
    F = MultiGraph.from_sheets([GraphSheet.constant(2, 1)])
    with pytest.raises(SpecError):
        affine_competitor_mass(F, np.zeros(2), 0.4, s=s)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.tuples(st.floats(-0.4, 0.4), st.floats(-0.3, 0.3)), min_size=1, max_size=3),
       st.floats(0.1, 1.0), st.sampled_from([0.5, 1.0]))
def test_dirichlet_bound_from_hypotheses(coefs, r, alpha):
    F = MultiGraph.from_sheets([paraboloid(a, b) for a, b in coefs])
    h = dirichlet_hypotheses(F, np.zeros(2), r, alpha)
    D = dirichlet(F, np.zeros(2), r, FAST)[0]
    bound = h["Cbar"] * F.Q * h["diam"] ** (2 * alpha) * np.pi * r * r
    assert D <= bound * (1 + 1e-9)


def test_branched_power_mass_radial_oracle():
    # two sheets +-z^{3/2} over B_{1/2}(0); area element 1 + |3/2 z^{1/2}|^2 per sheet
    from scipy.integrate import quad

    def evaluator(Y):
        z = Y[:, 0] + 1j * Y[:, 1]
        th = np.mod(np.angle(z), 2 * np.pi)
        rho = np.abs(z)
        w = rho ** 1.5 * np.exp(1.5j * th)
        dw = 1.5 * np.sqrt(rho) * np.exp(0.5j * th)
        vals, jacs = [], []
        for sgn in (1, -1):
            vals.append(np.stack([(sgn * w).real, (sgn * w).imag], -1))
            a, b = (sgn * dw).real, (sgn * dw).imag
            jacs.append(np.stack([np.stack([a, -b], -1), np.stack([b, a], -1)], -2))
        return np.stack(vals, 1), np.stack(jacs, 1)

    F = MultiGraph(evaluator, 2, 2, 2, singular_points=[np.zeros(2)],
                   cut_locus=[(np.zeros(2), np.array([0.5, 0.0]))])
    mass, _ = mass_over_cylinder(F, Cylinder(MPlane.coordinate(2, 2), np.zeros(4), 0.5),
                                 QuadratureConfig(target_rel_tol=1e-8))
    ref = 2 * quad(lambda r: 2 * np.pi * r * (1 + 2.25 * r), 0, 0.5)[0]
    assert mass == pytest.approx(ref, rel=1e-6)
