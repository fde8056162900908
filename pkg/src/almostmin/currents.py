"""Multi-sheeted graphs, their masses and excesses, and tilted reparametrizations.

A sheet is a map ``g`` from (tangent coordinates of) an m-plane to its
n-dimensional orthogonal complement, given together with its Jacobian.  A
:class:`MultiGraph` bundles ``Q`` labeled sheets; for branched families the
labels are only continuous off a declared cut locus, but every quantity
computed here that sums over all sheets is label independent.

Masses are integrals of the area element ``sqrt(det(I + Dg^T Dg))``.  The
excess density ``sqrt(det(I + G)) - 1`` is evaluated without cancellation so
that tiny excesses of nearly flat sheets are resolved to full relative
accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.utils import check_random_state

from ._sampling import ball_samples, hill_climb, polar_grid, sampled_holder
from ._validation import check_points
from .exceptions import (CloseEnoughViolation, DomainExceeded, DomainMismatch, InsufficientSamples,
                         NewtonDivergence, SpecError)
from .geom import MPlane, operator_norm, plane_of_linear_map, tilt_tau
from .quadrature import QuadratureConfig, integrate_disk, integrate_interval, integrate_star

__all__ = [
    "GraphSheet", "MultiGraph", "QuadratureConfig", "ReparamResult", "area_density",
    "excess_density", "mass_over_cylinder", "dirichlet", "reparametrize", "check_hseminorm",
    "check_relgrad", "excess", "ExcessResult", "affine_competitor_mass", "dirichlet_hypotheses",
    "unit_ball_volume", "tangent_plane", "preimage_excess",
]


def unit_ball_volume(m):
    from math import gamma, pi

    return pi ** (m / 2) / gamma(m / 2 + 1)


# ---------------------------------------------------------------------------
# area element


def excess_density(J):
    """``sqrt(det(I + J^T J)) - 1`` for Jacobians ``J`` of shape ``(..., n, m)``."""
    J = np.asarray(J, dtype=float)
    G = np.einsum("...ki,...kj->...ij", J, J)
    m = G.shape[-1]
    if m == 1:
        u = G[..., 0, 0]
    elif m == 2:
        u = G[..., 0, 0] + G[..., 1, 1] + G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
    else:
        lam = np.clip(np.linalg.eigvalsh(G), 0.0, None)
        return np.expm1(0.5 * np.sum(np.log1p(lam), axis=-1))
    return u / (np.sqrt(1.0 + u) + 1.0)


def area_density(J):
    return 1.0 + excess_density(J)


# ---------------------------------------------------------------------------
# sheets


class GraphSheet:
    """A single-valued sheet ``g : plane -> plane^perp`` with its Jacobian.

    Parameters
    ----------
    fn : callable
        Maps tangent coordinates ``(N, m)`` to ``(values (N, n), jac (N, n, m))``.
    m, n : int
    plane : MPlane or None
        The domain plane; the coordinate plane by default.
    lip : float or None
        Declared Lipschitz bound.
    domain : (center, radius) or None
        Disk on which the sheet is defined.
    """

    def __init__(self, fn, m, n, plane=None, lip=None, domain=None):
        self.fn = fn
        self.m, self.n = m, n
        self.plane = MPlane.coordinate(m, n) if plane is None else plane
        self.lip = lip
        self.domain = domain

    def evaluate(self, Y):
        Y = check_points(Y, self.m)
        v, J = self.fn(Y)
        return (np.asarray(v, dtype=float).reshape(Y.shape[0], self.n),
                np.asarray(J, dtype=float).reshape(Y.shape[0], self.n, self.m))

    def value(self, Y):
        return self.evaluate(Y)[0]

    def jacobian(self, Y):
        return self.evaluate(Y)[1]

    @classmethod
    def affine(cls, A, b=None):
        """The sheet ``y -> b + A y``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n, m = A.shape
        b = np.zeros(n) if b is None else np.asarray(b, dtype=float)

        def fn(Y):
            return b + Y @ A.T, np.broadcast_to(A, (Y.shape[0], n, m))

        return cls(fn, m, n, lip=operator_norm(A))

    @classmethod
    def constant(cls, m, n, value=0.0):
        return cls.affine(np.zeros((n, m)), np.full(n, value, dtype=float))

    def sampled_lip(self, center, radius, n_samples=4000, random_state=0):
        X = ball_samples(center, radius, n_samples, random_state)
        J = self.jacobian(X)
        return float(np.max(np.linalg.norm(J, ord=2, axis=(1, 2))))


class MultiGraph:
    """``Q`` labeled sheets over a common plane.

    Parameters
    ----------
    evaluator : callable
        Maps ``(N, m)`` points to ``(values (N, Q, n), jac (N, Q, n, m))``.
    Q, m, n : int
    plane : MPlane or None
    singular_points : sequence
        Points (tangent coordinates) where the sheets are not smooth; used to
        place quadrature poles.
    cut_locus : sequence
        Segments ``(start, end)`` across which labels may jump.
    lip : float or None
        Declared bound for every sheet's Lipschitz constant.
    """

    def __init__(self, evaluator, Q, m, n, plane=None, singular_points=(), cut_locus=(), lip=None,
                 sheets=None):
        self.evaluator = evaluator
        self.Q, self.m, self.n = Q, m, n
        self.plane = MPlane.coordinate(m, n) if plane is None else plane
        self.singular_points = [np.asarray(p, dtype=float) for p in singular_points]
        self.cut_locus = list(cut_locus)
        self.lip = lip
        self._sheets = sheets

    @classmethod
    def from_sheets(cls, sheets: Sequence[GraphSheet], singular_points=()):
        sheets = list(sheets)
        if not sheets:
            raise SpecError("a multigraph needs at least one sheet")
        m, n = sheets[0].m, sheets[0].n
        if any(s.m != m or s.n != n for s in sheets):
            raise SpecError("sheets have inconsistent dimensions")

        def evaluator(Y):
            vals, jacs = zip(*(s.evaluate(Y) for s in sheets))
            return np.stack(vals, axis=1), np.stack(jacs, axis=1)

        lips = [s.lip for s in sheets]
        lip = None if any(v is None for v in lips) else max(lips)
        return cls(evaluator, len(sheets), m, n, sheets[0].plane, singular_points, (), lip, sheets)

    def evaluate(self, Y):
        Y = check_points(Y, self.m)
        v, J = self.evaluator(Y)
        N = Y.shape[0]
        return (np.asarray(v, dtype=float).reshape(N, self.Q, self.n),
                np.asarray(J, dtype=float).reshape(N, self.Q, self.n, self.m))

    def sheet(self, i):
        if self._sheets is not None:
            return self._sheets[i]

        def fn(Y):
            v, J = self.evaluate(Y)
            return v[:, i], J[:, i]

        return GraphSheet(fn, self.m, self.n, self.plane, self.lip)

    def subset(self, indices):
        indices = list(indices)
        if self._sheets is not None:
            return MultiGraph.from_sheets([self._sheets[i] for i in indices], self.singular_points)

        def evaluator(Y):
            v, J = self.evaluate(Y)
            return v[:, indices], J[:, indices]

        return MultiGraph(evaluator, len(indices), self.m, self.n, self.plane,
                          self.singular_points, self.cut_locus, self.lip)


# ---------------------------------------------------------------------------
# integrals over disks


def _plane_parallel(p1, p2, tol=1e-10):
    P1 = p1.tangent.T @ p1.tangent
    P2 = p2.tangent.T @ p2.tangent
    return np.max(np.abs(P1 - P2)) < tol


def _disk_integral(F, center, radius, integrand, config, rho_breaks=()):
    """Integrate ``integrand(values, jacobians, points)`` over a disk of F's plane."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size != F.m:
        raise DomainMismatch("disk center has the wrong dimension")

    def f(P):
        P = P.reshape(-1, F.m)
        v, J = F.evaluate(P)
        return integrand(v, J, P)

    sing = [p for p in F.singular_points if p.size == F.m]
    return integrate_disk(f, center, radius, config, sing, rho_breaks=rho_breaks)


def mass_over_cylinder(F: MultiGraph, cyl, config=QuadratureConfig()):
    """Mass of the current of ``F`` inside the cylinder ``cyl``.

    The cylinder plane must be parallel to ``F.plane``; use
    :func:`reparametrize` first for tilted cylinders.

    Returns
    -------
    (value, error) : tuple of float
    """
    if not _plane_parallel(cyl.plane, F.plane):
        raise DomainMismatch("cylinder plane is not parallel to the sheets' plane")
    c = F.plane.project(cyl.center)[0][0]
    res = _disk_integral(F, c, cyl.radius,
                         lambda v, J, P: np.stack([np.sum(excess_density(J), axis=1)], 1), config)
    base = F.Q * unit_ball_volume(F.m) * cyl.radius ** F.m
    return float(base + res.value[0]), float(res.error)


def dirichlet(F: MultiGraph, center, radius, config=QuadratureConfig()):
    """``sum_i int_{B_radius(center)} |D g_i|^2`` (Frobenius norm).

    Slits in the disk have measure zero and the integrand is label
    independent, so the slit domain and the full disk give the same value.
    """
    res = _disk_integral(F, center, radius,
                         lambda v, J, P: np.sum(J ** 2, axis=(1, 2, 3)), config)
    return float(res.value[0]), float(res.error)


# ---------------------------------------------------------------------------
# reparametrization over a tilted plane


@dataclass
class ReparamResult:
    """A sheet rewritten as a graph over a tilted plane.

    Attributes
    ----------
    g : GraphSheet
        The new sheet over ``plane`` (tangent coordinates of ``plane``).
    plane : MPlane
        The tilted plane through the origin.
    center : ndarray
        ``y' = p_plane(x', f(x'))``.
    radius : float
        ``tau r / delta``, the radius of the domain of ``g``.
    diagnostics : dict
        Largest Newton iteration count and residual seen so far.
    """

    g: GraphSheet
    plane: MPlane
    center: np.ndarray
    radius: float
    tau: float
    A: np.ndarray
    x0: np.ndarray
    r: float
    delta: float
    sigma: float
    Lambda: float
    inverse: Callable
    diagnostics: dict = field(default_factory=dict)

    def containment(self):
        """Whether ``B_r(p_plane(x0))`` lies inside the domain disk of ``g``."""
        c = self.plane.project(self.x0)[0][0]
        return bool(np.linalg.norm(c - self.center) + self.r <= self.radius * (1 + 1e-12))


def reparametrize(f: GraphSheet, A, x0, r, delta=0.5, sigma=None, Lambda=None, *,
                  tol=1e-12, max_iter=50):
    """Rewrite the graph of ``f`` over the plane parallel to the graph of ``A``.

    Parameters
    ----------
    f : GraphSheet
        Sheet over the coordinate plane, defined on ``B_{r/delta}(x')``.
    A : array-like of shape (n, m)
        Linear map whose graph is parallel to the new plane.
    x0 : array-like of shape (m + n,)
        Ball center ``(x', xbar)``.
    r, delta, sigma, Lambda : float
        Scales of the construction; ``Lambda`` bounds ``Lip(f - A)`` and
        defaults to the declared ``lip`` of ``f`` plus ``|A|``.

    Raises
    ------
    CloseEnoughViolation
        If ``delta + |A| sigma / sqrt(1 + |A|^2) > (1 + Lambda^2)^(-1/2)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, m = A.shape
    if (m, n) != (f.m, f.n):
        raise DomainMismatch("linear map does not match the sheet's dimensions")
    x0 = np.asarray(x0, dtype=float).reshape(m + n)
    lipA = operator_norm(A)
    if Lambda is None:
        if f.lip is None:
            raise SpecError("Lambda must be given for sheets without a declared Lipschitz bound")
        Lambda = f.lip + lipA
    if sigma is None:
        sigma = 0.5 * (1.0 + (f.lip or 0.0))
    tau = float(tilt_tau(Lambda))
    if delta + lipA * sigma / np.sqrt(1.0 + lipA ** 2) > tau:
        raise CloseEnoughViolation(
            f"delta + Lip(A) sigma / sqrt(1 + Lip(A)^2) = "
            f"{delta + lipA * sigma / np.sqrt(1 + lipA ** 2):.6g} exceeds tau = {tau:.6g}")
    plane = plane_of_linear_map(A)
    T, Nrm = plane.tangent, plane.normal
    xp = x0[:m]
    R_f = r / delta

    def lift(X):
        v, J = f.evaluate(X)
        Dy = T[:, :m] + np.einsum("ik,nkj->nij", T[:, m:], J)
        DPhi = Nrm[:, :m] + np.einsum("ik,nkj->nij", Nrm[:, m:], J)
        P = np.hstack([X, v])
        return P @ T.T, P @ Nrm.T, Dy, DPhi

    y_p = lift(xp[None, :])[0][0]
    diag = {"max_iterations": 0, "max_residual": 0.0, "n_solved": 0}

    def inverse(Z):
        Z = check_points(Z, m)
        _, _, Dy0, _ = lift(xp[None, :])
        X = xp + np.linalg.solve(Dy0[0], (Z - y_p).T).T
        res_norm = np.full(Z.shape[0], np.inf)
        active = np.ones(Z.shape[0], dtype=bool)
        it = 0
        for it in range(1, max_iter + 1):
            y, _, Dy, _ = lift(X[active])
            res = y - Z[active]
            rn = np.linalg.norm(res, axis=1)
            res_norm[active] = rn
            done = rn <= tol
            idx = np.flatnonzero(active)
            active[idx[done]] = False
            if not np.any(active):
                break
            keep = ~done
            step = np.linalg.solve(Dy[keep], res[keep][..., None])[..., 0]
            Xa = X[active]
            lam = np.ones(Xa.shape[0])
            rn_a = rn[keep]
            for _ in range(30):
                trial = Xa - lam[:, None] * step
                yt = lift(trial)[0]
                ok = np.linalg.norm(yt - Z[active], axis=1) < rn_a
                if np.all(ok):
                    break
                lam = np.where(ok, lam, 0.5 * lam)
            Xa = Xa - lam[:, None] * step
            if np.any(np.linalg.norm(Xa - xp, axis=1) > R_f * (1 + 1e-9)):
                raise DomainExceeded("Newton iterate left the domain of the sheet")
            X[active] = Xa
        if np.any(active):
            raise NewtonDivergence(
                f"chart inversion did not converge in {max_iter} iterations "
                f"(residual {res_norm[active].max():.3e})")
        diag["max_iterations"] = max(diag["max_iterations"], it)
        diag["max_residual"] = max(diag["max_residual"], float(res_norm.max(initial=0.0)))
        diag["n_solved"] += Z.shape[0]
        return X

    def g_fn(Z):
        X = inverse(Z)
        _, phi, Dy, DPhi = lift(X)
        Dg = np.linalg.solve(np.transpose(Dy, (0, 2, 1)), np.transpose(DPhi, (0, 2, 1)))
        return phi, np.transpose(Dg, (0, 2, 1))

    radius = tau * R_f
    g = GraphSheet(g_fn, m, n, plane=plane, domain=(y_p, radius))
    return ReparamResult(g, plane, y_p, radius, tau, A, x0, r, delta, sigma, Lambda, inverse, diag)


def tangent_plane(f: GraphSheet, x):
    """Linear map ``A = Df(x)`` whose graph is the tangent plane of ``f`` at ``x``."""
    return f.jacobian(np.atleast_2d(x))[0]


def reparametrize_multigraph(F: MultiGraph, A, x0, r, delta=0.5, sigma=None, Lambda=None):
    """Reparametrize every sheet of ``F`` over the plane of ``A``."""
    results = [reparametrize(F.sheet(i), A, x0, r, delta, sigma, Lambda) for i in range(F.Q)]
    G = MultiGraph.from_sheets([res.g for res in results])
    G.plane = results[0].plane
    return G, results


def check_hseminorm(f: GraphSheet, result: ReparamResult, alpha, *, n_pairs=2000,
                    random_state=0, C_max=None):
    """Compare the sampled Hoelder seminorms of ``Dg`` and ``Df``.

    Returns ``{lhs, rhs, ratio, flag}`` where ``lhs = [Dg]_alpha`` on the domain
    of ``g``, ``rhs = [Df]_alpha`` on ``B_{r/delta}(x')`` and ``flag`` reports
    ``ratio > C_max``.
    """
    m = f.m
    xp = result.x0[:m]
    rhs = sampled_holder(f.jacobian, xp, result.r / result.delta, alpha,
                         n_pairs=n_pairs, random_state=random_state)
    lhs = sampled_holder(result.g.jacobian, result.center, result.radius, alpha,
                         n_pairs=n_pairs, random_state=random_state)
    if rhs == 0.0:
        ratio = 0.0 if lhs <= 1e-12 else np.inf
    else:
        ratio = lhs / rhs
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio,
            "flag": bool(C_max is not None and ratio > C_max)}


def check_relgrad(f1: GraphSheet, f2: GraphSheet, A, x0, r, alpha, *, delta=0.5, sigma=None,
                  Lambda=None, n_samples=1000, random_state=0, n_pairs=2000):
    """Evaluate the gradient comparison between two reparametrized sheets.

    For sampled ``z`` in ``B_r(p(x0))`` computes

        lhs = |Dg1(z) - Dg2(z)|
        rhs = |A|^a (1 + |A|^2)^(-a/2) min_i [Df_i]_a |f1(y1^-1 z) - f2(y2^-1 z)|^a
              + sup |Df1 - Df2|

    with Hoelder seminorms and the sup taken over ``B_{r/delta}(x')``
    (sampled, then locally maximized).  Returns the maximal violation
    ``max(lhs - rhs)`` with the arrays.
    """
    rng = check_random_state(random_state)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lips = [s.lip for s in (f1, f2)]
    if Lambda is None and all(v is not None for v in lips):
        Lambda = max(lips) + operator_norm(A)
    r1 = reparametrize(f1, A, x0, r, delta, sigma, Lambda)
    r2 = reparametrize(f2, A, x0, r, delta, sigma, Lambda)
    m = f1.m
    xp = np.asarray(x0, dtype=float)[:m]
    c = r1.plane.project(np.asarray(x0, dtype=float))[0][0]
    Z = np.vstack([c, ball_samples(c, r, n_samples - 1, rng)])
    Dg1, Dg2 = r1.g.jacobian(Z), r2.g.jacobian(Z)
    lhs = np.linalg.norm(Dg1 - Dg2, ord=2, axis=(1, 2))
    X1, X2 = r1.inverse(Z), r2.inverse(Z)
    vdiff = np.linalg.norm(f1.value(X1) - f2.value(X2), axis=1)
    R = r / delta
    h1 = sampled_holder(f1.jacobian, xp, R, alpha, n_pairs=n_pairs, random_state=rng)
    h2 = sampled_holder(f2.jacobian, xp, R, alpha, n_pairs=n_pairs, random_state=rng)
    sup = _sup_grad_difference(f1, f2, xp, R, rng)
    lipA = operator_norm(A)
    coef = lipA ** alpha / (1 + lipA ** 2) ** (alpha / 2)
    rhs = coef * min(h1, h2) * vdiff ** alpha + sup
    viol = lhs - rhs
    return {"max_violation": float(viol.max()), "lhs": lhs, "rhs": rhs,
            "witness": Z[int(np.argmax(viol))], "holder": (h1, h2), "sup_grad_diff": sup}


def _sup_grad_difference(f1, f2, center, radius, rng, n=4000, polish=8, steps=40):
    X = np.vstack([polar_grid(center, radius), ball_samples(center, radius, n, rng)])

    def val(P, _=None):
        return np.linalg.norm(f1.jacobian(P) - f2.jacobian(P), ord=2, axis=(1, 2))

    v = val(X)
    top = np.argsort(v)[::-1][:polish]
    # hill_climb works on pairs; the second point is a dummy copy
    from ._sampling import _into_ball

    return float(max(v.max(), hill_climb(
        lambda P, Q_: val(P), X[top], X[top] + 0.01 * radius, v[top], center - radius,
        center + radius, steps, rng, project=lambda P: _into_ball(P, center, radius))))


# ---------------------------------------------------------------------------
# excess and competitors


@dataclass
class ExcessResult:
    q: int
    mass: float
    excess: float
    dirichlet: float
    error: float
    meeting: list
    plane: MPlane
    sheets: Optional[MultiGraph] = None


def _meets_ball(F: MultiGraph, c, h0, r, n_rho=16, n_theta=32, steps=30):
    """Labels ``i`` with ``{(z, g_i(z))} ∩ B_r((c, h0)) != {}`` over the disk B_r(c)."""
    P = polar_grid(c, r, n_rho, n_theta)
    v, J = F.evaluate(P)
    d2 = np.sum((P - c) ** 2, axis=1)[:, None] + np.sum((v - h0) ** 2, axis=2)
    best = np.argmin(d2, axis=0)
    out = []
    for i in range(F.Q):
        z = P[best[i]].copy()
        val = d2[best[i], i]
        step = 0.5 * r / n_rho
        for _ in range(steps):
            vi, Ji = F.evaluate(z[None])
            grad = 2 * (z - c) + 2 * Ji[0, i].T @ (vi[0, i] - h0)
            nrm = np.linalg.norm(grad)
            if nrm == 0:
                break
            trial = z - step * grad / nrm
            if np.linalg.norm(trial - c) >= r:
                trial = c + (trial - c) * (0.999999 * r / np.linalg.norm(trial - c))
            vt = F.evaluate(trial[None])[0][0, i]
            dt = np.sum((trial - c) ** 2) + np.sum((vt - h0) ** 2)
            if dt < val:
                z, val = trial, dt
            else:
                step *= 0.5
        if val < r * r:
            out.append(i)
    return out


def excess(F: MultiGraph, x0, r, plane=None, config=QuadratureConfig(), *, delta=0.5,
           sigma=None, Lambda=None, all_sheets=False):
    """Area excess of ``F`` in the cylinder over ``B_r(p(x0))`` in ``plane``.

    Only sheets whose graphs meet the ball ``B_r(x0)`` are counted
    (``q`` of them); the excess is their mass in the cylinder minus
    ``q omega_m r^m``.  For a tilted ``plane`` (an :class:`MPlane` or a
    linear map) the sheets are first reparametrized over it.
    """
    x0 = np.asarray(x0, dtype=float)
    m = F.m
    G = F
    if plane is not None:
        if not isinstance(plane, MPlane):
            plane = plane_of_linear_map(plane)
        if not _plane_parallel(plane, F.plane):
            A = plane.linear_map()
            G, _ = reparametrize_multigraph(F, A, x0, r, delta, sigma, Lambda)
    tang, nrm = G.plane.project(x0)
    c, h0 = tang[0], nrm[0]
    meet = list(range(G.Q)) if all_sheets else _meets_ball(G, c, h0, r)
    q = len(meet)
    if q == 0:
        return ExcessResult(0, 0.0, 0.0, 0.0, 0.0, [], G.plane, G)
    H = G.subset(meet)
    res = _disk_integral(
        H, c, r,
        lambda v, J, P: np.stack([np.sum(excess_density(J), axis=1),
                                  np.sum(J ** 2, axis=(1, 2, 3))], axis=1), config)
    ex = float(res.value[0])
    return ExcessResult(q, q * unit_ball_volume(m) * r ** m + ex, ex, float(res.value[1]),
                        float(res.error), meet, G.plane, H)


def affine_competitor_mass(F: MultiGraph, center, r, s=0.25, config=QuadratureConfig(),
                           n_boundary=256):
    """Mass of an explicit competitor with the same boundary as ``F`` on a disk.

    Each sheet is replaced on ``B_{(1-s) r}`` by the least-squares affine fit
    of its boundary values, and interpolated linearly in the radius back to
    the sheet on the collar ``(1-s) r <= |z - c| <= r``.

    Returns ``{mass, competitor_mass, gap}`` with ``gap = mass - competitor_mass``.
    """
    if not 0.0 < s < 0.5:
        raise SpecError("collar fraction must lie in (0, 1/2)")
    c = np.atleast_1d(np.asarray(center, dtype=float))
    m = F.m
    if m == 1:
        B = np.array([c - r, c + r]).reshape(2, 1)
    else:
        t = np.linspace(0, 2 * np.pi, n_boundary, endpoint=False)
        B = c + r * np.stack([np.cos(t), np.sin(t)], axis=1)
    vb, _ = F.evaluate(B)
    D = np.hstack([np.ones((B.shape[0], 1)), B - c])
    coef = np.stack([np.linalg.lstsq(D, vb[:, i], rcond=None)[0] for i in range(F.Q)])
    a0 = coef[:, 0]                      # (Q, n)
    slope = np.transpose(coef[:, 1:], (0, 2, 1))     # (Q, n, m)
    inner = (1.0 - s) * r

    def integrand(v, J, P):
        d = P - c
        rho = np.linalg.norm(d, axis=1)
        lam = np.clip((rho - inner) / (s * r), 0.0, 1.0)
        aff = a0[None] + np.einsum("qnm,pm->pqn", slope, d)
        dl = np.where((rho > inner)[:, None], d / np.maximum(rho, 1e-300)[:, None] / (s * r), 0.0)
        Jh = ((1 - lam)[:, None, None, None] * slope[None] + lam[:, None, None, None] * J
              + np.einsum("pqn,pm->pqnm", v - aff, dl))
        return np.stack([np.sum(excess_density(J), axis=1),
                         np.sum(excess_density(Jh), axis=1)], axis=1)

    res = _disk_integral(F, c, r, integrand, config, rho_breaks=(1.0 - s,))
    base = F.Q * unit_ball_volume(m) * r ** m
    mass, comp = base + res.value[0], base + res.value[1]
    return {"mass": float(mass), "competitor_mass": float(comp), "gap": float(mass - comp),
            "excess": float(res.value[0]), "competitor_excess": float(res.value[1])}


def dirichlet_hypotheses(F: MultiGraph, center, r, alpha, *, n_samples=4000, random_state=0,
                         max_pairs=1500):
    """Measured constants of the three pointwise hypotheses of the Dirichlet bound.

    On the disk ``Omega' = B_r(center)`` (diameter ``2 r``) with all base
    points equal to the sample ``x_1`` minimizing ``|Dg_i|``:

    * ``C1 = |Dg_{i0}(x_1)| / diam^alpha``,
    * ``C2 = max_{i != j} |Dg_i(x_1) - Dg_j(x_1)| / diam^alpha``,
    * ``C3 = max_i max_{y, z} |Dg_i(y) - Dg_i(z)| / diam^alpha``,

    norms being Frobenius.  ``Cbar = (C1 + C2 + C3)^2``.
    """
    rng = check_random_state(random_state)
    c = np.atleast_1d(np.asarray(center, dtype=float))
    X = np.vstack([polar_grid(c, r), ball_samples(c, r, n_samples, rng)])
    _, J = F.evaluate(X)
    N, Q = J.shape[:2]
    flat = J.reshape(N, Q, -1)
    norms = np.linalg.norm(flat, axis=2)
    s_best, i0 = np.unravel_index(np.argmin(norms), norms.shape)
    diam = 2.0 * r
    scale = diam ** alpha
    C1 = norms[s_best, i0] / scale
    g1 = flat[s_best]
    C2 = 0.0
    for i in range(Q):
        for j in range(Q):
            if i != j:
                C2 = max(C2, float(np.linalg.norm(g1[i] - g1[j])))
    C2 /= scale
    C3 = 0.0
    for i in range(Q):
        G = flat[:, i]
        # extremes of every coordinate plus a random subsample
        pick = np.unique(np.concatenate([np.argmax(G, 0), np.argmin(G, 0),
                                         rng.choice(N, size=min(N, max_pairs), replace=False)]))
        C3 = max(C3, float(cdist(G[pick], G[pick]).max()))
    C3 /= scale
    return {"C1": float(C1), "C2": float(C2), "C3": float(C3), "Cbar": float((C1 + C2 + C3) ** 2),
            "i0": int(i0), "x1": X[s_best], "diam": diam}


def preimage_excess(f: GraphSheet, plane: MPlane, x0, r, config=QuadratureConfig(),
                    delta=0.5, Lambda=None):
    """Excess of ``gr(f) ∩ C_r(x0, plane)`` computed in the chart of ``f``.

    The preimage region ``{x : |p(x, f(x)) - p(x0)| < r}`` is star-shaped
    around the preimage of ``p(x0)``; its boundary is found by bisection
    along rays.  Returns ``(excess, error)`` for comparison with the excess
    computed after reparametrization over ``plane``.
    """
    if f.m != 2:
        raise SpecError("preimage excess is implemented for 2-dimensional sheets")
    A = plane.linear_map()
    x0 = np.asarray(x0, dtype=float)
    rep = reparametrize(f, A, x0, r, delta, None, Lambda)
    c = rep.plane.project(x0)[0][0]
    star = rep.inverse(c[None])[0]
    T = rep.plane.tangent

    def y_of(X):
        return np.hstack([X, f.value(X)]) @ T.T

    hi0 = r / delta

    def R(t):
        e = np.stack([np.cos(t), np.sin(t)], axis=-1)
        lo = np.zeros(t.size)
        hi = np.full(t.size, hi0)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            inside = np.linalg.norm(y_of(star + mid[:, None] * e) - c, axis=1) < r
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return 0.5 * (lo + hi)

    def dens(P):
        return excess_density(f.jacobian(P))

    body = integrate_star(dens, star, R, config)
    area = integrate_interval(lambda t: 0.5 * R(t) ** 2, 0.0, 2 * np.pi, config)
    ex = body.value[0] + (area.value[0] - np.pi * r * r)
    return float(ex), float(body.error + area.error)
