"""Adaptive Gauss-Legendre quadrature on intervals and star-shaped planar domains.

Planar domains are described in polar form around a pole ``p``:
``{p + rho (cos t, sin t) : 0 <= rho < R(t)}``.  The substitution
``rho = u R(t)`` maps the domain to the rectangle ``[0, 1] x [t0, t0 + 2 pi)``,
which is tiled by cells.  Each cell is integrated with a tensor rule, the
error is estimated by comparison with its four children, and the worst cells
are refined until the total estimated error meets the tolerance.  Putting the
pole at a point singularity of the integrand restores fast convergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import QuadratureBudgetExceeded, SpecError


@dataclass(frozen=True)
class QuadratureConfig:
    """Accuracy and budget of the adaptive rules.

    Attributes
    ----------
    target_rel_tol : float
        Stop once the estimated error is below ``target_rel_tol * |I|``
        (plus ``abs_tol``).  Must lie in ``(1e-12, 1e-2)``.
    max_subdivision_depth : int
        Deepest refinement level of any cell.
    polar_mode : bool
        Put the pole at a declared singular point when one lies inside the
        disk; otherwise the disk center is used.
    order : int
        Gauss-Legendre points per direction and cell.
    max_cells : int
        Hard budget on the number of active cells.
    abs_tol : float
        Absolute error floor.
    """

    target_rel_tol: float = 1e-9
    max_subdivision_depth: int = 14
    polar_mode: bool = True
    order: int = 6
    max_cells: int = 40000
    abs_tol: float = 1e-300

    def __post_init__(self):
        if not 1e-12 < self.target_rel_tol < 1e-2:
            raise SpecError("target_rel_tol must lie in (1e-12, 1e-2)")
        if self.max_subdivision_depth < 1 or self.order < 2 or self.max_cells < 16:
            raise SpecError("invalid quadrature budget")


@dataclass(frozen=True)
class QuadratureResult:
    value: np.ndarray
    error: float
    n_cells: int
    n_evals: int
    cells: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


_CHUNK_POINTS = 200000


def _gl(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _as_columns(v, n):
    v = np.asarray(v, dtype=float)
    return v.reshape(n, -1)


def _refine_loop(cells, integrate_children, split, config, n_dims):
    """Generic worst-first refinement.

    ``cells`` is an array of cell bounds with a depth column last.
    ``integrate_children(cells)`` returns the child-sum values ``(n, K)`` and
    the single-cell values ``(n, K)``.
    """
    fine, coarse = integrate_children(cells)
    n_evals = cells.shape[0] * (2 ** n_dims + 1)
    while True:
        err = np.abs(fine[:, 0] - coarse[:, 0])
        total = fine.sum(axis=0)
        tol = max(config.target_rel_tol * abs(total[0]), config.abs_tol)
        if err.sum() <= tol:
            return QuadratureResult(total, float(err.sum()), cells.shape[0], n_evals, cells)
        depth = cells[:, -1]
        refinable = (depth < config.max_subdivision_depth) & (err > 0)
        if not np.any(refinable):
            raise QuadratureBudgetExceeded(
                f"maximal subdivision depth reached with error {err.sum():.3e} > {tol:.3e}")
        order = np.argsort(-np.where(refinable, err, -1.0), kind="stable")
        n_ref = max(1, int(np.ceil(0.25 * refinable.sum())))
        pick = order[:n_ref]
        pick = pick[refinable[pick]]
        n_new = cells.shape[0] + pick.size * (2 ** n_dims - 1)
        if n_new > config.max_cells:
            raise QuadratureBudgetExceeded(
                f"cell budget {config.max_cells} exhausted with error {err.sum():.3e} > {tol:.3e}")
        children = split(cells[pick])
        keep = np.ones(cells.shape[0], dtype=bool)
        keep[pick] = False
        f_new, c_new = integrate_children(children)
        n_evals += children.shape[0] * (2 ** n_dims + 1)
        cells = np.vstack([cells[keep], children])
        fine = np.vstack([fine[keep], f_new])
        coarse = np.vstack([coarse[keep], c_new])


def integrate_interval(f, a, b, config=QuadratureConfig(), breakpoints=()):
    """Adaptive Gauss-Legendre integral of ``f`` over ``[a, b]``.

    ``f`` maps an array of abscissae ``(N,)`` to values ``(N,)`` or ``(N, K)``;
    the error control uses the first column.
    """
    if not b > a:
        raise SpecError("integration interval must have b > a")
    x, w = _gl(config.order)
    pts = np.unique(np.concatenate([[a], [p for p in breakpoints if a < p < b], [b]]))
    cells = np.stack([pts[:-1], pts[1:], np.zeros(pts.size - 1)], axis=1)

    def rule(lo, hi):
        X = lo[:, None] + (hi - lo)[:, None] * x[None, :]
        vals = _as_columns(f(X.ravel()), X.size)
        vals = vals.reshape(lo.size, x.size, -1)
        return np.einsum("nqk,q->nk", vals, w) * (hi - lo)[:, None]

    def integrate_children(c):
        lo, hi = c[:, 0], c[:, 1]
        mid = 0.5 * (lo + hi)
        fine = rule(lo, mid) + rule(mid, hi)
        return fine, rule(lo, hi)

    def split(c):
        mid = 0.5 * (c[:, 0] + c[:, 1])
        d = c[:, 2] + 1
        return np.vstack([np.stack([c[:, 0], mid, d], 1), np.stack([mid, c[:, 1], d], 1)])

    return _refine_loop(cells, integrate_children, split, config, 1)


def disk_radius_function(pole, center, radius):
    """``R(t)`` for the disk ``B_radius(center)`` seen from an interior ``pole``."""
    d = np.asarray(pole, dtype=float) - np.asarray(center, dtype=float)
    dd = float(d @ d)
    if dd >= radius * radius:
        raise SpecError("pole must lie inside the disk")

    def R(t):
        e = np.stack([np.cos(t), np.sin(t)], axis=-1)
        b = e @ d
        return -b + np.sqrt(b * b + radius * radius - dd)

    return R


def _star_parts(pole, R, config, theta0, n_theta, n_u, u_breaks):
    x, w = _gl(config.order)
    W = np.outer(w, w).ravel()
    U0, T0 = np.meshgrid(x, x, indexing="ij")
    U0, T0 = U0.ravel(), T0.ravel()
    us = np.unique(np.concatenate([np.linspace(0.0, 1.0, n_u + 1),
                                   [b for b in u_breaks if 0 < b < 1]]))
    n_u = us.size - 1
    ts = theta0 + np.linspace(0.0, 2 * np.pi, n_theta + 1)
    cells = np.array([[us[i], us[i + 1], ts[j], ts[j + 1], 0]
                      for i in range(n_u) for j in range(n_theta)], dtype=float)

    def nodes(c):
        u0, u1, t0, t1 = c[:, 0:1], c[:, 1:2], c[:, 2:3], c[:, 3:4]
        u = u0 + (u1 - u0) * U0
        t = t0 + (t1 - t0) * T0
        Rt = R(t.ravel()).reshape(t.shape)
        rho = u * Rt
        P = pole + np.stack([rho * np.cos(t), rho * np.sin(t)], axis=-1).reshape(-1, 2)
        jac = (u * Rt * Rt) * W * (u1 - u0) * (t1 - t0)
        return P, jac

    def split(c):
        um = 0.5 * (c[:, 0] + c[:, 1])
        tm = 0.5 * (c[:, 2] + c[:, 3])
        d = c[:, 4] + 1
        out = []
        for a, b in ((c[:, 0], um), (um, c[:, 1])):
            for s, e in ((c[:, 2], tm), (tm, c[:, 3])):
                out.append(np.stack([a, b, s, e, d], axis=1))
        return np.vstack(out)

    return cells, nodes, split


def integrate_star(f, pole, R, config=QuadratureConfig(), theta0=0.0, n_theta=8, n_u=2,
                   u_breaks=()):
    """Integral of ``f`` over a star-shaped planar domain around ``pole``.

    Parameters
    ----------
    f : callable
        Maps points ``(N, 2)`` to values ``(N,)`` or ``(N, K)``.
    pole : array-like of shape (2,)
    R : callable
        Radial extent ``R(theta)``, vectorized; must be positive.
    theta0 : float
        Starting angle of the angular cells (align with any ray across which
        the integrand is not smooth).
    u_breaks : sequence of float
        Extra radial cell boundaries in ``(0, 1)``, for kinks along
        ``rho = u R(theta)``.
    """
    pole = np.asarray(pole, dtype=float)
    cells, nodes, split = _star_parts(pole, R, config, theta0, n_theta, n_u, u_breaks)

    def rule(c):
        out = []
        step = max(1, _CHUNK_POINTS // (config.order ** 2))
        for i in range(0, c.shape[0], step):
            P, jac = nodes(c[i:i + step])
            vals = _as_columns(f(P), P.shape[0]).reshape(jac.shape[0], jac.shape[1], -1)
            out.append(np.einsum("nqk,nq->nk", vals, jac))
        return np.vstack(out)

    def integrate_children(c):
        kids = split(c)
        vals = rule(kids)
        n = c.shape[0]
        fine = vals.reshape(4, n, -1).sum(axis=0)
        return fine, rule(c)

    return _refine_loop(cells, integrate_children, split, config, 2)


def star_rule(f, pole, R, config=QuadratureConfig(), theta0=0.0, n_theta=8, n_u=2, u_breaks=()):
    """Nodes and weights of the adaptive rule that :func:`integrate_star` builds for ``f``.

    The rule can be reused for integrands with the same singular structure.

    Returns
    -------
    points : ndarray of shape (N, 2)
    weights : ndarray of shape (N,)
    """
    pole = np.asarray(pole, dtype=float)
    res = integrate_star(f, pole, R, config, theta0, n_theta, n_u, u_breaks)
    _, nodes, split = _star_parts(pole, R, config, theta0, n_theta, n_u, u_breaks)
    P, jac = nodes(split(res.cells))
    return P, jac.ravel()


def integrate_disk(f, center, radius, config=QuadratureConfig(), singular_points=(), theta0=0.0,
                   rho_breaks=()):
    """Integral over the disk ``B_radius(center)`` in the plane or a 1-d interval.

    With ``polar_mode`` the pole is placed at the first declared singular
    point lying strictly inside the disk.  ``rho_breaks`` lists radii (as
    fractions of ``radius``) where the integrand has a kink; they are only
    honored with the pole at the center.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size == 1:
        c = float(center[0])
        bps = [float(np.atleast_1d(p)[0]) for p in singular_points]
        bps += [c + s * radius * b for b in rho_breaks for s in (-1, 1)]
        return integrate_interval(lambda X: f(X[:, None]), c - radius, c + radius, config, bps)
    if center.size != 2:
        raise SpecError("disk quadrature is implemented for dimensions 1 and 2")
    pole = center
    if config.polar_mode:
        for p in singular_points:
            p = np.asarray(p, dtype=float)
            if np.linalg.norm(p - center) < radius * (1 - 1e-9):
                pole = p
                break
    breaks = rho_breaks if pole is center else ()
    return integrate_star(f, pole, disk_radius_function(pole, center, radius), config, theta0,
                          u_breaks=breaks)


def _graded_corner(lo, hi, corner, x, w, depth):
    """Composite rule on a rectangle, refined geometrically toward one of its corners."""
    lo, hi, corner = (np.asarray(v, dtype=float) for v in (lo, hi, corner))
    m = lo.size
    pts, wts = [], []
    for _ in range(depth):
        mid = 0.5 * (lo + hi)
        for choice in np.ndindex(*(2,) * m):
            a = np.where(np.array(choice) == 0, lo, mid)
            b = np.where(np.array(choice) == 0, mid, hi)
            if np.all((a <= corner) & (corner <= b)):
                nxt = (a, b)
                continue
            P, W = _box_gl(a, b, x, w)
            pts.append(P)
            wts.append(W)
        lo, hi = nxt
    return pts, wts


def _box_gl(a, b, x, w):
    axes = [a[i] + (b[i] - a[i]) * x for i in range(a.size)]
    wax = [(b[i] - a[i]) * w for i in range(a.size)]
    P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, a.size)
    W = np.prod(np.stack(np.meshgrid(*wax, indexing="ij"), axis=-1).reshape(-1, a.size), axis=1)
    return P, W


def tensor_rule(lo, hi, breaks=None, order=8, singular_points=(), grading_depth=30):
    """Composite Gauss-Legendre rule on an axis-parallel box.

    Parameters
    ----------
    lo, hi : array-like of shape (m,)
    breaks : sequence of arrays, optional
        Per-axis interior break points; the box is tiled by the product grid.
    singular_points : sequence of points
        Points where the integrand is only Hoelder continuous.  They are
        added to the breaks, and every tile having one as a corner is graded
        geometrically toward it over ``grading_depth`` levels (the innermost
        tile is dropped).

    Returns
    -------
    points : ndarray of shape (N, m)
    weights : ndarray of shape (N,)
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    m = lo.size
    x, w = _gl(order)
    sing = [np.atleast_1d(np.asarray(p, dtype=float)) for p in singular_points]
    sing = [p for p in sing if np.all((lo <= p) & (p <= hi))]
    grids = []
    for i in range(m):
        b = [] if breaks is None else list(np.asarray(breaks[i], dtype=float).ravel())
        b += [p[i] for p in sing]
        b = np.unique(np.concatenate([[lo[i]], [v for v in b if lo[i] < v < hi[i]], [hi[i]]]))
        grids.append(b)
    pts, wts = [], []
    for idx in np.ndindex(*[g.size - 1 for g in grids]):
        a = np.array([grids[i][j] for i, j in enumerate(idx)])
        b = np.array([grids[i][j + 1] for i, j in enumerate(idx)])
        corner = next((p for p in sing
                       if np.all((np.isclose(p, a, rtol=0, atol=1e-15 * (1 + abs(p))))
                                 | np.isclose(p, b, rtol=0, atol=1e-15 * (1 + abs(p))))), None)
        if corner is None:
            P, W = _box_gl(a, b, x, w)
            pts.append(P)
            wts.append(W)
        else:
            P, W = _graded_corner(a, b, corner, x, w, grading_depth)
            pts += P
            wts += W
    return np.vstack(pts), np.concatenate(wts)
