"""Explicit almost-minimizing multigraphs with large flat singular sets.

* :class:`GraphFamily`: ``Q`` ordered sheets ``f_i = i eta / (4 Q L)`` over
  R^m, where ``eta`` is the regularized power distance to
  ``E = K u {dist(., K) >= 1}`` and ``L`` bounds ``Lip(eta)``.  All sheets
  vanish on E, so every point of K is a flat singular point of multiplicity Q.
* :class:`BranchedFamily`: in R^4 = C^2, a rescaled copy of the branched
  variety ``{w^Q = z^(Qk+1)}`` cut off by a smooth radial profile is placed in
  every Whitney cube of the complement of K, producing a branch point at each
  cube center.
* :func:`mass_ratio_example`: a two-sheet graph family over the complement
  of a truncated union of balls around dyadic rational points, whose flat
  singular part carries almost all of the mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from sklearn.utils import check_random_state

from ._sampling import ball_samples, polar_grid, sampled_holder
from ._validation import check_int, check_points, check_real
from .currents import (ExcessResult, GraphSheet, MultiGraph, QuadratureConfig,
                       affine_competitor_mass, excess, excess_density, unit_ball_volume, _meets_ball)
from .exceptions import (DegenerateEta, DomainMismatch, InsufficientSamples, KappaSearchFailure,
                         SpecError, TrackingLoss)
from .quadrature import disk_radius_function, integrate_disk, integrate_star, star_rule
from .regdist import RegularizedDistance, lip_upper_bound, whitney_rule
from .sets import (BallComplementTruncated, Inflation, UnitDiskComplement, build_oracle,
                   rational_truncation, spec_dim, spec_from_dict, spec_to_dict)
from .whitney import WhitneyDecomposition

__all__ = [
    "GraphFamily", "BranchedFamily", "SingleSheetFamily", "BallResult", "build_graph_family",
    "build_branched_family", "build_single_sheet", "power_sheet", "check_pairwise_condition",
    "check_tangential_implies_condition", "eval_branched", "classify_ball", "monodromy",
    "blowup_flatness", "mass_ratio_example", "lens_area", "graph_alpha", "branched_alpha",
    "FlatFamily", "family_from_metadata",
]


def graph_alpha(k, alpha_star):
    """Hoelder exponent ``(k + a* - 1) / (k + a*)`` of the graph family."""
    return (k + alpha_star - 1.0) / (k + alpha_star)


def branched_alpha(Q, k):
    """Hoelder exponent ``(Qk + 1 - Q) / (Qk + 1)`` of the branched family."""
    return (Q * k + 1.0 - Q) / (Q * k + 1.0)


def _square_box(lo, hi, margin=0.0, quantum=0.25):
    """A square box containing ``[lo, hi]`` grown by ``margin``, side rounded up."""
    lo = np.asarray(lo, dtype=float) - margin
    hi = np.asarray(hi, dtype=float) + margin
    side = float(np.max(hi - lo))
    side = quantum * np.ceil(side / quantum - 1e-12)
    mid = 0.5 * (lo + hi)
    return tuple((mid - 0.5 * side).tolist()), tuple((mid + 0.5 * side).tolist())


def _eta_jet(eta, Y):
    """Values and gradients of eta, taken as 0 outside the Whitney box."""
    Y = np.asarray(Y, dtype=float)
    n, m = Y.shape
    val = np.zeros(n)
    grad = np.zeros((n, m))
    w = eta.decomposition_
    if eta.degenerate_:
        return val, grad
    inside = np.all((Y >= w.lo_) & (Y <= w.hi_), axis=1)
    if np.any(inside):
        d = eta.derivatives(Y[inside], 1)
        val[inside] = d[(0,) * m]
        for j in range(m):
            grad[inside, j] = d[tuple(int(i == j) for i in range(m))]
    return val, grad


@dataclass
class BallResult:
    """Per-ball output of an excess computation."""

    center: np.ndarray
    r: float
    case: str
    q: int
    mass: float
    excess: float
    dirichlet: float
    competitor_gap: Optional[float]
    cylinder_mass: float
    error: float
    plane_tilt: float = 0.0
    sheets: Optional[MultiGraph] = field(default=None, repr=False)
    disk_center: Optional[np.ndarray] = field(default=None, repr=False)


def _ball_result(x0, r, case, res, competitor, s=0.25, config=None):
    gap = None
    if competitor and res.q > 0:
        c = res.plane.project(x0)[0][0]
        gap = affine_competitor_mass(res.sheets, c, r, s, config)["gap"]
    tilt = float(np.linalg.norm(res.plane.linear_map(), 2))
    return BallResult(np.asarray(x0, dtype=float), float(r), case, res.q, res.mass, res.excess,
                      res.dirichlet, gap, res.mass, res.error, tilt, res.sheets,
                      res.plane.project(x0)[0][0])


# ---------------------------------------------------------------------------
# graph family


class GraphFamily:
    """Ordered sheets ``f_i = i eta / (4 Q L)``, ``i = 1..Q``.

    Attributes
    ----------
    Q, k, alpha_star : int, int, float
    alpha : float
        ``(k + alpha_star - 1) / (k + alpha_star)``.
    K : set spec
    eta : RegularizedDistance
        Fitted on ``E = K u {dist(., K) >= 1}``.
    lipbound : float
        ``L``, an upper bound for ``Lip(eta)``.
    scale : float
        ``4 Q L``; sheet ``i`` is ``i eta / scale``.
    """

    kind = "graphs"

    def __init__(self, K, Q, k, alpha_star, J, eta, lipbound, box, scale=None, E=None):
        self.K, self.Q, self.k, self.alpha_star, self.J = K, Q, k, alpha_star, J
        self.alpha = graph_alpha(k, alpha_star)
        self.eta = eta
        self.lipbound = float(lipbound)
        self.scale = 4.0 * Q * self.lipbound if scale is None else float(scale)
        self.box = box
        self.E = E
        self.m = eta.dim_
        self.n = 1
        self.multigraph = MultiGraph(self._evaluate, Q, self.m, 1, lip=Q / self.scale *
                                     self.lipbound)
        self.measured = {}

    def _evaluate(self, Y):
        val, grad = _eta_jet(self.eta, Y)
        i = np.arange(1, self.Q + 1, dtype=float) / self.scale
        vals = val[:, None, None] * i[None, :, None]
        jacs = grad[:, None, None, :] * i[None, :, None, None]
        return vals, jacs

    def sheet(self, i):
        """Sheet ``f_i`` (1-based) as a :class:`GraphSheet`."""
        if not 1 <= i <= self.Q:
            raise SpecError("sheet index out of range")
        c = i / self.scale

        def fn(Y):
            v, g = _eta_jet(self.eta, Y)
            return c * v[:, None], c * g[:, None, :]

        return GraphSheet(fn, self.m, 1, lip=c * self.lipbound)

    def sheets(self):
        return [self.sheet(i) for i in range(1, self.Q + 1)]

    def evaluate(self, Y):
        return self.multigraph.evaluate(Y)

    # -- invariants --------------------------------------------------------

    def sample_points(self, n, random_state=0, resolved=True):
        return self.eta.sample_points(n, random_state, resolved=resolved)

    def check_invariants(self, n_samples=10000, random_state=0):
        """Sampled Lipschitz bound, ordering and vanishing on E."""
        rng = check_random_state(random_state)
        w = self.eta.decomposition_
        X = np.vstack([self.sample_points(n_samples, rng, resolved=False),
                       w.lo_ + rng.uniform(size=(n_samples, self.m)) * (w.hi_ - w.lo_)])
        v, J = self.evaluate(X)
        lip = float(np.max(np.linalg.norm(J[:, :, 0, :], axis=2)))
        ordered = bool(np.all(np.diff(v[:, :, 0], axis=1) >= 0))
        members = self.eta.oracle_.members
        members = members[np.all((members >= w.lo_) & (members <= w.hi_), axis=1)]
        on_E = members[self.eta.oracle_(members) <= 0] if members.size else members
        zero_on_E = bool(on_E.shape[0] == 0 or np.all(self.evaluate(on_E)[0] == 0))
        out = {"max_lip": lip, "lip_ok": lip <= 0.25 + 1e-6, "ordered": ordered,
               "zero_on_E": zero_on_E}
        self.measured.update(max_lip=lip)
        return out

    def singular_witness(self, x, delta):
        """A point within ``delta`` of ``x`` where the sheets are distinct, or None."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        P = np.vstack([polar_grid(x, delta, 12, 24), ball_samples(x, delta, 500, 0)])
        w = self.eta.decomposition_
        P = P[np.all((P >= w.lo_) & (P <= w.hi_), axis=1)]
        v, _ = _eta_jet(self.eta, P)
        hit = np.flatnonzero(v > 0)
        return None if hit.size == 0 else P[hit[0]]

    # -- balls -------------------------------------------------------------

    def ball_center(self, c, sheet=1):
        """The point of ``gr(f_sheet)`` above ``c``."""
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return np.concatenate([c, self.sheet(sheet).value(c[None])[0]])

    def ball_excess(self, x0, r, config=QuadratureConfig(), competitor=True, collar=0.25):
        """Excess over the tangent plane of the lowest sheet meeting ``B_r(x0)``."""
        x0 = np.asarray(x0, dtype=float)
        c = x0[:self.m]
        v, J = self.evaluate(c[None])
        gaps = np.abs(v[0, :, 0] - x0[self.m])
        # lowest sheet within reach of the ball (its graph meets B_r(x0) near c)
        cand = np.flatnonzero(gaps < r)
        i1 = int(cand[0]) if cand.size else int(np.argmin(gaps))
        A = J[0, i1]
        lipmax = 0.25
        res = excess(self.multigraph, x0, r, plane=A if np.any(A != 0) else None, config=config,
                     delta=0.5, sigma=0.5 * (1.0 + lipmax), Lambda=2.0 * lipmax)
        return _ball_result(x0, r, "graph", res, competitor, collar, config)

    def metadata(self):
        return {"kind": self.kind, "Q": self.Q, "k": self.k, "alpha_star": self.alpha_star,
                "alpha": self.alpha, "J": self.J, "lipbound": self.lipbound,
                "scale": self.scale, "box": [list(self.box[0]), list(self.box[1])],
                "threshold": float(self.E.threshold) if self.E is not None else 1.0,
                "set": spec_to_dict(self.K) if self.K is not None else None,
                "measured": dict(sorted(self.measured.items()))}


def build_graph_family(K, Q=2, k=1, alpha_star=1.0, J=10, box=None, *, threshold=1.0,
                       allow_single=False, lip_kwargs=None):
    """Build the ordered graph family over the closed set ``K``.

    Parameters
    ----------
    K : set spec
        Closed set with empty interior in R^m (finite points, Cantor products
        or unions of them).
    Q : int
        Number of sheets, at least 2 (1 with ``allow_single``).
    k, alpha_star : int, float
        Regularity ``C^{k, alpha_star}`` of the sheets.
    J : int
        Finest Whitney level.
    box : (lo, hi) or None
        Whitney box; must contain ``{dist(., K) < threshold}``.

    Raises
    ------
    DegenerateEta
        If eta vanishes identically on the box.
    """
    Q = check_int(Q, "Q", min_value=1 if allow_single else 2)
    k = check_int(k, "k", min_value=1)
    alpha_star = check_real(alpha_star, "alpha_star", low=0.0, high=1.0, low_open=True)
    E = Inflation(K, threshold)
    oracle = build_oracle(E)
    if box is None:
        hint = oracle.bounding_hint
        if hint is None:
            raise SpecError("a box is required for sets without a bounding hint")
        box = _square_box(hint[0], hint[1], margin=0.125)
    eta = RegularizedDistance(k, alpha_star, box, J).fit(oracle)
    if eta.degenerate_:
        raise DegenerateEta("E covers the whole box; there are no sheets to build")
    L = lip_upper_bound(eta, **(lip_kwargs or {}))
    if L <= 0:
        raise DegenerateEta("eta has zero Lipschitz bound")
    return GraphFamily(K, Q, k, alpha_star, J, eta, L, box, E=E)


class SingleSheetFamily:
    """A single ``C^{1, alpha}`` sheet, the ``Q = 1`` baseline."""

    kind = "single-sheet"

    def __init__(self, sheet: GraphSheet, alpha, meta=None):
        self.sheet_ = sheet
        self.alpha = float(alpha)
        self.Q = 1
        self.m, self.n = sheet.m, sheet.n
        self.multigraph = MultiGraph.from_sheets([sheet])
        self.meta = dict(meta or {})

    def sheets(self):
        return [self.sheet_]

    def ball_center(self, c, sheet=1):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return np.concatenate([c, self.sheet_.value(c[None])[0]])

    def ball_excess(self, x0, r, config=QuadratureConfig(), competitor=True, collar=0.25):
        x0 = np.asarray(x0, dtype=float)
        A = self.sheet_.jacobian(x0[None, :self.m])[0]
        lip = self.sheet_.lip if self.sheet_.lip is not None else 0.25
        res = excess(self.multigraph, x0, r, plane=A if np.any(A != 0) else None,
                     config=config, delta=0.5, sigma=0.5 * (1 + lip), Lambda=2 * lip,
                     all_sheets=True)
        return _ball_result(x0, r, "graph", res, competitor, collar, config)

    def metadata(self):
        return {"kind": self.kind, "Q": 1, "alpha": self.alpha, **self.meta}


class FlatFamily:
    """``Q`` coinciding constant sheets: the flat multiplicity-``Q`` plane."""

    kind = "flat"

    def __init__(self, Q=2, m=2, height=0.0):
        self.Q = check_int(Q, "Q", min_value=1)
        self.m, self.n = m, 1
        self.alpha = 1.0
        self.height = float(height)
        sheet = GraphSheet.constant(m, 1, self.height)
        self.multigraph = MultiGraph.from_sheets([sheet] * self.Q)

    def ball_center(self, c, sheet=1):
        return np.concatenate([np.atleast_1d(np.asarray(c, dtype=float)), [self.height]])

    def ball_excess(self, x0, r, config=QuadratureConfig(), competitor=True, collar=0.25):
        res = excess(self.multigraph, np.asarray(x0, dtype=float), r, None, config,
                     all_sheets=True)
        return _ball_result(x0, r, "flat", res, competitor, collar, config)

    def metadata(self):
        return {"kind": self.kind, "Q": self.Q, "m": self.m, "height": self.height}


def power_sheet(m=2, alpha=0.5, c=0.1, center=None):
    """``f(x) = c |x - x_c|^(1 + alpha)``, a ``C^{1, alpha}`` sheet.

    Its gradient ``c (1 + alpha) |x|^(alpha - 1) x`` has Hoelder exponent
    exactly ``alpha`` at the center.
    """
    center = np.zeros(m) if center is None else np.asarray(center, dtype=float)

    def fn(Y):
        D = Y - center
        rho = np.linalg.norm(D, axis=1)
        val = c * rho ** (1 + alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(rho[:, None] > 0, c * (1 + alpha) * rho[:, None] ** (alpha - 1) * D, 0.0)
        return val[:, None], g[:, None, :]

    # Lipschitz bound on the unit ball around the center
    return GraphSheet(fn, m, 1, lip=c * (1 + alpha))


def build_single_sheet(K=None, k=1, alpha_star=1.0, J=10, box=None, *, m=2, alpha=0.5, c=0.1):
    """The single-sheet baseline: an eta sheet over ``K`` or a power sheet."""
    if K is None:
        return SingleSheetFamily(power_sheet(m, alpha, c), alpha,
                                 {"sheet": "power", "m": m, "c": c})
    fam = build_graph_family(K, 1, k, alpha_star, J, box, allow_single=True)
    s = fam.sheet(1)
    meta = fam.metadata()
    meta["kind"] = "single-sheet"
    return SingleSheetFamily(s, fam.alpha, meta)


# ---------------------------------------------------------------------------
# pairwise conditions


def check_pairwise_condition(family: GraphFamily, n_samples=10000, random_state=0,
                             min_samples=1000):
    """Measured ``C4 = max |Df_i - Df_j| / |f_i - f_j|^alpha`` over samples off E."""
    X = family.sample_points(n_samples, random_state, resolved=True)
    v, J = family.evaluate(X)
    keep = v[:, 0, 0] > 0
    if keep.sum() < min_samples:
        raise InsufficientSamples(f"only {int(keep.sum())} samples off E")
    v, J = v[keep, :, 0], J[keep, :, 0, :]
    C4 = 0.0
    for i in range(family.Q):
        for j in range(i + 1, family.Q):
            num = np.linalg.norm(J[:, i] - J[:, j], axis=1)
            den = np.abs(v[:, i] - v[:, j]) ** family.alpha
            C4 = max(C4, float(np.max(num / den)))
    family.measured["C4"] = C4
    return {"C4": C4, "n_used": int(keep.sum())}


def check_tangential_implies_condition(sheets, alpha_star, center, radius, *, n_samples=4000,
                                       random_state=0, n_pairs=2000, rtol=1e-9):
    """Check ``|Dg| <= 2 max(1, [Dg]_{alpha*}) |g|^(alpha*/(1+alpha*))`` for ``g = f_j - f_i``.

    Parameters
    ----------
    sheets : sequence of GraphSheet
        Scalar sheets, expected ordered ``f_1 <= ... <= f_Q``.
    center, radius : ball on which samples and seminorms are taken.

    Returns
    -------
    dict
        ``passed``, the constant ``C4 = 2 max(1, max [Df_i - Df_j]_{alpha*})``,
        the worst ratio lhs/rhs and a witness point with its pair.
    """
    rng = check_random_state(random_state)
    center = np.atleast_1d(np.asarray(center, dtype=float))
    X = np.vstack([polar_grid(center, radius, 32, 64), ball_samples(center, radius, n_samples,
                                                                    rng)])
    if X.shape[0] < 100:
        raise InsufficientSamples("too few samples")
    expo = alpha_star / (1.0 + alpha_star)
    evals = [s.evaluate(X) for s in sheets]
    worst, witness, pair = 0.0, None, None
    seminorms = []
    passed = True
    for i in range(len(sheets)):
        for j in range(i + 1, len(sheets)):
            fi, fj = sheets[i], sheets[j]

            def grad_g(P, fi=fi, fj=fj):
                return fj.jacobian(P) - fi.jacobian(P)

            h = sampled_holder(grad_g, center, radius, alpha_star, n_pairs=n_pairs,
                               random_state=rng)
            seminorms.append(h)
            Cg = 2.0 * max(1.0, h)
            g = evals[j][0][:, 0] - evals[i][0][:, 0]
            dg = np.linalg.norm(evals[j][1][:, 0] - evals[i][1][:, 0], axis=1)
            rhs = Cg * np.abs(g) ** expo
            bad = dg > rhs * (1 + rtol) + 1e-14
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(rhs > 0, dg / rhs, np.where(dg > 1e-14, np.inf, 0.0))
            a = int(np.argmax(ratio))
            if ratio[a] > worst or witness is None:
                worst, witness, pair = float(ratio[a]), X[a], (i + 1, j + 1)
            if np.any(bad):
                passed = False
    C4 = 2.0 * max(1.0, max(seminorms, default=0.0))
    return {"passed": passed, "C4": C4, "worst_ratio": worst, "witness": witness, "pair": pair,
            "seminorms": seminorms}


# ---------------------------------------------------------------------------
# branched family


class BranchedFamily:
    """Rescaled branched patches in the Whitney cubes of the complement of K.

    On the patch ``B_{r_l}(z_l)`` the ``Q`` values are

        kappa r_l^p eta(u) u^p exp(2 pi i j / Q),   u = (z - z_l) / r_l,

    with ``p = (Qk + 1) / Q`` and ``eta`` the regularized distance to the
    complement of ``B_{1/2}(0)`` with exponent ``k + 1/Q``.  Complex numbers
    are pairs (real, imaginary); the argument of ``u`` ranges over
    ``[theta_cut, theta_cut + 2 pi)`` with ``theta_cut = 0`` (cut along
    ``[z_l, z_l + r_l]``) unless a different cut is requested per patch.
    """

    kind = "branched"

    def __init__(self, K, Q, k, J, whitney, eta, kappa, box, kappa_report=None):
        self.K, self.Q, self.k, self.J = K, Q, k, J
        self.p = (Q * k + 1.0) / Q
        self.alpha = branched_alpha(Q, k)
        self.whitney = whitney
        self.eta = eta
        self.kappa = float(kappa)
        self.box = box
        self.m, self.n = 2, 2
        keep = whitney.sides_ <= 1.0
        self.patch_ids = np.flatnonzero(keep)
        self.centers = whitney.centers_[keep]
        self.radii = whitney.sides_[keep] / 4.0
        self._patch_of_cube = np.full(whitney.n_cubes_, -1, dtype=np.int64)
        self._patch_of_cube[self.patch_ids] = np.arange(self.patch_ids.size)
        self._tree = cKDTree(self.centers) if self.centers.shape[0] else None
        self.kappa_report = dict(kappa_report or {})
        self.measured = {}
        self._rules = {}
        self.multigraph = self.view()

    @property
    def n_patches(self):
        return int(self.centers.shape[0])

    # -- evaluation --------------------------------------------------------

    def _patch_lookup(self, Y):
        """Patch index for each point inside some patch support, else -1."""
        w = self.whitney
        out = np.full(Y.shape[0], -1, dtype=np.int64)
        inside = np.all((Y >= w.lo_) & (Y <= w.hi_), axis=1)
        idx = np.flatnonzero(inside)
        if idx.size == 0:
            return out
        p, c = w.hits(Y[idx], 1.0)
        pl = self._patch_of_cube[c]
        ok = pl >= 0
        p, pl = p[ok], pl[ok]
        d = np.linalg.norm(Y[idx[p]] - self.centers[pl], axis=1)
        ok = d < 0.5 * self.radii[pl]
        out[idx[p[ok]]] = pl[ok]
        return out

    def unit_patch(self, U, theta_cut=None):
        """Values ``(N, Q, 2)`` and u-Jacobians ``(N, Q, 2, 2)`` of ``eta(u) v_j(u)``."""
        U = np.atleast_2d(U)
        N = U.shape[0]
        Q, p = self.Q, self.p
        cut = np.zeros(N) if theta_cut is None else np.broadcast_to(theta_cut, (N,))
        val, grad = _eta_jet(self.eta, U)
        rho = np.linalg.norm(U, axis=1)
        th = np.mod(np.arctan2(U[:, 1], U[:, 0]) - cut, 2 * np.pi) + cut
        j = np.arange(Q)
        phase = p * th[:, None] + 2 * np.pi * j[None, :] / Q
        mag = rho ** p
        phi = mag[:, None] * np.exp(1j * phase)                  # u^p e^{2 pi i j/Q}
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi = np.where(rho[:, None] > 0,
                            p * rho[:, None] ** (p - 1) * np.exp(1j * (phase - th[:, None])),
                            0.0)
        h = val[:, None] * phi
        hx = grad[:, 0, None] * phi + val[:, None] * dphi
        hy = grad[:, 1, None] * phi + 1j * val[:, None] * dphi
        vals = np.stack([h.real, h.imag], axis=-1)
        jac = np.stack([np.stack([hx.real, hy.real], -1), np.stack([hx.imag, hy.imag], -1)], -2)
        return vals, jac

    def evaluate(self, Y, cut_angles=None):
        """Unordered values ``(N, Q, 2)`` and Jacobians ``(N, Q, 2, 2)``.

        ``cut_angles`` optionally maps patch index to the direction of its
        branch cut.
        """
        Y = check_points(Y, 2)
        N = Y.shape[0]
        vals = np.zeros((N, self.Q, 2))
        jacs = np.zeros((N, self.Q, 2, 2))
        pl = self._patch_lookup(Y)
        hit = np.flatnonzero(pl >= 0)
        if hit.size == 0:
            return vals, jacs
        ids = pl[hit]
        rl = self.radii[ids]
        U = (Y[hit] - self.centers[ids]) / rl[:, None]
        cut = None
        if cut_angles:
            cut = np.array([cut_angles.get(int(i), 0.0) for i in ids])
        v, J = self.unit_patch(U, cut)
        amp = self.kappa * rl ** self.p
        vals[hit] = amp[:, None, None] * v
        jacs[hit] = (amp / rl)[:, None, None, None] * J
        return vals, jacs

    def view(self, cut_angles=None, singular=()):
        """The family as a :class:`MultiGraph` with the given patch cuts."""
        cuts = dict(cut_angles or {})
        return MultiGraph(lambda Y: self.evaluate(Y, cuts), self.Q, 2, 2,
                          singular_points=list(singular), lip=0.25)

    def cut_segments(self, patches=None, cut_angles=None):
        """Slits ``[z_l, z_l + r_l e^{i theta_l}]`` of the given patches."""
        patches = range(self.n_patches) if patches is None else patches
        cuts = cut_angles or {}
        out = []
        for l in patches:
            th = cuts.get(int(l), 0.0)
            e = np.array([np.cos(th), np.sin(th)])
            out.append((self.centers[l], self.centers[l] + self.radii[l] * e))
        return out

    # -- structure ---------------------------------------------------------

    def index_sets(self, c, r):
        """``I = {l : z_l in B_2r(c)}`` and ``I* = {l : B_{r_l}(z_l) meets B_r(c)}``."""
        if self._tree is None:
            return [], []
        c = np.asarray(c, dtype=float)[:2]
        near = np.array(sorted(self._tree.query_ball_point(c, 2 * r + 0.25 + 1e-12)),
                        dtype=np.int64)
        if near.size == 0:
            return [], []
        d = np.linalg.norm(self.centers[near] - c, axis=1)
        I = near[d < 2 * r].tolist()
        Istar = near[d < self.radii[near] + r].tolist()
        return I, Istar

    def classify(self, x0, r):
        I, Istar = self.index_sets(np.asarray(x0)[:2], r)
        case = "c" if I else ("b" if Istar else "a")
        return case, I, Istar

    def ball_center(self, c, sheet=1):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return np.concatenate([c, self.evaluate(c[None])[0][0, sheet - 1]])

    def ball_excess(self, x0, r, config=QuadratureConfig(), competitor=True, collar=0.25):
        """Excess of the ball per the case split.

        Case a: the flat multiplicity-Q disk.  Case b: the patch cuts are
        turned away from the disk, making every label single valued on
        ``B_2r``, and the sheets are reparametrized over the tangent plane of
        the lowest meeting sheet.  Case c: excess over the base plane, all
        ``Q`` sheets counted; the competitor is not built (the labels jump
        across the slits).
        """
        x0 = np.asarray(x0, dtype=float)
        c = x0[:2]
        case, I, Istar = self.classify(x0, r)
        if case == "a":
            res = excess(self.view(), x0, r, None, config, all_sheets=True)
            return _ball_result(x0, r, "a", res, competitor, collar, config)
        if case == "c":
            G = self.view()
            meet = _meets_ball(G, c, x0[2:], r)
            if 0 < len(meet) < self.Q:
                raise DomainMismatch(
                    f"only {len(meet)} of {self.Q} labels meet the ball; labels are not global here")
            ex, dr, err = self.patch_integrals(c, r, Istar, config) if meet else (0.0, 0.0, 0.0)
            q = len(meet)
            res = ExcessResult(q, q * np.pi * r * r + ex, ex, dr, err, meet, G.plane, G)
            return _ball_result(x0, r, "c", res, False, collar, config)
        cuts = {}
        for l in Istar:
            d = self.centers[l] - c
            cuts[int(l)] = float(np.arctan2(d[1], d[0]))
        G = self.view(cuts)
        v, J = G.evaluate(c[None])
        gaps = np.linalg.norm(v[0] - x0[2:], axis=1)
        cand = np.flatnonzero(gaps < r)
        i1 = int(cand[0]) if cand.size else int(np.argmin(gaps))
        A = J[0, i1]
        plane = A if np.any(A != 0) else None
        res = excess(G, x0, r, plane, config, delta=0.5, sigma=0.625, Lambda=0.5)
        return _ball_result(x0, r, "b", res, competitor, collar, config)

    def _sheet_integrand(self, J):
        return np.stack([np.sum(excess_density(J), axis=1), np.sum(J ** 2, axis=(1, 2, 3))],
                        axis=1)

    def unit_rule(self, config=QuadratureConfig()):
        """Cube-aligned rules on ``B_{1/2}(0)`` for label-summed integrands of a unit patch.

        Returns a list of two ``(U, W, G)`` triples, the working rule and a
        lower-order rule whose gap serves as error estimate; ``G`` holds the
        traces and determinants of ``J^T J`` per label at the nodes.
        """
        fine = (6, 2) if config.target_rel_tol >= 1e-3 else (8, 4)
        if fine not in self._rules:
            out = []
            for order, splits in (fine, (fine[0] - 2, fine[1] // 2)):
                U, W = whitney_rule(self.eta, order=order, band_splits=splits,
                                    singular_points=[(0.0, 0.0)])
                G = np.concatenate([_gram_invariants(self.unit_patch(U[i:i + _CHUNK])[1])
                                    for i in range(0, U.shape[0], _CHUNK)])
                out.append((U, W, G, self._whole_patch_table(W, G)))
            self._rules[fine] = out
        return self._rules[fine]

    def _whole_patch_table(self, W, G, n_nodes=24):
        """Chebyshev interpolant of ``t2 -> W . density(G, t2)`` on ``[0, t2_max]``.

        The integrand is analytic in the squared scale ``t2``, so a few nodes
        reproduce the sum to round-off.
        """
        t2_max = (self.kappa * max(float(self.radii.max(initial=0.25)), 0.25) ** (self.p - 1)) ** 2
        nodes = 0.5 * t2_max * (1 - np.cos(np.pi * (np.arange(n_nodes) + 0.5) / n_nodes))
        vals = np.array([W @ _density_from_gram(G, t) for t in nodes])
        x = 2 * nodes / t2_max - 1
        coef = np.polynomial.chebyshev.chebfit(x, vals, n_nodes - 1)
        return lambda t2: np.polynomial.chebyshev.chebval(2 * np.asarray(t2) / t2_max - 1, coef).T

    def patch_integrals(self, c, r, patches, config=QuadratureConfig()):
        """Label-summed excess and Dirichlet energy over ``B_r(c)``, patch by patch.

        The supports ``B_{r_l/2}(z_l)`` are disjoint and the sheets vanish
        elsewhere, so each patch is integrated with the rescaled unit rule;
        for patches crossing the circle ``|z - c| = r`` only nodes inside the
        disk are kept.  The error is the gap between the two unit rules.

        Returns
        -------
        (excess, dirichlet, error) : tuple of float
        """
        c = np.asarray(c, dtype=float)[:2]
        rules = self.unit_rule(config)
        totals = np.zeros((len(rules), 2))
        patches = np.asarray(patches, dtype=np.int64)
        if patches.size == 0:
            return 0.0, 0.0, 0.0
        d = np.linalg.norm(self.centers[patches] - c, axis=1)
        rl = self.radii[patches]
        t2 = (self.kappa * rl ** (self.p - 1)) ** 2
        whole = d + 0.5 * rl <= r
        cross = ~whole & (d - 0.5 * rl < r)
        for i, (U, W, G, table) in enumerate(rules):
            if whole.any():
                totals[i] += np.sum((rl[whole] ** 2)[:, None] * table(t2[whole]), axis=0)
            for j in np.flatnonzero(cross):
                inside = np.linalg.norm(self.centers[patches[j]] + rl[j] * U - c, axis=1) < r
                totals[i] += rl[j] ** 2 * (W[inside] @ _density_from_gram(G[inside], t2[j]))
        return float(totals[0, 0]), float(totals[0, 1]), float(abs(totals[0, 0] - totals[1, 0]))

    def check_invariants(self, n_samples=10000, random_state=0):
        rng = check_random_state(random_state)
        if self.n_patches == 0:
            return {"max_grad": 0.0, "grad_ok": True, "disjoint": True}
        ids = rng.randint(0, self.n_patches, size=n_samples)
        Z = self.centers[ids] + ball_samples(np.zeros(2), 1.0, n_samples, rng) * (
            0.5 * self.radii[ids])[:, None]
        _, J = self.evaluate(Z)
        g = float(np.max(np.linalg.norm(J, ord=2, axis=(2, 3))))
        # supports B_{r_l/2}(z_l) lie inside the cubes, which do not overlap
        sides = self.whitney.sides_[self.patch_ids]
        disjoint = bool(np.all(0.5 * self.radii <= 0.5 * sides))
        self.measured["max_grad"] = g
        return {"max_grad": g, "grad_ok": g <= 0.25, "disjoint": disjoint}

    def metadata(self):
        return {"kind": self.kind, "Q": self.Q, "k": self.k, "alpha": self.alpha, "J": self.J,
                "kappa": self.kappa, "n_patches": self.n_patches,
                "eta_level": int(self.eta.max_level),
                "box": [list(self.box[0]), list(self.box[1])],
                "set": spec_to_dict(self.K) if self.K is not None else None,
                "kappa_report": self.kappa_report,
                "measured": dict(sorted(self.measured.items()))}


_CHUNK = 200000


def _gram_invariants(J):
    """``(trace, det)`` of ``J^T J`` per label for 2x2 Jacobians, shape ``(N, Q, 2)``."""
    G = np.einsum("nqij,nqik->nqjk", J, J)
    tr = G[..., 0, 0] + G[..., 1, 1]
    det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
    return np.stack([tr, det], axis=-1)


def _density_from_gram(g, t2):
    """Label sums of the excess density and of ``|t J|^2`` from unit Gram invariants."""
    tr, det = t2 * g[..., 0], t2 * t2 * g[..., 1]
    u = tr + det
    return np.stack([np.sum(u / (np.sqrt(1.0 + u) + 1.0), axis=1), np.sum(tr, axis=1)], axis=1)


def _unit_eta(Q, k, level):
    eta = RegularizedDistance(k, 1.0 / Q, ((-0.5, -0.5), (0.5, 0.5)), level)
    return eta.fit(UnitDiskComplement(2, 0.5))


def _kappa_search(fam_proto, scales=(0.25, 1 / 16, 1 / 64), n_samples=10000, margin=0.05,
                  random_state=0, n_bisect=50):
    """Largest kappa with ``|grad w| <= 1/4`` and ``kappa (r/2)^alpha <= 1/4`` (with margin)."""
    rng = check_random_state(random_state)
    U = np.vstack([polar_grid(np.zeros(2), 0.5, 40, 80), ball_samples(np.zeros(2), 0.5,
                                                                       n_samples, rng)])
    _, J = fam_proto.unit_patch(U)
    unit = float(np.max(np.linalg.norm(J, ord=2, axis=(2, 3))))
    normalized = {}
    a, p = fam_proto.alpha, fam_proto.p
    bound = 0.25 / (1 + margin)

    def grad_max(kappa, rho):
        # |grad w_l| = kappa r_l^(p-1) |grad (eta v)(u)|
        return kappa * rho ** (p - 1) * unit

    for rho in scales:
        normalized[repr(rho)] = grad_max(1.0, rho) / rho ** (p - 1)

    def ok(kappa):
        return all(grad_max(kappa, rho) <= bound and kappa * (rho / 2) ** a <= bound
                   for rho in scales)

    lo, hi = 0.0, 1.0
    if ok(hi):
        lo = hi
    else:
        for _ in range(n_bisect):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
    if not lo > 0:
        raise KappaSearchFailure("no positive kappa satisfies the gradient bound")
    vals = list(normalized.values())
    return lo, {"unit_grad_max": unit, "normalized_by_scale": normalized,
                "scale_spread": float(max(vals) / min(vals) - 1.0), "margin": margin,
                "n_samples": int(U.shape[0])}


def build_branched_family(K, Q=2, k=1, J=10, box=None, *, eta_level=6, random_state=0):
    """Build the branched family over the closed set ``K`` of the plane.

    Raises
    ------
    KappaSearchFailure
        If no positive scaling constant passes the sampled gradient bound.
    """
    Q = check_int(Q, "Q", min_value=2)
    k = check_int(k, "k", min_value=1)
    if spec_dim(K) != 2:
        raise SpecError("the branched family lives over a 2-plane")
    oracle = build_oracle(K)
    if box is None:
        hint = oracle.bounding_hint
        if hint is None:
            raise SpecError("a box is required for sets without a bounding hint")
        box = _square_box(hint[0], hint[1], margin=0.5)
    W = WhitneyDecomposition(box, J).fit(oracle)
    eta = _unit_eta(Q, k, eta_level)
    proto = BranchedFamily(K, Q, k, J, W, eta, 1.0, box)
    kappa, report = _kappa_search(proto, random_state=random_state)
    return BranchedFamily(K, Q, k, J, W, eta, kappa, box, report)


def eval_branched(family: BranchedFamily, z):
    """Unordered ``Q``-tuple of (value, Jacobian) at the points ``z``."""
    return family.evaluate(np.atleast_2d(z))


def classify_ball(family: BranchedFamily, x0, r):
    """Case label ``'a'``, ``'b'`` or ``'c'`` with the index sets ``I`` and ``I*``."""
    return family.classify(x0, r)


def monodromy(family: BranchedFamily, center, rho, n_steps=360, min_sep=1e-10):
    """Permutation of labels produced by continuation around ``|z - center| = rho``.

    Values are tracked by nearest-value matching; the returned list ``perm``
    maps the starting label ``j`` to the label whose value the continued
    branch ends on.
    """
    center = np.asarray(center, dtype=float)
    t = np.linspace(0.0, 2 * np.pi, n_steps + 1)
    # start half a step off the standard cut
    t = t + np.pi / n_steps
    P = center + rho * np.stack([np.cos(t), np.sin(t)], axis=1)
    V, _ = family.evaluate(P)
    cur = V[0].copy()
    labels = np.arange(family.Q)
    for s in range(1, n_steps + 1):
        new = V[s]
        D = np.linalg.norm(cur[:, None, :] - new[None, :, :], axis=2)
        sep = np.linalg.norm(new[:, None, :] - new[None, :, :], axis=2)
        sep = sep[~np.eye(family.Q, dtype=bool)]
        if sep.size and sep.min() < min_sep:
            raise TrackingLoss(f"branches closer than {min_sep:g} during continuation")
        match = np.argmin(D, axis=1)
        if np.unique(match).size != family.Q:
            raise TrackingLoss("ambiguous branch matching")
        cur = new[match]
    end = V[0]
    D = np.linalg.norm(cur[:, None, :] - end[None, :, :], axis=2)
    perm = np.argmin(D, axis=1)
    if np.unique(perm).size != family.Q:
        raise TrackingLoss("continued branches do not close up")
    return perm.tolist()


def blowup_flatness(family: BranchedFamily, x, radii, *, n_samples=400, random_state=0):
    """Heights ``h(r) = sup_{B_r(x)} max_j |g_j|`` and their log-log slope.

    Patches lying entirely inside ``B_r(x)`` contribute their exact maximum
    ``kappa r_l^p H``, where ``H`` is the sampled maximum of the unit patch;
    patches crossing the boundary are sampled.
    """
    rng = check_random_state(random_state)
    x = np.asarray(x, dtype=float)[:2]
    U = np.vstack([polar_grid(np.zeros(2), 0.5, 40, 80), ball_samples(np.zeros(2), 0.5, 4000,
                                                                       rng)])
    H = float(np.max(np.linalg.norm(family.unit_patch(U)[0], axis=2)))
    heights = []
    for r in radii:
        if family._tree is None:
            heights.append(0.0)
            continue
        near = np.array(family._tree.query_ball_point(x, r + 0.125), dtype=np.int64)
        h = 0.0
        if near.size:
            d = np.linalg.norm(family.centers[near] - x, axis=1)
            sup = 0.5 * family.radii[near]
            full = near[d + sup <= r]
            if full.size:
                h = max(h, float(family.kappa * H * np.max(family.radii[full] ** family.p)))
            part = near[(d - sup < r) & (d + sup > r)]
            for l in part:
                Z = family.centers[l] + ball_samples(np.zeros(2), 0.5 * family.radii[l],
                                                     n_samples, rng)
                Z = Z[np.linalg.norm(Z - x, axis=1) < r]
                if Z.shape[0]:
                    v, _ = family.evaluate(Z)
                    h = max(h, float(np.max(np.linalg.norm(v, axis=2))))
        heights.append(h)
    heights = np.array(heights)
    radii = np.asarray(radii, dtype=float)
    pos = heights > 0
    slope = intercept = None
    C = None
    if pos.sum() >= 2:
        slope, intercept = np.polyfit(np.log(radii[pos]), np.log(heights[pos]), 1)
        slope, intercept = float(slope), float(intercept)
        C = float(np.max(heights[pos] / radii[pos] ** family.p))
    return {"radii": radii.tolist(), "heights": heights.tolist(), "slope": slope,
            "intercept": intercept, "C": C, "exponent": family.p}


# ---------------------------------------------------------------------------
# mass ratio


def lens_area(d, r1, r2):
    """Area of the intersection of two disks with radii ``r1``, ``r2`` at distance ``d``."""
    d = float(d)
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return np.pi * min(r1, r2) ** 2
    a1 = r1 * r1 * np.arccos(np.clip((d * d + r1 * r1 - r2 * r2) / (2 * d * r1), -1, 1))
    a2 = r2 * r2 * np.arccos(np.clip((d * d + r2 * r2 - r1 * r1) / (2 * d * r2), -1, 1))
    k = 0.5 * np.sqrt(max((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2), 0.0))
    return float(a1 + a2 - k)


_REFERENCE_LIP = {}


def _reference_lip(k, alpha_star, J):
    """Lipschitz bound of eta for the single disk of radius 1/2 (fixed normalization)."""
    key = (k, alpha_star, J)
    if key not in _REFERENCE_LIP:
        eta = RegularizedDistance(k, alpha_star, ((-0.5, -0.5), (0.5, 0.5)), J)
        eta.fit(UnitDiskComplement(2, 0.5))
        _REFERENCE_LIP[key] = lip_upper_bound(eta)
    return _REFERENCE_LIP[key]


def mass_ratio_example(eps, N=64, r=1.0, x=(0.0, 0.0), *, k=1, alpha_star=1.0, J=10,
                       config=QuadratureConfig(target_rel_tol=1e-4, max_cells=200000),
                       ratio_tol=1e-6):
    """Share of the mass in ``C_r(x)`` carried by the flat singular set ``K_eps``.

    ``K_eps`` is the plane minus the first ``N`` balls ``B_{eps 2^-i}(x_i)``
    around dyadic rational points.  Two sheets ``f_i = i eta / (8 L)`` with a
    normalization ``L`` fixed independently of ``eps`` (the Lipschitz bound
    for a single disk of radius 1/2) vanish exactly on ``K_eps``.

    The numerator ``2 |K_eps n B_r(x)|`` uses exact lens areas; the
    denominator ``2 pi r^2 + sum of sheet excesses`` is integrated ball by
    ball (the sheets are supported in the balls).  Each ball's integral is
    accurate to ``target_rel_tol`` relative to itself or ``ratio_tol`` times
    the ball's area, whichever is looser.

    Returns
    -------
    dict with ``ratio``, ``numerator``, ``denominator``, ``sup_grad``,
    ``lower_bound`` and the truncation tail radius.
    """
    N = int(N)
    if N < 1:
        raise SpecError("at least one ball is needed (N >= 1)")
    spec = rational_truncation(eps, N, 2)
    x = np.asarray(x, dtype=float)
    centers = np.array(spec.centers)
    radii = np.array(spec.radii)
    meet = np.linalg.norm(centers - x, axis=1) < r + radii
    sub_c, sub_r = centers[meet], radii[meet]
    flat = np.pi * r * r
    hole = sum(lens_area(np.linalg.norm(c - x), r, rb) for c, rb in zip(sub_c, sub_r))
    numerator = 2.0 * (flat - hole)
    L = _reference_lip(k, alpha_star, J)
    scale = 8.0 * L
    total_excess = 0.0
    sup_grad = 0.0
    err = 0.0
    for c, rb in zip(sub_c, sub_r):
        box = (tuple((c - rb).tolist()), tuple((c + rb).tolist()))
        eta = RegularizedDistance(k, alpha_star, box, J)
        eta.fit(UnitDiskComplement(2, float(rb), tuple(c.tolist())))
        if eta.degenerate_:
            continue

        def dens(P, eta=eta):
            _, g = _eta_jet(eta, P)
            J1 = (g / scale)[:, None, :]
            return excess_density(J1) + excess_density(2 * J1)

        G = np.vstack([polar_grid(c, rb, 16, 32)])
        sup_grad = max(sup_grad, 2 * float(np.max(np.linalg.norm(_eta_jet(eta, G)[1], axis=1)))
                       / scale)
        cfg = replace(config, abs_tol=max(config.abs_tol, ratio_tol * np.pi * rb * rb))
        dc = np.linalg.norm(c - x)
        if dc + rb <= r:
            res = integrate_disk(dens, c, rb, cfg)
        else:
            # lens B_rb(c) n B_r(x), star shaped about a point inside both disks
            t = (dc - rb + min(r, dc + rb)) / 2.0
            pole = x + (c - x) * (t / dc) if dc > 0 else x
            R1 = disk_radius_function(pole, c, rb)
            R2 = disk_radius_function(pole, x, r)
            res = integrate_star(dens, pole, lambda th: np.minimum(R1(th), R2(th)), cfg)
        total_excess += float(res.value[0])
        err += res.error
    denominator = 2.0 * flat + total_excess
    lower = (1.0 - eps ** 2 / 3.0) / (1.0 + sup_grad ** 2)
    return {"eps": float(eps), "N": N, "r": float(r), "ratio": numerator / denominator,
            "numerator": numerator, "denominator": denominator, "excess": total_excess,
            "error": err, "sup_grad": sup_grad, "lower_bound": lower,
            "tail_radius": float(eps * 2.0 ** (-N - 1)), "normalization": L,
            "n_balls": int(meet.sum())}


def family_from_metadata(meta):
    """Rebuild a family from the dictionary returned by its ``metadata()``.

    Construction is deterministic, so the rebuilt family matches the
    original (same kappa, same patch enumeration, same Lipschitz bound).
    """
    kind = meta.get("kind")
    box = meta.get("box")
    box = (tuple(box[0]), tuple(box[1])) if box is not None else None
    if kind == "graphs":
        return build_graph_family(spec_from_dict(meta["set"]), meta["Q"], meta["k"],
                                  meta["alpha_star"], meta["J"], box,
                                  threshold=meta.get("threshold", 1.0))
    if kind == "branched":
        return build_branched_family(spec_from_dict(meta["set"]), meta["Q"], meta["k"],
                                     meta["J"], box, eta_level=meta.get("eta_level", 6))
    if kind == "single-sheet" and meta.get("sheet") == "power":
        return build_single_sheet(m=meta["m"], alpha=meta["alpha"], c=meta["c"])
    if kind == "flat":
        return FlatFamily(meta["Q"], meta["m"], meta["height"])
    raise SpecError(f"cannot rebuild a family of kind {kind!r} from metadata")
