"""Regularized power distance built from a Whitney decomposition.

For a closed set E with Whitney cubes ``L`` (center ``x_L``, side ``l(L)``),

    eta(x) = sum_L l(L)^s phi((x - x_L) / l(L)),      s = k + alpha_star,

with ``phi`` a tensor-product bump equal to 1 on ``[-0.5, 0.5]^m`` and
supported in ``[-0.6, 0.6]^m``.  Only cubes whose open 1.2-enlargement
contains ``x`` contribute, so the sum is finite and evaluated exactly.
Derivatives come from jet arithmetic through the 1-d profile.

The decomposition is truncated at a finest level.  The truncated sum is
still smooth, vanishes on E, and coincides with the full sum at points whose
distance to E exceeds :attr:`RegularizedDistance.resolved_threshold_`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state

from ._validation import check_int, check_points, check_real, multi_indices
from .exceptions import EmptyComplementError, InsufficientSamples, OrderError, UnresolvedRegion
from ._sampling import hill_climb
from .jets import bump_profile_derivatives
from .quadrature import tensor_rule
from .sets import build_oracle
from .whitney import WhitneyDecomposition

__all__ = ["BumpFunction", "RegularizedDistance", "comparability_scan", "holder_seminorm",
           "lip_upper_bound", "whitney_rule"]


class BumpFunction:
    """Tensor-product cutoff ``phi(u) = prod_i psi(u_i)``.

    Parameters
    ----------
    max_order : int
        Highest derivative order that will be requested.
    plateau, support : float
        ``psi = 1`` on ``[-plateau, plateau]`` and vanishes outside
        ``(-support, support)``.
    """

    def __init__(self, max_order=2, plateau=0.5, support=0.6):
        self.max_order = check_int(max_order, "max_order", min_value=0)
        self.plateau = plateau
        self.support = support

    def profile(self, t, order=None):
        order = self.max_order if order is None else order
        return bump_profile_derivatives(t, order, self.plateau, self.support)

    def tables(self, U, order=None):
        """Per-axis derivative tables, shape ``(m, order + 1, n)``."""
        U = np.atleast_2d(U)
        return np.stack([self.profile(U[:, i], order) for i in range(U.shape[1])])

    def __call__(self, U, beta=None):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        beta = (0,) * U.shape[1] if beta is None else tuple(beta)
        if sum(beta) > self.max_order:
            raise OrderError(f"derivative order {sum(beta)} exceeds {self.max_order}")
        T = self.tables(U, max(beta))
        out = np.ones(U.shape[0])
        for i, b in enumerate(beta):
            out = out * T[i, b]
        return out


class RegularizedDistance(BaseEstimator, TransformerMixin):
    """The function eta for a closed set, with exact derivatives.

    Parameters
    ----------
    k : int
        Smoothness order; derivatives up to ``k + 1`` are available.
    alpha_star : float in (0, 1]
    box, max_level, root_scale :
        Passed to :class:`~almostmin.whitney.WhitneyDecomposition`.
    strict : bool
        Raise :class:`UnresolvedRegion` for points of the unresolved collar
        instead of returning the truncated sum.
    exponent : float or None
        Override ``s = k + alpha_star`` (used for non-integer exponents such
        as ``k + 1/Q``).
    """

    def __init__(self, k=1, alpha_star=1.0, box=((-1.0,), (1.0,)), max_level=10,
                 root_scale=None, strict=False, exponent=None):
        self.k = k
        self.alpha_star = alpha_star
        self.box = box
        self.max_level = max_level
        self.root_scale = root_scale
        self.strict = strict
        self.exponent = exponent

    def fit(self, X, y=None):
        """Build the Whitney decomposition of the closed set ``X``.

        ``X`` may be a set spec, an oracle, or an already fitted
        :class:`WhitneyDecomposition`.
        """
        check_int(self.k, "k", min_value=1)
        check_real(self.alpha_star, "alpha_star", low=0.0, high=1.0, low_open=True)
        self.s_ = float(self.k + self.alpha_star if self.exponent is None else self.exponent)
        self.max_order_ = self.k + 1
        self.bump_ = BumpFunction(self.max_order_)
        if isinstance(X, WhitneyDecomposition):
            self.decomposition_ = X
            self.oracle_ = X.oracle_
            self.degenerate_ = False
        else:
            self.oracle_ = build_oracle(X)
            self.decomposition_ = WhitneyDecomposition(self.box, self.max_level, self.root_scale)
            try:
                self.decomposition_.fit(self.oracle_)
                self.degenerate_ = False
            except EmptyComplementError:
                self.degenerate_ = True
        if not self.degenerate_:
            w = self.decomposition_
            finest = w.root_scale_ * 2.0 ** (-w.max_level)
            self.resolved_threshold_ = 3.0 * np.sqrt(w.dim_) * finest + self.oracle_.accuracy
        else:
            self.resolved_threshold_ = 0.0
        self.dim_ = self.oracle_.dim
        return self

    # -- evaluation --------------------------------------------------------

    def _check(self, X):
        X = check_points(X, self.dim_)
        if self.strict and not self.degenerate_:
            bad = self.decomposition_.in_unresolved(X)
            if np.any(bad):
                d = self.oracle_(X[bad])
                if np.any(d > 0):
                    raise UnresolvedRegion("point lies in the unresolved collar around E")
        return X

    def derivatives(self, X, order=None):
        """All partial derivatives up to ``order`` at ``X``.

        Returns a dict mapping multi-indices to arrays of length ``len(X)``.
        """
        order = self.max_order_ if order is None else order
        if order > self.max_order_:
            raise OrderError(f"derivative order {order} exceeds k + 1 = {self.max_order_}")
        X = self._check(X)
        n, m = X.shape
        betas = [b for o in range(order + 1) for b in multi_indices(m, o)]
        if self.degenerate_:
            return {b: np.zeros(n) for b in betas}
        w = self.decomposition_
        p, c = w.hits(X, 1.2, open_=True, dist=self.oracle_(X))
        side = w.sides_[c]
        U = (X[p] - w.centers_[c]) / side[:, None]
        T = self.bump_.tables(U, order)
        out = {}
        for b in betas:
            term = side ** (self.s_ - sum(b))
            for i, bi in enumerate(b):
                term = term * T[i, bi]
            out[b] = np.bincount(p, weights=term, minlength=n)
        return out

    def transform(self, X):
        """Values of eta at ``X``."""
        return self.derivatives(X, 0)[(0,) * self.dim_]

    def derivative(self, X, beta):
        beta = tuple(int(b) for b in beta)
        if len(beta) != self.dim_:
            raise OrderError("multi-index has the wrong length")
        if sum(beta) > self.max_order_:
            raise OrderError(f"derivative order {sum(beta)} exceeds k + 1 = {self.max_order_}")
        return self.derivatives(X, sum(beta))[beta]

    def gradient(self, X):
        d = self.derivatives(X, 1)
        m = self.dim_
        return np.stack([d[tuple(int(i == j) for i in range(m))] for j in range(m)], axis=1)

    def n_summands(self, X):
        X = check_points(X, self.dim_)
        if self.degenerate_:
            return np.zeros(X.shape[0], dtype=int)
        p, _ = self.decomposition_.hits(X, 1.2, open_=True)
        return np.bincount(p, minlength=X.shape[0])

    # -- sampling helpers --------------------------------------------------

    def sample_points(self, n, random_state=None, *, resolved=True):
        """Points in the box, half uniform and half uniform in random cubes.

        Sampling inside randomly chosen cubes spreads points evenly across
        dyadic scales, so neighborhoods of E are well represented.  With
        ``resolved`` only points at distance at least the resolved threshold
        from E are kept.
        """
        rng = check_random_state(random_state)
        w = self.decomposition_
        m = self.dim_
        n_box = n // 2
        Xa = w.lo_ + rng.uniform(size=(n_box, m)) * (w.hi_ - w.lo_)
        ids = rng.randint(0, w.n_cubes_, size=n - n_box)
        Xb = w.centers_[ids] + (rng.uniform(size=(ids.size, m)) - 0.5) * w.sides_[ids][:, None]
        X = np.vstack([Xa, Xb])
        if resolved:
            X = X[self.oracle_(X) >= self.resolved_threshold_]
        return X


def comparability_scan(eta, X=None, *, n_samples=10000, random_state=0, min_samples=1000):
    """Measured constants relating eta and its derivatives to powers of dist.

    Returns
    -------
    dict
        ``c_low = min eta / d^s``, ``c_high = max eta / d^s`` and
        ``c_beta[o] = max_{|beta| = o} |d^beta eta| / d^(s - o)`` for
        ``o = 0..k+1``, along with the number of samples used and skipped.
    """
    if X is None:
        X = eta.sample_points(n_samples, random_state, resolved=False)
    X = check_points(X, eta.dim_)
    d = eta.oracle_(X)
    keep = d >= max(eta.resolved_threshold_, 1e-300)
    if keep.sum() < min_samples:
        raise InsufficientSamples(f"only {int(keep.sum())} resolved samples")
    Xk, dk = X[keep], d[keep]
    ders = eta.derivatives(Xk)
    s = eta.s_
    ratio = ders[(0,) * eta.dim_] / dk ** s
    c_beta = {}
    for beta, v in ders.items():
        o = sum(beta)
        c_beta[o] = max(c_beta.get(o, 0.0), float(np.max(np.abs(v) / dk ** (s - o))))
    return {"c_low": float(ratio.min()), "c_high": float(ratio.max()), "c_beta": c_beta,
            "n_used": int(keep.sum()), "n_skipped": int((~keep).sum())}


def _pair_ratio(eta, X, Y, betas, alpha):
    order = sum(betas[0])
    dx = eta.derivatives(X, order)
    dy = eta.derivatives(Y, order)
    dist = np.linalg.norm(X - Y, axis=1)
    num = np.zeros(X.shape[0])
    for b in betas:
        num = np.maximum(num, np.abs(dx[b] - dy[b]))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(dist > 0, num / dist ** alpha, 0.0)


def sample_pairs(eta, n_pairs, random_state=0):
    """Stratified pairs: base points across scales, separations from 1e-2 d to 1e2 d.

    The ratio ``|x - y| / dist(x, E)`` is log-uniform, which covers pairs with
    both points close to E relative to their separation, both far, and mixed.
    """
    rng = check_random_state(random_state)
    w = eta.decomposition_
    X = eta.sample_points(2 * n_pairs, rng, resolved=False)[:n_pairs]
    d = np.maximum(eta.oracle_(X), w.root_scale_ * 2.0 ** (-w.max_level))
    r = d * 10.0 ** rng.uniform(-2, 2, size=X.shape[0])
    u = rng.normal(size=X.shape)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    Y = np.clip(X + r[:, None] * u, w.lo_, w.hi_)
    keep = np.linalg.norm(X - Y, axis=1) > 0
    return X[keep], Y[keep]


def holder_seminorm(eta, order=None, alpha=None, pairs=None, *, n_pairs=4000,
                    random_state=0, polish=16, polish_steps=60):
    """Sampled Hoelder seminorm of the order-``order`` derivatives of eta.

    The maximum over pairs of ``max_{|beta| = order} |d^beta eta(x) -
    d^beta eta(y)| / |x - y|^alpha`` is refined by a batched random hill
    climb started from the ``polish`` best pairs, which makes the estimate
    stable as the pair count grows.
    """
    order = eta.k if order is None else order
    alpha = eta.alpha_star if alpha is None else alpha
    if eta.degenerate_:
        return 0.0
    if order > eta.max_order_ - 1:
        raise OrderError("Hoelder seminorm is only available up to order k")
    betas = multi_indices(eta.dim_, order)
    if pairs is None:
        X, Y = sample_pairs(eta, n_pairs, random_state)
    else:
        X, Y = (check_points(P, eta.dim_) for P in pairs)
    if X.shape[0] < 10:
        raise InsufficientSamples("fewer than 10 admissible pairs")
    ratio = _pair_ratio(eta, X, Y, betas, alpha)
    if not polish:
        return float(ratio.max())
    w = eta.decomposition_
    top = np.argsort(ratio)[::-1][:polish]
    return float(max(ratio.max(), hill_climb(
        lambda A, B: _pair_ratio(eta, A, B, betas, alpha),
        X[top], Y[top], ratio[top], w.lo_, w.hi_, polish_steps, random_state)))


def lip_upper_bound(eta, *, safety=1.05, grid_size=None, n_samples=10000, random_state=0,
                    min_samples=100):
    """Upper bound for the Lipschitz constant of eta over the box.

    ``max(c_1 M^(s-1), max |grad eta| on a grid and samples) * safety`` where
    ``c_1`` is the measured first-order comparability constant and ``M`` the
    largest sampled distance to E.
    """
    if eta.degenerate_:
        return 0.0
    w = eta.decomposition_
    m = eta.dim_
    if grid_size is None:
        grid_size = {1: 20001, 2: 301}.get(m, 41)
    axes = [np.linspace(lo, hi, grid_size) for lo, hi in zip(w.lo_, w.hi_)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    S = eta.sample_points(n_samples, random_state, resolved=False)
    P = np.vstack([G, S])
    grad_max = float(np.max(np.linalg.norm(eta.gradient(P), axis=1)))
    d = eta.oracle_(P)
    keep = d >= max(eta.resolved_threshold_, 1e-300)
    if keep.sum() < min_samples:
        raise InsufficientSamples("too few resolved points for the Lipschitz bound")
    g = np.linalg.norm(eta.gradient(P[keep]), axis=1)
    c1 = float(np.max(g / d[keep] ** (eta.s_ - 1)))
    M = float(d.max())
    return max(c1 * M ** (eta.s_ - 1), grad_max) * safety


def whitney_rule(eta, *, order=8, band_splits=4, singular_points=(), banded_levels=None):
    """Quadrature rule for integrands built from eta, aligned with its cubes.

    Every accepted cube and every unresolved cell is tiled at the bump
    transition bands of the cubes touching it (each band split in
    ``band_splits`` pieces), so each tile sees a smooth integrand.  Outside
    these cells eta vanishes identically.  Cubes finer than
    ``banded_levels`` get a single tile, which is cheaper and adequate when
    their share of the integral is small.

    Returns
    -------
    points : ndarray of shape (N, m)
    weights : ndarray of shape (N,)
    """
    if eta.degenerate_:
        return np.zeros((0, eta.dim_)), np.zeros(0)
    w = eta.decomposition_
    m = w.dim_
    bump = eta.bump_
    offsets = bump.plateau + (bump.support - bump.plateau) * np.arange(band_splits + 1) / band_splits
    offsets = np.concatenate([-offsets, offsets])
    pairs = w.touching_pairs()
    nbrs = [[i] for i in range(w.n_cubes_)]
    for a, b in pairs:
        nbrs[a].append(b)
        nbrs[b].append(a)
    cells = [(w.centers_[i] - 0.5 * w.sides_[i], w.centers_[i] + 0.5 * w.sides_[i], nbrs[i])
             for i in range(w.n_cubes_)]
    banded = [banded_levels is None or w.levels_[i] <= banded_levels for i in range(w.n_cubes_)]
    if w.unresolved_indices_.shape[0]:
        side = w.root_scale_ * 2.0 ** (-w.max_level)
        corners = np.array(list(np.ndindex(*(2,) * m)), dtype=float)
        for idx in w.unresolved_indices_:
            lo = w.lo_ + idx * side
            # every accepted cube touching a finest cell contains one of its corners
            C = np.clip(lo + corners * side, w.lo_, w.hi_)
            _, c = w.hits(C, 1.0)
            if c.size:
                cells.append((lo, lo + side, np.unique(c).tolist()))
                banded.append(banded_levels is None or w.max_level <= banded_levels)
    pts, wts = [], []
    for (lo, hi, nb), band in zip(cells, banded):
        nb = np.asarray(nb)
        br = None
        if band:
            br = [np.unique(w.centers_[nb, i][:, None] + w.sides_[nb][:, None] * offsets[None, :])
                  for i in range(m)]
        P, W = tensor_rule(lo, hi, br, order, singular_points)
        pts.append(P)
        wts.append(W)
    return np.vstack(pts), np.concatenate(wts)
