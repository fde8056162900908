"""Closed sets presented as distance oracles.

A :class:`SetSpec` describes one of a handful of constructive closed sets;
:func:`build_oracle` turns it into a :class:`ClosedSetOracle`, a vectorized
distance function with a certified accuracy.  Oracles also carry a lower
bound on the distance to the complement (``interior_fn``) so that Whitney
construction can discard cells lying deep inside sets with interior.

Set records are read from TOML or JSON (see :func:`load_set_file`); each
record has a ``type`` and a ``params`` table::

    [[set]]
    name = "cloud"
    type = "finite_points"
    params = { points = [[0.0, 0.0], [0.25, 0.5]] }

    [[set]]
    type = "inflation"
    params = { threshold = 1.0, base = { type = "cantor_product", params = { depth = 10, dim = 2 } } }

Types: ``finite_points`` (points), ``cantor_product`` (ratio, depth, dim,
axis, origin, length), ``ball_complement`` (centers, radii,
filter_overlaps), ``unit_disk_complement`` (dim, radius, center),
``rational_truncation`` (eps, N, dim), ``union`` (members),
``inflation`` (base, threshold).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ._validation import check_int, check_points, check_real
from .exceptions import SpecError

__all__ = [
    "FinitePoints", "CantorProduct", "BallComplementTruncated", "UnitDiskComplement",
    "Union", "Inflation", "ClosedSetOracle", "build_oracle", "rational_truncation",
    "dyadic_rationals", "spec_from_dict", "spec_to_dict", "load_set_file",
]


# ---------------------------------------------------------------------------
# specifications


@dataclass(frozen=True)
class FinitePoints:
    points: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in np.atleast_1d(p)) for p in self.points)
        if not pts:
            raise SpecError("finite_points needs at least one point")
        if len({len(p) for p in pts}) != 1:
            raise SpecError("finite_points have inconsistent dimensions")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self):
        return len(self.points[0])


@dataclass(frozen=True)
class CantorProduct:
    """Middle-gap Cantor set on a segment of the ``axis`` line in R^dim."""

    ratio: float = 1.0 / 3.0
    depth: int = 10
    dim: int = 1
    axis: int = 0
    origin: float = 0.0
    length: float = 1.0

    def __post_init__(self):
        check_real(self.ratio, "ratio", low=0.0, high=0.5, low_open=True, high_open=True)
        check_int(self.depth, "depth", min_value=1)
        check_int(self.dim, "dim", min_value=1)
        if not 0 <= self.axis < self.dim:
            raise SpecError("cantor axis out of range")
        check_real(self.length, "length", low=0.0, low_open=True)

    def intervals(self):
        """Surviving closed intervals after ``depth`` removal steps."""
        lo = np.array([0.0])
        size = 1.0
        for _ in range(self.depth):
            nxt = size * self.ratio
            lo = np.concatenate([lo, lo + size - nxt])
            size = nxt
        lo = np.sort(lo) * self.length + self.origin
        return lo, lo + size * self.length

    @property
    def accuracy(self):
        return 0.5 * self.length * self.ratio ** self.depth


@dataclass(frozen=True)
class BallComplementTruncated:
    """R^dim minus a finite family of pairwise disjoint open balls."""

    centers: Tuple[Tuple[float, ...], ...]
    radii: Tuple[float, ...]
    filter_overlaps: bool = True

    def __post_init__(self):
        centers = tuple(tuple(float(c) for c in np.atleast_1d(p)) for p in self.centers)
        radii = tuple(float(r) for r in self.radii)
        if not centers or len(centers) != len(radii):
            raise SpecError("ball_complement needs matching non-empty centers and radii")
        if any(not r > 0 for r in radii):
            raise SpecError("ball radii must be positive")
        keep_c, keep_r = [], []
        for c, r in zip(centers, radii):
            clash = any(np.linalg.norm(np.subtract(c, c2)) < r + r2
                        for c2, r2 in zip(keep_c, keep_r))
            if clash:
                if not self.filter_overlaps:
                    raise SpecError("ball_complement balls overlap")
                continue
            keep_c.append(c)
            keep_r.append(r)
        object.__setattr__(self, "centers", tuple(keep_c))
        object.__setattr__(self, "radii", tuple(keep_r))

    @property
    def dim(self):
        return len(self.centers[0])


@dataclass(frozen=True)
class UnitDiskComplement:
    """R^dim minus the open ball B_radius(center); radius 1/2 by default."""

    dim: int = 2
    radius: float = 0.5
    center: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        check_int(self.dim, "dim", min_value=1)
        check_real(self.radius, "radius", low=0.0, low_open=True)


@dataclass(frozen=True)
class Union:
    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise SpecError("union needs at least one member")
        object.__setattr__(self, "members", members)


@dataclass(frozen=True)
class Inflation:
    """K together with every point at distance >= threshold from K."""

    base: object
    threshold: float = 1.0

    def __post_init__(self):
        check_real(self.threshold, "threshold", low=0.0, low_open=True)


def spec_dim(spec):
    if isinstance(spec, (FinitePoints, BallComplementTruncated)):
        return spec.dim
    if isinstance(spec, (CantorProduct, UnitDiskComplement)):
        return spec.dim
    if isinstance(spec, Union):
        dims = {spec_dim(m) for m in spec.members}
        if len(dims) != 1:
            raise SpecError("union members have different dimensions")
        return dims.pop()
    if isinstance(spec, Inflation):
        return spec_dim(spec.base)
    raise SpecError(f"unknown set spec {spec!r}")


# ---------------------------------------------------------------------------
# rational points


def dyadic_rationals(dim):
    """Enumerate the dyadic rational points of R^dim, each exactly once.

    Stage ``s`` lists, for denominators ``2^d`` with ``d = 0..s``, the points
    ``p / 2^d`` whose integer numerator has max-norm ``s - d`` (a square
    spiral shell), in lexicographic order; for ``d > 0`` at least one
    numerator entry is odd so that every point appears in lowest terms.
    """
    for stage in itertools.count():
        for d in range(stage + 1):
            R = stage - d
            rng = range(-R, R + 1)
            for p in itertools.product(rng, repeat=dim):
                if max((abs(c) for c in p), default=0) != R:
                    continue
                if d > 0 and not any(c % 2 for c in p):
                    continue
                yield tuple(c / 2.0 ** d for c in p)


def rational_truncation(eps, N, dim=2):
    """The truncated set pi_0 minus the first ``N`` balls B_{eps 2^-i}(x_i).

    Balls intersecting an earlier retained ball are dropped, so the retained
    family is pairwise disjoint.
    """
    eps = check_real(eps, "eps", low=0.0, high=1.0, low_open=True)
    N = check_int(N, "N", min_value=1)
    centers, radii = [], []
    for i, x in enumerate(itertools.islice(dyadic_rationals(dim), N), start=1):
        centers.append(x)
        radii.append(eps * 2.0 ** (-i))
    return BallComplementTruncated(tuple(centers), tuple(radii), filter_overlaps=True)


# ---------------------------------------------------------------------------
# oracle


@dataclass(frozen=True)
class ClosedSetOracle:
    """A closed set E in R^dim given by its distance function.

    Attributes
    ----------
    dim : int
    dist_fn : callable
        Maps an ``(N, dim)`` array to distances; ``|dist_fn(x) - dist(x, E)|
        <= accuracy``.
    accuracy : float
    interior_fn : callable
        Lower bound for ``dist(x, R^dim \\ E)``; identically 0 for sets with
        empty interior.
    bounding_hint : tuple or None
        ``(lo, hi)`` box containing the "interesting" part of E, or None.
    members, witnesses : ndarray
        Declared points of E and declared points off E, used by tests.
    """

    dim: int
    dist_fn: Callable
    accuracy: float = 0.0
    interior_fn: Optional[Callable] = None
    bounding_hint: Optional[tuple] = None
    members: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    witnesses: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    spec: object = None

    def __call__(self, X):
        X = check_points(X, self.dim)
        return np.maximum(np.asarray(self.dist_fn(X), dtype=float), 0.0)

    def interior_depth(self, X):
        X = check_points(X, self.dim)
        if self.interior_fn is None:
            return np.zeros(X.shape[0])
        return np.maximum(self.interior_fn(X), 0.0)


def _chunked(fn, X, size=4096):
    if X.shape[0] <= size:
        return fn(X)
    return np.concatenate([fn(X[i:i + size]) for i in range(0, X.shape[0], size)])


def _zero(X):
    return np.zeros(X.shape[0])


def _cantor_axis_distance(lo, hi, s):
    """Distance from coordinates ``s`` to the union of intervals [lo_k, hi_k]."""
    idx = np.searchsorted(lo, s, side="right") - 1
    left = np.clip(idx, 0, lo.size - 1)
    right = np.clip(idx + 1, 0, lo.size - 1)
    d_left = np.where(idx >= 0, np.maximum(s - hi[left], 0.0), np.inf)
    d_right = np.where(idx + 1 < lo.size, np.maximum(lo[right] - s, 0.0), np.inf)
    inside = (idx >= 0) & (s <= hi[left])
    return np.where(inside, 0.0, np.minimum(d_left, d_right))


def _oracle_points(spec):
    pts = np.array(spec.points, dtype=float)
    tree = cKDTree(pts)

    def dist(X):
        return tree.query(X)[0]

    lo, hi = pts.min(axis=0), pts.max(axis=0)
    wit = pts + 0.5 * (np.max(hi - lo) + 1.0)
    return ClosedSetOracle(spec.dim, dist, 0.0, None, (lo, hi), pts, wit[tree.query(wit)[0] > 0], spec)


def _oracle_cantor(spec):
    lo, hi = spec.intervals()
    ax = spec.axis

    def dist(X):
        dx = _cantor_axis_distance(lo, hi, X[:, ax])
        rest = np.delete(X, ax, axis=1)
        return np.sqrt(dx ** 2 + np.sum(rest ** 2, axis=1))

    members = np.zeros((2 * lo.size, spec.dim))
    members[:, ax] = np.concatenate([lo, hi])
    # midpoints of first-level gaps are certainly off the set
    gap_mid = spec.origin + spec.length * 0.5
    wit = np.zeros((1, spec.dim))
    wit[0, ax] = gap_mid
    box_lo = np.zeros(spec.dim)
    box_hi = np.zeros(spec.dim)
    box_lo[ax], box_hi[ax] = spec.origin, spec.origin + spec.length
    return ClosedSetOracle(spec.dim, dist, spec.accuracy, None, (box_lo, box_hi), members, wit, spec)


def _oracle_balls(spec):
    C = np.array(spec.centers, dtype=float)
    R = np.array(spec.radii, dtype=float)

    def signed(X):
        # max_i (r_i - |x - c_i|): positive inside some ball
        out = np.full(X.shape[0], -np.inf)
        for c, r in zip(C, R):
            out = np.maximum(out, r - np.linalg.norm(X - c, axis=1))
        return out

    def dist(X):
        return np.maximum(_chunked(signed, X), 0.0)

    def interior(X):
        return np.maximum(-_chunked(signed, X), 0.0)

    lo, hi = (C - R[:, None]).min(axis=0), (C + R[:, None]).max(axis=0)
    far = hi + 1.0
    return ClosedSetOracle(spec.dim, dist, 0.0, interior, (lo, hi), far[None, :], C, spec)


def _oracle_disk_complement(spec):
    c = np.zeros(spec.dim) if spec.center is None else np.asarray(spec.center, dtype=float)
    rad = spec.radius

    def dist(X):
        return np.maximum(rad - np.linalg.norm(X - c, axis=1), 0.0)

    def interior(X):
        return np.maximum(np.linalg.norm(X - c, axis=1) - rad, 0.0)

    member = c.copy()
    member[0] += rad
    return ClosedSetOracle(spec.dim, dist, 0.0, interior, (c - rad, c + rad),
                           member[None, :], c[None, :], spec)


def _oracle_union(spec):
    subs = [build_oracle(m) for m in spec.members]
    dim = subs[0].dim
    if any(s.dim != dim for s in subs):
        raise SpecError("union members have different dimensions")

    def dist(X):
        return np.min([s(X) for s in subs], axis=0)

    def interior(X):
        return np.max([s.interior_depth(X) for s in subs], axis=0)

    has_interior = any(s.interior_fn is not None for s in subs)
    members = np.vstack([s.members for s in subs])
    wit = np.vstack([s.witnesses for s in subs])
    wit = wit[dist(wit) > 0] if len(wit) else wit
    hints = [s.bounding_hint for s in subs if s.bounding_hint is not None]
    hint = None
    if hints:
        hint = (np.min([h[0] for h in hints], axis=0), np.max([h[1] for h in hints], axis=0))
    return ClosedSetOracle(dim, dist, max(s.accuracy for s in subs),
                           interior if has_interior else None, hint, members, wit, spec)


# --- superlevel distance for E = K u {dist(., K) >= t} ----------------------


def _sites(spec):
    """Decompose K into ('points', array) and ('intervals', axis, lo, hi) pieces."""
    if isinstance(spec, FinitePoints):
        return [("points", np.array(spec.points, dtype=float))]
    if isinstance(spec, CantorProduct):
        lo, hi = spec.intervals()
        return [("intervals", spec.axis, lo, hi)]
    if isinstance(spec, Union):
        return [s for m in spec.members for s in _sites(m)]
    raise SpecError("inflation base must be built from finite_points, cantor_product and unions")


def _merge_intervals(lo, hi):
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    out_lo, out_hi = [lo[0]], [hi[0]]
    for a, b in zip(lo[1:], hi[1:]):
        if a <= out_hi[-1]:
            out_hi[-1] = max(out_hi[-1], b)
        else:
            out_lo.append(a)
            out_hi.append(b)
    return np.array(out_lo), np.array(out_hi)


class _LineSuperlevel:
    """dist(x, {d_K >= t}) for K a union of intervals on one coordinate line.

    Works in R^1 and R^2; in R^2 the boundary of {d_K < t} consists of flat
    tops over the intervals and circular arcs around interval endpoints.
    Gaps are grouped by size: the arcs of a gap of half-width ``w`` stay
    above height ``sqrt(t^2 - w^2)``, so small gaps only need checking close
    to the query point.
    """

    def __init__(self, axis, lo, hi, t, dim):
        self.axis, self.t, self.dim = axis, t, dim
        self.lo, self.hi = _merge_intervals(lo, hi)
        lo, hi = self.lo, self.hi
        # 1-d sublevel set {d_K < t} as merged open intervals
        self.u_lo, self.u_hi = _merge_intervals(lo - t, hi + t)
        if dim == 1:
            return
        b, a = hi[:-1], lo[1:]
        half = np.minimum(0.5 * (a - b), t)
        self.classes = []
        key = np.floor(np.log2(half / t)).astype(np.int64)
        for k in np.unique(key)[::-1]:
            sel = key == k
            self.classes.append({
                "b": b[sel], "a": a[sel], "half": half[sel],
                "t1": np.arccos(half[sel] / t), "t2": np.arccos(-half[sel] / t),
                "hmin": float(np.sqrt(t * t - half[sel].max() ** 2))})

    def _arc(self, s, h, c, t1, t2):
        th = np.clip(np.arctan2(h, s - c), t1, t2)
        return np.hypot(s - c - self.t * np.cos(th), h - self.t * np.sin(th))

    def __call__(self, X, dK):
        if self.dim == 1:
            s = X[:, 0]
            idx = np.searchsorted(self.u_lo, s, side="right") - 1
            idx = np.clip(idx, 0, self.u_lo.size - 1)
            inside = (s > self.u_lo[idx]) & (s < self.u_hi[idx])
            return np.where(inside, np.minimum(s - self.u_lo[idx], self.u_hi[idx] - s), 0.0)
        t = self.t
        out = np.zeros(X.shape[0])
        live = np.flatnonzero(dK < t)
        s = X[live, self.axis]
        h = np.abs(X[live, 1 - self.axis])
        dx = _cantor_axis_distance(self.lo, self.hi, s)
        # the boundary point straight above is a first candidate
        best = np.maximum(np.sqrt(np.maximum(t * t - dx * dx, 0.0)) - h, 0.0)
        # flat tops: only the nearest interval on each side matters
        i = np.searchsorted(self.lo, s, side="right") - 1
        for j in (np.clip(i, 0, self.lo.size - 1), np.clip(i + 1, 0, self.lo.size - 1)):
            ds = np.maximum(0.0, np.maximum(self.lo[j] - s, s - self.hi[j]))
            best = np.minimum(best, np.hypot(ds, t - h))
        # outer arcs
        best = np.minimum(best, self._arc(s, h, self.lo[0], np.pi / 2, np.pi))
        best = np.minimum(best, self._arc(s, h, self.hi[-1], 0.0, np.pi / 2))
        for cl in self.classes:
            R = np.sqrt(np.maximum(best ** 2 - np.maximum(cl["hmin"] - h, 0.0) ** 2, 0.0))
            first = np.searchsorted(cl["a"], s - R, side="left")
            last = np.searchsorted(cl["b"], s + R, side="right")
            count = last - first
            for k in range(int(count.max(initial=0))):
                q = np.flatnonzero(count > k)
                g = first[q] + k
                d1 = self._arc(s[q], h[q], cl["b"][g], cl["t1"][g], np.pi / 2)
                d2 = self._arc(s[q], h[q], cl["a"][g], np.pi / 2, cl["t2"][g])
                best[q] = np.minimum(best[q], np.minimum(d1, d2))
        out[live] = best
        return out


class _PointsSuperlevel:
    """dist(x, {d_K >= t}) for a finite K in the plane via exposed circle arcs."""

    def __init__(self, pts, t):
        pts = np.unique(pts, axis=0)
        self.t = t
        arcs = []
        for i, p in enumerate(pts):
            blocked = []
            for j, q in enumerate(pts):
                d = np.linalg.norm(q - p)
                if j == i or d >= 2 * t:
                    continue
                phi = np.arctan2(q[1] - p[1], q[0] - p[0])
                w = np.arccos(d / (2 * t))
                blocked.append((phi - w, phi + w))
            for a, b in _free_arcs(blocked):
                arcs.append((p[0], p[1], a, b))
        self.arcs = np.array(arcs).reshape(-1, 4)

    def __call__(self, X, dK):
        out = np.zeros(X.shape[0])
        live = np.flatnonzero(dK < self.t)
        if live.size == 0 or self.arcs.shape[0] == 0:
            return out
        cx, cy, a, b = self.arcs.T
        for start in range(0, live.size, 2048):
            sel = live[start:start + 2048]
            x, y = X[sel, 0:1], X[sel, 1:2]
            phi = np.arctan2(y - cy, x - cx)
            rel = np.mod(phi - a, 2 * np.pi)
            on_arc = rel <= (b - a)
            radial = np.abs(self.t - np.hypot(x - cx, y - cy))
            ea = np.hypot(x - cx - self.t * np.cos(a), y - cy - self.t * np.sin(a))
            eb = np.hypot(x - cx - self.t * np.cos(b), y - cy - self.t * np.sin(b))
            d = np.where(on_arc, radial, np.minimum(ea, eb))
            out[sel] = d.min(axis=1)
        return out


def _free_arcs(blocked):
    """Complement in the circle of a union of angular intervals."""
    if not blocked:
        return [(0.0, 2 * np.pi)]
    two_pi = 2 * np.pi
    pieces = []
    for a, b in blocked:
        width = min(b - a, two_pi)
        a = np.mod(a, two_pi)
        b = a + width
        if b > two_pi:
            pieces += [(a, two_pi), (0.0, b - two_pi)]
        else:
            pieces.append((a, b))
    pieces.sort()
    merged = [list(pieces[0])]
    for a, b in pieces[1:]:
        if a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    free = []
    for (a0, b0), (a1, b1) in zip(merged, merged[1:]):
        free.append((b0, a1))
    # wrap-around gap between the last and first blocked pieces
    last_end, first_start = merged[-1][1], merged[0][0]
    if last_end < two_pi or first_start > 0:
        if first_start + two_pi > last_end:
            free.append((last_end, first_start + two_pi))
    return [(a, b) for a, b in free if b > a]


def _superlevel_distance(base, t, dim):
    sites = _sites(base)
    if dim == 1:
        los, his = [], []
        for s in sites:
            if s[0] == "points":
                los.append(s[1][:, 0]); his.append(s[1][:, 0])
            else:
                los.append(s[2]); his.append(s[3])
        return _LineSuperlevel(0, np.concatenate(los), np.concatenate(his), t, 1)
    if dim != 2:
        raise SpecError("inflation is supported in dimensions 1 and 2")
    if all(s[0] == "points" for s in sites):
        return _PointsSuperlevel(np.vstack([s[1] for s in sites]), t)
    axes = {s[1] for s in sites if s[0] == "intervals"}
    if len(axes) == 1:
        ax = axes.pop()
        los, his = [], []
        for s in sites:
            if s[0] == "intervals":
                los.append(s[2]); his.append(s[3])
            else:
                if np.any(s[1][:, 1 - ax] != 0):
                    raise SpecError("mixed inflation base: points must lie on the cantor line")
                los.append(s[1][:, ax]); his.append(s[1][:, ax])
        return _LineSuperlevel(ax, np.concatenate(los), np.concatenate(his), t, 2)
    raise SpecError("inflation base mixes cantor sets on different axes")


def _oracle_inflation(spec):
    base = build_oracle(spec.base)
    t = spec.threshold
    dim = base.dim
    sup = _superlevel_distance(spec.base, t, dim)

    def dist(X):
        dK = base(X)
        out = dK.copy()
        need = np.flatnonzero((dK > 0.5 * t) & (dK < t))
        if need.size:
            out[need] = np.minimum(dK[need], sup(X[need], dK[need]))
        out[dK >= t] = 0.0
        return out

    def interior(X):
        return np.maximum(base(X) - t, 0.0)

    hint = base.bounding_hint
    if hint is not None:
        hint = (hint[0] - t, hint[1] + t)
    wit = base.members[:1] + 0.25 * t
    far = base.members[:1] + 2 * t
    members = np.vstack([base.members, far])
    wit = wit[dist(wit) > 0]
    return ClosedSetOracle(dim, dist, base.accuracy, interior, hint, members, wit, spec)


def build_oracle(spec):
    """Build the distance oracle of a set specification."""
    if isinstance(spec, ClosedSetOracle):
        return spec
    if isinstance(spec, FinitePoints):
        return _oracle_points(spec)
    if isinstance(spec, CantorProduct):
        return _oracle_cantor(spec)
    if isinstance(spec, BallComplementTruncated):
        return _oracle_balls(spec)
    if isinstance(spec, UnitDiskComplement):
        return _oracle_disk_complement(spec)
    if isinstance(spec, Union):
        return _oracle_union(spec)
    if isinstance(spec, Inflation):
        return _oracle_inflation(spec)
    raise SpecError(f"unknown set spec {spec!r}")


# ---------------------------------------------------------------------------
# DSL


def spec_from_dict(record):
    """Build a :class:`SetSpec` from a ``{"type": ..., "params": {...}}`` record."""
    if not isinstance(record, dict) or "type" not in record:
        raise SpecError("set record needs a 'type' field")
    unknown = set(record) - {"type", "params", "name"}
    if unknown:
        raise SpecError(f"unknown set record keys: {sorted(unknown)}")
    kind = record["type"]
    params = dict(record.get("params", {}))
    try:
        if kind == "finite_points":
            return FinitePoints(tuple(map(tuple, params.pop("points"))), **params)
        if kind == "cantor_product":
            return CantorProduct(**params)
        if kind == "ball_complement":
            return BallComplementTruncated(
                tuple(map(tuple, params.pop("centers"))), tuple(params.pop("radii")), **params)
        if kind == "unit_disk_complement":
            if params.get("center") is not None:
                params["center"] = tuple(params["center"])
            return UnitDiskComplement(**params)
        if kind == "rational_truncation":
            return rational_truncation(**params)
        if kind == "union":
            return Union(tuple(spec_from_dict(m) for m in params.pop("members")), **params)
        if kind == "inflation":
            return Inflation(spec_from_dict(params.pop("base")), **params)
    except (TypeError, KeyError) as exc:
        raise SpecError(f"bad parameters for set type {kind!r}: {exc}") from exc
    raise SpecError(f"unknown set type {kind!r}")


def spec_to_dict(spec):
    if isinstance(spec, FinitePoints):
        return {"type": "finite_points", "params": {"points": [list(p) for p in spec.points]}}
    if isinstance(spec, CantorProduct):
        return {"type": "cantor_product", "params": {
            "ratio": spec.ratio, "depth": spec.depth, "dim": spec.dim, "axis": spec.axis,
            "origin": spec.origin, "length": spec.length}}
    if isinstance(spec, BallComplementTruncated):
        return {"type": "ball_complement", "params": {
            "centers": [list(c) for c in spec.centers], "radii": list(spec.radii)}}
    if isinstance(spec, UnitDiskComplement):
        params = {"dim": spec.dim, "radius": spec.radius}
        if spec.center is not None:
            params["center"] = list(spec.center)
        return {"type": "unit_disk_complement", "params": params}
    if isinstance(spec, Union):
        return {"type": "union", "params": {"members": [spec_to_dict(m) for m in spec.members]}}
    if isinstance(spec, Inflation):
        return {"type": "inflation", "params": {"base": spec_to_dict(spec.base),
                                                "threshold": spec.threshold}}
    raise SpecError(f"unknown set spec {spec!r}")


def _read_structured(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return json.loads(text)
    import tomli

    return tomli.loads(text)


def load_set_file(path, name=None):
    """Read set records from a TOML/JSON file and return one spec.

    With ``name`` given the record of that name is returned, otherwise the
    first one.
    """
    data = _read_structured(path)
    records = data.get("set")
    if isinstance(records, dict):
        records = [records]
    if not records:
        raise SpecError(f"{path}: no [[set]] records")
    if name is not None:
        records = [r for r in records if r.get("name") == name]
        if not records:
            raise SpecError(f"{path}: no set named {name!r}")
    return spec_from_dict(records[0])
