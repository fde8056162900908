"""Top-down dyadic Whitney decomposition of a box minus a closed set.

A cell ``L`` of side ``l`` and diameter ``d = sqrt(m) l`` is accepted at the
first level where the certified lower bound

    dist(L, E) >= dist_fn(x_L) - d/2 - accuracy

is at least ``d``.  Because the parent was rejected, accepted cells also
satisfy ``dist(L, E) <= 3.5 d + 2 accuracy <= 4 d`` whenever the parent meets
that rule's hypothesis, and touching accepted cells differ by at most a
factor 4 in side.  Cells at the finest level that are not accepted form the
unresolved collar around E; cells lying entirely inside E are discarded.

Cubes are addressed by ``(level, index)`` with integer index vectors; all
adjacency tests use exact integer arithmetic on the finest grid.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_int, check_points
from .exceptions import AccuracyError, EmptyComplementError, OutOfBox, SpecError
from .sets import build_oracle

__all__ = ["DyadicCube", "WhitneyDecomposition", "InE", "Unresolved", "build_whitney"]


@dataclass(frozen=True)
class DyadicCube:
    level: int
    index: tuple
    center: tuple
    side: float
    id: int = -1


class _Marker:
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


InE = _Marker("InE")
Unresolved = _Marker("Unresolved")

# predict() codes
IN_E = -2
UNRESOLVED = -1


class _LevelIndex:
    """Sorted integer keys of the cubes at one level, for O(log n) lookup."""

    def __init__(self, keys, ids):
        order = np.argsort(keys, kind="stable")
        self.keys = keys[order]
        self.ids = ids[order]

    def lookup(self, keys):
        if self.keys.size == 0:
            return np.full(np.shape(keys), -1, dtype=np.int64)
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, self.keys.size - 1)
        return np.where(self.keys[pos] == keys, self.ids[pos], -1)


class WhitneyDecomposition(BaseEstimator):
    """Whitney cubes for ``box`` minus a closed set ``E``.

    Parameters
    ----------
    box : tuple of array-like
        ``(lo, hi)`` corners of the root box.
    max_level : int
        Finest level ``J``; cubes at level ``j`` have side ``2^-j root_scale``.
    root_scale : float or None
        Side of the level-0 cubes.  The box sides must be integer multiples
        of it.  Defaults to the largest box side when the box is a cube.

    Attributes
    ----------
    levels_, indices_, centers_, sides_, dist_ : ndarray
        One entry per accepted cube, sorted by level then lexicographic index.
    unresolved_measure_ : float
        Volume of finest-level cells that were neither accepted nor inside E.
    discarded_measure_ : float
        Volume of cells certified to lie inside E.
    """

    def __init__(self, box=((-1.0,), (1.0,)), max_level=10, root_scale=None):
        self.box = box
        self.max_level = max_level
        self.root_scale = root_scale

    # -- construction ------------------------------------------------------

    def _setup(self, dim):
        lo = np.atleast_1d(np.asarray(self.box[0], dtype=float))
        hi = np.atleast_1d(np.asarray(self.box[1], dtype=float))
        if lo.shape != (dim,) or hi.shape != (dim,) or np.any(hi <= lo):
            raise SpecError("box must be (lo, hi) with hi > lo in the set's dimension")
        J = check_int(self.max_level, "max_level", min_value=0)
        if J > 24:
            raise SpecError("max_level above 24 is not supported")
        scale = self.root_scale
        if scale is None:
            scale = float(np.max(hi - lo))
        scale = float(scale)
        n_roots = (hi - lo) / scale
        if np.any(np.abs(n_roots - np.round(n_roots)) > 1e-9) or np.any(np.round(n_roots) < 1):
            raise SpecError("box sides must be integer multiples of root_scale")
        return lo, hi, J, scale, np.round(n_roots).astype(np.int64)

    def fit(self, X, y=None):
        """Build the decomposition for the closed set ``X``.

        ``X`` is a :class:`~almostmin.sets.ClosedSetOracle` or a set spec.
        """
        oracle = build_oracle(X)
        m = oracle.dim
        lo, hi, J, scale, n_roots = self._setup(m)
        if oracle.accuracy > 2.0 ** (-J - 4) * scale:
            raise AccuracyError(
                f"oracle accuracy {oracle.accuracy:g} too coarse for level {J}")
        sq = np.sqrt(m)
        acc = oracle.accuracy

        idx = np.array(list(itertools.product(*[range(n) for n in n_roots])), dtype=np.int64)
        acc_levels, acc_idx, acc_dist = [], [], []
        unresolved_idx = np.zeros((0, m), dtype=np.int64)
        discarded = 0.0
        for level in range(J + 1):
            if idx.shape[0] == 0:
                break
            side = scale * 2.0 ** (-level)
            diam = sq * side
            centers = lo + (idx + 0.5) * side
            d = oracle(centers)
            inside = oracle.interior_depth(centers) >= 0.5 * diam
            accept = (~inside) & (d - 0.5 * diam - acc >= diam)
            discarded += inside.sum() * side ** m
            acc_levels.append(np.full(accept.sum(), level, dtype=np.int64))
            acc_idx.append(idx[accept])
            acc_dist.append(d[accept])
            rest = idx[~accept & ~inside]
            if level == J:
                unresolved_idx = rest
                break
            offsets = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.int64)
            idx = (2 * rest[:, None, :] + offsets[None, :, :]).reshape(-1, m)

        levels = np.concatenate(acc_levels) if acc_levels else np.zeros(0, dtype=np.int64)
        if levels.size == 0:
            raise EmptyComplementError("no Whitney cube accepted inside the box")
        indices = np.vstack(acc_idx)
        dist = np.concatenate(acc_dist)
        order = np.lexsort(tuple(indices[:, i] for i in range(m - 1, -1, -1)) + (levels,))
        self.dim_ = m
        self.lo_, self.hi_ = lo, hi
        self.root_scale_ = scale
        self.n_roots_ = n_roots
        self.levels_ = levels[order]
        self.indices_ = indices[order]
        self.sides_ = scale * 2.0 ** (-self.levels_.astype(float))
        self.centers_ = lo + (self.indices_ + 0.5) * self.sides_[:, None]
        self.dist_ = dist[order]
        self.unresolved_indices_ = unresolved_idx
        self.unresolved_measure_ = unresolved_idx.shape[0] * (scale * 2.0 ** (-J)) ** m
        self.discarded_measure_ = discarded
        self.oracle_ = oracle
        self._build_index()
        return self

    def _key(self, level, idx):
        width = int(np.max(self.n_roots_)) << int(level)
        # row-major packing; fits int64 for m * log2(width) < 63
        key = np.zeros(idx.shape[:-1], dtype=np.int64)
        for i in range(idx.shape[-1]):
            key = key * (width + 2) + (idx[..., i] + 1)
        return key

    def _build_index(self):
        self._levels_index = {}
        self._level_dist = {}
        ids = np.arange(self.levels_.size)
        for level in range(self.max_level + 1):
            sel = self.levels_ == level
            d = self.dist_[sel]
            self._level_dist[level] = (d.min(), d.max()) if d.size else (np.inf, -np.inf)
            self._levels_index[level] = _LevelIndex(self._key(level, self.indices_[sel]), ids[sel])
        J = self.max_level
        self._unresolved_index = _LevelIndex(
            self._key(J, self.unresolved_indices_), np.arange(self.unresolved_indices_.shape[0]))

    # -- queries -----------------------------------------------------------

    @property
    def n_cubes_(self):
        return int(self.levels_.size)

    def cube(self, i):
        return DyadicCube(int(self.levels_[i]), tuple(int(v) for v in self.indices_[i]),
                          tuple(self.centers_[i]), float(self.sides_[i]), int(i))

    def _check_in_box(self, X):
        X = check_points(X, self.dim_)
        tol = 1e-12 * self.root_scale_
        if np.any(X < self.lo_ - tol) or np.any(X > self.hi_ + tol):
            raise OutOfBox("query point outside the root box")
        return X

    def hits(self, X, factor=1.0, *, open_=False, dist=None):
        """Pairs ``(point, cube)`` with ``X[point]`` in ``factor * cube``.

        ``factor * L`` is the cube with the same center and ``factor`` times
        the side.  With ``open_`` the enlarged cube is taken open.  Passing
        the oracle distances ``dist`` of ``X`` skips levels whose cubes are
        too near or too far from E to reach a point; the result is unchanged.

        Returns
        -------
        point_idx, cube_idx : ndarray of int
        """
        X = self._check_in_box(X)
        if not 1.0 <= factor <= 2.0:
            raise SpecError("enlargement factor must lie in [1, 2]")
        m = self.dim_
        offsets = np.array(list(itertools.product((-1, 0, 1), repeat=m)), dtype=np.int64)
        pts, cubes = [], []
        rel = X - self.lo_
        all_rows = np.arange(X.shape[0])
        for level in range(self.max_level + 1):
            index = self._levels_index[level]
            if index.keys.size == 0:
                continue
            side = self.root_scale_ * 2.0 ** (-level)
            rows = all_rows
            if dist is not None:
                # the oracle is 1-Lipschitz up to its accuracy
                lo_d, hi_d = self._level_dist[level]
                slack = 0.5 * factor * np.sqrt(m) * side * (1 + 1e-12) + 2 * self.oracle_.accuracy
                rows = np.flatnonzero((dist > lo_d - slack) & (dist < hi_d + slack))
                if rows.size == 0:
                    continue
            base = np.floor(rel[rows] / side).astype(np.int64)
            for off in offsets:
                cand = base + off
                ids = index.lookup(self._key(level, cand))
                ok = ids >= 0
                if not np.any(ok):
                    continue
                p = rows[ok]
                c = ids[ok]
                gap = np.max(np.abs(X[p] - self.centers_[c]), axis=1)
                half = 0.5 * factor * self.sides_[c]
                inside = gap < half if open_ else gap <= half * (1 + 1e-13)
                pts.append(p[inside])
                cubes.append(c[inside])
        if not pts:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        p = np.concatenate(pts)
        c = np.concatenate(cubes)
        order = np.lexsort((c, p))
        return p[order], c[order]

    def enlarged_hits(self, x, factor=1.2):
        """Cubes ``L`` with ``x`` in the closed cube ``factor * L``."""
        _, c = self.hits(np.atleast_2d(check_points(x, self.dim_)[0]), factor)
        return [self.cube(i) for i in c]

    def predict(self, X):
        """Cube id containing each point, ``-2`` for points of E, ``-1`` otherwise.

        On shared faces the cube with the lexicographically smallest lower
        corner wins (ties across levels go to the finer cube).
        """
        X = self._check_in_box(X)
        out = np.full(X.shape[0], UNRESOLVED, dtype=np.int64)
        p, c = self.hits(X, 1.0)
        if p.size:
            corners = self.centers_[c] - 0.5 * self.sides_[c][:, None]
            keys = tuple(-self.levels_[c] for _ in range(1)) + tuple(
                corners[:, i] for i in range(self.dim_ - 1, -1, -1)) + (p,)
            order = np.lexsort(keys)
            p_sorted, c_sorted = p[order], c[order]
            first = np.ones(p_sorted.size, dtype=bool)
            first[1:] = p_sorted[1:] != p_sorted[:-1]
            out[p_sorted[first]] = c_sorted[first]
        miss = np.flatnonzero(out == UNRESOLVED)
        if miss.size:
            d = self.oracle_(X[miss])
            out[miss[d <= 0.0]] = IN_E
        return out

    def locate(self, x):
        """The accepted cube containing ``x``, or ``InE`` / ``Unresolved``."""
        code = int(self.predict(np.atleast_2d(check_points(x, self.dim_)[0]))[0])
        if code == IN_E:
            return InE
        if code == UNRESOLVED:
            return Unresolved
        return self.cube(code)

    def in_unresolved(self, X):
        """Whether each point lies in a closed unresolved finest-level cell."""
        X = check_points(X, self.dim_)
        side = self.root_scale_ * 2.0 ** (-self.max_level)
        rel = (X - self.lo_) / side
        out = np.zeros(X.shape[0], dtype=bool)
        if self.unresolved_indices_.shape[0] == 0:
            return out
        base = np.floor(rel).astype(np.int64)
        for off in itertools.product((-1, 0), repeat=self.dim_):
            cand = base + np.array(off)
            # closed cell contains x iff cand <= rel <= cand + 1
            ok = np.all((rel >= cand - 1e-12) & (rel <= cand + 1 + 1e-12), axis=1)
            hit = self._unresolved_index.lookup(self._key(self.max_level, cand)) >= 0
            out |= ok & hit
        return out

    # -- structure ---------------------------------------------------------

    def _fine_bounds(self):
        J = self.max_level
        scale = (1 << (J - self.levels_)).astype(np.int64)
        lo = self.indices_ * scale[:, None]
        return lo, lo + scale[:, None]

    def touching_pairs(self):
        """All unordered pairs of accepted cubes whose closed cubes intersect.

        Returns an ``(n_pairs, 2)`` int array with ``i < j``.
        """
        if hasattr(self, "_pairs"):
            return self._pairs
        m = self.dim_
        J = self.max_level
        flo, fhi = self._fine_bounds()
        offsets = np.array(list(itertools.product((-1, 0, 1), repeat=m)), dtype=np.int64)
        found = []
        ids = np.arange(self.n_cubes_)
        for level in range(J + 1):
            index = self._levels_index[level]
            if index.keys.size == 0:
                continue
            # only cubes at this level or finer look up neighbors at `level`
            src = ids[self.levels_ >= level]
            s = 1 << (J - level)
            base = flo[src] // s
            for off in offsets:
                cand = base + off
                nb = index.lookup(self._key(level, cand))
                ok = (nb >= 0) & (nb != src)
                a, b = src[ok], nb[ok]
                touch = np.all((flo[a] <= fhi[b]) & (flo[b] <= fhi[a]), axis=1)
                found.append(np.stack([a[touch], b[touch]], axis=1))
        pairs = np.vstack(found) if found else np.zeros((0, 2), dtype=np.int64)
        pairs = np.sort(pairs, axis=1)
        pairs = np.unique(pairs, axis=0)
        self._pairs = pairs
        return pairs

    def neighbor_counts(self):
        pairs = self.touching_pairs()
        return np.bincount(pairs.ravel(), minlength=self.n_cubes_)

    def check_invariants(self):
        """Measured Whitney constants of the decomposition.

        Returns a dict with the extreme certified ratios ``dist(L, E) / diam(L)``
        (lower and upper bounds), the maximal neighbor count and the extreme
        side ratio of touching cubes, plus the volume balance.
        """
        m = self.dim_
        diam = np.sqrt(m) * self.sides_
        acc = self.oracle_.accuracy
        lower = (self.dist_ - 0.5 * diam - acc) / diam
        upper = (self.dist_ + acc) / diam
        pairs = self.touching_pairs()
        if pairs.shape[0]:
            ratio = self.sides_[pairs[:, 0]] / self.sides_[pairs[:, 1]]
            ratio = np.maximum(ratio, 1.0 / ratio)
            max_ratio = float(ratio.max())
        else:
            max_ratio = 1.0
        counts = self.neighbor_counts()
        volume = float(np.prod(self.hi_ - self.lo_))
        covered = float(np.sum(self.sides_ ** m))
        return {
            "n_cubes": self.n_cubes_,
            "min_dist_ratio": float(lower.min()),
            "max_dist_ratio": float(upper.max()),
            "max_neighbors": int(counts.max()) if counts.size else 0,
            "max_side_ratio": max_ratio,
            "volume_box": volume,
            "volume_cubes": covered,
            "volume_unresolved": float(self.unresolved_measure_),
            "volume_discarded": float(self.discarded_measure_),
            "volume_balance": covered + self.unresolved_measure_ + self.discarded_measure_ - volume,
        }

    def to_csv(self, path_or_file):
        """Write ``level, index_*, center_*, side, dist_estimate`` rows."""
        m = self.dim_
        header = (["level"] + [f"index_{i}" for i in range(m)] + [f"center_{i}" for i in range(m)]
                  + ["side", "dist_estimate"])
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(self.n_cubes_):
                w.writerow([int(self.levels_[i])] + [int(v) for v in self.indices_[i]]
                           + [f"{v:.17e}" for v in self.centers_[i]]
                           + [f"{self.sides_[i]:.17e}", f"{self.dist_[i]:.17e}"])
        finally:
            if own:
                fh.close()


def build_whitney(oracle, box, J, root_scale=None):
    """Functional shortcut for ``WhitneyDecomposition(box, J, root_scale).fit(oracle)``."""
    return WhitneyDecomposition(box=box, max_level=J, root_scale=root_scale).fit(oracle)
