"""Affine m-planes in R^(m+n), orthogonal projections, cylinders.

Planes are stored by explicit orthonormal bases rather than rotations since
almost every consumer only needs projections.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_points

ORTHO_TOL = 1e-12


def _gram_schmidt(vectors):
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    ``vectors`` holds one vector per row; returns orthonormal rows spanning
    the same space.
    """
    basis = []
    for v in np.asarray(vectors, dtype=float):
        w = v.copy()
        for _ in range(2):
            for b in basis:
                w -= (w @ b) * b
        nrm = np.linalg.norm(w)
        if nrm < 1e-14:
            raise ValueError("vectors are linearly dependent")
        basis.append(w / nrm)
    return np.array(basis).reshape(len(basis), -1)


@dataclass(frozen=True)
class MPlane:
    """An affine m-plane with orthonormal tangent and normal frames.

    Attributes
    ----------
    base : ndarray of shape (m + n,)
        A point on the plane; projection coordinates are measured from it.
    tangent : ndarray of shape (m, m + n)
        Orthonormal tangent vectors, one per row.
    normal : ndarray of shape (n, m + n)
        Orthonormal normal vectors, one per row.
    """

    base: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float).reshape(-1)
        tangent = np.atleast_2d(np.asarray(self.tangent, dtype=float))
        normal = np.asarray(self.normal, dtype=float).reshape(-1, base.shape[0])
        frame = np.vstack([tangent, normal])
        if frame.shape != (base.shape[0], base.shape[0]):
            raise ValueError("tangent and normal frames must together span the ambient space")
        if np.max(np.abs(frame @ frame.T - np.eye(base.shape[0]))) > ORTHO_TOL:
            raise ValueError("plane frame is not orthonormal")
        for name, arr in (("base", base), ("tangent", tangent), ("normal", normal)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m(self):
        return self.tangent.shape[0]

    @property
    def n(self):
        return self.normal.shape[0]

    @classmethod
    def coordinate(cls, m, n, base=None):
        """The plane R^m x {0} translated to ``base`` (origin by default)."""
        eye = np.eye(m + n)
        base = np.zeros(m + n) if base is None else base
        return cls(base, eye[:m], eye[m:])

    def project(self, X):
        """Tangential and normal coordinates of ``X`` relative to ``base``."""
        X = check_points(X, self.base.shape[0])
        D = X - self.base
        return D @ self.tangent.T, D @ self.normal.T

    def lift(self, tangential, normal=None):
        """Inverse of :meth:`project`."""
        tangential = np.atleast_2d(tangential)
        out = self.base + tangential @ self.tangent
        if normal is not None:
            out = out + np.atleast_2d(normal) @ self.normal
        return out

    def linear_map(self):
        """The n x m matrix A whose graph {(v, Av)} is parallel to this plane."""
        m = self.m
        T1, T2 = self.tangent[:, :m], self.tangent[:, m:]
        return np.linalg.solve(T1, T2).T

    def translate(self, base):
        return MPlane(base, self.tangent, self.normal)


def project(plane, X):
    """Orthogonal decomposition of ``X`` along ``plane``."""
    return plane.project(X)


def plane_of_linear_map(A, through=None):
    """The m-plane through ``through`` parallel to the graph of ``A``.

    ``A`` is an ``n x m`` matrix representing a linear map R^m -> R^n.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, m = A.shape
    spanning = np.hstack([np.eye(m), A.T])           # rows (e_i, A e_i)
    normals = np.hstack([-A, np.eye(n)])             # rows (-A^t e_j, e_j)
    through = np.zeros(m + n) if through is None else np.asarray(through, dtype=float)
    return MPlane(through, _gram_schmidt(spanning), _gram_schmidt(normals))


def operator_norm(A):
    """Largest singular value of ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def tilt_tau(lip):
    """Cosine of the maximal angle for Lipschitz constant ``lip``."""
    return 1.0 / np.sqrt(1.0 + lip * lip)


@dataclass(frozen=True)
class Cylinder:
    """The (m+n)-cylinder over the disk of radius ``radius`` in ``plane``.

    The disk is centered at the projection of ``center`` onto the plane.
    """

    plane: MPlane
    center: np.ndarray
    radius: float
    _center_coords: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("cylinder radius must be positive")
        center = np.asarray(self.center, dtype=float).reshape(-1)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "_center_coords", self.plane.project(center)[0][0])

    @property
    def disk_center(self):
        """Center of the base disk in plane tangent coordinates."""
        return self._center_coords

    def contains(self, X):
        tang, _ = self.plane.project(X)
        return np.linalg.norm(tang - self._center_coords, axis=1) < self.radius
