"""Sampling utilities shared by the sampled seminorm estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_random_state


def ball_samples(center, radius, n, random_state=None):
    """Uniform samples in the open ball ``B_radius(center)``."""
    rng = check_random_state(random_state)
    center = np.atleast_1d(np.asarray(center, dtype=float))
    m = center.size
    u = rng.normal(size=(n, m))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rho = radius * rng.uniform(size=n) ** (1.0 / m)
    return center + 0.999999 * rho[:, None] * u


def polar_grid(center, radius, n_rho=24, n_theta=48):
    """Deterministic grid of a disk (2-d) or an interval (1-d), center included."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size == 1:
        return center + radius * np.linspace(-0.999999, 0.999999, 2 * n_rho + 1)[:, None]
    rho = radius * 0.999999 * (np.arange(1, n_rho + 1) / n_rho)
    t = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    R, T = np.meshgrid(rho, t, indexing="ij")
    pts = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
    return np.vstack([center, center + pts])


def hill_climb(fn, X, Y, val, lo, hi, steps, random_state, n_trials=8, project=None):
    """Maximize ``fn(x, y)`` from several starts by random local moves.

    Each start keeps its own step size, relative to the pair separation,
    halved whenever no trial improves.  ``lo``/``hi`` clip the moves to a
    box; ``project`` optionally maps candidate points back into the domain.
    """
    rng = check_random_state(random_state)
    X, Y, val = X.copy(), Y.copy(), val.copy()
    P, m = X.shape
    step = 0.25 * np.linalg.norm(X - Y, axis=1)
    for _ in range(steps):
        dx = rng.normal(size=(P, n_trials, m)) * step[:, None, None]
        dy = rng.normal(size=(P, n_trials, m)) * step[:, None, None]
        Xt = np.clip(X[:, None, :] + dx, lo, hi).reshape(-1, m)
        Yt = np.clip(Y[:, None, :] + dy, lo, hi).reshape(-1, m)
        if project is not None:
            Xt, Yt = project(Xt), project(Yt)
        vt = fn(Xt, Yt).reshape(P, n_trials)
        j = np.argmax(vt, axis=1)
        better = vt[np.arange(P), j] > val
        idx = np.arange(P)[better] * n_trials + j[better]
        X[better], Y[better] = Xt[idx], Yt[idx]
        val[better] = vt[better, j[better]]
        step = np.where(better, step, 0.5 * step)
    return val.max()


def sampled_holder(grad, center, radius, alpha, *, n_pairs=2000, random_state=0, polish=8,
                   steps=40):
    """Sampled Hoelder seminorm of a matrix field over a ball.

    ``grad`` maps points ``(N, m)`` to arrays ``(N, ...)``; differences are
    measured in the Frobenius norm.  Pairs have log-uniform separations so
    that small scales are represented; the best pairs are refined by
    :func:`hill_climb` restricted to the ball.
    """
    rng = check_random_state(random_state)
    center = np.atleast_1d(np.asarray(center, dtype=float))
    m = center.size
    X = ball_samples(center, radius, n_pairs, rng)
    sep = radius * 10.0 ** rng.uniform(-3, np.log10(2), size=n_pairs)
    u = rng.normal(size=(n_pairs, m))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    Y = _into_ball(X + sep[:, None] * u, center, radius)

    def ratio(A, B):
        ga, gb = grad(A), grad(B)
        num = np.sqrt(np.sum((ga - gb).reshape(A.shape[0], -1) ** 2, axis=1))
        d = np.linalg.norm(A - B, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(d > 0, num / d ** alpha, 0.0)

    val = ratio(X, Y)
    if not polish:
        return float(val.max())
    top = np.argsort(val)[::-1][:polish]
    lo, hi = center - radius, center + radius
    return float(max(val.max(), hill_climb(ratio, X[top], Y[top], val[top], lo, hi, steps, rng,
                                           project=lambda P: _into_ball(P, center, radius))))


def _into_ball(P, center, radius):
    d = P - center
    nrm = np.linalg.norm(d, axis=1, keepdims=True)
    scale = np.minimum(1.0, 0.999999 * radius / np.maximum(nrm, 1e-300))
    return center + d * scale
