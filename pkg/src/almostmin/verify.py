"""Verification campaigns over dyadic ladders of balls.

A :class:`BallCampaign` lists balls ``B_r(x0)`` (base point, radius and a
stratum label) for one family.  :func:`verify_excess_decay` computes the
excess of every ball, fits the decay exponent on the per-radius maximum over
the gated strata and measures the constant ``C0`` in
``excess <= C0 r^(m + 2 alpha)``.  The other entry points check the Dirichlet
bound on slit disks, the Bombieri-form inequality, explicit competitors and
the mass share of the flat singular set.

Reports serialize to JSON deterministically (sorted keys, NaN as null).
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.utils import check_random_state

from .currents import QuadratureConfig, dirichlet, dirichlet_hypotheses, unit_ball_volume
from .exceptions import AlmostMinError, SpecError
from .examples import (BranchedFamily, FlatFamily, GraphFamily, SingleSheetFamily,
                       mass_ratio_example)
from .sets import build_oracle

__all__ = ["BallSpec", "BallCampaign", "VerificationReport", "verify_excess_decay",
           "verify_dirichlet_bound", "verify_bombieri_form", "verify_competitor",
           "singular_mass_report", "stratified_centers", "to_jsonable", "dumps_json",
           "default_workers", "CAMPAIGN_CONFIG"]

WORKERS_ENV = "ALMOSTMIN_WORKERS"
CAMPAIGN_CONFIG = QuadratureConfig(target_rel_tol=1e-3, max_cells=400000)

DEFAULT_GATED = {
    "graphs": ("singular", "boundary"),
    "branched": ("singular", "branch"),
    "single-sheet": ("singular", "random"),
    "flat": ("random",),
}
DEFAULT_STRATA = {
    "graphs": {"singular": 3, "boundary": 3, "random": 3, "flat": 1},
    "branched": {"singular": 3, "branch": 2, "patch": 2, "flat": 1, "random": 2},
    "single-sheet": {"singular": 1, "random": 3},
    "flat": {"random": 3},
}


# ---------------------------------------------------------------------------
# serialization


def to_jsonable(obj):
    """Plain Python version of ``obj`` with NaN and infinities mapped to None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps_json(obj) -> str:
    """Deterministic JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _ordered_map(fn, items, workers):
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# campaigns


@dataclass(frozen=True)
class BallSpec:
    """One ball: base point ``center`` in the plane of the family, radius, stratum."""

    center: tuple
    r: float
    stratum: str = "random"
    sheet: int = 1


def _family_kind(family):
    return getattr(family, "kind", type(family).__name__)


def _inner_box(lo, hi, margin):
    lo = np.asarray(lo, dtype=float) + margin
    hi = np.asarray(hi, dtype=float) - margin
    if np.any(hi <= lo):
        raise SpecError("the box is too small for the largest campaign radius")
    return lo, hi


def _pick(rng, P, n):
    P = np.asarray(P, dtype=float)
    if P.shape[0] <= n:
        return P
    return P[np.sort(rng.choice(P.shape[0], size=n, replace=False))]


def _uniform(rng, lo, hi, n):
    return lo + rng.uniform(size=(n, lo.size)) * (hi - lo)


def stratified_centers(family, counts, r_max, random_state=0):
    """Base points per stratum for a family, all at distance ``r_max`` from the box edge.

    Strata by family kind:

    * graphs: ``singular`` (points of K), ``boundary`` (points at distance
      exactly 1 from K, on the edge of the flat region), ``random`` (off E),
      ``flat`` (deep inside E);
    * branched: ``singular`` (points of K), ``branch`` (branch points of the
      largest patches), ``patch`` (points inside those patches off the
      branch point), ``flat`` (cube corners, away from every patch),
      ``random``;
    * single-sheet: ``singular`` (the non-smooth point) and ``random``;
    * flat: ``random``.

    Returns
    -------
    list of (stratum, ndarray)
    """
    rng = check_random_state(random_state)
    kind = _family_kind(family)
    out = []

    def add(name, P):
        for p in np.atleast_2d(P):
            if p.size:
                out.append((name, np.asarray(p, dtype=float)))

    if kind == "graphs":
        w = family.eta.decomposition_
        lo, hi = _inner_box(w.lo_, w.hi_, r_max)
        oK = build_oracle(family.K)
        inside = lambda P: P[np.all((P >= lo) & (P <= hi), axis=1)]
        members = inside(oK.members)
        if counts.get("singular"):
            add("singular", _pick(rng, members, counts["singular"]))
        if counts.get("boundary"):
            t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
            U = np.stack([np.cos(t), np.sin(t)], 1) if family.m == 2 else np.array([[-1.0], [1.0]])
            C = inside((oK.members[:, None, :] + U[None]).reshape(-1, family.m))
            C = C[oK(C) >= 1.0 - 1e-12] if C.size else C
            add("boundary", _pick(rng, C, counts["boundary"]))
        n_rand, n_flat = counts.get("random", 0), counts.get("flat", 0)
        if n_rand or n_flat:
            P = _uniform(rng, lo, hi, 20000)
            d = oK(P)
            res = family.eta.resolved_threshold_
            add("random", P[(d > res + r_max) & (d < 1.0 - r_max)][:n_rand])
            add("flat", P[d > 1.0 + r_max][:n_flat])
    elif kind == "branched":
        w = family.whitney
        lo, hi = _inner_box(w.lo_, w.hi_, r_max)
        inside = lambda P: P[np.all((P >= lo) & (P <= hi), axis=1)]
        if counts.get("singular"):
            add("singular", _pick(rng, inside(build_oracle(family.K).members),
                                  counts["singular"]))
        order = np.lexsort((np.arange(family.n_patches), -family.radii))
        big = order[:max(counts.get("branch", 0), counts.get("patch", 0))]
        if counts.get("branch"):
            add("branch", inside(family.centers[big[:counts["branch"]]]))
        if counts.get("patch"):
            th = rng.uniform(0, 2 * np.pi, size=big.size)
            P = family.centers[big] + 0.3 * family.radii[big][:, None] * np.stack(
                [np.cos(th), np.sin(th)], 1)
            add("patch", inside(P[:counts["patch"]]))
        if counts.get("flat"):
            cubes = np.lexsort((np.arange(w.n_cubes_), -w.sides_))[:32]
            P = (w.centers_[cubes] - 0.5 * w.sides_[cubes][:, None])
            P = inside(P)
            keep = [p for p in P if family.classify(np.concatenate([p, [0, 0]]), r_max)[0] == "a"]
            add("flat", np.array(keep[:counts["flat"]]).reshape(-1, 2))
        if counts.get("random"):
            add("random", _uniform(rng, lo, hi, counts["random"]))
    elif kind == "single-sheet":
        m = family.m
        if counts.get("singular"):
            add("singular", np.zeros((1, m)))
        if counts.get("random"):
            add("random", _uniform(rng, np.full(m, -0.5), np.full(m, 0.5), counts["random"]))
    elif kind == "flat":
        m = family.m
        add("random", _uniform(rng, np.full(m, -1.0), np.full(m, 1.0), counts.get("random", 1)))
    else:
        raise SpecError(f"no center strata for family kind {kind!r}")
    return out


@dataclass
class BallCampaign:
    """Balls to verify for one family.

    Parameters
    ----------
    family : object
        A family exposing ``ball_center``, ``ball_excess``, ``metadata``,
        ``m``, ``Q`` and ``alpha``.
    balls : list of BallSpec
    config : QuadratureConfig
    seed : int
    R0 : float
        Radius budget; larger balls are skipped and logged.
    gated : tuple of str
        Strata entering the exponent fit and the ``C0`` extrapolation check.
    C0 : float or None
        A priori constant for the per-ball check; None measures it.
    competitor : bool
        Build the affine competitor of every ball.
    collar : float
        Collar fraction of the competitor, in ``(0, 1/2)``.
    slope_tol : float
        Allowed shortfall of the fitted slope below ``m + 2 alpha``.
    """

    family: object
    balls: list
    config: QuadratureConfig = CAMPAIGN_CONFIG
    seed: int = 0
    R0: float = 0.25
    gated: tuple = ()
    C0: Optional[float] = None
    competitor: bool = True
    collar: float = 0.25
    slope_tol: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.collar < 0.5:
            raise SpecError("collar fraction must lie in (0, 1/2)")
        if not self.R0 > 0:
            raise SpecError("R0 must be positive")
        for b in self.balls:
            if not b.r > 0:
                raise SpecError("ball radii must be positive")
        if not self.gated:
            self.gated = DEFAULT_GATED.get(_family_kind(self.family), ())

    @classmethod
    def dyadic(cls, family, a=4, b=10, *, strata=None, seed=0, **kwargs):
        """Every stratified center paired with every radius ``2^-a, ..., 2^-b``."""
        if not 0 <= a <= b:
            raise SpecError("dyadic ladder needs 0 <= a <= b")
        radii = [2.0 ** (-j) for j in range(a, b + 1)]
        counts = dict(DEFAULT_STRATA.get(_family_kind(family), {}))
        if strata is not None:
            counts = dict(strata)
        centers = stratified_centers(family, counts, radii[0], seed)
        balls = [BallSpec(tuple(float(v) for v in c), r, s) for s, c in centers for r in radii]
        return cls(family, balls, seed=seed, **kwargs)

    @property
    def exponent(self):
        return self.family.m + 2.0 * self.family.alpha

    @property
    def radii(self):
        return sorted({b.r for b in self.balls}, reverse=True)


@dataclass
class VerificationReport:
    """Per-ball records, fits, measured constants and pass flags."""

    family_meta: dict
    balls: list
    fit: dict
    constants: dict
    passes: dict
    exponent: float
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v for v in self.passes.values() if v is not None)

    def to_dict(self):
        return {"family_meta": self.family_meta, "balls": self.balls, "fit": self.fit,
                "constants": self.constants, "passes": self.passes, "exponent": self.exponent,
                "passed": self.passed, **self.extra}

    def to_json(self):
        return dumps_json(self.to_dict())


def _token(spec: BallSpec, seed):
    return {"center": list(spec.center), "r": spec.r, "seed": seed, "stratum": spec.stratum}


def _run_ball(campaign: BallCampaign, spec: BallSpec, competitor=None, collar=None):
    fam = campaign.family
    rec = {"center": list(spec.center), "r": spec.r, "stratum": spec.stratum, "case": None,
           "q": None, "mass": None, "excess": None, "dirichlet": None, "competitor_gap": None,
           "cylinder_mass": None, "error": None, "tilt": None, "pass": False, "failure": None,
           "token": _token(spec, campaign.seed)}
    if spec.r > campaign.R0:
        rec["failure"] = "skipped: radius above R0"
        return rec
    competitor = campaign.competitor if competitor is None else competitor
    collar = campaign.collar if collar is None else collar
    try:
        x0 = fam.ball_center(np.asarray(spec.center, dtype=float), spec.sheet)
        b = fam.ball_excess(x0, spec.r, config=campaign.config, competitor=competitor,
                            collar=collar)
    except AlmostMinError as exc:
        rec["failure"] = f"{type(exc).__name__}: {exc}"
        return rec
    rec.update(case=b.case, q=b.q, mass=b.mass, excess=b.excess, dirichlet=b.dirichlet,
               competitor_gap=b.competitor_gap, cylinder_mass=b.cylinder_mass, error=b.error,
               tilt=b.plane_tilt, ball_center=list(x0))
    return rec


def _fit(radii, values):
    """Least-squares line through ``(log r, log v)``; None when fewer than 4 positive points."""
    radii, values = np.asarray(radii, dtype=float), np.asarray(values, dtype=float)
    pos = values > 0
    if pos.sum() < 4:
        return {"slope": None, "intercept": None, "r2": None, "n_radii": int(pos.sum()),
                "note": "zero signal: fewer than 4 radii with positive excess"}
    x, y = np.log(radii[pos]), np.log(values[pos])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    out = {"slope": float(slope), "intercept": float(intercept), "r2": r2,
           "n_radii": int(pos.sum())}
    if pos.sum() >= 5:
        keep = radii[pos] < radii[pos].max()
        s2 = float(np.polyfit(x[keep], y[keep], 1)[0])
        out["slope_without_largest"] = s2
        out["stable"] = bool(abs(s2 - slope) < 0.05)
    return out


def _envelope(records, radii, strata=None):
    env = []
    for r in radii:
        vals = [b["excess"] for b in records if b["r"] == r and b["excess"] is not None
                and (strata is None or b["stratum"] in strata)]
        env.append(max(vals) if vals else 0.0)
    return env


def _family_constants(family):
    meas = getattr(family, "measured", {}) or {}
    return {"C4": meas.get("C4"), "kappa": getattr(family, "kappa", None)}


def verify_excess_decay(campaign: BallCampaign, workers=None) -> VerificationReport:
    """Excess of every ball, exponent fit and the constant ``C0``.

    The fit uses, for each radius, the largest excess among balls of the
    gated strata.  ``C0`` is the largest ``excess / r^e`` over the whole
    campaign (``e = m + 2 alpha``).  The extrapolation check measures
    ``C0`` on the coarse half of the ladder (gated balls) and tests it on the
    fine half.  Failures of single balls are recorded with a reproduction
    token and do not stop the campaign.
    """
    fam = campaign.family
    e = campaign.exponent
    records = _ordered_map(lambda s: _run_ball(campaign, s), campaign.balls, workers)
    radii = campaign.radii
    done = [b for b in records if b["excess"] is not None]
    m = fam.m
    omega = unit_ball_volume(m)
    for b in done:
        tol = max(10.0 * (b["error"] or 0.0), 1e-12 * b["r"] ** m)
        mass_ok = b["mass"] >= b["q"] * omega * b["r"] ** m - tol
        bound_ok = campaign.C0 is None or b["excess"] <= campaign.C0 * b["r"] ** e * (1 + 1e-9)
        b["mass_ok"] = bool(mass_ok)
        b["pass"] = bool(mass_ok and bound_ok)
    gated_env = _envelope(done, radii, campaign.gated)
    fit = _fit(radii, gated_env)
    fit_all = _fit(radii, _envelope(done, radii))
    by_stratum = {s: _fit(radii, _envelope(done, radii, (s,)))
                  for s in sorted({b["stratum"] for b in done})}

    ratios = [b["excess"] / b["r"] ** e for b in done]
    C0 = max(ratios) if ratios else None
    gated = [b for b in done if b["stratum"] in campaign.gated]
    C0_gated = max((b["excess"] / b["r"] ** e for b in gated), default=None)
    C0_by_radius = {repr(r): max((b["excess"] / r ** e for b in gated if b["r"] == r),
                                 default=None) for r in radii}
    extrap = None
    if len(radii) >= 2 and gated:
        split = radii[len(radii) // 2]
        coarse = [b for b in gated if b["r"] > split]
        fine = [b for b in gated if b["r"] <= split]
        if coarse and fine:
            C0_coarse = max(b["excess"] / b["r"] ** e for b in coarse)
            worst = max(b["excess"] / (C0_coarse * b["r"] ** e) if C0_coarse > 0 else
                        (0.0 if b["excess"] <= 0 else np.inf) for b in fine)
            # ratios are only resolved to the quadrature tolerance of both balls
            slack = 2.0 * campaign.config.target_rel_tol
            extrap = {"C0_coarse": C0_coarse, "split_radius": split, "worst_fine_ratio": worst,
                      "slack": slack, "ok": bool(worst <= 1.0 + slack)}

    failures = [b for b in records if b["failure"] is not None
                and not b["failure"].startswith("skipped")]
    skipped = [b["token"] for b in records if b["failure"] and b["failure"].startswith("skipped")]
    slope_ok = None if fit["slope"] is None else bool(fit["slope"] >= e - campaign.slope_tol)
    passes = {
        "slope": slope_ok,
        "per_ball": bool(all(b["pass"] for b in done)) and not failures,
        "mass_lower_bound": bool(all(b["mass_ok"] for b in done)),
        "C0_extrapolation": None if extrap is None else extrap["ok"],
    }
    constants = {"C0": C0, "C0_gated": C0_gated, "C0_by_radius": C0_by_radius,
                 "Cbar": None, **_family_constants(fam)}
    extra = {"fit_all": fit_all, "fit_by_stratum": by_stratum, "gated_strata": list(campaign.gated),
             "envelope": {repr(r): v for r, v in zip(radii, gated_env)},
             "C0_extrapolation": extrap, "failures": [b["token"] | {"error": b["failure"]}
                                                      for b in failures],
             "skipped": skipped, "seed": campaign.seed, "R0": campaign.R0,
             "slope_target": e - campaign.slope_tol}
    return VerificationReport(_meta(fam), records, fit, constants, passes, e, extra)


def _meta(family):
    meta = family.metadata() if hasattr(family, "metadata") else {}
    return to_jsonable(meta)


def verify_competitor(campaign: BallCampaign, collar=0.25, workers=None) -> VerificationReport:
    """Gap between each ball's mass and its affine competitor.

    Since any ``q``-sheeted graph over the disk has mass at least
    ``q omega_m r^m``, the gap never exceeds the excess; a ball passes when
    ``gap <= C0 r^e`` with ``C0`` the campaign constant, or the measured
    excess constant when none is given.  Balls where no competitor can be
    built (branch points inside the disk) are reported with a null gap.
    """
    if not 0.0 < collar < 0.5:
        raise SpecError("collar fraction must lie in (0, 1/2)")
    e = campaign.exponent
    records = _ordered_map(lambda s: _run_ball(campaign, s, True, collar), campaign.balls,
                           workers)
    done = [b for b in records if b["excess"] is not None]
    C0 = campaign.C0
    if C0 is None:
        C0 = max((b["excess"] / b["r"] ** e for b in done), default=0.0)
    for b in done:
        g = b["competitor_gap"]
        b["pass"] = g is None or g <= C0 * b["r"] ** e * (1 + 1e-9) + 10 * (b["error"] or 0.0)
    gaps = [b["competitor_gap"] for b in done if b["competitor_gap"] is not None]
    C_gap = max((b["competitor_gap"] / b["r"] ** e for b in done
                 if b["competitor_gap"] is not None), default=None)
    passes = {"competitor": bool(all(b["pass"] for b in done))}
    constants = {"C0": C0, "C_gap": C_gap, "Cbar": None, **_family_constants(campaign.family)}
    extra = {"collar": collar, "n_with_competitor": len(gaps),
             "max_gap": max(gaps) if gaps else None, "min_gap": min(gaps) if gaps else None}
    return VerificationReport(_meta(campaign.family), records, {}, constants, passes, e, extra)


def verify_bombieri_form(campaign: BallCampaign, workers=None) -> VerificationReport:
    """Measured ``C`` in ``excess <= C r^(2 alpha) mass(C_r)`` per ball.

    Balls above the ``R0`` budget are skipped and logged.
    """
    fam = campaign.family
    a = fam.alpha
    records = _ordered_map(lambda s: _run_ball(campaign, s, False), campaign.balls, workers)
    done = [b for b in records if b["excess"] is not None]
    Cs = []
    for b in done:
        denom = b["r"] ** (2 * a) * b["cylinder_mass"]
        b["C"] = b["excess"] / denom if denom > 0 else None
        b["pass"] = b["C"] is not None and math.isfinite(b["C"])
        if b["C"] is not None:
            Cs.append(b["C"])
    C = max(Cs) if Cs else None
    e = campaign.exponent
    C0 = max((b["excess"] / b["r"] ** e for b in done), default=None)
    q = max((b["q"] for b in done), default=1) or 1
    reference = None if C0 is None else C0 / (q * unit_ball_volume(fam.m))
    skipped = [b["token"] for b in records if b["failure"] and b["failure"].startswith("skipped")]
    passes = {"bombieri": bool(done) and all(b["pass"] for b in done)}
    constants = {"C": C, "C0": C0, "C0_over_q_omega": reference, "Cbar": None,
                 **_family_constants(fam)}
    return VerificationReport(_meta(fam), records, {}, constants, passes, e,
                              {"skipped": skipped})


def verify_dirichlet_bound(family, center, r, alpha=None, *, caps=None, tol=1e-6,
                           config=CAMPAIGN_CONFIG, n_samples=4000, random_state=0):
    """Dirichlet energy on ``B_r(center)`` against ``Cbar q (2r)^(2 alpha) |B_r|``.

    The constants ``C1, C2, C3`` of the pointwise hypotheses are measured
    first.  With ``caps`` (a dict of upper limits for some of them) a
    measured constant above its cap is a hypothesis failure, reported as
    such rather than as a failure of the bound.

    Returns
    -------
    dict with ``lhs``, ``rhs``, ``C1``, ``C2``, ``C3``, ``Cbar``, ``status``
    (``"pass"``, ``"fail"`` or ``"hypothesis_failure"``) and ``pass``.
    """
    alpha = family.alpha if alpha is None else alpha
    c = np.atleast_1d(np.asarray(center, dtype=float))[:family.m]
    F = family.multigraph
    hyp = dirichlet_hypotheses(F, c, r, alpha, n_samples=n_samples, random_state=random_state)
    violated = sorted(k for k, v in (caps or {}).items() if hyp[k] > v)
    slits = []
    if isinstance(family, BranchedFamily):
        _, Istar = family.index_sets(c, r)
        lhs, err = family.patch_integrals(c, r, Istar, config)[1], 0.0
        I, _ = family.index_sets(c, r)
        slits = [[a.tolist(), b.tolist()] for a, b in family.cut_segments(I)]
    else:
        lhs, err = dirichlet(F, c, r, config)
    area = unit_ball_volume(family.m) * r ** family.m
    rhs = hyp["Cbar"] * family.Q * (2.0 * r) ** (2 * alpha) * area
    if violated:
        status = "hypothesis_failure"
    elif lhs <= rhs * (1 + tol) + err:
        status = "pass"
    else:
        status = "fail"
    return {"lhs": lhs, "rhs": rhs, "error": err, "C1": hyp["C1"], "C2": hyp["C2"],
            "C3": hyp["C3"], "Cbar": hyp["Cbar"], "Cbar_measured": lhs / (
                family.Q * (2.0 * r) ** (2 * alpha) * area), "status": status,
            "pass": status == "pass", "violated": violated, "center": c.tolist(), "r": r,
            "alpha": alpha, "slits": slits}


def singular_mass_report(eps_values=(0.5, 0.25, 0.125, 0.0625), *, N=64, r=1.0,
                         x=(0.0, 0.0), tol=0.02, workers=None, **kwargs):
    """Mass share of the flat singular set for a list of ``eps``.

    Returns a dict with one row per ``eps`` (sorted by decreasing ``eps``),
    ``monotone`` (ratios strictly increasing as ``eps`` decreases) and
    ``consistent`` (every ratio at least its analytic lower bound minus
    ``tol``).
    """
    eps_values = sorted((float(e) for e in eps_values), reverse=True)
    rows = _ordered_map(lambda e: mass_ratio_example(e, N, r, x, **kwargs), eps_values, workers)
    ratios = [row["ratio"] for row in rows]
    monotone = all(b > a for a, b in zip(ratios, ratios[1:]))
    consistent = all(row["ratio"] >= row["lower_bound"] - tol for row in rows)
    return {"rows": rows, "monotone": bool(monotone), "consistent": bool(consistent),
            "tol": tol, "N": N, "r": r, "x": list(x)}
