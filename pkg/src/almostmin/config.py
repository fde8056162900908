"""Versioned TOML configuration for families and campaigns.

Family file::

    version = 1

    [family]
    kind = "graphs"        # graphs | branched | single-sheet | flat
    set = "k16.toml"       # set DSL file, relative to this file
    set_name = "k16"       # optional record name inside the set file
    Q = 2
    k = 1
    alpha_star = 1.0
    J = 14
    box = [[-1.0, -1.0], [2.0, 2.0]]   # optional
    threshold = 1.0        # graphs only
    eta_level = 6          # branched only

Single-sheet families use ``sheet = "power"`` with ``m``, ``alpha`` and
``c`` instead of a set; flat families take ``Q``, ``m`` and ``height``.

Campaign file::

    version = 1

    [radii]
    min_exp = 4            # largest radius 2^-4
    max_exp = 10           # smallest radius 2^-10

    [strata]               # number of centers per stratum
    singular = 3
    boundary = 3

    [campaign]
    seed = 0
    R0 = 0.25
    gated = ["singular", "boundary"]
    competitor = false
    collar = 0.25
    slope_tol = 0.1
    # C0 = 1.0             # optional a priori constant

    [quadrature]
    target_rel_tol = 1e-3
    max_cells = 400000

Unknown keys, wrong versions and out-of-range values raise
:class:`~almostmin.exceptions.ConfigError` naming the file and field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli

from .exceptions import ConfigError, SpecError
from .quadrature import QuadratureConfig
from .sets import load_set_file

__all__ = ["FamilyConfig", "CampaignConfig", "RunConfig", "load_family_config",
           "load_campaign_config", "build_family", "build_campaign", "read_toml",
           "CONFIG_VERSION"]

CONFIG_VERSION = 1

_FAMILY_KEYS = {
    "graphs": {"kind", "set", "set_name", "Q", "k", "alpha_star", "J", "box", "threshold"},
    "branched": {"kind", "set", "set_name", "Q", "k", "J", "box", "eta_level"},
    "single-sheet": {"kind", "sheet", "m", "alpha", "c", "Q"},
    "flat": {"kind", "Q", "m", "height"},
}
_CAMPAIGN_SECTIONS = {
    "radii": {"min_exp", "max_exp"},
    "strata": None,
    "campaign": {"seed", "R0", "gated", "competitor", "collar", "slope_tol", "C0"},
    "quadrature": {"target_rel_tol", "max_subdivision_depth", "polar_mode", "order",
                   "max_cells"},
}


def read_toml(path):
    """Parse a TOML file, turning missing files and syntax errors into ConfigError."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: file not found")
    try:
        data = tomli.loads(path.read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    version = data.pop("version", None)
    if version != CONFIG_VERSION:
        raise ConfigError(f"{path}: field 'version' must be {CONFIG_VERSION}, got {version!r}")
    return data


def _need(cond, path, fieldname, msg):
    if not cond:
        raise ConfigError(f"{path}: field '{fieldname}': {msg}")


def _int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


@dataclass
class FamilyConfig:
    """Validated family parameters."""

    kind: str
    params: dict
    set_path: Optional[Path] = None
    source: Optional[Path] = None


def load_family_config(path, *, single_sheet=False) -> FamilyConfig:
    """Read and validate a family file.

    ``single_sheet`` switches to the single-sheet baseline, the only mode in
    which ``Q = 1`` is accepted.
    """
    path = Path(path)
    data = read_toml(path)
    extra = set(data) - {"family"}
    _need(not extra, path, ",".join(sorted(extra)), "unknown top-level key")
    fam = data.get("family")
    _need(isinstance(fam, dict), path, "family", "missing [family] table")
    fam = dict(fam)
    kind = fam.get("kind", "graphs")
    if single_sheet:
        kind = "single-sheet"
        fam["kind"] = kind
    _need(kind in _FAMILY_KEYS, path, "kind", f"unknown family kind {kind!r}")
    unknown = set(fam) - _FAMILY_KEYS[kind]
    if single_sheet:
        unknown -= _FAMILY_KEYS["graphs"]
    _need(not unknown, path, ",".join(sorted(unknown)), f"unknown key for kind {kind!r}")
    set_path = None
    if kind in ("graphs", "branched"):
        Q = fam.get("Q", 2)
        _need(_int(Q), path, "Q", "must be an integer")
        _need(Q >= 2, path, "Q", "multi-sheet families need Q >= 2 "
              "(use --single-sheet for the Q = 1 baseline)")
        k = fam.get("k", 1)
        _need(_int(k) and k >= 1, path, "k", "must be an integer >= 1")
        J = fam.get("J", 10)
        _need(_int(J) and 1 <= J <= 24, path, "J", "must be an integer in [1, 24]")
        a = fam.get("alpha_star", 1.0)
        _need(_num(a) and 0 < a <= 1, path, "alpha_star", "must lie in (0, 1]")
        _need("set" in fam, path, "set", "missing set file")
        set_path = (path.parent / fam["set"]).resolve()
        _need(set_path.is_file(), path, "set", f"set file {set_path} not found")
        box = fam.get("box")
        if box is not None:
            ok = (isinstance(box, list) and len(box) == 2 and len(box[0]) == len(box[1])
                  and all(_num(v) for v in box[0] + box[1])
                  and all(lo < hi for lo, hi in zip(box[0], box[1])))
            _need(ok, path, "box", "must be [[lo...], [hi...]] with lo < hi")
        if kind == "graphs":
            t = fam.get("threshold", 1.0)
            _need(_num(t) and t > 0, path, "threshold", "must be positive")
        else:
            lv = fam.get("eta_level", 6)
            _need(_int(lv) and 2 <= lv <= 14, path, "eta_level", "must be an integer in [2, 14]")
    elif kind == "single-sheet":
        _need(fam.get("Q", 1) == 1, path, "Q", "the single-sheet baseline has Q = 1")
        _need(fam.get("sheet", "power") == "power", path, "sheet", "only 'power' is supported")
        a = fam.get("alpha", 0.5)
        _need(_num(a) and 0 < a <= 1, path, "alpha", "must lie in (0, 1]")
        m = fam.get("m", 2)
        _need(_int(m) and m >= 1, path, "m", "must be a positive integer")
    else:
        Q = fam.get("Q", 2)
        _need(_int(Q) and Q >= 1, path, "Q", "must be a positive integer")
        m = fam.get("m", 2)
        _need(_int(m) and m >= 1, path, "m", "must be a positive integer")
    return FamilyConfig(kind, fam, set_path, path)


def build_family(fc: FamilyConfig):
    """Construct the family described by a :class:`FamilyConfig`."""
    from .examples import (FlatFamily, build_branched_family, build_graph_family,
                           build_single_sheet)

    p = fc.params
    box = p.get("box")
    box = (tuple(box[0]), tuple(box[1])) if box is not None else None
    if fc.kind in ("graphs", "branched"):
        try:
            K = load_set_file(fc.set_path, p.get("set_name"))
        except (SpecError, FileNotFoundError) as exc:
            raise ConfigError(f"{fc.source}: field 'set': {exc}") from exc
        if fc.kind == "graphs":
            return build_graph_family(K, p.get("Q", 2), p.get("k", 1), p.get("alpha_star", 1.0),
                                      p.get("J", 10), box, threshold=p.get("threshold", 1.0))
        return build_branched_family(K, p.get("Q", 2), p.get("k", 1), p.get("J", 10), box,
                                     eta_level=p.get("eta_level", 6))
    if fc.kind == "single-sheet":
        return build_single_sheet(m=p.get("m", 2), alpha=p.get("alpha", 0.5), c=p.get("c", 0.1))
    return FlatFamily(p.get("Q", 2), p.get("m", 2), p.get("height", 0.0))


@dataclass
class CampaignConfig:
    """Validated campaign parameters."""

    min_exp: int = 4
    max_exp: int = 10
    strata: Optional[dict] = None
    seed: int = 0
    R0: float = 0.25
    gated: tuple = ()
    competitor: bool = False
    collar: float = 0.25
    slope_tol: float = 0.1
    C0: Optional[float] = None
    quadrature: dict = field(default_factory=lambda: {"target_rel_tol": 1e-3,
                                                      "max_cells": 400000})
    source: Optional[Path] = None

    def quadrature_config(self):
        try:
            return QuadratureConfig(**self.quadrature)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{self.source}: section 'quadrature': {exc}") from exc


def load_campaign_config(path) -> CampaignConfig:
    path = Path(path)
    data = read_toml(path)
    for sec, body in data.items():
        _need(sec in _CAMPAIGN_SECTIONS, path, sec, "unknown section")
        _need(isinstance(body, dict), path, sec, "must be a table")
        allowed = _CAMPAIGN_SECTIONS[sec]
        if allowed is not None:
            bad = set(body) - allowed
            _need(not bad, path, f"{sec}.{','.join(sorted(bad))}", "unknown key")
    cc = CampaignConfig(source=path)
    radii = data.get("radii", {})
    cc.min_exp = radii.get("min_exp", cc.min_exp)
    cc.max_exp = radii.get("max_exp", cc.max_exp)
    _need(_int(cc.min_exp) and _int(cc.max_exp) and 0 <= cc.min_exp <= cc.max_exp <= 40,
          path, "radii", "need integers 0 <= min_exp <= max_exp <= 40")
    if "strata" in data:
        st = data["strata"]
        _need(all(_int(v) and v >= 0 for v in st.values()), path, "strata",
              "counts must be non-negative integers")
        cc.strata = dict(st)
    camp = data.get("campaign", {})
    cc.seed = camp.get("seed", cc.seed)
    _need(_int(cc.seed) and cc.seed >= 0, path, "campaign.seed", "must be a non-negative integer")
    cc.R0 = camp.get("R0", cc.R0)
    _need(_num(cc.R0) and cc.R0 > 0, path, "campaign.R0", "must be positive")
    cc.gated = tuple(camp.get("gated", ()))
    _need(all(isinstance(g, str) for g in cc.gated), path, "campaign.gated",
          "must be a list of stratum names")
    cc.competitor = camp.get("competitor", cc.competitor)
    _need(isinstance(cc.competitor, bool), path, "campaign.competitor", "must be a boolean")
    cc.collar = camp.get("collar", cc.collar)
    _need(_num(cc.collar) and 0 < cc.collar < 0.5, path, "campaign.collar",
          "must lie in (0, 1/2)")
    cc.slope_tol = camp.get("slope_tol", cc.slope_tol)
    _need(_num(cc.slope_tol) and cc.slope_tol >= 0, path, "campaign.slope_tol",
          "must be non-negative")
    cc.C0 = camp.get("C0")
    _need(cc.C0 is None or (_num(cc.C0) and cc.C0 > 0), path, "campaign.C0", "must be positive")
    if "quadrature" in data:
        cc.quadrature = dict(data["quadrature"])
    cc.quadrature_config()
    return cc


def build_campaign(family, cc: CampaignConfig, *, seed=None, slope_tol=None):
    """:class:`~almostmin.verify.BallCampaign` for ``family`` from a campaign config."""
    from .verify import BallCampaign

    return BallCampaign.dyadic(
        family, cc.min_exp, cc.max_exp, strata=cc.strata,
        seed=cc.seed if seed is None else seed, config=cc.quadrature_config(), R0=cc.R0,
        gated=cc.gated, C0=cc.C0, competitor=cc.competitor, collar=cc.collar,
        slope_tol=cc.slope_tol if slope_tol is None else slope_tol)


@dataclass
class RunConfig:
    """Everything one ``verify`` run needs: family, campaign, outputs and seed."""

    family: FamilyConfig
    campaign: CampaignConfig
    out: Optional[Path] = None
    csv_dir: Optional[Path] = None
    seed: Optional[int] = None
    slope_tol: Optional[float] = None
    workers: Optional[int] = None
