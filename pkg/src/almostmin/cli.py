"""Command-line front end: ``almostmin <subcommand> ...``.

Exit codes: 0 when every pass flag holds, 1 on a verification failure,
2 on configuration or input errors, 3 on numerical errors.  The worker
count of ``verify`` defaults to the ``ALMOSTMIN_WORKERS`` environment
variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import build_campaign, build_family, load_campaign_config, load_family_config
from .exceptions import AlmostMinError, ConfigError, NumericalError, SpecError
from .sets import build_oracle, load_set_file, spec_to_dict
from .verify import dumps_json, to_jsonable

__all__ = ["main", "build_parser", "write_csv", "EXIT_PASS", "EXIT_FAIL", "EXIT_CONFIG",
           "EXIT_NUMERICAL"]

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17e" % float(v)
    return str(v)


def write_csv(path, header, rows):
    """CSV with every float in ``%.17e`` notation, independent of the locale."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_text(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _load_set(args):
    p = Path(args.set)
    if not p.is_file():
        raise ConfigError(f"{p}: set file not found")
    try:
        return load_set_file(p, getattr(args, "name", None))
    except SpecError as exc:
        raise ConfigError(f"{p}: {exc}") from exc


def _box(args, oracle, margin):
    if args.lo is not None or args.hi is not None:
        if args.lo is None or args.hi is None or len(args.lo) != len(args.hi):
            raise ConfigError("--lo and --hi must be given together with equal lengths")
        return tuple(args.lo), tuple(args.hi)
    hint = oracle.bounding_hint
    if hint is None:
        raise ConfigError("this set needs an explicit box (--lo/--hi)")
    lo, hi = np.asarray(hint[0], float), np.asarray(hint[1], float)
    half = 0.5 * float(np.max(hi - lo)) + margin
    mid = 0.5 * (lo + hi)
    return tuple(mid - half), tuple(mid + half)


def _grid(lo, hi, n):
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))


# ---------------------------------------------------------------------------
# subcommands


def cmd_set(args):
    spec = _load_set(args)
    oracle = build_oracle(spec)
    info = {"set": spec_to_dict(spec), "dim": oracle.dim, "accuracy": oracle.accuracy,
            "bounding_hint": None if oracle.bounding_hint is None else
            [list(map(float, oracle.bounding_hint[0])), list(map(float, oracle.bounding_hint[1]))],
            "n_members": int(len(oracle.members))}
    _write_text(args.out, dumps_json(info))
    if args.csv:
        lo, hi = _box(args, oracle, 0.25)
        X = _grid(lo, hi, args.grid)
        d = oracle(X)
        write_csv(args.csv, [f"x{i}" for i in range(X.shape[1])] + ["dist"],
                  (list(x) + [v] for x, v in zip(X, d)))
    return EXIT_PASS


def cmd_whitney(args):
    from .whitney import build_whitney

    oracle = build_oracle(_load_set(args))
    box = _box(args, oracle, 0.5)
    w = build_whitney(oracle, box, args.J)
    if args.out is None or args.out == "-":
        w.to_csv(sys.stdout)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        w.to_csv(args.out)
    if args.check:
        inv = w.check_invariants()
        sys.stderr.write(dumps_json(inv))
    return EXIT_PASS


def _eta(args):
    from .regdist import RegularizedDistance

    oracle = build_oracle(_load_set(args))
    box = _box(args, oracle, 0.5)
    return RegularizedDistance(args.k, args.alpha_star, box, args.J).fit(oracle), box


def cmd_eta(args):
    eta, box = _eta(args)
    X = _grid(box[0], box[1], args.grid)
    ders = eta.derivatives(X, args.order)
    betas = sorted(ders, key=lambda b: (sum(b), tuple(-v for v in b)))
    header = [f"x{i}" for i in range(X.shape[1])] + [
        "eta" if sum(b) == 0 else "d" + "_".join(map(str, b)) for b in betas]
    cols = np.column_stack([X] + [ders[b] for b in betas])
    write_csv(args.out, header, cols.tolist())
    return EXIT_PASS


def cmd_eta_scan(args):
    from .regdist import comparability_scan, holder_seminorm

    eta, _ = _eta(args)
    comp = comparability_scan(eta, n_samples=args.samples, random_state=args.seed)
    hold = {str(o): holder_seminorm(eta, o, n_pairs=args.pairs, random_state=args.seed)
            for o in range(eta.k + 1)}
    _write_text(args.out, dumps_json({"comparability": comp, "holder": hold, "s": eta.s_,
                                      "k": eta.k, "alpha_star": eta.alpha_star}))
    return EXIT_PASS


def _family_from_args(args, kind):
    if args.config:
        fc = load_family_config(args.config, single_sheet=getattr(args, "single_sheet", False))
        return build_family(fc)
    from .examples import build_branched_family, build_graph_family, build_single_sheet

    if getattr(args, "single_sheet", False):
        return build_single_sheet(m=args.m, alpha=args.alpha, c=args.c)
    if args.set is None:
        raise ConfigError("either --config or --set is required")
    if args.Q < 2:
        raise ConfigError("field 'Q': multi-sheet families need Q >= 2 "
                          "(use --single-sheet for the Q = 1 baseline)")
    if args.k < 1:
        raise ConfigError("field 'k': must be >= 1")
    K = _load_set(args)
    if kind == "graphs":
        if not 0 < args.alpha_star <= 1:
            raise ConfigError("field 'alpha_star': must lie in (0, 1]")
        return build_graph_family(K, args.Q, args.k, args.alpha_star, args.J)
    return build_branched_family(K, args.Q, args.k, args.J)


def _dump_family(family, args):
    if args.grid and args.csv:
        if family.kind == "branched" or family.kind == "graphs":
            lo, hi = family.box
        else:
            lo, hi = np.full(family.m, -0.5), np.full(family.m, 0.5)
        X = _grid(lo, hi, args.grid)
        V, J = family.multigraph.evaluate(X)
        Q, n, m = J.shape[1], J.shape[2], J.shape[3]
        header = [f"x{i}" for i in range(m)]
        header += [f"f{q + 1}_{a}" for q in range(Q) for a in range(n)]
        header += [f"Df{q + 1}_{a}_{b}" for q in range(Q) for a in range(n) for b in range(m)]
        cols = np.column_stack([X, V.reshape(len(X), -1), J.reshape(len(X), -1)])
        write_csv(args.csv, header, cols.tolist())
    meta = family.metadata()
    _write_text(args.meta, dumps_json(meta))


def cmd_example_graphs(args):
    from .examples import check_pairwise_condition

    family = _family_from_args(args, "graphs")
    if family.kind == "graphs":
        family.check_invariants()
        check_pairwise_condition(family)
    _dump_family(family, args)
    return EXIT_PASS


def cmd_example_branched(args):
    from .examples import monodromy

    family = _family_from_args(args, "branched")
    inv = family.check_invariants()
    ok = bool(inv.get("grad_ok", True))
    if family.n_patches:
        l = int(np.argmax(family.radii))
        perm = monodromy(family, family.centers[l], 0.25 * family.radii[l])
        family.measured["monodromy_cycle"] = perm
        ok = ok and sorted(perm) == list(range(family.Q)) and all(
            p != i for i, p in enumerate(perm))
    _dump_family(family, args)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_example_massratio(args):
    from .verify import singular_mass_report

    rep = singular_mass_report(args.eps, N=args.N, r=args.r, tol=args.tol)
    _write_text(args.out, dumps_json(rep))
    if args.csv:
        write_csv(args.csv, ["eps", "ratio", "lower_bound", "excess", "error"],
                  ([row["eps"], row["ratio"], row["lower_bound"], row["excess"], row["error"]]
                   for row in rep["rows"]))
    return EXIT_PASS if rep["monotone"] and rep["consistent"] else EXIT_FAIL


_BALL_COLUMNS = ["stratum", "center", "r", "case", "q", "mass", "excess", "dirichlet",
                 "competitor_gap", "cylinder_mass", "error", "pass", "failure"]


def _write_tables(report, csv_dir):
    csv_dir = Path(csv_dir)
    rows = []
    for b in report["balls"]:
        row = [b.get(c) for c in _BALL_COLUMNS]
        row[1] = " ".join("%.17e" % v for v in b["center"])
        rows.append(row)
    write_csv(csv_dir / "balls.csv", _BALL_COLUMNS, rows)
    env = report.get("envelope") or {}
    write_csv(csv_dir / "envelope.csv", ["r", "max_excess"],
              ([float(r), v] for r, v in sorted(env.items(), key=lambda t: -float(t[0]))))


def _summary_lines(report):
    lines = []
    for k, v in sorted(report.get("passes", {}).items()):
        lines.append(f"{k}: {'SKIP' if v is None else ('PASS' if v else 'FAIL')}")
    fit = report.get("fit", {})
    if fit.get("slope") is not None:
        lines.append(f"slope: {fit['slope']:.4f} (r2 {fit['r2']:.4f})")
    return "\n".join(lines) + "\n"


def cmd_verify(args):
    from .verify import verify_excess_decay

    fc = load_family_config(args.family, single_sheet=args.single_sheet)
    cc = load_campaign_config(args.campaign)
    family = build_family(fc)
    campaign = build_campaign(family, cc, seed=args.seed, slope_tol=args.tol_slope)
    report = verify_excess_decay(campaign, workers=args.workers)
    d = to_jsonable(report.to_dict())
    _write_text(args.out, dumps_json(d))
    if args.csv:
        _write_tables(d, args.csv)
    sys.stderr.write(_summary_lines(d))
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_report(args):
    p = Path(args.report)
    if not p.is_file():
        raise ConfigError(f"{p}: report file not found")
    try:
        d = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    if "balls" not in d or "passes" not in d:
        raise ConfigError(f"{p}: not a verification report")
    if args.csv:
        _write_tables(d, args.csv)
    sys.stdout.write(_summary_lines(d))
    return EXIT_PASS if d.get("passed", False) else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def _set_args(p, required=True):
    p.add_argument("--set", required=required, help="set DSL file (TOML or JSON)")
    p.add_argument("--name", default=None, help="record name inside the set file")
    p.add_argument("--lo", type=float, nargs="+", default=None, help="box lower corner")
    p.add_argument("--hi", type=float, nargs="+", default=None, help="box upper corner")


def build_parser():
    ap = argparse.ArgumentParser(prog="almostmin", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("set", help="summarize a set file; optional distance grid CSV")
    _set_args(p)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--grid", type=int, default=65)
    p.set_defaults(func=cmd_set)

    p = sub.add_parser("whitney", help="dump Whitney cubes as CSV")
    _set_args(p)
    p.add_argument("--J", type=int, default=8)
    p.add_argument("--out", default=None)
    p.add_argument("--check", action="store_true", help="print invariant report to stderr")
    p.set_defaults(func=cmd_whitney)

    for name, fn, help_ in (("eta", cmd_eta, "evaluate eta and derivatives on a grid"),
                            ("eta-scan", cmd_eta_scan, "comparability and Hoelder report")):
        p = sub.add_parser(name, help=help_)
        _set_args(p)
        p.add_argument("--k", type=int, default=1)
        p.add_argument("--alpha-star", type=float, default=1.0)
        p.add_argument("--J", type=int, default=8)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=0)
        if name == "eta":
            p.add_argument("--grid", type=int, default=65)
            p.add_argument("--order", type=int, default=None)
        else:
            p.add_argument("--samples", type=int, default=10000)
            p.add_argument("--pairs", type=int, default=4000)
        p.set_defaults(func=fn)

    for name, fn in (("example-graphs", cmd_example_graphs),
                     ("example-branched", cmd_example_branched)):
        p = sub.add_parser(name, help="build a family; dump sheets (CSV) and metadata (JSON)")
        p.add_argument("--config", default=None, help="family TOML file")
        _set_args(p, required=False)
        p.add_argument("--Q", type=int, default=2)
        p.add_argument("--k", type=int, default=1)
        p.add_argument("--J", type=int, default=10)
        p.add_argument("--grid", type=int, default=0)
        p.add_argument("--csv", default=None)
        p.add_argument("--meta", default=None)
        if name == "example-graphs":
            p.add_argument("--alpha-star", type=float, default=1.0)
            p.add_argument("--single-sheet", action="store_true",
                           help="single C^{1,alpha} power sheet baseline (Q = 1)")
            p.add_argument("--m", type=int, default=2)
            p.add_argument("--alpha", type=float, default=0.5)
            p.add_argument("--c", type=float, default=0.1)
        p.set_defaults(func=fn)

    p = sub.add_parser("example-massratio", help="mass share of the flat singular set")
    p.add_argument("--eps", type=float, nargs="+", default=[0.5, 0.25, 0.125, 0.0625])
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_example_massratio)

    p = sub.add_parser("verify", help="run an excess-decay campaign")
    p.add_argument("--family", required=True)
    p.add_argument("--campaign", required=True)
    p.add_argument("--out", default="report.json")
    p.add_argument("--csv", default=None, help="directory for CSV tables")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol-slope", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--single-sheet", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="summarize a report JSON; optional CSV tables")
    p.add_argument("report")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SpecError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except NumericalError as exc:
        sys.stderr.write(f"numerical error ({type(exc).__module__}): {exc}\n")
        return EXIT_NUMERICAL
    except AlmostMinError as exc:
        sys.stderr.write(f"error ({type(exc).__module__}): {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
