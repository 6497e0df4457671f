"""Command-line front end: validate, analyze, simulate, bound, ems init."""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import ems as ems_mod
from .hierarchy import HierarchyError, partition_actions, transience_bounds, verify_ascending_improper
from .model import ModelError, PolicyCapExceeded, dump_model, load_model, reduce_costs, validate
from .rates import Regime, growth_report
from .ssp import SspError, solve
from .trajectory import TrajectoryError, measure_catchup, simulate_bulk

SCHEMA = "transience/analysis-v1"
EXIT_OK, EXIT_INPUT, EXIT_ASSUMPTION, EXIT_VIOLATION = 0, 1, 2, 3


class AssumptionFailure(Exception):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or {}


def _num(x):
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        x = float("%.15g" % x)
        return 0.0 if x == 0 else x
    if isinstance(x, np.integer):
        return int(x)
    return x


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    return _num(obj)


def emit(doc, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(jsonable(doc), indent=2, sort_keys=False) + "\n")


def _short(x: float) -> str:
    s = f"{x:.6f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


# -- pipeline ------------------------------------------------------------------

def analyze_model(m, M: float = 0.0) -> dict:
    """Full analysis bundle. Raises AssumptionFailure with the partial bundle."""
    names = list(m.states)
    report = validate(m)
    doc = {"schema": SCHEMA, "states": names, "validation": report.to_dict()}
    failed = dict(report.failed())
    for key in ("probability-normalization", "lambda-sink-shape"):
        if key in failed:
            raise ModelError(f"{key}: {failed[key]}")
    if not m.has_sink:
        raise ModelError("analysis needs a lambda-sink model (add a 'sink' entry)")
    lam = m.sink_lambda
    doc["lambda"] = lam
    if "non-zeno" in failed:
        raise AssumptionFailure(f"assumption 1 violated: {failed['non-zeno']}", doc)

    g = growth_report(m)
    doc.update(regime=g.regime.value, chi=g.chi, chi_lower=g.chi_lower)
    if "access-to-sink" in failed:
        raise AssumptionFailure(f"assumption 2(1) violated: {failed['access-to-sink']}", doc)
    if g.regime is Regime.CRITICAL:
        raise AssumptionFailure(f"critical regime: chi_lower {_short(g.chi_lower)} = lambda {_short(lam)}", doc)
    if g.regime is Regime.CONGESTED:
        raise AssumptionFailure(
            f"assumption 2(2) violated: chi_lower {_short(g.chi_lower)} ≤ lambda {_short(lam)}", doc)

    red = reduce_costs(m, lam)
    start = None
    if m.ranks is not None:
        try:
            start = partition_actions(red, m.ranks).descending_policy()
        except HierarchyError:
            start = None
    sol = solve(red, start=start, check=False)
    doc.update(u_star=sol.u_star,
               optimal_actions={names[i]: [m.actions[i][k].id for k in A]
                                for i, A in enumerate(sol.optimal_actions)},
               nu=sol.nu, finite_time=sol.finite_time)

    ranks = m.ranks if m.ranks is not None else sol.witness_order
    if ranks is None:
        raise AssumptionFailure("assumption 4 violated: no hierarchy order supplied or derivable", doc)
    doc["order"] = {names[i]: r for i, r in sorted(ranks.items())}
    try:
        part = partition_actions(red, ranks)
    except HierarchyError as exc:
        raise AssumptionFailure(f"assumption 4 violated: {exc}", doc) from None
    if not verify_ascending_improper(red, part):
        raise AssumptionFailure("assumption 5 violated: an ascending action belongs to a proper policy", doc)
    b = transience_bounds(red, part, M, check=False)
    doc.update(
        bulk=M,
        descending={names[i]: [m.actions[i][k].id for k in ks] for i, ks in enumerate(part.desc)},
        ascending={names[i]: [m.actions[i][k].id for k in ks] for i, ks in enumerate(part.asc)},
        chi_i={names[i]: v for i, v in b.chi_i_map.items()},
        theta_bound=b.theta_bound,
        theta_star_bound=b.max_bound,
        d=b.d, d_plus=b.d_plus, coarse_bound=b.coarse,
    )
    return doc


# -- argument handling ---------------------------------------------------------

def _add_model_args(p):
    p.add_argument("model", nargs="?", help="model file (JSON)")
    p.add_argument("--ems", action="store_true", help="use the built-in call center model")
    _add_ems_params(p)


def _add_ems_params(p):
    d = ems_mod.EMS5  # staffed reference center by default
    p.add_argument("--lam", type=float, default=d["lam"])
    p.add_argument("--pi", type=float, default=d["pi"])
    p.add_argument("--t1", default=str(d["t1"]))
    p.add_argument("--t2", default=str(d["t2"]))
    p.add_argument("--t3", default=str(d["t3"]))
    p.add_argument("--na", type=float, default=d["N_A"], help="assistant staffing N_A")
    p.add_argument("--np", dest="np_", metavar="NP", type=float, default=d["N_P"],
                   help="physician staffing N_P")
    p.add_argument("--t0", default=None, help="sink sojourn (default derived from the task times)")


def _ems_params(args):
    try:
        return ems_mod.EmsParams(lam=args.lam, pi=args.pi, t1=args.t1, t2=args.t2, t3=args.t3,
                                 N_A=args.na, N_P=args.np_, t0=args.t0)
    except ValueError as exc:
        raise ModelError(str(exc)) from None


def _load(args):
    if args.ems:
        return ems_mod.build_ems(_ems_params(args))[0]
    if not args.model:
        raise ModelError("a model file or --ems is required")
    try:
        with open(args.model, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelError(f"cannot read {args.model}: {exc.strerror}") from None
    return load_model(text)


def cmd_validate(args):
    report = validate(_load(args))
    emit({"schema": SCHEMA, **report.to_dict()})
    return EXIT_OK if report.ok else EXIT_ASSUMPTION


def cmd_analyze(args):
    m = _load(args)
    try:
        doc = analyze_model(m, args.bulk)
    except AssumptionFailure as exc:
        emit({**exc.partial, "error": str(exc)})
        print(str(exc), file=sys.stderr)
        return EXIT_ASSUMPTION
    emit(doc)
    return EXIT_OK


def cmd_bound(args):
    m = _load(args)
    try:
        doc = analyze_model(m, args.bulk)
    except AssumptionFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ASSUMPTION
    keys = ("schema", "states", "bulk", "chi_i", "theta_bound", "theta_star_bound", "d", "d_plus",
            "coarse_bound")
    emit({k: doc[k] for k in keys})
    return EXIT_OK


def cmd_simulate(args):
    m = _load(args)
    try:
        doc = analyze_model(m, args.bulk)
    except AssumptionFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ASSUMPTION
    lam = m.sink_lambda
    u = np.array(doc["u_star"])
    B = np.array(doc["theta_bound"])
    t_bar = Fraction(args.at)
    T = Fraction(args.horizon) if args.horizon else t_bar + math.ceil(2 * float(B.max()))
    traj = simulate_bulk(m, args.bulk, t_bar, T, u_star=u)
    h = float(traj.grid.h)
    theta = measure_catchup(traj, lam, u, args.bulk, t_bar=t_bar)
    slack = B - (theta - float(t_bar))
    out = {"schema": SCHEMA, "states": doc["states"], "bulk": args.bulk, "t_bar": t_bar,
           "horizon": traj.grid.T, "grid_step": h, "theta": theta, "theta_bound": B, "slack": slack}
    if not np.all(np.isfinite(theta)):
        out["warning"] = "horizon too short: some states have not caught up"
        print(out["warning"], file=sys.stderr)
    if args.out:
        traj.write_csv(args.out, deviation=args.deviation, lam=lam)
        out["csv"] = args.out
    emit(out)
    return EXIT_VIOLATION if np.any(slack < -h) else EXIT_OK


def cmd_ems_init(args):
    m, _ = ems_mod.build_ems(_ems_params(args))
    text = dump_model(m) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="transience", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file")
    _add_model_args(p)
    p.set_defaults(func=cmd_validate)

    for name, func, helptext in (("analyze", cmd_analyze, "growth rates, u*, bounds"),
                                 ("bound", cmd_bound, "transience bounds only")):
        p = sub.add_parser(name, help=helptext)
        _add_model_args(p)
        p.add_argument("--bulk", type=float, default=0.0, help="bulk size M")
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="simulate a bulk and measure catch-up times")
    _add_model_args(p)
    p.add_argument("--bulk", type=float, default=0.0)
    p.add_argument("--at", default="0", help="bulk instant t_bar")
    p.add_argument("--horizon", default=None, help="final time T (default twice the bound)")
    p.add_argument("--out", default=None, help="CSV trajectory path")
    p.add_argument("--deviation", action="store_true", help="write v(i,t) - lambda t columns")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ems", help="call center model utilities")
    esub = p.add_subparsers(dest="ems_command", required=True)
    q = esub.add_parser("init", help="write the call center model file")
    _add_ems_params(q)
    q.add_argument("-o", "--out", default=None)
    q.set_defaults(func=cmd_ems_init)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, ValueError, PolicyCapExceeded, SspError, TrajectoryError, HierarchyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
