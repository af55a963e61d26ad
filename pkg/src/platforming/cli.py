"""Command line front-end: ``platforming {generate,perturb,solve,check,gantt,report}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys

from .generators import Delays, TrackOutage, generate_large_station, generate_virtual_station, perturb_instance
from .infrastructure import InterlockingMode
from .instance import (BalanceParams, Instance, InstanceError, instance_to_dict, load_instance, save_instance,
                       solution_from_dict, solution_to_dict)
from .lr_core import LRParams, run
from .network import NetworkBuildError
from .oracle import EnumerationCapExceeded, check_feasibility, solve_exact
from .timetable import Solution, objective_breakdown
from .ub_heuristic import heuristic_solve

EXIT_OK = 0
EXIT_INVALID = 3
EXIT_CAP = 4
EXIT_NO_UB = 5  # reserved: cancellations always give an upper bound

MODES = {"sectional": InterlockingMode.SECTIONAL_RELEASE, "route": InterlockingMode.ROUTE_RELEASE}


def default_seed() -> int:
    return int(os.environ.get("PLATFORMING_SEED", "0"))


def parse_duration(text: str) -> float:
    """Seconds from ``"30"``, ``"30s"``, ``"5m"`` or ``"1h"``."""
    text = text.strip().lower()
    scale = {"s": 1, "m": 60, "h": 3600}.get(text[-1:], None)
    return float(text[:-1]) * scale if scale else float(text)


def _write(obj, path):
    if path in (None, "-"):
        json.dump(obj, sys.stdout, indent=1)
        sys.stdout.write("\n")
    else:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=1)
            fh.write("\n")


def _load(path) -> Instance:
    inst = load_instance(path)
    errs = inst.validate()
    if errs:
        raise InstanceError("; ".join(errs))
    return inst


def _with_overrides(inst: Instance, args) -> Instance:
    if getattr(args, "interlocking", None):
        inst = dataclasses.replace(inst, station=inst.station.with_mode(MODES[args.interlocking]))
    tol = getattr(args, "balance_tolerance", None)
    if tol is not None:
        tol = math.inf if tol in ("inf", "none") else float(tol)
        inst = dataclasses.replace(inst, balance=BalanceParams(None if math.isinf(tol) else tol,
                                                               inst.balance.n_track))
    return inst


def cmd_generate(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    if args.topology == "virtual":
        inst = generate_virtual_station(seed, args.n_trains or 6, horizon=args.horizon or 2400,
                                        granularity=args.granularity, span=args.span)
    else:
        kw = {} if args.horizon is None else {"duration": args.horizon}
        inst = generate_large_station(seed, args.n_trains or 287, granularity=args.granularity, **kw)
    _write(instance_to_dict(inst), args.out)
    return EXIT_OK


def cmd_perturb(args) -> int:
    inst = _load(args.instance)
    if args.outage:
        scenario = TrackOutage(args.outage[0], int(args.outage[1]))
    elif args.delays:
        scenario = Delays((int(args.delays[0]), int(args.delays[1])), args.max_delay,
                          default_seed() if args.seed is None else args.seed)
    else:
        scenario = None
    save_instance(perturb_instance(inst, scenario), args.out) if args.out else \
        _write(instance_to_dict(perturb_instance(inst, scenario)), None)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _with_overrides(_load(args.instance), args)
    net = inst.build()
    seed = default_seed() if args.seed is None else args.seed
    if args.method == "lr":
        params = LRParams(max_iterations=args.max_iters, seed=seed, ub_policy=args.ub_policy,
                          time_limit=None if args.time_limit is None else parse_duration(args.time_limit),
                          gap_tolerance=args.gap_tol, balance=inst.balance)
        sol, rec = run(net, params)
        if args.log_csv:
            with open(args.log_csv, "w", newline="") as fh:
                rec.write_csv(fh)
        if not math.isfinite(sol.objective):
            return EXIT_NO_UB
    elif args.method == "heuristic":
        choices = heuristic_solve(net, seed, inst.balance.cap(net))
        sol = Solution(net.paths(choices), net.objective(choices), meta={"method": "heuristic", "seed": seed})
    else:
        _, sol = solve_exact(net, inst.balance, node_cap=args.node_cap)
    out = solution_to_dict(sol, net)
    if args.out:
        _write(out, args.out)
    if args.json:
        _write(out, None)
    elif not args.quiet:
        b = out["bounds"]
        gap = "n/a" if b["gap"] is None else f"{100 * b['gap']:.2f}%"
        print(f"{inst.name or args.instance}: objective {out['totals']['objective']:g} "
              f"lb {b['lower_bound'] if b['lower_bound'] is not None else 'n/a'} gap {gap} "
              f"cancelled {out['totals']['cancelled']} iterations {b['iterations']} time {b['wall_time']:.1f}s")
    return EXIT_OK


def _load_solution(args):
    inst = _with_overrides(_load(args.instance), args)
    net = inst.build()
    with open(args.solution) as fh:
        data = json.load(fh)
    return inst, net, data, solution_from_dict(data, net)


def cmd_check(args) -> int:
    inst, net, _, sol = _load_solution(args)
    rep = check_feasibility(sol, net, inst.balance)
    for line in rep.lines():
        print(line)
    if not args.quiet:
        print("feasible" if rep.ok else f"infeasible: {len(rep.lines())} violation(s)")
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_gantt(args) -> int:
    from .gantt import emit_gantt

    _, net, _, sol = _load_solution(args)
    svg = emit_gantt(sol, net)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(svg)
    else:
        sys.stdout.write(svg)
    return EXIT_OK


def cmd_report(args) -> int:
    inst, net, data, sol = _load_solution(args)
    br = objective_breakdown(sol.paths, net.trains, net.weights, net.grid.horizon)
    stated = data.get("totals", {}).get("objective")
    rows = [f"{r['train']:>6} {r['status']:>9} {r.get('platform', '-'):>6} "
            f"{r.get('arrival', '-'):>6} {r.get('departure', '-'):>6}" for r in data["trains"]]
    print("\n".join(rows))
    print(f"travel {br.travel:g} shift {br.shift:g} cancellation {br.cancellation:g} "
          f"({br.n_cancelled} cancelled) objective {br.total:g}")
    if stated is not None and abs(stated - br.total) > 1e-6:
        print(f"stated objective {stated:g} does not match the rows")
        return EXIT_INVALID
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="platforming", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="random instance")
    g.add_argument("topology", choices=["virtual", "large"])
    g.add_argument("--seed", type=int)
    g.add_argument("--n-trains", type=int)
    g.add_argument("--horizon", type=int, help="seconds (virtual) or timetable duration (large)")
    g.add_argument("--granularity", type=int, default=15)
    g.add_argument("--span", type=int, help="seconds over which virtual-station arrivals spread")
    g.add_argument("--out", "-o")
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("perturb", help="apply delays or a track outage")
    p.add_argument("instance")
    p.add_argument("--delays", nargs=2, metavar=("FROM", "TO"), help="delay trains arriving in [FROM, TO] s")
    p.add_argument("--max-delay", type=int, default=600)
    p.add_argument("--outage", nargs=2, metavar=("TRACK", "FROM"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_perturb)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("instance")
    s.add_argument("--method", choices=["lr", "heuristic", "exact"], default="lr")
    s.add_argument("--ub-policy", choices=["iterative", "final"], default="iterative")
    s.add_argument("--max-iters", type=int, default=1500)
    s.add_argument("--time-limit", help="e.g. 30s, 5m")
    s.add_argument("--gap-tol", type=float, default=1e-4)
    s.add_argument("--seed", type=int)
    s.add_argument("--node-cap", type=int, default=10 ** 7)
    s.add_argument("--log-csv", help="per-iteration bounds")
    s.add_argument("--out", "-o")
    out_mode = s.add_mutually_exclusive_group()
    out_mode.add_argument("--quiet", action="store_true")
    out_mode.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_solve)

    for name, func, hlp in (("check", cmd_check, "capacity check of a solution"),
                            ("gantt", cmd_gantt, "SVG occupation chart"),
                            ("report", cmd_report, "per-train table and objective")):
        c = sub.add_parser(name, help=hlp)
        c.add_argument("instance")
        c.add_argument("solution")
        if name == "gantt":
            c.add_argument("--out", "-o")
        c.add_argument("--quiet", action="store_true")
        c.set_defaults(func=func)

    for c in (s, sub.choices["check"], sub.choices["gantt"], sub.choices["report"]):
        c.add_argument("--interlocking", choices=sorted(MODES))
        c.add_argument("--balance-tolerance", help="theta for the per-siding cap; 'inf' disables")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InstanceError, NetworkBuildError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except EnumerationCapExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
