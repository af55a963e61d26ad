"""LR against the exact optimum on random virtual-station instances.

    python3 scripts/small_suite.py --n 200 --out small_suite.csv
"""

import argparse
import csv
import sys
import time

from platforming.generators import generate_virtual_station
from platforming.lr_core import LRParams, run
from platforming.oracle import check_feasibility, solve_exact


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--span", type=int, help="spread of desired arrivals in seconds (default: whole horizon)")
    ap.add_argument("--policy", choices=["iterative", "final"], default="iterative")
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["seed", "trains", "lb", "ub", "opt", "iterations", "lr_time", "exact_time", "feasible"])
    hits = 0
    for seed in range(args.n):
        net = generate_virtual_station(seed, 3 + seed % 6, span=args.span).build()
        sol, rec = run(net, LRParams(seed=seed, ub_policy=args.policy))
        t = time.perf_counter()
        opt, _ = solve_exact(net, incumbent=net.choices(sol.paths))
        te = time.perf_counter() - t
        hits += abs(sol.objective - opt) < 1e-9
        w.writerow([seed, len(net.trains), round(rec.lb_best, 3), sol.objective, opt, len(rec.history),
                    round(sol.wall_time, 3), round(te, 3), check_feasibility(sol, net).ok])
    print(f"LR upper bound optimal on {hits}/{args.n} instances", file=sys.stderr)


if __name__ == "__main__":
    main()
