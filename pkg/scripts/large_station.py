"""Synthetic large-station runs: full day and the three 190-train subsets.

Each set is solved under a time limit with both upper-bounding policies,
for 15, 30 and 60 s periods.

    python3 scripts/large_station.py --time-limit 1800 --sets W287 --granularity 15
"""

import argparse

from platforming.generators import LARGE_SETS, generate_large_station
from platforming.lr_core import LRParams, run
from platforming.oracle import check_feasibility

# start offset and duration (s) of each set within the 04:30 - 00:30 day
WINDOWS = {"W287": (0, 72000), "E190": (0, 48000), "M190": (12000, 48000), "L190": (24000, 48000)}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sets", nargs="+", default=list(LARGE_SETS))
    ap.add_argument("--granularity", type=int, nargs="+", default=[15, 30, 60])
    ap.add_argument("--time-limit", type=float, default=1800)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print("case,policy,iterations,ub,lb,gap,cancelled,feasible,seconds")
    for name in args.sets:
        n, long_share = LARGE_SETS[name]
        start, duration = WINDOWS[name]
        for g in args.granularity:
            inst = generate_large_station(args.seed, n, start=start, duration=duration, granularity=g,
                                          long_dwell_share=long_share)
            net = inst.build()
            for policy in ("iterative", "final"):
                sol, rec = run(net, LRParams(time_limit=args.time_limit, ub_policy=policy, seed=args.seed))
                cancelled = sum(p.cancelled for p in sol.paths.values())
                print(f"{name}-{g},{policy},{len(rec.history)},{sol.objective:g},{rec.lb_best:.1f},"
                      f"{100 * rec.gap:.2f}%,{cancelled},{check_feasibility(sol, net).ok},{sol.wall_time:.1f}",
                      flush=True)


if __name__ == "__main__":
    main()
