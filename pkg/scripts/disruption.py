"""Operational re-planning under a 30 s limit: random delays and a siding outage.

    python3 scripts/disruption.py --trains 150 --hours 10
"""

import argparse

from platforming.generators import Delays, TrackOutage, generate_large_station, perturb_instance
from platforming.lr_core import LRParams, run
from platforming.oracle import check_feasibility


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trains", type=int, default=150)
    ap.add_argument("--hours", type=float, default=10)
    ap.add_argument("--time-limit", type=float, default=30)
    ap.add_argument("--outage", default="T7")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    base = generate_large_station(args.seed, args.trains, duration=int(args.hours * 3600))
    mid = base.trains[len(base.trains) // 2].desired_arrival
    scenarios = {
        "none": None,
        "delays": Delays((mid - 1800, mid + 1800), max_delay=600, seed=args.seed),
        "outage": TrackOutage(args.outage, mid),
    }
    print("scenario,iterations,ub,lb,gap,cancelled,feasible,seconds")
    for name, sc in scenarios.items():
        net = perturb_instance(base, sc).build()
        sol, rec = run(net, LRParams(time_limit=args.time_limit, seed=args.seed))
        cancelled = sum(p.cancelled for p in sol.paths.values())
        print(f"{name},{len(rec.history)},{sol.objective:g},{rec.lb_best:.1f},{100 * rec.gap:.2f}%,{cancelled},"
              f"{check_feasibility(sol, net).ok},{sol.wall_time:.1f}", flush=True)


if __name__ == "__main__":
    main()
