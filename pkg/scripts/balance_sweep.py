"""Siding-use balance against the imbalance tolerance.

    python3 scripts/balance_sweep.py --trains 49 --hours 3
"""

import argparse

import numpy as np

from platforming.generators import generate_large_station
from platforming.instance import BalanceParams
from platforming.lr_core import LRParams, arrival_counts, run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trains", type=int, default=49)
    ap.add_argument("--hours", type=float, default=3)
    ap.add_argument("--iterations", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    net = generate_large_station(args.seed, args.trains, duration=int(args.hours * 3600)).build()
    sidings = net.station.available_sidings()
    print("theta,cap,std,cancelled,objective,lb")
    for theta in (None, 4, 2, 0):
        bp = BalanceParams(theta)
        sol, rec = run(net, LRParams(max_iterations=args.iterations, balance=bp, seed=args.seed))
        counts = arrival_counts(net, net.choices(sol.paths))
        std = np.std([counts[s] for s in sidings])
        cancelled = sum(p.cancelled for p in sol.paths.values())
        print(f"{'inf' if theta is None else theta},{bp.cap(net):g},{std:.2f},{cancelled},{sol.objective:g},"
              f"{rec.lb_best:.1f}")


if __name__ == "__main__":
    main()
