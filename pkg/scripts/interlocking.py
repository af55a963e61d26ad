"""Exact optima under sectional release and route release on paired instances.

    python3 scripts/interlocking.py --n 50
"""

import argparse

from platforming.generators import generate_virtual_station
from platforming.network import build_network
from platforming.oracle import solve_exact


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--span", type=int)
    args = ap.parse_args(argv)

    print("seed,trains,sectional,route,difference")
    for seed in range(args.n):
        inst = generate_virtual_station(seed, 3 + seed % 6, span=args.span)
        a = solve_exact(build_network(inst.station.with_mode("sectional_release"), inst.trains, inst.grid))[0]
        b = solve_exact(build_network(inst.station.with_mode("route_release"), inst.trains, inst.grid))[0]
        print(f"{seed},{len(inst.trains)},{a:g},{b:g},{b - a:g}")


if __name__ == "__main__":
    main()
