#!/usr/bin/env python3
"""Compare the lookup back ends on one workload.

Runs the same batch of queries through the jitted kernels (when numba is
installed and MINET_NO_NUMBA is unset), the pure-numpy fallback kernels,
and the dict-walking reference, then prints wall times side by side and
checks that all three report identical probe counts.

    python3 benchmarks/lookup_backends.py --entries 100000 --queries 50000
"""

import argparse
import sys

from minet.bench import ROUTES, run_lookup_bench
from minet.hpt import kernels


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--entries", type=int, default=100_000)
    parser.add_argument("--queries", type=int, default=50_000)
    parser.add_argument("--mode", choices=("miss", "hit"), default="miss")
    parser.add_argument("--mean-entry-len", type=float, default=4.0)
    parser.add_argument("--query-lens", type=int, nargs="+",
                        default=(6, 7, 8, 9, 10))
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)

    print(f"active kernel backend: {kernels.BACKEND}")
    print(f"workload: mode={args.mode} entries={args.entries} "
          f"queries={args.queries} mean_entry_len={args.mean_entry_len:g} "
          f"seed={args.seed}")
    if kernels.BACKEND == "python":
        print("note: 'kernel' and 'kernel-py' run the same code here; "
              "install numba and unset MINET_NO_NUMBA to compare them")
    print()

    reports = {}
    for route in ROUTES:
        reports[route] = run_lookup_bench(
            mode=args.mode, entry_count=args.entries,
            query_count=args.queries, mean_entry_len=args.mean_entry_len,
            query_lens=tuple(args.query_lens), seed=args.seed, route=route)
        r = reports[route]
        print(f"[{route}] build {r.build_wall_s:.3f}s  "
              f"pack {r.pack_wall_s:.3f}s")

    print()
    header = f"{'N':>3} {'probes lin/bin':>16}"
    for route in ROUTES:
        header += f" {route + ' lin/bin (s)':>22}"
    print(header)
    disagreements = 0
    base = reports[ROUTES[0]]
    for i, row in enumerate(base.rows):
        line = (f"{row.query_len:>3} "
                f"{row.linear_probes:>8.3f}/{row.binary_probes:<7.3f}")
        for route in ROUTES:
            other = reports[route].rows[i]
            line += (f" {other.linear_wall_s:>10.4f}/"
                     f"{other.binary_wall_s:<11.4f}")
            if (other.linear_probes, other.binary_probes) != (
                    row.linear_probes, row.binary_probes):
                disagreements += 1
        print(line)

    print()
    if disagreements:
        print(f"probe counts DISAGREE across routes "
              f"({disagreements} rows)", file=sys.stderr)
        return 1
    print("probe counts agree across all routes")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
