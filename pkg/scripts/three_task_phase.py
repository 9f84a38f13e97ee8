"""Best training order for three tasks over a grid of pairwise similarities.

Writes ``phase.csv`` plus one ``slice_ca_<value>.csv`` per requested
rho_CA slice, laid out for a heat map.
"""

import argparse
from pathlib import Path

from taskorder.cli import phase_table
from taskorder.io import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--step", type=float, default=0.05)
    ap.add_argument("--slices", type=float, nargs="*", default=[-0.4, 0.0, 0.2, 0.6])
    ap.add_argument("--out", type=Path, default=Path("results/phase"))
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    rows = phase_table(args.step)
    write_csv(args.out / "phase.csv", rows)
    for ca in args.slices:
        part = [r for r in rows if abs(r["rho_ca"] - ca) < 1e-9]
        write_csv(args.out / f"slice_ca_{ca:+.2f}.csv", part)
        valid = [r for r in part if r["valid"]]
        counts = {}
        for r in valid:
            counts[r["best_order"]] = counts.get(r["best_order"], 0) + 1
        print(f"rho_CA={ca:+.2f}: {len(valid)} valid cells, best-order counts {dict(sorted(counts.items()))}")


if __name__ == "__main__":
    main()
