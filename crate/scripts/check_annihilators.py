#!/usr/bin/env python3
"""Recompute the annihilator sums of rigid-body reactions from CSV output.

For every reaction row, checks that |sum_i R_i| and |sum_i r_i x R_i| are
small relative to sum_i |R_i| max(1, |r_i|), where r_i = p_i - p_cen is read
from the matching trajectory row.

usage: check_annihilators.py TRAJECTORY_CSV REACTIONS_CSV [--tol 1e-9]
Prints the worst residual and exits 1 if it exceeds the tolerance.
"""

import argparse
import csv
import math
import sys


def cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def norm(a):
    return math.sqrt(sum(x * x for x in a))


def nodes(header, prefix):
    n = 0
    while f"{prefix}{n + 1}" in header:
        n += 1
    return n


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("trajectory")
    ap.add_argument("reactions")
    ap.add_argument("--tol", type=float, default=1e-9)
    args = ap.parse_args()

    with open(args.trajectory, newline="") as f:
        traj = list(csv.DictReader(f))
    with open(args.reactions, newline="") as f:
        reac = list(csv.DictReader(f))
    if len(traj) != len(reac):
        sys.exit(f"row count mismatch: {len(traj)} trajectory vs {len(reac)} reaction rows")
    if not traj:
        print("no rows; nothing to check")
        return 0
    if "pcen_x" not in traj[0]:
        sys.exit("trajectory has no pcen columns; not a rigid run")

    n = nodes(reac[0].keys(), "rx")
    worst = 0.0
    for t_row, r_row in zip(traj, reac):
        if t_row["t"] != r_row["t"]:
            sys.exit(f"time mismatch: {t_row['t']} vs {r_row['t']}")
        c = [float(t_row[f"pcen_{k}"]) for k in "xyz"]
        total = [0.0, 0.0, 0.0]
        moment = [0.0, 0.0, 0.0]
        scale = 0.0
        for i in range(1, n + 1):
            p = [float(t_row[f"{k}{i}"]) for k in "xyz"]
            r = [p[k] - c[k] for k in range(3)]
            R = [float(r_row[f"r{k}{i}"]) for k in "xyz"]
            m = cross(r, R)
            for k in range(3):
                total[k] += R[k]
                moment[k] += m[k]
            scale += norm(R) * max(1.0, norm(r))
        worst = max(worst, max(norm(total), norm(moment)) / max(1.0, scale))

    ok = worst <= args.tol
    print(f"{'PASS' if ok else 'FAIL'} rows={len(reac)} nodes={n} worst={worst:.3e} tol={args.tol:.0e}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
