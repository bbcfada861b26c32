"""Optimal-recovery infidelity over the mixer angles (delta, phi) under dephasing."""
import argparse
import math
import time
from pathlib import Path

from rsbcodes.bench import LANDSCAPE_COLUMNS, emit_plotdata
from rsbcodes.phasedist import default_landscape_axes, infidelity_landscape, landscape_argmin


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--gamma", type=float, default=1e-3, help="gamma t on each mode")
    p.add_argument("--points", type=int, default=17)
    p.add_argument("--out", type=Path, default=None)
    args = p.parse_args()

    deltas, phis = default_landscape_axes(args.N, args.points)
    t = time.perf_counter()
    pts = infidelity_landscape(args.N, 2, args.gamma, deltas, phis)
    elapsed = time.perf_counter() - t
    out = args.out or Path(f"results/landscape_n{args.N}.csv")
    emit_plotdata(pts, out, LANDSCAPE_COLUMNS)

    best = landscape_argmin(pts)
    print(f"N={args.N} gamma_t={args.gamma:g}: {len(pts)} points in {elapsed:.0f}s -> {out}")
    print(f"argmin delta/pi={best.delta / math.pi:.4f} phi/pi={best.phi / math.pi:.4f} "
          f"infidelity={best.infidelity:.6e}")
    row = [q.infidelity for q in pts if abs(q.delta - best.delta) <= 1e-12]
    print(f"phi-range on that delta row: {max(row) - min(row):.3e}")
    print(f"worst residual {max(q.residual for q in pts):.2e}, "
          f"worst feasibility defect {max(q.feasibility for q in pts):.2e}")


if __name__ == "__main__":
    main()
