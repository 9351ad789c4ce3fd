"""Run every figure preset and write CSV/SVG artifacts under one directory.

    python3 scripts/reproduce_figures.py --out out/figures --workers 4
"""

import argparse
import os
import time

from wnv_impulse.experiments import PRESETS, run_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/figures")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("names", nargs="*", default=sorted(PRESETS))
    args = ap.parse_args()
    for name in args.names:
        t0 = time.perf_counter()
        res = run_preset(name, os.path.join(args.out, name), workers=args.workers)
        if isinstance(res, dict):
            for label, s in res.items():
                extra = ""
                if s.orbit is not None:
                    extra = f" T={s.orbit.period:.4f} |mu|={abs(s.stability.mu_analytic):.4f}"
                print(f"{name}/{label}: events={s.n_events}{extra}")
        else:
            orders = {c.order for c in res.cells}
            print(f"{name}: {len(res.cells)} cells, tail orders {sorted(orders)}")
        print(f"  ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
