"""Sweep one control parameter and print a compact table of tail anchors.

    python3 scripts/bifurcation_scan.py --key q --lo 0.45 --hi 0.75 --n 61 --workers 4
"""

import argparse

from wnv_impulse import ControlPolicy, State
from wnv_impulse.config import ScenarioConfig, parse_config
from wnv_impulse.experiments import FIG3_PARAMS, bifurcation_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="scenario file; defaults to the Figure 8 base scenario")
    ap.add_argument("--key", choices=("p", "q", "H_b"), default="q")
    ap.add_argument("--lo", type=float, default=0.45)
    ap.add_argument("--hi", type=float, default=0.75)
    ap.add_argument("--n", type=int, default=61)
    ap.add_argument("--n-transient", type=int, default=200)
    ap.add_argument("--n-record", type=int, default=50)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="out/scan")
    args = ap.parse_args()

    if args.config:
        base = parse_config(args.config)
    else:
        base = ScenarioConfig(FIG3_PARAMS, ControlPolicy(0.25, 0.45, 250), State(771, 137))
    res = bifurcation_scan(base, args.key, args.lo, args.hi, args.n, args.n_transient, args.n_record,
                           workers=args.workers, out_dir=args.out)
    print(f"{args.key:>8} {'status':>7} {'order':>12} {'anchor':>12} {'period':>10} {'|mu|':>8}")
    for c in res.cells:
        anchor = c.tail[-1] if c.tail else float("nan")
        print(f"{c.value:8.4f} {c.status:>7} {c.order or '-':>12} {anchor:12.4f} {c.period:10.4f} {c.abs_mu:8.4f}")
    print(f"wrote {args.out}/scan.csv and {args.out}/bifurcation.svg")


if __name__ == "__main__":
    main()
