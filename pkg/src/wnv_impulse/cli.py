"""Command-line entry point: ``wnv-impulse <subcommand> [options]``.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 no threshold
hit where one was required.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .config import parse_config
from .errors import ConfigError, NoHitError, NumericalError
from .experiments import (PRESETS, bifurcation_scan, equilibrium_lines, regime_lines, run_preset,
                          run_scenario, write_orbit_csv)
from .integrator import ATOL, RTOL
from .model import dulac_divergence
from .orbits import find_order1, find_order2, report_lines

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOHIT = 0, 1, 2, 3, 4

log = logging.getLogger("wnv_impulse")

_GLOBAL_DEFAULTS = dict(config=None, out="out", tol_rel=RTOL, tol_abs=ATOL, workers=1, seed=None)


def _common() -> argparse.ArgumentParser:
    # SUPPRESS so the flags work on either side of the subcommand without clobbering
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--config", metavar="PATH", default=S, help="key=value scenario file")
    p.add_argument("--out", metavar="DIR", default=S, help="output directory (default: out)")
    p.add_argument("--tol-rel", type=float, default=S, help=f"integrator relative tolerance ({RTOL:g})")
    p.add_argument("--tol-abs", type=float, default=S, help=f"integrator absolute tolerance ({ATOL:g})")
    p.add_argument("--workers", type=int, default=S, help="parallel workers for scans")
    p.add_argument("--seed", type=int, default=S, help="reserved; the dynamics are deterministic")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="wnv-impulse", parents=[common],
                                     description="Threshold-controlled mosquito/bird model toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("equilibria", parents=[common], help="equilibria, eigenvalues, Dulac divergence")
    sub.add_parser("regime", parents=[common], help="nullcline markers and regime flags")
    sub.add_parser("simulate", parents=[common], help="run the configured scenario and write outputs")
    sub.add_parser("find-cycle", parents=[common], help="locate order-1 and order-2 periodic orbits")
    sub.add_parser("floquet", parents=[common], help="Floquet multiplier of the order-1 orbit")
    scan = sub.add_parser("scan", parents=[common], help="bifurcation sweep over p, q or H_b")
    scan.add_argument("--key", choices=("p", "q", "H_b"), required=True)
    scan.add_argument("--lo", type=float, required=True)
    scan.add_argument("--hi", type=float, required=True)
    scan.add_argument("--n", type=int, required=True)
    scan.add_argument("--n-transient", type=int, default=200)
    scan.add_argument("--n-record", type=int, default=50)
    pre = sub.add_parser("preset", parents=[common], help="reproduce a built-in figure scenario")
    pre.add_argument("name", choices=sorted(PRESETS))
    return parser


def _load(args, need_policy=False):
    if args.config is None:
        raise ConfigError("--config PATH is required for this command")
    cfg = parse_config(args.config)
    if need_policy and cfg.policy is None:
        raise ConfigError("this command needs the policy keys p, q and H_b", key="p")
    return cfg


def _emit(lines):
    sys.stdout.write("\n".join(lines) + "\n")


def _run(args) -> int:
    tol = dict(rtol=args.tol_rel, atol=args.tol_abs)
    cmd = args.command
    if cmd == "equilibria":
        cfg = _load(args)
        _emit(equilibrium_lines(cfg.parameters) + [f"dulac_divergence={dulac_divergence(cfg.parameters)!r}"])
    elif cmd == "regime":
        cfg = _load(args, need_policy=True)
        _emit(regime_lines(cfg.parameters, cfg.policy))
    elif cmd == "simulate":
        cfg = _load(args)
        summary = run_scenario(cfg, args.out, **tol)
        _emit(summary.lines())
    elif cmd in ("find-cycle", "floquet"):
        cfg = _load(args, need_policy=True)
        orbit, stab = find_order1(cfg.parameters, cfg.policy, **tol)
        if cmd == "floquet":
            _emit(report_lines(orbit, stab)[-6:])
            return EXIT_OK
        lines = report_lines(orbit, stab)
        os.makedirs(args.out, exist_ok=True)
        write_orbit_csv(orbit, os.path.join(args.out, "orbit1.csv"))
        two = find_order2(cfg.parameters, cfg.policy, **tol)
        if two is None:
            lines.append("order2=absent")
        else:
            lines += ["order2=present"] + [f"order2.{ln}" for ln in report_lines(two)]
            write_orbit_csv(two, os.path.join(args.out, "orbit2.csv"))
        with open(os.path.join(args.out, "cycle_report.txt"), "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        _emit(lines)
    elif cmd == "scan":
        cfg = _load(args, need_policy=True)
        res = bifurcation_scan(cfg, args.key, args.lo, args.hi, args.n, args.n_transient, args.n_record,
                               workers=args.workers, out_dir=args.out, **tol)
        for c in res.cells:
            print(f"{args.key}={c.value!r} status={c.status} order={c.order or '-'} "
                  f"period={c.period!r} abs_mu={c.abs_mu!r}")
    elif cmd == "preset":
        out = os.path.join(args.out, args.name)
        res = run_preset(args.name, out, workers=args.workers, **tol)
        if isinstance(res, dict):
            for label, s in res.items():
                _emit([f"{label}.{ln}" for ln in s.lines()])
        else:
            print(f"scan written to {out}: {len(res.cells)} cells, "
                  f"{sum(c.order == 'order-1' for c in res.cells)} order-1 tails")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for k, v in _GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except NoHitError as exc:
        log.error("no threshold hit: %s", exc)
        return EXIT_NOHIT
    except (NumericalError, ValueError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("filesystem error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
