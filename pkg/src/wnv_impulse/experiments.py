"""Scenario runs, built-in figure presets and control-parameter scans."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import ScenarioConfig, format_config
from .errors import NoHitError, NumericalError, WNVError
from .integrator import ATOL, RTOL, simulate, write_trajectory_csv
from .model import ControlPolicy, Parameters, State, equilibria, jacobian_eigenvalues, nullcline_markers
from .orbits import (PeriodicOrbit, StabilityReport, find_order1, iterate_map, refine_order1_near,
                     report_lines)
from .svg import emit_svg


N_TRANSIENT = 200
N_RECORD = 50


def _f(v) -> str:
    return format(float(v), ".17g")


@dataclass
class ScenarioSummary:
    config: ScenarioConfig
    n_events: int
    terminated_by: str
    orbit: Optional[PeriodicOrbit] = None
    stability: Optional[StabilityReport] = None
    tail_monotone_to_endemic: Optional[bool] = None
    notes: List[str] = field(default_factory=list)
    files: Dict[str, str] = field(default_factory=dict)

    def lines(self) -> List[str]:
        cfg = self.config
        out = [f"{k}={v if isinstance(v, str) else _f(v)}" for k, v in cfg.to_kv().items()]
        out += equilibrium_lines(cfg.parameters)
        if cfg.policy is not None:
            out += regime_lines(cfg.parameters, cfg.policy)
        out += [f"n_events={self.n_events}", f"terminated_by={self.terminated_by}"]
        if self.tail_monotone_to_endemic is not None:
            out.append(f"tail_monotone_to_endemic={str(self.tail_monotone_to_endemic).lower()}")
        if self.orbit is not None:
            out += report_lines(self.orbit, self.stability)
        out += [f"note={n}" for n in self.notes]
        return out


def equilibrium_lines(params: Parameters) -> List[str]:
    eq = equilibria(params)
    lam = jacobian_eigenvalues(params, eq.disease_free)
    out = [f"endemic_exists={str(eq.endemic_exists).lower()}",
           f"E0_eig1={_f(lam[0])}", f"E0_eig2={_f(lam[1])}"]
    if eq.endemic is not None:
        lam = jacobian_eigenvalues(params, eq.endemic)
        out += [f"M_star={_f(eq.endemic.M)}", f"I_b_star={_f(eq.endemic.I_b)}",
                f"Estar_eig1={_f(lam[0])}", f"Estar_eig2={_f(lam[1])}"]
    return out


def regime_lines(params: Parameters, policy: ControlPolicy) -> List[str]:
    r = nullcline_markers(params, policy)
    return [f"N_mq={_f(r.N_mq)}", f"N_mh={_f(r.N_mh)}",
            f"case_a={str(r.case_a).lower()}", f"case_b={str(r.case_b).lower()}",
            f"threshold_reachable={str(r.threshold_reachable).lower()}"]


def _tail_monotone(traj, target, noise) -> bool:
    # distance to the target never grows over the second half, up to integration noise
    t, y = traj.samples()
    keep = t >= 0.5 * t[-1]
    d = np.hypot(y[keep, 0] - target[0], y[keep, -1] - target[1])
    return bool(np.all(np.diff(d) <= noise))


def run_scenario(cfg: ScenarioConfig, out_dir: Optional[str] = None, rtol: float = RTOL,
                 atol: float = ATOL) -> ScenarioSummary:
    """Simulate one configuration and write the requested artifacts under ``out_dir``."""
    params, policy = cfg.parameters, cfg.policy
    traj = simulate(cfg.initial, params, policy, t_max=cfg.t_max, rtol=rtol, atol=atol)
    summary = ScenarioSummary(cfg, len(traj.events), traj.terminated_by)
    eq = equilibria(params)
    if policy is None and eq.endemic is not None:
        summary.tail_monotone_to_endemic = _tail_monotone(traj, (eq.endemic.M, eq.endemic.I_b),
                                                          1e-9 * params.K_m)
    if policy is not None and eq.endemic is not None:
        if nullcline_markers(params, policy).threshold_reachable:
            summary.orbit, summary.stability = find_order1(params, policy, rtol=rtol, atol=atol)
        else:
            summary.notes.append("threshold not reachable (H_b >= I_b*): no periodic orbit searched")

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "config.txt"), "w", newline="\n") as fh:
            fh.write(format_config(cfg))
        if "trajectory_csv" in cfg.outputs:
            path = os.path.join(out_dir, "trajectory.csv")
            write_trajectory_csv(traj, path, cfg.resample_dt)
            summary.files["trajectory_csv"] = path
            if summary.orbit is not None:
                path = os.path.join(out_dir, "orbit.csv")
                write_orbit_csv(summary.orbit, path)
                summary.files["orbit_csv"] = path
        if "phase_svg" in cfg.outputs:
            summary.files["phase_svg"] = emit_svg(traj, "phase", os.path.join(out_dir, "phase.svg"))
        if "timeseries_svg" in cfg.outputs:
            summary.files["timeseries_svg"] = emit_svg(traj, "timeseries",
                                                       os.path.join(out_dir, "timeseries.svg"))
        if "report" in cfg.outputs:
            path = os.path.join(out_dir, "report.txt")
            with open(path, "w", newline="\n") as fh:
                fh.write("\n".join(summary.lines()) + "\n")
            summary.files["report"] = path
    return summary


def write_orbit_csv(orbit: PeriodicOrbit, path):
    """One period of the orbit in the trajectory CSV schema (t from 0)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "M", "I_b", "event"])
        offset = 0.0
        for k, seg in enumerate(orbit.segments):
            for ti, yi in zip(seg.t[:-1], seg.y[:-1]):
                w.writerow([_f(ti - seg.t_start + offset), _f(yi[0]), _f(yi[-1]), ""])
            offset += seg.duration
            pre = seg.y[-1]
            post_M = orbit.anchors[(k + 1) % orbit.order]
            w.writerow([_f(offset), _f(pre[0]), _f(pre[-1]), "impulse_pre"])
            w.writerow([_f(offset), _f(post_M), _f(orbit.segments[0].y[0, -1]), "impulse_post"])


# ---------------------------------------------------------------------------
# bifurcation scans

@dataclass
class ScanCell:
    value: float
    status: str  # "ok" | "nohit" | "error"
    order: str  # "order-1" | "order-2" | "undetermined" | ""
    tail: List[float] = field(default_factory=list)
    pre: List[float] = field(default_factory=list)
    flight_times: List[float] = field(default_factory=list)
    period: float = float("nan")
    abs_mu: float = float("nan")
    case_a: Optional[bool] = None
    case_b: Optional[bool] = None
    threshold_reachable: Optional[bool] = None
    message: str = ""


@dataclass
class ScanResult:
    swept_key: str
    grid: np.ndarray
    cells: List[ScanCell]
    n_record: int

    def rows(self):
        for cell in self.cells:
            for k in range(self.n_record):
                have = k < len(cell.tail)
                yield [
                    self.swept_key, _f(cell.value), cell.status, cell.order, str(k),
                    _f(cell.tail[k]) if have else "",
                    _f(cell.pre[k]) if have else "",
                    _f(cell.flight_times[k]) if have else "",
                    "" if np.isnan(cell.period) else _f(cell.period),
                    "" if np.isnan(cell.abs_mu) else _f(cell.abs_mu),
                    _flag(cell.case_a), _flag(cell.case_b),
                ]


SCAN_HEADER = ["key", "value", "status", "order", "k", "M_post", "M_pre", "flight_time", "period",
               "abs_mu", "case_a", "case_b"]


def _flag(v):
    return "" if v is None else str(v).lower()


def _first_post_impulse(cfg: ScenarioConfig, policy, rtol, atol):
    traj = simulate(cfg.initial, cfg.parameters, policy, t_max=cfg.t_max, max_impulses=1, rtol=rtol, atol=atol)
    if not traj.events:
        return None
    return traj.events[-1].post[0]


def _scan_cell(args) -> ScanCell:
    cfg, key, value, n_transient, n_record, rtol, atol = args
    try:
        policy = replace(cfg.policy, **{key: value})
        policy.check_against(cfg.parameters)
    except WNVError as exc:
        return ScanCell(value, "error", "", message=str(exc))
    reg = nullcline_markers(cfg.parameters, policy)
    cell = ScanCell(value, "ok", "", case_a=reg.case_a, case_b=reg.case_b,
                    threshold_reachable=reg.threshold_reachable)
    try:
        x0 = _first_post_impulse(cfg, policy, rtol, atol)
        if x0 is None:
            cell.status, cell.message = "nohit", "initial state never reaches the threshold"
            return cell
        it = iterate_map(x0, cfg.parameters, policy, n_transient, n_record, rtol=rtol, atol=atol)
        cell.tail = it.values.tolist()
        cell.pre = it.pre_values.tolist()
        cell.flight_times = it.flight_times.tolist()
        if it.limit == "nohit":
            cell.status, cell.message = "nohit", it.diagnosis
            return cell
        cell.order = it.limit
        if it.limit == "order-1":
            orbit, stab = refine_order1_near(it.anchors[0], cfg.parameters, policy, rtol=rtol, atol=atol)
            cell.period = orbit.period
            cell.abs_mu = abs(stab.mu_analytic)
        elif it.limit == "order-2":
            cell.period = float(it.flight_times[-1] + it.flight_times[-2])
    except (NumericalError, NoHitError, ValueError) as exc:
        cell.status, cell.message = "error", f"{type(exc).__name__}: {exc}"
    return cell


def bifurcation_scan(base: ScenarioConfig, key: str, lo: float, hi: float, n: int,
                     n_transient: int = N_TRANSIENT, n_record: int = N_RECORD, workers: int = 1,
                     out_dir: Optional[str] = None, rtol: float = RTOL, atol: float = ATOL) -> ScanResult:
    """Sweep ``key`` over an n-point grid on [lo, hi], iterating the return map per cell."""
    if key not in ("p", "q", "H_b"):
        raise ValueError(f"swept key must be one of p, q, H_b; got {key!r}")
    if base.policy is None:
        raise ValueError("scan needs a base control policy (p, q, H_b)")
    if n < 2:
        raise ValueError("n must be >= 2")
    if not lo < hi:
        raise ValueError("need lo < hi")
    grid = np.linspace(lo, hi, n)
    jobs = [(base, key, float(v), n_transient, n_record, rtol, atol) for v in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            cells = list(ex.map(_scan_cell, jobs))
    else:
        cells = [_scan_cell(j) for j in jobs]
    result = ScanResult(key, grid, cells, n_record)
    if out_dir is not None:
        write_scan(result, out_dir)
    return result


def write_scan(result: ScanResult, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "scan.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCAN_HEADER)
        w.writerows(result.rows())
    if any(c.tail for c in result.cells):
        emit_svg(result, "bifurcation", os.path.join(out_dir, "bifurcation.svg"))


# ---------------------------------------------------------------------------
# figure presets

FIG3_PARAMS = Parameters(mu_m=0.537, K_m=1000, delta_m=0.035, mu_b=0.01, c=0.09, beta_bm=0.8, N_b=400)
FIG4_PARAMS = replace(FIG3_PARAMS, mu_m=0.06, delta_m=0.04)
FIG5_PARAMS = replace(FIG3_PARAMS, mu_m=0.06, delta_m=0.05)
FIG6_PARAMS = replace(FIG3_PARAMS, mu_m=0.357)
ALL_OUTPUTS = frozenset({"trajectory_csv", "phase_svg", "timeseries_svg", "report"})


def _cfg(params, policy, M0, I0, t_max):
    return ScenarioConfig(params, policy, State(M0, I0), t_max=t_max, resample_dt=0.5, outputs=ALL_OUTPUTS)


@dataclass(frozen=True)
class Preset:
    runs: Tuple[Tuple[str, ScenarioConfig], ...] = ()
    scan: Optional[Tuple[str, float, float, int]] = None  # key, lo, hi, n
    scan_base: Optional[ScenarioConfig] = None


def _presets() -> Dict[str, Preset]:
    fig3 = (
        ("uncontrolled", _cfg(FIG3_PARAMS, None, 771, 137, 400)),
        ("controlled", _cfg(FIG3_PARAMS, ControlPolicy(0.15, 0.45, 250), 771, 137, 400)),
    )
    fig4 = (("p0.8_q0.3", _cfg(FIG4_PARAMS, ControlPolicy(0.8, 0.3, 250), 29, 175, 3000)),)
    fig5a = tuple((f"q{q}", _cfg(FIG5_PARAMS, ControlPolicy(0.8, q, 250), 29, 175, 3000))
                  for q in (0.35, 0.3, 0.25))
    fig5b = tuple((f"p{p}", _cfg(FIG5_PARAMS, ControlPolicy(p, 0.25, 250), 29, 175, 3000))
                  for p in (0.85, 0.8, 0.75))
    fig6 = (("p0.15_q0.45", _cfg(FIG6_PARAMS, ControlPolicy(0.15, 0.45, 250), 771, 137, 200)),)
    fig7a = tuple((f"q{q}", _cfg(FIG3_PARAMS, ControlPolicy(0.15, q, 250), 771, 137, 200))
                  for q in (0.45, 0.4, 0.35))
    fig7b = tuple((f"p{p}", _cfg(FIG3_PARAMS, ControlPolicy(p, 0.45, 250), 771, 137, 200))
                  for p in (0.25, 0.2, 0.15))
    fig8_base = _cfg(FIG3_PARAMS, ControlPolicy(0.25, 0.45, 250), 771, 137, 1e4)
    return {
        "fig3": Preset(fig3),
        "fig4": Preset(fig4),
        "fig5a": Preset(fig5a),
        "fig5b": Preset(fig5b),
        "fig6": Preset(fig6),
        "fig7a": Preset(fig7a),
        "fig7b": Preset(fig7b),
        "fig8": Preset(scan=("q", 0.45, 0.75, 61), scan_base=fig8_base),
    }


PRESETS = _presets()


def run_preset(name: str, out_dir: Optional[str] = None, workers: int = 1, rtol: float = RTOL,
               atol: float = ATOL):
    """Run a named figure preset; returns ``{label: ScenarioSummary}`` or a ScanResult."""
    try:
        preset = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    if preset.scan is not None:
        key, lo, hi, n = preset.scan
        return bifurcation_scan(preset.scan_base, key, lo, hi, n, workers=workers, out_dir=out_dir,
                                rtol=rtol, atol=atol)
    results = {}
    for label, cfg in preset.runs:
        sub = None if out_dir is None else os.path.join(out_dir, label)
        results[label] = run_scenario(cfg, sub, rtol=rtol, atol=atol)
    if out_dir is not None:
        with open(os.path.join(out_dir, "summary.txt"), "w", newline="\n") as fh:
            for label, s in results.items():
                fh.writelines(f"{label}.{line}\n" for line in s.lines())
    return results
