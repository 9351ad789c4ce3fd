"""Flow integration with event detection on I_b = H_b and the impulse reset.

The continuous flow is advanced with scipy's DOP853 stepper (explicit 8(5,3)
embedded pair with a 7th-order continuous extension).  After every accepted
step the guard g = I_b - H_b is sign-checked; an upward crossing is refined
with Brent's method on the step's dense interpolant.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from .errors import ConfigError, IntegrationError
from .model import ControlPolicy, Parameters, State, rhs, rhs3

RTOL = 1e-10
ATOL = 1e-12
EVENT_TOL = 1e-10  # |g| at a refined hit, relative to H_b
GRAZING_TOL = 1e-10  # |dI_b/dt| at the hit, relative to mu_b * H_b
T_MAX = 1e4
MAX_IMPULSES = 100_000


@dataclass
class TrajectorySegment:
    """One continuous piece of flow.  ``y`` rows are (M, I_b) or (M, S_b, I_b)."""

    t: np.ndarray
    y: np.ndarray
    terminated_by: str  # "impulse" | "t_max" | "converged"
    dense: list = field(default_factory=list, repr=False)
    grazing: bool = False
    guard_residual: float = 0.0

    @property
    def t_start(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def states(self) -> List[State]:
        return [State(row[0], row[-1]) for row in self.y]

    def __call__(self, t):
        """Evaluate the dense solution at time(s) ``t`` inside the segment."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((ts.size, self.y.shape[1]))
        for i, ti in enumerate(ts):
            out[i] = self._eval(ti)
        return out[0] if scalar else out

    def _eval(self, t):
        if not self.dense:
            return self.y[0].copy()
        k = bisect.bisect_left(self.t, t) - 1
        k = min(max(k, 0), len(self.dense) - 1)
        if t >= self.t[k + 1]:
            return self.y[k + 1].copy()
        if t <= self.t[k]:
            return self.y[k].copy()
        return self.dense[k](t)

    def steps(self):
        """Iterate over (t_lo, t_hi, interpolant) for each accepted step."""
        for k, sol in enumerate(self.dense):
            yield float(self.t[k]), float(self.t[k + 1]), sol


@dataclass(frozen=True)
class ImpulseEvent:
    t: float
    pre: tuple
    post: tuple
    index: int
    grazing: bool = False
    guard_residual: float = 0.0


@dataclass
class Trajectory:
    segments: List[TrajectorySegment]
    events: List[ImpulseEvent]
    initial: tuple
    params: Parameters
    policy: Optional[ControlPolicy]
    terminated_by: str = "t_max"  # also "max_impulses", "converged"
    n_initial_resets: int = 0

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    @property
    def final(self) -> np.ndarray:
        return self.segments[-1].y[-1]

    def samples(self):
        """All adaptive-mesh samples concatenated (events give repeated times)."""
        t = np.concatenate([s.t for s in self.segments])
        y = np.concatenate([s.y for s in self.segments])
        return t, y


@dataclass(frozen=True)
class FullState3D:
    M: float
    S_b: float
    I_b: float

    def __post_init__(self):
        for name in ("M", "S_b", "I_b"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: must be >= 0", key=name)


def logistic_closed_form(M0: float, t, params: Parameters):
    """Exact solution of dM/dt = r M - (mu_m/K_m) M^2 with r = mu_m - delta_m.

    Written as M0 / (e^{-rt} + a M0 (1 - e^{-rt}) / r) with a = mu_m/K_m, which
    is the usual M* M0 e^{rt} / (M* + M0 (e^{rt} - 1)) for r > 0 and stays
    valid for r < 0 (decay to zero) and, as the r -> 0 limit, r = 0:
    M0 / (1 + a M0 t).
    """
    r = params.mu_m - params.delta_m
    a = params.mu_m / params.K_m
    t = np.asarray(t, dtype=float)
    if r == 0.0:
        out = M0 / (1.0 + a * M0 * t)
    elif r > 0.0:
        e = np.exp(-r * t)
        out = M0 / (e + a * M0 * (-np.expm1(-r * t)) / r)
    else:
        out = M0 * np.exp(r * t) / (1.0 + a * M0 * np.expm1(r * t) / r)
    return out if out.ndim else float(out)


def apply_impulse(s: State, policy: ControlPolicy) -> State:
    return State((1.0 - policy.p) * s.M, (1.0 - policy.q) * s.I_b)


def _flow(fun, y0, t0, t_end, guard_index=None, threshold=None, rtol=RTOL, atol=ATOL,
          stall_tol=None, grazing_tol=0.0):
    """Integrate until the guard fires (upward, with M > 0) or ``t_end``.

    ``stall_tol`` enables early exit when the field norm collapses below it
    while still under the guard; the state can then never reach the guard.
    """
    y0 = np.asarray(y0, dtype=float)
    if t_end <= t0:
        raise ValueError("t_max must be positive")
    solver = DOP853(fun, t0, y0, t_end, rtol=rtol, atol=atol)
    ts = [t0]
    ys = [y0.copy()]
    dense = []
    guarded = guard_index is not None
    while True:
        g_old = ys[-1][guard_index] - threshold if guarded else None
        msg = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"integrator failed: {msg}", t=solver.t, y=solver.y)
        sol = solver.dense_output()
        t_new, y_new = solver.t, solver.y.copy()
        if guarded:
            g_new = y_new[guard_index] - threshold
            if g_old < 0.0 <= g_new and y_new[0] > 0.0:
                t_hit = _refine_hit(sol, ts[-1], t_new, guard_index, threshold)
                y_hit = sol(t_hit) if t_hit < t_new else y_new
                resid = y_hit[guard_index] - threshold
                slope = fun(t_hit, y_hit)[guard_index]
                ts.append(t_hit)
                ys.append(y_hit)
                dense.append(sol)
                seg = TrajectorySegment(np.array(ts), np.array(ys), "impulse", dense)
                seg.grazing = bool(abs(slope) < grazing_tol)
                seg.guard_residual = float(resid)
                return seg
        ts.append(t_new)
        ys.append(y_new)
        dense.append(sol)
        if solver.status == "finished":
            return TrajectorySegment(np.array(ts), np.array(ys), "t_max", dense)
        if guarded and stall_tol is not None:
            speed = np.abs(fun(t_new, y_new))
            if np.all(speed <= stall_tol):
                return TrajectorySegment(np.array(ts), np.array(ys), "converged", dense)


def _refine_hit(sol, t_lo, t_hi, index, threshold):
    g = lambda t: sol(t)[index] - threshold  # noqa: E731
    g_lo, g_hi = g(t_lo), g(t_hi)
    if g_hi == 0.0:
        return t_hi
    if g_lo >= 0.0:
        # interpolant disagrees with the mesh value at the left end by rounding only
        return t_lo
    return brentq(g, t_lo, t_hi, xtol=1e-15 * max(1.0, abs(t_hi)), rtol=8.9e-16, maxiter=200)


def _stall_tol(params: Parameters) -> np.ndarray:
    return np.array([1e-14 * params.mu_m * params.K_m, 1e-14 * params.c * params.beta_bm * params.K_m])


def integrate_segment(s0: State, params: Parameters, policy: Optional[ControlPolicy] = None,
                      t_max: float = T_MAX, t0: float = 0.0, rtol: float = RTOL,
                      atol: float = ATOL) -> TrajectorySegment:
    """Flow from ``s0`` for at most ``t_max`` days, stopping on the impulsive set.

    A segment that ends without reaching the guard (``terminated_by`` is
    ``"t_max"`` or ``"converged"``) is the no-hit outcome; it is not an error.
    """
    fun = rhs(params)
    if policy is None:
        return _flow(fun, s0.as_array(), t0, t0 + t_max, rtol=rtol, atol=atol)
    return _flow(
        fun, s0.as_array(), t0, t0 + t_max, guard_index=1, threshold=policy.H_b,
        rtol=rtol, atol=atol, stall_tol=_stall_tol(params),
        grazing_tol=GRAZING_TOL * params.mu_b * policy.H_b,
    )


def _initial_resets(y, policy, guard_index):
    """Reset repeatedly until the starting point lies below the guard."""
    events = []
    y = np.array(y, dtype=float)
    while policy is not None and y[guard_index] >= policy.H_b and y[0] >= 0:
        pre = tuple(float(v) for v in y)
        y = _reset(y, policy, guard_index)
        events.append(ImpulseEvent(0.0, pre, tuple(float(v) for v in y), len(events)))
    return y, events


def _reset(y, policy, guard_index):
    out = y.copy()
    out[0] = (1.0 - policy.p) * y[0]
    if len(y) == 3:
        out[1] = y[1] + policy.q * y[2]
    out[guard_index] = (1.0 - policy.q) * y[guard_index]
    return out


def _simulate(fun, y0, params, policy, t_max, max_impulses, guard_index, rtol, atol):
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    y, events = _initial_resets(y0, policy, guard_index)
    n_initial = len(events)
    segments = []
    t = 0.0
    status = "t_max"
    stall = _stall_tol(params)
    if len(y0) == 3:
        stall = np.array([stall[0], stall[1], stall[1]])
    while True:
        if policy is None:
            seg = _flow(fun, y, t, t_max, rtol=rtol, atol=atol)
        else:
            seg = _flow(fun, y, t, t_max, guard_index=guard_index, threshold=policy.H_b, rtol=rtol,
                        atol=atol, stall_tol=stall, grazing_tol=GRAZING_TOL * params.mu_b * policy.H_b)
        segments.append(seg)
        if seg.terminated_by != "impulse":
            status = seg.terminated_by
            break
        t = seg.t_end
        pre = seg.y[-1].copy()
        # the hit lies on the guard to within EVENT_TOL; snap it there exactly
        # (in 3-D the residual is moved into S_b so that S_b + I_b is untouched)
        if len(pre) == 3:
            pre[1] += pre[2] - policy.H_b
        pre[guard_index] = policy.H_b
        seg.y[-1] = pre
        y = _reset(pre, policy, guard_index)
        events.append(ImpulseEvent(t, tuple(float(v) for v in pre), tuple(float(v) for v in y),
                                   len(events), seg.grazing, seg.guard_residual))
        if len(events) >= max_impulses:
            status = "max_impulses"
            break
        if t >= t_max:
            break
    return segments, events, status, n_initial


def simulate(s0: State, params: Parameters, policy: Optional[ControlPolicy] = None,
             t_max: float = T_MAX, max_impulses: int = MAX_IMPULSES, rtol: float = RTOL,
             atol: float = ATOL) -> Trajectory:
    """Alternate flow and impulses from ``s0`` over [0, t_max]."""
    if s0.I_b > params.N_b:
        raise ConfigError(f"I_b: initial value {s0.I_b!r} exceeds N_b={params.N_b!r}", key="I_b")
    if policy is not None:
        policy.check_against(params)
    segments, events, status, n0 = _simulate(rhs(params), s0.as_array(), params, policy, t_max,
                                             max_impulses, 1, rtol, atol)
    return Trajectory(segments, events, (s0.M, s0.I_b), params, policy, status, n0)


def simulate_full_3d(s0: FullState3D, params: Parameters, policy: Optional[ControlPolicy] = None,
                     t_max: float = T_MAX, max_impulses: int = MAX_IMPULSES, rtol: float = RTOL,
                     atol: float = ATOL) -> Trajectory:
    """Same machinery on the (M, S_b, I_b) system; needs S_b + I_b = N_b."""
    total = s0.S_b + s0.I_b
    if abs(total - params.N_b) > 1e-12 * params.N_b:
        raise ConfigError(f"S_b + I_b = {total!r} must equal N_b={params.N_b!r}", key="S_b")
    if policy is not None:
        policy.check_against(params)
    y0 = np.array([s0.M, s0.S_b, s0.I_b], dtype=float)
    segments, events, status, n0 = _simulate(rhs3(params), y0, params, policy, t_max, max_impulses,
                                             2, rtol, atol)
    return Trajectory(segments, events, (s0.M, s0.S_b, s0.I_b), params, policy, status, n0)


# ---------------------------------------------------------------------------
# CSV emission

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def trajectory_rows(traj: Trajectory, resample_dt: Optional[float] = None):
    """Rows (t, *state, event) for CSV output.

    Each impulse contributes two rows at the same t: the pre-state tagged
    ``impulse_pre`` (or ``grazing_pre``) and the post-state tagged
    ``impulse_post`` (or ``grazing_post``).
    """
    rows = []
    ev_iter = iter(traj.events)
    for _ in range(traj.n_initial_resets):
        rows.extend(_event_rows(next(ev_iter)))
    for seg in traj.segments:
        if resample_dt is None:
            ts, ys = seg.t, seg.y
        else:
            if resample_dt <= 0:
                raise ValueError("resample_dt must be > 0")
            n = int(math.floor(seg.duration / resample_dt + 1e-9))
            grid = seg.t_start + resample_dt * np.arange(n + 1)
            grid = grid[grid < seg.t_end]
            ts = np.append(grid, seg.t_end)
            ys = seg(ts)
            ys[-1] = seg.y[-1]
        last = len(ts) - 1
        for i, (ti, yi) in enumerate(zip(ts, ys)):
            if i == last and seg.terminated_by == "impulse":
                break
            rows.append((ti, *yi, ""))
        if seg.terminated_by == "impulse":
            rows.extend(_event_rows(next(ev_iter)))
    return rows


def _event_rows(e: ImpulseEvent):
    tag = "grazing" if e.grazing else "impulse"
    return [(e.t, *e.pre, f"{tag}_pre"), (e.t, *e.post, f"{tag}_post")]


def write_trajectory_csv(traj: Trajectory, path_or_buf, resample_dt: Optional[float] = None):
    three_d = len(traj.initial) == 3
    header = ["t", "M", "S_b", "I_b", "event"] if three_d else ["t", "M", "I_b", "event"]
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in trajectory_rows(traj, resample_dt):
            w.writerow([_fmt(v) for v in row[:-1]] + [row[-1]])
    finally:
        if own:
            fh.close()


def trajectory_csv_text(traj: Trajectory, resample_dt: Optional[float] = None) -> str:
    buf = io.StringIO()
    write_trajectory_csv(traj, buf, resample_dt)
    return buf.getvalue()
