"""Return map on the post-impulse line, periodic orbits and their multipliers.

Coordinates on the phase line I_b = (1-q) H_b are the post-impulse mosquito
counts x.  One application of the map flows (x, (1-q) H_b) to the threshold
I_b = H_b and culls: F(x) = (1-p) M_hit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from .errors import NoBracketError, NoHitError, SingularKappaError
from .integrator import ATOL, RTOL, T_MAX, TrajectorySegment, integrate_segment
from .model import ControlPolicy, Parameters, State, equilibria, nullcline_markers

FIXED_POINT_TOL = 1e-9  # relative to K_m
CYCLE_TOL = 1e-6  # tail classification, relative to K_m
ORDER2_GRID = 512
QUAD_RTOL = 1e-8


@dataclass
class PoincareSample:
    x_in: float
    x_out: float  # nan when the flow never reaches the threshold
    hit_time: float
    hit: bool
    M_pre: float = float("nan")
    segment: Optional[TrajectorySegment] = field(default=None, repr=False)


@dataclass
class PeriodicOrbit:
    order: int
    anchors: Tuple[float, ...]
    period: float
    segments: List[TrajectorySegment] = field(repr=False)
    residual: float = 0.0  # |F^k(anchor) - anchor|

    @property
    def pre_impulse(self) -> Tuple[float, ...]:
        """M at the threshold just before each jump."""
        return tuple(float(s.y[-1, 0]) for s in self.segments)

    @property
    def flight_times(self) -> Tuple[float, ...]:
        return tuple(s.duration for s in self.segments)

    def orbit_samples(self):
        """Dense (t, y) over one period with t measured from the first anchor."""
        ts, ys, offset = [], [], 0.0
        for s in self.segments:
            ts.append(s.t - s.t_start + offset)
            ys.append(s.y)
            offset += s.duration
        return np.concatenate(ts), np.concatenate(ys)


@dataclass(frozen=True)
class StabilityReport:
    kappa1: float
    integral_term: float
    mu_analytic: float
    mu_numeric: float
    identity_residual: float
    stable: bool


@dataclass
class MapIteration:
    """Result of iterating the return map; ``values`` are the recorded x_n."""

    values: np.ndarray
    pre_values: np.ndarray
    flight_times: np.ndarray
    limit: str  # "order-1" | "order-2" | "undetermined" | "nohit"
    anchors: Tuple[float, ...] = ()
    diagnosis: str = ""


def _check_preconditions(params: Parameters, policy: ControlPolicy):
    policy.check_against(params)
    if params.mu_m <= params.delta_m:
        raise ValueError(
            f"no endemic dynamics: mu_m={params.mu_m!r} <= delta_m={params.delta_m!r} (mosquitoes die out)"
        )
    report = nullcline_markers(params, policy)
    if not report.threshold_reachable:
        raise NoHitError(
            f"threshold H_b={policy.H_b!r} is not below I_b*={report.I_b_star!r}; impulses stop"
        )
    return report


def poincare_map(x: float, params: Parameters, policy: ControlPolicy, t_max: float = T_MAX,
                 rtol: float = RTOL, atol: float = ATOL) -> PoincareSample:
    if not x > 0:
        raise ValueError(f"x must be > 0, got {x!r}")
    seg = integrate_segment(State(x, policy.phase_level), params, policy, t_max=t_max, rtol=rtol, atol=atol)
    if seg.terminated_by != "impulse":
        return PoincareSample(x, float("nan"), float("nan"), False, segment=seg)
    M_hit = float(seg.y[-1, 0])
    return PoincareSample(x, (1.0 - policy.p) * M_hit, seg.duration, True, M_hit, seg)


class _Map:
    """Callable F with NoHit turned into an exception (for root finders)."""

    def __init__(self, params, policy, rtol=RTOL, atol=ATOL, t_max=T_MAX):
        self.params, self.policy = params, policy
        self.kw = dict(rtol=rtol, atol=atol, t_max=t_max)

    def sample(self, x):
        s = poincare_map(x, self.params, self.policy, **self.kw)
        if not s.hit:
            raise NoHitError(f"no threshold crossing from x={x!r} within t_max={self.kw['t_max']!r}")
        return s

    def __call__(self, x):
        return self.sample(x).x_out


def _refine(fun, lo, hi, K_m):
    return brentq(fun, lo, hi, xtol=1e-13 * K_m, rtol=8.9e-16, maxiter=500)


def _build_orbit(F: _Map, anchor: float, order: int) -> PeriodicOrbit:
    segments, x = [], anchor
    anchors = []
    for _ in range(order):
        anchors.append(x)
        s = F.sample(x)
        segments.append(s.segment)
        x = s.x_out
    return PeriodicOrbit(order, tuple(anchors), float(sum(sg.duration for sg in segments)), segments,
                         abs(x - anchor))


def find_order1(params: Parameters, policy: ControlPolicy, rtol: float = RTOL, atol: float = ATOL,
                fp_tol: float = FIXED_POINT_TOL):
    """Locate a fixed point of F on [1e-6 K_m, M*] and assess its stability.

    The bracket rests on F(x) > x for small x and F(M*) = (1-p) M* < M*.
    Returns ``(orbit, stability_report)``.
    """
    report = _check_preconditions(params, policy)
    F = _Map(params, policy, rtol, atol)
    K_m = params.K_m
    lo, hi = 1e-6 * K_m, report.M_star
    g = lambda x: F(x) - x  # noqa: E731
    g_lo, g_hi = g(lo), g(hi)
    if not (g_lo > 0 > g_hi):
        raise NoBracketError("return-map residual does not change sign on [1e-6 K_m, M*]",
                             [(lo, g_lo), (hi, g_hi)])
    x_star = _refine(g, lo, hi, K_m)
    orbit = _build_orbit(F, x_star, 1)
    if orbit.residual > fp_tol * K_m:
        raise NoBracketError(f"refined fixed point misses tolerance ({orbit.residual:.3e})",
                             [(x_star, orbit.residual)])
    return orbit, floquet_multiplier(orbit, params, policy, rtol=rtol, atol=atol)


def refine_order1_near(x: float, params: Parameters, policy: ControlPolicy, rtol: float = RTOL,
                       atol: float = ATOL, width: float = 1e-4):
    """Polish an approximate fixed point (e.g. a converged iteration tail)."""
    F = _Map(params, policy, rtol, atol)
    g = lambda z: F(z) - z  # noqa: E731
    d = width * params.K_m
    lo, hi = max(x - d, 1e-9 * params.K_m), x + d
    g_lo, g_hi = g(lo), g(hi)
    x_star = _refine(g, lo, hi, params.K_m) if g_lo * g_hi < 0 else x
    orbit = _build_orbit(F, x_star, 1)
    return orbit, floquet_multiplier(orbit, params, policy, rtol=rtol, atol=atol)


def iterate_map(x0: float, params: Parameters, policy: ControlPolicy, n_transient: int = 200,
                n_record: int = 50, tol: Optional[float] = None, rtol: float = RTOL,
                atol: float = ATOL) -> MapIteration:
    """Iterate F from ``x0`` and classify the recorded tail.

    Tail classes: ``order-1`` when successive values agree within ``tol``,
    ``order-2`` when values two apart agree but neighbours do not (by more
    than 10 tol), otherwise ``undetermined``.  A flow that stops reaching the
    threshold ends the run with limit ``nohit``.
    """
    if not x0 > 0:
        raise ValueError(f"x0 must be > 0, got {x0!r}")
    tol = CYCLE_TOL * params.K_m if tol is None else tol
    x = x0
    vals, pres, times = [], [], []
    for n in range(n_transient + n_record):
        s = poincare_map(x, params, policy, rtol=rtol, atol=atol)
        if not s.hit:
            return MapIteration(np.array(vals), np.array(pres), np.array(times), "nohit", (),
                                f"no threshold crossing after {n} impulses from x={x!r}")
        x = s.x_out
        if n >= n_transient:
            vals.append(x)
            pres.append(s.M_pre)
            times.append(s.hit_time)
    vals = np.array(vals)
    limit, anchors = classify_tail(vals, tol)
    return MapIteration(vals, np.array(pres), np.array(times), limit, anchors)


def classify_tail(vals: Sequence[float], tol: float):
    vals = np.asarray(vals, dtype=float)
    if vals.size < 3:
        return "undetermined", ()
    d1 = np.abs(np.diff(vals))
    d2 = np.abs(vals[2:] - vals[:-2])
    if d1.max() <= tol:
        return "order-1", (float(vals[-1]),)
    if d2.max() <= tol and d1.min() > 10 * tol:
        a, b = float(vals[-2]), float(vals[-1])
        return "order-2", (min(a, b), max(a, b))
    return "undetermined", ()


def find_order2(params: Parameters, policy: ControlPolicy, rtol: float = RTOL, atol: float = ATOL,
                fp_tol: float = FIXED_POINT_TOL, n_grid: int = ORDER2_GRID) -> Optional[PeriodicOrbit]:
    """Scan h(x) = F(F(x)) - x for a genuine 2-cycle; ``None`` when there is none."""
    report = _check_preconditions(params, policy)
    F = _Map(params, policy, rtol, atol)
    _, cycles = scan_two_cycles(F, 1e-6 * params.K_m, report.M_star, fp_tol * params.K_m,
                                n_grid, xtol=1e-13 * params.K_m)
    if not cycles:
        return None
    return _build_orbit(F, cycles[0][0], 2)


def scan_two_cycles(F, lo: float, hi: float, tol: float, n_grid: int = ORDER2_GRID,
                    xtol: Optional[float] = None):
    """Fixed points and 2-cycles of a scalar map on [lo, hi] by grid scan + Brent.

    Roots of F(F(x)) - x lying within 10 tol of a fixed point (or with
    |F(r) - r| <= 10 tol) are order-1 points and are dropped.  Returns
    ``(fixed_points, cycles)`` with each cycle as an ordered pair (a, F(a)),
    a < F(a), deduplicated.
    """
    xtol = 1e-4 * tol if xtol is None else xtol
    refine = lambda fun, a, b: brentq(fun, a, b, xtol=xtol, rtol=8.9e-16, maxiter=500)  # noqa: E731
    grid = np.geomspace(lo, hi, n_grid)
    F1 = np.array([F(x) for x in grid])
    F2 = np.array([F(y) for y in F1])
    g = F1 - grid
    h = F2 - grid

    fixed = [refine(lambda z: F(z) - z, a, b)
             for a, b, ga, gb in zip(grid[:-1], grid[1:], g[:-1], g[1:]) if ga * gb < 0]
    fixed += [float(x) for x, gx in zip(grid, g) if gx == 0.0]

    cycles = []
    for a, b, ha, hb in zip(grid[:-1], grid[1:], h[:-1], h[1:]):
        if ha * hb >= 0:
            continue
        r = refine(lambda z: F(F(z)) - z, a, b)
        if any(abs(r - f) <= 10 * tol for f in fixed):
            continue
        fr = F(r)
        if abs(fr - r) <= 10 * tol:
            continue
        pair = (min(r, fr), max(r, fr))
        if any(abs(pair[0] - c[0]) <= 10 * tol for c in cycles):
            continue
        cycles.append(pair)
    return fixed, cycles


def _jump_factor(M_pre: float, params: Parameters, policy: ControlPolicy) -> float:
    # ratio (dI_b/dt just after the jump) / (dI_b/dt just before), both scaled by N_b;
    # numerator at ((1-p) M_pre, (1-q) H_b), denominator at (M_pre, H_b)
    cb, N_b, mu_b = params.c * params.beta_bm, params.N_b, params.mu_b
    p, q, H = policy.p, policy.q, policy.H_b
    num = cb * (N_b - (1 - q) * H) * (1 - p) * M_pre - mu_b * (1 - q) * H * N_b
    den = cb * (N_b - H) * M_pre - mu_b * H * N_b
    if abs(den) <= 1e-12:
        raise SingularKappaError(f"kappa denominator {den!r} vanishes at M_pre={M_pre!r} (grazing hit)")
    return num / den


def _segment_integral(seg: TrajectorySegment, integrand) -> float:
    total = 0.0
    for t_lo, t_hi, sol in seg.steps():
        if t_hi <= t_lo:
            continue
        with warnings.catch_warnings():
            # GK21 is exact to rounding on the polynomial interpolant; the
            # roundoff notice only says the requested accuracy is below eps
            warnings.simplefilter("ignore", IntegrationWarning)
            val, _ = quad(lambda t: integrand(sol(t)), t_lo, t_hi, epsabs=0.0, epsrel=QUAD_RTOL, limit=100)
        total += val
    return total


def floquet_multiplier(orbit: PeriodicOrbit, params: Parameters, policy: ControlPolicy,
                       rtol: float = RTOL, atol: float = ATOL, fd_step: float = 1e-5) -> StabilityReport:
    """Analytic multiplier kappa1 * exp(integral_term), checked against F'.

    kappa1 uses the pre-impulse M at the threshold (the jump factor is taken
    at the point before the jump, with post-jump derivatives in the
    numerator).  For an order-2 orbit the jump factors multiply and the
    integrals and the log identity add over both flights.
    """
    mu_m, K_m, delta_m = params.mu_m, params.K_m, params.delta_m
    cb_N, mu_b = params.c * params.beta_bm / params.N_b, params.mu_b
    kappa = 1.0
    for M_pre in orbit.pre_impulse:
        kappa *= _jump_factor(M_pre, params, policy)
    decay = sum(_segment_integral(s, lambda y: (mu_m / K_m + cb_N) * y[0] + mu_b) for s in orbit.segments)
    growth = sum(_segment_integral(s, lambda y: mu_m - delta_m - mu_m / K_m * y[0]) for s in orbit.segments)
    integral_term = -decay
    mu_analytic = kappa * math.exp(integral_term)
    identity_residual = abs(orbit.order * math.log(1.0 / (1.0 - policy.p)) - growth)

    F = _Map(params, policy, rtol, atol)
    x = orbit.anchors[0]
    h = fd_step * x

    def Fk(z):
        for _ in range(orbit.order):
            z = F(z)
        return z

    mu_numeric = (Fk(x + h) - Fk(x - h)) / (2 * h)
    return StabilityReport(kappa, integral_term, mu_analytic, mu_numeric, identity_residual,
                           abs(mu_analytic) < 1.0)


def report_lines(orbit: PeriodicOrbit, stab: Optional[StabilityReport] = None) -> List[str]:
    """Flat key=value lines for an orbit and (optionally) its stability report."""
    f = lambda v: format(float(v), ".17g")  # noqa: E731
    lines = [f"order={orbit.order}", f"period={f(orbit.period)}", f"closure_residual={f(orbit.residual)}"]
    lines += [f"anchor_{i}={f(a)}" for i, a in enumerate(orbit.anchors)]
    lines += [f"pre_impulse_M_{i}={f(m)}" for i, m in enumerate(orbit.pre_impulse)]
    if stab is not None:
        lines += [
            f"kappa1={f(stab.kappa1)}",
            f"integral_term={f(stab.integral_term)}",
            f"mu_analytic={f(stab.mu_analytic)}",
            f"mu_numeric={f(stab.mu_numeric)}",
            f"identity_residual={f(stab.identity_residual)}",
            f"stable={str(stab.stable).lower()}",
        ]
    return lines
