"""Mosquito / infected-bird model: parameters, vector field and closed-form analysis.

The reduced planar system is

    dM/dt   = mu_m M (1 - M/K_m) - delta_m M
    dI_b/dt = c beta_bm (1 - I_b/N_b) M - mu_b I_b

with the state-dependent impulse M -> (1-p) M, I_b -> (1-q) I_b fired when
I_b reaches the threshold H_b.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, fields
from typing import Mapping, Optional, Tuple

import numpy as np

from .errors import ConfigError

PARAMETER_KEYS = ("mu_m", "K_m", "delta_m", "mu_b", "c", "beta_bm", "N_b")
POLICY_KEYS = ("p", "q", "H_b")

# zero band for region classification, relative to each component's natural scale
REGION_ZERO_TOL = 1e-12


def _require(cond, key, message):
    if not cond:
        raise ConfigError(f"{key}: {message}", key=key)


@dataclass(frozen=True)
class Parameters:
    """Biological constants (rates per day, populations in individuals)."""

    mu_m: float
    K_m: float
    delta_m: float
    mu_b: float
    c: float
    beta_bm: float
    N_b: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            _require(isinstance(v, (int, float)) and math.isfinite(v), f.name, "must be a finite number")
            _require(v > 0, f.name, f"must be > 0, got {v!r}")
        _require(self.beta_bm <= 1, "beta_bm", f"must lie in (0, 1], got {self.beta_bm!r}")

    @property
    def r(self) -> float:
        """Net intrinsic mosquito growth rate mu_m - delta_m."""
        return self.mu_m - self.delta_m

    @property
    def infection_rate(self) -> float:
        return self.c * self.beta_bm

    def to_kv(self) -> dict:
        return asdict(self)

    @classmethod
    def from_kv(cls, kv: Mapping[str, float]) -> "Parameters":
        missing = [k for k in PARAMETER_KEYS if k not in kv]
        if missing:
            raise ConfigError(f"missing parameter(s): {', '.join(missing)}", key=missing[0])
        return cls(**{k: float(kv[k]) for k in PARAMETER_KEYS})


@dataclass(frozen=True)
class ControlPolicy:
    """Impulse triple: cull fraction p, cure fraction q and threshold H_b."""

    p: float
    q: float
    H_b: float

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            _require(isinstance(v, (int, float)) and 0 < v < 1, name, f"must lie in (0, 1), got {v!r}")
        _require(isinstance(self.H_b, (int, float)) and self.H_b > 0, "H_b", f"must be > 0, got {self.H_b!r}")

    @classmethod
    def unchecked(cls, p: float, q: float, H_b: float) -> "ControlPolicy":
        """Build a policy without domain checks (degenerate limits in tests)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "p", float(p))
        object.__setattr__(obj, "q", float(q))
        object.__setattr__(obj, "H_b", float(H_b))
        return obj

    def check_against(self, params: Parameters) -> "ControlPolicy":
        _require(self.H_b < params.N_b, "H_b", f"must satisfy 0 < H_b < N_b={params.N_b!r}, got {self.H_b!r}")
        return self

    @property
    def phase_level(self) -> float:
        """I_b coordinate of the post-impulse line, (1-q) H_b."""
        return (1.0 - self.q) * self.H_b

    def to_kv(self) -> dict:
        return asdict(self)

    @classmethod
    def from_kv(cls, kv: Mapping[str, float]) -> Optional["ControlPolicy"]:
        present = [k for k in POLICY_KEYS if k in kv]
        if not present:
            return None
        if len(present) != len(POLICY_KEYS):
            missing = [k for k in POLICY_KEYS if k not in kv]
            raise ConfigError(
                f"policy keys must be given together; missing {', '.join(missing)}", key=missing[0]
            )
        return cls(*(float(kv[k]) for k in POLICY_KEYS))


@dataclass(frozen=True)
class State:
    M: float
    I_b: float

    def __post_init__(self):
        _require(self.M >= 0, "M", f"must be >= 0, got {self.M!r}")
        _require(self.I_b >= 0, "I_b", f"must be >= 0, got {self.I_b!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.M, self.I_b], dtype=float)


@dataclass(frozen=True)
class EquilibriumSet:
    disease_free: State
    endemic: Optional[State]

    @property
    def endemic_exists(self) -> bool:
        return self.endemic is not None


@dataclass(frozen=True)
class RegimeReport:
    """Nullcline markers on the two horizontal guard lines plus the regime flags.

    ``case_a`` is the hypothesis (1-p) M* < N_mq (order-1 or order-2 cycle),
    ``case_b`` is (1-p) N_mh > N_mq (unique, globally attracting order-1 cycle).
    """

    M_star: float
    N_mq: float
    N_mh: float
    case_a: bool
    case_b: bool
    threshold_reachable: bool
    I_b_star: float = float("nan")


class Region(str, enum.Enum):
    OMEGA1 = "Omega1"  # dM > 0, dI_b < 0
    OMEGA2 = "Omega2"  # dM > 0, dI_b > 0
    OMEGA3 = "Omega3"  # dM < 0, dI_b > 0
    OMEGA4 = "Omega4"  # dM < 0, dI_b < 0
    BOUNDARY = "boundary"


def vector_field(s: State, params: Parameters) -> Tuple[float, float]:
    M, I_b = s.M, s.I_b
    dM = params.mu_m * M * (1.0 - M / params.K_m) - params.delta_m * M
    dI = params.c * params.beta_bm * (1.0 - I_b / params.N_b) * M - params.mu_b * I_b
    return dM, dI


def rhs(params: Parameters):
    """Return ``f(t, y)`` for the planar flow, in the form ODE steppers expect."""
    mu_m, K_m, delta_m = params.mu_m, params.K_m, params.delta_m
    cb, N_b, mu_b = params.c * params.beta_bm, params.N_b, params.mu_b

    def f(t, y):
        M, I_b = y[0], y[1]
        return np.array([mu_m * M * (1.0 - M / K_m) - delta_m * M, cb * (1.0 - I_b / N_b) * M - mu_b * I_b])

    return f


def rhs3(params: Parameters):
    """Right-hand side of the un-reduced (M, S_b, I_b) system."""
    mu_m, K_m, delta_m = params.mu_m, params.K_m, params.delta_m
    cb, mu_b = params.c * params.beta_bm, params.mu_b

    def f(t, y):
        M, S_b, I_b = y[0], y[1], y[2]
        N = S_b + I_b
        force = cb * S_b / N * M
        return np.array([
            mu_m * M * (1.0 - M / K_m) - delta_m * M,
            mu_b * (S_b + I_b) - force - mu_b * S_b,
            force - mu_b * I_b,
        ])

    return f


def dulac_divergence(params: Parameters) -> float:
    """Divergence of (P/M, Q/M); constant and strictly negative, so no closed orbits."""
    return -params.mu_m / params.K_m - params.c * params.beta_bm / params.N_b - params.mu_b


def equilibria(params: Parameters) -> EquilibriumSet:
    origin = State(0.0, 0.0)
    if params.mu_m <= params.delta_m:
        return EquilibriumSet(origin, None)
    r = params.mu_m - params.delta_m
    cb = params.c * params.beta_bm
    M_star = params.K_m * r / params.mu_m
    I_star = cb * params.K_m * params.N_b * r / (cb * params.K_m * r + params.mu_m * params.mu_b * params.N_b)
    return EquilibriumSet(origin, State(M_star, I_star))


def jacobian(params: Parameters, s: State) -> np.ndarray:
    cb = params.c * params.beta_bm
    return np.array([
        [params.mu_m - params.delta_m - 2.0 * params.mu_m * s.M / params.K_m, 0.0],
        [cb * (1.0 - s.I_b / params.N_b), -cb * s.M / params.N_b - params.mu_b],
    ])


def jacobian_eigenvalues(params: Parameters, s: State) -> Tuple[float, float]:
    # lower-triangular Jacobian: eigenvalues are the diagonal entries
    J = jacobian(params, s)
    return float(J[0, 0]), float(J[1, 1])


def ib_nullcline(M, params: Parameters):
    """I_b on the curve dI_b/dt = 0 as a function of M."""
    cb = params.c * params.beta_bm
    M = np.asarray(M, dtype=float)
    return cb * params.N_b * M / (cb * M + params.mu_b * params.N_b)


def _marker(level: float, params: Parameters) -> float:
    # M where the I_b-nullcline crosses the horizontal line I_b = level
    return params.mu_b * params.N_b * level / (params.c * params.beta_bm * (params.N_b - level))


def nullcline_markers(params: Parameters, policy: ControlPolicy) -> RegimeReport:
    if policy.H_b >= params.N_b:
        raise ConfigError(
            f"H_b: threshold {policy.H_b!r} must be below N_b={params.N_b!r}", key="H_b"
        )
    N_mq = _marker(policy.phase_level, params)
    N_mh = _marker(policy.H_b, params)
    eq = equilibria(params)
    if eq.endemic is not None:
        M_star, I_star = eq.endemic.M, eq.endemic.I_b
    else:
        M_star, I_star = 0.0, 0.0
    keep = 1.0 - policy.p
    return RegimeReport(
        M_star=M_star,
        N_mq=N_mq,
        N_mh=N_mh,
        case_a=keep * M_star < N_mq,
        case_b=keep * N_mh > N_mq,
        threshold_reachable=policy.H_b < I_star,
        I_b_star=I_star,
    )


def classify_region(s: State, params: Parameters) -> Region:
    dM, dI = vector_field(s, params)
    tol_M = REGION_ZERO_TOL * params.mu_m * params.K_m
    tol_I = REGION_ZERO_TOL * params.c * params.beta_bm * params.K_m
    if abs(dM) <= tol_M or abs(dI) <= tol_I:
        return Region.BOUNDARY
    if dM > 0:
        return Region.OMEGA2 if dI > 0 else Region.OMEGA1
    return Region.OMEGA3 if dI > 0 else Region.OMEGA4
