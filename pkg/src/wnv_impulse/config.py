"""Plain-text ``key=value`` scenario configs."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import FrozenSet, Optional

from .errors import ConfigError
from .model import PARAMETER_KEYS, POLICY_KEYS, ControlPolicy, Parameters, State

RUN_KEYS = ("M0", "I_b0", "t_max", "resample_dt", "outputs")
KNOWN_KEYS = PARAMETER_KEYS + POLICY_KEYS + RUN_KEYS
OUTPUT_KINDS = ("trajectory_csv", "phase_svg", "timeseries_svg", "report")
DEFAULT_OUTPUTS = frozenset({"trajectory_csv", "report"})


@dataclass(frozen=True)
class ScenarioConfig:
    parameters: Parameters
    policy: Optional[ControlPolicy]
    initial: State
    t_max: float = 1e4
    resample_dt: float = 1.0
    outputs: FrozenSet[str] = field(default=DEFAULT_OUTPUTS)

    def __post_init__(self):
        if not self.resample_dt > 0:
            raise ConfigError(f"resample_dt: must be > 0, got {self.resample_dt!r}", key="resample_dt")
        if not self.t_max > 0:
            raise ConfigError(f"t_max: must be > 0, got {self.t_max!r}", key="t_max")
        bad = set(self.outputs) - set(OUTPUT_KINDS)
        if bad:
            raise ConfigError(f"outputs: unknown kind(s) {sorted(bad)}; expected {OUTPUT_KINDS}", key="outputs")
        if self.initial.I_b > self.parameters.N_b:
            raise ConfigError(f"I_b0: must not exceed N_b={self.parameters.N_b!r}", key="I_b0")
        if self.policy is not None:
            self.policy.check_against(self.parameters)

    def with_policy(self, **changes) -> "ScenarioConfig":
        return replace(self, policy=replace(self.policy, **changes))

    def to_kv(self) -> dict:
        kv = dict(self.parameters.to_kv())
        if self.policy is not None:
            kv.update(self.policy.to_kv())
        kv.update(M0=self.initial.M, I_b0=self.initial.I_b, t_max=self.t_max, resample_dt=self.resample_dt)
        kv["outputs"] = ",".join(k for k in OUTPUT_KINDS if k in self.outputs)
        return kv


def format_config(cfg: ScenarioConfig) -> str:
    lines = []
    for k, v in cfg.to_kv().items():
        lines.append(f"{k}={v if isinstance(v, str) else repr(float(v))}")
    return "\n".join(lines) + "\n"


def _parse_number(key, text, lineno):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}", key=key, line=lineno) from None


def parse_config_text(text: str) -> ScenarioConfig:
    raw, where = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", key=key, line=lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r} (first set on line {where[key]})", key=key, line=lineno)
        raw[key] = value
        where[key] = lineno

    for key in PARAMETER_KEYS + ("M0", "I_b0"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}", key=key)

    nums = {k: _parse_number(k, v, where[k]) for k, v in raw.items() if k != "outputs"}
    outputs = DEFAULT_OUTPUTS
    if "outputs" in raw:
        outputs = frozenset(o.strip() for o in raw["outputs"].split(",") if o.strip())

    try:
        params = Parameters.from_kv(nums)
        policy = ControlPolicy.from_kv(nums)
        initial = State(nums["M0"], nums["I_b0"])
        return ScenarioConfig(
            params, policy, initial,
            t_max=nums.get("t_max", 1e4),
            resample_dt=nums.get("resample_dt", 1.0),
            outputs=outputs,
        )
    except ConfigError as exc:
        key = {"M": "M0", "I_b": "I_b0"}.get(exc.key, exc.key)
        if key in where and exc.line is None:
            raise ConfigError(str(exc), key=key, line=where[key]) from None
        raise


def parse_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    return parse_config_text(text)
