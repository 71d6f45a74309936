"""Scenario configuration: dataclasses, validation and TOML/JSON loading."""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .channel import PathLossModel, ScenarioGeometry

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PenaltyConfig:
    rho0: float = 100.0
    step_c: float = 0.7
    tol_penalty: float = 1e-10
    tol_obj: float = 1e-6
    max_outer: int = 120
    max_inner: int = 30
    tol_inner: float = 1e-10
    bisect_tol: float = 1e-9

    def __post_init__(self):
        if not 0 < self.step_c < 1:
            raise ConfigError("penalty.step_c must lie in (0, 1)")
        if self.rho0 <= 0:
            raise ConfigError("penalty.rho0 must be positive")
        for name in ("tol_penalty", "tol_obj", "tol_inner", "bisect_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"penalty.{name} must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ConfigError("penalty iteration caps must be >= 1")


@dataclass(frozen=True)
class PhaseOptions:
    n_trials: int = 200
    max_mm: int = 5
    tol: float = 1e-4
    sdp_tol: float = 1e-7
    sdp_max_iter: int = 200

    def __post_init__(self):
        if self.n_trials < 1 or self.max_mm < 1:
            raise ConfigError("phase.n_trials and phase.max_mm must be >= 1")


@dataclass(frozen=True)
class AoOptions:
    n_max: int = 30
    tol: float = 1e-4
    init_redraws: int = 50

    def __post_init__(self):
        if self.n_max < 1:
            raise ConfigError("ao.n_max must be >= 1")


@dataclass(frozen=True)
class AlgoConfig:
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    phase: PhaseOptions = field(default_factory=PhaseOptions)
    ao: AoOptions = field(default_factory=AoOptions)


@dataclass(frozen=True)
class ScenarioConfig:
    """Full experiment definition with the reference scenario as defaults."""

    n_t: int = 4
    n_r: int = 4
    m_k: int = 2
    k_users: int = 2
    d_k: int = 2
    l_elems: int = 20
    p0_w: float = 1.0
    gamma0_db: float = 30.0
    bandwidth_hz: float = 10e6
    noise_density_dbm_hz: float = -174.0
    spacing_ratio: float = 0.5
    k_rician: float = 3.0
    seed: int = 0
    # radar gain: explicit value, or derived from the RIS-target path loss
    eta: float | None = None
    eta_mode: str = "fixed"
    eta_db: float = -30.0
    sigma2: float | None = None
    sigma2_r: float | None = None
    geometry: ScenarioGeometry = field(default_factory=ScenarioGeometry)
    pathloss: PathLossModel = field(default_factory=PathLossModel)
    algo: AlgoConfig = field(default_factory=AlgoConfig)

    def __post_init__(self):
        for name in ("n_t", "n_r", "m_k", "k_users", "d_k", "l_elems"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n_r != self.n_t:
            raise ConfigError("the MVDR receiver shares the transmit array: n_r must equal n_t")
        if self.d_k > min(self.n_t, self.m_k):
            raise ConfigError("d_k must not exceed min(n_t, m_k)")
        if self.p0_w <= 0:
            raise ConfigError("p0_w must be positive")
        if self.eta_mode not in ("fixed", "round_trip", "one_way"):
            raise ConfigError("eta_mode must be 'fixed', 'round_trip' or 'one_way'")

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with changes; dotted keys (``"pathloss.alpha_bu"``) reach nested sections."""
        flat = {k: v for k, v in changes.items() if "." not in k}
        nested: dict[str, dict[str, Any]] = {}
        for k, v in changes.items():
            if "." in k:
                head, tail = k.split(".", 1)
                nested.setdefault(head, {})[tail] = v
        for head, sub in nested.items():
            obj = getattr(self, head)
            if head == "algo":
                groups: dict[str, dict[str, Any]] = {}
                for kk, vv in sub.items():
                    g, name = kk.split(".", 1)
                    groups.setdefault(g, {})[name] = vv
                obj = dataclasses.replace(obj, **{g: dataclasses.replace(getattr(obj, g), **kv)
                                                  for g, kv in groups.items()})
            else:
                obj = dataclasses.replace(obj, **sub)
            flat[head] = obj
        return dataclasses.replace(self, **flat)

    @property
    def gamma0(self) -> float:
        return 0.0 if math.isinf(self.gamma0_db) and self.gamma0_db < 0 else 10.0 ** (self.gamma0_db / 10.0)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        # JSON has no -inf
        if math.isinf(d["gamma0_db"]):
            d["gamma0_db"] = "-inf"
        return d


def _build(cls, data: dict[str, Any], where: str):
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, value in data.items():
        f = names[key]
        sub = {"geometry": ScenarioGeometry, "pathloss": PathLossModel, "algo": AlgoConfig,
               "penalty": PenaltyConfig, "phase": PhaseOptions, "ao": AoOptions}.get(key)
        if sub is not None and isinstance(value, dict):
            value = _build(sub, value, f"{where}.{key}" if where else key)
        elif isinstance(value, list):
            value = tuple(value)
        if key == "gamma0_db" and isinstance(value, str):
            value = float(value)
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where or 'scenario'}: {exc}") from exc


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    return _build(ScenarioConfig, dict(data), "")


def load_config(path: str | Path) -> ScenarioConfig:
    """Load a scenario from ``.toml`` or ``.json``; missing keys keep their defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(data)
