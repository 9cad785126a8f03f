"""Run configuration: strict JSON parsing and object builders.

Unknown keys are rejected everywhere; reproducibility beats leniency. A seed
is mandatory because every randomized sampler derives from it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .integrator import StepControl
from .modified import ModifiedSaturation
from .saturation import (
    SaturationFn,
    arctan_saturation,
    load_custom_saturation_csv,
    standard_saturation,
    tanh_saturation,
    validate_saturation,
)
from .systems import SystemSpec


def _take(d: dict, allowed: dict, where: str) -> dict:
    """Return defaults updated by d, rejecting unknown keys."""
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    out = dict(allowed)
    out.update(d)
    return out


@dataclass(frozen=True)
class SigmaConfig:
    kind: str = "standard"
    normalized: bool = True
    path: Optional[str] = None

    @staticmethod
    def parse(d: dict) -> "SigmaConfig":
        v = _take(d, {"kind": "standard", "normalized": True, "path": None}, "sigma")
        if v["kind"] not in ("standard", "tanh", "arctan", "custom"):
            raise ConfigError(f"sigma.kind: unknown kind {v['kind']!r}")
        if v["kind"] == "custom" and not v["path"]:
            raise ConfigError("sigma.path is required for a custom sigma")
        return SigmaConfig(**v)

    def build(self) -> SaturationFn:
        if self.kind == "standard":
            sat = standard_saturation()
        elif self.kind == "tanh":
            sat = tanh_saturation()
        elif self.kind == "arctan":
            sat = arctan_saturation()
        else:
            sat = load_custom_saturation_csv(self.path)
            report = validate_saturation(sat)
            if not report.passed:
                failing = [k for k, v in report.to_dict().items()
                           if isinstance(v, bool) and not v]
                raise ConfigError(
                    f"custom sigma from {self.path} fails validation: {failing}")
        return sat.normalized() if self.normalized else sat


@dataclass(frozen=True)
class ControlConfig:
    mode: str = "fixed"
    h: float = 1e-3
    rtol: float = 1e-8
    atol: float = 1e-10
    h_max: float = math.inf

    @staticmethod
    def parse(d: dict) -> "ControlConfig":
        v = _take(d, {"mode": "fixed", "h": 1e-3, "rtol": 1e-8, "atol": 1e-10,
                      "h_max": math.inf}, "control")
        if v["mode"] not in ("fixed", "adaptive"):
            raise ConfigError("control.mode must be 'fixed' or 'adaptive'")
        for key in ("h", "rtol", "atol", "h_max"):
            if not (float(v[key]) > 0):
                raise ConfigError(f"control.{key} must be positive")
        return ControlConfig(**v)

    def build(self) -> StepControl:
        if self.mode == "fixed":
            return StepControl.fixed(self.h)
        return StepControl.adaptive(self.rtol, self.atol, self.h_max)


@dataclass(frozen=True)
class SystemConfig:
    kind: str = "t0"
    eps: Optional[float] = None
    K: Optional[tuple] = None
    n: int = 2
    omega: Optional[float] = None
    b: Optional[tuple] = None
    input: Optional[dict] = None

    @staticmethod
    def parse(d: dict) -> "SystemConfig":
        v = _take(d, {"kind": "t0", "eps": None, "K": None, "n": 2,
                      "omega": None, "b": None, "input": None}, "system")
        if v["kind"] not in ("cdi", "s1", "s_eps", "t_eps", "t0", "di", "fn"):
            raise ConfigError(f"system.kind: unknown kind {v['kind']!r}")
        if v["K"] is not None:
            v["K"] = tuple(float(x) for x in v["K"])
        if v["b"] is not None:
            v["b"] = tuple(float(x) for x in v["b"])
        if v["input"] is not None:
            inp = _take(v["input"], {"type": "zero", "amplitude": 1.0,
                                     "frequency": 1.0}, "system.input")
            if inp["type"] not in ("zero", "sin"):
                raise ConfigError("system.input.type must be 'zero' or 'sin'")
            v["input"] = inp
        return SystemConfig(**v)

    def build(self, sat: SaturationFn, modsat: Optional[ModifiedSaturation]) -> SystemSpec:
        kind = self.kind
        if kind == "t0":
            return SystemSpec.t0(modsat)
        if kind == "fn":
            return SystemSpec.fn(int(self.n), modsat)
        if kind == "di":
            return SystemSpec.di(sat)
        if kind == "t_eps":
            return SystemSpec.t_eps(self._need("eps"), sat)
        if kind == "s_eps":
            return SystemSpec.s_eps(self._need("eps"), np.array(self._need("K")), sat)
        if kind == "s1":
            return SystemSpec.s1(np.array(self._need("K")), sat)
        input_fn = None
        if self.input and self.input["type"] == "sin":
            amp, freq = self.input["amplitude"], self.input["frequency"]
            input_fn = lambda t: amp * math.sin(freq * t)  # noqa: E731
        return SystemSpec.cdi(self._need("omega"), np.array(self._need("b")), sat,
                              input_fn=input_fn)

    def _need(self, key: str):
        val = getattr(self, key)
        if val is None:
            raise ConfigError(f"system.{key} is required for kind {self.kind!r}")
        return val

    @staticmethod
    def from_spec(spec: SystemSpec) -> "SystemConfig":
        """Serialize a spec back into the config schema (input maps excluded)."""
        kind = spec.kind.value
        return SystemConfig(
            kind=kind,
            eps=spec.eps,
            K=None if spec.K is None else tuple(float(x) for x in spec.K),
            n=2 if spec.n is None else int(spec.n),
            omega=spec.omega,
            b=None if spec.b is None else tuple(float(x) for x in spec.b),
            input=None,
        )

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.eps is not None:
            out["eps"] = self.eps
        if self.K is not None:
            out["K"] = list(self.K)
        if self.kind == "fn":
            out["n"] = self.n
        if self.omega is not None:
            out["omega"] = self.omega
        if self.b is not None:
            out["b"] = list(self.b)
        if self.input is not None:
            out["input"] = dict(self.input)
        return out


@dataclass(frozen=True)
class SimulateConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    initial_state: tuple = (1.0, 0.0, 0.0, 0.0)
    t_final: float = 10.0
    sample_dt: float = 0.01
    control: ControlConfig = field(default_factory=ControlConfig)
    diagnostics: bool = True

    @staticmethod
    def parse(d: dict) -> "SimulateConfig":
        v = _take(d, {"system": {}, "initial_state": [1.0, 0.0, 0.0, 0.0],
                      "t_final": 10.0, "sample_dt": 0.01, "control": {},
                      "diagnostics": True}, "simulate")
        if not (float(v["t_final"]) > 0 and float(v["sample_dt"]) > 0):
            raise ConfigError("simulate.t_final and simulate.sample_dt must be positive")
        return SimulateConfig(
            system=SystemConfig.parse(v["system"]),
            initial_state=tuple(float(x) for x in v["initial_state"]),
            t_final=float(v["t_final"]),
            sample_dt=float(v["sample_dt"]),
            control=ControlConfig.parse(v["control"]),
            diagnostics=bool(v["diagnostics"]),
        )


@dataclass(frozen=True)
class AveragingConfig:
    radii: tuple = (0.1, 1.0, 10.0)
    n_angles: int = 8
    window: tuple = (0.0, 0.77)
    eps_seq: tuple = (0.1, 0.05, 0.025)
    threshold: float = 0.05

    @staticmethod
    def parse(d: dict) -> "AveragingConfig":
        v = _take(d, {"radii": [0.1, 1.0, 10.0], "n_angles": 8,
                      "window": [0.0, 0.77], "eps_seq": [0.1, 0.05, 0.025],
                      "threshold": 0.05}, "verify.averaging")
        return AveragingConfig(
            radii=tuple(float(x) for x in v["radii"]),
            n_angles=int(v["n_angles"]),
            window=tuple(float(x) for x in v["window"]),
            eps_seq=tuple(float(x) for x in v["eps_seq"]),
            threshold=float(v["threshold"]),
        )


@dataclass(frozen=True)
class VerifyConfig:
    eps_list: tuple = (0.05, 0.02)
    hurwitz_eps: tuple = (1.0, 0.1, 0.01)
    rho: float = 0.1
    R: float = 50.0
    radii: tuple = (1.0, 5.0, 20.0)
    n_starts: int = 8
    horizon: float = 10.0
    capture_t_max: float = 1000.0
    t0_time: float = 120.0
    averaging: AveragingConfig = field(default_factory=AveragingConfig)

    @staticmethod
    def parse(d: dict) -> "VerifyConfig":
        v = _take(d, {"eps_list": [0.05, 0.02], "hurwitz_eps": [1.0, 0.1, 0.01],
                      "rho": 0.1, "R": 50.0, "radii": [1.0, 5.0, 20.0],
                      "n_starts": 8, "horizon": 10.0, "capture_t_max": 1000.0,
                      "t0_time": 120.0, "averaging": {}}, "verify")
        for key in ("rho", "R", "horizon", "capture_t_max", "t0_time"):
            if not (float(v[key]) > 0):
                raise ConfigError(f"verify.{key} must be positive")
        return VerifyConfig(
            eps_list=tuple(float(x) for x in v["eps_list"]),
            hurwitz_eps=tuple(float(x) for x in v["hurwitz_eps"]),
            rho=float(v["rho"]), R=float(v["R"]),
            radii=tuple(float(x) for x in v["radii"]),
            n_starts=int(v["n_starts"]), horizon=float(v["horizon"]),
            capture_t_max=float(v["capture_t_max"]), t0_time=float(v["t0_time"]),
            averaging=AveragingConfig.parse(v["averaging"]),
        )


@dataclass(frozen=True)
class SweepConfig:
    eps_grid: tuple = (0.05, 0.02)
    rho_grid: tuple = (0.1,)
    r_grid: tuple = (50.0,)
    n_starts: int = 6

    @staticmethod
    def parse(d: dict) -> "SweepConfig":
        v = _take(d, {"eps_grid": [0.05, 0.02], "rho_grid": [0.1],
                      "r_grid": [50.0], "n_starts": 6}, "sweep")
        for key in ("eps_grid", "rho_grid", "r_grid"):
            if not v[key]:
                raise ConfigError(f"sweep.{key} must be non-empty")
        return SweepConfig(
            eps_grid=tuple(float(x) for x in v["eps_grid"]),
            rho_grid=tuple(float(x) for x in v["rho_grid"]),
            r_grid=tuple(float(x) for x in v["r_grid"]),
            n_starts=int(v["n_starts"]),
        )


@dataclass(frozen=True)
class RunConfig:
    seed: int
    sigma: SigmaConfig
    out_dir: Optional[str]
    simulate: SimulateConfig
    verify: VerifyConfig
    sweep: SweepConfig
    tolerances: dict
    raw: dict = field(compare=False, repr=False, default_factory=dict)

    @staticmethod
    def parse(d: dict) -> "RunConfig":
        v = _take(d, {"seed": None, "sigma": {}, "out_dir": None, "simulate": {},
                      "verify": {}, "sweep": {}, "tolerances": {}}, "config")
        if v["seed"] is None:
            raise ConfigError("config.seed is mandatory")
        tol = v["tolerances"]
        if not isinstance(tol, dict):
            raise ConfigError("config.tolerances must be an object")
        for key, value in tol.items():
            if not (isinstance(value, (int, float)) and value > 0):
                raise ConfigError(f"tolerances.{key} must be a positive number")
        return RunConfig(
            seed=int(v["seed"]),
            sigma=SigmaConfig.parse(v["sigma"]),
            out_dir=v["out_dir"],
            simulate=SimulateConfig.parse(v["simulate"]),
            verify=VerifyConfig.parse(v["verify"]),
            sweep=SweepConfig.parse(v["sweep"]),
            tolerances=dict(tol),
            raw=d,
        )


def load_config(path: str | Path, seed_override: Optional[int] = None,
                out_override: Optional[str] = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if seed_override is not None:
        raw = dict(raw)
        raw["seed"] = int(seed_override)
    if out_override is not None:
        raw = dict(raw)
        raw["out_dir"] = str(out_override)
    return RunConfig.parse(raw)


def config_hash(cfg: RunConfig) -> str:
    """Hash of the semantic run parameters (the output location is not one)."""
    semantic = {k: v for k, v in cfg.raw.items() if k != "out_dir"}
    canonical = json.dumps(semantic, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
