"""Scenario configuration files (YAML) and their translation into library objects."""

from __future__ import annotations

import hashlib
import math
from pathlib import Path
from typing import Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import design
from .amplitudes import Resonance1D, Resonance2D, coupling_2d_table, find_blockade_detuning
from .dynamics import (
    IntegratorControls,
    PulseEnvelope,
    StateVector1D,
    StateVector2D,
    pi_pulse_coupling,
    pulse_coupling,
    tune_cat_pulse,
)
from .errors import DomainError

__all__ = ["ScenarioConfig", "ConfigError", "load_config", "Scenario", "build_scenario", "ValidationError"]


class ConfigError(DomainError):
    """The configuration file is unreadable or inconsistent."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BlockadeTarget(_Strict):
    n_bk: int = Field(ge=1)
    root_index: int = Field(default=1, ge=1)


class DriveConfig(_Strict):
    N_m: int | None = Field(default=None, ge=1)
    delta_p: float | None = None
    blockade: BlockadeTarget | None = None
    coupling: Union[float, str] = "pi-pulse"
    tau_KD: float | None = Field(default=None, gt=0)
    # 2D entangling ladder
    ladder: tuple[int, int] | None = None
    delta_px: float | None = None
    delta_py: float | None = None
    blockade_x: BlockadeTarget | None = None
    trap_ratio: float = Field(default=1.0, gt=0)

    @field_validator("coupling")
    @classmethod
    def _coupling_form(cls, v):
        if isinstance(v, str):
            if v == "pi-pulse":
                return v
            head, _, tail = v.partition(":")
            try:
                if head == "area":
                    float(tail)
                    return v
                if head == "tune-cat":
                    int(tail)
                    return v
            except ValueError:
                pass
            raise ValueError("coupling must be a number, 'pi-pulse', 'area:<multiple of pi>' or 'tune-cat:<n_max>'")
        return float(v)

    @model_validator(mode="after")
    def _consistent(self):
        if self.ladder is None:
            if self.delta_p is not None and self.blockade is not None:
                raise ValueError("give either delta_p or blockade, not both")
        else:
            if any(k < 0 for k in self.ladder) or sum(self.ladder) == 0:
                raise ValueError("ladder steps must be non-negative and not both zero")
            if self.delta_px is not None and self.blockade_x is not None:
                raise ValueError("give either delta_px or blockade_x, not both")
            if isinstance(self.coupling, str) and self.coupling.startswith("tune-cat"):
                raise ValueError("tune-cat is only available for 1D ladders")
        return self

    @property
    def is_2d(self) -> bool:
        return self.ladder is not None


class ParticleConfig(_Strict):
    kind: Literal["charged", "polarizable"]
    mass: float = Field(gt=0)
    charge: float | None = None
    polarizability: float | None = None

    @model_validator(mode="after")
    def _fields(self):
        if self.kind == "charged" and (self.charge is None or self.polarizability is not None):
            raise ValueError("charged particles need 'charge' and no 'polarizability'")
        if self.kind == "polarizable" and (self.polarizability is None or self.charge is not None):
            raise ValueError("polarizable particles need 'polarizability' and no 'charge'")
        return self


class TrapConfig(_Strict):
    lambda_TL: float = Field(gt=0)
    I_S: float = Field(gt=0)
    W_y_TL: float = Field(gt=0)
    W_z_TL: float = Field(gt=0)
    tau_TL: float = Field(ge=0)
    v_z: float = Field(gt=0)
    avg_power: float | None = None


class KDConfig(_Strict):
    I_KD: float = Field(ge=0)
    tau_KD: float = Field(gt=0)
    W_y_KD: float = Field(gt=0)
    W_z_KD: float = Field(gt=0)
    N_m: int = Field(ge=1)
    delta_p: float
    avg_power: float | None = None


class SimulationConfig(_Strict):
    truncation: Union[int, tuple[int, int], None] = None
    initial: Union[int, tuple[int, int]] = 0
    carrier_mode: Literal["full-carrier", "rotating-wave"] = "full-carrier"
    rtol: float = Field(default=1e-9, gt=0)
    atol: float = Field(default=1e-12, gt=0)
    dt_initial: float = Field(default=0.01, gt=0)
    dt_min: float = Field(default=1e-6, gt=0)
    tail_tol: float = Field(default=1e-8, gt=0)
    snapshot_every: float = Field(default=0.05, gt=0)
    window: tuple[float, float] | None = None


class OutputConfig(_Strict):
    directory: str = "."
    prefix: str = "run"
    formats: list[Literal["csv", "json"]] = ["csv", "json"]


class DesignConfig(_Strict):
    n_max: float | None = None
    timescale_threshold: float = design.TIMESCALE_THRESHOLD
    regime_factor: float = design.REGIME_FACTOR
    anharmonic_safety: float = design.ANHARMONIC_SAFETY


class SweepConfig(_Strict):
    parameter: Literal["lambda_peak", "delta_p", "tau_KD"]
    start: float
    stop: float
    samples: int = Field(ge=0)
    spacing: Literal["linear", "log"] = "linear"

    def values(self) -> np.ndarray:
        if self.samples < 1 or (self.samples > 1 and self.start == self.stop):
            raise ConfigError("empty sweep range")
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.samples)
        return np.linspace(self.start, self.stop, self.samples)


class ScenarioConfig(_Strict):
    mode: Literal["dimensionless", "physical"] = "dimensionless"
    drive: DriveConfig = DriveConfig()
    preset: Literal["electron", "TPPF84", "SiO2"] | None = None
    particle: ParticleConfig | None = None
    trap: TrapConfig | None = None
    kd: KDConfig | None = None
    simulation: SimulationConfig = SimulationConfig()
    output: OutputConfig = OutputConfig()
    design: DesignConfig = DesignConfig()
    sweep: SweepConfig | None = None

    @model_validator(mode="after")
    def _mode_blocks(self):
        if self.mode == "physical":
            blocks = (self.particle, self.trap, self.kd)
            if self.preset is None and any(b is None for b in blocks):
                raise ValueError("physical mode needs a preset or particle, trap and kd blocks")
        else:
            d = self.drive
            if d.tau_KD is None:
                raise ValueError("dimensionless mode needs drive.tau_KD (trap periods)")
            if d.is_2d:
                if d.delta_px is None and d.blockade_x is None:
                    raise ValueError("2D drive needs delta_px or blockade_x")
            else:
                if d.N_m is None:
                    raise ValueError("1D drive needs N_m")
                if d.delta_p is None and d.blockade is None:
                    raise ValueError("1D drive needs delta_p or blockade")
        return self

    def physical_specs(self):
        if self.preset is not None:
            particle, trap, kd = design.preset(self.preset)
            overrides = {"particle": self.particle, "trap": self.trap, "kd": self.kd}
            built = {"particle": particle, "trap": trap, "kd": kd}
            for name, block in overrides.items():
                if block is not None:
                    built[name] = _SPEC[name](**block.model_dump())
            return built["particle"], built["trap"], built["kd"]
        return (
            design.ParticleSpec(**self.particle.model_dump()),
            design.TrapSpec(**self.trap.model_dump()),
            design.KDSpec(**self.kd.model_dump()),
        )


_SPEC = {"particle": design.ParticleSpec, "trap": design.TrapSpec, "kd": design.KDSpec}


def load_config(path) -> tuple[ScenarioConfig, str]:
    """Parse and validate a YAML scenario; returns the model and the sha256 of the file bytes."""
    raw = Path(path).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        doc = yaml.safe_load(raw) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return ScenarioConfig.model_validate(doc), digest


# -- config -> library objects --------------------------------------------


class Scenario:
    """Resolved resonance, pulse, initial state and integrator controls of a config."""

    def __init__(self, resonance, pulse, initial, controls, extra=None):
        self.resonance = resonance
        self.pulse = pulse
        self.initial = initial
        self.controls = controls
        self.extra = extra or {}

    @property
    def is_2d(self) -> bool:
        return isinstance(self.resonance, Resonance2D)


def _controls(sim: SimulationConfig) -> IntegratorControls:
    return IntegratorControls(
        rtol=sim.rtol,
        atol=sim.atol,
        dt_initial=sim.dt_initial,
        dt_min=sim.dt_min,
        tail_tol=sim.tail_tol,
        snapshot_every=sim.snapshot_every,
        window=sim.window,
    )


def _area(coupling: str) -> float:
    return math.pi if coupling == "pi-pulse" else math.pi * float(coupling.split(":", 1)[1])


def _resolve_1d(cfg: ScenarioConfig, overrides: dict) -> Scenario:
    d = cfg.drive
    sim = cfg.simulation
    extra = {}
    if cfg.mode == "physical":
        particle, trap, kd = cfg.physical_specs()
        resonance, pulse, scales = design.scenario_to_dimensionless(particle, trap, kd, sim.carrier_mode)
        extra["scales"] = scales
        N, tau = resonance.N_m, pulse.tau_KD
        if "delta_p" in overrides:
            resonance = Resonance1D(N, overrides["delta_p"])
        coupling = overrides.get("lambda_peak", pulse.lambda_peak)
        tau = overrides.get("tau_KD", tau)
    else:
        N = d.N_m
        if "delta_p" in overrides:
            dp = overrides["delta_p"]
        elif d.delta_p is not None:
            dp = d.delta_p
        else:
            dp = find_blockade_detuning(d.blockade.n_bk, N, d.blockade.root_index)
        resonance = Resonance1D(N, dp)
        tau = overrides.get("tau_KD", d.tau_KD)
        coupling = overrides.get("lambda_peak", d.coupling)

    if sim.truncation is None:
        size = 8 if N <= 2 else 4 * N
    elif isinstance(sim.truncation, int):
        size = sim.truncation
    else:
        raise ConfigError("1D scenarios take a single integer truncation")
    if not isinstance(sim.initial, int) or not 0 <= sim.initial < size:
        raise ConfigError("initial must be a basis index inside the truncation")
    initial = StateVector1D.basis(sim.initial, size)

    if isinstance(coupling, str):
        if coupling.startswith("tune-cat"):
            target = int(coupling.split(":", 1)[1])
            pulse, info = tune_cat_pulse(
                target, resonance, tau, truncation=size, mode=sim.carrier_mode, controls=_controls(sim), details=True
            )
            extra["tuning"] = info
            lam = pulse.lambda_peak
        else:
            lam = pi_pulse_coupling(sim.initial, N, resonance.eta, tau, _area(coupling))
    else:
        lam = float(coupling)
    pulse = PulseEnvelope(float(lam), tau, float(N), sim.carrier_mode)
    return Scenario(resonance, pulse, initial, _controls(sim), extra)


def _resolve_2d(cfg: ScenarioConfig, overrides: dict) -> Scenario:
    d = cfg.drive
    sim = cfg.simulation
    nx, ny = d.ladder
    if d.delta_px is not None:
        dpx = d.delta_px
    else:
        dpx = find_blockade_detuning(d.blockade_x.n_bk, nx, d.blockade_x.root_index)
    dpx = overrides.get("delta_p", dpx)
    resonance = Resonance2D(nx, ny, dpx, d.delta_py or 0.0, d.trap_ratio)
    shape = sim.truncation if isinstance(sim.truncation, tuple) else (4 * max(nx, 1), 4 * max(ny, 1))
    start = sim.initial if isinstance(sim.initial, tuple) else (0, 0)
    initial = StateVector2D.basis(start[0], start[1], shape)
    tau = overrides.get("tau_KD", d.tau_KD)
    coupling = overrides.get("lambda_peak", d.coupling)
    if isinstance(coupling, str):
        table = coupling_2d_table((start[0] + 1, start[1] + 1), nx, ny, resonance.eta_x, resonance.eta_y)
        lam = pulse_coupling(table[start], tau, _area(coupling))
    else:
        lam = float(coupling)
    pulse = PulseEnvelope(float(lam), tau, resonance.carrier, sim.carrier_mode)
    return Scenario(resonance, pulse, initial, _controls(sim))


def build_scenario(cfg: ScenarioConfig, **overrides) -> Scenario:
    """Turn a validated config into integrator inputs.

    ``overrides`` may replace ``lambda_peak``, ``delta_p`` or ``tau_KD``
    (used by sweeps).
    """
    if cfg.drive.is_2d:
        if cfg.mode == "physical":
            raise ConfigError("2D ladders are only available in dimensionless mode")
        return _resolve_2d(cfg, overrides)
    return _resolve_1d(cfg, overrides)
