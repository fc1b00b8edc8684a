"""Declarative scenario files.

A scenario is a TOML document with a ``schema_version`` key and the sections
``model``, ``ocp``, ``simulate``, ``numerics``, ``certify``, ``turnpike`` and
``output``. Unknown keys are rejected. Only the sections a subcommand needs
have to be present; everything else has the defaults listed on the fields.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import Box, CostWeights
from .errors import ConfigurationError
from .models import ControlVariant, HeatExchangerParams, entropy_at_temperature, heat_exchanger_model, quadratic_model
from .nlp import SolverOptions
from .ocp import OcpSpec, TerminalPoint
from .sim import ControlSignal, IntegratorOptions

SCHEMA_VERSION = 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelSection(_Section):
    kind: Literal["heat_exchanger", "quadratic"] = "heat_exchanger"
    variant: Literal["entropy_flow", "thermostat"] = "entropy_flow"
    params: dict = Field(default_factory=dict)
    gamma: float = 1.0  # quadratic model only

    @field_validator("params")
    @classmethod
    def _known_params(cls, v):
        allowed = set(HeatExchangerParams.__dataclass_fields__)
        unknown = set(v) - allowed
        if unknown:
            raise ValueError(f"unknown model parameters {sorted(unknown)}; allowed: {sorted(allowed)}")
        return v


class OcpSection(_Section):
    x0: List[float]
    terminal: Optional[List[float]] = None
    terminal_temperature: Optional[List[float]] = None
    t_f: Optional[float] = None
    horizons: Optional[List[float]] = None
    control_box: List[float] = Field(default_factory=lambda: [-10.0, 10.0])
    alpha1: float = 0.0
    alpha2: float = 1.0
    T0: float = 1.0

    @model_validator(mode="after")
    def _check(self):
        if (self.terminal is None) == (self.terminal_temperature is None):
            raise ValueError("give exactly one of 'terminal' and 'terminal_temperature'")
        if self.t_f is None and not self.horizons:
            raise ValueError("give 't_f' or a non-empty 'horizons' list")
        for t in ([self.t_f] if self.t_f is not None else []) + list(self.horizons or []):
            if not t > 0:
                raise ValueError(f"horizons must be positive, got {t}")
        if len(self.control_box) != 2 or not self.control_box[0] < self.control_box[1]:
            raise ValueError("control_box must be [lo, hi] with lo < hi")
        return self


class ControlSection(_Section):
    kind: Literal["zero", "constant", "piecewise"] = "zero"
    value: float = 0.0
    grid: Optional[List[float]] = None
    values: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "piecewise":
            if self.grid is None or self.values is None or len(self.grid) != len(self.values) + 1:
                raise ValueError("piecewise control needs 'grid' with one more entry than 'values'")
        return self


class SimulateSection(_Section):
    x0: List[float]
    t_f: float = Field(gt=0)
    control: ControlSection = Field(default_factory=ControlSection)


class NumericsSection(_Section):
    N: Optional[int] = Field(default=None, ge=2)
    intervals_per_time: float = Field(default=20.0, gt=0)
    min_intervals: int = Field(default=100, ge=2)
    integrator: Literal["adaptive", "rk4"] = "adaptive"
    rtol: float = Field(default=1e-8, gt=0)
    atol: float = Field(default=1e-10, gt=0)
    dt: float = Field(default=1e-2, gt=0)
    samples_per_step: int = Field(default=8, ge=2)
    feas_tol: float = Field(default=1e-8, gt=0)
    opt_tol: float = Field(default=1e-6, gt=0)
    max_outer: int = Field(default=60, ge=1)
    refine: int = Field(default=4, ge=1)
    balance_tol: float = Field(default=1e-6, gt=0)
    warm_start: bool = True


class CertifySection(_Section):
    K_lo: List[float] = Field(default_factory=lambda: [-1.0, -1.0])
    K_hi: List[float] = Field(default_factory=lambda: [3.0, 3.0])
    n_samples: int = Field(default=10_000, ge=2)


class TurnpikeSection(_Section):
    eps: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2])
    velocity_tol: float = 0.1
    stabilization_tol: float = 0.2


class OutputSection(_Section):
    directory: str = "out"
    formats: List[Literal["csv", "json", "svg"]] = Field(default_factory=lambda: ["csv", "json"])


class ScenarioConfig(_Section):
    schema_version: Literal[1]
    model: ModelSection = Field(default_factory=ModelSection)
    ocp: Optional[OcpSection] = None
    simulate: Optional[SimulateSection] = None
    numerics: NumericsSection = Field(default_factory=NumericsSection)
    certify: CertifySection = Field(default_factory=CertifySection)
    turnpike: TurnpikeSection = Field(default_factory=TurnpikeSection)
    output: OutputSection = Field(default_factory=OutputSection)

    # builders -------------------------------------------------------------

    def heat_exchanger_params(self) -> HeatExchangerParams:
        return HeatExchangerParams(**{k: tuple(v) if isinstance(v, list) else v for k, v in self.model.params.items()})

    def build_model(self):
        if self.model.kind == "quadratic":
            return quadratic_model(self.model.gamma)
        return heat_exchanger_model(self.heat_exchanger_params(), ControlVariant(self.model.variant))

    def integrator_options(self) -> IntegratorOptions:
        n = self.numerics
        return IntegratorOptions(method=n.integrator, rtol=n.rtol, atol=n.atol, dt=n.dt, samples_per_step=n.samples_per_step)

    def solver_options(self) -> SolverOptions:
        n = self.numerics
        return SolverOptions(feas_tol=n.feas_tol, opt_tol=n.opt_tol, max_outer=n.max_outer)

    def require(self, section: str):
        value = getattr(self, section)
        if value is None:
            raise ConfigurationError(f"scenario has no [{section}] section")
        return value

    def ocp_spec(self, t_f: Optional[float] = None) -> OcpSpec:
        o = self.require("ocp")
        model = self.build_model()
        if o.terminal is not None:
            xf = np.array(o.terminal, dtype=float)
        else:
            if self.model.kind != "heat_exchanger":
                raise ConfigurationError("'terminal_temperature' needs the heat exchanger model")
            p = self.heat_exchanger_params()
            xf = np.array([entropy_at_temperature(p, i + 1, T) for i, T in enumerate(o.terminal_temperature)])
        horizon = t_f if t_f is not None else (o.t_f if o.t_f is not None else max(o.horizons))
        return OcpSpec(
            model=model,
            x0=np.array(o.x0, dtype=float),
            terminal=TerminalPoint(xf),
            t_f=float(horizon),
            control_box=Box(np.array([o.control_box[0]]), np.array([o.control_box[1]])),
            weights=CostWeights(o.alpha1, o.alpha2, o.T0),
        )

    def horizons(self) -> list:
        o = self.require("ocp")
        return sorted(o.horizons) if o.horizons else [o.t_f]

    def control_signal(self) -> ControlSignal:
        c = self.require("simulate").control
        if c.kind == "zero":
            return ControlSignal.zero()
        if c.kind == "constant":
            return ControlSignal.constant(c.value, self.simulate.t_f)
        return ControlSignal.piecewise(np.array(c.grid), np.array(c.values)[:, None])

    def certify_box(self) -> Box:
        c = self.certify
        return Box(np.array(c.K_lo, dtype=float), np.array(c.K_hi, dtype=float))


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "invalid scenario:\n" + "\n".join(lines)


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a decoded scenario; raises :class:`ConfigurationError`."""
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(_format_errors(exc)) from None


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    return parse_config(data)
