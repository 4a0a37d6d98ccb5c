#
# Copyright 2026, inclino developers.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
# Contents:
#   Run configuration: defaults, JSON loading and validation.
#
import dataclasses
import json
import logging
import math
import typing as T

from .tools import ERROR_MODES, parse_quantity
from .tools.exceptions import ConfigError

LOG = logging.getLogger(__name__)

KL_MARGINALS = ("full4d", "position2d")
INSTRUMENT_KINDS = ("manual", "in_place")

# fields given in days, read with parse_quantity
DURATION_FIELDS = ("dt_override", "forecast_horizon", "forecast_dt", "dt_floor", "dt_ceiling", "sim_dt")
BOREHOLE_KEYS = ("eps_m", "instrument_kind")


def handle_json(in_json: str) -> T.Any:
    """
    Handle input json which can be a json format string, or path to a json format file.

    Returns
    -------
    The decoded json contents.
    """
    try:
        # Assume a json format string
        return json.loads(in_json)
    except json.JSONDecodeError:
        pass
    # Then a json file
    try:
        with open(in_json, "r") as f:
            return json.load(f)
    except OSError as err:
        raise ConfigError(f"config is neither JSON nor a readable file: {in_json!r} ({err})")
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON in {in_json}: {err}")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """
    Settings of a pipeline run.

    Durations are in days and ``eps_m`` in mm/m. ``boreholes`` maps a borehole id
    to its own ``eps_m`` and ``instrument_kind``.
    """

    dt_override: T.Optional[float] = None
    dt_floor: float = 1.0 / 24.0
    dt_ceiling: float = 7.0
    gamma: float = 5.0
    gating_enabled: bool = True
    per_depth_gating: bool = False
    window: int = 200
    em_tol: float = 1e-4
    em_max_iters: int = 50
    em_warm_start: bool = True
    forecast_horizon: float = 30.0
    forecast_dt: T.Optional[float] = None
    eps_m: float = 0.1
    instrument_kind: str = "manual"
    boreholes: T.Mapping[str, T.Mapping[str, T.Any]] = dataclasses.field(default_factory=dict)
    kl_marginal: str = "full4d"
    error_mode: str = "warn"
    seed: int = 0
    sim_borehole_id: str = "BH01"
    sim_n_depths: int = 3
    sim_depth_step: float = 1.0
    sim_steps: int = 365
    sim_dt: float = 1.0
    sim_sigma: float = 1e-4
    sim_velocity: float = 0.01

    def __post_init__(self) -> None:
        positive = [
            "dt_floor",
            "dt_ceiling",
            "gamma",
            "em_tol",
            "forecast_horizon",
            "eps_m",
            "sim_dt",
            "sim_depth_step",
        ]
        for name in positive:
            _require(name, getattr(self, name), lambda v: v > 0, "> 0")
        for name in ("dt_override", "forecast_dt"):
            if getattr(self, name) is not None:
                _require(name, getattr(self, name), lambda v: v > 0, "> 0")
        _require("sim_sigma", self.sim_sigma, lambda v: v >= 0, ">= 0")
        _require("sim_velocity", self.sim_velocity, lambda v: True, "finite")
        if self.dt_floor > self.dt_ceiling:
            raise ConfigError(f"dt_floor {self.dt_floor} exceeds dt_ceiling {self.dt_ceiling}")
        minimums = (
            ("window", 10),
            ("em_max_iters", 1),
            ("sim_n_depths", 1),
            ("sim_steps", 2),
            ("seed", 0),
        )
        for name, minimum in minimums:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
                raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
        for name in ("gating_enabled", "per_depth_gating", "em_warm_start"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be true or false, got {getattr(self, name)!r}")
        _choice("kl_marginal", self.kl_marginal, KL_MARGINALS)
        _choice("error_mode", self.error_mode, ERROR_MODES)
        _choice("instrument_kind", self.instrument_kind, INSTRUMENT_KINDS)
        if not self.sim_borehole_id:
            raise ConfigError("sim_borehole_id must not be empty")

        boreholes = {}
        for borehole_id, block in dict(self.boreholes).items():
            if not isinstance(block, T.Mapping):
                raise ConfigError(f"boreholes.{borehole_id} must be an object")
            unknown = set(block) - set(BOREHOLE_KEYS)
            if unknown:
                raise ConfigError(f"boreholes.{borehole_id}: unknown keys {sorted(unknown)}")
            settings = dict(block)
            if "eps_m" in settings:
                key = f"boreholes.{borehole_id}.eps_m"
                settings["eps_m"] = parse_quantity(settings["eps_m"], "mm/m", key)
                _require(key, settings["eps_m"], lambda v: v > 0, "> 0")
            if "instrument_kind" in settings:
                _choice(
                    f"boreholes.{borehole_id}.instrument_kind",
                    settings["instrument_kind"],
                    INSTRUMENT_KINDS,
                )
            boreholes[str(borehole_id)] = settings
        object.__setattr__(self, "boreholes", boreholes)

    @classmethod
    def from_dict(cls, values: T.Mapping[str, T.Any]) -> "RunConfig":
        """Build a config from JSON-like values, reading quantity strings into days and mm/m."""
        if not isinstance(values, T.Mapping):
            raise ConfigError(f"config must be a JSON object, got {type(values).__name__}")
        names = {field.name for field in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(values)
        for name in DURATION_FIELDS:
            if kwargs.get(name) is not None:
                kwargs[name] = parse_quantity(kwargs[name], "day", name)
        if "eps_m" in kwargs:
            kwargs["eps_m"] = parse_quantity(kwargs["eps_m"], "mm/m", "eps_m")
        return cls(**kwargs)

    def updated(self, **changes: T.Any) -> "RunConfig":
        """Copy with the non-None ``changes`` applied and validated."""
        values = dataclasses.asdict(self)
        values.update({key: value for key, value in changes.items() if value is not None})
        return type(self).from_dict(values)

    def eps_m_for(self, borehole_id: str) -> float:
        return float(self.boreholes.get(borehole_id, {}).get("eps_m", self.eps_m))

    def instrument_kind_for(self, borehole_id: str) -> str:
        return str(self.boreholes.get(borehole_id, {}).get("instrument_kind", self.instrument_kind))

    @property
    def gate_threshold(self) -> T.Optional[float]:
        return self.gamma if self.gating_enabled else None


def _require(name: str, value: T.Any, check: T.Callable[[float], bool], text: str) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if not math.isfinite(value) or not check(value):
        raise ConfigError(f"{name} must be finite and {text}, got {value!r}")


def _choice(name: str, value: T.Any, choices: T.Sequence[str]) -> None:
    if value not in choices:
        raise ConfigError(f"{name} must be one of {tuple(choices)}, got {value!r}")


def load_run_config(source: T.Optional[str] = None, **overrides: T.Any) -> RunConfig:
    """
    Load a RunConfig: defaults, then ``source`` (a JSON string or the path to a JSON
    file), then the non-None ``overrides``.
    """
    values: T.Dict[str, T.Any] = {}
    if source is not None:
        loaded = handle_json(source)
        if not isinstance(loaded, T.Mapping):
            raise ConfigError(f"config must be a JSON object, got {type(loaded).__name__}")
        values.update(loaded)
        LOG.debug(f"config keys read: {sorted(values)}")
    values.update({key: value for key, value in overrides.items() if value is not None})
    return RunConfig.from_dict(values)
