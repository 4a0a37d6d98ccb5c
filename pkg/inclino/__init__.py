"""Kinematic state space modelling, forecasting and anomaly gating of inclinometer borehole readings."""

# Copyright 2026, inclino developers.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

try:
    # NOTE: the `version.py` file must not be present in the git repository
    #   as it is generated by setuptools at install time
    from .version import __version__
except ImportError:  # pragma: no cover
    # Local copy or not installed with setuptools
    __version__ = "999"

from . import tools
from .anomaly import GateDecision, gate_depths, gate_step, mahalanobis, predictive_distribution
from .config import RunConfig, load_run_config
from .core_model import (
    ModelMatrices,
    StateGaussian,
    StateLayout,
    build_model,
    build_observation,
    build_observation_covariance,
    build_transition,
)
from .dataset_io import (
    BoreholeSeries,
    InstrumentKind,
    ParsedReadings,
    parse_readings_csv,
    read_forecast,
    read_gate_decisions,
    read_smoothed,
    read_validation_report,
    write_artifacts,
    write_readings_csv,
)
from .filter_smoother import SmootherResult, em_learn_q, kalman_forward, rts_smooth
from .forecast import ForecastBundle, band_coverage, build_lambda, fit_sigma_alpha, forecast_states
from .time_grid import GriddedObservations, remap, select_dt
from .validation import (
    ValidationReport,
    generate_synthetic,
    inject_outlier,
    kl_gaussian,
    simulate_states,
    split_train_validation,
    validate_forecast,
)

__all__ = [
    "__version__",
    "tools",
    "BoreholeSeries",
    "ForecastBundle",
    "GateDecision",
    "GriddedObservations",
    "InstrumentKind",
    "ModelMatrices",
    "ParsedReadings",
    "RunConfig",
    "SmootherResult",
    "StateGaussian",
    "StateLayout",
    "ValidationReport",
    "band_coverage",
    "build_lambda",
    "build_model",
    "build_observation",
    "build_observation_covariance",
    "build_transition",
    "em_learn_q",
    "fit_sigma_alpha",
    "forecast_states",
    "gate_depths",
    "gate_step",
    "generate_synthetic",
    "inject_outlier",
    "kalman_forward",
    "kl_gaussian",
    "load_run_config",
    "mahalanobis",
    "parse_readings_csv",
    "predictive_distribution",
    "read_forecast",
    "read_gate_decisions",
    "read_smoothed",
    "read_validation_report",
    "remap",
    "rts_smooth",
    "select_dt",
    "simulate_states",
    "split_train_validation",
    "validate_forecast",
    "write_artifacts",
    "write_readings_csv",
]
