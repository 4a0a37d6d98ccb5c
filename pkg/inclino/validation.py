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
#   Hold-out validation of forecasts with an averaged KL divergence, and
#   synthetic borehole series drawn from the kinematic model.
#
import dataclasses
import logging
import math
import typing as T

import numpy as np
import pandas as pd
import scipy.linalg

from . import pipeline
from .config import RunConfig
from .core_model import StateLayout, build_observation_covariance, build_transition
from .dataset_io import BoreholeSeries, InstrumentKind
from .forecast import ForecastBundle, band_coverage, build_lambda, n_forecast_steps
from .time_grid import GriddedObservations
from .tools import linalg
from .tools.exceptions import (
    InsufficientDataError,
    InvalidParameterError,
    SingularMetricError,
)

LOG = logging.getLogger(__name__)

DEFAULT_START = "2020-01-01T00:00:00Z"


@dataclasses.dataclass(frozen=True)
class ValidationReport:
    """
    Hold-out score of one borehole.

    ``anomalies_removed`` counts the readings gated out of the training pass and
    ``reference_anomalies_removed`` those gated out of the complete-series pass.
    """

    borehole_id: str
    metric_value: float
    horizon: float
    n_forecast_steps: int
    n_depths: int
    per_step_kl: np.ndarray
    anomalies_removed: int
    reference_anomalies_removed: int = 0
    kl_marginal: str = "full4d"
    dt: float = math.nan
    coverage_2sd: float = math.nan

    def to_dict(self) -> T.Dict[str, T.Any]:
        return {
            "artifact": "validation",
            "borehole_id": self.borehole_id,
            "metric_value": self.metric_value,
            "horizon": self.horizon,
            "n_forecast_steps": self.n_forecast_steps,
            "n_depths": self.n_depths,
            "per_step_kl": [[float(v) for v in row] for row in self.per_step_kl],
            "anomalies_removed": self.anomalies_removed,
            "reference_anomalies_removed": self.reference_anomalies_removed,
            "kl_marginal": self.kl_marginal,
            "dt": None if math.isnan(self.dt) else self.dt,
            "coverage_2sd": None if math.isnan(self.coverage_2sd) else self.coverage_2sd,
        }

    @classmethod
    def from_dict(cls, document: T.Mapping[str, T.Any]) -> "ValidationReport":
        return cls(
            borehole_id=document["borehole_id"],
            metric_value=document["metric_value"],
            horizon=document["horizon"],
            n_forecast_steps=document["n_forecast_steps"],
            n_depths=document["n_depths"],
            per_step_kl=np.array(document["per_step_kl"], dtype=float).reshape(
                document["n_forecast_steps"], document["n_depths"]
            ),
            anomalies_removed=document["anomalies_removed"],
            reference_anomalies_removed=document.get("reference_anomalies_removed", 0),
            kl_marginal=document.get("kl_marginal", "full4d"),
            dt=math.nan if document.get("dt") is None else document["dt"],
            coverage_2sd=math.nan if document.get("coverage_2sd") is None else document["coverage_2sd"],
        )


def _factor(covariance: np.ndarray, which: str) -> T.Tuple[np.ndarray, bool]:
    try:
        return linalg.regularised_cholesky(covariance)
    except (np.linalg.LinAlgError, ValueError) as err:
        raise SingularMetricError(f"{which} covariance is not positive definite: {err}")


def kl_gaussian(
    mean_p: np.ndarray, cov_p: np.ndarray, mean_q: np.ndarray, cov_q: np.ndarray
) -> float:
    """
    KL divergence ``D(p || q)`` between two Gaussians, in nats.

    Both covariances are regularised and Cholesky factorised.
    """
    mean_p = np.atleast_1d(np.asarray(mean_p, dtype=float))
    mean_q = np.atleast_1d(np.asarray(mean_q, dtype=float))
    cov_p = np.atleast_2d(np.asarray(cov_p, dtype=float))
    cov_q = np.atleast_2d(np.asarray(cov_q, dtype=float))
    dim = mean_p.size
    if mean_q.shape != (dim,) or cov_p.shape != (dim, dim) or cov_q.shape != (dim, dim):
        raise InvalidParameterError(
            f"shape mismatch: {mean_p.shape}, {cov_p.shape}, {mean_q.shape}, {cov_q.shape}"
        )
    factor_p = _factor(cov_p, "first")
    factor_q = _factor(cov_q, "second")
    delta = mean_q - mean_p
    trace_term = float(np.trace(scipy.linalg.cho_solve(factor_q, cov_p)))
    mahalanobis_term = float(delta @ scipy.linalg.cho_solve(factor_q, delta))
    log_det = linalg.cho_logdet(factor_q) - linalg.cho_logdet(factor_p)
    return max(0.5 * (trace_term + mahalanobis_term - dim + log_det), 0.0)


def marginal_indices(layout: StateLayout, depth_index: int, kl_marginal: str = "full4d") -> T.List[int]:
    if kl_marginal not in ("full4d", "position2d"):
        raise InvalidParameterError(f"unknown KL marginal {kl_marginal!r}")
    return layout.depth_indices(depth_index, positions_only=kl_marginal == "position2d")


def forecast_kl(
    bundle: ForecastBundle,
    reference_means: np.ndarray,
    reference_covs: np.ndarray,
    layout: StateLayout,
    kl_marginal: str = "full4d",
) -> np.ndarray:
    """
    ``n_steps x n_depths`` KL terms between each forecast state marginal and the
    reference (smoothed) marginal at the same step and depth.
    """
    if reference_means.shape[0] != bundle.n_steps:
        raise InvalidParameterError(
            f"{reference_means.shape[0]} reference states for {bundle.n_steps} forecast steps"
        )
    terms = np.empty((bundle.n_steps, layout.n_depths))
    for i, state in enumerate(bundle.states):
        for j in range(layout.n_depths):
            idx = np.array(marginal_indices(layout, j, kl_marginal))
            mean_f, cov_f = state.marginal(idx)
            terms[i, j] = kl_gaussian(
                mean_f, cov_f, reference_means[i][idx], reference_covs[i][np.ix_(idx, idx)]
            )
    return terms


def _n_rejected(run: pipeline.SmoothRun) -> int:
    return sum(1 for decision in run.result.decisions if not decision.accepted)


def split_train_validation(
    grid: GriddedObservations, horizon: float
) -> T.Tuple[GriddedObservations, GriddedObservations]:
    """
    Split off the final ``ceil(horizon / dt)`` grid steps as the validation set.

    The validation grid continues the training grid: its slot ``i`` is one step
    after the training slot ``train.n_steps - 1 + i``.
    """
    if not math.isfinite(horizon) or horizon <= 0:
        raise InvalidParameterError(f"horizon must be finite and > 0, got {horizon}")
    if horizon >= grid.span:
        raise InsufficientDataError(f"grid spans {grid.span:.6g} days, not more than the horizon {horizon}")
    n_validation = n_forecast_steps(horizon, grid.dt)
    n_train = grid.n_steps - n_validation
    if n_train < 2:
        raise InsufficientDataError(f"only {n_train} grid steps left for training")
    return grid.slice(0, n_train), grid.slice(n_train)


def validate_forecast(series: BoreholeSeries, config: RunConfig) -> ValidationReport:
    """
    Score a forecast against the hold-out data of ``series``.

    The trailing ``forecast_horizon`` of the grid is held out. Q is learned on the
    rest, the last training state is forecast over the hold-out span at the grid
    spacing, and each forecast state is compared, per depth, with the state
    smoothed from the complete data. The metric is the mean KL divergence
    ``D(forecast || smoothed)`` over steps and depths.
    """
    layout = series.layout()
    grid = pipeline.grid_series(series, config)
    train, validation = split_train_validation(grid, config.forecast_horizon)
    if config.window <= validation.n_steps:
        raise InvalidParameterError(
            f"window {config.window} does not reach back past the {validation.n_steps} hold-out steps"
        )

    train_run = pipeline.smooth_grid(train, layout, series.eps_m, config)
    bundle = pipeline.forecast_run(
        train_run, config, dt_forecast=grid.dt, horizon=validation.n_steps * grid.dt
    )
    reference = pipeline.smooth_grid(grid, layout, series.eps_m, config)

    # forecast state i, counted from 1, lands on grid slot train.n_steps - 1 + i
    steps = slice(train.n_steps, train.n_steps + bundle.n_steps)
    per_step_kl = forecast_kl(
        bundle, reference.result.means[steps], reference.result.covs[steps], layout, config.kl_marginal
    )
    inside, total = band_coverage(bundle, validation.values)
    removed = _n_rejected(train_run)
    reference_removed = _n_rejected(reference)
    report = ValidationReport(
        borehole_id=series.borehole_id,
        metric_value=float(per_step_kl.mean()),
        horizon=validation.n_steps * grid.dt,
        n_forecast_steps=bundle.n_steps,
        n_depths=layout.n_depths,
        per_step_kl=per_step_kl,
        anomalies_removed=removed,
        reference_anomalies_removed=reference_removed,
        kl_marginal=config.kl_marginal,
        dt=grid.dt,
        coverage_2sd=inside / total if total else math.nan,
    )
    LOG.info(
        f"{series.borehole_id}: metric {report.metric_value:.6g} nats, {removed} anomalies removed "
        f"from training, {reference_removed} from the complete series"
    )
    return report


def simulate_states(
    layout: StateLayout,
    sigma_true: float,
    dt: float,
    steps: int,
    rng: np.random.Generator,
    initial_velocity: T.Union[float, np.ndarray] = 0.0,
) -> np.ndarray:
    """
    ``steps x dim_state`` latent trajectory of ``x_{k+1} = F x_k + w_k`` with
    ``w_k ~ N(0, sigma_true Lambda(dt))``, starting at zero displacement.
    """
    if not math.isfinite(sigma_true) or sigma_true < 0:
        raise InvalidParameterError(f"sigma_true must be finite and >= 0, got {sigma_true}")
    if steps < 2:
        raise InvalidParameterError(f"steps must be >= 2, got {steps}")
    F = build_transition(layout, dt)
    lower = np.linalg.cholesky(build_lambda(layout, dt))
    noise = math.sqrt(sigma_true) * rng.standard_normal((steps - 1, layout.dim_state)) @ lower.T
    states = np.empty((steps, layout.dim_state))
    states[0] = 0.0
    states[0, layout.dim_obs :] = initial_velocity
    for k in range(1, steps):
        states[k] = F @ states[k - 1] + noise[k - 1]
    return states


def generate_synthetic(
    layout: StateLayout,
    sigma_true: float,
    eps_m: float,
    dt: float,
    steps: int,
    seed: int,
    initial_velocity: T.Union[float, np.ndarray] = 0.0,
    borehole_id: str = "SYN",
    start: str = DEFAULT_START,
) -> BoreholeSeries:
    """
    Synthetic readings every ``dt`` days from the kinematic model, with instrument
    noise ``N(0, (eps_m d)^2)`` on each axis. Identical for identical arguments.
    """
    if not math.isfinite(eps_m) or eps_m < 0:
        raise InvalidParameterError(f"eps_m must be finite and >= 0, got {eps_m}")
    rng = np.random.default_rng(seed)
    states = simulate_states(layout, sigma_true, dt, steps, rng, initial_velocity)
    positions = states[:, layout.position_slice()]
    if eps_m > 0:
        sd = np.sqrt(np.diag(build_observation_covariance(layout, eps_m)))
        positions = positions + rng.standard_normal(positions.shape) * sd
    values = positions.reshape(steps, layout.n_depths, 2)
    offsets = pd.to_timedelta(dt * np.arange(steps), unit="D").round("s")
    times = pd.Timestamp(start) + offsets
    return BoreholeSeries.from_arrays(
        borehole_id,
        times,
        layout.depth_values,
        values[..., 0],
        values[..., 1],
        eps_m=eps_m,
        instrument_kind=InstrumentKind.IN_PLACE,
    )


def inject_outlier(
    series: BoreholeSeries,
    step: int,
    depth_index: int,
    axis: T.Union[str, int],
    magnitude_mm: float,
) -> BoreholeSeries:
    """Copy of ``series`` with ``magnitude_mm`` added to one reading."""
    axis_index = {"A": 0, "B": 1, 0: 0, 1: 1}.get(axis.upper() if isinstance(axis, str) else axis)
    if axis_index is None:
        raise InvalidParameterError(f"axis must be 'A' or 'B', got {axis!r}")
    if not 0 <= step < series.n_times:
        raise InvalidParameterError(f"step {step} out of range for {series.n_times} readings")
    observations = series.observation_matrix().copy()
    column = series.layout().depth_indices(depth_index, positions_only=True)[axis_index]
    observations[step, column] += magnitude_mm
    return series.with_observations(observations)
