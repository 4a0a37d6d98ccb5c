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
#   Per-borehole pipeline: grid, gated EM smoothing, forecasting and
#   full-series anomaly detection.
#
import dataclasses
import logging
import typing as T

from . import anomaly, filter_smoother, forecast, time_grid
from .config import RunConfig
from .core_model import ModelMatrices, StateLayout, build_model
from .dataset_io import BoreholeSeries

LOG = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class SmoothRun:
    """
    Q learned by EM over the trailing window (``em``) and the gated filter and
    smoother over the complete grid with that Q (``result``).
    """

    layout: StateLayout
    grid: time_grid.GriddedObservations
    model: ModelMatrices
    result: filter_smoother.SmootherResult
    em: filter_smoother.SmootherResult


@dataclasses.dataclass(frozen=True)
class DetectRun:
    smooth: SmoothRun

    @property
    def trace(self) -> filter_smoother.FilterTrace:
        return self.smooth.result.trace

    @property
    def decisions(self) -> T.Tuple[anomaly.GateDecision, ...]:
        return self.trace.decisions

    @property
    def n_rejected(self) -> int:
        return sum(1 for decision in self.trace.decisions if not decision.accepted)


def grid_series(series: BoreholeSeries, config: RunConfig) -> time_grid.GriddedObservations:
    """Remap the readings of ``series`` on to a regular grid, selecting dt unless overridden."""
    times = series.time_days()
    if config.dt_override is not None:
        dt = config.dt_override
    else:
        dt = time_grid.select_dt(times, config.dt_floor, config.dt_ceiling)
    grid = time_grid.remap(times, series.observation_matrix(), dt, error_mode=config.error_mode)
    LOG.info(
        f"{series.borehole_id}: {series.n_times} readings on {grid.n_steps} grid steps of "
        f"{dt:.6g} days ({grid.n_steps - grid.n_filled} gaps)"
    )
    return grid


def smooth_grid(
    grid: time_grid.GriddedObservations,
    layout: StateLayout,
    eps_m: float,
    config: RunConfig,
    gated: T.Union[bool, None] = None,
) -> SmoothRun:
    """
    Learn Q by EM over the trailing window of ``grid``, then gate, filter and
    smooth every grid step with the learned Q.

    ``gated`` overrides ``config.gating_enabled`` when given.
    """
    if gated is None:
        gamma = config.gate_threshold
    else:
        gamma = config.gamma if gated else None
    model = build_model(layout, grid.dt, eps_m)
    em = filter_smoother.em_learn_q(
        grid,
        model,
        filter_smoother.initial_state(grid.tail(config.window), layout, eps_m),
        window=config.window,
        tol=config.em_tol,
        max_iters=config.em_max_iters,
        gamma=gamma,
        per_depth=config.per_depth_gating,
        warm_start=config.em_warm_start,
        error_mode=config.error_mode,
    )
    model = model.with_process_covariance(em.Q)
    trace = filter_smoother.kalman_forward(
        grid,
        model,
        filter_smoother.initial_state(grid, layout, eps_m),
        gamma=gamma,
        per_depth=config.per_depth_gating,
    )
    result = dataclasses.replace(
        em,
        smoothed=filter_smoother.rts_smooth(trace, model),
        log_likelihood=trace.log_likelihood,
        trace=trace,
        grid=grid,
    )
    return SmoothRun(layout, grid, model, result, em)


def smooth_series(
    series: BoreholeSeries, config: RunConfig, gated: T.Union[bool, None] = None
) -> SmoothRun:
    grid = grid_series(series, config)
    return smooth_grid(grid, series.layout(), series.eps_m, config, gated=gated)


def forecast_run(
    run: SmoothRun,
    config: RunConfig,
    dt_forecast: T.Union[float, None] = None,
    horizon: T.Union[float, None] = None,
) -> forecast.ForecastBundle:
    """
    Forecast from the last smoothed state of ``run``.

    The learned Q is projected on to the kinematic template at the grid spacing and
    rescaled to ``dt_forecast`` (``config.forecast_dt``, else the grid spacing).
    """
    dt_grid = run.grid.dt
    fit = forecast.fit_sigma_alpha(
        run.result.Q, forecast.build_lambda(run.layout, dt_grid), dt_grid, config.error_mode
    )
    if dt_forecast is None:
        dt_forecast = config.forecast_dt if config.forecast_dt is not None else dt_grid
    LOG.info(f"sigma_alpha = {fit.sigma_alpha:.6g} (template residual {fit.residual_norm:.3g})")
    return forecast.forecast_states(
        run.result.last_state(),
        run.layout,
        fit,
        dt_forecast,
        config.forecast_horizon if horizon is None else horizon,
        run.model,
        start_time=float(run.result.grid.grid_times()[-1]),
    )


def detect_series(series: BoreholeSeries, config: RunConfig) -> DetectRun:
    """Gate every reading of the series, whatever ``config.gating_enabled`` says."""
    detect = DetectRun(smooth_series(series, config, gated=True))
    LOG.info(
        f"{series.borehole_id}: {detect.n_rejected} of {len(detect.decisions)} gate decisions rejected"
    )
    return detect
