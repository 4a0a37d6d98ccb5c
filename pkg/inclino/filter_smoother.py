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
#   Kalman filter forward pass, Rauch-Tung-Striebel backward pass and
#   expectation maximisation of the process covariance over a finite window.
#
import dataclasses
import logging
import math
import typing as T

import numpy as np
import scipy.linalg
import xarray as xr

from . import anomaly
from .core_model import ModelMatrices, StateGaussian, StateLayout
from .forecast import kinematic_template
from .time_grid import GriddedObservations
from .tools import error_handler, linalg
from .tools.exceptions import (
    EMDivergenceError,
    InsufficientDataError,
    InvalidParameterError,
    SingularModelError,
)

LOG = logging.getLogger(__name__)

DEFAULT_WINDOW = 200
DEFAULT_EM_TOL = 1e-4
DEFAULT_EM_MAX_ITERS = 50
MIN_WINDOW_OBSERVATIONS = 10
DIVERGENCE_PATIENCE = 3

_LOG_2PI = math.log(2.0 * math.pi)


@dataclasses.dataclass(frozen=True)
class FilterTrace:
    """
    Output of the forward pass, one entry per grid step.

    At steps without an update (gaps, fully rejected observations) the filtered
    moments equal the predicted ones and the innovation arrays hold NaN.
    """

    predicted_means: np.ndarray
    predicted_covs: np.ndarray
    filtered_means: np.ndarray
    filtered_covs: np.ndarray
    innovations: np.ndarray
    innovation_covs: np.ndarray
    updated: np.ndarray
    log_likelihood: float
    decisions: T.Tuple[anomaly.GateDecision, ...] = ()

    @property
    def n_steps(self) -> int:
        return int(self.filtered_means.shape[0])

    def rejected_steps(self) -> T.FrozenSet[T.Tuple[int, T.Union[int, None]]]:
        return frozenset((d.grid_index, d.depth_index) for d in self.decisions if not d.accepted)


@dataclasses.dataclass(frozen=True)
class SmoothedStates:
    means: np.ndarray
    covs: np.ndarray
    # cross_covs[k] = cov(x_k, x_{k-1} | data); cross_covs[0] is unused (zeros)
    cross_covs: np.ndarray

    def state(self, k: int) -> StateGaussian:
        return StateGaussian(self.means[k], self.covs[k], k)


@dataclasses.dataclass(frozen=True)
class SmootherResult:
    smoothed: SmoothedStates
    Q: np.ndarray
    em_iterations: int
    log_likelihood: float
    log_likelihoods: T.Tuple[float, ...]
    trace: FilterTrace
    grid: GriddedObservations
    converged: bool = True

    @property
    def means(self) -> np.ndarray:
        return self.smoothed.means

    @property
    def covs(self) -> np.ndarray:
        return self.smoothed.covs

    @property
    def cross_covs(self) -> np.ndarray:
        return self.smoothed.cross_covs

    @property
    def decisions(self) -> T.Tuple[anomaly.GateDecision, ...]:
        return self.trace.decisions

    def last_state(self) -> StateGaussian:
        k = self.smoothed.means.shape[0] - 1
        return self.smoothed.state(k)

    def to_dataset(self, layout: StateLayout) -> xr.Dataset:
        """Smoothed positions and velocities with standard deviations as an xarray Dataset."""
        n = layout.n_depths
        steps = np.arange(self.smoothed.means.shape[0])
        sd = np.sqrt(np.clip(np.diagonal(self.smoothed.covs, axis1=1, axis2=2), 0.0, None))
        coords = {
            "step": steps,
            "time": ("step", self.grid.grid_times()),
            "depth": np.asarray(layout.depth_values),
            "axis": ["A", "B"],
        }

        def _block(values: np.ndarray, offset: int) -> np.ndarray:
            return values[:, offset : offset + 2 * n].reshape(-1, n, 2)

        dims = ("step", "depth", "axis")
        return xr.Dataset(
            {
                "position": (dims, _block(self.smoothed.means, 0), {"units": "mm"}),
                "position_sd": (dims, _block(sd, 0), {"units": "mm"}),
                "velocity": (dims, _block(self.smoothed.means, 2 * n), {"units": "mm day-1"}),
                "velocity_sd": (dims, _block(sd, 2 * n), {"units": "mm day-1"}),
                "observation": (dims, self.grid.values.reshape(-1, n, 2), {"units": "mm"}),
            },
            coords=coords,
            attrs={"em_iterations": self.em_iterations, "log_likelihood": self.log_likelihood},
        )


def initial_state(
    grid: GriddedObservations, layout: StateLayout, eps_m: float
) -> StateGaussian:
    """
    Diffuse but finite prior for grid slot 0.

    Positions are centred on the first finite reading of each entry with standard
    deviation ``10 eps_m d``; velocities are centred on zero with 1 mm/day.
    """
    position_mean = np.zeros(layout.dim_obs)
    for row in range(layout.dim_obs):
        finite = np.flatnonzero(np.isfinite(grid.values[:, row]))
        if finite.size:
            position_mean[row] = grid.values[finite[0], row]
    position_sd = np.repeat(10.0 * eps_m * np.asarray(layout.depth_values), 2)
    variances = np.concatenate([position_sd**2, np.ones(layout.dim_obs)])
    return StateGaussian(
        mean=np.concatenate([position_mean, np.zeros(layout.dim_obs)]),
        covariance=np.diag(variances),
        grid_index=0,
    )


def initial_process_covariance(model: ModelMatrices) -> np.ndarray:
    """Starting Q for EM: ``sigma_0 Lambda(dt)`` with trace equal to 1 % of trace(R)."""
    template = kinematic_template(model.H.shape[0], model.dt)
    sigma_0 = 0.01 * np.trace(model.R) / np.trace(template)
    return sigma_0 * template


def _cho_factor(matrix: np.ndarray, what: str, step: int) -> T.Tuple[np.ndarray, bool]:
    try:
        return scipy.linalg.cho_factor(matrix, lower=True)
    except (np.linalg.LinAlgError, ValueError) as err:
        raise SingularModelError(f"{what} is not invertible at grid step {step}: {err}", step=step)


def kalman_forward(
    grid: GriddedObservations,
    model: ModelMatrices,
    initial: StateGaussian,
    gamma: T.Union[float, None] = None,
    per_depth: bool = False,
) -> FilterTrace:
    """
    Kalman filter over a grid, predict only through gaps.

    Parameters
    ----------
    grid : GriddedObservations
    model : ModelMatrices
        ``model.dt`` must equal ``grid.dt``.
    initial : StateGaussian
        Prior of the state at grid slot 0.
    gamma : float (optional)
        Gate threshold; observations whose Mahalanobis distance from the predictive
        distribution exceeds it are left out of the update. No gating when None.
    per_depth : bool
        Gate each depth separately instead of the whole observation.

    Returns
    -------
    FilterTrace
    """
    if not math.isclose(model.dt, grid.dt, rel_tol=1e-12):
        raise InvalidParameterError(f"model dt {model.dt} differs from grid dt {grid.dt}")
    if grid.n_steps == 0:
        raise InsufficientDataError("empty grid")
    if not linalg.is_psd(initial.covariance):
        raise InvalidParameterError("initial covariance is not positive semi-definite")

    n_steps, dim_state, dim_obs = grid.n_steps, model.F.shape[0], model.H.shape[0]
    predicted_means = np.empty((n_steps, dim_state))
    predicted_covs = np.empty((n_steps, dim_state, dim_state))
    filtered_means = np.empty((n_steps, dim_state))
    filtered_covs = np.empty((n_steps, dim_state, dim_state))
    innovations = np.full((n_steps, dim_obs), np.nan)
    innovation_covs = np.full((n_steps, dim_obs, dim_obs), np.nan)
    updated = np.zeros(n_steps, dtype=bool)
    decisions: T.List[anomaly.GateDecision] = []
    log_likelihood = 0.0
    eye = np.eye(dim_state)

    mean, cov = initial.mean, initial.covariance
    for k in range(n_steps):
        if k > 0:
            mean = model.F @ mean
            cov = linalg.symmetrize(model.F @ cov @ model.F.T + model.Q)
        predicted_means[k], predicted_covs[k] = mean, cov

        observation = grid.observation(k)
        rows = np.zeros(dim_obs, dtype=bool) if observation is None else np.isfinite(observation)
        if rows.any() and gamma is not None:
            prior = StateGaussian(mean, cov, k)
            if per_depth:
                step_decisions = anomaly.gate_depths(prior, observation, model, gamma)
            else:
                step_decisions = [anomaly.gate_step(prior, observation, model, gamma)]
            decisions.extend(step_decisions)
            rows &= ~anomaly.rejected_rows(step_decisions, dim_obs)

        if rows.any():
            H = model.H[rows]
            R = model.R[np.ix_(rows, rows)]
            innovation = observation[rows] - H @ mean
            S = linalg.symmetrize(H @ cov @ H.T + R)
            factor = _cho_factor(S, "innovation covariance", k)
            gain = scipy.linalg.cho_solve(factor, H @ cov).T
            mean = mean + gain @ innovation
            # Joseph form
            joseph = eye - gain @ H
            cov = linalg.symmetrize(joseph @ cov @ joseph.T + gain @ R @ gain.T)
            log_likelihood -= 0.5 * (
                innovation @ scipy.linalg.cho_solve(factor, innovation)
                + linalg.cho_logdet(factor)
                + rows.sum() * _LOG_2PI
            )
            innovations[k, rows] = innovation
            innovation_covs[k][np.ix_(rows, rows)] = S
            updated[k] = True

        filtered_means[k], filtered_covs[k] = mean, cov

    return FilterTrace(
        predicted_means=predicted_means,
        predicted_covs=predicted_covs,
        filtered_means=filtered_means,
        filtered_covs=filtered_covs,
        innovations=innovations,
        innovation_covs=innovation_covs,
        updated=updated,
        log_likelihood=float(log_likelihood),
        decisions=tuple(decisions),
    )


def rts_smooth(trace: FilterTrace, model: ModelMatrices) -> SmoothedStates:
    """
    Rauch-Tung-Striebel backward pass.

    Returns smoothed means and covariances and the lag-one cross covariances
    ``cov(x_k, x_{k-1})`` needed by the EM step, using the smoother gains
    ``G_k = Sigma_{k|k} F^T Sigma_{k+1|k}^{-1}``.
    """
    n_steps = trace.n_steps
    if n_steps == 0:
        raise InsufficientDataError("empty filter trace")
    F = model.F
    means = trace.filtered_means.copy()
    covs = trace.filtered_covs.copy()
    cross_covs = np.zeros_like(covs)

    for k in range(n_steps - 2, -1, -1):
        try:
            # P_pred is symmetric, so G^T = P_pred^{-1} F P_filt
            gain = scipy.linalg.solve(
                trace.predicted_covs[k + 1], F @ trace.filtered_covs[k], assume_a="sym"
            ).T
        except (np.linalg.LinAlgError, ValueError) as err:
            raise SingularModelError(
                f"predicted covariance is singular at grid step {k + 1}: {err}", step=k + 1
            )
        if not np.all(np.isfinite(gain)):
            raise SingularModelError(
                f"predicted covariance is singular at grid step {k + 1}", step=k + 1
            )
        means[k] = trace.filtered_means[k] + gain @ (means[k + 1] - trace.predicted_means[k + 1])
        covs[k] = linalg.symmetrize(
            trace.filtered_covs[k] + gain @ (covs[k + 1] - trace.predicted_covs[k + 1]) @ gain.T
        )
        cross_covs[k + 1] = covs[k + 1] @ gain.T

    return SmoothedStates(means=means, covs=covs, cross_covs=cross_covs)


def maximise_q(smoothed: SmoothedStates, F: np.ndarray) -> np.ndarray:
    """
    M-step for the process covariance:
    ``Q = 1/T sum_k E[(x_k - F x_{k-1})(x_k - F x_{k-1})^T]`` from smoothed moments.
    """
    means, covs, cross = smoothed.means, smoothed.covs, smoothed.cross_covs
    n_transitions = means.shape[0] - 1
    if n_transitions < 1:
        raise InsufficientDataError("at least two grid steps are needed to estimate Q")
    residuals = means[1:] - means[:-1] @ F.T
    cross_sum = cross[1:].sum(axis=0)
    expectation = (
        residuals.T @ residuals
        + covs[1:].sum(axis=0)
        - cross_sum @ F.T
        - F @ cross_sum.T
        + F @ covs[:-1].sum(axis=0) @ F.T
    )
    return linalg.nearest_psd(expectation / n_transitions)


class _EMRun(T.NamedTuple):
    Q: np.ndarray
    log_likelihoods: T.List[float]
    iterations: int
    trace: FilterTrace
    smoothed: SmoothedStates
    converged: bool


def _run_em(
    grid: GriddedObservations,
    model: ModelMatrices,
    initial: StateGaussian,
    q_start: np.ndarray,
    tol: float,
    max_iters: int,
    gamma: T.Union[float, None],
    per_depth: bool,
) -> _EMRun:
    Q = q_start
    log_likelihoods: T.List[float] = []
    declines = 0
    previous_rejected = None
    converged = False
    iterations = 0
    while True:
        current = model.with_process_covariance(Q)
        trace = kalman_forward(grid, current, initial, gamma=gamma, per_depth=per_depth)
        smoothed = rts_smooth(trace, current)
        log_likelihoods.append(trace.log_likelihood)
        if converged or iterations == max_iters:
            # moments of the final E-step match the returned Q
            return _EMRun(Q, log_likelihoods, iterations, trace, smoothed, converged)

        rejected = trace.rejected_steps()
        if len(log_likelihoods) > 1:
            slack = tol * max(1.0, abs(log_likelihoods[-2]))
            # likelihoods are only comparable over the same accepted observations
            if rejected != previous_rejected or log_likelihoods[-1] >= log_likelihoods[-2] - slack:
                declines = 0
            else:
                declines += 1
                if declines >= DIVERGENCE_PATIENCE:
                    raise EMDivergenceError(
                        f"EM log-likelihood decreased for {declines} consecutive iterations",
                        log_likelihoods,
                    )
        previous_rejected = rejected

        Q_next = maximise_q(smoothed, current.F)
        change = np.linalg.norm(Q_next - Q) / max(np.linalg.norm(Q), np.finfo(float).tiny)
        iterations += 1
        LOG.debug(
            f"EM iteration {iterations}: log-likelihood {trace.log_likelihood:.6f}, "
            f"relative change of Q {change:.3g}"
        )
        Q = Q_next
        converged = bool(change < tol)


def em_learn_q(
    grid: GriddedObservations,
    model: ModelMatrices,
    initial: StateGaussian,
    window: int = DEFAULT_WINDOW,
    tol: float = DEFAULT_EM_TOL,
    max_iters: int = DEFAULT_EM_MAX_ITERS,
    gamma: T.Union[float, None] = None,
    per_depth: bool = False,
    warm_start: bool = True,
    q_start: T.Union[np.ndarray, None] = None,
    error_mode: str = "warn",
) -> SmootherResult:
    """
    Learn the process covariance Q by EM over the most recent ``window`` grid steps.

    R and F are held fixed. Each iteration runs the filter and RTS smoother with the
    current Q (E-step) and replaces Q with the expected outer product of the process
    noise (M-step), until the relative Frobenius change of Q drops below ``tol`` or
    ``max_iters`` is reached.

    Parameters
    ----------
    grid : GriddedObservations
    model : ModelMatrices
        Its Q is ignored unless ``q_start`` is None and it is non-zero.
    initial : StateGaussian
        Prior of the state at the first slot of the window.
    window : int
        Number of trailing grid steps used.
    tol : float
        Relative Frobenius tolerance on Q; also the divergence slack on the
        log-likelihood.
    max_iters : int
    gamma : float (optional)
        Gate threshold applied in every E-step; no gating when None.
    per_depth : bool
        Gate per depth instead of jointly.
    warm_start : bool
        With gating, first run EM ungated and start the gated iterations from its Q.
    q_start : numpy.ndarray (optional)
        Starting Q, defaults to ``sigma_0 Lambda(dt)``.
    error_mode : str
        Reporting of a run that stops at ``max_iters`` without converging.

    Returns
    -------
    SmootherResult
    """
    if window < MIN_WINDOW_OBSERVATIONS:
        raise InvalidParameterError(f"window must be >= {MIN_WINDOW_OBSERVATIONS}, got {window}")
    if not math.isfinite(tol) or tol <= 0:
        raise InvalidParameterError(f"tol must be > 0, got {tol}")
    if max_iters < 1:
        raise InvalidParameterError(f"max_iters must be >= 1, got {max_iters}")

    windowed = grid.tail(window)
    if windowed.n_filled < MIN_WINDOW_OBSERVATIONS:
        raise InsufficientDataError(
            f"{windowed.n_filled} observations in the last {window} grid steps, "
            f"at least {MIN_WINDOW_OBSERVATIONS} are needed"
        )
    if windowed.n_steps < 2:
        raise InsufficientDataError("at least two grid steps are needed")

    if q_start is None:
        q_start = model.Q if np.any(model.Q) else initial_process_covariance(model)

    log_likelihoods: T.List[float] = []
    iterations = 0
    if gamma is not None and warm_start:
        warm = _run_em(windowed, model, initial, q_start, tol, max_iters, None, per_depth)
        q_start, log_likelihoods, iterations = warm.Q, warm.log_likelihoods, warm.iterations
        LOG.debug(f"ungated warm start finished after {iterations} iterations")

    run = _run_em(windowed, model, initial, q_start, tol, max_iters, gamma, per_depth)
    log_likelihoods.extend(run.log_likelihoods)
    iterations += run.iterations
    if not run.converged:
        error_handler(
            f"EM stopped after {max_iters} iterations without reaching tol={tol}.",
            LOG,
            error_mode=error_mode,
            exc_type=EMDivergenceError,
        )
    LOG.info(
        f"EM finished after {iterations} iterations, log-likelihood {run.trace.log_likelihood:.6f}"
    )
    return SmootherResult(
        smoothed=run.smoothed,
        Q=run.Q,
        em_iterations=iterations,
        log_likelihood=run.trace.log_likelihood,
        log_likelihoods=tuple(log_likelihoods),
        trace=run.trace,
        grid=windowed,
        converged=run.converged,
    )
