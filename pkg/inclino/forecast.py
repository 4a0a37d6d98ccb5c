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
#   Projection of a learned process covariance on to the white noise
#   acceleration template, and open loop forecasting at any timestep.
#
import dataclasses
import logging
import math
import typing as T

import filterpy.common
import numpy as np
import xarray as xr

from .core_model import ModelMatrices, StateGaussian, StateLayout, build_transition
from .tools import error_handler, linalg
from .tools.exceptions import DegenerateTemplateError, InvalidParameterError, NumericalError

LOG = logging.getLogger(__name__)

DEFAULT_HORIZON = 30.0


@dataclasses.dataclass(frozen=True)
class KinematicNoiseFit:
    sigma_alpha: float
    residual_norm: float
    dt_fit: float
    clamped: bool = False


@dataclasses.dataclass(frozen=True)
class ForecastBundle:
    """
    Open loop forecast from ``start_time`` (days) in steps of ``dt_forecast``.

    ``states[i]`` and the predictive arrays at ``i`` refer to time
    ``start_time + (i + 1) * dt_forecast``.
    """

    states: T.Tuple[StateGaussian, ...]
    predictive_means: np.ndarray
    predictive_covs: np.ndarray
    horizon: float
    dt_forecast: float
    start_time: float = 0.0
    sigma_alpha: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.states)

    def times(self) -> np.ndarray:
        return self.start_time + self.dt_forecast * np.arange(1, self.n_steps + 1)

    def predictive_sd(self) -> np.ndarray:
        """``n_steps x dim_obs`` standard deviations of the predictive observations."""
        variances = np.diagonal(self.predictive_covs, axis1=1, axis2=2)
        return np.sqrt(np.clip(variances, 0.0, None))

    def bands(self, k: float) -> T.Tuple[np.ndarray, np.ndarray]:
        sd = self.predictive_sd()
        return self.predictive_means - k * sd, self.predictive_means + k * sd

    def to_dataset(self, layout: StateLayout) -> xr.Dataset:
        n = layout.n_depths
        dims = ("step", "depth", "axis")
        sd = self.predictive_sd().reshape(-1, n, 2)
        means = np.array([state.mean for state in self.states])
        return xr.Dataset(
            {
                "mean": (dims, self.predictive_means.reshape(-1, n, 2), {"units": "mm"}),
                "sd": (dims, sd, {"units": "mm"}),
                "velocity": (dims, means[:, 2 * n :].reshape(-1, n, 2), {"units": "mm day-1"}),
            },
            coords={
                "step": np.arange(1, self.n_steps + 1),
                "time": ("step", self.times()),
                "depth": np.asarray(layout.depth_values),
                "axis": ["A", "B"],
            },
            attrs={
                "horizon": self.horizon,
                "dt_forecast": self.dt_forecast,
                "sigma_alpha": self.sigma_alpha,
            },
        )


def kinematic_template(dim_obs: int, dt: float) -> np.ndarray:
    """Van Loan white noise acceleration template for ``dim_obs`` position entries."""
    if not math.isfinite(dt) or dt <= 0:
        raise InvalidParameterError(f"dt must be finite and > 0, got {dt}")
    # positions first, then velocities
    return filterpy.common.Q_continuous_white_noise(
        dim=2, dt=dt, spectral_density=1.0, block_size=dim_obs, order_by_dim=False
    )


def build_lambda(layout: StateLayout, dt: float) -> np.ndarray:
    """
    Kinematic process covariance template Lambda(dt).

    Position block ``dt^3/3 I``, cross blocks ``dt^2/2 I`` coupling each position
    entry to its own velocity, velocity block ``dt I``.
    """
    return kinematic_template(layout.dim_obs, dt)


def fit_sigma_alpha(
    q_learned: np.ndarray,
    lambda_: np.ndarray,
    dt_fit: float = float("nan"),
    error_mode: str = "warn",
) -> KinematicNoiseFit:
    """
    Least squares white noise intensity, ``<Q, Lambda>_F / <Lambda, Lambda>_F``.

    Parameters
    ----------
    q_learned : numpy.ndarray
        Process covariance learned at timestep ``dt_fit``.
    lambda_ : numpy.ndarray
        Template evaluated at the same timestep.
    dt_fit : float (optional)
        Recorded on the result.
    error_mode : str
        Reporting of a negative intensity, which is clamped to zero.

    Returns
    -------
    KinematicNoiseFit
    """
    q_learned = np.asarray(q_learned, dtype=float)
    lambda_ = np.asarray(lambda_, dtype=float)
    if q_learned.shape != lambda_.shape:
        raise InvalidParameterError(f"shape mismatch {q_learned.shape} vs {lambda_.shape}")
    norm = float(np.sum(lambda_ * lambda_))
    if norm == 0.0 or not math.isfinite(norm):
        raise DegenerateTemplateError("template has zero (or non-finite) Frobenius norm")
    sigma_alpha = float(np.sum(q_learned * lambda_)) / norm
    clamped = sigma_alpha < 0.0
    if clamped:
        error_handler(
            f"negative white noise intensity {sigma_alpha:.6g} fitted to the learned Q.",
            LOG,
            warn_extra="Clamped to 0.",
            error_mode=error_mode,
            exc_type=NumericalError,
        )
        sigma_alpha = 0.0
    residual = float(np.linalg.norm(q_learned - sigma_alpha * lambda_))
    return KinematicNoiseFit(
        sigma_alpha=sigma_alpha, residual_norm=residual, dt_fit=float(dt_fit), clamped=clamped
    )


def n_forecast_steps(horizon: float, dt_forecast: float) -> int:
    # ceil, tolerant to horizon / dt landing a rounding error above an integer
    ratio = horizon / dt_forecast
    return max(int(math.ceil(ratio - 1e-9 * max(1.0, ratio))), 1)


def forecast_states(
    last_state: StateGaussian,
    layout: StateLayout,
    fit: KinematicNoiseFit,
    dt_forecast: float,
    horizon: float,
    model: ModelMatrices,
    start_time: float = 0.0,
) -> ForecastBundle:
    """
    Propagate ``last_state`` open loop with ``F(dt_forecast)`` and
    ``Q_f = sigma_alpha Lambda(dt_forecast)`` for ``ceil(horizon / dt_forecast)``
    steps, attaching the predictive observation distribution ``N(H mu, H Sigma H^T + R)``
    at each step.
    """
    values = (dt_forecast, horizon, fit.sigma_alpha, start_time)
    if not all(math.isfinite(v) for v in values):
        raise InvalidParameterError(f"non-finite forecast input in {values}")
    if not np.all(np.isfinite(last_state.mean)) or not np.all(np.isfinite(last_state.covariance)):
        raise InvalidParameterError("non-finite forecast start state")
    if dt_forecast <= 0:
        raise InvalidParameterError(f"dt_forecast must be > 0, got {dt_forecast}")
    if horizon < dt_forecast:
        raise InvalidParameterError(f"horizon {horizon} is shorter than dt_forecast {dt_forecast}")

    F = build_transition(layout, dt_forecast)
    Q = fit.sigma_alpha * build_lambda(layout, dt_forecast)
    mean, cov = last_state.mean, last_state.covariance
    states = []
    predictive_means = []
    predictive_covs = []
    for step in range(1, n_forecast_steps(horizon, dt_forecast) + 1):
        mean = F @ mean
        cov = linalg.symmetrize(F @ cov @ F.T + Q)
        states.append(StateGaussian(mean, cov, last_state.grid_index + step))
        predictive_means.append(model.H @ mean)
        predictive_covs.append(linalg.symmetrize(model.H @ cov @ model.H.T + model.R))

    return ForecastBundle(
        states=tuple(states),
        predictive_means=np.array(predictive_means),
        predictive_covs=np.array(predictive_covs),
        horizon=float(horizon),
        dt_forecast=float(dt_forecast),
        start_time=float(start_time),
        sigma_alpha=fit.sigma_alpha,
    )


def band_coverage(
    bundle: ForecastBundle, observations: np.ndarray, k: float = 2.0
) -> T.Tuple[int, int]:
    """
    Count held-out observations inside the ``k`` sigma predictive bands.

    ``observations`` is aligned with the bundle steps (``n_steps x dim_obs``, NaN
    where missing). Returns ``(inside, total)`` over finite entries.
    """
    observations = np.asarray(observations, dtype=float)
    n = min(observations.shape[0], bundle.n_steps)
    lower, upper = bundle.bands(k)
    values = observations[:n]
    finite = np.isfinite(values)
    inside = finite & (values >= lower[:n]) & (values <= upper[:n])
    return int(inside.sum()), int(finite.sum())
