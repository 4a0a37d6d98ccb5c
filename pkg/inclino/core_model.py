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
#   State layout, transition/observation matrices and noise models of the
#   kinematic borehole model. Units are mm for displacement and days for time.
#
import dataclasses
import logging
import math
import typing as T

import numpy as np

from .tools import linalg
from .tools.exceptions import InvalidParameterError

LOG = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class StateLayout:
    """
    Layout of the latent state of one borehole.

    The state is ordered positions then velocities, each interleaved A, B per depth:
    ``[q1_A, q1_B, ..., qn_A, qn_B, p1_A, p1_B, ..., pn_A, pn_B]``.
    """

    depth_values: T.Tuple[float, ...]

    def __post_init__(self) -> None:
        depths = tuple(float(d) for d in self.depth_values)
        if len(depths) == 0:
            raise InvalidParameterError("StateLayout needs at least one depth")
        if not all(math.isfinite(d) and d > 0 for d in depths):
            raise InvalidParameterError(f"depths must be finite and > 0, got {depths}")
        if any(b <= a for a, b in zip(depths, depths[1:])):
            raise InvalidParameterError(f"depths must be strictly increasing, got {depths}")
        object.__setattr__(self, "depth_values", depths)

    @property
    def n_depths(self) -> int:
        return len(self.depth_values)

    @property
    def dim_state(self) -> int:
        return 4 * self.n_depths

    @property
    def dim_obs(self) -> int:
        return 2 * self.n_depths

    def position_slice(self) -> slice:
        return slice(0, self.dim_obs)

    def depth_indices(self, depth_index: int, positions_only: bool = False) -> T.List[int]:
        """State indices of depth ``depth_index``: (q_A, q_B[, p_A, p_B])."""
        if not 0 <= depth_index < self.n_depths:
            raise InvalidParameterError(f"depth index {depth_index} out of range")
        positions = [2 * depth_index, 2 * depth_index + 1]
        if positions_only:
            return positions
        return positions + [self.dim_obs + i for i in positions]


@dataclasses.dataclass(frozen=True)
class StateGaussian:
    """Mean and covariance of the latent state at grid step ``grid_index``."""

    mean: np.ndarray
    covariance: np.ndarray
    grid_index: int = 0

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        covariance = np.asarray(self.covariance, dtype=float)
        if covariance.shape != (mean.size, mean.size):
            raise InvalidParameterError(
                f"covariance shape {covariance.shape} does not match mean length {mean.size}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", covariance)

    def is_valid(self) -> bool:
        return bool(np.all(np.isfinite(self.mean))) and linalg.is_psd(self.covariance)

    def marginal(self, indices: T.Sequence[int]) -> T.Tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(indices)
        return self.mean[idx], self.covariance[np.ix_(idx, idx)]


@dataclasses.dataclass(frozen=True)
class ModelMatrices:
    F: np.ndarray
    H: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    dt: float

    def with_process_covariance(self, Q: np.ndarray) -> "ModelMatrices":
        return dataclasses.replace(self, Q=linalg.symmetrize(np.asarray(Q, dtype=float)))


def _check_dt(dt: float, allow_zero: bool = True) -> float:
    try:
        dt = float(dt)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"dt must be a number, got {dt!r}")
    if not math.isfinite(dt):
        raise InvalidParameterError(f"dt must be finite, got {dt}")
    if dt < 0 or (dt == 0 and not allow_zero):
        raise InvalidParameterError(f"dt must be > 0, got {dt}")
    return dt


def build_transition(layout: StateLayout, dt: float) -> np.ndarray:
    """
    Kinematic transition matrix ``[[I, dt I], [0, I]]`` over the position/velocity
    partition at ``2 n``.

    Parameters
    ----------
    layout : StateLayout
    dt : float
        Timestep in days, ``dt = 0`` gives the identity.

    Returns
    -------
    numpy.ndarray
        ``dim_state x dim_state`` transition matrix.
    """
    dt = _check_dt(dt)
    eye = np.eye(layout.dim_obs)
    zero = np.zeros_like(eye)
    return np.block([[eye, dt * eye], [zero, eye]])


def build_observation(layout: StateLayout) -> np.ndarray:
    """Observation matrix selecting the position entries, ``[I | 0]``."""
    return np.eye(layout.dim_obs, layout.dim_state)


def build_observation_covariance(layout: StateLayout, eps_m: float) -> np.ndarray:
    """
    Diagonal instrument noise covariance, ``(eps_m * depth)**2`` on both axes of
    each depth.

    Parameters
    ----------
    layout : StateLayout
    eps_m : float
        Instrument error per unit depth (mm/m).
    """
    try:
        eps_m = float(eps_m)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"eps_m must be a number, got {eps_m!r}")
    if not math.isfinite(eps_m) or eps_m <= 0:
        raise InvalidParameterError(f"eps_m must be finite and > 0, got {eps_m}")
    std = np.repeat(eps_m * np.asarray(layout.depth_values), 2)
    return np.diag(std**2)


def build_model(
    layout: StateLayout, dt: float, eps_m: float, Q: T.Union[np.ndarray, None] = None
) -> ModelMatrices:
    """Assemble the model matrices for grid spacing ``dt``; Q defaults to zeros."""
    dt = _check_dt(dt, allow_zero=False)
    if Q is None:
        Q = np.zeros((layout.dim_state, layout.dim_state))
    return ModelMatrices(
        F=build_transition(layout, dt),
        H=build_observation(layout),
        R=build_observation_covariance(layout, eps_m),
        Q=linalg.symmetrize(np.asarray(Q, dtype=float)),
        dt=dt,
    )
