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
#   Validation gating of observations against the one step ahead predictive
#   distribution, using the Mahalanobis distance.
#
import dataclasses
import logging
import math
import typing as T

import numpy as np
import scipy.linalg
import scipy.stats

from .core_model import ModelMatrices, StateGaussian
from .tools import linalg
from .tools.exceptions import InvalidParameterError, SingularGateError

LOG = logging.getLogger(__name__)

DEFAULT_GAMMA = 5.0


@dataclasses.dataclass(frozen=True)
class GateDecision:
    grid_index: int
    distance: float
    threshold: float
    accepted: bool
    observation: np.ndarray
    tail_probability: float = 1.0
    # None for a joint decision over all observed depths
    depth_index: T.Union[int, None] = None

    @property
    def dof(self) -> int:
        return int(np.isfinite(self.observation).sum())


def predictive_distribution(
    prior: StateGaussian, model: ModelMatrices
) -> T.Tuple[np.ndarray, np.ndarray]:
    """
    Predictive distribution of the next observation, ``N(H mu, H Sigma H^T + R)``.

    Parameters
    ----------
    prior : StateGaussian
        One step ahead predicted state.
    model : ModelMatrices

    Returns
    -------
    tuple of numpy.ndarray
        Mean (``dim_obs``) and symmetric covariance (``dim_obs x dim_obs``).
    """
    if prior.mean.size != model.H.shape[1]:
        raise InvalidParameterError(
            f"state of size {prior.mean.size} does not match H of shape {model.H.shape}"
        )
    mean = model.H @ prior.mean
    covariance = linalg.symmetrize(model.H @ prior.covariance @ model.H.T + model.R)
    return mean, covariance


def mahalanobis(x: np.ndarray, mean: np.ndarray, covariance: np.ndarray) -> float:
    """
    Mahalanobis distance of ``x`` from ``N(mean, covariance)``.

    The covariance is regularised and Cholesky factorised; no explicit inverse is formed.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    mean = np.asarray(mean, dtype=float).reshape(-1)
    covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
    if x.shape != mean.shape or covariance.shape != (x.size, x.size):
        raise InvalidParameterError(
            f"dimension mismatch: x {x.shape}, mean {mean.shape}, covariance {covariance.shape}"
        )
    try:
        lower, _ = linalg.regularised_cholesky(covariance)
    except (np.linalg.LinAlgError, ValueError) as err:
        raise SingularGateError(f"gate covariance is not positive definite: {err}")
    whitened = scipy.linalg.solve_triangular(lower, x - mean, lower=True)
    return float(math.sqrt(whitened @ whitened))


def chi2_tail(distance: float, dof: int) -> float:
    """Probability of a squared distance at least ``distance**2`` under chi-square(dof)."""
    if dof <= 0:
        return 1.0
    return float(scipy.stats.chi2.sf(distance**2, dof))


def _gate(
    grid_index: int,
    observation: np.ndarray,
    mean: np.ndarray,
    covariance: np.ndarray,
    rows: np.ndarray,
    gamma: float,
    depth_index: T.Union[int, None] = None,
) -> GateDecision:
    distance = mahalanobis(observation[rows], mean[rows], covariance[np.ix_(rows, rows)])
    return GateDecision(
        grid_index=grid_index,
        distance=distance,
        threshold=gamma,
        accepted=distance <= gamma,
        observation=observation,
        tail_probability=chi2_tail(distance, rows.size),
        depth_index=depth_index,
    )


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not math.isfinite(gamma) or gamma <= 0:
        raise InvalidParameterError(f"gamma must be finite and > 0, got {gamma}")
    return gamma


def gate_step(
    prior: StateGaussian,
    observation: np.ndarray,
    model: ModelMatrices,
    gamma: float = DEFAULT_GAMMA,
) -> GateDecision:
    """
    Gate one observation jointly over all its observed entries.

    NaN entries of ``observation`` (depths missing from the reading) are left out of
    the distance. The observation is accepted iff the distance is ``<= gamma``.
    """
    gamma = _check_gamma(gamma)
    observation = np.asarray(observation, dtype=float).reshape(-1)
    rows = np.flatnonzero(np.isfinite(observation))
    if rows.size == 0:
        raise InvalidParameterError("cannot gate an observation with no finite entries")
    mean, covariance = predictive_distribution(prior, model)
    return _gate(prior.grid_index, observation, mean, covariance, rows, gamma)


def gate_depths(
    prior: StateGaussian,
    observation: np.ndarray,
    model: ModelMatrices,
    gamma: float = DEFAULT_GAMMA,
) -> T.List[GateDecision]:
    """Gate each depth's (A, B) pair separately, skipping depths with no finite entries."""
    gamma = _check_gamma(gamma)
    observation = np.asarray(observation, dtype=float).reshape(-1)
    mean, covariance = predictive_distribution(prior, model)
    decisions = []
    for depth_index in range(observation.size // 2):
        pair = np.array([2 * depth_index, 2 * depth_index + 1])
        rows = pair[np.isfinite(observation[pair])]
        if rows.size == 0:
            continue
        decisions.append(
            _gate(prior.grid_index, observation, mean, covariance, rows, gamma, depth_index)
        )
    return decisions


def rejected_rows(decisions: T.Sequence[GateDecision], dim_obs: int) -> np.ndarray:
    """Boolean mask of observation rows excluded by the rejected decisions."""
    mask = np.zeros(dim_obs, dtype=bool)
    for decision in decisions:
        if decision.accepted:
            continue
        if decision.depth_index is None:
            mask[:] = True
        else:
            mask[2 * decision.depth_index : 2 * decision.depth_index + 2] = True
    return mask
