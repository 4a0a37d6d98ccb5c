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
#   Mapping of irregularly sampled readings on to a regular grid. Readings are
#   moved to the nearest grid time, their values are never interpolated.
#
import dataclasses
import logging
import math
import typing as T

import numpy as np

from .tools import error_handler
from .tools.exceptions import InsufficientDataError, InvalidParameterError

LOG = logging.getLogger(__name__)

DEFAULT_DT_FLOOR = 1.0 / 24.0
DEFAULT_DT_CEILING = 7.0


@dataclasses.dataclass(frozen=True)
class GriddedObservations:
    """
    Observations on a regular grid of spacing ``dt`` days.

    ``values`` has one row per grid slot; gap slots are all-NaN rows and a filled
    slot may still hold NaN entries for depths missing from that reading.
    ``origin_time`` and ``source_times`` are in days on the series' own time axis.
    """

    dt: float
    origin_time: float
    values: np.ndarray
    filled: np.ndarray
    source_times: np.ndarray
    collisions: int = 0

    @property
    def n_steps(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim_obs(self) -> int:
        return int(self.values.shape[1])

    @property
    def n_filled(self) -> int:
        return int(self.filled.sum())

    @property
    def span(self) -> float:
        return (self.n_steps - 1) * self.dt

    def grid_times(self) -> np.ndarray:
        return self.origin_time + self.dt * np.arange(self.n_steps)

    def observation(self, k: int) -> T.Union[np.ndarray, None]:
        if not self.filled[k]:
            return None
        return self.values[k]

    def slice(self, start: int, stop: T.Union[int, None] = None) -> "GriddedObservations":
        """Sub-grid of slots ``start:stop`` re-indexed from zero."""
        start, stop, _ = slice(start, stop).indices(self.n_steps)
        return dataclasses.replace(
            self,
            origin_time=self.origin_time + start * self.dt,
            values=self.values[start:stop],
            filled=self.filled[start:stop],
            source_times=self.source_times[start:stop],
            collisions=0,
        )

    def tail(self, n_steps: int) -> "GriddedObservations":
        return self.slice(max(self.n_steps - n_steps, 0))


def select_dt(
    timestamps: T.Sequence[float],
    floor: float = DEFAULT_DT_FLOOR,
    ceiling: float = DEFAULT_DT_CEILING,
) -> float:
    """
    Grid spacing for a borehole: the smallest positive gap between consecutive
    timestamps, clamped to ``[floor, ceiling]``.

    Parameters
    ----------
    timestamps : sequence of float
        Sorted reading times in days.
    floor, ceiling : float
        Clamp bounds in days.
    """
    if not 0 < floor <= ceiling:
        raise InvalidParameterError(f"need 0 < floor <= ceiling, got {floor}, {ceiling}")
    times = np.unique(np.asarray(timestamps, dtype=float))
    if times.size < 2:
        raise InsufficientDataError(
            f"at least 2 distinct timestamps are needed to select dt, got {times.size}"
        )
    gap = float(np.diff(times).min())
    dt = min(max(gap, floor), ceiling)
    if dt != gap:
        LOG.info(f"minimum gap {gap:.6g} days clamped to dt = {dt:.6g} days")
    return dt


def remap(
    times: T.Sequence[float],
    observations: np.ndarray,
    dt: float,
    origin_time: T.Union[float, None] = None,
    error_mode: str = "warn",
) -> GriddedObservations:
    """
    Assign each reading to its nearest grid slot.

    Slots between the first and last reading that receive nothing are gaps. When
    two readings land in the same slot the later one is kept.

    Parameters
    ----------
    times : sequence of float
        Sorted reading times in days.
    observations : numpy.ndarray
        ``len(times) x dim_obs`` observation vectors (mm).
    dt : float
        Grid spacing in days.
    origin_time : float (optional)
        Time of grid slot 0, defaults to the first reading time.
    error_mode : str
        How collisions are reported: "ignore", "warn" or "raise".

    Returns
    -------
    GriddedObservations
    """
    if not math.isfinite(dt) or dt <= 0:
        raise InvalidParameterError(f"dt must be finite and > 0, got {dt}")
    times = np.asarray(times, dtype=float)
    observations = np.asarray(observations, dtype=float)
    if times.size == 0:
        raise InsufficientDataError("no readings to remap")
    if observations.ndim != 2 or observations.shape[0] != times.size:
        raise InvalidParameterError(
            f"observations shape {observations.shape} does not match {times.size} times"
        )
    if np.any(np.diff(times) < 0):
        raise InvalidParameterError("readings must be sorted by time")
    if origin_time is None:
        origin_time = float(times[0])
    if times[0] < origin_time:
        raise InvalidParameterError("readings precede the grid origin")

    # round half up, so |t - j dt| <= dt / 2
    indices = np.floor((times - origin_time) / dt + 0.5).astype(np.int64)
    n_steps = int(indices[-1]) + 1

    values = np.full((n_steps, observations.shape[1]), np.nan)
    source_times = np.full(n_steps, np.nan)
    filled = np.zeros(n_steps, dtype=bool)
    collisions = 0
    for reading, index in enumerate(indices):
        if filled[index]:
            collisions += 1
            error_handler(
                f"readings at t={source_times[index]:.6g} and t={times[reading]:.6g} days "
                f"both map to grid slot {index}.",
                LOG,
                warn_extra="Keeping the later reading.",
                error_mode=error_mode,
                exc_type=InvalidParameterError,
            )
        values[index] = observations[reading]
        source_times[index] = times[reading]
        filled[index] = True

    return GriddedObservations(
        dt=float(dt),
        origin_time=float(origin_time),
        values=values,
        filled=filled,
        source_times=source_times,
        collisions=collisions,
    )
