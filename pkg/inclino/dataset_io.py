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
#   Borehole readings container, CSV ingestion with a per-row rejection
#   report, and deterministic JSON / CSV artifacts.
#
import dataclasses
import enum
import io
import json
import logging
import math
import os
import pathlib
import tempfile
import typing as T

import numpy as np
import pandas as pd
import xarray as xr

from .anomaly import GateDecision
from .config import RunConfig
from .core_model import StateGaussian, StateLayout
from .filter_smoother import SmootherResult
from .forecast import ForecastBundle
from .tools import error_handler, linalg
from .tools.exceptions import (
    InclinoIOError,
    InsufficientDataError,
    InvalidParameterError,
    ParseError,
    SchemaError,
)

if T.TYPE_CHECKING:  # pragma: no cover
    from .validation import ValidationReport

LOG = logging.getLogger(__name__)

COLUMNS = ("borehole_id", "timestamp", "depth_m", "a_mm", "b_mm")
MAX_REJECTED_FRACTION = 0.5
DEFAULT_EPS_M = 0.1

PathLike = T.Union[str, os.PathLike]


class InstrumentKind(str, enum.Enum):
    MANUAL = "manual"
    IN_PLACE = "in_place"


@dataclasses.dataclass(frozen=True)
class BoreholeSeries:
    """
    Readings of one borehole.

    ``readings`` holds ``a_mm`` and ``b_mm`` over ``(time, depth)``; a NaN pair marks a
    depth missing from the reading at that time (a partial row). Times are UTC.
    """

    borehole_id: str
    readings: xr.Dataset
    eps_m: float = DEFAULT_EPS_M
    instrument_kind: InstrumentKind = InstrumentKind.MANUAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "instrument_kind", InstrumentKind(self.instrument_kind))
        readings = self.readings
        for name in ("a_mm", "b_mm"):
            if name not in readings:
                raise InvalidParameterError(f"readings have no {name!r} variable")
            if np.isinf(readings[name].values).any():
                raise InvalidParameterError(f"{self.borehole_id}: non-finite displacement")
        times = readings["time"].values
        if times.size == 0:
            raise InsufficientDataError(f"{self.borehole_id}: no readings")
        if np.any(np.diff(times) <= np.timedelta64(0, "ns")):
            raise InvalidParameterError(f"{self.borehole_id}: timestamps must be strictly increasing")
        # validates the depths
        self.layout()

    @classmethod
    def from_arrays(
        cls,
        borehole_id: str,
        times: T.Sequence[T.Any],
        depths: T.Sequence[float],
        a_mm: np.ndarray,
        b_mm: np.ndarray,
        eps_m: float = DEFAULT_EPS_M,
        instrument_kind: T.Union[str, InstrumentKind] = InstrumentKind.MANUAL,
    ) -> "BoreholeSeries":
        """Build a series from ``n_times x n_depths`` arrays of A and B displacements."""
        index = pd.DatetimeIndex(pd.to_datetime(list(times), utc=True)).tz_convert(None)
        readings = xr.Dataset(
            {
                "a_mm": (("time", "depth"), np.asarray(a_mm, dtype=float), {"units": "mm"}),
                "b_mm": (("time", "depth"), np.asarray(b_mm, dtype=float), {"units": "mm"}),
            },
            coords={"time": index.values, "depth": np.asarray(depths, dtype=float)},
        )
        readings["depth"].attrs["units"] = "m"
        return cls(borehole_id, readings, eps_m, InstrumentKind(instrument_kind))

    @property
    def epoch(self) -> pd.Timestamp:
        return pd.Timestamp(self.readings["time"].values[0])

    @property
    def n_times(self) -> int:
        return int(self.readings.sizes["time"])

    def layout(self) -> StateLayout:
        return StateLayout(tuple(float(d) for d in self.readings["depth"].values))

    def time_days(self) -> np.ndarray:
        """Reading times in days since the first reading."""
        times = self.readings["time"].values
        return (times - times[0]) / np.timedelta64(1, "D")

    def observation_matrix(self) -> np.ndarray:
        """``n_times x 2 n_depths`` observations ordered A, B per depth."""
        stacked = np.stack([self.readings["a_mm"].values, self.readings["b_mm"].values], axis=-1)
        return stacked.reshape(self.n_times, -1)

    def partial_rows(self) -> np.ndarray:
        return ~np.all(np.isfinite(self.observation_matrix()), axis=1)

    def with_observations(self, observations: np.ndarray) -> "BoreholeSeries":
        """Copy of the series with the ``n_times x 2 n_depths`` observation matrix replaced."""
        values = np.asarray(observations, dtype=float).reshape(self.n_times, -1, 2)
        readings = self.readings.copy(deep=True)
        readings["a_mm"].values[...] = values[..., 0]
        readings["b_mm"].values[...] = values[..., 1]
        return dataclasses.replace(self, readings=readings)


@dataclasses.dataclass(frozen=True)
class RowRejection:
    line: int
    borehole_id: str
    reason: str
    detail: str = ""


@dataclasses.dataclass(frozen=True)
class ParsedReadings:
    series: T.Dict[str, BoreholeSeries]
    rejections: T.Tuple[RowRejection, ...]
    total_rows: int

    @property
    def accepted_rows(self) -> int:
        return self.total_rows - len(self.rejections)

    def single(self) -> BoreholeSeries:
        if len(self.series) != 1:
            raise InvalidParameterError(f"expected one borehole, found {sorted(self.series)}")
        return next(iter(self.series.values()))


def _to_float(column: pd.Series) -> pd.Series:
    # float() is correctly rounded, so accepted values are bit-identical to the text
    def convert(text: str) -> float:
        try:
            return float(text)
        except ValueError:
            return math.nan

    return column.map(convert).astype(float)


def parse_readings_csv(
    source: T.Union[PathLike, T.TextIO],
    config: T.Union[RunConfig, None] = None,
    error_mode: T.Union[str, None] = None,
) -> ParsedReadings:
    """
    Read a readings CSV with header ``borehole_id,timestamp,depth_m,a_mm,b_mm``.

    Malformed rows are rejected and listed (with their line number and a reason code)
    instead of aborting the read.

    Parameters
    ----------
    source : path or text stream
    config : RunConfig (optional)
        Supplies eps_m and the instrument kind, per borehole or by default.
    error_mode : str (optional)
        How rejected rows are reported: "ignore", "warn" or "raise". Defaults to
        the config setting.

    Returns
    -------
    ParsedReadings
    """
    if config is None:
        config = RunConfig()
    if error_mode is None:
        error_mode = config.error_mode
    name = source if isinstance(source, (str, os.PathLike)) else getattr(source, "name", "<stream>")
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{name}: no header, expected columns {','.join(COLUMNS)}")
    except pd.errors.ParserError as err:
        raise ParseError(f"{name}: {err}")
    except (OSError, UnicodeDecodeError) as err:
        raise InclinoIOError(f"cannot read {name}: {err}")

    frame.columns = [str(c).strip() for c in frame.columns]
    # short rows leave NaN in the trailing columns
    frame = frame.fillna("")
    for column in COLUMNS:
        if column not in frame.columns:
            raise SchemaError(f"{name}: missing column {column!r}")
    for column in frame.columns:
        if column not in COLUMNS:
            raise SchemaError(f"{name}: unexpected column {column!r}")

    total = len(frame)
    if total == 0:
        raise InsufficientDataError(f"{name}: no readings")

    ids = frame["borehole_id"].str.strip()
    times = pd.to_datetime(frame["timestamp"].str.strip(), utc=True, errors="coerce", format="ISO8601")
    numbers = {column: _to_float(frame[column]) for column in ("depth_m", "a_mm", "b_mm")}

    reason = pd.Series("", index=frame.index)

    def reject(mask: pd.Series, code: str) -> None:
        reason[mask & (reason == "")] = code

    reject(ids == "", "missing-id")
    reject(times.isna(), "bad-timestamp")
    for column, values in numbers.items():
        reject(values.isna(), "bad-number")
        reject(np.isinf(values), "non-finite")
    reject(numbers["depth_m"] <= 0, "bad-depth")

    clean = pd.DataFrame(
        {
            "borehole_id": ids,
            "time": times.dt.tz_convert(None),
            "depth": numbers["depth_m"],
            "a_mm": numbers["a_mm"],
            "b_mm": numbers["b_mm"],
        }
    )
    valid = reason == ""
    duplicated = clean[valid].duplicated(["borehole_id", "time", "depth"], keep="first")
    reject(duplicated.reindex(frame.index, fill_value=False), "duplicate-key")

    # the depth set of a borehole is the depths read at >= half of its timestamps
    valid = reason == ""
    for borehole_id, group in clean[valid].groupby("borehole_id", sort=True):
        n_times = group["time"].nunique()
        times_per_depth = group.groupby("depth")["time"].nunique()
        depth_set = set(times_per_depth.index[2 * times_per_depth >= n_times])
        outside = (clean["borehole_id"] == borehole_id) & valid & ~clean["depth"].isin(depth_set)
        reject(outside, "depth-not-in-set")

    rejected = reason != ""
    rejections = tuple(
        RowRejection(
            line=int(position) + 2,
            borehole_id=str(ids.iloc[position]),
            reason=str(reason.iloc[position]),
            detail=",".join(str(frame[c].iloc[position]) for c in COLUMNS),
        )
        for position in np.flatnonzero(rejected.to_numpy())
    )
    for rejection in rejections:
        LOG.debug(f"{name}:{rejection.line}: rejected ({rejection.reason}) {rejection.detail}")
    if len(rejections) > MAX_REJECTED_FRACTION * total:
        raise ParseError(f"{name}: {len(rejections)} of {total} rows rejected")
    if rejections:
        error_handler(
            f"{name}: {len(rejections)} of {total} rows rejected.",
            LOG,
            warn_extra="Remaining rows ingested.",
            error_mode=error_mode,
            exc_type=ParseError,
        )

    series = {}
    for borehole_id, group in clean[~rejected].groupby("borehole_id", sort=True):
        readings = (
            group.set_index(["time", "depth"])[["a_mm", "b_mm"]]
            .to_xarray()
            .sortby("time")
            .sortby("depth")
        )
        readings["a_mm"].attrs["units"] = "mm"
        readings["b_mm"].attrs["units"] = "mm"
        readings["depth"].attrs["units"] = "m"
        series[str(borehole_id)] = BoreholeSeries(
            borehole_id=str(borehole_id),
            readings=readings,
            eps_m=config.eps_m_for(str(borehole_id)),
            instrument_kind=InstrumentKind(config.instrument_kind_for(str(borehole_id))),
        )
    return ParsedReadings(series=series, rejections=rejections, total_rows=total)


def format_times(epoch: T.Union[pd.Timestamp, None], days: np.ndarray) -> T.List[str]:
    """RFC 3339 UTC timestamps ``epoch + days``, or plain day offsets without an epoch."""
    days = np.asarray(days, dtype=float)
    if epoch is None:
        return [repr(float(d)) for d in days]
    stamps = pd.Timestamp(epoch) + pd.to_timedelta(days, unit="D")
    stamps = pd.DatetimeIndex(stamps).round("us")
    if np.all(stamps.microsecond == 0):
        return list(stamps.strftime("%Y-%m-%dT%H:%M:%SZ"))
    return list(stamps.strftime("%Y-%m-%dT%H:%M:%S.%fZ"))


def readings_frame(series: BoreholeSeries) -> pd.DataFrame:
    """Long form readings in the CSV schema, one row per (timestamp, depth) read."""
    frame = series.readings[["a_mm", "b_mm"]].to_dataframe().reset_index()
    frame = frame[np.isfinite(frame["a_mm"]) & np.isfinite(frame["b_mm"])]
    frame = frame.sort_values(["time", "depth"], kind="stable")
    days = (frame["time"].to_numpy() - series.readings["time"].values[0]) / np.timedelta64(1, "D")
    return pd.DataFrame(
        {
            "borehole_id": series.borehole_id,
            "timestamp": format_times(series.epoch, days),
            "depth_m": frame["depth"].to_numpy(),
            "a_mm": frame["a_mm"].to_numpy(),
            "b_mm": frame["b_mm"].to_numpy(),
        }
    )


def write_readings_csv(
    series: T.Union[BoreholeSeries, T.Sequence[BoreholeSeries]], path: PathLike
) -> pathlib.Path:
    if isinstance(series, BoreholeSeries):
        series = [series]
    frame = pd.concat([readings_frame(s) for s in series], ignore_index=True)
    return _atomic_write(pathlib.Path(path), _frame_to_csv(frame))


# --- artifacts -------------------------------------------------------------


def _frame_to_csv(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def _dumps(document: T.Mapping[str, T.Any]) -> str:
    return json.dumps(document, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _atomic_write(path: pathlib.Path, text: str) -> pathlib.Path:
    path = pathlib.Path(path)
    tmp_name = None
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(
            "w", dir=path.parent, prefix=f".{path.name}.", suffix=".tmp",
            delete=False, encoding="utf-8", newline="\n",
        ) as tmp:
            tmp_name = tmp.name
            tmp.write(text)
        os.replace(tmp_name, path)
    except OSError as err:
        if tmp_name is not None and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise InclinoIOError(f"cannot write {path}: {err}")
    return path


def _vector(values: np.ndarray) -> T.List[T.Union[float, None]]:
    return [float(v) if math.isfinite(v) else None for v in np.asarray(values, dtype=float)]


def _covariance(matrix: np.ndarray) -> T.Dict[str, T.Any]:
    return {"dim": int(matrix.shape[0]), "lower": linalg.pack_lower(matrix)}


def _read_covariance(document: T.Mapping[str, T.Any]) -> np.ndarray:
    return linalg.unpack_lower(document["lower"], int(document["dim"]))


def _epoch_text(epoch: T.Union[pd.Timestamp, None]) -> T.Union[str, None]:
    return None if epoch is None else format_times(epoch, np.zeros(1))[0]


def smoothed_document(
    borehole_id: str,
    result: SmootherResult,
    layout: StateLayout,
    epoch: T.Union[pd.Timestamp, None] = None,
) -> T.Dict[str, T.Any]:
    grid = result.grid
    times = grid.grid_times()
    labels = format_times(epoch, times)
    steps = [
        {
            "index": int(k),
            "time": float(times[k]),
            "timestamp": labels[k],
            "observation": _vector(grid.values[k]),
            "mean": _vector(result.means[k]),
            "covariance": _covariance(result.covs[k]),
        }
        for k in range(grid.n_steps)
    ]
    return {
        "artifact": "smoothed",
        "borehole_id": borehole_id,
        "epoch": _epoch_text(epoch),
        "depths": list(layout.depth_values),
        "dt": grid.dt,
        "origin_time": grid.origin_time,
        "em_iterations": result.em_iterations,
        "converged": result.converged,
        "log_likelihood": result.log_likelihood,
        "Q": _covariance(result.Q),
        "steps": steps,
    }


def forecast_document(
    borehole_id: str,
    bundle: ForecastBundle,
    layout: StateLayout,
    epoch: T.Union[pd.Timestamp, None] = None,
) -> T.Dict[str, T.Any]:
    times = bundle.times()
    labels = format_times(epoch, times)
    steps = [
        {
            "index": state.grid_index,
            "time": float(times[i]),
            "timestamp": labels[i],
            "mean": _vector(state.mean),
            "covariance": _covariance(state.covariance),
            "predictive_mean": _vector(bundle.predictive_means[i]),
            "predictive_covariance": _covariance(bundle.predictive_covs[i]),
        }
        for i, state in enumerate(bundle.states)
    ]
    return {
        "artifact": "forecast",
        "borehole_id": borehole_id,
        "epoch": _epoch_text(epoch),
        "depths": list(layout.depth_values),
        "horizon": bundle.horizon,
        "dt_forecast": bundle.dt_forecast,
        "start_time": bundle.start_time,
        "sigma_alpha": bundle.sigma_alpha,
        "steps": steps,
    }


def decision_record(decision: GateDecision, time: T.Union[float, None] = None) -> T.Dict[str, T.Any]:
    return {
        "grid_index": decision.grid_index,
        "time": time,
        "depth_index": decision.depth_index,
        "distance": decision.distance,
        "threshold": decision.threshold,
        "accepted": decision.accepted,
        "tail_probability": decision.tail_probability,
        "observation": _vector(decision.observation),
    }


def decisions_document(
    borehole_id: str,
    decisions: T.Sequence[GateDecision],
    origin_time: float = 0.0,
    dt: T.Union[float, None] = None,
    epoch: T.Union[pd.Timestamp, None] = None,
    only_rejected: bool = True,
) -> T.Dict[str, T.Any]:
    selected = [d for d in decisions if not (only_rejected and d.accepted)]
    times = [None if dt is None else origin_time + d.grid_index * dt for d in selected]
    records = [decision_record(d, t) for d, t in zip(selected, times)]
    if dt is not None:
        for record, label in zip(records, format_times(epoch, np.array(times, dtype=float))):
            record["timestamp"] = label
    return {
        "artifact": "anomalies",
        "borehole_id": borehole_id,
        "epoch": _epoch_text(epoch),
        "n_gated": len(decisions),
        "n_rejected": sum(1 for d in decisions if not d.accepted),
        "decisions": records,
    }


def smoothed_frame(
    borehole_id: str,
    result: SmootherResult,
    layout: StateLayout,
    epoch: T.Union[pd.Timestamp, None] = None,
) -> pd.DataFrame:
    """Plot-ready smoothed series, one row per step and depth."""
    ds = result.to_dataset(layout)
    labels = format_times(epoch, ds["time"].values)
    rows = []
    for k in range(ds.sizes["step"]):
        for j, depth in enumerate(layout.depth_values):
            row = {"borehole_id": borehole_id, "step": k, "timestamp": labels[k], "depth_m": depth}
            for a, axis in enumerate("ab"):
                row[f"{axis}_obs"] = float(ds["observation"].values[k, j, a])
                row[f"{axis}_mean"] = float(ds["position"].values[k, j, a])
                row[f"{axis}_sd"] = float(ds["position_sd"].values[k, j, a])
                row[f"{axis}_velocity"] = float(ds["velocity"].values[k, j, a])
            rows.append(row)
    return pd.DataFrame(rows)


def forecast_frame(
    borehole_id: str,
    bundle: ForecastBundle,
    layout: StateLayout,
    epoch: T.Union[pd.Timestamp, None] = None,
) -> pd.DataFrame:
    """Plot-ready forecast bands at 1 and 2 sigma, one row per step and depth."""
    labels = format_times(epoch, bundle.times())
    sd = bundle.predictive_sd()
    rows = []
    for i in range(bundle.n_steps):
        for j, depth in enumerate(layout.depth_values):
            row = {"borehole_id": borehole_id, "step": i + 1, "timestamp": labels[i], "depth_m": depth}
            for a, axis in enumerate("ab"):
                mean, s = float(bundle.predictive_means[i, 2 * j + a]), float(sd[i, 2 * j + a])
                row[f"{axis}_mean"] = mean
                row[f"{axis}_sd"] = s
                row[f"{axis}_lower_1sd"] = mean - s
                row[f"{axis}_upper_1sd"] = mean + s
                row[f"{axis}_lower_2sd"] = mean - 2 * s
                row[f"{axis}_upper_2sd"] = mean + 2 * s
            rows.append(row)
    return pd.DataFrame(rows)


def decisions_frame(document: T.Mapping[str, T.Any]) -> pd.DataFrame:
    columns = ["borehole_id", "grid_index", "timestamp", "depth_index", "distance", "threshold", "accepted"]
    rows = [
        {
            "borehole_id": document["borehole_id"],
            **{c: record.get(c) for c in columns[1:]},
        }
        for record in document["decisions"]
    ]
    return pd.DataFrame(rows, columns=columns)


def write_artifacts(
    directory: PathLike,
    borehole_id: str,
    layout: StateLayout,
    epoch: T.Union[pd.Timestamp, None] = None,
    smoothed: T.Union[SmootherResult, None] = None,
    forecast: T.Union[ForecastBundle, None] = None,
    decisions: T.Union[T.Sequence[GateDecision], None] = None,
    decisions_grid: T.Union[T.Tuple[float, float], None] = None,
    report: T.Union["ValidationReport", None] = None,
    netcdf: bool = False,
) -> T.List[pathlib.Path]:
    """
    Write the given artifacts as ``{borehole_id}.{artifact}.{json|csv|nc}``.

    Every file is rendered before the first one is written and each file is written
    to a temporary name and renamed, so a failure leaves no partial file behind.

    ``decisions_grid`` is ``(origin_time, dt)`` of the grid the decisions refer to.
    """
    directory = pathlib.Path(directory)
    texts: T.Dict[str, str] = {}
    datasets: T.Dict[str, xr.Dataset] = {}
    if smoothed is not None:
        texts["smoothed.json"] = _dumps(smoothed_document(borehole_id, smoothed, layout, epoch))
        texts["smoothed.csv"] = _frame_to_csv(smoothed_frame(borehole_id, smoothed, layout, epoch))
        datasets["smoothed.nc"] = smoothed.to_dataset(layout)
    if forecast is not None:
        texts["forecast.json"] = _dumps(forecast_document(borehole_id, forecast, layout, epoch))
        texts["forecast.csv"] = _frame_to_csv(forecast_frame(borehole_id, forecast, layout, epoch))
        datasets["forecast.nc"] = forecast.to_dataset(layout)
    if decisions is not None:
        origin_time, dt = decisions_grid if decisions_grid is not None else (0.0, None)
        document = decisions_document(borehole_id, decisions, origin_time, dt, epoch)
        texts["anomalies.json"] = _dumps(document)
        texts["anomalies.csv"] = _frame_to_csv(decisions_frame(document))
    if report is not None:
        texts["validation.json"] = _dumps(report.to_dict())

    written = [_atomic_write(directory / f"{borehole_id}.{name}", text) for name, text in texts.items()]
    if netcdf:
        for name, dataset in datasets.items():
            written.append(_write_netcdf(directory / f"{borehole_id}.{name}", dataset))
    return written


def write_summary_csv(frame: pd.DataFrame, path: PathLike) -> pathlib.Path:
    return _atomic_write(pathlib.Path(path), _frame_to_csv(frame))


def _write_netcdf(path: pathlib.Path, dataset: xr.Dataset) -> pathlib.Path:
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        dataset.to_netcdf(tmp)
        os.replace(tmp, path)
    except OSError as err:
        if tmp.exists():
            tmp.unlink()
        raise InclinoIOError(f"cannot write {path}: {err}")
    return path


def _load(path: PathLike, artifact: str) -> T.Dict[str, T.Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except (OSError, json.JSONDecodeError) as err:
        raise InclinoIOError(f"cannot read {path}: {err}")
    if document.get("artifact") != artifact:
        raise SchemaError(f"{path}: not a {artifact} artifact")
    return document


def _array(values: T.Sequence[T.Union[float, None]]) -> np.ndarray:
    return np.array([math.nan if v is None else v for v in values], dtype=float)


def read_forecast(path: PathLike) -> ForecastBundle:
    document = _load(path, "forecast")
    steps = document["steps"]
    return ForecastBundle(
        states=tuple(
            StateGaussian(_array(s["mean"]), _read_covariance(s["covariance"]), s["index"])
            for s in steps
        ),
        predictive_means=np.array([_array(s["predictive_mean"]) for s in steps]),
        predictive_covs=np.array([_read_covariance(s["predictive_covariance"]) for s in steps]),
        horizon=document["horizon"],
        dt_forecast=document["dt_forecast"],
        start_time=document["start_time"],
        sigma_alpha=document["sigma_alpha"],
    )


@dataclasses.dataclass(frozen=True)
class SmoothedArtifact:
    borehole_id: str
    times: np.ndarray
    observations: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    Q: np.ndarray


def read_smoothed(path: PathLike) -> SmoothedArtifact:
    document = _load(path, "smoothed")
    steps = document["steps"]
    return SmoothedArtifact(
        borehole_id=document["borehole_id"],
        times=np.array([s["time"] for s in steps], dtype=float),
        observations=np.array([_array(s["observation"]) for s in steps]),
        means=np.array([_array(s["mean"]) for s in steps]),
        covs=np.array([_read_covariance(s["covariance"]) for s in steps]),
        Q=_read_covariance(document["Q"]),
    )


def read_gate_decisions(path: PathLike) -> T.List[GateDecision]:
    document = _load(path, "anomalies")
    return [
        GateDecision(
            grid_index=record["grid_index"],
            distance=record["distance"],
            threshold=record["threshold"],
            accepted=record["accepted"],
            observation=_array(record["observation"]),
            tail_probability=record["tail_probability"],
            depth_index=record["depth_index"],
        )
        for record in document["decisions"]
    ]


def read_validation_report(path: PathLike) -> "ValidationReport":
    from .validation import ValidationReport

    return ValidationReport.from_dict(_load(path, "validation"))
