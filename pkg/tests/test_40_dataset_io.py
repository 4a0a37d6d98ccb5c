import io
import json
import os
import tempfile

import _test_objects
import numpy as np
import pandas as pd
import pytest

import inclino
from inclino import dataset_io, pipeline
from inclino.tools.exceptions import InsufficientDataError, ParseError, SchemaError

CSV_HEADER = _test_objects.CSV_HEADER


def _parse(text: str, **kwargs):  # type: ignore
    return inclino.parse_readings_csv(io.StringIO(text), **kwargs)


def test_parse_well_formed() -> None:
    parsed = _parse(_test_objects.WELL_FORMED_CSV)
    assert parsed.total_rows == 3 and parsed.accepted_rows == 3
    assert parsed.rejections == ()
    series = parsed.single()
    assert series.borehole_id == "BH1"
    assert series.layout().depth_values == (1.5,)
    assert series.observation_matrix().tolist() == [[0.25, -0.5], [0.3, -0.45], [0.35, -0.4]]
    assert series.time_days().tolist() == [0.0, 1.0, 2.0]
    assert str(series.epoch) == "2021-03-01 00:00:00"
    assert series.eps_m == 0.1
    assert series.instrument_kind is inclino.InstrumentKind.MANUAL


def test_parse_values_are_bit_exact() -> None:
    values = ["0.1", "1e-17", "-123456.789012345678", "3.141592653589793"]
    rows = "".join(
        f"BH1,2021-03-0{k + 1}T00:00:00Z,2.0,{v},{v}\n" for k, v in enumerate(values)
    )
    series = _parse(CSV_HEADER + rows).single()
    assert series.observation_matrix()[:, 0].tolist() == [float(v) for v in values]


def test_parse_time_zones() -> None:
    text = CSV_HEADER + (
        "BH1,2021-03-01T02:00:00+02:00,1.0,0.0,0.0\n"
        "BH1,2021-03-01T12:00:00Z,1.0,0.0,0.0\n"
        "BH1,2021-03-02 00:00:00,1.0,0.0,0.0\n"
    )
    series = _parse(text).single()
    assert series.time_days().tolist() == [0.0, 0.5, 1.0]


def test_parse_rejects_rows() -> None:
    text = CSV_HEADER + (
        "BH1,2021-03-01T00:00:00Z,1.0,0.1,0.2\n"
        "BH1,2021-03-02T00:00:00Z,1.0,abc,0.2\n"
        "BH1,2021-03-03T00:00:00Z,1.0,0.3,0.2\n"
        "BH1,2021-03-03T00:00:00Z,1.0,9.9,9.9\n"
        "BH1,yesterday,1.0,0.3,0.2\n"
        ",2021-03-05T00:00:00Z,1.0,0.3,0.2\n"
        "BH1,2021-03-06T00:00:00Z,1.0,inf,0.2\n"
        "BH1,2021-03-07T00:00:00Z,1.0,0.4,0.2\n"
        "BH1,2021-03-08T00:00:00Z,-1.0,0.4,0.2\n"
        "BH1,2021-03-09T00:00:00Z,1.0,0.5,0.2\n"
        "BH1,2021-03-10T00:00:00Z,1.0,0.6,0.2\n"
        "BH1,2021-03-11T00:00:00Z,1.0,0.7,0.2\n"
        "BH1,2021-03-12T00:00:00Z,1.0,0.8,0.2\n"
        "BH1,2021-03-13T00:00:00Z,1.0,0.9,0.2\n"
    )
    parsed = _parse(text, error_mode="ignore")
    reasons = [(r.line, r.reason) for r in parsed.rejections]
    assert reasons == [
        (3, "bad-number"),
        (5, "duplicate-key"),
        (6, "bad-timestamp"),
        (7, "missing-id"),
        (8, "non-finite"),
        (10, "bad-depth"),
    ]
    assert parsed.accepted_rows + len(parsed.rejections) == parsed.total_rows == 14
    series = parsed.single()
    assert series.n_times == 8
    # the earlier of two readings with the same key is kept
    assert series.observation_matrix()[1].tolist() == [0.3, 0.2]

    with pytest.raises(ParseError):
        _parse(text, error_mode="raise")


def test_parse_rejection_warning(caplog: pytest.LogCaptureFixture) -> None:
    text = _test_objects.WELL_FORMED_CSV + "BH1,2021-03-04T00:00:00Z,1.5,x,0.0\n"
    parsed = _parse(text, error_mode="warn")
    assert len(parsed.rejections) == 1
    assert "1 of 4 rows rejected" in caplog.text


def test_parse_depth_set_and_partial_rows() -> None:
    rows = []
    for day in range(1, 5):
        rows.append(f"BH1,2021-03-0{day}T00:00:00Z,1.0,0.{day},0.0\n")
        if day != 3:
            rows.append(f"BH1,2021-03-0{day}T00:00:00Z,2.0,0.{day},0.0\n")
    rows.append("BH1,2021-03-02T00:00:00Z,3.0,0.0,0.0\n")
    parsed = _parse(CSV_HEADER + "".join(rows), error_mode="ignore")
    assert [r.reason for r in parsed.rejections] == ["depth-not-in-set"]
    series = parsed.single()
    assert series.layout().depth_values == (1.0, 2.0)
    assert series.partial_rows().tolist() == [False, False, True, False]
    assert np.isnan(series.observation_matrix()[2, 2:]).all()


def test_parse_several_boreholes() -> None:
    text = _test_objects.WELL_FORMED_CSV + (
        "AB7,2021-03-01T00:00:00Z,1.0,0.0,0.0\n"
        "AB7,2021-03-02T00:00:00Z,1.0,0.0,0.0\n"
    )
    config = inclino.RunConfig(boreholes={"AB7": {"eps_m": "0.05 mm/m", "instrument_kind": "in_place"}})
    parsed = _parse(text, config=config)
    assert list(parsed.series) == ["AB7", "BH1"]
    assert parsed.series["AB7"].eps_m == pytest.approx(0.05)
    assert parsed.series["AB7"].instrument_kind is inclino.InstrumentKind.IN_PLACE
    assert parsed.series["BH1"].eps_m == 0.1
    with pytest.raises(inclino.tools.exceptions.InvalidParameterError):
        parsed.single()


def test_parse_errors() -> None:
    with pytest.raises(SchemaError):
        _parse("borehole_id,timestamp,depth_m,a_mm\nBH1,2021-03-01,1.0,0.0\n")
    with pytest.raises(SchemaError):
        _parse(CSV_HEADER.strip() + ",temperature\nBH1,2021-03-01,1.0,0.0,0.0,12\n")
    with pytest.raises(SchemaError):
        _parse("")
    with pytest.raises(InsufficientDataError):
        _parse(CSV_HEADER)

    bad = CSV_HEADER + "BH1,2021-03-01,1.0,a,0.0\nBH1,2021-03-02,1.0,b,0.0\nBH1,2021-03-03,1.0,0.0,0.0\n"
    with pytest.raises(ParseError):
        _parse(bad, error_mode="ignore")

    with pytest.raises(inclino.tools.exceptions.InclinoIOError):
        inclino.parse_readings_csv("/nonexistent/readings.csv")


def test_write_readings_csv() -> None:
    series = _test_objects.synthetic(2, layout=_test_objects.LAYOUT_2, steps=10, borehole_id="BH9")
    with tempfile.TemporaryDirectory() as tmpdir:
        path = os.path.join(tmpdir, "BH9.readings.csv")
        inclino.write_readings_csv(series, path)
        with open(path) as f:
            lines = f.read().splitlines()
        assert lines[0] == CSV_HEADER.strip()
        assert lines[1].startswith("BH9,2020-01-01T00:00:00Z,1.0,")
        assert len(lines) == 1 + 10 * 2
        parsed = inclino.parse_readings_csv(path)
    again = parsed.single()
    assert again.observation_matrix().tolist() == series.observation_matrix().tolist()
    assert again.time_days().tolist() == series.time_days().tolist()


def test_format_times() -> None:
    epoch = pd.Timestamp("2021-03-01")
    assert dataset_io.format_times(epoch, np.array([0.0, 1.5])) == [
        "2021-03-01T00:00:00Z",
        "2021-03-02T12:00:00Z",
    ]
    assert dataset_io.format_times(None, np.array([2.0])) == ["2.0"]


def _runs():  # type: ignore
    series = _test_objects.synthetic(4, layout=_test_objects.LAYOUT_2, steps=40)
    config = inclino.RunConfig(window=40, em_max_iters=5, forecast_horizon=5.0, error_mode="ignore")
    smooth = pipeline.smooth_series(series, config)
    bundle = pipeline.forecast_run(smooth, config)
    detect = pipeline.detect_series(series, config)
    return series, smooth, bundle, detect


def _write_all(directory: str, runs) -> None:  # type: ignore
    series, smooth, bundle, detect = runs
    inclino.write_artifacts(
        directory,
        series.borehole_id,
        smooth.layout,
        epoch=series.epoch,
        smoothed=smooth.result,
        forecast=bundle,
        decisions=detect.decisions,
        decisions_grid=(smooth.grid.origin_time, smooth.grid.dt),
    )


def test_write_artifacts() -> None:
    runs = _runs()
    series, smooth, bundle, detect = runs
    names = sorted(f"SYN.{a}.{e}" for a in ("smoothed", "forecast", "anomalies") for e in ("json", "csv"))
    with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
        _write_all(first, runs)
        _write_all(second, runs)
        assert sorted(os.listdir(first)) == names
        for name in names:
            with open(os.path.join(first, name), "rb") as a, open(os.path.join(second, name), "rb") as b:
                assert a.read() == b.read()

        restored = inclino.read_forecast(os.path.join(first, "SYN.forecast.json"))
        assert restored.n_steps == bundle.n_steps == 5
        for a, b in zip(restored.states, bundle.states):
            assert a.mean.tolist() == b.mean.tolist()
            assert a.grid_index == b.grid_index
            np.testing.assert_allclose(a.covariance, b.covariance, rtol=1e-12, atol=0.0)
        assert restored.sigma_alpha == bundle.sigma_alpha

        smoothed = inclino.read_smoothed(os.path.join(first, "SYN.smoothed.json"))
        assert smoothed.means.tolist() == smooth.result.means.tolist()
        np.testing.assert_allclose(smoothed.Q, smooth.result.Q, rtol=1e-12, atol=0.0)

        with open(os.path.join(first, "SYN.forecast.csv")) as f:
            assert len(f.read().splitlines()) == 1 + 5 * 2

        with open(os.path.join(first, "SYN.anomalies.json")) as f:
            document = json.load(f)
        assert document["artifact"] == "anomalies"
        assert document["n_gated"] == len(detect.decisions)
        assert len(document["decisions"]) == document["n_rejected"] == detect.n_rejected

        with pytest.raises(SchemaError):
            inclino.read_forecast(os.path.join(first, "SYN.smoothed.json"))


def test_smooth_series_covers_the_grid() -> None:
    series = _test_objects.synthetic(5, steps=80)
    series = inclino.inject_outlier(series, 10, 0, "A", 50 * 0.1)
    config = inclino.RunConfig(window=40, em_max_iters=10, error_mode="ignore")
    run = pipeline.smooth_series(series, config)
    assert run.grid.n_steps == run.result.grid.n_steps == run.result.means.shape[0] == 80
    assert run.em.grid.n_steps == 40
    np.testing.assert_array_equal(run.result.Q, run.em.Q)
    np.testing.assert_array_equal(run.model.Q, run.em.Q)
    assert len(run.result.decisions) == 80
    assert [d.grid_index for d in run.result.decisions if not d.accepted] == [10]

    ungated = pipeline.smooth_series(series, config, gated=False)
    assert ungated.result.decisions == ()
    assert ungated.result.means.shape[0] == 80

    detect = pipeline.detect_series(series, config.updated(gating_enabled=False))
    assert [d.grid_index for d in detect.decisions if not d.accepted] == [10]


def test_write_empty_decisions() -> None:
    with tempfile.TemporaryDirectory() as tmpdir:
        inclino.write_artifacts(tmpdir, "BH1", _test_objects.LAYOUT_1, decisions=[])
        with open(os.path.join(tmpdir, "BH1.anomalies.json")) as f:
            document = json.load(f)
        assert document["decisions"] == []
        assert document["n_rejected"] == 0
        assert inclino.read_gate_decisions(os.path.join(tmpdir, "BH1.anomalies.json")) == []


def test_validation_report_artifact() -> None:
    report = inclino.ValidationReport(
        borehole_id="BH1",
        metric_value=0.25,
        horizon=2.0,
        n_forecast_steps=2,
        n_depths=1,
        per_step_kl=np.array([[0.125], [0.375]]),
        anomalies_removed=1,
        reference_anomalies_removed=2,
    )
    with tempfile.TemporaryDirectory() as tmpdir:
        inclino.write_artifacts(tmpdir, "BH1", _test_objects.LAYOUT_1, report=report)
        restored = inclino.read_validation_report(os.path.join(tmpdir, "BH1.validation.json"))
    assert restored.per_step_kl.tolist() == [[0.125], [0.375]]
    assert restored.anomalies_removed == 1
    assert restored.reference_anomalies_removed == 2
    assert np.isnan(restored.coverage_2sd)
