import logging

import _test_objects
import numpy as np
import pytest

import inclino
from inclino import forecast
from inclino.tools.exceptions import (
    DegenerateTemplateError,
    InvalidParameterError,
    NumericalError,
)

LAYOUT_1 = _test_objects.LAYOUT_1
LAYOUT_2 = _test_objects.LAYOUT_2


def _fit(sigma_alpha: float) -> forecast.KinematicNoiseFit:
    return forecast.KinematicNoiseFit(sigma_alpha=sigma_alpha, residual_norm=0.0, dt_fit=1.0)


def test_build_lambda() -> None:
    expected = [[1 / 3, 0, 1 / 2, 0], [0, 1 / 3, 0, 1 / 2], [1 / 2, 0, 1, 0], [0, 1 / 2, 0, 1]]
    np.testing.assert_allclose(inclino.build_lambda(LAYOUT_1, 1.0), expected, rtol=1e-15)

    template = inclino.build_lambda(LAYOUT_1, 2.0)
    np.testing.assert_allclose(np.diag(template), [8 / 3, 8 / 3, 2.0, 2.0], rtol=1e-15)
    assert template[0, 2] == template[1, 3] == 2.0

    for dt in (0.1, 1.0, 7.0):
        template = inclino.build_lambda(LAYOUT_2, dt)
        assert np.array_equal(template, template.T)
        assert np.linalg.eigvalsh(template).min() > 0

    with pytest.raises(InvalidParameterError):
        inclino.build_lambda(LAYOUT_1, 0.0)


def test_kinematic_template_blocks() -> None:
    dt = 0.75
    eye = np.eye(LAYOUT_2.dim_obs)
    expected = np.block([[dt**3 / 3 * eye, dt**2 / 2 * eye], [dt**2 / 2 * eye, dt * eye]])
    template = forecast.kinematic_template(LAYOUT_2.dim_obs, dt)
    assert template.shape == (8, 8)
    np.testing.assert_allclose(template, expected, rtol=1e-15, atol=0.0)
    np.testing.assert_array_equal(inclino.build_lambda(LAYOUT_2, dt), template)


@pytest.mark.parametrize("delta", [0.1, 0.5, 1.0, 3.0])
def test_lambda_semigroup(delta: float) -> None:
    F = inclino.build_transition(LAYOUT_2, delta)
    template = inclino.build_lambda(LAYOUT_2, delta)
    np.testing.assert_allclose(
        F @ template @ F.T + template, inclino.build_lambda(LAYOUT_2, 2 * delta), rtol=1e-10, atol=1e-12
    )


def test_fit_sigma_alpha() -> None:
    template = inclino.build_lambda(LAYOUT_1, 1.5)
    fit = inclino.fit_sigma_alpha(2.0 * template, template)
    assert fit.sigma_alpha == pytest.approx(2.0)
    assert fit.residual_norm == pytest.approx(0.0, abs=1e-12)

    # E orthogonal to the template in the Frobenius inner product
    rng = np.random.default_rng(1)
    E = rng.normal(size=(4, 4))
    E = E + E.T
    E = E - np.sum(E * template) / np.sum(template * template) * template
    fit = inclino.fit_sigma_alpha(template + E, template)
    assert fit.sigma_alpha == pytest.approx(1.0, rel=1e-10)
    assert fit.residual_norm == pytest.approx(np.linalg.norm(E), rel=1e-10)
    residual = template + E - fit.sigma_alpha * template
    assert abs(np.sum(residual * template)) < 1e-10

    assert inclino.fit_sigma_alpha(np.zeros((4, 4)), template).sigma_alpha == 0.0

    with pytest.raises(DegenerateTemplateError):
        inclino.fit_sigma_alpha(template, np.zeros((4, 4)))
    with pytest.raises(InvalidParameterError):
        inclino.fit_sigma_alpha(template, np.eye(3))


def test_fit_sigma_alpha_clamps(caplog: pytest.LogCaptureFixture) -> None:
    template = inclino.build_lambda(LAYOUT_1, 1.0)
    with caplog.at_level(logging.WARNING):
        fit = inclino.fit_sigma_alpha(-template, template)
    assert fit.sigma_alpha == 0.0 and fit.clamped
    assert "Clamped to 0" in caplog.text
    with pytest.raises(NumericalError):
        inclino.fit_sigma_alpha(-template, template, error_mode="raise")


def test_forecast_noise_free_kinematics() -> None:
    model = inclino.build_model(LAYOUT_2, 1.0, 0.1)
    start = inclino.StateGaussian(np.array([1.0, 2.0, 3.0, 4.0, 0.1, -0.2, 0.3, 0.0]), np.eye(8) * 0.01)
    for dt in (1.0, 0.5, 0.25, 2.5):
        bundle = inclino.forecast_states(start, LAYOUT_2, _fit(0.0), dt, 10.0, model)
        assert bundle.n_steps == int(np.ceil(10.0 / dt))
        np.testing.assert_allclose(
            bundle.states[-1].mean[:4], start.mean[:4] + start.mean[4:] * bundle.n_steps * dt, rtol=1e-12
        )


def test_forecast_one_step() -> None:
    model = inclino.build_model(LAYOUT_1, 2.0, 0.1)
    rng = np.random.default_rng(7)
    a = rng.normal(size=(4, 4))
    start = inclino.StateGaussian(rng.normal(size=4), a @ a.T, grid_index=9)
    bundle = inclino.forecast_states(start, LAYOUT_1, _fit(0.7), 2.0, 2.0, model, start_time=18.0)

    F = inclino.build_transition(LAYOUT_1, 2.0)
    expected = F @ start.covariance @ F.T + 0.7 * inclino.build_lambda(LAYOUT_1, 2.0)
    np.testing.assert_allclose(bundle.states[0].covariance, expected, rtol=1e-12)
    assert bundle.states[0].grid_index == 10
    assert bundle.times().tolist() == [20.0]
    np.testing.assert_allclose(bundle.predictive_means[0], (F @ start.mean)[:2])
    np.testing.assert_allclose(bundle.predictive_covs[0], expected[:2, :2] + model.R, rtol=1e-12)


def test_forecast_dt_consistency() -> None:
    model = inclino.build_model(LAYOUT_2, 1.0, 0.1)
    rng = np.random.default_rng(2)
    a = rng.normal(size=(8, 8))
    start = inclino.StateGaussian(rng.normal(size=8), a @ a.T)
    final = [
        inclino.forecast_states(start, LAYOUT_2, _fit(0.3), dt, 8.0, model).states[-1]
        for dt in (1.0, 0.5, 0.25)
    ]
    for state in final[1:]:
        np.testing.assert_allclose(state.mean, final[0].mean, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(state.covariance, final[0].covariance, rtol=1e-10, atol=1e-10)


def test_forecast_bundle_invariants() -> None:
    model = inclino.build_model(LAYOUT_2, 1.0, 0.1)
    start = inclino.StateGaussian(np.zeros(8), np.eye(8) * 0.1)
    bundle = inclino.forecast_states(start, LAYOUT_2, _fit(0.05), 1.0, 30.0, model)
    traces = [np.trace(s.covariance) for s in bundle.states]
    assert np.all(np.diff(traces) >= 0)
    assert np.all(np.diff(bundle.predictive_sd(), axis=0) >= 0)

    # means never depend on sigma_alpha
    other = inclino.forecast_states(start, LAYOUT_2, _fit(5.0), 1.0, 30.0, model)
    for a, b in zip(bundle.states, other.states):
        assert a.mean.tobytes() == b.mean.tobytes()

    lower, upper = bundle.bands(2.0)
    np.testing.assert_allclose(upper - lower, 4.0 * bundle.predictive_sd())
    ds = bundle.to_dataset(LAYOUT_2)
    assert dict(ds.sizes) == {"step": 30, "depth": 2, "axis": 2}


def test_forecast_zero_sigma_bands() -> None:
    # with sigma_alpha = 0 the band only grows by propagating the start covariance
    model = _test_objects.model_with(LAYOUT_1, 1.0, R=1.0)
    start = inclino.StateGaussian(np.zeros(4), np.diag([0.0, 0.0, 1.0, 1.0]))
    bundle = inclino.forecast_states(start, LAYOUT_1, _fit(0.0), 1.0, 2.0, model)
    np.testing.assert_allclose(bundle.predictive_sd(), [[np.sqrt(2.0)] * 2, [np.sqrt(5.0)] * 2])


def test_forecast_errors() -> None:
    model = inclino.build_model(LAYOUT_1, 1.0, 0.1)
    start = inclino.StateGaussian(np.zeros(4), np.eye(4))
    with pytest.raises(InvalidParameterError):
        inclino.forecast_states(start, LAYOUT_1, _fit(0.1), 0.0, 10.0, model)
    with pytest.raises(InvalidParameterError):
        inclino.forecast_states(start, LAYOUT_1, _fit(0.1), 2.0, 1.0, model)
    with pytest.raises(InvalidParameterError):
        inclino.forecast_states(start, LAYOUT_1, _fit(float("nan")), 1.0, 10.0, model)


def test_n_forecast_steps_and_coverage() -> None:
    assert forecast.n_forecast_steps(30.0, 1.0) == 30
    assert forecast.n_forecast_steps(30.0, 0.7) == 43
    assert forecast.n_forecast_steps(0.3, 0.1) == 3

    model = _test_objects.model_with(LAYOUT_1, 1.0, R=1.0)
    start = inclino.StateGaussian(np.zeros(4), np.zeros((4, 4)))
    bundle = inclino.forecast_states(start, LAYOUT_1, _fit(0.0), 1.0, 3.0, model)
    observations = np.array([[0.5, -0.5], [3.0, np.nan], [0.0, 1.9]])
    assert inclino.band_coverage(bundle, observations, k=2.0) == (4, 5)
