import typing as T

import numpy as np
import scipy.stats

import inclino

LAYOUT_1 = inclino.StateLayout((1.0,))
LAYOUT_2 = inclino.StateLayout((1.0, 2.0))

CSV_HEADER = "borehole_id,timestamp,depth_m,a_mm,b_mm\n"

WELL_FORMED_CSV = CSV_HEADER + (
    "BH1,2021-03-01T00:00:00Z,1.5,0.25,-0.5\n"
    "BH1,2021-03-02T00:00:00Z,1.5,0.3,-0.45\n"
    "BH1,2021-03-03T00:00:00Z,1.5,0.35,-0.4\n"
)


def kinematic_states(layout: inclino.StateLayout, dt: float, steps: int, velocity: float = 0.1) -> np.ndarray:
    """Noise free trajectory from zero displacement at constant ``velocity``."""
    F = inclino.build_transition(layout, dt)
    states = np.zeros((steps, layout.dim_state))
    states[0, layout.dim_obs :] = velocity
    for k in range(1, steps):
        states[k] = F @ states[k - 1]
    return states


def grid_of(values: np.ndarray, dt: float = 1.0) -> inclino.GriddedObservations:
    """Grid with one reading per slot (NaN rows become gaps)."""
    values = np.asarray(values, dtype=float)
    filled = np.any(np.isfinite(values), axis=1)
    times = dt * np.arange(values.shape[0])
    return inclino.remap(times[filled], values[filled], dt, origin_time=0.0)


def model_with(
    layout: inclino.StateLayout, dt: float, R: float, Q: T.Union[np.ndarray, None] = None
) -> inclino.ModelMatrices:
    return inclino.ModelMatrices(
        F=inclino.build_transition(layout, dt),
        H=inclino.build_observation(layout),
        R=R * np.eye(layout.dim_obs),
        Q=np.zeros((layout.dim_state, layout.dim_state)) if Q is None else Q,
        dt=dt,
    )


def synthetic(
    seed: int,
    sigma: float = 1e-3,
    eps_m: float = 0.1,
    steps: int = 120,
    layout: inclino.StateLayout = LAYOUT_1,
    dt: float = 1.0,
    velocity: float = 0.05,
    borehole_id: str = "SYN",
) -> inclino.BoreholeSeries:
    return inclino.generate_synthetic(
        layout, sigma, eps_m, dt, steps, seed, initial_velocity=velocity, borehole_id=borehole_id
    )


def joint_posterior(
    model: inclino.ModelMatrices,
    initial: inclino.StateGaussian,
    observations: np.ndarray,
) -> T.Tuple[np.ndarray, np.ndarray, float]:
    """
    Posterior and log-likelihood of the stacked state ``[x_0, ..., x_{T-1}]`` by direct Gaussian
    conditioning; NaN rows are unobserved.
    """
    n_steps = observations.shape[0]
    d = model.F.shape[0]
    # x_k = F^k x_0 + sum_j F^{k-j} w_j, build the stacked mean and covariance
    mean = np.zeros(n_steps * d)
    cov = np.zeros((n_steps * d, n_steps * d))
    powers = [np.eye(d)]
    for _ in range(n_steps):
        powers.append(model.F @ powers[-1])
    for k in range(n_steps):
        mean[k * d : (k + 1) * d] = powers[k] @ initial.mean
        for m in range(n_steps):
            block = powers[k] @ initial.covariance @ powers[m].T
            for j in range(1, min(k, m) + 1):
                block = block + powers[k - j] @ model.Q @ powers[m - j].T
            cov[k * d : (k + 1) * d, m * d : (m + 1) * d] = block

    rows = []
    values = []
    for k in range(n_steps):
        for i in range(model.H.shape[0]):
            if np.isfinite(observations[k, i]):
                row = np.zeros(n_steps * d)
                row[k * d : (k + 1) * d] = model.H[i]
                rows.append(row)
                values.append(observations[k, i])
    H = np.array(rows)
    observed = np.isfinite(observations)
    R = np.diag([model.R[i, i] for k in range(n_steps) for i in range(model.H.shape[0]) if observed[k, i]])
    S = H @ cov @ H.T + R
    gain = np.linalg.solve(S, H @ cov).T
    post_mean = mean + gain @ (np.array(values) - H @ mean)
    post_cov = cov - gain @ H @ cov
    log_likelihood = scipy.stats.multivariate_normal(H @ mean, S).logpdf(np.array(values))
    return post_mean.reshape(n_steps, d), post_cov, float(log_likelihood)
