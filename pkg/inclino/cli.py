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
import functools
import logging
import os
import pathlib
import typing as T

import click

from .config import RunConfig, load_run_config
from .tools.exceptions import InclinoError, ParseError

# NOTE: the numerical modules are imported inside functions so `--help` stays fast

LOG = logging.getLogger(__name__)

COMMANDS = ("smooth", "forecast", "detect", "validate")


def report_errors(command: T.Callable[..., None]) -> T.Callable[..., None]:
    """Map library errors to ``inclino: error[<code>]: <message>`` and their exit code."""

    @functools.wraps(command)
    def wrapper(*args: T.Any, **kwargs: T.Any) -> None:
        try:
            command(*args, **kwargs)
        except InclinoError as err:
            click.echo(f"inclino: error[{err.exit_code}]: {err}", err=True)
            raise SystemExit(err.exit_code)

    return wrapper


def config_options(command: T.Callable[..., None]) -> T.Callable[..., None]:
    """Options shared by the subcommands, each overriding the matching RunConfig field."""
    options = [
        click.option(
            "--config",
            "-c",
            "config_json",
            default=None,
            help="Run configuration, as a JSON format string or the path to a JSON file.",
        ),
        click.option(
            "--dt",
            "dt_override",
            default=None,
            help="Grid spacing, days or a quantity such as '12 hours'.",
        ),
        click.option(
            "--gamma", type=float, default=None, help="Gate threshold on the Mahalanobis distance."
        ),
        click.option(
            "--gating/--no-gating",
            "gating_enabled",
            default=None,
            help="Gate observations while smoothing.",
        ),
        click.option(
            "--per-depth-gating/--joint-gating",
            "per_depth_gating",
            default=None,
            help="Gate each depth separately.",
        ),
        click.option(
            "--window", type=int, default=None, help="Number of trailing grid steps used by EM."
        ),
        click.option(
            "--em-tol",
            type=float,
            default=None,
            help="Relative tolerance on Q for EM convergence.",
        ),
        click.option(
            "--em-max-iters", type=int, default=None, help="Maximum number of EM iterations."
        ),
        click.option(
            "--horizon",
            "forecast_horizon",
            default=None,
            help="Forecast horizon, days or a quantity.",
        ),
        click.option(
            "--forecast-dt", default=None, help="Forecast timestep, defaults to the grid spacing."
        ),
        click.option(
            "--eps-m",
            default=None,
            help="Instrument error, mm/m or a quantity such as '100 mm/km'.",
        ),
        click.option(
            "--kl-marginal",
            type=click.Choice(["full4d", "position2d"]),
            default=None,
            help="Marginal of the state compared by the KL metric.",
        ),
        click.option(
            "--error-mode",
            type=click.Choice(["ignore", "warn", "raise"]),
            default=None,
            help="Handling of recoverable data problems.",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def output_options(command: T.Callable[..., None]) -> T.Callable[..., None]:
    options = [
        click.option("--outdir", "-o", default=".", help="Directory for the artifact files."),
        click.option(
            "--jobs",
            "-j",
            type=int,
            default=None,
            help="Boreholes processed in parallel, defaults to the CPU count.",
        ),
        click.option(
            "--netcdf",
            is_flag=True,
            help="Also write the smoothed and forecast trajectories as netCDF.",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _load_config(config_json: T.Optional[str], **overrides: T.Any) -> RunConfig:
    config = load_run_config(config_json, **overrides)
    LOG.debug(f"run configuration: {config}")
    return config


def _read_inputs(inpaths: T.Sequence[str], config: RunConfig, outdir: str) -> T.List[T.Any]:
    from . import dataset_io

    if len(inpaths) == 0:
        raise click.UsageError("no input files given")
    series = {}
    for inpath in inpaths:
        parsed = dataset_io.parse_readings_csv(inpath, config)
        if parsed.rejections:
            import pandas as pd

            frame = pd.DataFrame([vars(rejection) for rejection in parsed.rejections])
            stem = pathlib.Path(inpath).stem
            dataset_io.write_summary_csv(frame, pathlib.Path(outdir) / f"{stem}.rejections.csv")
        for borehole_id, borehole in parsed.series.items():
            if borehole_id in series:
                raise ParseError(f"borehole {borehole_id!r} appears in more than one input file")
            series[borehole_id] = borehole
    return [series[borehole_id] for borehole_id in sorted(series)]


def process_borehole(
    command: str, series: T.Any, config: RunConfig, outdir: str, netcdf: bool = False
) -> T.Dict[str, T.Any]:
    """Run ``command`` for one borehole and write its artifacts, returning a summary row."""
    from . import dataset_io, pipeline, validation

    LOG.info(f"{command} {series.borehole_id}")
    layout = series.layout()
    summary: T.Dict[str, T.Any] = {
        "borehole_id": series.borehole_id,
        "instrument_kind": series.instrument_kind.value,
    }
    if command == "smooth":
        run = pipeline.smooth_series(series, config)
        grid = run.grid
        dataset_io.write_artifacts(
            outdir,
            series.borehole_id,
            layout,
            series.epoch,
            smoothed=run.result,
            decisions=run.result.decisions,
            decisions_grid=(grid.origin_time, grid.dt),
            netcdf=netcdf,
        )
        summary.update(
            em_iterations=run.result.em_iterations, log_likelihood=run.result.log_likelihood
        )
    elif command == "forecast":
        run = pipeline.smooth_series(series, config)
        bundle = pipeline.forecast_run(run, config)
        dataset_io.write_artifacts(
            outdir, series.borehole_id, layout, series.epoch, forecast=bundle, netcdf=netcdf
        )
        summary.update(sigma_alpha=bundle.sigma_alpha, n_forecast_steps=bundle.n_steps)
    elif command == "detect":
        detect = pipeline.detect_series(series, config)
        grid = detect.smooth.grid
        dataset_io.write_artifacts(
            outdir,
            series.borehole_id,
            layout,
            series.epoch,
            decisions=detect.decisions,
            decisions_grid=(grid.origin_time, grid.dt),
        )
        summary.update(n_gated=len(detect.decisions), n_rejected=detect.n_rejected)
    elif command == "validate":
        report = validation.validate_forecast(series, config)
        dataset_io.write_artifacts(outdir, series.borehole_id, layout, series.epoch, report=report)
        summary.update(
            metric_value=report.metric_value,
            anomalies_removed=report.anomalies_removed,
            reference_anomalies_removed=report.reference_anomalies_removed,
            horizon=report.horizon,
            n_forecast_steps=report.n_forecast_steps,
        )
    else:
        raise ValueError(f"unknown command {command!r}")
    return summary


def _run_command(
    command: str,
    inpaths: T.Sequence[str],
    config: RunConfig,
    outdir: str,
    jobs: T.Optional[int],
    netcdf: bool,
) -> T.List[T.Dict[str, T.Any]]:
    all_series = _read_inputs(inpaths, config, outdir)
    jobs = jobs or os.cpu_count() or 1
    if jobs < 1:
        raise click.BadParameter("--jobs must be >= 1")
    worker = functools.partial(process_borehole, command, config=config, outdir=outdir, netcdf=netcdf)
    if jobs == 1 or len(all_series) == 1:
        return [worker(series) for series in all_series]

    import concurrent.futures

    with concurrent.futures.ProcessPoolExecutor(max_workers=min(jobs, len(all_series))) as executor:
        # map keeps the input order, so summaries are deterministic
        return list(executor.map(worker, all_series))


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="WARNING",
    help="Logging level of the diagnostics written to stderr.",
)
def inclino_cli(log_level: str) -> None:
    logging.basicConfig(level=log_level.upper(), format="%(levelname)s %(name)s: %(message)s")


@inclino_cli.command("smooth")
@click.argument("inpaths", nargs=-1)
@config_options
@output_options
@report_errors
def smooth(
    inpaths: T.List[str],
    config_json: T.Optional[str],
    outdir: str,
    jobs: T.Optional[int],
    netcdf: bool,
    **overrides: T.Any,
) -> None:
    """Learn Q and smooth each borehole; writes smoothed states and gate decisions."""
    config = _load_config(config_json, **overrides)
    _run_command("smooth", inpaths, config, outdir, jobs, netcdf)


@inclino_cli.command("forecast")
@click.argument("inpaths", nargs=-1)
@config_options
@output_options
@report_errors
def forecast(
    inpaths: T.List[str],
    config_json: T.Optional[str],
    outdir: str,
    jobs: T.Optional[int],
    netcdf: bool,
    **overrides: T.Any,
) -> None:
    """Forecast each borehole over the horizon, with 1 and 2 sigma bands."""
    config = _load_config(config_json, **overrides)
    _run_command("forecast", inpaths, config, outdir, jobs, netcdf)


@inclino_cli.command("detect")
@click.argument("inpaths", nargs=-1)
@config_options
@output_options
@report_errors
def detect(
    inpaths: T.List[str],
    config_json: T.Optional[str],
    outdir: str,
    jobs: T.Optional[int],
    netcdf: bool,
    **overrides: T.Any,
) -> None:
    """Gate every reading of each borehole and write the anomaly report."""
    config = _load_config(config_json, **overrides)
    _run_command("detect", inpaths, config, outdir, jobs, netcdf)


@inclino_cli.command("validate")
@click.argument("inpaths", nargs=-1)
@config_options
@output_options
@report_errors
def validate(
    inpaths: T.List[str],
    config_json: T.Optional[str],
    outdir: str,
    jobs: T.Optional[int],
    netcdf: bool,
    **overrides: T.Any,
) -> None:
    """Hold out the final horizon of each borehole and score the forecast against it."""
    import pandas as pd

    from . import dataset_io

    config = _load_config(config_json, **overrides)
    summaries = _run_command("validate", inpaths, config, outdir, jobs, netcdf)
    columns = [
        "borehole_id",
        "instrument_kind",
        "metric_value",
        "anomalies_removed",
        "reference_anomalies_removed",
        "horizon",
        "n_forecast_steps",
    ]
    dataset_io.write_summary_csv(
        pd.DataFrame(summaries, columns=columns), pathlib.Path(outdir) / "validation_summary.csv"
    )


@inclino_cli.command("simulate")
@click.option(
    "--config", "-c", "config_json", default=None, help="Run configuration, JSON string or path."
)
@click.option(
    "--output",
    "-o",
    default=None,
    help="Readings CSV to write, defaults to <borehole id>.readings.csv.",
)
@click.option("--seed", type=int, default=None, help="Random seed.")
@click.option("--steps", "sim_steps", type=int, default=None, help="Number of readings.")
@click.option("--n-depths", "sim_n_depths", type=int, default=None, help="Number of depths.")
@click.option(
    "--depth-step", "sim_depth_step", type=float, default=None, help="Depth increment (m)."
)
@click.option(
    "--sigma",
    "sim_sigma",
    type=float,
    default=None,
    help="White noise acceleration intensity.",
)
@click.option("--sim-dt", "sim_dt", default=None, help="Reading interval, days or a quantity.")
@click.option(
    "--velocity", "sim_velocity", type=float, default=None, help="Initial velocity (mm/day)."
)
@click.option(
    "--borehole-id", "sim_borehole_id", default=None, help="Borehole id of the readings."
)
@click.option("--eps-m", default=None, help="Instrument error, mm/m or a quantity.")
@click.option(
    "--outlier-step", type=int, default=None, help="Reading index to corrupt with an outlier."
)
@click.option(
    "--outlier-magnitude",
    type=float,
    default=None,
    help="Outlier size in noise standard deviations.",
)
@report_errors
def simulate(
    config_json: T.Optional[str],
    output: T.Optional[str],
    outlier_step: T.Optional[int],
    outlier_magnitude: T.Optional[float],
    **overrides: T.Any,
) -> None:
    """Write a synthetic readings CSV drawn from the kinematic model."""
    from . import dataset_io, validation
    from .core_model import StateLayout

    config = _load_config(config_json, **overrides)
    layout = StateLayout(tuple(config.sim_depth_step * (i + 1) for i in range(config.sim_n_depths)))
    series = validation.generate_synthetic(
        layout,
        config.sim_sigma,
        config.eps_m,
        config.sim_dt,
        config.sim_steps,
        config.seed,
        initial_velocity=config.sim_velocity,
        borehole_id=config.sim_borehole_id,
    )
    if outlier_step is not None:
        depth = layout.depth_values[-1]
        magnitude = (50.0 if outlier_magnitude is None else outlier_magnitude) * config.eps_m * depth
        series = validation.inject_outlier(series, outlier_step, layout.n_depths - 1, "A", magnitude)
    if output is None:
        output = f"{config.sim_borehole_id}.readings.csv"
    dataset_io.write_readings_csv(series, output)


if __name__ == "__main__":
    inclino_cli()
