from pathlib import Path

import click
import yaml

from ensemble_service.exceptions import ConfigValidationError
from experiments import runner
from experiments.recipes import figure_recipes, get_recipe
from experiments.serializers import FitRowSerializer, ProfileRowSerializer
from experiments.utils import (
    apply_overrides,
    fit_linear,
    fit_power_law,
    gather_runs,
    load_config,
    paired_columns,
    parse_overrides,
    read_table,
    truncation_profile,
    write_table,
)
from filtering.recurrence import FilterRun


def _float_list(value: str):
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError:
        raise click.BadParameter(f"Expected comma-separated numbers, got {value!r}") from None


def _echo_rows(fields, rows):
    click.echo("\t".join(fields))
    for row in rows:
        click.echo("\t".join(row[name] for name in fields))


@click.group()
def cli():
    """Diagonal-ensemble filtering experiments."""


@cli.command(context_settings={"ignore_unknown_options": True, "allow_extra_args": True})
@click.argument("config")
@click.option("--workers", type=int, default=None, help="Worker processes (default: ENSEMBLE_WORKERS).")
@click.pass_context
def run(ctx, config, workers):
    """Run the experiment in CONFIG (a YAML file or a recipe name); extra --key=value flags override it."""
    path = Path(config)
    try:
        data = load_config(path) if path.exists() else get_recipe(config)
    except KeyError as exc:
        raise click.ClickException(f"{config} is neither a file nor a recipe ({exc.args[0]})")
    try:
        data = apply_overrides(data, parse_overrides(ctx.args))
        report = runner.run(data, workers=workers)
    except ConfigValidationError as exc:
        raise click.ClickException(f"Invalid configuration: {exc}")

    for summary in report.failed:
        click.echo(f"FAILED {summary['name']}: {summary['error']}", err=True)
    click.echo(str(report.output_dir / "manifest.yaml"))
    if not report.ok:
        ctx.exit(1)


@cli.command()
@click.argument("table", type=click.Path(exists=True, dir_okay=False))
@click.option("--x", "x_column", required=True)
@click.option("--y", "y_column", required=True)
@click.option("--range", "fit_range", default=None, help="Abscissa range a,b.")
@click.option("--where", multiple=True, help="Row filter column=value; may repeat.")
@click.option("--linear", is_flag=True, help="Fit y = a x + b instead of a power law.")
def fit(table, x_column, y_column, fit_range, where, linear):
    """Power-law (or linear) fit of column Y against column X."""
    bounds = None
    if fit_range:
        bounds = _float_list(fit_range)
        if len(bounds) != 2:
            raise click.BadParameter("--range needs two numbers a,b")
    filters = {}
    for item in where:
        if "=" not in item:
            raise click.BadParameter(f"--where expects column=value, got {item!r}")
        key, value = item.split("=", 1)
        filters[key] = value

    try:
        xs, ys = paired_columns(read_table(table), x_column, y_column, filters)
        fitter = fit_linear if linear else fit_power_law
        result = fitter(xs, ys, range=tuple(bounds) if bounds else None)
    except (KeyError, ValueError) as exc:
        raise click.ClickException(str(exc))

    serializer = FitRowSerializer()
    row = serializer.to_row(
        {
            "x": x_column,
            "y": y_column,
            "slope": result.slope,
            "intercept": result.intercept,
            "r_squared": result.r_squared,
            "range_min": result.range[0],
            "range_max": result.range[1],
            "points": result.points,
            "law": "linear" if linear else "power",
        }
    )
    _echo_rows(serializer.get_fields(), [row])


@cli.command()
@click.argument("experiment_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--table", default="exact.tsv", show_default=True, help="Per-run table to read.")
@click.option(
    "--columns", default="N,state,osee_diagonal", show_default=True, help="Comma-separated columns."
)
def gather(experiment_dir, table, columns):
    """One row per run of EXPERIMENT_DIR: the first row of TABLE cut to COLUMNS."""
    names = [name.strip() for name in columns.split(",") if name.strip()]
    try:
        rows = gather_runs(experiment_dir, table, names)
    except (KeyError, OSError) as exc:
        raise click.ClickException(str(exc))
    write_table(Path(experiment_dir) / "gathered.tsv", names, rows)
    _echo_rows(names, rows)


@cli.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--tols", default="1e-2,1e-3,1e-4,1e-5", help="Comma-separated tolerances.")
def profile(run_dir, tols):
    """Bond dimension needed for each stored recurrence vector at each tolerance."""
    state_path = Path(run_dir) / "state.npz"
    if not state_path.exists():
        raise click.ClickException(f"{run_dir} has no state.npz")
    stored = FilterRun.load(state_path).stored
    if not stored:
        raise click.ClickException(f"{run_dir} stores no recurrence vectors (set filter.stored_degrees)")

    serializer = ProfileRowSerializer()
    rows = [serializer.to_row(row) for row in truncation_profile(stored, _float_list(tols))]
    write_table(Path(run_dir) / "profile.tsv", serializer.get_fields(), rows)
    _echo_rows(serializer.get_fields(), rows)


@cli.command()
@click.option("--list", "list_all", is_flag=True, help="List preset names.")
@click.option("--show", "show", default=None, help="Print one preset as YAML.")
def recipes(list_all, show):
    """Figure presets."""
    if show:
        try:
            click.echo(yaml.safe_dump(get_recipe(show), sort_keys=False), nl=False)
        except KeyError as exc:
            raise click.ClickException(exc.args[0])
        return
    for name, recipe in figure_recipes().items():
        click.echo(f"{name}\t{recipe['description']}")
