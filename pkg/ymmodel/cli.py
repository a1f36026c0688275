#!/usr/bin/env python3

import sys
import typer
import orjson
import logging
from pathlib import Path
from enum import Enum
from typing import Annotated
from fractions import Fraction
from rich.table import Table
from rich.console import Console

from ymmodel import defaults
from ymmodel.config import load_config
from ymmodel.tensoralg import dim_space
from ymmodel.model import RenormConstants
from ymmodel.helpers import SampleRunner, is_cancellation, write_json
from ymmodel.errors import ConfigError, InvariantViolation, ModelError, NumericalAbort
from ymmodel.renorm import LEVELS, BphzFitter, bphz_index
from ymmodel.indexcalc import MultiIndex, grade, enumerate_populated, membership, parse_multi_index, population
from ymmodel import verify as suites
from ymmodel.langevin import LangevinIntegrator, run_coupled_comparison


# typer theme
typer.rich_utils.STYLE_OPTION = "bold color(129)"
typer.rich_utils.STYLE_NEGATIVE_OPTION = "bold red"
typer.rich_utils.STYLE_NEGATIVE_SWITCH = "bold red"
typer.rich_utils.STYLE_SWITCH = "bold color(201)"
typer.rich_utils.STYLE_USAGE = "bright_white"
typer.rich_utils.STYLE_METAVAR = "color(198)"
typer.rich_utils.STYLE_OPTION_ENVVAR = "color(165)"
typer.rich_utils.STYLE_COMMANDS_TABLE_FIRST_COLUMN = "bold color(198)"


ascii_art = r""" [1;38;5;201m __  ____  __ [0m          _      _
 [1;38;5;165m \ \/ /  \/  |[0m_ __  ___  __| |___ | |
 [1;38;5;129m  \  /| |\/| |[0m '  \/ _ \/ _` / -_)| |
 [1;38;5;93m  /_/ |_|  |_|[0m_|_|_\___/\__,_\___||_|

"""


stdout = Console()
stderr = Console(stderr=True)
log = logging.getLogger(__name__)


app = typer.Typer()
global_options = {
    "silent": False,
    "debug": False,
    "color": False,
}


class Kind(str, Enum):
    plain = "plain"
    modified = "modified"


class Source(str, Enum):
    noise = "noise"
    smooth = "smooth"


class Suite(str, Enum):
    algebra = "algebra"
    translation = "translation"
    symmetry = "symmetry"
    stochastic = "stochastic"
    weight = "weight"
    pointwise = "pointwise"


population_sets = {
    "M": "M",
    "M'": "Mprime",
    "Mprime": "Mprime",
    "M>=0": "Mgeq0",
    "Mgeq0": "Mgeq0",
    "Mpp": "Mpp",
}


def fraction_type(value):
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise typer.BadParameter(f"expected a number or a fraction p/q, got '{value}'")


def beta_type(value):
    try:
        return parse_multi_index(value)
    except ValueError as e:
        raise typer.BadParameter(str(e))


def set_type(value):
    try:
        return population_sets[value]
    except KeyError:
        raise typer.BadParameter(f"unknown index set '{value}' (choose from {', '.join(population_sets)})")


# shared options
ConfigOption = Annotated[Path, typer.Option("-c", "--config", help="Configuration file", metavar="CONFIG")]
SeedOption = Annotated[int, typer.Option("-s", "--seed", help="Base noise seed")]
SamplesOption = Annotated[int, typer.Option("-n", "--samples", help="Monte-Carlo sample count")]
RhoOption = Annotated[float, typer.Option("--rho", help="Mollification scale ρ")]
GridOption = Annotated[int, typer.Option("-g", "--grid", help="Spatial lattice points per axis", metavar="NX")]
OutOption = Annotated[Path, typer.Option("-o", "--out", help="Output directory", metavar="OUTPUT_DIR")]
WorkersOption = Annotated[
    int,
    typer.Option("-w", "--workers", help="Worker processes (0 = all cores)", rich_help_panel="Performance"),
]
JsonOption = Annotated[bool, typer.Option("-j", "--json", help="Output JSON")]
ConstantsOption = Annotated[
    Path, typer.Option("--constants", help="Renormalization constants (JSON written by 'bphz')", metavar="FILE")
]


@app.callback()
def _global_options(
    silent: bool = False,
    debug: bool = False,
    color: bool = True,
):
    global_options["silent"] = silent
    global_options["debug"] = debug
    global_options["color"] = color


def _start(config, **overrides):
    # print the banner
    if not global_options["silent"]:
        sys.stderr.write(ascii_art)

    stdout.no_color = not global_options["color"]

    # enable debugging if requested
    if global_options["debug"]:
        root_logger = logging.getLogger("ymmodel")
        root_logger.setLevel(logging.DEBUG)

    run_config = load_config(config).with_overrides(**overrides)
    log.debug(f"configuration: {run_config.json()}")
    return run_config


def _emit(data, json, table=None):
    if json or table is None:
        output = orjson.dumps(data, option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY).decode()
        stdout.print(output, markup=False, highlight=False, soft_wrap=True)
    else:
        stdout.print(table)


def _write(out, filename, data):
    if out is not None:
        path = write_json(Path(out) / filename, data)
        log.info(f"wrote {path}")


def _read_constants(path):
    if path is None:
        return None
    try:
        data = orjson.loads(Path(path).read_bytes())
        return RenormConstants.from_json(data)
    except (OSError, orjson.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"cannot read renormalization constants from {path}: {e}", key="constants")


def _table(title, columns, rows):
    table = Table(title=title, header_style="bold color(129)")
    for column in columns:
        table.add_column(column)
    for row in rows:
        table.add_row(*(str(_) for _ in row))
    return table


@app.command(help="List the populated multi-indices below a grade bound")
def indices(
    bound: Annotated[
        Fraction, typer.Option("-b", "--bound", help="Grade bound (number or p/q)", parser=fraction_type)
    ] = str(defaults.grade_bound),
    kind: Annotated[Kind, typer.Option("-k", "--kind", help="Grade used for the bound")] = Kind.plain,
    index_set: Annotated[
        str, typer.Option("--set", help="Index set: M', M, M>=0 or Mpp", parser=set_type, metavar="SET")
    ] = "Mprime",
    config: ConfigOption = None,
    json: JsonOption = False,
):
    run_config = _start(config)
    params = run_config.params()
    dim_v = run_config.lie_data().dim_v
    rows = []
    table_rows = []
    for beta in enumerate_populated(bound, kind.value, params, index_set):
        value = grade(beta, kind.value, params)
        table_rows.append((beta, value, f"{value.to_float(params):.6f}", population(beta), dim_space(beta, dim_v)))
        rows.append(
            {
                "beta": str(beta),
                "grade": value.json(),
                "grade_value": value.to_float(params),
                "population": population(beta),
                "dim": dim_space(beta, dim_v),
                "membership": membership(beta).json(),
            }
        )
    data = {"bound": str(bound), "kind": kind.value, "set": index_set, "count": len(rows), "indices": rows}
    table = _table(
        f"{len(rows)} multi-indices with |β| < {bound} in {index_set}",
        ["β", "|β|", "value", "[β]", "dim W_β"],
        table_rows,
    )
    _emit(data, json, table)


@app.command(help="Build the canonical lift of one noise sample and dump its fields")
def lift(
    config: ConfigOption = None,
    seed: SeedOption = None,
    rho: RhoOption = None,
    grid: GridOption = None,
    out: OutOption = None,
    constants: ConstantsOption = None,
    json: JsonOption = False,
):
    run_config = _start(config, seed=seed, rho=rho, nx=grid, out=str(out) if out else None)
    instance = run_config.instance(_read_constants(constants))
    rows = []
    for beta in instance.indices:
        field = instance.lift.lift(beta)
        rows.append({"beta": str(beta), "dim": dim_space(beta, instance.dim_v), "max_abs": field.max_abs()})
    manifest = instance.manifest()
    if run_config.out is not None:
        manifest["manifest"] = str(instance.dump(run_config.out))
    manifest["summary"] = rows
    table = _table(
        f"canonical lift (seed {instance.seed}, ρ = {instance.rho})",
        ["β", "dim W_β", "max |𝚷_β|"],
        [(r["beta"], r["dim"], f"{r['max_abs']:.4e}") for r in rows],
    )
    _emit(manifest, json, table)


@app.command(help="Fix the renormalization constants c_1..c_4 by the BPHZ condition")
def bphz(
    config: ConfigOption = None,
    seed: SeedOption = None,
    samples: SamplesOption = None,
    rho: RhoOption = None,
    grid: GridOption = None,
    out: OutOption = None,
    workers: WorkersOption = None,
    json: JsonOption = False,
    abelian: Annotated[bool, typer.Option("--abelian", help="Use the abelian algebra (all constants vanish)")] = False,
    lambda_bar: Annotated[float, typer.Option("-l", "--lambda-bar", help="Test-function scale λ̄")] = None,
    closure: Annotated[bool, typer.Option("--closure", help="Re-estimate every level with the fixed constants")] = False,
):
    run_config = _start(
        config,
        seed=seed,
        samples=samples,
        rho=rho,
        nx=grid,
        workers=workers,
        lambda_bar=lambda_bar,
        lie="abelian" if abelian else None,
        out=str(out) if out else None,
    )
    fitter = BphzFitter(
        run_config.setup(),
        lambda_bar=run_config.lambda_bar,
        nsamples=run_config.samples,
        seed=run_config.seed,
        antithetic=run_config.antithetic,
        schedule=run_config.schedule or None,
        runner=SampleRunner(run_config.pool_size),
    )
    result = fitter.fit()
    data = result.json()
    data["constants"] = result.constants.json()
    if closure:
        estimates = fitter.closure(result.constants)
        data["closure"] = [estimate.json() for estimate in estimates]
        data["closure_within"] = result.closure_within(estimates)
    _write(run_config.out, "constants.json", data)
    table = _table(
        f"BPHZ constants (ρ = {result.rho}, λ̄ = {result.lambda_bar}, {result.nsamples} samples)",
        ["k", "β", "c_k", "std. error"],
        [(k, bphz_index(k), f"{c:.6e}", f"{se:.2e}") for k, c, se in zip(LEVELS, result.constants.c, result.std_errors)],
    )
    _emit(data, json, table)


def _run_suite(name, run_config, constants, runner):
    setup = run_config.setup()
    if name == Suite.algebra:
        instance = run_config.instance(constants)
        return suites.algebraic_invariant_suite(
            instance, run_config.base_points, run_config.tolerance, run_config.route_tolerance
        )
    if name == Suite.translation:
        return suites.translation_suite(run_config.instance(constants), (0, 1, 1, 0), run_config.base_points)
    if name == Suite.symmetry:
        targets = [MultiIndex.g(1)] + [bphz_index(k) for k in LEVELS]
        return suites.symmetry_suite(setup, [run_config.seed, run_config.seed + 1], targets, constants, run_config.tolerance)
    if name == Suite.stochastic:
        return suites.stochastic_stats_suite(
            setup, nsamples=max(run_config.samples, 32), seed=run_config.seed, runner=runner
        )
    if name == Suite.weight:
        return suites.weight_suite()
    if name == Suite.pointwise:
        return suites.pointwise_sup_stats(
            setup, MultiIndex.g(1), run_config.base_points, nsamples=run_config.samples, seed=run_config.seed, runner=runner
        )
    raise ConfigError(f"unknown suite '{name}'", key="suites")


@app.command(help="Run verification suites and report every assertion")
def verify(
    suite: Annotated[list[Suite], typer.Option("--suite", help="Suite(s) to run (multiple supported)")] = None,
    config: ConfigOption = None,
    seed: SeedOption = None,
    samples: SamplesOption = None,
    rho: RhoOption = None,
    grid: GridOption = None,
    out: OutOption = None,
    workers: WorkersOption = None,
    constants: ConstantsOption = None,
    json: JsonOption = False,
):
    run_config = _start(config, seed=seed, samples=samples, rho=rho, nx=grid, workers=workers, out=str(out) if out else None)
    names = [Suite(_) for _ in (suite or run_config.suites)]
    renorm_constants = _read_constants(constants)
    runner = SampleRunner(run_config.pool_size)
    reports = [_run_suite(name, run_config, renorm_constants, runner) for name in names]
    data = suites.suite_report_json(reports)
    _write(run_config.out, "report.json", data)
    table = _table(
        "verification",
        ["suite", "result", "assertions", "failures", "flags"],
        [
            (r.name, "pass" if r.passed else "FAIL", len(r.assertions), len(r.failures()), len(r.flags))
            for r in reports
        ],
    )
    _emit(data, json, table)
    for report in reports:
        report.raise_for_failure()


@app.command(help="Fit the scaling exponent of λ ↦ ‖Π_{0β}(φ^λ)‖_{L_p}")
def scaling(
    beta: Annotated[
        MultiIndex, typer.Option("-b", "--beta", help="Multi-index, e.g. 'g * (0,0,0,0)'", parser=beta_type)
    ] = "g",
    p: Annotated[float, typer.Option("-p", help="Moment order of the L_p norm")] = None,
    lambda_bar: Annotated[float, typer.Option("-l", "--lambda-bar", help="Largest test-function scale")] = None,
    config: ConfigOption = None,
    seed: SeedOption = None,
    samples: SamplesOption = None,
    rho: RhoOption = None,
    grid: GridOption = None,
    out: OutOption = None,
    workers: WorkersOption = None,
    constants: ConstantsOption = None,
    json: JsonOption = False,
):
    run_config = _start(
        config,
        seed=seed,
        samples=samples,
        rho=rho,
        nx=grid,
        workers=workers,
        p=p,
        lambda_bar=lambda_bar,
        out=str(out) if out else None,
    )
    report = suites.scaling_exponent_fit(
        beta,
        run_config.setup(),
        p=run_config.p,
        lambdas=suites.scaling_window(run_config.rho, run_config.lambda_bar, run_config.lambdas),
        nsamples=run_config.samples,
        seed=run_config.seed,
        lambda_bar=run_config.lambda_bar,
        constants=_read_constants(constants),
        runner=SampleRunner(run_config.pool_size),
    )
    if run_config.out is not None:
        Path(run_config.out).mkdir(parents=True, exist_ok=True)
        report.write_csv(Path(run_config.out) / "scaling.csv")
        _write(run_config.out, "scaling.json", report.json())
    table = _table(
        f"scaling of {beta} (slope {report.slope:.4f} ± {report.slope_se:.2g}, grade {report.target:.4f})",
        ["λ", f"L_{report.p:g} norm"],
        [(f"{lam:.4g}", f"{norm:.4e}") for lam, norm in zip(report.lambdas, report.norms)],
    )
    _emit(report.json(), json, table)


@app.command(help="Compare the model at ρ, ρ/2, ρ/4, ... driven by the same white noise")
def cauchy(
    beta: Annotated[MultiIndex, typer.Option("-b", "--beta", help="Multi-index, e.g. 'g'", parser=beta_type)] = "g",
    halvings: Annotated[int, typer.Option("--halvings", help="Number of ρ halvings")] = None,
    source: Annotated[Source, typer.Option("--source", help="Drive with white noise or a smooth field")] = Source.noise,
    scale: Annotated[float, typer.Option("--scale", help="Test-function scale λ")] = 1.0,
    config: ConfigOption = None,
    seed: SeedOption = None,
    samples: SamplesOption = None,
    rho: RhoOption = None,
    grid: GridOption = None,
    out: OutOption = None,
    workers: WorkersOption = None,
    json: JsonOption = False,
):
    run_config = _start(
        config, seed=seed, samples=samples, rho=rho, nx=grid, workers=workers, halvings=halvings, out=str(out) if out else None
    )
    report = suites.cauchy_in_rho(
        beta,
        run_config.setup(),
        rho=run_config.rho,
        halvings=run_config.halvings,
        nsamples=run_config.samples,
        seed=run_config.seed,
        p=run_config.p,
        scale=scale,
        source=source.value,
        runner=SampleRunner(run_config.pool_size),
    )
    if run_config.out is not None:
        Path(run_config.out).mkdir(parents=True, exist_ok=True)
        report.write_csv(Path(run_config.out) / "cauchy.csv")
        _write(run_config.out, "cauchy.json", report.json())
    ratios = ("",) + tuple(f"{r:.3f}" for r in report.ratios)
    table = _table(
        f"Cauchy differences of {beta} at λ = {report.scale}",
        ["ρ", "ρ/2", "difference", "ratio"],
        [
            (f"{a:.4g}", f"{b:.4g}", f"{d:.4e}", r)
            for a, b, d, r in zip(report.rhos[:-1], report.rhos[1:], report.differences, ratios)
        ],
    )
    _emit(report.json(), json, table)


@app.command(help="Integrate the renormalized Langevin dynamics on a spatial grid")
def langevin(
    dt: Annotated[float, typer.Option("--dt", help="Time step")] = None,
    horizon: Annotated[float, typer.Option("--horizon", help="Final time")] = None,
    coupling: Annotated[float, typer.Option("--coupling", help="Coupling g")] = None,
    rho_prime: Annotated[
        float, typer.Option("--rho-prime", help="Second mollification scale for a coupled comparison")
    ] = None,
    snapshot_every: Annotated[int, typer.Option("--snapshot-every", help="Keep every n-th state (0 = none)")] = 0,
    no_noise: Annotated[bool, typer.Option("--no-noise", help="Run the deterministic flow")] = False,
    config: ConfigOption = None,
    seed: SeedOption = None,
    rho: RhoOption = None,
    grid: GridOption = None,
    out: OutOption = None,
    constants: ConstantsOption = None,
    json: JsonOption = False,
):
    run_config = _start(
        config,
        seed=seed,
        rho=rho,
        langevin_nx=grid,
        langevin_dt=dt,
        langevin_horizon=horizon,
        coupling=coupling,
        out=str(out) if out else None,
    )
    langevin_config = run_config.langevin_config(
        _read_constants(constants), noise=not no_noise, snapshot_every=snapshot_every
    )
    if rho_prime is not None:
        data = run_coupled_comparison(langevin_config, langevin_config.rho, rho_prime)
        table = _table(
            f"coupled runs at ρ = {data['rho']} and ρ′ = {data['rho_prime']}",
            ["counterterm", "sup_t ‖A^ρ − A^ρ′‖₂"],
            [("with", f"{data['with_counterterm']:.4e}"), ("without", f"{data['without_counterterm']:.4e}")],
        )
        _write(run_config.out, "coupled.json", data)
        _emit(data, json, table)
        return

    trajectory = LangevinIntegrator(langevin_config).run()
    data = {
        "config": langevin_config.json(),
        "steps": langevin_config.steps,
        "final_time": trajectory.times[-1],
        "final_norm": trajectory.norms[-1],
        "max_norm": max(trajectory.norms),
    }
    if run_config.out is not None:
        out_dir = Path(run_config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        trajectory.write_csv(out_dir / "trajectory.csv")
        data["snapshots"] = trajectory.dump_snapshots(out_dir / "snapshots")
        _write(out_dir, "langevin.json", data)
    stride = max(1, len(trajectory.times) // 10)
    table = _table(
        f"Langevin run ({langevin_config.steps} steps of {langevin_config.dt})",
        ["t", "‖A‖₂"],
        [(f"{t:.4g}", f"{n:.4e}") for t, n in list(zip(trajectory.times, trajectory.norms))[::stride]],
    )
    _emit(data, json, table)


def main():
    try:
        app()
    except BaseException as e:
        if isinstance(e, SystemExit):
            raise
        if is_cancellation(e):
            sys.exit(1)
        elif isinstance(e, ConfigError):
            stderr.print(f"[bold red]config error:[/bold red] {e}", highlight=False)
            sys.exit(2)
        elif isinstance(e, NumericalAbort):
            stderr.print(f"[bold red]numerical abort:[/bold red] {e}", highlight=False)
            sys.exit(3)
        elif isinstance(e, InvariantViolation):
            stderr.print(f"[bold red]invariant violated:[/bold red] {e}", highlight=False)
            sys.exit(1)
        elif isinstance(e, ModelError):
            stderr.print(f"[bold red]error:[/bold red] {e}", highlight=False)
            sys.exit(1)
        else:
            stderr.print_exception(show_locals=True)
            sys.exit(1)


if __name__ == "__main__":
    main()
