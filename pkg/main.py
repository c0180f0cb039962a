import click
import json
import pathlib
import pandas as pd
import sys
import time

proj_root = pathlib.Path(__file__).parent
sys.path.append(str(proj_root))

from utils.general import (
    LOG_LEVELS,
    UsageError,
    VerificationFailure,
    basic_file_logger,
    close_file_logger,
    format_logged_exception,
    project_logger,
    summarize_log
)
from utils.dataset_files import FORMATS, read_csv, read_point_set, write_pair
from utils.project import SCHEMA_PLAN_COLUMNS, VERIFY_PLAN_COLUMNS, RunConfig, load_plan, write_suite_checks_dict
from process.approximation import approximate_hausdorff, benchmark, complexity_probe
from process.ann_index import BACKEND_ALIASES, build_index, save_index
from process.datagen import FAMILIES, GenSpec, generate_pair, well_separated_pair
from process.error_analysis import D_POLICIES, error_growth_sweep, error_report
from process.geometry import Transform
from process.oracle import hausdorff_exact
from process.output import (
    approx_record,
    check_record,
    dumps_record,
    error_report_record,
    format_fields,
    oracle_record,
    summary_record,
    write_records
)
from process.verification import DEFAULT_DIMS, DEFAULT_SIZES, check_summary_table, run_suite, summarize_reports

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_VERIFICATION = 3

CROSSOVER_SIZE = 5000

SUITES = ('bounds', 'invariance', 'stability', 'all')

def _int_list(ctx: click.Context, param: click.Parameter, value: str | None) -> tuple[int, ...] | None:
    if value is None:
        return None
    try:
        return tuple(int(v) for v in value.split(',') if v.strip())
    except ValueError:
        raise click.BadParameter(f'expected comma-separated integers, got "{value}"')

def _tolerance_overrides(ctx: click.Context, param: click.Parameter, value: tuple[str, ...]) -> dict[str, float]:
    overrides = {}
    for item in value:
        check, _, tolerance = item.partition('=')
        try:
            overrides[check.strip()] = float(tolerance)
        except ValueError:
            raise click.BadParameter(f'expected CHECK=VALUE, got "{item}"')
    return overrides

def run_options(mode: str = 'cached', backend: str = 'exact'):
    '''
    Options shared by every command that runs the approximation; collected into a RunConfig by _run_config().
    '''
    options = [
        click.option('--mode', type=click.Choice(['cached', 'dual']), default=mode, show_default=True),
        click.option('--backend', type=click.Choice(sorted(BACKEND_ALIASES)), default=backend, show_default=True),
        click.option('--eps', type=float, default=None, help='Backend epsilon (kdtree, graph).'),
        click.option('--leaf-size', type=int, default=None, help='kd-tree leaf size.'),
        click.option('--max-degree', type=int, default=None, help='Graph out-degree.'),
        click.option('--uncovered', type=click.Choice(['fallback', 'infinity']), default='fallback', show_default=True),
        click.option('--swap', type=click.Choice(['smaller', 'second']), default='smaller', show_default=True),
        click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True),
        click.option('--workers', type=click.IntRange(1), default=1, show_default=True),
    ]

    def decorator(f):
        for option in reversed(options):
            f = option(f)
        return f

    return decorator

def _run_config(mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers, tolerances=None) -> RunConfig:
    params = {}
    if leaf_size is not None:
        params['leaf_size'] = leaf_size
    if max_degree is not None:
        params['max_degree'] = max_degree
    return RunConfig(
        mode=mode,
        backend=backend,
        eps=eps,
        params=params,
        uncovered_policy=uncovered,
        swap_policy=swap,
        seed=seed,
        workers=workers,
        tolerances=tolerances or {}
    )

def dataset_options(f):
    f = click.option('--entity-b', default=None, help='jsonl entity holding set B.')(f)
    f = click.option('--entity-a', default=None, help='jsonl entity holding set A.')(f)
    f = click.option('--format', 'file_format', type=click.Choice(FORMATS), default=None, help='Dataset format; inferred from the suffix by default.')(f)
    f = click.argument('set_b', type=click.Path(dir_okay=False))(f)
    f = click.argument('set_a', type=click.Path(dir_okay=False))(f)
    return f

def _read_pair(set_a, set_b, file_format, entity_a, entity_b):
    return read_point_set(set_a, file_format, entity_a), read_point_set(set_b, file_format, entity_b)

def _emit(records: list[dict], out: str | None) -> None:
    for record in records:
        click.echo(dumps_record(record))
    if out is not None:
        with open(out, 'w') as file:
            write_records(records, file)

def _emit_table(table: pd.DataFrame, out: str | None) -> None:
    table = format_fields(table, load_plan('schema_plan', SCHEMA_PLAN_COLUMNS))
    click.echo(table.to_string(index=False))
    if out is not None:
        table.to_csv(out, index=False)

@click.group()
@click.option('--log-file', type=click.Path(dir_okay=False), default='main_info.log', show_default=True)
@click.option('--log-level', type=click.Choice(list(LOG_LEVELS), case_sensitive=False), default='INFO', show_default=True)
@click.pass_context
def cli(ctx: click.Context, log_file: str, log_level: str):
    '''
    Exact and approximate Hausdorff distance between point sets.
    '''
    # a previous invocation in this process may have opened another file
    close_file_logger()
    basic_file_logger(log_file, log_level)
    ctx.obj = {'log_file': log_file}

@cli.command()
@dataset_options
@run_options()
@click.option('--oracle', is_flag=True, help='Compute the exact distance instead.')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Also write the record to this file.')
def compute(set_a, set_b, file_format, entity_a, entity_b, mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers, oracle, out):
    '''
    Hausdorff distance between SET_A and SET_B, one JSON record on stdout.
    '''
    a, b = _read_pair(set_a, set_b, file_format, entity_a, entity_b)
    run = _run_config(mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers)
    cfg = run.approx_config()

    t0 = time.perf_counter()
    if oracle:
        result = hausdorff_exact(a, b)
        record = oracle_record(result, len(a), len(b), a.dim, time.perf_counter() - t0)
    else:
        result = approximate_hausdorff(a, b, cfg, run.seed)
        record = approx_record(result, cfg, run.seed, len(a), len(b), a.dim, time.perf_counter() - t0)

    project_logger().info(json.dumps({'function': 'compute', 'oracle': oracle, 'value': result.value, 'seconds': round(time.perf_counter() - t0, 4)}))
    _emit([record], out)

@cli.command('oracle')
@dataset_options
@click.option('--out', type=click.Path(dir_okay=False), default=None)
def oracle_command(set_a, set_b, file_format, entity_a, entity_b, out):
    '''
    Exact Hausdorff distance with witnesses.
    '''
    a, b = _read_pair(set_a, set_b, file_format, entity_a, entity_b)
    t0 = time.perf_counter()
    result = hausdorff_exact(a, b)
    _emit([oracle_record(result, len(a), len(b), a.dim, time.perf_counter() - t0)], out)

@cli.command()
@dataset_options
@run_options(mode='dual', backend='kdtree')
@click.option('--out', type=click.Path(dir_okay=False), default=None)
def report(set_a, set_b, file_format, entity_a, entity_b, mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers, out):
    '''
    Measured error of the approximation next to its predicted bounds.
    '''
    a, b = _read_pair(set_a, set_b, file_format, entity_a, entity_b)
    run = _run_config(mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers)
    _emit([error_report_record(error_report(a, b, run.approx_config(), run.seed))], out)

@cli.command()
@click.option('--suite', type=click.Choice(SUITES), default='all', show_default=True)
@click.option('--trials', type=click.IntRange(1), default=10, show_default=True)
@click.option('--sizes', callback=_int_list, default=','.join(map(str, DEFAULT_SIZES)), show_default=True, help='Upper bounds for m and n, cycled over trials.')
@click.option('--dims', callback=_int_list, default=','.join(map(str, DEFAULT_DIMS)), show_default=True)
@click.option('--tolerance', 'tolerances', multiple=True, callback=_tolerance_overrides, help='CHECK=VALUE override, repeatable.')
@click.option('--rotation', type=click.Path(exists=True, dir_okay=False), default=None, help='csv matrix used by the rotation check instead of random rotations.')
@run_options()
@click.option('--out', type=click.Path(dir_okay=False), default=None)
def verify(suite, trials, sizes, dims, tolerances, rotation, mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers, out):
    '''
    Runs a verification suite; one record per check, then a summary record. A per-check pass table goes to
    stderr. Exits 3 on hard failures.
    '''
    run = _run_config(mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers, tolerances)
    cfg = run.approx_config()
    checks = write_suite_checks_dict(load_plan('verify_plan', VERIFY_PLAN_COLUMNS), suite)

    fixed_rotation = None
    if rotation is not None:
        fixed_rotation = Transform.rotation(read_csv(rotation))
        dims = (fixed_rotation.dim,)

    reports = run_suite(checks, trials, cfg, sizes, dims, run.seed, run.tolerances, run.workers, fixed_rotation)
    summary = summarize_reports(reports)
    # per-check table on stderr; stdout stays one JSON record per line
    click.echo(check_summary_table(reports).to_string(index=False), err=True)
    _emit([check_record(r) for r in reports] + [summary_record(suite, summary)], out)

    if summary['hard_failures']:
        raise VerificationFailure(f'{summary["hard_failures"]} hard assertion(s) failed in suite "{suite}".')

@cli.command()
@click.option('--sizes', callback=_int_list, default='200,1000', show_default=True, help='m = n = size per row.')
@click.option('--d', 'dim', type=click.IntRange(1), default=8, show_default=True)
@click.option('--crossover', is_flag=True, help=f'Add the m = n = {CROSSOVER_SIZE} row.')
@click.option('--oracle-limit', type=click.IntRange(0), default=25_000_000, show_default=True, help='Skip the exact computation above m * n.')
@run_options(backend='kdtree')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='csv copy of the table.')
def bench(sizes, dim, crossover, oracle_limit, mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers, out):
    '''
    Wall time of the approximation against the exact computation.
    '''
    run = _run_config(mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers)
    if crossover and CROSSOVER_SIZE not in sizes:
        sizes = tuple(sizes) + (CROSSOVER_SIZE,)
    _emit_table(benchmark(sizes, dim, run.approx_config(), run.seed, oracle_limit), out)

@cli.command()
@click.option('--m', 'm_list', callback=_int_list, default='1000', show_default=True)
@click.option('--n', 'n_list', callback=_int_list, default='1000,2000,4000,8000', show_default=True)
@click.option('--d', 'dim', type=click.IntRange(1), default=8, show_default=True)
@run_options(backend='kdtree')
@click.option('--out', type=click.Path(dir_okay=False), default=None)
def probe(m_list, n_list, dim, mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers, out):
    '''
    Query and visit counters over a grid of set sizes.
    '''
    run = _run_config(mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers)
    _emit_table(complexity_probe(m_list, n_list, dim, run.approx_config(), run.seed), out)

@cli.command()
@click.option('--sizes', callback=_int_list, default='256,512,1024,2048,4096', show_default=True, help='Total sizes m + n.')
@click.option('--d-policy', type=click.Choice(D_POLICIES), default='fixed', show_default=True)
@click.option('--d', 'dim', type=click.IntRange(1), default=8, show_default=True)
@click.option('--trials', type=click.IntRange(1), default=1, show_default=True)
@click.option('--family', type=click.Choice(FAMILIES), default='uniform-cube', show_default=True)
@click.option('--measure/--no-measure', default=True, show_default=True)
@run_options(mode='dual', backend='kdtree')
@click.option('--out', type=click.Path(dir_okay=False), default=None)
def sweep(sizes, d_policy, dim, trials, family, measure, mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers, out):
    '''
    Refined error bound against total size, with optional measured errors.
    '''
    run = _run_config(mode, backend, eps, leaf_size, max_degree, uncovered, swap, seed, workers)
    table = error_growth_sweep(sizes, d_policy, dim, trials, run.seed, run.approx_config(), family, measure)
    _emit_table(table, out)

@cli.command()
@click.option('--family', type=click.Choice(FAMILIES), default='uniform-cube', show_default=True)
@click.option('--m', type=click.IntRange(1), required=True)
@click.option('--n', type=click.IntRange(1), required=True)
@click.option('--d', 'dim', type=click.IntRange(1), required=True)
@click.option('--k', type=click.IntRange(1), default=None, help='Cluster count.')
@click.option('--spread', type=float, default=0.1, show_default=True)
@click.option('--gap', type=float, default=None, help='Write a well-separated pair with this gap instead.')
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True)
@click.option('--format', 'file_format', type=click.Choice(FORMATS), default='jsonl', show_default=True)
@click.option('--out-dir', type=click.Path(file_okay=False), default='.', show_default=True)
@click.option('--stem', default='pair', show_default=True)
def generate(family, m, n, dim, k, spread, gap, seed, file_format, out_dir, stem):
    '''
    Writes a generated pair of point sets.
    '''
    if gap is not None:
        a, b = well_separated_pair(dim, gap, m, n, seed)
    else:
        a, b = generate_pair(GenSpec(family, m, n, dim, seed, k, spread))
    for path in write_pair(a, b, out_dir, file_format, stem):
        click.echo(str(path))

@cli.command()
@click.argument('dataset', type=click.Path(dir_okay=False))
@click.option('--format', 'file_format', type=click.Choice(FORMATS), default=None)
@click.option('--entity', default=None)
@click.option('--backend', type=click.Choice(sorted(BACKEND_ALIASES)), default='kdtree', show_default=True)
@click.option('--eps', type=float, default=None)
@click.option('--leaf-size', type=int, default=None)
@click.option('--max-degree', type=int, default=None)
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='Index file to write.')
def index(dataset, file_format, entity, backend, eps, leaf_size, max_degree, seed, out):
    '''
    Builds a nearest-neighbor index over DATASET and saves it.
    '''
    run = _run_config('cached', backend, eps, leaf_size, max_degree, 'fallback', 'smaller', seed, 1)
    cfg = run.approx_config()
    base = read_point_set(dataset, file_format, entity)

    t0 = time.perf_counter()
    built = build_index(base, cfg.backend, cfg.params, run.seed)
    save_index(built, out)

    record = {
        'record': 'index',
        'backend': built.backend,
        'params': dict(built.build_params),
        'n': len(base),
        'd': base.dim,
        'seed': built.seed,
        'path': str(out),
        'wall_seconds': time.perf_counter() - t0,
    }
    _emit([record], None)

@cli.command()
@click.option('--level', type=click.Choice(list(LOG_LEVELS), case_sensitive=False), default='WARNING', show_default=True)
@click.option('--hours', type=float, default=None, help='Only records from the last HOURS.')
@click.pass_context
def logs(ctx, level, hours):
    '''
    Log records at or above LEVEL, newest first.
    '''
    log_df = summarize_log(ctx.obj['log_file'], level, hours)
    if log_df.empty:
        click.echo('No matching log records.')
    else:
        click.echo(log_df.to_string(index=False))

def main(argv: list[str] | None = None) -> int:
    '''
    Runs the command line and maps outcomes to exit codes: 0 ok, 1 internal failure, 2 usage error,
    3 verification failure.
    '''
    # the whole command is wrapped in a general try-except, lower levels raise UsageError for bad input
    try:
        result = cli.main(args=argv, prog_name='hausdorff', standalone_mode=False)
        # --help and similar exit early with an int code
        return result if isinstance(result, int) else EXIT_OK

    except click.ClickException as e:
        e.show()
        return EXIT_USAGE

    except click.Abort:
        click.echo('Aborted.', err=True)
        return EXIT_INTERNAL

    except UsageError as e:
        project_logger().error(json.dumps({'usage error': str(e)}))
        click.echo(f'Error: {e}', err=True)
        return EXIT_USAGE

    except VerificationFailure as e:
        project_logger().error(json.dumps({'verification failure': str(e)}))
        click.echo(f'Verification failed: {e}', err=True)
        return EXIT_VERIFICATION

    except Exception as e:
        exc_type, exc_val, exc_tb = type(e), e, e.__traceback__
        project_logger().critical(format_logged_exception(exc_type, exc_val, exc_tb))
        click.echo(f'Internal error: {e!r}', err=True)
        return EXIT_INTERNAL

    finally:
        close_file_logger()

if __name__ == "__main__":
    sys.exit(main())
