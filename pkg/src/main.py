import sys
import json
from pathlib import Path
from typing import Any, Callable, Optional
from argparse import ArgumentParser, Namespace

import numpy as np

from logger import LOGGER, set_verbosity
from errors import FilteringError, DegenerateModel, UnsupportedZeroA, PsiOverflow, MalformedInput, GridTooCoarse, \
    StepOutOfRange, EmptyObservations
from util import Method, ExitCode, parse_config, print_logo, error
from model import ModelParams, identity_residuals
from simulate import simulate
from reader import read_params, parse_params, read_trajectory, write_trajectory, write_estimates, write_matrix
from dobrovidov import GridSpec, total_log_likelihood
from normalcorr import build_covariances, invert_cov, invert_cov_innovations, lemma_checks
from oracle import dense_invert, max_abs_diff
from analysis import run_method, compare_methods, covariance_check
from report import Report, InversionReport, LemmaReport

DEFAULT_CONFIG_PATH = Path('./optfilter.ini')
DEFAULT_COMPARE_METHODS = 'kalman,dobrovidov,dobrovidov-direct'
DOBROVIDOV_METHODS = (Method.DOBROVIDOV, Method.DOBROVIDOV_DIRECT, Method.DOBROVIDOV_SCORE)
LEMMA_TOLERANCE = 1e-11


def add_common_arguments(parser: ArgumentParser) -> None:
    parser.add_argument('--debug', action='store_true', help='Optional: show debug messages')
    parser.add_argument('--quiet', action='store_true', help='Optional: only show warnings and errors')
    parser.add_argument('--config', type=Path, default=None,
                        help=f'Path to the optfilter config file (default {DEFAULT_CONFIG_PATH})')
    parser.add_argument('--nprocesses', dest='nr_processes', type=int, default=None,
                        help='Number of processes used for Monte-Carlo runs (default from config: CPU cores)')


def add_params_arguments(parser: ArgumentParser) -> None:
    parser.add_argument('--params', type=Path, help='Path to a params JSON file {"a", "b", "A", "B"}')
    parser.add_argument('--a', type=float, dest='a', help='State transition coefficient, |a| < 1')
    parser.add_argument('--b', type=float, dest='b', help='State noise scale, b > 0')
    parser.add_argument('--A', type=float, dest='A', help='Observation gain, A != 0')
    parser.add_argument('--B', type=float, dest='B', help='Observation noise scale, B > 0')


def add_output_argument(parser: ArgumentParser) -> None:
    parser.add_argument('--output', type=Path, help='Optional: directory in which to save the JSON report')


def parse_arguments(argv: Optional[list[str]] = None) -> Namespace:
    parser = ArgumentParser(prog='optfilter', allow_abbrev=False,
                            description='Optimal filtering for the scalar linear-Gaussian system: Kalman, predictive '
                                        'density and normal-correlation estimators, cross-checked.')
    subparsers = parser.add_subparsers(dest='command', required=True)

    sim = subparsers.add_parser('simulate', allow_abbrev=False, help='Simulate a trajectory')
    add_params_arguments(sim)
    sim.add_argument('--n', type=int, required=True, help='Number of steps')
    sim.add_argument('--seed', type=int, required=True, help='Seed of the generator')
    sim.add_argument('--out', type=Path, required=True, help='Trajectory CSV to write (t,s,x)')
    sim.set_defaults(handler=cmd_simulate)

    flt = subparsers.add_parser('filter', allow_abbrev=False, help='Estimate the hidden state from observations')
    add_params_arguments(flt)
    flt.add_argument('--method', default='kalman',
                     help='kalman | dobrovidov | dobrovidov-direct | dobrovidov-score | normalcorr | grid')
    flt.add_argument('--traj', type=Path, required=True, help='Trajectory or observations CSV (t,s,x or t,x)')
    flt.add_argument('--out', type=Path, required=True, help='Estimates CSV to write (t,estimate,aux)')
    flt.add_argument('--loglik', action='store_true', help='Optional: print the total log-likelihood')
    flt.add_argument('--grid-points', type=int, help='Optional: grid size of the grid oracle')
    flt.add_argument('--half-width', type=float, help='Optional: grid half width in standard deviations')
    flt.add_argument('--raw-kalman', action='store_true', help='Optional: textbook form of the Kalman update')
    flt.add_argument('--psi-path', action='store_true', help='Optional: psi coefficients for normalcorr')
    flt.set_defaults(handler=cmd_filter)

    cmp = subparsers.add_parser('compare', allow_abbrev=False, help='Run several estimators and compare them')
    add_params_arguments(cmp)
    add_output_argument(cmp)
    cmp.add_argument('--methods', default=DEFAULT_COMPARE_METHODS, help='Comma-separated methods (at least two)')
    cmp.add_argument('--tol', type=float, help='Optional: max abs divergence per pair (default from config)')
    cmp.add_argument('--traj', type=Path, help='Trajectory or observations CSV')
    cmp.add_argument('--simulate', action='store_true', help='Simulate the observations instead of reading them')
    cmp.add_argument('--n', type=int, default=200, help='Steps to simulate with --simulate')
    cmp.add_argument('--seed', type=int, default=0, help='Seed for --simulate')
    cmp.add_argument('--per-step', action='store_true', help='Optional: include every estimate in the report')
    cmp.add_argument('--method-params', action='append', default=[], metavar='METHOD=FILE',
                     help='Optional: params file used for one method only (repeatable)')
    cmp.add_argument('--grid-points', type=int, help='Optional: grid size of the grid oracle')
    cmp.add_argument('--half-width', type=float, help='Optional: grid half width in standard deviations')
    cmp.add_argument('--raw-kalman', action='store_true', help='Optional: textbook form of the Kalman update')
    cmp.add_argument('--psi-path', action='store_true', help='Optional: psi coefficients for normalcorr')
    cmp.set_defaults(handler=cmd_compare)

    inv = subparsers.add_parser('invert', allow_abbrev=False, help='Structured inverse of the observation covariance')
    add_params_arguments(inv)
    add_output_argument(inv)
    inv.add_argument('--n', type=int, required=True, help='Dimension')
    inv.add_argument('--oracle', action='store_true', help='Optional: compare with dense Gauss-Jordan elimination')
    inv.add_argument('--psi-path', action='store_true', help='Optional: fail instead of falling back when psi '
                                                             'overflows')
    inv.add_argument('--format', choices=['json', 'csv'], default='json', help='Output format (default json)')
    inv.add_argument('--out', type=Path, help='Optional: CSV file for --format csv (default stdout)')
    inv.set_defaults(handler=cmd_invert)

    lem = subparsers.add_parser('lemmas', allow_abbrev=False, help='Residuals of the psi and coefficient identities')
    add_params_arguments(lem)
    add_output_argument(lem)
    lem.add_argument('--N', type=int, default=25, dest='N', help='Largest dimension (default 25)')
    lem.add_argument('--tol', type=float, default=LEMMA_TOLERANCE, help=f'Max relative residual '
                                                                        f'(default {LEMMA_TOLERANCE})')
    lem.set_defaults(handler=cmd_lemmas)

    mc = subparsers.add_parser('montecarlo', allow_abbrev=False, help='Monte-Carlo check of the covariances')
    add_params_arguments(mc)
    add_output_argument(mc)
    mc.add_argument('--n', type=int, default=4, help='Trajectory length (default 4)')
    mc.add_argument('--trials', type=int, help='Optional: number of trajectories (default from config)')
    mc.add_argument('--seed', type=int, default=0, help='Master seed (default 0)')
    mc.add_argument('--chunk-size', type=int, help='Optional: trials per chunk (default from config)')
    mc.set_defaults(handler=cmd_montecarlo)

    for subparser in subparsers.choices.values():
        add_common_arguments(subparser)
    return parser.parse_args(argv)


def load_params(args: Namespace) -> ModelParams:
    """
    Model parameters from --params and / or the --a --b --A --B flags (flags win)
    :param args: parsed arguments
    :return: ModelParams
    """
    flags = {name: getattr(args, name) for name in ('a', 'b', 'A', 'B')}
    if args.params is not None:
        return read_params(args.params, overrides=flags)
    missing = [f'--{name}' for name, value in flags.items() if value is None]
    if missing:
        error(f'Missing model parameters: {", ".join(missing)} (or pass --params)')
    try:
        return parse_params(flags)
    except MalformedInput as e:
        error(f'Invalid model parameters: {e}')


def grid_spec(args: Namespace, config: dict[str, Any]) -> GridSpec:
    return GridSpec(half_width_sds=args.half_width or config['half_width_sds'],
                    points=args.grid_points or config['grid_points'])


def parse_method(name: str) -> Method:
    try:
        return Method.from_name(name.strip())
    except ValueError:
        error(f"Unknown method '{name}'. Choose from kalman, dobrovidov, "
              f"{', '.join(str(m) for m in Method if m not in (Method.KALMAN, Method.DOBROVIDOV))}")


def load_observations(args: Namespace, params: ModelParams) -> np.ndarray:
    if getattr(args, 'simulate', False):
        LOGGER.info(f'Simulating {args.n} steps with seed {args.seed}')
        return simulate(params, args.n, args.seed).x
    if args.traj is None:
        error('Pass --traj FILE or --simulate')
    return read_trajectory(args.traj).x


def emit_report(report: Report, output: Optional[Path]) -> None:
    print(str(report))
    if output is not None:
        output.mkdir(parents=True, exist_ok=True)
        report.write_to_file(output / report.filename)  # write the report to disk


def cmd_simulate(args: Namespace, config: dict[str, Any]) -> ExitCode:
    params = load_params(args)
    trajectory = simulate(params, args.n, args.seed)
    write_trajectory(trajectory, args.out)
    print(json.dumps(trajectory.summary(), indent=4))
    return ExitCode.OK


def cmd_filter(args: Namespace, config: dict[str, Any]) -> ExitCode:
    params = load_params(args)
    method = parse_method(args.method)
    xs = read_trajectory(args.traj).x
    run = run_method(method, params, xs, grid_spec(args, config), raw_kalman=args.raw_kalman, use_psi=args.psi_path,
                     overflow_guard=config['overflow_guard'])
    write_estimates(run, args.out)
    if args.loglik:
        if method in DOBROVIDOV_METHODS:
            print(json.dumps({'log_likelihood': total_log_likelihood(params, xs)}))
        else:
            LOGGER.warning(f'--loglik is only reported for the dobrovidov methods, not {method}')
    LOGGER.info(f'Final estimate E(S_{len(run)} | x) = {run.estimates[-1]:.10g}')
    return ExitCode.OK


def cmd_compare(args: Namespace, config: dict[str, Any]) -> ExitCode:
    params = load_params(args)
    methods = [parse_method(name) for name in args.methods.split(',') if name.strip()]
    if len(methods) < 2:
        error('--methods needs at least two methods')
    method_params = {}
    for item in args.method_params:
        name, _, filename = item.partition('=')
        if not filename:
            error(f"--method-params expects METHOD=FILE, got '{item}'")
        method_params[parse_method(name)] = read_params(Path(filename))
    xs = load_observations(args, params)
    tol = args.tol if args.tol is not None else config['tol']
    report = compare_methods(params, xs, methods, tol, grid_spec(args, config), raw_kalman=args.raw_kalman,
                             use_psi=args.psi_path, per_step=args.per_step, method_params=method_params,
                             overflow_guard=config['overflow_guard'])
    emit_report(report, args.output)
    if not report.passed:
        LOGGER.error(f'Methods diverge by more than {tol}')
        return ExitCode.DIVERGENCE
    return ExitCode.OK


def cmd_invert(args: Namespace, config: dict[str, Any]) -> ExitCode:
    params = load_params(args)
    if args.n < 1:
        error(f'--n must be >= 1, got {args.n}')
    covariance = build_covariances(params, args.n).D_xx
    if args.n == 1 or params.a == 0:
        path = 'diagonal'
        inverse = invert_cov(params, args.n)
    else:
        try:
            path = 'psi'
            inverse = invert_cov(params, args.n, config['overflow_guard'])
        except PsiOverflow as e:
            if args.psi_path:
                raise
            LOGGER.warning(f'{e}; using the innovations factorization instead')
            path = 'innovations'
            inverse = invert_cov_innovations(params, args.n)
    residual = max_abs_diff(covariance @ inverse, np.eye(args.n))
    LOGGER.info(f'Structured inverse ({path}) of the {args.n}x{args.n} covariance, residual {residual:.3g}')

    oracle_residual, oracle_diff = None, None
    if args.oracle:
        dense = dense_invert(covariance)
        oracle_residual, oracle_diff = dense.residual, max_abs_diff(inverse, dense.inverse)
        LOGGER.info(f'Dense oracle residual {oracle_residual:.3g}, max abs difference {oracle_diff:.3g}')

    report = InversionReport(params=params, covariance=covariance, inverse=inverse, residual=residual, path=path,
                             oracle_residual=oracle_residual, oracle_max_abs_diff=oracle_diff)
    if args.format == 'csv':
        write_matrix(inverse, args.out if args.out is not None else sys.stdout)
        if args.output is not None:
            args.output.mkdir(parents=True, exist_ok=True)
            report.write_to_file(args.output / report.filename)
    else:
        emit_report(report, args.output)
    return ExitCode.OK


def cmd_lemmas(args: Namespace, config: dict[str, Any]) -> ExitCode:
    params = load_params(args)
    residuals = lemma_checks(params, args.N, config['overflow_guard']).as_dict()
    residuals.update(identity_residuals(params, max(args.N, 2)))
    report = LemmaReport(params=params, N=args.N, residuals=residuals, tol=args.tol)
    emit_report(report, args.output)
    if not report.passed:
        LOGGER.error(f'Largest residual {report.max_residual:.3g} exceeds {args.tol}')
        return ExitCode.DIVERGENCE
    return ExitCode.OK


def cmd_montecarlo(args: Namespace, config: dict[str, Any]) -> ExitCode:
    params = load_params(args)
    nr_processes = args.nr_processes or config['processes']
    report = covariance_check(params, args.n, args.trials or config['trials'], args.seed,
                              chunk_size=args.chunk_size or config['chunk_size'], nr_processes=nr_processes)
    emit_report(report, args.output)
    if not report.passed:
        LOGGER.error(f'Largest |z| = {report.max_abs_z:.2f} exceeds {report.z_limit}')
        return ExitCode.DIVERGENCE
    return ExitCode.OK


def run(args: Namespace) -> ExitCode:
    """
    Dispatch to the subcommand and translate errors into exit codes
    :param args: parsed arguments
    :return: ExitCode of the subcommand (fatal errors exit through util.error)
    """
    config = parse_config(args.config or DEFAULT_CONFIG_PATH, explicit=args.config is not None)
    handler: Callable[[Namespace, dict[str, Any]], ExitCode] = args.handler
    try:
        return handler(args, config)
    except (DegenerateModel, UnsupportedZeroA, PsiOverflow, GridTooCoarse, StepOutOfRange, EmptyObservations) as e:
        error(str(e), ExitCode.USAGE)
    except (MalformedInput, UnicodeDecodeError) as e:
        error(f'Malformed input: {e}', ExitCode.PARSE)
    except OSError as e:
        error(f'I/O error: {e}', ExitCode.IO)
    except (FilteringError, ValueError) as e:
        error(str(e), ExitCode.USAGE)


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = parse_arguments(argv)
        set_verbosity(args.debug, args.quiet)
        if not args.quiet:
            print_logo()
        return run(args).value
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else ExitCode.USAGE.value


if __name__ == '__main__':
    sys.exit(main())
