#!/usr/bin/env python3
"""
Command-line reproduction runs.

    python cli.py table1 --out table1.csv
    python cli.py fig1 --theta 0.3927 1.5708 --n-int 2 4 --out fig1.csv
    python cli.py region --u-min 0.1 --u-max 100 --out region.csv
    python cli.py point --eta 0.8 --theta 1.5708 --n-int 4
    python cli.py gauss steer state.json

Exit codes: 0 success, 1 computation failure, 2 usage or parse error.
"""

import argparse
import concurrent.futures
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime

import numpy as np

import dynamics
import gaussian
import noon
import robustness
import runs
from errors import BracketError, InvalidInputError, SteeringError
from matcore import symplectic_form

logger = logging.getLogger(__name__)

LOG_FILE = os.getenv('STEERING_LOG_FILE', 'steering.log')
COMMANDS = ('table1', 'fig1', 'region', 'point', 'gauss')
GAUSS_ACTIONS = ('steer', 'witness', 'lhs', 'sample')

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def configure_logging(verbose=False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(LOG_FILE)
        ]
    )
    if verbose:
        robustness.SOLVER_VERBOSE = True


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    out: str = None
    seed: int = 0
    workers: int = 1
    reproducible: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidInputError(f"unknown command {self.command!r}, expected one of {COMMANDS}")
        if self.workers < 1:
            raise InvalidInputError(f"--workers must be >= 1, got {self.workers}")


def _fmt(value):
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    return str(value)


def write_csv(path, header, rows, reproducible):
    """Header row, '.' decimals; a timestamp comment line unless reproducible."""
    buffer = io.StringIO()
    if not reproducible:
        buffer.write(f"# generated {datetime.now().isoformat()}\n")
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    if path:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(buffer.getvalue())
        logger.info(f"Wrote {len(rows)} rows to {path}")
    else:
        sys.stdout.write(buffer.getvalue())


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, default=str, sort_keys=True)
    if path:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text + '\n')
        logger.info(f"Wrote {path}")
    else:
        sys.stdout.write(text + '\n')


def _finish(config, run_id, diagnostics, failed):
    record = runs.finish_run(run_id, diagnostics, failed, config.reproducible)
    if config.out and record is not None:
        runs.write_sidecar(config.out, record, config.reproducible)
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_table1(config):
    p = config.params
    run_id = runs.start_run('table1', asdict(config), config.reproducible)
    rows = noon.table1_pipeline(p['n_int'], p['theta'], p['n'], p['c'], p['partition_scheme'],
                                p['tol'], config.workers)
    header = ['n_int', 'eta_c', 'ir_at_eta_c', 'method']
    if not config.reproducible:
        header.append('wall_time_s')
    out_rows = []
    for row in rows:
        values = [row.n_int, row.eta_c, row.ir_at_eta_c, row.method]
        if not config.reproducible:
            values.append(row.wall_time_s)
        out_rows.append(values)
    write_csv(config.out, header, out_rows, config.reproducible)

    diagnostics = [asdict(row) for row in rows]
    if config.reproducible:
        for d in diagnostics:
            d.pop('wall_time_s')
    failed = any(row.error is not None and row.method != 'closed-form' for row in rows)
    if failed:
        logger.error(f"{sum(row.error is not None for row in rows)} table1 rows failed")
    return _finish(config, run_id, diagnostics, failed)


def _cutoff(p, n_int):
    return noon.table1_cutoff(n_int) if p['c'] is None else p['c']


def _fig1_point(theta, n_int, p):
    try:
        row = noon.critical_row(n_int, theta, p['n'], p['c'], p['partition_scheme'], p['tol'])
        note = 'no bound' if row.eta_c is None else ''
        return {'theta': theta, 'n_int': n_int, 'eta_c': row.eta_c, 'note': note, 'error': None}
    except BracketError as e:
        # compatible up to eta = 1
        logger.info(f"theta={theta:.4f}, n_int={n_int}: {e}")
        return {'theta': theta, 'n_int': n_int, 'eta_c': None, 'note': 'no bound', 'error': None}


def cmd_fig1(config):
    p = config.params
    thetas = [float(t) for t in p['theta']]
    for theta in thetas:
        if not 0.0 < theta < np.pi:
            raise InvalidInputError(f"theta must lie in (0, pi), got {theta}")
    run_id = runs.start_run('fig1', asdict(config), config.reproducible)
    tasks = [(theta, n) for theta in thetas for n in p['n_int']]
    logger.info(f"Starting critical-noise curves for {len(tasks)} (theta, n_int) points (max_workers={config.workers})")

    points = []
    with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as executor:
        future_to_task = {executor.submit(_fig1_point, theta, n, p): (theta, n) for theta, n in tasks}
        for future in concurrent.futures.as_completed(future_to_task):
            theta, n = future_to_task[future]
            try:
                points.append(future.result())
            except Exception as exc:
                logger.error(f"theta={theta:.4f}, n_int={n} generated an exception: {exc}")
                points.append({'theta': theta, 'n_int': n, 'eta_c': None, 'note': 'error', 'error': str(exc)})
    points.sort(key=lambda d: tasks.index((d['theta'], d['n_int'])))

    rows = []
    for theta in thetas:
        rows.append([theta, 'lower_bound', noon.eta_lower_bound(2), 'reference'])
        rows += [[d['theta'], d['n_int'], d['eta_c'], d['note']] for d in points if d['theta'] == theta]
    write_csv(config.out, ['theta', 'n_int', 'eta_c', 'note'], rows, config.reproducible)
    return _finish(config, run_id, points, any(d['error'] for d in points))


def cmd_region(config):
    p = config.params
    couplings = np.geomspace(p['u_min'], p['u_max'], p['u_steps'])
    times = np.linspace(p['t_min'], p['t_max'], p['t_steps'])
    run_id = runs.start_run('region', asdict(config), config.reproducible)
    region = dynamics.steerable_region(couplings, times, p['rc'], p['linewidth'], config.workers)
    write_csv(config.out, ['u', 't', 'r', 'steerable'], list(region.rows()), config.reproducible)
    windows = [{'u': float(u), 'windows': int(w)} for u, w in zip(region.couplings, region.windows)]
    return _finish(config, run_id, windows, False)


def cmd_point(config):
    p = config.params
    params = noon.NoonParams(p['n'], p['alpha'], p['eta'])
    n_int = p['n_int'][0]
    partition = noon.IntervalPartition(n_int, _cutoff(p, n_int), p['partition_scheme'])
    run_id = runs.start_run('point', asdict(config), config.reproducible)
    point = noon.steering_point(params, p['theta'], partition)
    result = asdict(point)
    result.update({'photon_number': params.photon_number, 'alpha': params.phase,
                   'partition': partition.to_json()})
    _write_json(config.out, result)
    return _finish(config, run_id, [result], False)


def _load_state(path):
    try:
        with open(path, 'r', encoding='utf-8') as f:
            obj = json.load(f)
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"{path}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    except OSError as e:
        raise InvalidInputError(f"{path}: cannot read state file ({e})") from e
    if not isinstance(obj, dict):
        raise InvalidInputError(f"{path}: expected a JSON object")
    return gaussian.GaussianBipartiteState.from_json(obj)


def cmd_gauss(config):
    p = config.params
    action = p['action']
    if action == 'sample':
        rng = np.random.default_rng(config.seed)
        state = gaussian.random_bipartite_state(p['modes_a'], p['modes_b'], rng)
        _write_json(config.out, state.to_json())
        return EXIT_OK

    if not p.get('state'):
        raise InvalidInputError(f"gauss {action} needs a state file")
    state = _load_state(p['state'])
    if action == 'steer':
        result = {'steerable': bool(gaussian.is_steerable(state)),
                  'min_eigenvalue': float(gaussian.steering_margin(state))}
        try:
            result['steerable_by_channel'] = bool(gaussian.is_steerable_by_channel(state))
        except SteeringError as e:
            logger.warning(f"channel test skipped: {e}")
            result['steerable_by_channel'] = None
    elif action == 'witness':
        result = gaussian.steering_witness(state).to_json()
    else:
        lhs = gaussian.gaussian_lhs(state)
        result = {'weight_cm': lhs.weight_cm.tolist(), 'member_cm': lhs.member_cm.tolist(),
                  'shift': lhs.shift.tolist(), 'center': lhs.center.tolist(),
                  'member_min_eigenvalue': float(np.linalg.eigvalsh(
                      lhs.member_cm + 1j * symplectic_form(state.modes_b))[0])}
    _write_json(config.out, result)
    return EXIT_OK


HANDLERS = {'table1': cmd_table1, 'fig1': cmd_fig1, 'region': cmd_region,
            'point': cmd_point, 'gauss': cmd_gauss}


def build_parser():
    parser = argparse.ArgumentParser(prog='cli.py', description='Steering and measurement incompatibility runs')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--out', help='output file (stdout if omitted)')
    common.add_argument('--reproducible', action='store_true', help='omit timestamps and wall times')
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--workers', type=int, default=1)
    common.add_argument('--verbose', action='store_true')

    noon_flags = argparse.ArgumentParser(add_help=False)
    noon_flags.add_argument('--n', type=int, default=1, help='photon number N')
    noon_flags.add_argument('--c', type=float, default=None,
                            help=f'partition cutoff (default {noon.DEFAULT_CUTOFF}, {noon.TABLE1_CUTOFFS} per row)')
    noon_flags.add_argument('--partition-scheme', choices=noon.PARTITION_SCHEMES, default='tails')
    noon_flags.add_argument('--tol', type=float, default=1e-3, help='bisection tolerance in eta')

    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('table1', parents=[common, noon_flags], help='critical noise per partition size')
    p.add_argument('--n-int', type=int, nargs='*', default=list(noon.TABLE1_N_INT))
    p.add_argument('--theta', type=float, default=np.pi / 2)

    p = sub.add_parser('fig1', parents=[common, noon_flags], help='critical noise against the angle')
    p.add_argument('--n-int', type=int, nargs='*', default=[2, 4])
    p.add_argument('--theta', type=float, nargs='+', default=[np.pi / 8, np.pi / 4, 3 * np.pi / 8, np.pi / 2])

    p = sub.add_parser('region', parents=[common], help='steerable region of the damped dynamics')
    p.add_argument('--u-min', type=float, default=0.1)
    p.add_argument('--u-max', type=float, default=100.0)
    p.add_argument('--u-steps', type=int, default=40)
    p.add_argument('--t-min', type=float, default=0.0)
    p.add_argument('--t-max', type=float, default=5.0)
    p.add_argument('--t-steps', type=int, default=201)
    p.add_argument('--rc', type=float, default=dynamics.DEFAULT_RC)
    p.add_argument('--linewidth', type=float, default=1.0)

    p = sub.add_parser('point', parents=[common, noon_flags], help='IR and CSR at one noise level')
    p.add_argument('--alpha', type=float, default=0.0)
    p.add_argument('--eta', type=float, required=True)
    p.add_argument('--theta', type=float, default=np.pi / 2)
    p.add_argument('--n-int', type=int, nargs=1, default=[4])

    p = sub.add_parser('gauss', parents=[common], help='Gaussian steering test, witness or LHS model')
    p.add_argument('action', choices=GAUSS_ACTIONS)
    p.add_argument('state', nargs='?', help='JSON state file {"modes_a", "modes_b", "V", "r"}')
    p.add_argument('--modes-a', type=int, default=1)
    p.add_argument('--modes-b', type=int, default=1)
    return parser


def config_from_args(args):
    params = {k: v for k, v in vars(args).items()
              if k not in ('command', 'out', 'seed', 'workers', 'reproducible', 'verbose')}
    if 'n_int' in params:
        if not params['n_int']:
            raise InvalidInputError("n_int list is empty")
        for n in params['n_int']:
            noon.IntervalPartition(n, _cutoff(params, n) if 'c' in params else noon.DEFAULT_CUTOFF,
                                  params.get('partition_scheme', 'tails'))
    if args.command == 'region':
        if params['u_min'] <= 0 or params['u_max'] < params['u_min'] or params['u_steps'] < 1:
            raise InvalidInputError("coupling grid needs 0 < u-min <= u-max and u-steps >= 1")
        if params['t_min'] < 0 or params['t_max'] < params['t_min'] or params['t_steps'] < 1:
            raise InvalidInputError("time grid needs 0 <= t-min <= t-max and t-steps >= 1")
    return RunConfig(args.command, params, args.out, args.seed, args.workers, args.reproducible)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    configure_logging(args.verbose)

    try:
        config = config_from_args(args)
    except InvalidInputError as e:
        logger.error(f"Invalid arguments: {e}")
        return EXIT_USAGE

    start = time.time()
    try:
        code = HANDLERS[config.command](config)
    except InvalidInputError as e:
        logger.error(f"Invalid input for {config.command}: {e}")
        return EXIT_USAGE
    except SteeringError as e:
        logger.error(f"{config.command} failed: {e}")
        return EXIT_FAILURE
    logger.info(f"{config.command} finished with exit code {code} in {time.time() - start:.1f}s")
    return code


if __name__ == "__main__":
    sys.exit(main())
