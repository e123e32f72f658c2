"""
BSBM Recovery - Command-line entry point
Generate instances, recover labels, run grid experiments and concentration
benches, and plot results
"""
import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional

import pandas as pd

from config import Config
from core.bsbm_model import BsbmParams, RngStream, params_from_sizes, sample_bsbm
from core.concentration_bench import ConcentrationBench
from core.estimators import EstimatorConfig, Method, TruthChannel, oracle_estimator, run_method
from core.exceptions import BsbmError, DegenerateInput, InvalidParameters, MalformedInput
from core.experiment_runner import ExperimentGrid, ExperimentRunner, pilot_bracket
from utils.data_validator import BENCH_MODES, DataValidator
from utils.html_report import write_html_report
from utils.matrix_market import read_biadjacency, read_labels, write_biadjacency, write_labels
from utils.svg_chart import write_faceted_svgs

logger = logging.getLogger('bsbm')

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DEGENERATE = 4


class DataFileError(Exception):
    """A data file could not be read or parsed"""

    def __init__(self, path: str, cause: Exception):
        self.cause = cause
        super().__init__(f"{path}: {cause}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidParameters(message)


def _read_data(reader, path: str):
    try:
        return reader(path)
    except (OSError, MalformedInput) as exc:
        raise DataFileError(path, exc) from exc


def _read_config(path: str) -> Dict:
    try:
        return DataValidator.load_json(path)
    except OSError as exc:
        raise DataFileError(path, exc) from exc


def _emit(summary: Dict):
    print(json.dumps(summary, sort_keys=True))


def _default_out(name: str) -> str:
    os.makedirs(Config.RESULTS_DIR, exist_ok=True)
    return os.path.join(Config.RESULTS_DIR, name)


def cmd_generate(args) -> int:
    params = params_from_sizes(args.n1, args.n2, args.gamma1, args.gamma2, args.delta, args.p)
    a, eta1, eta2 = sample_bsbm(params, RngStream(args.seed))
    write_biadjacency(a, args.out_matrix)
    write_labels(eta1, args.out_labels1)
    write_labels(eta2, args.out_labels2)
    _emit({'command': 'generate', 'nnz': a.nnz, **params.describe()})
    return EXIT_OK


def _check_truth_flags(args, method: Method):
    given = {name: getattr(args, name) is not None for name in ('labels1', 'labels2', 'p', 'delta')}
    if method is Method.ORACLE:
        needed = ('labels1', 'p')
    elif method is Method.DEBIASED_SPECTRAL:
        needed = ('labels1', 'labels2', 'p', 'delta')
    else:
        needed = ()
    missing = [f"--{name}" for name in needed if not given[name]]
    extra = [f"--{name}" for name, present in given.items() if present and name not in needed]
    if missing:
        raise InvalidParameters(f"method {method.code} requires {' '.join(missing)}")
    if extra:
        raise InvalidParameters(f"method {method.code} does not take {' '.join(extra)}; use --truth to score")


def cmd_recover(args) -> int:
    method = Method.parse(args.method)
    _check_truth_flags(args, method)
    a = _read_data(read_biadjacency, args.matrix)
    eta1 = _read_data(read_labels, args.labels1) if args.labels1 else None
    scoring = _read_data(read_labels, args.truth) if args.truth else eta1
    if scoring is not None and len(scoring) != a.n1:
        raise InvalidParameters(f"truth labels have length {len(scoring)}, matrix has {a.n1} rows")

    stream = RngStream(args.seed).child(1 + method.stream_index)
    if method is Method.ORACLE:
        if not 0 < args.p < 0.5:
            raise InvalidParameters(f"p must be in (0, 1/2), got {args.p}")
        outcome = oracle_estimator(a, args.p, eta1)
    else:
        truth = None
        if method is Method.DEBIASED_SPECTRAL:
            eta2 = _read_data(read_labels, args.labels2)
            params = BsbmParams(n1_plus=eta1.n_plus, n1_minus=eta1.n_minus, n2_plus=eta2.n_plus,
                                n2_minus=eta2.n_minus, delta=args.delta, p=args.p)
            truth = TruthChannel(params, eta1, eta2)
        outcome = run_method(method, a, EstimatorConfig(method=method), stream, truth)

    if scoring is not None:
        outcome = outcome.scored(scoring)
    write_labels(outcome.eta_hat, args.out)
    summary = {'command': 'recover', 'out': args.out, **outcome.summary()}
    with open(args.out + '.json', 'w', encoding='utf-8') as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write('\n')
    _emit(summary)
    return EXIT_OK


def _has_a_range(data: Dict) -> bool:
    return any(data.get(key) is not None for key in ('a_values', 'a_brackets', 'a_min'))


def cmd_experiment(args) -> int:
    data = DataValidator.validate_grid_config(_read_config(args.config))
    if args.threads is not None:
        data['threads'] = args.threads
    if not _has_a_range(data) and args.pilot:
        data['a_brackets'] = [
            list(pilot_bracket(data['n1'], data['gamma1'], data['gamma2'], data['delta'], b, args.pilot,
                               master_seed=data['master_seed'], eigen_solver=data['eigen_solver']))
            for b in data['b_values']
        ]
    grid = ExperimentGrid.from_dict(data)
    runner = ExperimentRunner(grid)
    rows = runner.run_grid()
    out = args.out or _default_out(os.path.splitext(os.path.basename(args.config))[0] + '.csv')
    runner.write_csv(rows, out)
    runner.write_metadata(rows, out + '.meta.json')
    _emit({'command': 'experiment', 'out': out, 'rows': len(rows),
           'degenerate_inputs': sum(r.degenerate_inputs for r in rows)})
    return EXIT_OK


def cmd_concentration(args) -> int:
    settings = DataValidator.validate_bench_config(args.mode, _read_config(args.config))
    threads = args.threads if args.threads is not None else settings['threads']
    bench = ConcentrationBench(threads=threads)
    records = bench.run_check(args.mode, settings, RngStream(settings['master_seed']))
    out = args.out or _default_out(args.mode + '.csv')
    bench.write_csv(records, out)
    _emit({'command': 'concentration', 'mode': args.mode, 'out': out, 'records': len(records),
           'failed': sum(r.verdict == 'FAIL' for r in records)})
    return EXIT_OK


def cmd_plot(args) -> int:
    required = [args.x, args.y, args.series] + ([args.facet] if args.facet else [])
    frame = _read_data(lambda path: DataValidator.validate_results_csv(path, required, [args.x, args.y]),
                       args.input)
    if frame.empty:
        raise DataFileError(args.input, MalformedInput("no data rows", line=2))
    if args.facet:
        numeric = pd.to_numeric(frame[args.facet], errors='coerce')
        if not numeric.isna().any():
            frame[args.facet] = numeric

    fmt = args.format or ('html' if args.out.lower().endswith('.html') else 'svg')
    if fmt == 'html':
        written = [write_html_report(frame, args.x, args.y, args.series, args.facet, args.out)]
    else:
        written = write_faceted_svgs(frame, args.x, args.y, args.series, args.facet, args.out)
    _emit({'command': 'plot', 'format': fmt, 'files': written})
    return EXIT_OK


def _threads(value: str) -> int:
    threads = int(value)
    if threads < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return threads


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='cli.py', description=f"{Config.APP_NAME}: community recovery in the bipartite SBM")
    parser.add_argument('--version', action='version', version=f"{Config.APP_NAME} {Config.VERSION}")
    parser.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING or ERROR')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('generate', help='sample a BSBM instance')
    gen.add_argument('--n1', type=int, required=True)
    gen.add_argument('--n2', type=int, required=True)
    gen.add_argument('--gamma1', type=float, default=0.0)
    gen.add_argument('--gamma2', type=float, default=0.0)
    gen.add_argument('--delta', type=float, required=True)
    gen.add_argument('--p', type=float, required=True)
    gen.add_argument('--seed', type=int, default=Config.MASTER_SEED)
    gen.add_argument('--out-matrix', required=True)
    gen.add_argument('--out-labels1', required=True)
    gen.add_argument('--out-labels2', required=True)
    gen.set_defaults(handler=cmd_generate)

    rec = sub.add_parser('recover', help='estimate V1 labels from a Matrix Market file')
    rec.add_argument('--matrix', required=True)
    rec.add_argument('--method', required=True, help='SPEC, HL, SVD, DS, DD or O')
    rec.add_argument('--labels1', default=None, help='true V1 labels (O and DS only)')
    rec.add_argument('--labels2', default=None, help='true V2 labels (DS only)')
    rec.add_argument('--p', type=float, default=None, help='true p (O and DS only)')
    rec.add_argument('--delta', type=float, default=None, help='true delta (DS only)')
    rec.add_argument('--truth', default=None, help='V1 labels used only to score the estimate')
    rec.add_argument('--seed', type=int, default=Config.MASTER_SEED)
    rec.add_argument('--out', required=True)
    rec.set_defaults(handler=cmd_recover)

    exp = sub.add_parser('experiment', help='run an (a, b) grid experiment')
    exp.add_argument('--config', required=True)
    exp.add_argument('--out', default=None, help='results CSV (default: <results dir>/<config name>.csv)')
    exp.add_argument('--threads', type=_threads, default=None)
    exp.add_argument('--pilot', type=int, default=0, metavar='REPS',
                     help='bracket a per b value with REPS pilot replications when the config has no a-range')
    exp.set_defaults(handler=cmd_experiment)

    conc = sub.add_parser('concentration', help='run a concentration bench check')
    conc.add_argument('--mode', required=True, choices=BENCH_MODES)
    conc.add_argument('--config', required=True)
    conc.add_argument('--out', default=None, help='bench CSV (default: <results dir>/<mode>.csv)')
    conc.add_argument('--threads', type=_threads, default=None)
    conc.set_defaults(handler=cmd_concentration)

    plot = sub.add_parser('plot', help='line charts from a results CSV')
    plot.add_argument('--in', dest='input', required=True)
    plot.add_argument('--out', required=True)
    plot.add_argument('--x', default='a')
    plot.add_argument('--y', default='exact_rate')
    plot.add_argument('--series', default='method')
    plot.add_argument('--facet', default='b', help="column to split charts by; '' for none")
    plot.add_argument('--format', choices=('svg', 'html'), default=None)
    plot.set_defaults(handler=cmd_plot)
    return parser


def _exit_code(error: Exception) -> int:
    if isinstance(error, DegenerateInput):
        return EXIT_DEGENERATE
    if isinstance(error, (DataFileError, OSError)):
        return EXIT_IO
    return EXIT_USAGE


def _configure_logging(level: Optional[str]):
    level = (level or ('DEBUG' if Config.DEBUG else Config.LOG_LEVEL)).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except InvalidParameters as exc:
        return _fail(exc)

    _configure_logging(args.log_level)
    try:
        return args.handler(args)
    except (BsbmError, DataFileError, OSError) as exc:
        return _fail(exc)


def _fail(error: Exception) -> int:
    code = _exit_code(error)
    logger.debug("Command failed", exc_info=error)
    sys.stderr.write(json.dumps(DataValidator.create_error_response(error, code)) + '\n')
    return code


if __name__ == '__main__':
    sys.exit(main())
