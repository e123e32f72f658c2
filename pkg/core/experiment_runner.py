"""
Experiment Runner - Monte Carlo sweeps over the (a, b) grid with every
selected method run on shared instances
"""
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import Config
from core.bsbm_model import BsbmParams, RngStream, params_from_experiment, sample_bsbm
from core.estimators import EstimatorConfig, Method, TruthChannel, run_method
from core.exceptions import DegenerateInput, InvalidParameters, NoTransitionFound
from core.metrics import misclassified_fraction

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ['b', 'a', 'p', 'n2', 'method', 'replications', 'exact_rate', 'mean_fraction',
                  'mean_lloyd_iters', 'wall_ms']

# Top-level stream tag keeping pilot probes apart from grid replications
PILOT_STREAM = 1 << 31

TRUTH_CHANNEL = {
    Method.DEBIASED_SPECTRAL: 'params, labels1, labels2 (expected noise Gram diagonal)',
    Method.ORACLE: 'p, labels1',
}


def _parse_methods(methods) -> List[Method]:
    if isinstance(methods, (str, Method)):
        methods = [methods]
    parsed = {m if isinstance(m, Method) else Method.parse(m) for m in methods}
    if not parsed:
        raise InvalidParameters("methods must name at least one method")
    return [m for m in Method if m in parsed]


@dataclass
class ExperimentGrid:
    n1: int
    gamma1: float
    gamma2: float
    delta: float
    b_values: List[float]
    a_min: Optional[float] = None
    a_max: Optional[float] = None
    a_points: int = 20
    replications: int = 1
    methods: List[Method] = field(default_factory=lambda: [Method.HOLLOWED_LLOYD])
    master_seed: int = field(default_factory=lambda: Config.MASTER_SEED)
    threads: int = field(default_factory=lambda: Config.THREADS)
    eigen_solver: str = field(default_factory=lambda: Config.EIGEN_SOLVER)
    a_values: Optional[List[float]] = None
    a_brackets: Optional[List[List[float]]] = None
    lloyd_max_iters: Optional[int] = None

    def __post_init__(self):
        self.methods = _parse_methods(self.methods)
        self.b_values = [float(b) for b in self.b_values]
        if not self.b_values:
            raise InvalidParameters("b_values must not be empty")
        if self.a_points < 2:
            raise InvalidParameters(f"a_points must be >= 2, got {self.a_points}")
        if self.a_values is not None:
            self.a_values = [float(a) for a in self.a_values]
            if len(self.a_values) < 2:
                raise InvalidParameters("a_values needs at least 2 points")
            self.a_points = len(self.a_values)
        elif self.a_brackets is not None:
            if len(self.a_brackets) != len(self.b_values):
                raise InvalidParameters(
                    f"a_brackets needs one [a_min, a_max] per b value, got {len(self.a_brackets)} "
                    f"for {len(self.b_values)} b values"
                )
            self.a_brackets = [[float(lo), float(hi)] for lo, hi in self.a_brackets]
            for lo, hi in self.a_brackets:
                if not 0 < lo < hi:
                    raise InvalidParameters(f"each bracket needs 0 < a_min < a_max, got [{lo}, {hi}]")
        else:
            if self.a_min is None or self.a_max is None:
                raise InvalidParameters("a_min and a_max are required unless a_values or a_brackets is given")
            if not self.a_min < self.a_max:
                raise InvalidParameters(f"a_min must be < a_max, got {self.a_min} >= {self.a_max}")
        if self.replications < 1:
            raise InvalidParameters(f"replications must be >= 1, got {self.replications}")
        if self.threads < 1:
            raise InvalidParameters(f"threads must be >= 1, got {self.threads}")
        if self.eigen_solver not in Config.EIGEN_SOLVERS:
            raise InvalidParameters(f"unknown eigensolver '{self.eigen_solver}'")
        for method in self.methods:
            self.estimator_config(method).lloyd_cap(self.n1)
        # Every derived model must be valid before any sampling starts
        for b_index, b in enumerate(self.b_values):
            for a in self.a_grid(b_index):
                self.params_at(a, b)

    def a_grid(self, b_index: int = 0) -> np.ndarray:
        """a-values used with the b_index-th b value"""
        if self.a_values is not None:
            return np.asarray(self.a_values, dtype=np.float64)
        if self.a_brackets is not None:
            lo, hi = self.a_brackets[b_index]
            return np.linspace(lo, hi, self.a_points)
        return np.linspace(self.a_min, self.a_max, self.a_points)

    def params_at(self, a: float, b: float) -> BsbmParams:
        return params_from_experiment(self.n1, self.gamma1, self.gamma2, self.delta, a, b)

    def estimator_config(self, method: Method) -> EstimatorConfig:
        return EstimatorConfig(method=method, lloyd_max_iters=self.lloyd_max_iters,
                               eigen_solver=self.eigen_solver)

    def to_dict(self) -> Dict:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['methods'] = [m.code for m in self.methods]
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentGrid":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidParameters(f"unknown experiment config keys: {unknown}")
        return cls(**data)


@dataclass
class ResultRow:
    b: float
    a: float
    p: float
    n2: int
    method: str
    replications: int
    exact_rate: float
    mean_fraction: float
    mean_lloyd_iters: float
    wall_ms: float
    degenerate_inputs: int = 0
    degenerate_gaps: int = 0

    def csv_record(self) -> Dict:
        return {name: getattr(self, name) for name in RESULT_COLUMNS}


@dataclass
class ReplicationRecord:
    b_index: int
    a_index: int
    replication: int
    method_order: int
    exact: bool
    fraction: float
    lloyd_iters: int
    wall_ms: float
    degenerate_input: bool
    degenerate_gap: bool


class ExperimentRunner:
    """Runs (b, a, replication) tasks on a thread pool and reduces them in index order"""

    def __init__(self, grid: ExperimentGrid):
        self.grid = grid
        self.logger = logging.getLogger(__name__)

    def _replication(self, b_index: int, a_index: int, rep: int, params: BsbmParams) -> List[ReplicationRecord]:
        grid = self.grid
        stream = RngStream(grid.master_seed, (b_index * grid.a_points + a_index, rep))
        matrix, eta1, eta2 = sample_bsbm(params, stream.child(0))
        truth = TruthChannel(params, eta1, eta2)

        records = []
        for order, method in enumerate(grid.methods):
            started = time.perf_counter()
            try:
                outcome = run_method(method, matrix, grid.estimator_config(method),
                                     stream.child(1 + method.stream_index), truth).scored(eta1)
                exact = bool(outcome.exact)
                fraction = misclassified_fraction(outcome.loss_r, params.n1)
                iters, degenerate, gap = outcome.lloyd_iterations, False, outcome.degenerate_gap
            except DegenerateInput as exc:
                self.logger.warning("Replication %d at b-index %d, a-index %d: %s", rep, b_index, a_index, exc)
                exact, fraction, iters, degenerate, gap = False, 0.5, 0, True, False
            elapsed = (time.perf_counter() - started) * 1000.0
            records.append(ReplicationRecord(b_index, a_index, rep, order, exact, fraction, iters,
                                             elapsed, degenerate, gap))
        return records

    def _tasks(self) -> List[Tuple[int, int, int, BsbmParams]]:
        tasks = []
        for b_index, b in enumerate(self.grid.b_values):
            for a_index, a in enumerate(self.grid.a_grid(b_index)):
                params = self.grid.params_at(a, b)
                tasks.extend((b_index, a_index, rep, params) for rep in range(self.grid.replications))
        return tasks

    def run_grid(self, threads: Optional[int] = None) -> List[ResultRow]:
        """One row per (b, a, method), identical for any thread count"""
        grid = self.grid
        threads = threads or grid.threads
        tasks = self._tasks()
        self.logger.info("Running %d replications over %d grid points with %d thread(s)",
                         len(tasks), len(grid.b_values) * grid.a_points, threads)

        if threads == 1:
            chunks = [self._replication(*task) for task in tasks]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                chunks = list(pool.map(lambda task: self._replication(*task), tasks))

        frame = pd.DataFrame([asdict(r) for chunk in chunks for r in chunk])
        frame = frame.sort_values(['b_index', 'a_index', 'method_order', 'replication'], kind='mergesort')
        summary = frame.groupby(['b_index', 'a_index', 'method_order'], sort=True).agg(
            replications=('replication', 'size'),
            exact_rate=('exact', 'mean'),
            mean_fraction=('fraction', 'mean'),
            mean_lloyd_iters=('lloyd_iters', 'mean'),
            wall_ms=('wall_ms', 'mean'),
            degenerate_inputs=('degenerate_input', 'sum'),
            degenerate_gaps=('degenerate_gap', 'sum'),
        )

        rows = []
        for (b_index, a_index, order), agg in summary.iterrows():
            b, a = grid.b_values[b_index], float(grid.a_grid(b_index)[a_index])
            params = grid.params_at(a, b)
            rows.append(ResultRow(
                b=b,
                a=a,
                p=params.p,
                n2=params.n2,
                method=grid.methods[order].code,
                replications=int(agg['replications']),
                exact_rate=float(agg['exact_rate']),
                mean_fraction=float(agg['mean_fraction']),
                mean_lloyd_iters=float(agg['mean_lloyd_iters']),
                wall_ms=float(agg['wall_ms']) if Config.RECORD_WALL_TIME else 0.0,
                degenerate_inputs=int(agg['degenerate_inputs']),
                degenerate_gaps=int(agg['degenerate_gaps']),
            ))
        degenerate = sum(r.degenerate_inputs for r in rows)
        if degenerate:
            self.logger.warning("%d replications hit degenerate input and were scored as failures", degenerate)
        return rows

    @staticmethod
    def write_csv(rows: Sequence[ResultRow], path: str):
        frame = pd.DataFrame([row.csv_record() for row in rows], columns=RESULT_COLUMNS)
        frame.to_csv(path, index=False, float_format='%.10g')

    def write_metadata(self, rows: Sequence[ResultRow], path: str):
        """Sidecar JSON: grid, truth-channel marking and degenerate counts"""
        meta = {
            'app': Config.APP_NAME,
            'version': Config.VERSION,
            'grid': self.grid.to_dict(),
            'truth_channel': {m.code: TRUTH_CHANNEL[m] for m in self.grid.methods if m.uses_truth},
            'degenerate': [
                {'b': r.b, 'a': r.a, 'method': r.method, 'degenerate_inputs': r.degenerate_inputs,
                 'degenerate_gaps': r.degenerate_gaps}
                for r in rows if r.degenerate_inputs or r.degenerate_gaps
            ],
            'wall_time_recorded': Config.RECORD_WALL_TIME,
        }
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write('\n')


SUCCESS_LOW = 0.05
SUCCESS_HIGH = 0.95
BRACKET_MARGIN = 1.2
PILOT_POINTS = 13
PILOT_DECADES = 6


def _hl_success_rate(params: BsbmParams, probe: int, replications: int, master_seed: int,
                     cfg: EstimatorConfig) -> float:
    successes = 0
    for rep in range(replications):
        stream = RngStream(master_seed, (PILOT_STREAM, probe, rep))
        matrix, eta1, _ = sample_bsbm(params, stream.child(0))
        try:
            outcome = run_method(Method.HOLLOWED_LLOYD, matrix, cfg, stream.child(1))
            successes += bool(outcome.scored(eta1).exact)
        except DegenerateInput:
            pass
    return successes / replications


def pilot_bracket(n1: int, gamma1: float, gamma2: float, delta: float, b: float, replications: int,
                  master_seed: Optional[int] = None, eigen_solver: Optional[str] = None,
                  success_fn: Optional[Callable[[float], float]] = None) -> Tuple[float, float]:
    """Geometric search for the a-range where HL success climbs from 0.05 to 0.95.

    Probes 13 points over 6 decades centred on b v b^2, skipping a-values whose
    parameters are invalid, and widens the bracket by 20% on each side.
    ``success_fn(a)`` replaces the Monte Carlo success estimate when given.
    """
    if replications < 1:
        raise InvalidParameters(f"replications must be >= 1, got {replications}")
    master_seed = Config.MASTER_SEED if master_seed is None else master_seed
    cfg = EstimatorConfig(method=Method.HOLLOWED_LLOYD, eigen_solver=eigen_solver or Config.EIGEN_SOLVER)
    centre = max(b, b * b)
    half = PILOT_DECADES / 2.0

    probes = []
    for probe, a in enumerate(centre * np.logspace(-half, half, PILOT_POINTS)):
        try:
            params = params_from_experiment(n1, gamma1, gamma2, delta, a, b)
        except InvalidParameters as exc:
            logger.debug("Pilot skips a=%.4g: %s", a, exc)
            continue
        if success_fn is not None:
            rate = success_fn(float(a))
        else:
            rate = _hl_success_rate(params, probe, replications, master_seed, cfg)
        logger.info("Pilot b=%g a=%.4g: HL success %.3f", b, a, rate)
        probes.append((float(a), rate))

    highs = [a for a, rate in probes if rate >= SUCCESS_HIGH]
    if highs:
        a_hi = min(highs)
        lows = [a for a, rate in probes if rate <= SUCCESS_LOW and a < a_hi]
        if lows:
            return max(lows) / BRACKET_MARGIN, a_hi * BRACKET_MARGIN
    raise NoTransitionFound(
        f"HL success never crossed {SUCCESS_LOW} and {SUCCESS_HIGH} over "
        f"{PILOT_DECADES} decades around a={centre:g} (b={b})"
    )
