"""
Estimators - Label recovery by the hollowed spectral method, hollowed Lloyd
iterations, the SVD / debiased / diagonal-deletion baselines and the
supervised oracle
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from config import Config
from core.bsbm_model import Biadjacency, BsbmParams, LabelVector, RngLike, expected_gram_diag
from core.exceptions import DegenerateInput, InvalidParameters, ZeroOperator
from core.metrics import loss_r
from core.spectral_engine import (CenteredMatrix, EigenSolveReport, GramOperator, HollowedGramOp,
                                  second_eigvec, top_eigvec)

logger = logging.getLogger(__name__)

# sign(0) is +1 everywhere
SIGN_ZERO = 1


class Method(Enum):
    SPECTRAL = 'SPEC'
    HOLLOWED_LLOYD = 'HL'
    SVD = 'SVD'
    DEBIASED_SPECTRAL = 'DS'
    DIAGONAL_DELETION = 'DD'
    ORACLE = 'O'

    @property
    def code(self) -> str:
        return self.value

    @property
    def uses_truth(self) -> bool:
        return self in (Method.DEBIASED_SPECTRAL, Method.ORACLE)

    @property
    def stream_index(self) -> int:
        """Fixed position used to key per-method RNG substreams"""
        return list(Method).index(self)

    @classmethod
    def parse(cls, name: str) -> "Method":
        key = str(name).strip()
        aliases = {
            'Spectral': cls.SPECTRAL,
            'HollowedLloyd': cls.HOLLOWED_LLOYD,
            'Svd': cls.SVD,
            'DebiasedSpectral': cls.DEBIASED_SPECTRAL,
            'DiagonalDeletion': cls.DIAGONAL_DELETION,
            'Oracle': cls.ORACLE,
        }
        if key in aliases:
            return aliases[key]
        for method in cls:
            if key.upper() in (method.value, method.name):
                return method
        raise InvalidParameters(f"unknown method '{name}', expected one of {[m.value for m in cls]}")


def minimum_lloyd_iters(n1: int) -> int:
    """Smallest iteration count the exact-recovery guarantee asks for"""
    return max(1, math.ceil(math.log(n1) / (2 * math.log(2)) - 1.5) + 1)


def default_lloyd_cap(n1: int) -> int:
    return max(3, minimum_lloyd_iters(n1), math.ceil(math.log2(n1)))


@dataclass
class EstimatorConfig:
    method: Method = Method.HOLLOWED_LLOYD
    lloyd_max_iters: Optional[int] = None
    eigen_tol: float = field(default_factory=lambda: Config.EIGEN_TOL)
    eigen_max_iter: int = field(default_factory=lambda: Config.EIGEN_MAX_ITER)
    eigen_solver: str = field(default_factory=lambda: Config.EIGEN_SOLVER)
    sign_zero_convention: int = SIGN_ZERO

    def __post_init__(self):
        if not isinstance(self.method, Method):
            self.method = Method.parse(self.method)
        if self.sign_zero_convention != SIGN_ZERO:
            raise InvalidParameters("sign_zero_convention is fixed to +1")
        if self.lloyd_max_iters is not None and self.lloyd_max_iters < 1:
            raise InvalidParameters(f"lloyd_max_iters must be positive, got {self.lloyd_max_iters}")
        if self.eigen_solver not in Config.EIGEN_SOLVERS:
            raise InvalidParameters(f"unknown eigensolver '{self.eigen_solver}'")

    def lloyd_cap(self, n1: int) -> int:
        if self.lloyd_max_iters is None:
            return default_lloyd_cap(n1)
        needed = minimum_lloyd_iters(n1)
        if self.method is Method.HOLLOWED_LLOYD and self.lloyd_max_iters < needed:
            raise InvalidParameters(
                f"lloyd_max_iters must be >= {needed} for n1={n1}, got {self.lloyd_max_iters}"
            )
        return self.lloyd_max_iters


@dataclass(frozen=True)
class TruthChannel:
    """Ground truth handed to the semi-oracle (DS) and oracle (O) methods"""

    params: BsbmParams
    eta1: LabelVector
    eta2: LabelVector


@dataclass
class RecoveryOutcome:
    eta_hat: LabelVector
    method: Method
    loss_r: Optional[int] = None
    exact: Optional[bool] = None
    lloyd_trace: List[int] = field(default_factory=list)
    degenerate_gap: bool = False
    eigen: Optional[EigenSolveReport] = None
    uses_truth: bool = False

    @property
    def lloyd_iterations(self) -> int:
        return len(self.lloyd_trace)

    def scored(self, eta1: LabelVector) -> "RecoveryOutcome":
        loss = loss_r(eta1, self.eta_hat)
        return replace(self, loss_r=loss, exact=loss == 0)

    def summary(self) -> dict:
        return {
            'method': self.method.code,
            'n1': len(self.eta_hat),
            'loss_r': self.loss_r,
            'exact': self.exact,
            'lloyd_iterations': self.lloyd_iterations,
            'degenerate_gap': self.degenerate_gap,
            'uses_truth': self.uses_truth,
        }


def estimate_p(a: Biadjacency) -> float:
    """p_hat = 1^T A 1 / (n1 n2)"""
    return a.nnz / (a.n1 * a.n2)


def _signs(values: np.ndarray) -> LabelVector:
    return LabelVector.from_signs(values)


def _require_edges(a: Biadjacency, method: Method):
    if a.nnz == 0:
        raise DegenerateInput(f"{method.code}: empty graph, no labels can be recovered")


def _solve(solve, op, shift: float, cfg: EstimatorConfig, rng: RngLike,
           method: Method) -> EigenSolveReport:
    try:
        return solve(op, shift, tol=cfg.eigen_tol, max_iter=cfg.eigen_max_iter,
                     rng=rng, solver=cfg.eigen_solver)
    except ZeroOperator as exc:
        raise DegenerateInput(f"{method.code}: {exc}") from exc


def spectral_labels(op, shift: float, cfg: EstimatorConfig, rng: RngLike,
                    method: Method = Method.SPECTRAL) -> Tuple[LabelVector, EigenSolveReport]:
    """Signs of the top eigenvector of a symmetric operator"""
    report = _solve(top_eigvec, op, shift, cfg, rng, method)
    return _signs(report.eigenvector), report


def second_vector_labels(op, shift: float, cfg: EstimatorConfig, rng: RngLike,
                         method: Method) -> Tuple[LabelVector, EigenSolveReport]:
    """Signs of the second eigenvector of a symmetric operator"""
    report = _solve(second_eigvec, op, shift, cfg, rng, method)
    return _signs(report.eigenvector), report


def lloyd_refine(op, init: LabelVector, max_iters: int) -> Tuple[LabelVector, List[int]]:
    """eta <- sign(op eta) until a fixed point or max_iters; returns per-step change counts"""
    current = init
    trace = []
    for _ in range(max_iters):
        nxt = _signs(op.matvec(current.as_float()))
        changes = current.disagreements(nxt)
        trace.append(changes)
        current = nxt
        if changes == 0:
            break
    return current, trace


def oracle_labels(op, eta1: LabelVector) -> LabelVector:
    return _signs(op.matvec(eta1.as_float()))


def _hollowed_operator(a: Biadjacency, offset: float) -> HollowedGramOp:
    return HollowedGramOp(CenteredMatrix(a, offset))


def spectral_estimator(a: Biadjacency, rng: RngLike,
                       cfg: Optional[EstimatorConfig] = None) -> RecoveryOutcome:
    """Signs of the top eigenvector of H(A_hat A_hat^T), A_hat = A - p_hat 1 1^T"""
    cfg = cfg or EstimatorConfig(method=Method.SPECTRAL)
    _require_edges(a, Method.SPECTRAL)
    op = _hollowed_operator(a, estimate_p(a))
    labels, report = spectral_labels(op, op.shift, cfg, rng)
    return RecoveryOutcome(eta_hat=labels, method=Method.SPECTRAL, eigen=report,
                           degenerate_gap=report.degenerate_gap)


def lloyd_iterate(a: Biadjacency, init: LabelVector,
                  cfg: Optional[EstimatorConfig] = None) -> RecoveryOutcome:
    cfg = cfg or EstimatorConfig()
    if len(init) != a.n1:
        raise InvalidParameters(f"init has length {len(init)}, expected {a.n1}")
    _require_edges(a, Method.HOLLOWED_LLOYD)
    op = _hollowed_operator(a, estimate_p(a))
    labels, trace = lloyd_refine(op, init, cfg.lloyd_cap(a.n1))
    return RecoveryOutcome(eta_hat=labels, method=Method.HOLLOWED_LLOYD, lloyd_trace=trace)


def hollowed_lloyd(a: Biadjacency, cfg: Optional[EstimatorConfig] = None,
                   rng: Optional[RngLike] = None) -> RecoveryOutcome:
    """Hollowed spectral initializer followed by hollowed Lloyd iterations"""
    cfg = cfg or EstimatorConfig()
    _require_edges(a, Method.HOLLOWED_LLOYD)
    cap = cfg.lloyd_cap(a.n1)
    op = _hollowed_operator(a, estimate_p(a))
    init, report = spectral_labels(op, op.shift, cfg, rng, Method.HOLLOWED_LLOYD)
    labels, trace = lloyd_refine(op, init, cap)
    logger.debug("HL finished after %d Lloyd steps, trace=%s", len(trace), trace)
    return RecoveryOutcome(eta_hat=labels, method=Method.HOLLOWED_LLOYD, lloyd_trace=trace,
                           eigen=report, degenerate_gap=report.degenerate_gap)


def _second_vector_outcome(op: GramOperator, method: Method, cfg: EstimatorConfig,
                           rng: RngLike, uses_truth: bool = False) -> RecoveryOutcome:
    labels, report = second_vector_labels(op, op.shift, cfg, rng, method)
    return RecoveryOutcome(eta_hat=labels, method=method, eigen=report,
                           degenerate_gap=report.degenerate_gap, uses_truth=uses_truth)


def svd_estimator(a: Biadjacency, rng: RngLike,
                  cfg: Optional[EstimatorConfig] = None) -> RecoveryOutcome:
    """Signs of the second eigenvector of A A^T"""
    cfg = cfg or EstimatorConfig(method=Method.SVD)
    _require_edges(a, Method.SVD)
    return _second_vector_outcome(GramOperator(a), Method.SVD, cfg, rng)


def debiased_spectral(a: Biadjacency, truth: TruthChannel, rng: RngLike,
                      cfg: Optional[EstimatorConfig] = None) -> RecoveryOutcome:
    """Signs of the second eigenvector of A A^T - E(W W^T)"""
    cfg = cfg or EstimatorConfig(method=Method.DEBIASED_SPECTRAL)
    if (truth.params.n1, truth.params.n2) != (a.n1, a.n2):
        raise InvalidParameters(
            f"truth describes a {truth.params.n1}x{truth.params.n2} model, matrix is {a.n1}x{a.n2}"
        )
    _require_edges(a, Method.DEBIASED_SPECTRAL)
    diag = expected_gram_diag(truth.params, truth.eta1, truth.eta2)
    if np.ptp(diag) == 0:
        # A multiple of the identity leaves eigenvectors unchanged
        op = GramOperator(a)
    else:
        op = GramOperator(a, diag)
    return _second_vector_outcome(op, Method.DEBIASED_SPECTRAL, cfg, rng, uses_truth=True)


def diagonal_deletion_svd(a: Biadjacency, rng: RngLike,
                          cfg: Optional[EstimatorConfig] = None) -> RecoveryOutcome:
    """Signs of the second eigenvector of H(A A^T)"""
    cfg = cfg or EstimatorConfig(method=Method.DIAGONAL_DELETION)
    _require_edges(a, Method.DIAGONAL_DELETION)
    return _second_vector_outcome(_hollowed_operator(a, 0.0), Method.DIAGONAL_DELETION, cfg, rng)


def oracle_estimator(a: Biadjacency, p_true: float, eta1: LabelVector) -> RecoveryOutcome:
    """One hollowed Lloyd step from the true labels with true centering"""
    if len(eta1) != a.n1:
        raise InvalidParameters(f"eta1 has length {len(eta1)}, expected {a.n1}")
    labels = oracle_labels(_hollowed_operator(a, p_true), eta1)
    return RecoveryOutcome(eta_hat=labels, method=Method.ORACLE, uses_truth=True)


def run_method(method: Method, a: Biadjacency, cfg: EstimatorConfig, rng: RngLike,
               truth: Optional[TruthChannel] = None) -> RecoveryOutcome:
    """Dispatch one estimator; truth is required for DS and O"""
    if method.uses_truth and truth is None:
        raise InvalidParameters(f"method {method.code} needs ground truth")
    cfg = replace(cfg, method=method)
    if method is Method.SPECTRAL:
        return spectral_estimator(a, rng, cfg)
    if method is Method.HOLLOWED_LLOYD:
        return hollowed_lloyd(a, cfg, rng)
    if method is Method.SVD:
        return svd_estimator(a, rng, cfg)
    if method is Method.DEBIASED_SPECTRAL:
        return debiased_spectral(a, truth, rng, cfg)
    if method is Method.DIAGONAL_DELETION:
        return diagonal_deletion_svd(a, rng, cfg)
    return oracle_estimator(a, truth.params.p, truth.eta1)
