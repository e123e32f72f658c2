"""
Spectral Engine - Matrix-free centered / Gram / hollowed operators and
symmetric eigensolvers for the top two eigenpairs
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, aslinearoperator, eigsh

from config import Config
from core.bsbm_model import Biadjacency, RngLike, RngStream, as_generator
from core.exceptions import InvalidParameters, ZeroOperator

logger = logging.getLogger(__name__)

# Operator norm estimates below this mean the input is degenerate
ZERO_NORM_FLOOR = 1e-14


class CenteredMatrix:
    """Implicit A - c 1 1^T over a sparse biadjacency matrix"""

    def __init__(self, base: Biadjacency, offset: float = 0.0):
        self.base = base
        self.offset = float(offset)
        self.shape = (base.n1, base.n2)
        self.dtype = np.dtype(np.float64)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).ravel()
        out = self.base.matrix @ x
        if self.offset:
            out -= self.offset * x.sum()
        return out

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64).ravel()
        out = self.base.matrix.T @ y
        if self.offset:
            out -= self.offset * y.sum()
        return out

    def row_sqnorms(self) -> np.ndarray:
        """||A_i - c 1||^2 from the row degrees"""
        c = self.offset
        return self.base.row_degrees * (1.0 - 2.0 * c) + self.shape[1] * c * c

    def to_dense(self) -> np.ndarray:
        return self.base.to_dense() - self.offset


def _as_factor(factor):
    if isinstance(factor, Biadjacency):
        return CenteredMatrix(factor, 0.0)
    if isinstance(factor, CenteredMatrix):
        return factor
    return aslinearoperator(factor)


def _factor_row_sqnorms(factor) -> np.ndarray:
    if isinstance(factor, CenteredMatrix):
        return factor.row_sqnorms()
    n1 = factor.shape[0]
    # Generic factors (test hooks) are small: one product per row
    eye = np.eye(n1)
    return np.array([np.dot(r, r) for r in (factor.rmatvec(eye[i]) for i in range(n1))])


class GramOperator:
    """Implicit F F^T - diag(c) for a factor F exposing matvec / rmatvec"""

    def __init__(self, factor, correction: Optional[np.ndarray] = None):
        self.factor = _as_factor(factor)
        n1 = self.factor.shape[0]
        if correction is None:
            correction = np.zeros(n1)
        correction = np.asarray(correction, dtype=np.float64).ravel()
        if correction.shape != (n1,):
            raise InvalidParameters(f"diagonal correction must have length {n1}, got {correction.shape[0]}")
        self.correction = correction
        self.shape = (n1, n1)
        self.dtype = np.dtype(np.float64)
        # F F^T is PSD, so adding max(c) keeps the shifted operator PSD
        self.shift = max(float(correction.max()), 0.0) if n1 else 0.0

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64).ravel()
        out = np.asarray(self.factor.matvec(self.factor.rmatvec(v)), dtype=np.float64).ravel()
        if self.correction.any():
            out = out - self.correction * v
        return out

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        return self.matvec(v)

    def to_dense(self) -> np.ndarray:
        return np.column_stack([self.matvec(e) for e in np.eye(self.shape[0])])


class HollowedGramOp(GramOperator):
    """Implicit H(M M^T) = M M^T - diag(||M_i||^2)"""

    def __init__(self, m):
        factor = _as_factor(m)
        super().__init__(factor, _factor_row_sqnorms(factor))

    @property
    def m(self):
        return self.factor

    @property
    def row_sqnorms(self) -> np.ndarray:
        return self.correction


def apply_hollowed_gram(op: HollowedGramOp, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.shape[0] != op.shape[0]:
        raise InvalidParameters(f"vector length {v.shape[0]} does not match operator size {op.shape[0]}")
    return op.matvec(v)


def hollow_dense(m: np.ndarray) -> np.ndarray:
    """H(M) = M - diag(M)"""
    m = np.array(m, dtype=np.float64)
    np.fill_diagonal(m, 0.0)
    return m


@dataclass
class EigenSolveReport:
    eigenvalue: float
    eigenvector: np.ndarray
    iterations: int
    residual: float
    converged: bool = True
    degenerate_gap: bool = False
    solver: str = 'power'


def _resolve(tol, max_iter, rng, solver):
    tol = Config.EIGEN_TOL if tol is None else float(tol)
    max_iter = Config.EIGEN_MAX_ITER if max_iter is None else int(max_iter)
    solver = (solver or Config.EIGEN_SOLVER).lower()
    if solver not in Config.EIGEN_SOLVERS:
        raise InvalidParameters(f"unknown eigensolver '{solver}', expected one of {Config.EIGEN_SOLVERS}")
    gen = as_generator(rng if rng is not None else RngStream(Config.MASTER_SEED))
    return tol, max_iter, gen, solver


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _check_nonzero(operator: LinearOperator, start: np.ndarray):
    if np.linalg.norm(operator.matvec(start)) < ZERO_NORM_FLOOR:
        raise ZeroOperator("operator norm estimate below 1e-14; the input carries no signal")


def _power_iteration(matvec: Callable, start: np.ndarray, shift: float, tol: float,
                     max_iter: int, deflate: Optional[np.ndarray] = None) -> EigenSolveReport:
    v = start
    if deflate is not None:
        v = v - deflate * np.dot(deflate, v)
    v = _unit(v)

    lam, residual = 0.0, np.inf
    for iteration in range(1, max_iter + 1):
        y = matvec(v)
        if deflate is not None:
            y = y - deflate * np.dot(deflate, y)
        lam = float(np.dot(v, y))
        residual = float(np.linalg.norm(y - lam * v))
        if residual <= tol * max(abs(lam), 1.0):
            return EigenSolveReport(lam, v, iteration, residual)
        w = y + shift * v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        v = w / norm

    logger.warning("Power iteration stopped after %d iterations with residual %.3e", max_iter, residual)
    return EigenSolveReport(lam, v, max_iter, residual, converged=False)


def _lanczos(operator: LinearOperator, k: int, start: np.ndarray, tol: float,
             max_iter: int) -> Optional[Tuple[EigenSolveReport, float]]:
    """k-th largest algebraic eigenpair via ARPACK, plus the largest eigenvalue.

    Returns None when ARPACK fails to converge.
    """
    calls = [0]

    def counted(v):
        calls[0] += 1
        return operator.matvec(v)

    lin = LinearOperator(operator.shape, matvec=counted, dtype=np.float64)
    try:
        values, vectors = eigsh(lin, k=k, which='LA', v0=start, tol=tol, maxiter=max_iter)
    except ArpackNoConvergence:
        logger.warning("ARPACK did not converge; falling back to power iteration")
        return None

    order = np.argsort(values)[::-1]
    lam = float(values[order[k - 1]])
    v = _unit(vectors[:, order[k - 1]])
    residual = float(np.linalg.norm(operator.matvec(v) - lam * v))
    report = EigenSolveReport(lam, v, calls[0], residual, solver='lanczos')
    return report, float(values[order[0]])


def _use_lanczos(solver: str, n: int, k: int) -> bool:
    return solver == 'lanczos' and n >= 2 * k + 3


def top_eigvec(op, shift: float = 0.0, tol: Optional[float] = None,
               max_iter: Optional[int] = None, rng: Optional[RngLike] = None,
               solver: Optional[str] = None) -> EigenSolveReport:
    """Top algebraic eigenpair of a symmetric operator.

    ``shift`` must make op + shift * I positive semidefinite; power iteration
    runs on the shifted operator and the shift is subtracted back.
    """
    tol, max_iter, gen, solver = _resolve(tol, max_iter, rng, solver)
    operator = aslinearoperator(op)
    n = operator.shape[0]
    start = gen.standard_normal(n)
    _check_nonzero(operator, start)

    if _use_lanczos(solver, n, 1):
        found = _lanczos(operator, 1, start, tol, max_iter)
        if found is not None:
            return found[0]
    return _power_iteration(operator.matvec, start, float(shift), tol, max_iter)


def second_eigvec(op, shift: float = 0.0, tol: Optional[float] = None,
                  max_iter: Optional[int] = None, rng: Optional[RngLike] = None,
                  solver: Optional[str] = None) -> EigenSolveReport:
    """Second-largest algebraic eigenpair, by deflating the top pair"""
    tol, max_iter, gen, solver = _resolve(tol, max_iter, rng, solver)
    operator = aslinearoperator(op)
    n = operator.shape[0]
    if n < 2:
        raise InvalidParameters("second eigenvector needs an operator of size >= 2")
    start = gen.standard_normal(n)
    _check_nonzero(operator, start)

    report = None
    if _use_lanczos(solver, n, 2):
        found = _lanczos(operator, 2, start, tol, max_iter)
        if found is not None:
            report, lambda1 = found
    if report is None:
        first = _power_iteration(operator.matvec, start, float(shift), tol, max_iter)
        lambda1 = first.eigenvalue
        report = _power_iteration(operator.matvec, gen.standard_normal(n), float(shift), tol,
                                  max_iter, deflate=first.eigenvector)
        report.converged = report.converged and first.converged

    if abs(lambda1 - report.eigenvalue) <= tol * abs(lambda1):
        report.degenerate_gap = True
        logger.warning("Degenerate eigengap: lambda1=%.6g, lambda2=%.6g; second vector may be "
                       "rotation-ambiguous", lambda1, report.eigenvalue)
    return report
