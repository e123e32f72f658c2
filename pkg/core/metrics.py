"""
Metrics - Flip-invariant loss and recovery classification
"""
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from core.bsbm_model import LabelVector
from core.exceptions import InvalidParameters


class RecoveryLevel(Enum):
    EXACT = 'exact'
    WITHIN_ALPHA = 'within_alpha'
    ABOVE_ALPHA = 'above_alpha'


@dataclass(frozen=True)
class RecoveryClass:
    loss_r: int
    fraction: float
    exact: bool


def mismatch_count(eta: LabelVector, eta_hat: LabelVector) -> int:
    return eta.disagreements(eta_hat)


def loss_r(eta: LabelVector, eta_hat: LabelVector) -> int:
    """min over global flips of twice the number of mismatched positions"""
    if len(eta) != len(eta_hat):
        raise InvalidParameters(f"label vectors differ in length: {len(eta)} vs {len(eta_hat)}")
    mismatches = mismatch_count(eta, eta_hat)
    return 2 * min(mismatches, len(eta) - mismatches)


def misclassified_fraction(loss: int, n1: int) -> float:
    return loss / (2.0 * n1)


def recovery_class(eta: LabelVector, eta_hat: LabelVector) -> RecoveryClass:
    loss = loss_r(eta, eta_hat)
    return RecoveryClass(loss_r=loss, fraction=misclassified_fraction(loss, len(eta)), exact=loss == 0)


def classify(loss: int, n1: int, alpha: float) -> RecoveryLevel:
    """Exact, below the weak-recovery level alpha, or at/above it"""
    if not 0 < alpha < 1:
        raise InvalidParameters(f"alpha must be in (0, 1), got {alpha}")
    if loss == 0:
        return RecoveryLevel.EXACT
    if loss / n1 < alpha:
        return RecoveryLevel.WITHIN_ALPHA
    return RecoveryLevel.ABOVE_ALPHA


def is_almost_full(fractions: Iterable[float], tol: float) -> bool:
    """Every run misclassified less than a tol fraction of vertices"""
    values = np.asarray(list(fractions), dtype=np.float64)
    return bool(values.size) and bool(np.all(values < tol))
