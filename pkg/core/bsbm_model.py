"""
BSBM Model - Parameters, label vectors, sparse biadjacency matrices and sampling
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Sequence, Tuple, Union, Optional

import numpy as np
from scipy import sparse

from core.exceptions import InvalidParameters, MalformedInput

logger = logging.getLogger(__name__)

# Upper bound on uniforms drawn per row chunk while sampling
SAMPLE_CHUNK_ENTRIES = 1 << 22


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by (master_seed, stream_id)"""

    master_seed: int
    stream_id: Tuple[int, ...] = (0, 0)

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise InvalidParameters(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        key = tuple(int(k) for k in self.stream_id)
        if any(k < 0 for k in key):
            raise InvalidParameters(f"stream_id entries must be non-negative, got {key}")
        object.__setattr__(self, 'master_seed', int(self.master_seed))
        object.__setattr__(self, 'stream_id', key)

    def generator(self) -> np.random.Generator:
        """Fresh generator; every call replays the same sequence"""
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=self.stream_id)
        return np.random.default_rng(seq)

    def child(self, index: int) -> "RngStream":
        """Independent substream (e.g. one per solver within a replication)"""
        return RngStream(self.master_seed, self.stream_id + (int(index),))


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"Expected RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True)
class BsbmParams:
    """Full BSBM parameterization: community sizes, delta and p"""

    n1_plus: int
    n1_minus: int
    n2_plus: int
    n2_minus: int
    delta: float
    p: float
    # Test hook: admit p = 0 (degenerate, edgeless model)
    allow_zero_p: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ('n1_plus', 'n1_minus', 'n2_plus', 'n2_minus'):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise InvalidParameters(f"{name} must be a non-negative integer, got {value}")
            object.__setattr__(self, name, int(value))
        object.__setattr__(self, 'delta', float(self.delta))
        object.__setattr__(self, 'p', float(self.p))

        if self.n1 < 2:
            raise InvalidParameters(f"n1 must be >= 2, got {self.n1}")
        if self.n2 < 2:
            raise InvalidParameters(f"n2 must be >= 2, got {self.n2}")
        if self.n1 > self.n2:
            raise InvalidParameters(f"n1 must be <= n2, got n1={self.n1}, n2={self.n2}")
        if min(self.n1_plus, self.n1_minus, self.n2_plus, self.n2_minus) == 0:
            # gamma = 1 means one community is empty
            raise InvalidParameters(
                f"imbalance must be < 1: every community needs at least one vertex, "
                f"got gamma1={self.gamma1:.4f}, gamma2={self.gamma2:.4f}"
            )
        if not 0 < self.delta < 2:
            raise InvalidParameters(f"delta must be in (0, 2), got {self.delta}")
        lower_ok = self.p >= 0 if self.allow_zero_p else self.p > 0
        if not (lower_ok and self.p < 0.5):
            raise InvalidParameters(f"p must be in (0, 1/2), got {self.p}")
        if self.p_in >= 1:
            raise InvalidParameters(f"delta*p must be < 1, got {self.p_in}")
        if self.p_out >= 1:
            raise InvalidParameters(f"(2-delta)*p must be < 1, got {self.p_out}")

    @property
    def n1(self) -> int:
        return self.n1_plus + self.n1_minus

    @property
    def n2(self) -> int:
        return self.n2_plus + self.n2_minus

    @property
    def gamma1(self) -> float:
        return abs(self.n1_plus - self.n1_minus) / self.n1

    @property
    def gamma2(self) -> float:
        return abs(self.n2_plus - self.n2_minus) / self.n2

    @property
    def imbalance_product(self) -> float:
        return self.gamma1 * self.gamma2

    @property
    def p_in(self) -> float:
        """Edge probability between equally labelled vertices"""
        return self.delta * self.p

    @property
    def p_out(self) -> float:
        """Edge probability between differently labelled vertices"""
        return (2.0 - self.delta) * self.p

    def describe(self) -> Dict:
        return {
            'n1': self.n1,
            'n2': self.n2,
            'n1_plus': self.n1_plus,
            'n2_plus': self.n2_plus,
            'gamma1': round(self.gamma1, 12),
            'gamma2': round(self.gamma2, 12),
            'delta': self.delta,
            'p': self.p,
        }


@dataclass(frozen=True, eq=False)
class LabelVector:
    """A +/-1 assignment for one vertex set"""

    labels: np.ndarray
    n_plus: Optional[int] = None

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 1:
            raise InvalidParameters(f"labels must be one-dimensional, got shape {arr.shape}")
        if not np.all((arr == 1) | (arr == -1)):
            raise InvalidParameters("every label must be exactly +1 or -1")
        arr = arr.astype(np.int8)
        arr.flags.writeable = False
        count = int(np.count_nonzero(arr == 1))
        if self.n_plus is not None and count != self.n_plus:
            raise InvalidParameters(f"expected {self.n_plus} entries equal to +1, got {count}")
        object.__setattr__(self, 'labels', arr)
        object.__setattr__(self, 'n_plus', count)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelVector):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    __hash__ = None

    @property
    def n_minus(self) -> int:
        return len(self) - self.n_plus

    @classmethod
    def from_signs(cls, values: np.ndarray) -> "LabelVector":
        """Labels from real scores with the sign(0) = +1 convention"""
        return cls(np.where(np.asarray(values) >= 0, 1, -1))

    def as_float(self) -> np.ndarray:
        return self.labels.astype(np.float64)

    def flipped(self) -> "LabelVector":
        return LabelVector(-self.labels)

    def permuted(self, perm: Sequence[int]) -> "LabelVector":
        """New vector whose entry i is entry perm[i] of this one"""
        return LabelVector(self.labels[np.asarray(perm)])

    def disagreements(self, other: "LabelVector") -> int:
        if len(other) != len(self):
            raise InvalidParameters(f"length mismatch: {len(self)} vs {len(other)}")
        return int(np.count_nonzero(self.labels != other.labels))


@dataclass(frozen=True, eq=False)
class Biadjacency:
    """Sparse n1 x n2 binary matrix stored row-major (CSR)"""

    matrix: sparse.csr_matrix

    def __post_init__(self):
        m = sparse.csr_matrix(self.matrix, dtype=np.float64, copy=True)
        m.sum_duplicates()
        m.sort_indices()
        if m.nnz and not np.all(m.data == 1.0):
            raise MalformedInput("biadjacency entries must all be 1 (duplicates or weights found)")
        if m.nnz > m.shape[0] * m.shape[1]:
            raise MalformedInput("more stored entries than matrix cells")
        object.__setattr__(self, 'matrix', m)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "Biadjacency":
        arr = np.asarray(dense)
        if arr.ndim != 2:
            raise InvalidParameters(f"expected a 2-D array, got shape {arr.shape}")
        if not np.all((arr == 0) | (arr == 1)):
            raise InvalidParameters("biadjacency entries must be 0 or 1")
        return cls(sparse.csr_matrix(arr, dtype=np.float64))

    @classmethod
    def from_coordinates(cls, n1: int, n2: int, rows: Sequence[int],
                         cols: Sequence[int]) -> "Biadjacency":
        """Build from zero-based (row, column) pairs; duplicates are rejected"""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.shape != cols.shape:
            raise MalformedInput("row and column index arrays differ in length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n1 or cols.min() < 0 or cols.max() >= n2:
                raise MalformedInput(f"index out of range for a {n1}x{n2} matrix")
            if np.unique(rows * n2 + cols).size != rows.size:
                raise MalformedInput("duplicate entries in coordinate list")
        data = np.ones(rows.size, dtype=np.float64)
        return cls(sparse.csr_matrix((data, (rows, cols)), shape=(n1, n2)))

    @classmethod
    def empty(cls, n1: int, n2: int) -> "Biadjacency":
        return cls(sparse.csr_matrix((n1, n2), dtype=np.float64))

    @property
    def n1(self) -> int:
        return self.matrix.shape[0]

    @property
    def n2(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    @cached_property
    def row_degrees(self) -> np.ndarray:
        return np.diff(self.matrix.indptr).astype(np.float64)

    @cached_property
    def col_sums(self) -> np.ndarray:
        return np.bincount(self.matrix.indices, minlength=self.n2).astype(np.float64)

    def row(self, i: int) -> np.ndarray:
        """Strictly increasing column indices of row i"""
        m = self.matrix
        return m.indices[m.indptr[i]:m.indptr[i + 1]]

    def rows(self) -> List[np.ndarray]:
        return [self.row(i) for i in range(self.n1)]

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Zero-based (row, column) arrays in row-major order"""
        rows = np.repeat(np.arange(self.n1), np.diff(self.matrix.indptr))
        return rows, self.matrix.indices.copy()

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def permute_rows(self, perm: Sequence[int]) -> "Biadjacency":
        """New matrix whose row i is row perm[i] of this one"""
        return Biadjacency(self.matrix[np.asarray(perm)])

    def same_entries(self, other: "Biadjacency") -> bool:
        if self.matrix.shape != other.matrix.shape or self.nnz != other.nnz:
            return False
        return (np.array_equal(self.matrix.indptr, other.matrix.indptr)
                and np.array_equal(self.matrix.indices, other.matrix.indices))


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _plus_count(n: int, gamma: float) -> int:
    # round() guards against 150.00000000000003-style ceil artefacts
    return int(math.ceil(round((1.0 + gamma) * n / 2.0, 9)))


def params_from_sizes(n1: int, n2: int, gamma1: float, gamma2: float, delta: float, p: float,
                      allow_zero_p: bool = False) -> BsbmParams:
    """Community sizes ceil((1 + gamma) n / 2) on each side"""
    for name, gamma in (('gamma1', gamma1), ('gamma2', gamma2)):
        if not 0 <= gamma < 1:
            raise InvalidParameters(f"{name} must be in [0, 1), got {gamma}")
    for name, n in (('n1', n1), ('n2', n2)):
        if int(n) != n or n < 2:
            raise InvalidParameters(f"{name} must be an integer >= 2, got {n}")
    n1, n2 = int(n1), int(n2)
    n1_plus = _plus_count(n1, gamma1)
    n2_plus = _plus_count(n2, gamma2)
    return BsbmParams(n1_plus=n1_plus, n1_minus=n1 - n1_plus, n2_plus=n2_plus, n2_minus=n2 - n2_plus,
                      delta=delta, p=p, allow_zero_p=allow_zero_p)


def params_from_experiment(n1: int, gamma1: float, gamma2: float, delta: float,
                           a: float, b: float) -> BsbmParams:
    """Map the (a, b) plotting parameterization to a full BsbmParams"""
    if int(n1) != n1 or n1 < 2:
        raise InvalidParameters(f"n1 must be an integer >= 2, got {n1}")
    if not a > 0:
        raise InvalidParameters(f"a must be > 0, got {a}")
    if not b > 0:
        raise InvalidParameters(f"b must be > 0, got {b}")
    for name, gamma in (('gamma1', gamma1), ('gamma2', gamma2)):
        if not 0 <= gamma < 1:
            raise InvalidParameters(f"{name} must be in [0, 1), got {gamma}")
    if not 0 < delta < 2:
        raise InvalidParameters(f"delta must be in (0, 2), got {delta}")

    n1 = int(n1)
    n2 = _half_up(n1 * math.log(n1) / b)
    return params_from_sizes(n1, n2, gamma1, gamma2, delta, math.sqrt(a) / n1)


def sample_labels(n: int, n_plus: int, rng: RngLike) -> LabelVector:
    """Exactly n_plus entries +1, positions uniformly permuted"""
    gen = as_generator(rng)
    labels = -np.ones(n, dtype=np.int8)
    labels[gen.permutation(n)[:n_plus]] = 1
    return LabelVector(labels, n_plus=n_plus)


def _check_labels(params: BsbmParams, eta1: LabelVector, eta2: LabelVector):
    if len(eta1) != params.n1 or eta1.n_plus != params.n1_plus:
        raise InvalidParameters(
            f"eta1 must have length {params.n1} with {params.n1_plus} plus entries, "
            f"got length {len(eta1)} with {eta1.n_plus}"
        )
    if len(eta2) != params.n2 or eta2.n_plus != params.n2_plus:
        raise InvalidParameters(
            f"eta2 must have length {params.n2} with {params.n2_plus} plus entries, "
            f"got length {len(eta2)} with {eta2.n_plus}"
        )


def sample_biadjacency(params: BsbmParams, eta1: LabelVector, eta2: LabelVector,
                       rng: RngLike) -> Biadjacency:
    """Independent Bernoulli entries at fixed labels"""
    _check_labels(params, eta1, eta2)
    gen = as_generator(rng)
    n1, n2 = params.n1, params.n2
    chunk = max(1, SAMPLE_CHUNK_ENTRIES // n2)
    col_labels = eta2.labels[None, :]

    blocks = []
    for start in range(0, n1, chunk):
        row_labels = eta1.labels[start:start + chunk, None]
        rates = np.where(row_labels == col_labels, params.p_in, params.p_out)
        hits = gen.random(rates.shape) < rates
        blocks.append(sparse.csr_matrix(hits, dtype=np.float64))

    matrix = sparse.vstack(blocks, format='csr')
    logger.debug("Sampled %dx%d biadjacency with %d edges", n1, n2, matrix.nnz)
    return Biadjacency(matrix)


def sample_bsbm(params: BsbmParams, rng: RngLike) -> Tuple[Biadjacency, LabelVector, LabelVector]:
    """Draw labels with exact community sizes, then the biadjacency matrix"""
    gen = as_generator(rng)
    eta1 = sample_labels(params.n1, params.n1_plus, gen)
    eta2 = sample_labels(params.n2, params.n2_plus, gen)
    a = sample_biadjacency(params, eta1, eta2, gen)
    return a, eta1, eta2


def expected_biadjacency(params: BsbmParams, eta1: LabelVector, eta2: LabelVector) -> np.ndarray:
    """Dense E(A) = p 1 1^T + (delta - 1) p eta1 eta2^T"""
    _check_labels(params, eta1, eta2)
    same = eta1.labels[:, None] == eta2.labels[None, :]
    return np.where(same, params.p_in, params.p_out)


def expected_gram_diag(params: BsbmParams, eta1: LabelVector, eta2: LabelVector) -> np.ndarray:
    """Diagonal of E(WW^T): sum_j q_ij (1 - q_ij)"""
    _check_labels(params, eta1, eta2)
    var_in = params.p_in * (1.0 - params.p_in)
    var_out = params.p_out * (1.0 - params.p_out)
    same_count = np.where(eta1.labels == 1, eta2.n_plus, eta2.n_minus).astype(np.float64)
    return same_count * var_in + (params.n2 - same_count) * var_out


def p_hat_bias(params: BsbmParams) -> float:
    """Exact E(p_hat) - p"""
    return ((params.delta - 1.0) * params.p
            * (params.n1_plus - params.n1_minus) * (params.n2_plus - params.n2_minus)
            / (params.n1 * params.n2))


def recovery_threshold(n1: int, n2: int, delta: float) -> float:
    """Sufficient-condition scale for p with unit constant"""
    if delta == 1:
        return math.inf
    scale = max(math.sqrt(math.log(n1) / (n1 * n2)), math.log(n1) / n2)
    return scale / (delta - 1.0) ** 2
