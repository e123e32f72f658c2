import math
import re

import numpy as np
import pytest

from core.bsbm_model import (Biadjacency, BsbmParams, LabelVector, RngStream, expected_biadjacency,
                             expected_gram_diag, p_hat_bias, params_from_experiment, params_from_sizes,
                             recovery_threshold, sample_biadjacency, sample_bsbm, sample_labels)
from core.exceptions import InvalidParameters, MalformedInput


def _params(**overrides):
    values = dict(n1_plus=5, n1_minus=5, n2_plus=10, n2_minus=10, delta=0.5, p=0.2)
    values.update(overrides)
    return BsbmParams(**values)


def test_rng_stream_replays_same_sequence():
    stream = RngStream(7, (3, 4))
    assert np.array_equal(stream.generator().random(5), stream.generator().random(5))


def test_rng_stream_children_are_independent():
    stream = RngStream(7)
    assert not np.array_equal(stream.child(0).generator().random(5), stream.child(1).generator().random(5))
    assert stream.child(2).stream_id == (0, 0, 2)


def test_rng_stream_rejects_negative_seed():
    with pytest.raises(InvalidParameters):
        RngStream(-1)


@pytest.mark.parametrize("overrides, message", [
    ({'p': 0.6}, "p must be in (0, 1/2)"),
    ({'p': 0.0}, "p must be in (0, 1/2)"),
    ({'delta': 2.0}, "delta must be in (0, 2)"),
    ({'delta': 0.0}, "delta must be in (0, 2)"),
    ({'n2_plus': 2, 'n2_minus': 2}, "n1 must be <= n2"),
    ({'n1_plus': 0, 'n1_minus': 10}, "imbalance must be < 1"),
    ({'n1_plus': 1, 'n1_minus': 0}, "n1 must be >= 2"),
])
def test_params_validation_names_the_bound(overrides, message):
    with pytest.raises(InvalidParameters, match=re.escape(message)):
        _params(**overrides)


def test_params_allow_zero_p_hook():
    params = _params(p=0.0, allow_zero_p=True)
    assert params.p == 0.0
    assert params.p_in == 0.0 and params.p_out == 0.0


def test_params_derived_quantities():
    params = _params(n1_plus=6, n1_minus=4, n2_plus=15, n2_minus=5, delta=0.5, p=0.2)
    assert params.n1 == 10 and params.n2 == 20
    assert params.gamma1 == pytest.approx(0.2)
    assert params.gamma2 == pytest.approx(0.5)
    assert params.imbalance_product == pytest.approx(0.1)
    assert params.p_in == pytest.approx(0.1)
    assert params.p_out == pytest.approx(0.3)
    assert params.describe()['n2_plus'] == 15


def test_params_from_sizes_community_counts():
    params = params_from_sizes(10, 20, 0.2, 0.5, 0.5, 0.1)
    assert (params.n1_plus, params.n1_minus) == (6, 4)
    assert (params.n2_plus, params.n2_minus) == (15, 5)


def test_params_from_sizes_rejects_gamma_one():
    with pytest.raises(InvalidParameters, match="gamma2"):
        params_from_sizes(10, 20, 0.0, 1.0, 0.5, 0.1)


def test_params_from_experiment_mapping():
    params = params_from_experiment(300, 0.0, 0.5, 0.5, a=4.0, b=0.1)
    assert params.n2 == 17111
    assert params.n2 == int(math.floor(300 * math.log(300) / 0.1 + 0.5))
    assert params.p == pytest.approx(2.0 / 300)
    assert params.n1_plus == 150
    assert params.n2_plus == 12834


@pytest.mark.parametrize("a, b", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_params_from_experiment_rejects_nonpositive(a, b):
    with pytest.raises(InvalidParameters):
        params_from_experiment(100, 0.0, 0.0, 0.5, a, b)


def test_params_from_experiment_rejects_n2_below_n1():
    # n1 ln n1 / b < n1 once b > ln n1
    with pytest.raises(InvalidParameters, match="n1 must be <= n2"):
        params_from_experiment(100, 0.0, 0.0, 0.5, a=1.0, b=5.0)


def test_sample_labels_exact_counts():
    eta = sample_labels(50, 31, RngStream(1))
    assert len(eta) == 50
    assert eta.n_plus == 31
    assert eta.n_minus == 19


def test_sample_bsbm_is_deterministic():
    params = params_from_sizes(30, 60, 0.0, 0.5, 0.5, 0.2)
    a1, eta1, eta2 = sample_bsbm(params, RngStream(11, (2, 3)))
    a2, eta1b, eta2b = sample_bsbm(params, RngStream(11, (2, 3)))
    assert a1.same_entries(a2)
    assert eta1 == eta1b and eta2 == eta2b


def test_sample_bsbm_respects_community_sizes():
    params = params_from_sizes(40, 80, 0.5, 0.25, 0.5, 0.1)
    a, eta1, eta2 = sample_bsbm(params, RngStream(3))
    assert (a.n1, a.n2) == (40, 80)
    assert eta1.n_plus == params.n1_plus
    assert eta2.n_plus == params.n2_plus


def test_sampled_edge_rates_match_model():
    params = params_from_sizes(200, 400, 0.0, 0.0, 0.5, 0.2)
    eta1 = sample_labels(200, params.n1_plus, RngStream(5, (0,)))
    eta2 = sample_labels(400, params.n2_plus, RngStream(5, (1,)))
    dense = sample_biadjacency(params, eta1, eta2, RngStream(5, (2,))).to_dense()
    same = eta1.labels[:, None] == eta2.labels[None, :]
    assert dense[same].mean() == pytest.approx(params.p_in, abs=0.01)
    assert dense[~same].mean() == pytest.approx(params.p_out, abs=0.01)


def test_sample_biadjacency_rejects_wrong_labels():
    params = params_from_sizes(10, 20, 0.0, 0.0, 0.5, 0.2)
    eta1 = LabelVector(np.array([1] * 7 + [-1] * 3))
    eta2 = sample_labels(20, 10, RngStream(0))
    with pytest.raises(InvalidParameters, match="eta1"):
        sample_biadjacency(params, eta1, eta2, RngStream(0))


def test_expected_biadjacency_and_gram_diag():
    params = params_from_sizes(6, 12, 0.0, 0.5, 0.5, 0.2)
    eta1 = sample_labels(6, params.n1_plus, RngStream(1))
    eta2 = sample_labels(12, params.n2_plus, RngStream(2))
    q = expected_biadjacency(params, eta1, eta2)
    assert set(np.unique(q)) <= {params.p_in, params.p_out}
    assert np.allclose(expected_gram_diag(params, eta1, eta2), (q * (1 - q)).sum(axis=1))


def test_p_hat_bias_is_exact_mean_shift():
    params = params_from_sizes(10, 20, 0.2, 0.5, 0.5, 0.2)
    eta1 = sample_labels(10, params.n1_plus, RngStream(1))
    eta2 = sample_labels(20, params.n2_plus, RngStream(2))
    mean_q = expected_biadjacency(params, eta1, eta2).mean()
    assert mean_q - params.p == pytest.approx(p_hat_bias(params), abs=1e-15)


def test_p_hat_bias_monte_carlo():
    params = params_from_sizes(20, 40, 0.4, 0.5, 0.5, 0.2)
    eta1 = sample_labels(20, params.n1_plus, RngStream(4))
    eta2 = sample_labels(40, params.n2_plus, RngStream(5))
    draws = np.array([sample_biadjacency(params, eta1, eta2, RngStream(6, (k,))).nnz / (20 * 40)
                      for k in range(4000)])
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    bias = p_hat_bias(params)
    assert abs(bias) > 10 * se
    assert abs(draws.mean() - params.p - bias) <= 3 * se


def test_p_hat_bias_vanishes_when_balanced():
    assert p_hat_bias(params_from_sizes(10, 20, 0.0, 0.5, 0.5, 0.2)) == 0.0


def test_recovery_threshold():
    assert recovery_threshold(100, 1000, 1.0) == math.inf
    expected = max(math.sqrt(math.log(100) / 1e5), math.log(100) / 1000) / 0.25
    assert recovery_threshold(100, 1000, 0.5) == pytest.approx(expected)


def test_label_vector_validation():
    with pytest.raises(InvalidParameters):
        LabelVector(np.array([1, 0, -1]))
    with pytest.raises(InvalidParameters):
        LabelVector(np.array([1, -1]), n_plus=2)


def test_label_vector_sign_zero_is_plus():
    eta = LabelVector.from_signs(np.array([0.0, -0.0, 1e-300, -1.0]))
    assert list(eta.labels) == [1, 1, 1, -1]


def test_label_vector_operations():
    eta = LabelVector(np.array([1, -1, -1, 1]))
    assert list(eta.flipped().labels) == [-1, 1, 1, -1]
    assert list(eta.permuted([3, 2, 1, 0]).labels) == [1, -1, -1, 1]
    assert eta.disagreements(eta.flipped()) == 4


def test_biadjacency_from_dense_rejects_weights():
    with pytest.raises(InvalidParameters):
        Biadjacency.from_dense(np.array([[0, 2], [1, 0]]))


def test_biadjacency_from_coordinates():
    a = Biadjacency.from_coordinates(2, 3, [0, 1, 1], [2, 0, 1])
    assert np.array_equal(a.to_dense(), np.array([[0, 0, 1], [1, 1, 0]]))
    assert list(a.row_degrees) == [1.0, 2.0]
    assert list(a.col_sums) == [1.0, 1.0, 1.0]
    assert list(a.row(1)) == [0, 1]


def test_biadjacency_from_coordinates_rejects_duplicates():
    with pytest.raises(MalformedInput, match="duplicate"):
        Biadjacency.from_coordinates(2, 2, [0, 0], [1, 1])


def test_biadjacency_permute_rows():
    a = Biadjacency.from_dense(np.array([[1, 0], [0, 1], [1, 1]]))
    permuted = a.permute_rows([2, 0, 1])
    assert np.array_equal(permuted.to_dense(), np.array([[1, 1], [1, 0], [0, 1]]))
    assert not permuted.same_entries(a)
