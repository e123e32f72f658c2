import json
import math

import numpy as np
import pandas as pd
import pytest

from core.estimators import Method
from core.exceptions import InvalidParameters, NoTransitionFound
from core.experiment_runner import (RESULT_COLUMNS, ExperimentGrid, ExperimentRunner, ResultRow,
                                    pilot_bracket)


def _grid(**overrides):
    values = dict(n1=30, gamma1=0.0, gamma2=0.5, delta=0.5, b_values=[0.5], a_min=5.0, a_max=60.0,
                  a_points=3, replications=3, methods=['SVD', 'HL', 'DS', 'O'], master_seed=11, threads=1)
    values.update(overrides)
    return ExperimentGrid(**values)


def test_grid_validation_and_method_order():
    grid = _grid(methods=['O', 'HL', 'SVD', 'HL'])
    assert grid.methods == [Method.HOLLOWED_LLOYD, Method.SVD, Method.ORACLE]
    assert np.allclose(grid.a_grid(), np.linspace(5.0, 60.0, 3))


@pytest.mark.parametrize("overrides, message", [
    ({'a_points': 1}, "a_points must be >= 2"),
    ({'a_min': 10.0, 'a_max': 5.0}, "a_min must be < a_max"),
    ({'a_max': None}, "a_min and a_max are required"),
    ({'replications': 0}, "replications must be >= 1"),
    ({'threads': 0}, "threads must be >= 1"),
    ({'b_values': []}, "b_values must not be empty"),
    ({'methods': ['HL', 'kmeans']}, "unknown method"),
    ({'eigen_solver': 'qr'}, "unknown eigensolver"),
    ({'a_brackets': [[1.0, 2.0], [3.0, 4.0]]}, "one [a_min, a_max] per b value"),
    ({'a_values': [1.0]}, "at least 2 points"),
])
def test_grid_rejects_invalid_settings(overrides, message):
    with pytest.raises(InvalidParameters, match=message.replace('[', r'\[').replace(']', r'\]')):
        _grid(**overrides)


def test_grid_checks_lloyd_cap_before_sampling(monkeypatch):
    sampled = []
    monkeypatch.setattr('core.experiment_runner.sample_bsbm', lambda *args: sampled.append(args))
    with pytest.raises(InvalidParameters, match="lloyd_max_iters must be >= 2"):
        _grid(methods=['HL'], lloyd_max_iters=1)
    assert sampled == []
    assert _grid(methods=['SVD'], lloyd_max_iters=1).lloyd_max_iters == 1
    assert _grid(methods=['HL'], lloyd_max_iters=2).estimator_config(Method.HOLLOWED_LLOYD).lloyd_cap(30) == 2


def test_grid_rejects_invalid_derived_params():
    # b = 5 with n1 = 30 gives n2 < n1
    with pytest.raises(InvalidParameters, match="n1 must be <= n2"):
        _grid(b_values=[0.5, 5.0])
    # a = 300 gives p = sqrt(300) / 30 > 1/2
    with pytest.raises(InvalidParameters, match="p must be in"):
        _grid(a_max=300.0)


def test_grid_explicit_values_and_brackets():
    grid = _grid(a_values=[2.0, 4.0, 8.0, 16.0])
    assert grid.a_points == 4
    assert list(grid.a_grid()) == [2.0, 4.0, 8.0, 16.0]

    bracketed = _grid(b_values=[0.5, 1.0], a_min=None, a_max=None, a_brackets=[[1.0, 3.0], [2.0, 6.0]])
    assert list(bracketed.a_grid(0)) == [1.0, 2.0, 3.0]
    assert list(bracketed.a_grid(1)) == [2.0, 4.0, 6.0]


def test_grid_dict_round_trip_rejects_unknown_keys():
    grid = _grid()
    data = grid.to_dict()
    assert data['methods'] == ['HL', 'SVD', 'DS', 'O']
    assert ExperimentGrid.from_dict(data).to_dict() == data
    with pytest.raises(InvalidParameters, match="unknown experiment config keys"):
        ExperimentGrid.from_dict({**data, 'a_step': 1.0})


def test_run_grid_row_layout():
    grid = _grid()
    rows = ExperimentRunner(grid).run_grid()
    assert len(rows) == 1 * 3 * 4
    assert [r.method for r in rows[:4]] == ['HL', 'SVD', 'DS', 'O']
    for row in rows:
        params = grid.params_at(row.a, row.b)
        assert row.p == params.p
        assert row.n2 == params.n2 == int(math.floor(30 * math.log(30) / 0.5 + 0.5))
        assert row.replications == 3
        assert 0.0 <= row.exact_rate <= 1.0
        assert 0.0 <= row.mean_fraction <= 0.5
        assert row.wall_ms == 0.0
        assert row.degenerate_inputs == 0


def test_run_grid_is_deterministic_and_thread_invariant(tmp_path):
    grid = _grid(b_values=[0.3, 0.5], replications=4)
    runner = ExperimentRunner(grid)
    single = tmp_path / 'single.csv'
    pooled = tmp_path / 'pooled.csv'
    runner.write_csv(runner.run_grid(threads=1), str(single))
    runner.write_csv(ExperimentRunner(grid).run_grid(threads=4), str(pooled))
    assert single.read_bytes() == pooled.read_bytes()


def test_strong_signal_is_exact_for_hl_and_oracle():
    grid = _grid(n1=40, b_values=[0.5], a_values=[150.0, 200.0], replications=5, methods=['HL', 'O'])
    rows = ExperimentRunner(grid).run_grid()
    assert all(row.exact_rate == 1.0 for row in rows)
    assert all(row.mean_fraction == 0.0 for row in rows)


def test_shared_instances_make_ds_equal_svd_when_balanced():
    grid = _grid(gamma2=0.0, a_values=[40.0, 60.0], methods=['SVD', 'DS'], replications=4)
    rows = ExperimentRunner(grid).run_grid()
    by_method = {}
    for row in rows:
        by_method.setdefault(row.method, []).append((row.exact_rate, row.mean_fraction))
    assert by_method['SVD'] == by_method['DS']


def test_write_csv_header_and_metadata(tmp_path):
    grid = _grid(methods=['HL', 'DS'])
    runner = ExperimentRunner(grid)
    rows = runner.run_grid()
    csv_path = tmp_path / 'results.csv'
    runner.write_csv(rows, str(csv_path))
    assert csv_path.read_text().splitlines()[0] == ','.join(RESULT_COLUMNS)
    frame = pd.read_csv(csv_path)
    assert len(frame) == 6

    meta_path = tmp_path / 'results.csv.meta.json'
    runner.write_metadata(rows, str(meta_path))
    meta = json.loads(meta_path.read_text())
    assert meta['grid']['methods'] == ['HL', 'DS']
    assert set(meta['truth_channel']) == {'DS'}
    assert meta['degenerate'] == []


def test_result_row_csv_record():
    row = ResultRow(b=0.5, a=2.0, p=0.1, n2=50, method='HL', replications=3, exact_rate=1.0,
                    mean_fraction=0.0, mean_lloyd_iters=2.0, wall_ms=0.0, degenerate_inputs=1)
    assert list(row.csv_record()) == RESULT_COLUMNS


def _step(threshold: float):
    return lambda a: 1.0 if a >= threshold else 0.0


def test_pilot_bracket_contains_crossing():
    lo, hi = pilot_bracket(100, 0.0, 0.5, 0.5, b=0.5, replications=1, success_fn=_step(3.0))
    assert lo < 3.0 < hi
    probes = 0.5 * np.logspace(-3, 3, 13)
    below = probes[probes < 3.0].max()
    above = probes[probes >= 3.0].min()
    assert lo == pytest.approx(below / 1.2)
    assert hi == pytest.approx(above * 1.2)


def test_pilot_bracket_skips_invalid_probes():
    seen = []

    def rate(a):
        seen.append(a)
        return 1.0 if a >= 1.0 else 0.0

    # centre b^2 = 4 puts the top probe at a = 4000, where p = sqrt(a) / n1 > 1/2
    pilot_bracket(100, 0.0, 0.5, 0.5, b=2.0, replications=1, success_fn=rate)
    assert max(seen) < 2500.0
    assert len(seen) == 12


@pytest.mark.parametrize("level", [0.0, 1.0, 0.5])
def test_pilot_bracket_flat_success_raises(level):
    with pytest.raises(NoTransitionFound):
        pilot_bracket(100, 0.0, 0.5, 0.5, b=0.5, replications=1, success_fn=lambda a: level)


def test_pilot_bracket_monte_carlo_small():
    lo, hi = pilot_bracket(40, 0.0, 0.0, 0.5, b=0.5, replications=4, master_seed=3)
    assert 0 < lo < hi


def test_pilot_bracket_rejects_zero_replications():
    with pytest.raises(InvalidParameters):
        pilot_bracket(100, 0.0, 0.5, 0.5, b=0.5, replications=0)
