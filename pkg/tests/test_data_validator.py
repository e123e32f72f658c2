import json

import pytest

from config import Config
from core.exceptions import InvalidParameters, MalformedInput
from utils.data_validator import BENCH_MODES, DataValidator


def _grid_config(**overrides):
    data = {'n1': 100, 'gamma1': 0.0, 'gamma2': 0.5, 'delta': 0.5, 'b_values': [0.5], 'a_min': 1.0, 'a_max': 10.0}
    data.update(overrides)
    return data


def test_load_json_reports_line(tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text('{\n  "n1": 100,\n  "delta": ,\n}\n')
    with pytest.raises(MalformedInput) as excinfo:
        DataValidator.load_json(str(path))
    assert excinfo.value.line == 3


def test_load_json_requires_object(tmp_path):
    path = tmp_path / 'list.json'
    path.write_text('[1, 2]')
    with pytest.raises(MalformedInput, match="JSON object"):
        DataValidator.load_json(str(path))


def test_grid_config_defaults():
    validated = DataValidator.validate_grid_config(_grid_config())
    assert validated['a_points'] == 20
    assert validated['replications'] == 1
    assert validated['methods'] == ['HL']
    assert validated['master_seed'] == Config.MASTER_SEED
    assert validated['eigen_solver'] == Config.EIGEN_SOLVER
    assert validated['a_brackets'] is None


def test_grid_config_coerces_scalars():
    validated = DataValidator.validate_grid_config(_grid_config(b_values=0.5, methods='SVD', n1=100.0))
    assert validated['b_values'] == [0.5]
    assert validated['methods'] == ['SVD']
    assert validated['n1'] == 100 and isinstance(validated['n1'], int)


@pytest.mark.parametrize("data, message", [
    ({'gamma1': 0.0}, "missing"),
    (_grid_config(a_step=2), "unknown experiment config keys"),
    (_grid_config(replications=2.5), "replications must be an integer"),
    (_grid_config(threads=True), "threads must be an integer"),
    (_grid_config(lloyd_max_iters='many'), "lloyd_max_iters must be an integer"),
    (_grid_config(n1=float('inf')), "n1 must be an integer"),
    (_grid_config(gamma1='abc'), "gamma1 must be a finite number"),
    (_grid_config(delta='half'), "delta must be a finite number"),
    (_grid_config(gamma2=float('nan')), "gamma2 must be a finite number"),
    (_grid_config(a_max=True), "a_max must be a finite number"),
    (_grid_config(b_values=['x']), "b_values entry must be a finite number"),
    (_grid_config(b_values='0.5'), "b_values must be a list of numbers"),
    (_grid_config(a_values=[1.0, None]), "a_values entry must be a finite number"),
    (_grid_config(a_brackets=[[1.0, 2.0, 3.0]]), "a_brackets must be a list of"),
    (_grid_config(a_brackets=[['lo', 'hi']]), "a_brackets entry must be a finite number"),
    (_grid_config(methods=[1]), "methods must be a list of method names"),
    (_grid_config(eigen_solver=3), "eigen_solver must be a string"),
])
def test_grid_config_errors(data, message):
    with pytest.raises(InvalidParameters, match=message):
        DataValidator.validate_grid_config(data)


def test_bench_modes():
    assert set(BENCH_MODES) == {'bernstein', 'hollow-moment', 'hollow-vs-debias', 'binomial-tail',
                                'oracle-impossibility'}


def test_bench_config_defaults_and_parsing():
    validated = DataValidator.validate_bench_config('oracle-impossibility',
                                                    {'n1_list': [100, 200.0], 'delta': 0.5, 'samples': 10})
    assert validated['n1_list'] == [100, 200]
    assert validated['p_scales'] == [1.0]
    assert validated['master_seed'] == Config.MASTER_SEED
    assert validated['threads'] == Config.THREADS

    binomial = DataValidator.validate_bench_config('binomial-tail', {})
    assert (binomial['points'], binomial['n_max']) == (200, 60)


def test_bench_config_errors():
    with pytest.raises(InvalidParameters, match="unknown concentration mode"):
        DataValidator.validate_bench_config('chernoff', {})
    with pytest.raises(InvalidParameters, match="missing 't_grid'"):
        DataValidator.validate_bench_config('bernstein', {'n1': 50, 'n2': 500, 'p': 0.05, 'delta': 0.5})
    with pytest.raises(InvalidParameters, match="unknown bernstein config keys"):
        DataValidator.validate_bench_config('bernstein', {'n1': 50, 'n2': 500, 'p': 0.05, 'delta': 0.5,
                                                          't_grid': [1], 'alpha': 0.1})
    with pytest.raises(InvalidParameters, match="t_grid entry must be a finite number"):
        DataValidator.validate_bench_config('bernstein', {'n1': 50, 'n2': 500, 'p': 0.05, 'delta': 0.5,
                                                          't_grid': ['x']})


def test_float_list_rejects_strings_and_scalars():
    assert DataValidator._as_float_list([1, 2.5], 'a_values') == [1.0, 2.5]
    with pytest.raises(InvalidParameters, match="a_values entry must be a finite number"):
        DataValidator._as_float_list([1, '2.5'], 'a_values')
    with pytest.raises(InvalidParameters, match="a_values must be a list of numbers"):
        DataValidator._as_float_list(5, 'a_values')


def test_results_csv_numeric_columns(tmp_path):
    path = tmp_path / 'results.csv'
    path.write_text('a,exact_rate,method\n1,0.5,HL\n2,0.75,HL\n')
    frame = DataValidator.validate_results_csv(str(path), ['a', 'exact_rate', 'method'], ['a', 'exact_rate'])
    assert list(frame['exact_rate']) == [0.5, 0.75]
    assert frame['method'].tolist() == ['HL', 'HL']


def test_results_csv_bad_cell_reports_line(tmp_path):
    path = tmp_path / 'results.csv'
    path.write_text('a,exact_rate,method\n1,0.5,HL\n2,oops,HL\n')
    with pytest.raises(MalformedInput, match="line 3: column 'exact_rate'"):
        DataValidator.validate_results_csv(str(path), ['a', 'exact_rate'], ['exact_rate'])


def test_results_csv_missing_column(tmp_path):
    path = tmp_path / 'results.csv'
    path.write_text('a,method\n1,HL\n')
    with pytest.raises(MalformedInput, match="missing columns"):
        DataValidator.validate_results_csv(str(path), ['a', 'exact_rate'])


def test_results_csv_empty(tmp_path):
    path = tmp_path / 'results.csv'
    path.write_text('')
    with pytest.raises(MalformedInput, match="empty"):
        DataValidator.validate_results_csv(str(path), ['a'])


def test_error_response_is_single_line():
    response = DataValidator.create_error_response(InvalidParameters("bad\nvalue"), 2)
    assert response == {'error': 'InvalidParameters', 'reason': 'bad value', 'exit_code': 2}
    assert '\n' not in json.dumps(response)
