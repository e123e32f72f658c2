"""
Data Validator - Check experiment and bench configs and result CSVs, with
meaningful error messages
"""
import json
import math
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from config import Config
from core.exceptions import InvalidParameters, MalformedInput

# Required keys per bench mode; None marks a key without a default
BENCH_FIELDS = {
    'bernstein': {'n1': None, 'n2': None, 'p': None, 'delta': None, 't_grid': None, 'samples': 2000},
    'hollow-moment': {'n1_list': None, 'n2_factor': None, 'p_factor': None, 'delta': None, 'samples': 200},
    'hollow-vs-debias': {'n1': None, 'n2': None, 'p': None, 'delta': None, 'samples': 300, 'gamma2': 0.0},
    'binomial-tail': {'points': 200, 'n_max': 60},
    'oracle-impossibility': {'n1_list': None, 'delta': None, 'samples': None, 'p_scales': [1.0]},
}

BENCH_MODES = tuple(BENCH_FIELDS)


class DataValidator:
    """Validate and normalize configs and tabular results"""

    @staticmethod
    def load_json(path: str) -> Dict:
        """Parse a JSON object; syntax errors carry their line number"""
        with open(path, 'r', encoding='utf-8') as fh:
            text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"invalid JSON in {path}: {exc.msg}", line=exc.lineno)
        if not isinstance(data, dict):
            raise MalformedInput(f"{path} must hold a JSON object")
        return data

    @staticmethod
    def _check_keys(data: Dict, allowed: Sequence[str], what: str):
        unknown = sorted(set(data) - set(allowed))
        if unknown:
            raise InvalidParameters(f"unknown {what} keys: {unknown}")

    @staticmethod
    def validate_grid_config(data: Dict) -> Dict:
        """Apply defaults to an experiment config; keys match ExperimentGrid fields"""
        required_fields = ['n1', 'gamma1', 'gamma2', 'delta', 'b_values']
        defaults = {
            'a_min': None,
            'a_max': None,
            'a_points': 20,
            'replications': 1,
            'methods': ['HL'],
            'master_seed': Config.MASTER_SEED,
            'threads': Config.THREADS,
            'eigen_solver': Config.EIGEN_SOLVER,
            'a_values': None,
            'a_brackets': None,
            'lloyd_max_iters': None,
        }
        DataValidator._check_keys(data, required_fields + list(defaults), 'experiment config')

        missing = [name for name in required_fields if name not in data]
        if missing:
            raise InvalidParameters(f"experiment config is missing {missing}")

        validated = dict(defaults)
        validated.update(data)
        for name in ('n1', 'a_points', 'replications', 'master_seed', 'threads'):
            validated[name] = DataValidator._as_int(validated[name], name)
        if validated['lloyd_max_iters'] is not None:
            validated['lloyd_max_iters'] = DataValidator._as_int(validated['lloyd_max_iters'], 'lloyd_max_iters')
        for name in ('gamma1', 'gamma2', 'delta'):
            validated[name] = DataValidator._as_float(validated[name], name)
        for name in ('a_min', 'a_max'):
            if validated[name] is not None:
                validated[name] = DataValidator._as_float(validated[name], name)
        if isinstance(validated['b_values'], (int, float)) and not isinstance(validated['b_values'], bool):
            validated['b_values'] = [validated['b_values']]
        validated['b_values'] = DataValidator._as_float_list(validated['b_values'], 'b_values')
        if validated['a_values'] is not None:
            validated['a_values'] = DataValidator._as_float_list(validated['a_values'], 'a_values')
        if validated['a_brackets'] is not None:
            brackets = validated['a_brackets']
            if not isinstance(brackets, list) or not all(isinstance(pair, list) and len(pair) == 2
                                                         for pair in brackets):
                raise InvalidParameters(f"a_brackets must be a list of [a_min, a_max] pairs, got {brackets!r}")
            validated['a_brackets'] = [DataValidator._as_float_list(pair, 'a_brackets') for pair in brackets]
        if isinstance(validated['methods'], str):
            validated['methods'] = [validated['methods']]
        if not isinstance(validated['methods'], list) or not all(isinstance(m, str) for m in validated['methods']):
            raise InvalidParameters(f"methods must be a list of method names, got {validated['methods']!r}")
        if not isinstance(validated['eigen_solver'], str):
            raise InvalidParameters(f"eigen_solver must be a string, got {validated['eigen_solver']!r}")
        return validated

    @staticmethod
    def validate_bench_config(mode: str, data: Dict) -> Dict:
        if mode not in BENCH_FIELDS:
            raise InvalidParameters(f"unknown concentration mode '{mode}', expected one of {list(BENCH_MODES)}")
        fields = BENCH_FIELDS[mode]
        DataValidator._check_keys(data, list(fields) + ['master_seed', 'threads'], f"{mode} config")

        validated = {}
        for name, default in fields.items():
            if name in data:
                validated[name] = data[name]
            elif default is None:
                raise InvalidParameters(f"{mode} config is missing '{name}'")
            else:
                validated[name] = default
        for name in ('samples', 'points', 'n_max', 'n1', 'n2'):
            if name in validated:
                validated[name] = DataValidator._as_int(validated[name], name)
        for name in ('p', 'delta', 'gamma2', 'n2_factor', 'p_factor'):
            if name in validated:
                validated[name] = DataValidator._as_float(validated[name], name)
        for name in ('t_grid', 'p_scales'):
            if name in validated:
                validated[name] = DataValidator._as_float_list(validated[name], name)
        if 'n1_list' in validated:
            if not isinstance(validated['n1_list'], list):
                raise InvalidParameters(f"n1_list must be a list of integers, got {validated['n1_list']!r}")
            validated['n1_list'] = [DataValidator._as_int(n, 'n1_list entry') for n in validated['n1_list']]
        validated['master_seed'] = DataValidator._as_int(data.get('master_seed', Config.MASTER_SEED),
                                                         'master_seed')
        validated['threads'] = DataValidator._as_int(data.get('threads', Config.THREADS), 'threads')
        return validated

    @staticmethod
    def _as_int(value: Any, name: str) -> int:
        if (isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value)
                or int(value) != value):
            raise InvalidParameters(f"{name} must be an integer, got {value!r}")
        return int(value)

    @staticmethod
    def _as_float(value: Any, name: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise InvalidParameters(f"{name} must be a finite number, got {value!r}")
        return float(value)

    @staticmethod
    def _as_float_list(values: Any, name: str) -> List[float]:
        if not isinstance(values, (list, tuple)):
            raise InvalidParameters(f"{name} must be a list of numbers, got {values!r}")
        return [DataValidator._as_float(v, f"{name} entry") for v in values]

    @staticmethod
    def validate_results_csv(path: str, required: Sequence[str],
                             numeric: Optional[Sequence[str]] = None) -> pd.DataFrame:
        """Load a results CSV, checking columns and numeric cells row by row"""
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except pd.errors.EmptyDataError:
            raise MalformedInput(f"{path} is empty", line=1)
        except pd.errors.ParserError as exc:
            raise MalformedInput(f"cannot parse {path}: {exc}")

        missing = [col for col in required if col not in frame.columns]
        if missing:
            raise MalformedInput(f"missing columns {missing} in {path}", line=1)

        for col in numeric or []:
            values = pd.to_numeric(frame[col], errors='coerce')
            bad = values.isna()
            if bad.any():
                row = int(bad.idxmax())
                # header is line 1
                raise MalformedInput(f"column '{col}' has non-numeric value '{frame[col].iloc[row]}'",
                                     line=row + 2)
            frame[col] = values
        return frame

    @staticmethod
    def create_error_response(error: Exception, exit_code: int) -> Dict:
        """Single-line machine-parseable error payload"""
        return {
            'error': type(error).__name__,
            'reason': ' '.join(str(error).split()),
            'exit_code': exit_code,
        }
