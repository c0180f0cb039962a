'''
Report records and table formatting.

Records are plain dicts with a fixed key order, written one JSON object per line. Non-finite floats
become the strings "inf", "-inf" and "nan"; fields whose names end in _seconds are the only ones that
change between identical runs.
'''

from dataclasses import fields, is_dataclass
import json
import math
import numpy as np
import pandas as pd
import pathlib
from typing import Any, IO, Iterable
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from process.approximation import ApproxConfig, ApproxResult
from process.error_analysis import ErrorBoundReport
from process.oracle import DirectedResult, HausdorffResult
from process.robustness import RobustnessReport

def to_json_value(value: Any) -> Any:
    '''
    Recursively converts numpy scalars and arrays, tuples, dataclasses and non-finite floats into JSON-ready values.
    '''
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if isinstance(value, np.ndarray):
        return [to_json_value(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): to_json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_json_value(v) for v in value]
    if is_dataclass(value):
        return {f.name: to_json_value(getattr(value, f.name)) for f in fields(value)}
    return value

def dumps_record(record: dict) -> str:
    return json.dumps(to_json_value(record), allow_nan=False)

def write_records(records: Iterable[dict], stream: IO[str]) -> None:
    for record in records:
        stream.write(dumps_record(record) + '\n')

def _directed(result: DirectedResult) -> dict:
    return {'value': result.value, 'witness_src': result.witness_src, 'witness_dst': result.witness_dst}

def oracle_record(result: HausdorffResult, m: int, n: int, d: int, wall_seconds: float) -> dict:
    return {
        'record': 'oracle',
        'value': result.value,
        'forward': _directed(result.forward),
        'backward': _directed(result.backward),
        'mode': result.mode,
        'm': m,
        'n': n,
        'd': d,
        'wall_seconds': wall_seconds,
    }

def approx_record(result: ApproxResult, cfg: ApproxConfig, seed: int, m: int, n: int, d: int, wall_seconds: float) -> dict:
    return {
        'record': 'compute',
        'value': result.value,
        'forward_sup': result.forward_sup,
        'backward_sup': result.backward_sup,
        'mode': result.mode,
        'backend': result.backend,
        'epsilon': result.contract.epsilon,
        'guaranteed': result.contract.guaranteed,
        'params': dict(cfg.params),
        'uncovered_policy': cfg.uncovered_policy,
        'swap_policy': cfg.swap_policy,
        'indexed_side': result.indexed_side,
        'query_count': result.query_count,
        'visit_count': result.visit_count,
        'uncovered_count': result.uncovered_count,
        'fallback_cost': result.fallback_cost,
        'm': m,
        'n': n,
        'd': d,
        'seed': seed,
        'wall_seconds': wall_seconds,
    }

def error_report_record(report: ErrorBoundReport) -> dict:
    return {'record': 'error_report', **to_json_value(report)}

def check_record(report: RobustnessReport) -> dict:
    return {'record': 'check', **to_json_value(report)}

def summary_record(suite: str, summary: dict) -> dict:
    return {'record': 'summary', 'suite': suite, **summary}

def format_fields(table: pd.DataFrame, schema_plan: pd.DataFrame) -> pd.DataFrame:
    '''
    Enforces the dtypes and rounding listed in the schema plan on the columns the table has.
    Columns without a plan row are left as they are.

    Args:
        * table (pd.DataFrame) -- bench, probe or sweep table.
        * schema_plan (pd.DataFrame) -- Loaded from planning/schema_plan.tsv (FIELD, DTYPE, DECIMALS).

    Returns:
        * pd.DataFrame -- Formatted copy.
    '''
    table = table.copy()
    plan = schema_plan[schema_plan['FIELD'].isin(table.columns)]

    for row in plan.itertuples(index=False):
        table[row.FIELD] = table[row.FIELD].astype(row.DTYPE)
        if str(row.DECIMALS).strip():
            table[row.FIELD] = table[row.FIELD].round(int(row.DECIMALS))

    return table
