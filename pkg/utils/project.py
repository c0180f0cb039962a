import ast
from dataclasses import dataclass, field
import os
import pandas as pd
import pathlib
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from process.approximation import ApproxConfig
from utils.general import UsageError

PLANS_DIR_ENV = 'HAUSDORFF_PLANS_DIR'

VERIFY_PLAN_COLUMNS = ('SUITE', 'CHECK', 'HARD', 'TOLERANCE', 'PARAMS')
SCHEMA_PLAN_COLUMNS = ('FIELD', 'DTYPE', 'DECIMALS')

def plans_dir() -> pathlib.Path:
    '''
    Directory holding the plans: $HAUSDORFF_PLANS_DIR when set, otherwise planning/ in the project root.
    '''
    return pathlib.Path(os.getenv(PLANS_DIR_ENV, proj_root / 'planning'))

def load_plan(name: str, columns: tuple[str, ...] | None = None) -> pd.DataFrame:
    '''
    Reads planning/<name>.tsv.

    Raises:
        * UsageError -- Missing plan file or missing columns.
    '''
    path = plans_dir() / f'{name}.tsv'
    if not path.exists():
        raise UsageError(f'Plan not found: {path}')
    plan = pd.read_csv(path, delimiter='\t', dtype=str, keep_default_na=False)
    if columns is not None:
        missing = [c for c in columns if c not in plan.columns]
        if missing:
            raise UsageError(f'{path} is missing columns {missing}.')
    return plan

def _parse_bool(value: str) -> bool:
    if value.strip().lower() in ('true', '1', 'yes'):
        return True
    if value.strip().lower() in ('false', '0', 'no', ''):
        return False
    raise UsageError(f'Cannot read "{value}" as a boolean.')

def write_suite_checks_dict(verify_plan: pd.DataFrame, suite: str) -> list[dict]:
    '''
    Create a list of {'suite', 'check', 'hard', 'tolerance', 'params'} dictionaries from the verify_plan DF
    for a given suite ('all' keeps every row), in plan order. Empty TOLERANCE means the check's default;
    PARAMS holds a Python literal dict.
    '''
    suites = verify_plan['SUITE'].unique().tolist()
    if suite != 'all' and suite not in suites:
        raise UsageError(f'Unknown suite "{suite}", expected one of {suites + ["all"]}.')

    rows = verify_plan if suite == 'all' else verify_plan[verify_plan['SUITE'] == suite]

    checks = []
    for row in rows.itertuples(index=False):
        try:
            params = ast.literal_eval(row.PARAMS) if row.PARAMS.strip() else {}
            tolerance = float(row.TOLERANCE) if row.TOLERANCE.strip() else None
        except (ValueError, SyntaxError) as e:
            raise UsageError(f'Malformed verify_plan row {row.SUITE}/{row.CHECK}: {e}') from e
        checks.append(
            {
                'suite': row.SUITE,
                'check': row.CHECK,
                'hard': _parse_bool(row.HARD),
                'tolerance': tolerance,
                'params': params,
            }
        )

    return checks

@dataclass(frozen=True)
class RunConfig:
    '''
    Settings shared by the CLI commands. approx_config() validates them into an ApproxConfig.
    '''
    mode: str = 'cached'
    backend: str = 'exact'
    eps: float | None = None
    params: dict = field(default_factory=dict)
    uncovered_policy: str = 'fallback'
    swap_policy: str = 'smaller'
    seed: int = 0
    workers: int = 1
    tolerances: dict[str, float] = field(default_factory=dict)

    def approx_config(self) -> ApproxConfig:
        params = dict(self.params)
        if self.eps is not None:
            params['eps'] = self.eps
        return ApproxConfig(
            mode=self.mode,
            backend=self.backend,
            params=params,
            uncovered_policy=self.uncovered_policy,
            swap_policy=self.swap_policy,
            workers=self.workers
        )
