'''
Dataset files holding point sets.

* fvecs -- per record a little-endian int32 d followed by d little-endian float32 values; all records share d.
  Values are widened to float64 on read and narrowed to float32 on write (lossy for float64 data).
* csv -- one point per row, numeric columns, no header.
* jsonl -- one object per line with a numeric array field "vec" and an optional string field "entity".
'''

import json
import numpy as np
import pandas as pd
import pathlib
import sys

proj_root = pathlib.Path(__file__).parent.parent
sys.path.append(proj_root)

from process.geometry import PointSet
from utils.general import UsageError

FORMATS = ('fvecs', 'csv', 'jsonl')

SUFFIX_FORMATS = {
    '.fvecs': 'fvecs',
    '.csv': 'csv',
    '.jsonl': 'jsonl',
    '.ndjson': 'jsonl',
}

def infer_format(path: str | pathlib.Path, file_format: str | None = None) -> str:
    '''
    Returns file_format when given, otherwise the format implied by the file suffix.

    Raises:
        * UsageError -- Unknown format or suffix.
    '''
    if file_format is not None:
        if file_format not in FORMATS:
            raise UsageError(f'Unknown dataset format "{file_format}", expected one of {FORMATS}.')
        return file_format
    suffix = pathlib.Path(path).suffix.lower()
    if suffix not in SUFFIX_FORMATS:
        raise UsageError(f'Cannot infer the dataset format of {path}; pass one of {FORMATS}.')
    return SUFFIX_FORMATS[suffix]

def read_fvecs(path: str | pathlib.Path) -> np.ndarray:
    if pathlib.Path(path).stat().st_size % 4 != 0:
        raise UsageError(f'{path}: truncated fvecs file, size is not a multiple of 4 bytes.')
    raw = np.fromfile(path, dtype='<i4')
    if raw.size == 0:
        raise UsageError(f'{path}: empty fvecs file.')
    dim = int(raw[0])
    if dim < 1 or raw.size % (dim + 1) != 0:
        raise UsageError(f'{path}: record size does not match dimension {dim}.')
    records = raw.reshape(-1, dim + 1)
    if not np.all(records[:, 0] == dim):
        raise UsageError(f'{path}: records do not share one dimension.')
    return records[:, 1:].view('<f4').astype(np.float64)

def write_fvecs(points: np.ndarray, path: str | pathlib.Path) -> None:
    points = np.ascontiguousarray(points, dtype='<f4')
    records = np.empty((points.shape[0], points.shape[1] + 1), dtype='<i4')
    records[:, 0] = points.shape[1]
    records[:, 1:] = points.view('<i4')
    records.tofile(path)

def read_csv(path: str | pathlib.Path) -> np.ndarray:
    try:
        df = pd.read_csv(path, header=None, float_precision='round_trip')
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise UsageError(f'{path}: {e}') from e
    try:
        return df.to_numpy(dtype=np.float64)
    except ValueError as e:
        raise UsageError(f'{path}: non-numeric value ({e}).') from e

def write_csv(points: np.ndarray, path: str | pathlib.Path) -> None:
    # repr precision keeps float64 coordinates exact on read back
    pd.DataFrame(points).to_csv(path, header=False, index=False, float_format='%.17g')

def read_jsonl(path: str | pathlib.Path) -> pd.DataFrame:
    '''
    Returns a DataFrame with columns entity (None where absent) and vec (lists of floats), in file order.
    '''
    try:
        df = pd.read_json(path, lines=True, dtype=False, precise_float=True)
    except ValueError as e:
        raise UsageError(f'{path}: {e}') from e
    if 'vec' not in df.columns:
        raise UsageError(f'{path}: jsonl records need a "vec" field.')
    if 'entity' not in df.columns:
        df['entity'] = None
    df['entity'] = df['entity'].where(df['entity'].notna(), None)
    return df[['entity', 'vec']]

def write_jsonl(entities: dict[str | None, np.ndarray], path: str | pathlib.Path) -> None:
    with open(path, 'w') as file:
        for entity, points in entities.items():
            for row in np.asarray(points, dtype=np.float64):
                record = {'vec': row.tolist()} if entity is None else {'entity': entity, 'vec': row.tolist()}
                file.write(json.dumps(record) + '\n')

def read_point_set(path: str | pathlib.Path, file_format: str | None = None, entity: str | None = None) -> PointSet:
    '''
    Reads one PointSet from a dataset file.

    Args:
        * path (str | Path) -- Dataset file.
        * file_format (str | None, optional) -- 'fvecs', 'csv' or 'jsonl'; inferred from the suffix when None.
        * entity (str | None, optional) -- jsonl only: keep the rows of this entity. Defaults to None (all rows).

    Raises:
        * UsageError -- Missing file, parse failure, unknown entity, or rows that do not form a valid PointSet.

    Returns:
        * PointSet -- Points in file order, as float64.
    '''
    path = pathlib.Path(path)
    if not path.exists():
        raise UsageError(f'{path} not found.')
    file_format = infer_format(path, file_format)

    if entity is not None and file_format != 'jsonl':
        raise UsageError('Entities can only be selected from jsonl files.')

    if file_format == 'fvecs':
        points = read_fvecs(path)
    elif file_format == 'csv':
        points = read_csv(path)
    else:
        df = read_jsonl(path)
        if entity is not None:
            df = df[df['entity'] == entity]
            if df.empty:
                raise UsageError(f'{path}: no rows for entity "{entity}".')
        if df.empty:
            raise UsageError(f'{path}: no rows.')
        try:
            points = np.array(df['vec'].to_list(), dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise UsageError(f'{path}: "vec" fields must be numeric arrays of one length ({e}).') from e

    try:
        return PointSet(points)
    except UsageError as e:
        raise UsageError(f'{path}: {e}') from e

def write_point_set(s: PointSet, path: str | pathlib.Path, file_format: str | None = None, entity: str | None = None) -> None:
    file_format = infer_format(path, file_format)
    if file_format == 'fvecs':
        write_fvecs(s.points, path)
    elif file_format == 'csv':
        write_csv(s.points, path)
    else:
        write_jsonl({entity: s.points}, path)

def write_pair(a: PointSet, b: PointSet, out_dir: str | pathlib.Path, file_format: str = 'jsonl', stem: str = 'pair') -> list[pathlib.Path]:
    '''
    Writes a generated pair. jsonl puts both sets in one file as entities "A" and "B";
    the other formats write <stem>_a and <stem>_b files.

    Returns:
        * list[Path] -- Files written.
    '''
    file_format = infer_format('', file_format)
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if file_format == 'jsonl':
        path = out_dir / f'{stem}.jsonl'
        write_jsonl({'A': a.points, 'B': b.points}, path)
        return [path]

    paths = [out_dir / f'{stem}_a.{file_format}', out_dir / f'{stem}_b.{file_format}']
    write_point_set(a, paths[0], file_format)
    write_point_set(b, paths[1], file_format)
    return paths
