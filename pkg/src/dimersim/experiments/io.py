__all__ = ['write_csv', 'write_json', 'write_artifacts', 'FLOAT_FORMAT']

import json
import logging
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.12g'


def write_csv(df: pd.DataFrame, path):
    """Write a table as comma-separated values.

    Parameters
    ----------
    df : pandas.DataFrame
        The table, written with a header row and without index.
    path : str | Path
        Path to the output CSV file.
    """
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if not np.isfinite(value):
            return None
        return float(FLOAT_FORMAT % value)
    if isinstance(value, complex):
        return [_jsonable(value.real), _jsonable(value.imag)]
    return value


def write_json(report: dict, path):
    """Write a report as JSON with sorted keys; floats keep 12 significant digits."""
    with open(path, 'w') as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write('\n')


def write_artifacts(artifacts: Dict[str, object], out_dir: Path, name: str) -> List[Path]:
    """Write tables as CSV and reports as JSON, named after the experiment."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for key, artifact in artifacts.items():
        stem = name if key == name else f'{name}_{key}'
        if isinstance(artifact, pd.DataFrame):
            path = out_dir / f'{stem}.csv'
            write_csv(artifact, path)
        else:
            path = out_dir / f'{stem}.json'
            write_json(artifact, path)
        logger.info(f'Wrote {path}')
        paths.append(path)
    return paths
