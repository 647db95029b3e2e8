# src/uncertainty/timeseries.py
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.utils.exceptions import DataParseError
from src.utils.file_utils import save_table
from src.utils.logging_config import logger

COLUMNS = ("timestamp", "unit_id", "available_mw")


def load_timeseries(path: Union[str, Path]) -> Tuple[List[str], np.ndarray, pd.DatetimeIndex]:
    """
    Reads a long-format CSV (timestamp, unit_id, available_mw) and pivots it to
    a unit x period matrix. Every unit must report every timestamp.
    """
    path = Path(path)
    if not path.exists():
        raise DataParseError(f"Time-series file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataParseError(f"Could not parse time series {path}: {e}") from e

    missing = [c for c in COLUMNS if c not in frame.columns]
    if missing:
        raise DataParseError(f"{path}: missing columns {missing}")
    try:
        frame["timestamp"] = pd.to_datetime(frame["timestamp"])
        frame["available_mw"] = pd.to_numeric(frame["available_mw"])
    except (ValueError, TypeError) as e:
        raise DataParseError(f"{path}: bad timestamp or value: {e}") from e
    frame["unit_id"] = frame["unit_id"].astype(str)
    if frame.duplicated(subset=["timestamp", "unit_id"]).any():
        raise DataParseError(f"{path}: duplicate (timestamp, unit_id) rows")

    wide = frame.pivot(index="unit_id", columns="timestamp", values="available_mw")
    # Preserve first-appearance order of units
    units = list(dict.fromkeys(frame["unit_id"]))
    wide = wide.loc[units].sort_index(axis=1)
    if wide.isna().any().any():
        raise DataParseError(f"{path}: missing values after pivot ({int(wide.isna().sum().sum())} gaps)")
    if (wide.to_numpy() < 0).any():
        raise DataParseError(f"{path}: negative availability")
    logger.info(f"Loaded time series for {len(units)} units over {wide.shape[1]} periods from {path}")
    return units, wide.to_numpy(dtype=float), pd.DatetimeIndex(wide.columns)


def timeseries_frame(unit_ids: Sequence[str], values: np.ndarray,
                     start: str = "2024-01-01", freq: str = "h") -> pd.DataFrame:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    stamps = pd.date_range(start, periods=values.shape[1], freq=freq)
    return pd.DataFrame({
        "timestamp": np.tile(stamps, len(unit_ids)),
        "unit_id": np.repeat(list(unit_ids), values.shape[1]),
        "available_mw": values.reshape(-1),
    })


def save_timeseries(unit_ids: Sequence[str], values: np.ndarray, filename,
                    output_dir: Optional[Union[str, Path]] = None, start: str = "2024-01-01") -> Path:
    return save_table(timeseries_frame(unit_ids, values, start), filename, output_dir)
