"""
Utils for experiment output.

Summary statistics of trajectories, the iteration thinning rule and the
CSV writer.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np

from ..models import ExperimentCell

logger = logging.getLogger(__name__)

CSV_HEADER = ["method", "gamma", "run", "iteration", "sq_dist", "lyapunov"]

DENSE_RECORDING_LIMIT = 1000
THINNING_STRIDE = 10


def format_float(value: float) -> str:
    """Shortest decimal text that reads back to the same float"""
    return repr(float(value))


def recorded_iterations(num_iterations: int) -> np.ndarray:
    """Every iteration up to 1000, every 10th after that"""
    k = np.arange(num_iterations + 1)
    return k[(k <= DENSE_RECORDING_LIMIT) | (k % THINNING_STRIDE == 0)]


def calculate_statistics(values: Iterable[float]) -> Dict[str, float]:
    """
    Basic statistics of finite values.

    Args:
        values: numbers, infinities and NaNs are dropped

    Returns:
        Dictionary with count, mean, min, max, std, median and range
    """
    values = np.asarray(list(values), dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return {'count': 0}

    return {
        'count': int(values.size),
        'mean': float(values.mean()),
        'min': float(values.min()),
        'max': float(values.max()),
        'std': float(values.std(ddof=1)) if values.size > 1 else 0.0,
        'median': float(np.median(values)),
        'range': float(values.max() - values.min()),
    }


def time_average(series: np.ndarray, start: int, stop: Optional[int] = None) -> float:
    """Mean of series[start:stop + 1], the empirical neighborhood of a converged run"""
    stop = len(series) - 1 if stop is None else stop
    if not 0 <= start <= stop < len(series):
        raise ValueError(f"Window [{start}, {stop}] outside a series of length {len(series)}")
    return float(np.mean(series[start:stop + 1]))


def write_trajectory_csv(path: Union[str, Path], cells: List[ExperimentCell]) -> int:
    """
    Write one row per (method, gamma, run, recorded iteration).

    Rows follow the order of cells, then run index, then iteration. The
    lyapunov column is empty for cells without a Lyapunov weight.

    Returns:
        Number of data rows written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        for cell in cells:
            gamma = format_float(cell.gamma)
            for trajectory in sorted(cell.result.trajectories, key=lambda t: t.run_index):
                for k in recorded_iterations(trajectory.iterations):
                    lyapunov = trajectory.lyapunov
                    writer.writerow({
                        "method": cell.label,
                        "gamma": gamma,
                        "run": trajectory.run_index,
                        "iteration": int(k),
                        "sq_dist": format_float(trajectory.sq_dist[k]),
                        "lyapunov": "" if lyapunov is None else format_float(lyapunov[k]),
                    })
                    rows += 1

    logger.info(f"Wrote {rows} rows to {path}")
    return rows
