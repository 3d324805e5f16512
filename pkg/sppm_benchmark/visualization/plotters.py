"""
Convergence charts.

One panel per stepsize setting, log-scale mean squared distance per
method. Output is a self-contained SVG whose bytes depend only on the data.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ..core.utils import format_float
from ..models import ExperimentCell

logger = logging.getLogger(__name__)

SVG_RC = {
    "svg.hashsalt": "sppm-benchmark",
    "svg.fonttype": "path",
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _panel_title(setting: Union[float, str]) -> str:
    if isinstance(setting, str):
        return "gamma: theory"
    return f"gamma = {setting:g}"


def group_by_stepsize(cells: List[ExperimentCell]) -> Dict[str, List[ExperimentCell]]:
    """Cells keyed by their configured stepsize, in first-seen order"""
    groups: Dict[str, List[ExperimentCell]] = {}
    for cell in cells:
        key = cell.gamma_setting if isinstance(cell.gamma_setting, str) else format_float(cell.gamma_setting)
        groups.setdefault(key, []).append(cell)
    return groups


def plot_convergence(cells: List[ExperimentCell], path: Union[str, Path],
                     title: Optional[str] = None) -> Path:
    """
    Save mean ||x_k - x*||^2 curves as SVG.

    Args:
        cells: experiment cells with ensemble results
        path: output file
        title: figure title

    Returns:
        Path of the written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    groups = group_by_stepsize(cells)
    if not groups:
        raise ValueError("Nothing to plot")

    with matplotlib.rc_context(SVG_RC):
        fig, axes = plt.subplots(1, len(groups), figsize=(4.5 * len(groups), 4.0), squeeze=False)
        for ax, group in zip(axes[0], groups.values()):
            for cell in group:
                mean = np.array(cell.result.mean_sq_dist, dtype=float)
                mean[mean <= 0] = np.nan
                ax.semilogy(np.arange(mean.size), mean, lw=1.2, label=cell.label)
            ax.set_title(_panel_title(group[0].gamma_setting))
            ax.set_xlabel("iteration")
            ax.set_ylabel("mean ||x_k - x*||^2")
            ax.legend(fontsize=7)

        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)

    logger.info(f"Saved chart {path}")
    return path
