# sppm_benchmark/visualization/__init__.py
"""
Convergence charts for experiment results.
"""

from .plotters import group_by_stepsize, plot_convergence

__all__ = ['group_by_stepsize', 'plot_convergence']
