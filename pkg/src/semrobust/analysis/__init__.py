"""Sweeps, curves and ablation tables assembled from attack campaigns."""

from .sweeps import ablation_grid
from .sweeps import attribute_restricted_table
from .sweeps import budget_sweep
from .sweeps import dataset_size_sweep
from .sweeps import fab_budget_curve
from .sweeps import num_attacked_sweep

__all__ = [
    "ablation_grid",
    "attribute_restricted_table",
    "budget_sweep",
    "dataset_size_sweep",
    "fab_budget_curve",
    "num_attacked_sweep",
]
