"""
Semantic robustness assessment package.

This package attacks and certifies classifiers over the latent space of a
generative model, with perturbations restricted to an ellipsoid spanned by
semantic attribute directions.
"""

from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as _pkg_version

try:
    __version__ = _pkg_version("semrobust")
except PackageNotFoundError:
    # Fallback for running from source without an installed distribution
    __version__ = "0.1.0"

from .api import generate_population
from .api import prepare_experiment
from .api import rank_results
from .api import run_ablation
from .api import run_attack
from .api import run_attribute_table
from .api import run_certification
from .api import run_sweep

__all__ = [
    "generate_population",
    "prepare_experiment",
    "run_attack",
    "run_attribute_table",
    "run_sweep",
    "run_ablation",
    "rank_results",
    "run_certification",
]
