"""
Experiment sweeps built from repeated campaigns.

Each function returns a pandas DataFrame ready to be written as CSV.
"""

from dataclasses import replace

import numpy as np
import pandas as pd

from ..core.campaign import robust_accuracy
from ..core.campaign import run_campaign
from ..core.campaign import select_targets
from ..core.campaign import single_attribute_ablation
from ..core.campaign import successful_energies
from ..core.oracle import gen_population
from ..core.semgeo import rescale_budget
from ..exceptions import ConfigurationError
from ..utils.logging import get_logger

logger = get_logger(__name__)

SWEEP_COLUMNS = ["axis_value", "robust_accuracy", "n_attacked", "n_population"]
ABLATION_AXES = {
    "pgd": ("iterations", "restarts"),
    "fab-iterations": ("restarts", "iterations"),
    "fab-targets": ("restarts", "target_classes"),
}
ABLATION_VALUES = (1, 5, 10, 20)
FAB_ABLATION_FIXED = 5


def fab_accuracy_at(outcomes, budget: float) -> float:
    """Robust accuracy at budget x from minimum-perturbation energies.

    An identity survives budget x when it is clean-correct and no adversarial
    example with energy <= x was found.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise ConfigurationError("No outcomes to evaluate", "outcomes")
    robust = sum(
        1
        for o in outcomes
        if o.clean_correct and not o.failed and (not o.success or o.energy > budget)
    )
    return robust / len(outcomes)


def fab_budget_curve(outcomes, budgets) -> pd.DataFrame:
    rows = [(float(x), fab_accuracy_at(outcomes, x)) for x in budgets]
    return pd.DataFrame(rows, columns=["budget", "robust_accuracy"])


def budget_sweep(oracle, basis, m, targets, method, cfg, scales, n_population, workers=1):
    """Robust accuracy as the ellipsoid is scaled by each value in `scales`.

    PGD reruns the campaign per scale. FAB runs once, since its energies
    already answer every budget.
    """
    targets = list(targets)
    rows = []
    if method == "fab":
        outcomes = run_campaign(oracle, basis, m, targets, "fab", cfg, workers)
        for scale in scales:
            accuracy = fab_accuracy_at(outcomes, scale)
            rows.append((float(scale), accuracy, len(targets), n_population))
    else:
        for scale in scales:
            scaled = rescale_budget(m, scale)
            outcomes = run_campaign(oracle, basis, scaled, targets, method, cfg, workers)
            rows.append((float(scale), robust_accuracy(outcomes), len(targets), n_population))
            logger.info(f"Budget scale {scale}: robust accuracy {rows[-1][1]:.3f}")
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def num_attacked_sweep(oracle, basis, m, pop, method, cfg, counts, workers=1):
    """Robust accuracy over growing prefixes of the attacked set.

    Outcomes depend only on (seed, identity), so one campaign over the
    largest prefix answers every count.
    """
    largest = int(max(counts))
    targets = select_targets(pop, largest)
    outcomes = run_campaign(oracle, basis, m, targets, method, cfg, workers)
    rows = []
    for count in counts:
        prefix = outcomes[: min(int(count), len(outcomes))]
        rows.append((float(count), robust_accuracy(prefix), len(prefix), pop.num_identities))
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def dataset_size_sweep(
    oracle_factory,
    basis,
    m,
    sizes,
    latent_dim,
    population_seed,
    num_attacked,
    method,
    cfg,
    workers=1,
):
    """Robust accuracy as the gallery grows while the attacked identities stay fixed.

    Populations of every size share their leading codes, so the first
    `num_attacked` identities are the same in each run.
    """
    rows = []
    for size in sizes:
        pop = gen_population(int(size), latent_dim, population_seed)
        oracle = oracle_factory(pop)
        targets = select_targets(pop, num_attacked)
        outcomes = run_campaign(oracle, basis, m, targets, method, cfg, workers)
        rows.append((float(size), robust_accuracy(outcomes), len(targets), pop.num_identities))
        logger.info(f"Population {size}: robust accuracy {rows[-1][1]:.3f}")
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def _campaign_metric(method, outcomes):
    if method == "pgd":
        return robust_accuracy(outcomes)
    energies = successful_energies(outcomes)
    return float(np.mean(energies)) if energies.size else float("nan")


def ablation_grid(
    oracle, basis, m, targets, method, cfg, grid="pgd", values=ABLATION_VALUES, workers=1
):
    """Campaign metric over a grid of two attack hyper-parameters.

    PGD reports robust accuracy over iterations x restarts. FAB reports mean
    energy over restarts x iterations or restarts x target classes, with the
    third parameter held at 5.
    """
    if grid not in ABLATION_AXES:
        raise ConfigurationError(f"Unknown ablation grid {grid!r}", "grid", grid)
    if (grid == "pgd") != (method == "pgd"):
        raise ConfigurationError(f"Grid {grid!r} does not apply to method {method!r}", "grid", grid)
    row_key, col_key = ABLATION_AXES[grid]
    base = cfg
    if method == "fab":
        fixed = "target_classes" if grid == "fab-iterations" else "iterations"
        base = replace(cfg, **{fixed: FAB_ABLATION_FIXED})
    targets = list(targets)
    rows = []
    for row_value in values:
        for col_value in values:
            run_cfg = replace(base, **{row_key: int(row_value), col_key: int(col_value)})
            outcomes = run_campaign(oracle, basis, m, targets, method, run_cfg, workers)
            rows.append((int(row_value), int(col_value), _campaign_metric(method, outcomes)))
    frame = pd.DataFrame(rows, columns=["row_value", "col_value", "metric"])
    frame.attrs["axes"] = (row_key, col_key)
    return frame


def attribute_restricted_table(oracle, basis, m, targets, method, cfg, workers=1):
    """One single-attribute campaign per attribute.

    Columns: attribute, robust_accuracy, mean_energy (mean_energy is NaN for PGD).
    """
    targets = list(targets)
    rows = []
    for index, name in enumerate(basis.attribute_names):
        outcomes = single_attribute_ablation(oracle, basis, m, targets, method, cfg, index, workers)
        energies = successful_energies(outcomes)
        mean_energy = float("nan")
        if method == "fab" and energies.size:
            mean_energy = float(np.mean(energies))
        rows.append((name, robust_accuracy(outcomes), mean_energy))
    return pd.DataFrame(rows, columns=["attribute", "robust_accuracy", "mean_energy"])
