"""
High-level API for semantic robustness experiments.

This module assembles populations, oracles, bases and budgets from an
ExperimentConfig and runs the experiment workflows the CLI exposes.
"""

from dataclasses import dataclass
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np

from .analysis import sweeps
from .config.manager import ExperimentConfig
from .core.certify import acr
from .core.certify import certified_accuracy_curve
from .core.certify import certify_targets
from .core.certify import envelope
from .core.certify import radii_grid
from .core import ranking
from .core.campaign import run_campaign
from .core.campaign import select_targets
from .core.campaign import single_attribute_ablation
from .core.campaign import summarize_outcomes
from .core.oracle import SyntheticPopulation
from .core.oracle import build_oracle
from .core.oracle import gen_population
from .core.semgeo import BudgetMatrix
from .core.semgeo import SemanticBasis
from .core.semgeo import build_budget_matrix
from .core.semgeo import default_attribute_names
from .core.semgeo import rescale_budget
from .exceptions import ConfigurationError
from .exceptions import InsufficientDataError
from .utils import io
from .utils.logging import get_logger

# Public API exports
__all__ = [
    "ExperimentContext",
    "prepare_experiment",
    "generate_population",
    "run_attack",
    "run_attribute_table",
    "run_sweep",
    "run_ablation",
    "rank_results",
    "run_certification",
    "certification_curve",
    "certification_envelope",
]

LARGE_POPULATION_WARNING_THRESHOLD = 100_000

logger = get_logger(__name__)


@dataclass
class ExperimentContext:
    """Everything a campaign needs, built once from the configuration."""

    config: ExperimentConfig
    population: SyntheticPopulation
    oracle: Any
    basis: SemanticBasis
    budget: BudgetMatrix

    def targets(self, count=None):
        return select_targets(self.population, count or self.config.num_attacked)

    def campaign_args(self):
        """(oracle, basis, budget, targets, method, attack config) for campaign functions."""
        return (
            self.oracle,
            self.basis,
            self.budget,
            self.targets(),
            self.config.method,
            self.config.attack_config(),
        )


# ============================================================================
# Builders
# ============================================================================


def load_or_generate_population(cfg: ExperimentConfig) -> SyntheticPopulation:
    if cfg.population_file:
        pop = io.load_population(cfg.population_file)
        logger.info(f"Loaded population of {pop.num_identities} from {cfg.population_file}")
        return pop
    return gen_population(cfg.num_identities, cfg.latent_dim, cfg.population_seed)


def build_basis(cfg: ExperimentConfig, latent_dim: int) -> SemanticBasis:
    if cfg.basis_file:
        basis = io.load_basis(cfg.basis_file)
    else:
        basis = SemanticBasis.random_orthonormal(
            cfg.num_attributes, latent_dim, cfg.basis_seed, cfg.attribute_names
        )
    if basis.latent_dim != latent_dim:
        raise ConfigurationError(
            f"Basis dimension {basis.latent_dim} does not match latent_dim {latent_dim}",
            "basis_file",
        )
    if basis.num_attributes != len(cfg.epsilons):
        raise ConfigurationError(
            f"Basis has {basis.num_attributes} directions but {len(cfg.epsilons)} budgets given",
            "epsilons",
        )
    return basis


def build_budget(cfg: ExperimentConfig, budget_scale=None) -> BudgetMatrix:
    m = build_budget_matrix(cfg.budget_spec())
    scale = cfg.budget_scale if budget_scale is None else budget_scale
    if scale != 1.0:
        m = rescale_budget(m, scale)
    return m


def oracle_factory(cfg: ExperimentConfig):
    def factory(pop):
        return build_oracle(cfg.oracle_family, pop, cfg.embed_dim, cfg.temperature, cfg.oracle_seed)

    return factory


def prepare_experiment(cfg: ExperimentConfig) -> ExperimentContext:
    """Build population, oracle, basis and budget for a configuration."""
    pop = load_or_generate_population(cfg)
    basis = build_basis(cfg, pop.latent_dim)
    return ExperimentContext(
        config=cfg,
        population=pop,
        oracle=oracle_factory(cfg)(pop),
        basis=basis,
        budget=build_budget(cfg),
    )


# ============================================================================
# Workflows
# ============================================================================


def generate_population(num_identities, latent_dim, seed, output_path) -> str:
    """Generate a population and write it as JSON."""
    if num_identities >= LARGE_POPULATION_WARNING_THRESHOLD:
        logger.warning(
            f"{num_identities} identities is a large population; "
            "campaigns will take hours on one machine"
        )
    pop = gen_population(num_identities, latent_dim, seed)
    return str(io.save_population(pop, output_path))


def run_attack(cfg: ExperimentConfig, only_attribute=None, show_progress=False):
    """Run one attack campaign.

    Returns:
        tuple: (outcomes, num_attributes, summary dict)
    """
    ctx = prepare_experiment(cfg)
    campaign = ctx.campaign_args()
    if only_attribute is None:
        outcomes = run_campaign(*campaign, workers=cfg.workers, show_progress=show_progress)
        num_attributes = ctx.basis.num_attributes
        attribute_name = None
    else:
        index = _attribute_index(ctx.basis, only_attribute)
        outcomes = single_attribute_ablation(
            *campaign, index, workers=cfg.workers, show_progress=show_progress
        )
        num_attributes = 1
        attribute_name = ctx.basis.attribute_names[index]

    summary = {"method": cfg.method, **summarize_outcomes(outcomes)}
    summary["budget_scale"] = cfg.budget_scale
    summary["only_attribute"] = attribute_name
    return outcomes, num_attributes, summary


def _attribute_index(basis: SemanticBasis, attribute) -> int:
    if isinstance(attribute, str) and attribute in basis.attribute_names:
        return basis.attribute_names.index(attribute)
    try:
        index = int(attribute)
    except (TypeError, ValueError):
        raise ConfigurationError(
            f"Unknown attribute {attribute!r}; expected an index or one of "
            f"{list(basis.attribute_names)}",
            "only_attribute",
            attribute,
        )
    if not 0 <= index < basis.num_attributes:
        raise ConfigurationError(
            f"Attribute index {index} out of range for N={basis.num_attributes}",
            "only_attribute",
            index,
        )
    return index


def run_attribute_table(cfg: ExperimentConfig):
    """Single-attribute campaigns for every attribute."""
    ctx = prepare_experiment(cfg)
    return sweeps.attribute_restricted_table(*ctx.campaign_args(), workers=cfg.workers)


def run_sweep(cfg: ExperimentConfig, axis=None, values=None):
    """Sweep robust accuracy along one axis; returns a DataFrame."""
    axis = axis or cfg.sweep_axis
    values = list(values if values is not None else cfg.sweep_values)
    attack_cfg = cfg.attack_config()
    logger.info(f"Sweeping {axis} over {values}")

    if axis == "dataset-size":
        basis = build_basis(cfg, cfg.latent_dim)
        return sweeps.dataset_size_sweep(
            oracle_factory(cfg),
            basis,
            build_budget(cfg),
            [int(v) for v in values],
            cfg.latent_dim,
            cfg.population_seed,
            cfg.num_attacked,
            cfg.method,
            attack_cfg,
            workers=cfg.workers,
        )

    ctx = prepare_experiment(cfg)
    if axis == "num-attacked":
        return sweeps.num_attacked_sweep(
            ctx.oracle,
            ctx.basis,
            ctx.budget,
            ctx.population,
            cfg.method,
            attack_cfg,
            [int(v) for v in values],
            workers=cfg.workers,
        )
    if axis == "budget":
        # Sweep values are absolute scales of the unscaled ellipsoid
        return sweeps.budget_sweep(
            ctx.oracle,
            ctx.basis,
            build_budget(cfg, 1.0),
            ctx.targets(),
            cfg.method,
            attack_cfg,
            values,
            ctx.population.num_identities,
            workers=cfg.workers,
        )
    raise ConfigurationError(f"Unknown sweep axis {axis!r}", "sweep_axis", axis)


def run_ablation(cfg: ExperimentConfig, grid=None, values=sweeps.ABLATION_VALUES):
    """Hyper-parameter grid for the configured attack."""
    if grid is None:
        grid = "pgd" if cfg.method == "pgd" else "fab-iterations"
    ctx = prepare_experiment(cfg)
    return sweeps.ablation_grid(*ctx.campaign_args(), grid, values, workers=cfg.workers)


def rank_results(results_path, cfg: ExperimentConfig, attribute_names=None):
    """Rank attributes from an attack results CSV.

    The budget (epsilons and budget_scale) must match the one the campaign used.
    """
    outcomes = io.read_outcomes(results_path)
    m = build_budget(cfg)
    num_attributes = len(outcomes[0].delta) if outcomes else m.size
    if num_attributes < 2:
        raise InsufficientDataError("Ranking requires N >= 2 attributes", "num_attributes")
    if num_attributes != m.size:
        raise ConfigurationError(
            f"Results have {num_attributes} attributes but {m.size} budgets are configured",
            "epsilons",
        )
    if attribute_names is None:
        attribute_names = cfg.attribute_names
    if attribute_names is None and cfg.basis_file:
        attribute_names = io.load_basis(cfg.basis_file).attribute_names
    if attribute_names is None:
        attribute_names = default_attribute_names(num_attributes)
    rows = ranking.energy_rows(outcomes, m)
    logger.info(f"Ranking {num_attributes} attributes from {rows.shape[0]} perturbations")
    return ranking.rank_attributes(
        rows, cfg.alpha_rank, list(attribute_names), cfg.ranking_aggregator
    )


def run_certification(cfg: ExperimentConfig, sigma=None, show_progress=False):
    """Certify the first `num_certify` identities.

    Returns:
        tuple: (list of CertResult, summary dict)
    """
    ctx = prepare_experiment(cfg)
    smoothing = cfg.smoothing_config()
    if sigma is not None:
        smoothing = replace(smoothing, sigma=sigma)
    targets = ctx.targets(cfg.num_certify)
    results = certify_targets(
        ctx.oracle, ctx.basis, ctx.budget, targets, smoothing, cfg.workers, show_progress
    )
    summary = certification_summary(results)
    summary.update({"mode": smoothing.mode, "sigma": smoothing.sigma})
    return results, summary


def certification_summary(results) -> dict[str, Any]:
    results = list(results)
    return {
        "n_certified": len(results),
        "acr": acr(results),
        "abstain_count": int(sum(1 for r in results if r.abstain)),
        "certified_accuracy_at_zero": certified_accuracy_curve(results, [0.0])[0][1],
        "mean_p_a_lower": float(np.mean([r.p_a_lower for r in results])),
    }


def certification_curve(certification_path, step=0.01):
    results = io.read_cert_results(certification_path)
    return certified_accuracy_curve(results, radii_grid(results, step))


def certification_envelope(paths):
    """Best certificate per identity across several certification CSVs."""
    paths = [Path(p) for p in paths]
    if not paths:
        raise InsufficientDataError("Envelope needs at least one certification file", "paths")
    return envelope([io.read_cert_results(p) for p in paths])
