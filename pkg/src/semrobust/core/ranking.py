"""
Attribute ranking by the normalized energy adversarial perturbations spend.

Each successful perturbation casts a vote per attribute weighted by its share
of the M-norm energy. Attributes are ranked round by round; every round is
preceded by a Friedman test over the remaining attributes, and the finished
ranking is validated with one-sided Wilcoxon tests on adjacent pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ..exceptions import ConfigurationError
from ..exceptions import DegenerateInputError
from ..exceptions import InsufficientDataError
from ..exceptions import ShapeError
from ..types import RankingAggregator
from ..utils.logging import get_logger
from .semgeo import BudgetMatrix
from .semgeo import as_coefficients
from .stats import friedman_test
from .stats import wilcoxon_signed_rank

logger = get_logger(__name__)

RANKING_AGGREGATORS = ("column_sum", "mean_rank")


@dataclass(frozen=True)
class RankingResult:
    ordered_attributes: tuple[str, ...]
    ordered_indices: tuple[int, ...]
    adjacent_p_values: tuple[float, ...]
    adjacent_significant: tuple[bool, ...]
    round_friedman_p: tuple[float, ...]
    n_samples: int
    alpha: float

    def to_report(self) -> dict:
        """Ranking report document written by the `rank` command."""
        return {
            "order": list(self.ordered_attributes),
            "adjacent_p": list(self.adjacent_p_values),
            "significant": list(self.adjacent_significant),
            "friedman_p": list(self.round_friedman_p),
            "n": self.n_samples,
            "alpha": self.alpha,
        }


def normalized_energies(delta, m: BudgetMatrix) -> np.ndarray:
    """Per-attribute share of the energy: delta_i^2 M_ii / ||delta||_{M,2}.

    The entries sum to ||delta||_{M,2}.
    """
    delta = as_coefficients(delta, m)
    weighted = delta * delta * m.diag
    energy = float(np.sqrt(weighted.sum()))
    if energy == 0.0:
        raise DegenerateInputError(
            "Normalized energies are undefined for a zero perturbation", "delta"
        )
    return weighted / energy


def energy_rows(outcomes, m: BudgetMatrix) -> np.ndarray:
    """Stack normalized energies of successful, nonzero perturbations."""
    rows = [
        normalized_energies(o.delta, m)
        for o in outcomes
        if o.success and not o.failed and o.energy > 0.0
    ]
    if not rows:
        return np.zeros((0, m.size))
    return np.vstack(rows)


def _check_rows(rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ShapeError("Energy rows must form an n x N matrix", "energy_rows")
    if rows.shape[1] < 2:
        raise InsufficientDataError("Ranking requires at least 2 attributes", "num_attributes")
    if rows.shape[0] < 2:
        raise InsufficientDataError(
            f"Ranking requires at least 2 successful perturbations, got {rows.shape[0]}",
            "energy_rows",
        )
    return rows


def _round_winner(rows, remaining, aggregator: RankingAggregator) -> int:
    block = rows[:, remaining]
    if aggregator == "column_sum":
        scores = block.sum(axis=0)
    elif aggregator == "mean_rank":
        # Highest energy gets the highest rank
        scores = rankdata(block, axis=1).mean(axis=0)
    else:
        raise ConfigurationError(
            f"Unknown ranking aggregator {aggregator!r}", "ranking_aggregator", aggregator
        )
    # argmax picks the lowest remaining index on ties
    return remaining[int(np.argmax(scores))]


def compose_ranking(rows, alpha: float = 0.01, aggregator: RankingAggregator = "column_sum"):
    """Order attributes by repeated winner selection.

    Returns the ordered attribute indices and the Friedman p-value of each of
    the N - 1 rounds. A non-significant round does not stop the ranking.
    """
    rows = _check_rows(rows)
    remaining = list(range(rows.shape[1]))
    ordered = []
    round_p = []
    while len(remaining) > 1:
        result = friedman_test(rows[:, remaining])
        round_p.append(result.p_value)
        if result.p_value >= alpha:
            logger.debug(
                f"Friedman round over {len(remaining)} attributes not significant "
                f"(p={result.p_value:.3g})"
            )
        winner = _round_winner(rows, remaining, aggregator)
        ordered.append(winner)
        remaining.remove(winner)
    ordered.append(remaining[0])
    return ordered, round_p


def validate_ranking(rows, ordered, alpha: float = 0.01, attribute_names=None, round_p=None):
    """Test every adjacent pair (r_k, r_k+1) for r_k spending more energy."""
    rows = _check_rows(rows)
    ordered = [int(i) for i in ordered]
    if sorted(ordered) != list(range(rows.shape[1])):
        raise ShapeError("Ranking must be a permutation of the attribute indices", "ordered")
    if attribute_names is None:
        attribute_names = [f"attr{i}" for i in range(rows.shape[1])]

    p_values = []
    for first, second in zip(ordered[:-1], ordered[1:]):
        p_values.append(wilcoxon_signed_rank(rows[:, first], rows[:, second], "greater").p_value)

    return RankingResult(
        ordered_attributes=tuple(attribute_names[i] for i in ordered),
        ordered_indices=tuple(ordered),
        adjacent_p_values=tuple(p_values),
        adjacent_significant=tuple(p < alpha for p in p_values),
        round_friedman_p=tuple(round_p or ()),
        n_samples=int(rows.shape[0]),
        alpha=float(alpha),
    )


def rank_attributes(rows, alpha=0.01, attribute_names=None, aggregator="column_sum"):
    """Compose and validate in one call."""
    ordered, round_p = compose_ranking(rows, alpha, aggregator)
    return validate_ranking(rows, ordered, alpha, attribute_names, round_p)


def format_ranking(result: RankingResult) -> str:
    """Render e.g. ``eyeglasses >* pose ≥ age``; ``>*`` marks significant pairs."""
    parts = [result.ordered_attributes[0]]
    for name, significant in zip(result.ordered_attributes[1:], result.adjacent_significant):
        parts.append(">*" if significant else "≥")
        parts.append(name)
    return " ".join(parts)
