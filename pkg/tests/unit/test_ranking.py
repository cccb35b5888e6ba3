"""Unit tests for attribute ranking by normalized energy."""

import numpy as np
import pytest

from semrobust.core.attacks import AttackOutcome
from semrobust.core.ranking import RankingResult
from semrobust.core.ranking import compose_ranking
from semrobust.core.ranking import energy_rows
from semrobust.core.ranking import format_ranking
from semrobust.core.ranking import normalized_energies
from semrobust.core.ranking import rank_attributes
from semrobust.core.ranking import validate_ranking
from semrobust.core.semgeo import BudgetMatrix
from semrobust.core.semgeo import BudgetSpec
from semrobust.core.semgeo import build_budget_matrix
from semrobust.exceptions import ConfigurationError
from semrobust.exceptions import DegenerateInputError
from semrobust.exceptions import InsufficientDataError
from semrobust.exceptions import ShapeError

NAMES = ["age", "pose", "smile", "eyeglasses"]


def planted_rows(rng, n=500, scales=(1.0, 2.0, 3.0, 4.0)):
    return rng.uniform(size=(n, len(scales))) * np.asarray(scales)


class TestNormalizedEnergies:
    """Per-attribute energy shares."""

    def test_balanced(self):
        m = BudgetMatrix(np.ones(2))
        np.testing.assert_allclose(normalized_energies([1.0, 1.0], m), [0.7071068, 0.7071068])

    def test_sum_equals_m_norm(self, rng):
        m = build_budget_matrix(BudgetSpec((0.5, 0.2, 0.8)))
        delta = rng.normal(size=3)
        energies = normalized_energies(delta, m)
        assert energies.sum() == pytest.approx(np.sqrt(np.sum(delta**2 * m.diag)))
        assert np.all(energies >= 0)

    def test_zero_delta(self):
        with pytest.raises(DegenerateInputError):
            normalized_energies(np.zeros(3), BudgetMatrix(np.ones(3)))

    def test_rows_keep_successes_only(self):
        m = BudgetMatrix(np.ones(2))

        def outcome(success, delta, failed=False):
            delta = np.asarray(delta, dtype=float)
            return AttackOutcome(
                identity_id=0,
                method="fab",
                success=success,
                delta=delta,
                energy=float(np.linalg.norm(delta)),
                predicted_class=1,
                restart_index=0,
                clean_correct=True,
                failed=failed,
            )

        rows = energy_rows(
            [
                outcome(True, [1.0, 0.0]),
                outcome(False, [0.3, 0.3]),
                outcome(True, [0.0, 0.0]),
                outcome(True, [0.0, 2.0]),
                outcome(True, [1.0, 1.0], failed=True),
            ],
            m,
        )
        np.testing.assert_allclose(rows, [[1.0, 0.0], [0.0, 2.0]])

    def test_rows_empty(self):
        assert energy_rows([], BudgetMatrix(np.ones(3))).shape == (0, 3)


class TestRanking:
    """Composition and validation."""

    def test_planted_order_recovered(self, rng):
        result = rank_attributes(planted_rows(rng), alpha=0.01, attribute_names=NAMES)
        assert result.ordered_indices == (3, 2, 1, 0)
        assert result.ordered_attributes == ("eyeglasses", "smile", "pose", "age")
        assert all(result.adjacent_significant)
        assert len(result.round_friedman_p) == 3
        assert all(p < 0.01 for p in result.round_friedman_p)
        assert result.n_samples == 500

    def test_mean_rank_aggregator(self, rng):
        ordered, _ = compose_ranking(planted_rows(rng), aggregator="mean_rank")
        assert ordered == [3, 2, 1, 0]

    def test_unknown_aggregator(self, rng):
        with pytest.raises(ConfigurationError):
            compose_ranking(planted_rows(rng, n=10), aggregator="median")

    def test_two_attributes(self, rng):
        rows = planted_rows(rng, n=50, scales=(1.0, 5.0))
        result = rank_attributes(rows, attribute_names=["age", "pose"])
        assert result.ordered_attributes == ("pose", "age")
        assert len(result.adjacent_p_values) == 1
        assert len(result.round_friedman_p) == 1

    def test_identical_columns(self, rng):
        base = rng.uniform(size=40)
        rows = np.column_stack([base, base, base + 1.0])
        result = rank_attributes(rows)
        assert result.ordered_indices == (2, 0, 1)
        assert result.adjacent_p_values[1] == 1.0
        assert result.adjacent_significant == (True, False)

    def test_invariant_to_common_scale(self, rng):
        rows = planted_rows(rng, n=60, scales=(1.0, 1.1, 1.2))
        a = rank_attributes(rows)
        b = rank_attributes(rows * 2.0)
        assert a.ordered_indices == b.ordered_indices
        assert a.adjacent_p_values == b.adjacent_p_values
        assert a.round_friedman_p == b.round_friedman_p

    def test_non_significant_round_does_not_stop(self, rng):
        rows = rng.uniform(size=(30, 3))
        ordered, round_p = compose_ranking(rows)
        assert sorted(ordered) == [0, 1, 2]
        assert len(round_p) == 2

    @pytest.mark.parametrize("shape", [(1, 3), (0, 3), (10, 1)])
    def test_insufficient(self, shape):
        with pytest.raises(InsufficientDataError):
            rank_attributes(np.ones(shape))

    def test_validate_needs_permutation(self, rng):
        with pytest.raises(ShapeError):
            validate_ranking(planted_rows(rng, n=10), [0, 0, 1, 2])

    def test_report(self, rng):
        result = rank_attributes(planted_rows(rng, n=30), attribute_names=NAMES)
        report = result.to_report()
        assert set(report) == {"order", "adjacent_p", "significant", "friedman_p", "n", "alpha"}
        assert report["order"] == list(result.ordered_attributes)
        assert report["alpha"] == 0.01


class TestFormat:
    """Ranking rendering."""

    def test_markers(self):
        result = RankingResult(
            ordered_attributes=("eyeglasses", "pose", "age"),
            ordered_indices=(2, 1, 0),
            adjacent_p_values=(0.001, 0.2),
            adjacent_significant=(True, False),
            round_friedman_p=(0.0001, 0.3),
            n_samples=100,
            alpha=0.01,
        )
        assert format_ranking(result) == "eyeglasses >* pose ≥ age"
