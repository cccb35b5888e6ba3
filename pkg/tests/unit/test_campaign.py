"""Unit tests for attack campaigns and accuracy statistics."""

import logging

import numpy as np
import pytest

from semrobust.core.attacks import AttackOutcome
from semrobust.core.attacks import FabConfig
from semrobust.core.attacks import PgdConfig
from semrobust.core.campaign import AttackTarget
from semrobust.core.campaign import clean_accuracy
from semrobust.core.campaign import robust_accuracy
from semrobust.core.campaign import run_campaign
from semrobust.core.campaign import select_targets
from semrobust.core.campaign import single_attribute_ablation
from semrobust.core.campaign import successful_energies
from semrobust.core.campaign import summarize_outcomes
from semrobust.core.oracle import LinearOracle
from semrobust.core.oracle import gen_population
from semrobust.core.oracle import make_prototype_oracle
from semrobust.core.semgeo import BudgetSpec
from semrobust.core.semgeo import SemanticBasis
from semrobust.core.semgeo import build_budget_matrix
from semrobust.core.semgeo import rescale_budget
from semrobust.exceptions import ConfigurationError
from semrobust.exceptions import InsufficientDataError
from tests.utils import binary_instance


def _outcome(identity_id, success, clean_correct, energy=0.5):
    return AttackOutcome(
        identity_id=identity_id,
        method="pgd",
        success=success,
        delta=np.array([energy, 0.0]),
        energy=energy,
        predicted_class=identity_id + 1 if success else identity_id,
        restart_index=0 if success else -1,
        clean_correct=clean_correct,
    )


class FlakyOracle(LinearOracle):
    """Linear oracle whose gradient fails for codes with a positive first entry."""

    def logit_vjp(self, w, u):
        if w[0] > 0:
            raise ZeroDivisionError("vjp blew up")
        return super().logit_vjp(w, u)


@pytest.fixture(scope="module")
def setup():
    pop = gen_population(60, 16, seed=1)
    oracle = make_prototype_oracle(pop, embed_dim=8, temperature=10.0, seed=2)
    basis = SemanticBasis.random_orthonormal(5, 16, seed=3)
    m = build_budget_matrix(BudgetSpec((0.5, 0.5, 0.2, 0.8, 0.5)))
    return pop, oracle, basis, m


class TestTargets:
    """Attacked-set selection."""

    def test_prefix(self, setup):
        pop = setup[0]
        targets = select_targets(pop, 5)
        assert [t.identity_id for t in targets] == [0, 1, 2, 3, 4]
        assert [t.y for t in targets] == [0, 1, 2, 3, 4]
        np.testing.assert_array_equal(targets[2].w, pop.codes[2])

    def test_capped_with_warning(self, setup, caplog):
        caplog.set_level(logging.WARNING, logger="semrobust")
        targets = select_targets(setup[0], 500)
        assert len(targets) == 60
        assert "only 60 identities" in caplog.text

    def test_rejects_zero(self, setup):
        with pytest.raises(ConfigurationError):
            select_targets(setup[0], 0)


class TestAccuracy:
    """Robust and clean accuracy."""

    def test_mixed_counts(self):
        outcomes = [
            _outcome(0, False, True),
            _outcome(1, False, True),
            _outcome(2, False, True),
            _outcome(3, True, True),
            _outcome(4, True, False, energy=0.0),
        ]
        assert robust_accuracy(outcomes) == pytest.approx(0.6)
        assert clean_accuracy(outcomes) == pytest.approx(0.8)
        np.testing.assert_array_equal(successful_energies(outcomes), [0.5])

    def test_extremes(self):
        assert robust_accuracy([_outcome(i, False, True) for i in range(4)]) == 1.0
        assert robust_accuracy([_outcome(i, True, True) for i in range(4)]) == 0.0

    def test_empty(self):
        with pytest.raises(InsufficientDataError):
            robust_accuracy([])
        with pytest.raises(InsufficientDataError):
            clean_accuracy([])

    def test_summary(self):
        outcomes = [
            _outcome(0, False, True),
            _outcome(1, True, True, 0.4),
            _outcome(2, True, True, 1.6),
        ]
        summary = summarize_outcomes(outcomes)
        assert summary["n_attacked"] == 3
        assert summary["success_count"] == 2
        assert summary["failed_count"] == 0
        assert summary["mean_energy"] == pytest.approx(1.0)
        assert summary["median_energy"] == pytest.approx(1.0)
        assert summary["in_ellipsoid_count"] == 1

    def test_summary_without_successes(self):
        summary = summarize_outcomes([_outcome(0, False, True)])
        assert summary["mean_energy"] is None
        assert summary["robust_accuracy"] == 1.0


class TestCampaign:
    """Campaign execution."""

    def test_input_order_and_worker_independence(self, setup):
        pop, oracle, basis, m = setup
        targets = select_targets(pop, 12)
        cfg = PgdConfig(iterations=5, restarts=3, seed=4)
        serial = run_campaign(oracle, basis, m, targets, "pgd", cfg, workers=1)
        parallel = run_campaign(oracle, basis, m, targets, "pgd", cfg, workers=4)
        assert [o.identity_id for o in serial] == list(range(12))
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.delta, b.delta)
            assert (a.success, a.energy, a.restart_index) == (b.success, b.energy, b.restart_index)

    def test_fab_campaign(self, setup):
        pop, oracle, basis, m = setup
        outcomes = run_campaign(oracle, basis, m, select_targets(pop, 4), "fab", FabConfig())
        assert all(o.method == "fab" for o in outcomes)
        assert all(o.clean_correct for o in outcomes)

    def test_vanishing_budget_keeps_clean_accuracy(self, setup):
        pop, oracle, basis, m = setup
        tiny = rescale_budget(m, 1e-6)
        outcomes = run_campaign(oracle, basis, tiny, select_targets(pop, 10), "pgd", PgdConfig())
        assert robust_accuracy(outcomes) == clean_accuracy(outcomes)

    def test_failures_become_records(self):
        rng = np.random.default_rng(0)
        oracle = FlakyOracle(rng.standard_normal((3, 2)), [0.0, -1.0, -1.0])
        basis = SemanticBasis.identity(2)
        m = build_budget_matrix(BudgetSpec((0.5, 0.5)))
        codes = [np.array([1.0, 0.0]), np.array([-1.0, 0.0])]
        clean = [int(oracle.predict(w)) for w in codes]
        targets = [AttackTarget(i, w, y) for i, (w, y) in enumerate(zip(codes, clean))]
        outcomes = run_campaign(oracle, basis, m, targets, "pgd", PgdConfig())
        assert outcomes[0].failed
        assert "vjp blew up" in outcomes[0].diagnostic
        assert not outcomes[1].failed

    def test_empty_targets(self, setup):
        _, oracle, basis, m = setup
        with pytest.raises(InsufficientDataError):
            run_campaign(oracle, basis, m, [], "pgd", PgdConfig())

    @pytest.mark.parametrize(
        "method, cfg", [("pgd", FabConfig()), ("fab", PgdConfig()), ("cw", PgdConfig())]
    )
    def test_method_config_mismatch(self, setup, method, cfg):
        pop, oracle, basis, m = setup
        with pytest.raises(ConfigurationError):
            run_campaign(oracle, basis, m, select_targets(pop, 1), method, cfg)


class TestSingleAttribute:
    """Campaigns restricted to one attribute."""

    def test_inert_attribute_is_robust(self):
        oracle, basis, m, w, y = binary_instance([1.0, 0.0], -0.3, (0.5, 0.5))
        targets = [AttackTarget(0, w, y)]
        outcomes = single_attribute_ablation(oracle, basis, m, targets, "pgd", PgdConfig(), 1)
        assert robust_accuracy(outcomes) == 1.0

    def test_fab_single_attribute_distance(self):
        oracle, basis, m, w, y = binary_instance([2.0, 0.5, 1.0], -0.6, (0.5, 0.2, 0.8))
        targets = [AttackTarget(0, w, y)]
        outcome = single_attribute_ablation(oracle, basis, m, targets, "fab", FabConfig(), 0)[0]
        expected = 0.6 / (2.0 * 0.5)
        assert outcome.delta.shape == (1,)
        assert expected * (1 - 1e-9) <= outcome.energy <= 1.05 * expected
