"""Unit tests for randomized-smoothing certification."""

import numpy as np
import pytest
from scipy.special import ndtr

from semrobust.core.campaign import AttackTarget
from semrobust.core.certify import CertResult
from semrobust.core.certify import SmoothingConfig
from semrobust.core.certify import acr
from semrobust.core.certify import certified_accuracy_curve
from semrobust.core.certify import certify
from semrobust.core.certify import certify_targets
from semrobust.core.certify import envelope
from semrobust.core.certify import equal_volume_scale
from semrobust.core.certify import noise_std
from semrobust.core.certify import radii_grid
from semrobust.core.certify import smooth_sample_counts
from semrobust.core.oracle import ConstantOracle
from semrobust.core.semgeo import BudgetMatrix
from semrobust.core.semgeo import BudgetSpec
from semrobust.core.semgeo import SemanticBasis
from semrobust.core.semgeo import build_budget_matrix
from semrobust.exceptions import ConfigurationError
from semrobust.exceptions import InsufficientDataError
from tests.utils import binary_instance
from tests.utils import random_binary_instance


def _result(identity_id, radius, correct=True, abstain=False, sigma=0.25):
    return CertResult(
        identity_id=identity_id,
        mode="isotropic",
        sigma=sigma,
        predicted_class=identity_id if correct else identity_id + 1,
        correct=correct,
        p_a_lower=0.9 if not abstain else 0.4,
        mahalanobis_radius=radius / sigma,
        radius=0.0 if abstain else radius,
        abstain=abstain,
    )


@pytest.fixture
def constant_setup():
    oracle = ConstantOracle.always(0, 3, 3)
    return oracle, SemanticBasis.identity(3), BudgetMatrix(np.ones(3)), np.zeros(3)


class TestSmoothingConfig:
    """Configuration validation."""

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mode": "laplace"},
            {"sigma": 0.0},
            {"sigma": -1.0},
            {"n0": 0},
            {"n": 0},
            {"alpha": 0.0},
            {"alpha": 1.0},
            {"batch_size": 0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            SmoothingConfig(**kwargs)

    def test_noise_shapes(self):
        m = build_budget_matrix(BudgetSpec((0.5, 0.2)))
        np.testing.assert_allclose(noise_std(SmoothingConfig(sigma=0.5), m), [0.5, 0.5])
        aniso = SmoothingConfig(mode="anisotropic", sigma=0.5)
        np.testing.assert_allclose(noise_std(aniso, m), [0.25, 0.1])

    def test_equal_volume_scale(self):
        assert equal_volume_scale([0.3, 0.3, 0.3]) == 0.3
        assert equal_volume_scale([0.1, 0.4]) == pytest.approx(0.2)


class TestCertify:
    """Single-identity certification."""

    def test_constant_oracle(self, constant_setup):
        oracle, basis, m, w = constant_setup
        cfg = SmoothingConfig(sigma=0.25, n0=10, n=100, alpha=0.001)
        result = certify(oracle, basis, m, w, np.zeros(3), 0, cfg)
        assert result.predicted_class == 0
        assert result.correct
        assert not result.abstain
        assert result.p_a_lower == pytest.approx(0.9332543, abs=1e-7)
        assert result.radius == pytest.approx(0.375157, abs=1e-6)
        assert result.certified_radius == result.radius

    def test_wrong_label(self, constant_setup):
        oracle, basis, m, w = constant_setup
        result = certify(oracle, basis, m, w, np.zeros(3), 2, SmoothingConfig(n=100))
        assert not result.correct
        assert result.radius > 0
        assert result.certified_radius == 0.0

    def test_abstains_on_the_boundary(self):
        oracle, basis, m, w, y = binary_instance([1.0, 0.0], 0.0, (0.5, 0.5))
        cfg = SmoothingConfig(sigma=0.25, n0=100, n=1000, alpha=0.001)
        result = certify(oracle, basis, m, w, np.zeros(2), y, cfg)
        assert result.abstain
        assert result.radius == 0.0
        assert result.mahalanobis_radius == 0.0
        assert result.certified_radius == 0.0

    def test_modes_agree_at_identity_budget(self):
        oracle, basis, _, w, y = binary_instance([1.0, -0.5, 0.3], -0.4, (1.0, 1.0, 1.0))
        m = BudgetMatrix(np.ones(3))
        iso = certify(oracle, basis, m, w, np.zeros(3), y, SmoothingConfig(n=2000, seed=5))
        aniso = certify(
            oracle, basis, m, w, np.zeros(3), y, SmoothingConfig("anisotropic", n=2000, seed=5)
        )
        assert iso.p_a_lower == aniso.p_a_lower
        assert iso.radius == aniso.radius
        assert iso.predicted_class == aniso.predicted_class

    def test_deterministic(self):
        oracle, basis, m, w, y = binary_instance([1.0, 1.0], -0.3, (0.5, 0.5))
        cfg = SmoothingConfig(n=500, seed=9)
        first = certify(oracle, basis, m, w, np.zeros(2), y, cfg, identity_id=4)
        second = certify(oracle, basis, m, w, np.zeros(2), y, cfg, identity_id=4)
        assert first == second


class TestSampling:
    """Noisy class histograms."""

    def test_counts_sum(self, constant_setup, rng):
        oracle, basis, m, w = constant_setup
        counts = smooth_sample_counts(
            oracle, basis, m, w, np.zeros(3), SmoothingConfig(batch_size=7), 100, rng
        )
        assert counts.sum() == 100
        assert counts[0] == 100

    @pytest.mark.parametrize("mode", ["isotropic", "anisotropic"])
    def test_linear_closed_form(self, mode, rng):
        a = np.array([1.0, -2.0, 0.5])
        oracle, basis, m, w, y = binary_instance(a, -0.4, (0.5, 0.2, 0.8))
        cfg = SmoothingConfig(mode=mode, sigma=0.3, batch_size=4096)
        count = 20000
        counts = smooth_sample_counts(oracle, basis, m, w, np.zeros(3), cfg, count, rng)
        sigma_eff = float(np.sqrt(np.sum(a**2 * noise_std(cfg, m) ** 2)))
        expected = float(ndtr(0.4 / sigma_eff))
        band = 4.0 * np.sqrt(expected * (1.0 - expected) / count)
        assert abs(counts[0] / count - expected) <= band

    def test_center_shift(self, rng):
        oracle, basis, m, w, _ = binary_instance([1.0, 0.0], -0.4, (0.5, 0.5))
        cfg = SmoothingConfig(sigma=0.01)
        counts = smooth_sample_counts(oracle, basis, m, w, [1.0, 0.0], cfg, 200, rng)
        assert counts[1] == 200


class TestSoundness:
    """Certified radii never exceed the true distance to the boundary."""

    def test_isotropic(self):
        rng = np.random.default_rng(21)
        violations = 0
        for _ in range(20):
            instance = random_binary_instance(rng, 3, rng.uniform(0.2, 1.5))
            oracle, basis, m, w, y = instance
            a = oracle.weights[1]
            euclidean = abs(oracle.biases[1]) / np.linalg.norm(a)
            cfg = SmoothingConfig(sigma=0.25, n0=100, n=2000, seed=int(rng.integers(1000)))
            result = certify(oracle, basis, m, w, np.zeros(3), y, cfg)
            if result.certified_radius > euclidean:
                violations += 1
        assert violations <= 1

    def test_anisotropic_in_budget_norm(self):
        rng = np.random.default_rng(22)
        violations = 0
        for _ in range(20):
            distance = rng.uniform(0.2, 1.5)
            oracle, basis, m, w, y = random_binary_instance(rng, 3, distance)
            cfg = SmoothingConfig("anisotropic", 0.25, 100, 2000, seed=int(rng.integers(1000)))
            result = certify(oracle, basis, m, w, np.zeros(3), y, cfg)
            if result.correct and cfg.sigma * result.mahalanobis_radius > distance:
                violations += 1
        assert violations <= 1


class TestTargets:
    """Certifying many identities."""

    def test_input_order_and_workers(self):
        oracle, basis, m, _, _ = binary_instance([1.0, 1.0], -0.2, (0.5, 0.5))
        targets = [AttackTarget(i, np.full(2, -0.1 * i), 0) for i in range(6)]
        cfg = SmoothingConfig(n=300)
        serial = certify_targets(oracle, basis, m, targets, cfg, workers=1)
        parallel = certify_targets(oracle, basis, m, targets, cfg, workers=3)
        assert [r.identity_id for r in serial] == list(range(6))
        assert serial == parallel

    def test_empty(self, constant_setup):
        oracle, basis, m, _ = constant_setup
        with pytest.raises(InsufficientDataError):
            certify_targets(oracle, basis, m, [], SmoothingConfig())


class TestCurves:
    """Certified accuracy, ACR and envelopes."""

    @pytest.fixture
    def results(self):
        return [
            _result(0, 0.5),
            _result(1, 0.5),
            _result(2, 0.7, correct=False),
            _result(3, 0.0, abstain=True),
            _result(4, 0.3, correct=False),
        ]

    def test_acr(self, results):
        assert acr(results) == pytest.approx(0.2)

    def test_acr_all_abstain(self):
        assert acr([_result(i, 0.0, abstain=True) for i in range(3)]) == 0.0

    def test_curve(self, results):
        curve = certified_accuracy_curve(results, [0.0, 0.25, 0.5, 0.6, 2.0])
        assert curve == [(0.0, 0.4), (0.25, 0.4), (0.5, 0.4), (0.6, 0.0), (2.0, 0.0)]

    def test_curve_monotone(self, rng):
        results = [_result(i, float(r)) for i, r in enumerate(rng.uniform(0, 1, 50))]
        values = [v for _, v in certified_accuracy_curve(results, radii_grid(results, 0.01))]
        assert values[0] == 1.0
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_grid(self, results):
        np.testing.assert_allclose(radii_grid(results, 0.25), [0.0, 0.25, 0.5])
        with pytest.raises(ConfigurationError):
            radii_grid(results, 0.0)

    def test_empty(self):
        with pytest.raises(InsufficientDataError):
            acr([])
        with pytest.raises(InsufficientDataError):
            certified_accuracy_curve([], [0.0])

    def test_envelope(self):
        low = [_result(0, 0.2, sigma=0.12), _result(1, 0.6, sigma=0.12)]
        high = [_result(1, 0.4, sigma=0.5), _result(0, 0.9, sigma=0.5)]
        best = envelope([low, high])
        assert [r.identity_id for r in best] == [0, 1]
        assert [r.sigma for r in best] == [0.5, 0.12]
        assert acr(best) >= max(acr(low), acr(high))

    def test_envelope_ties_keep_first_run(self):
        first = [_result(0, 0.3, sigma=0.12)]
        second = [_result(0, 0.3, sigma=0.25)]
        assert envelope([first, second])[0].sigma == 0.12

    def test_envelope_empty(self):
        with pytest.raises(InsufficientDataError):
            envelope([[], []])
