"""
Randomized-smoothing certification of semantic robustness.

The smoothed classifier predicts the class F returns most often at
w + V^T (p + e) with e ~ N(0, Sigma). Sigma is sigma^2 I (isotropic) or
sigma^2 M^-1 (anisotropic, noise shaped like the budget ellipsoid). A
Clopper-Pearson bound on the top-class probability gives a certified
Mahalanobis radius R = Phi^-1(p_A_lower).
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from ..exceptions import ConfigurationError
from ..exceptions import InsufficientDataError
from ..exceptions import ShapeError
from ..types import ClassLabel
from ..types import IdentityId
from ..types import SmoothingMode
from ..utils.logging import get_logger
from .campaign import AttackTarget
from .semgeo import BudgetMatrix
from .semgeo import SemanticBasis
from .semgeo import as_coefficients
from .stats import clopper_pearson_lower
from .stats import std_normal_quantile

logger = get_logger(__name__)

SMOOTHING_MODES = ("isotropic", "anisotropic")
ABSTAIN_THRESHOLD = 0.5


@dataclass(frozen=True)
class SmoothingConfig:
    mode: SmoothingMode = "isotropic"
    sigma: float = 0.25
    n0: int = 100
    n: int = 10000
    alpha: float = 1e-3
    seed: int = 0
    batch_size: int = 1000

    def __post_init__(self):
        if self.mode not in SMOOTHING_MODES:
            raise ConfigurationError(
                f"mode must be one of {SMOOTHING_MODES}", "smoothing_mode", self.mode
            )
        if not self.sigma > 0:
            raise ConfigurationError("sigma must be positive", "sigma", self.sigma)
        if self.n0 < 1 or self.n < 1:
            raise ConfigurationError("Sample counts n0 and n must be at least 1", "n", self.n)
        if not 0 < self.alpha < 1:
            raise ConfigurationError("alpha must lie in (0, 1)", "alpha_cert", self.alpha)
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be at least 1", "batch_size", self.batch_size)


@dataclass(frozen=True)
class CertResult:
    """Certificate for one identity; abstentions carry zero radii."""

    identity_id: IdentityId
    mode: SmoothingMode
    sigma: float
    predicted_class: ClassLabel
    correct: bool
    p_a_lower: float
    mahalanobis_radius: float
    radius: float
    abstain: bool

    @property
    def certified_radius(self) -> float:
        """Radius credited to the identity: zero unless correct and not abstained."""
        return self.radius if self.correct and not self.abstain else 0.0


def noise_std(cfg: SmoothingConfig, m: BudgetMatrix) -> np.ndarray:
    """Per-coordinate noise standard deviation in delta-space."""
    if cfg.mode == "isotropic":
        return np.full(m.size, cfg.sigma)
    return cfg.sigma * m.semi_axes


def equal_volume_scale(std) -> float:
    """(det Sigma)^(1/2N) for diagonal Sigma, the geometric mean of the stds."""
    std = np.asarray(std, dtype=np.float64)
    if np.all(std == std[0]):
        return float(std[0])
    return float(np.exp(np.mean(np.log(std))))


def smooth_sample_counts(
    oracle,
    basis: SemanticBasis,
    m: BudgetMatrix,
    w,
    p,
    cfg: SmoothingConfig,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Class histogram of F over `count` noisy copies of w + V^T p."""
    p = as_coefficients(p, basis.num_attributes)
    if m.size != basis.num_attributes:
        raise ShapeError("Budget and basis sizes differ", "m")
    w = np.asarray(w, dtype=np.float64)
    std = noise_std(cfg, m)
    counts = np.zeros(oracle.num_classes, dtype=np.int64)
    drawn = 0
    while drawn < count:
        batch = min(cfg.batch_size, count - drawn)
        noise = rng.standard_normal((batch, basis.num_attributes)) * std
        codes = w + (p + noise) @ basis.directions
        counts += np.bincount(oracle.predict(codes), minlength=oracle.num_classes)
        drawn += batch
    return counts


def certify(
    oracle,
    basis: SemanticBasis,
    m: BudgetMatrix,
    w,
    p,
    y_true: ClassLabel,
    cfg: SmoothingConfig,
    rng: np.random.Generator | None = None,
    identity_id: IdentityId = 0,
) -> CertResult:
    """Select the top class on n0 samples, then bound its probability on n fresh ones."""
    if rng is None:
        rng = np.random.default_rng([cfg.seed, identity_id])
    selection = smooth_sample_counts(oracle, basis, m, w, p, cfg, cfg.n0, rng)
    c_a = int(np.argmax(selection))
    estimation = smooth_sample_counts(oracle, basis, m, w, p, cfg, cfg.n, rng)
    p_lower = clopper_pearson_lower(int(estimation[c_a]), cfg.n, cfg.alpha)

    if p_lower <= ABSTAIN_THRESHOLD:
        mahalanobis, radius, abstain = 0.0, 0.0, True
    else:
        mahalanobis = float(std_normal_quantile(p_lower))
        if cfg.mode == "isotropic":
            radius = cfg.sigma * mahalanobis
        else:
            radius = mahalanobis * equal_volume_scale(noise_std(cfg, m))
        abstain = False

    return CertResult(
        identity_id=int(identity_id),
        mode=cfg.mode,
        sigma=float(cfg.sigma),
        predicted_class=c_a,
        correct=c_a == int(y_true),
        p_a_lower=float(p_lower),
        mahalanobis_radius=mahalanobis,
        radius=float(radius),
        abstain=abstain,
    )


def certify_targets(
    oracle,
    basis: SemanticBasis,
    m: BudgetMatrix,
    targets,
    cfg: SmoothingConfig,
    workers: int = 1,
    show_progress: bool = False,
) -> list[CertResult]:
    """Certify unperturbed identities (p = 0) in input order."""
    targets = [AttackTarget(*t) for t in targets]
    if not targets:
        raise InsufficientDataError("Certification needs at least one identity", "targets")
    zero = np.zeros(basis.num_attributes)

    def certify_one(target: AttackTarget) -> CertResult:
        rng = np.random.default_rng([cfg.seed, target.identity_id])
        return certify(oracle, basis, m, target.w, zero, target.y, cfg, rng, target.identity_id)

    logger.info(
        f"Certifying {len(targets)} identities ({cfg.mode}, sigma={cfg.sigma}, "
        f"n0={cfg.n0}, n={cfg.n}, alpha={cfg.alpha})"
    )
    results: list[CertResult | None] = [None] * len(targets)
    with tqdm(
        total=len(targets), desc="Certifying", unit="id", ncols=100, disable=not show_progress
    ) as pbar:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, int(workers))) as executor:
            future_to_index = {executor.submit(certify_one, t): i for i, t in enumerate(targets)}
            for future in concurrent.futures.as_completed(future_to_index):
                results[future_to_index[future]] = future.result()
                pbar.update(1)

    abstained = sum(1 for r in results if r.abstain)
    if abstained:
        logger.info(f"{abstained} of {len(results)} identities abstained")
    return results


def certified_accuracy_curve(results, grid) -> list[tuple[float, float]]:
    """Fraction of identities certified correct at radius >= x, for each x."""
    results = list(results)
    if not results:
        raise InsufficientDataError("Certified accuracy of no results is undefined", "results")
    radii = np.array([r.radius for r in results if r.correct and not r.abstain])
    total = len(results)
    return [(float(x), float(np.sum(radii >= x)) / total) for x in grid]


def acr(results) -> float:
    """Average certified radius; incorrect and abstained identities contribute 0."""
    results = list(results)
    if not results:
        raise InsufficientDataError("ACR of no results is undefined", "results")
    return float(np.mean([r.certified_radius for r in results]))


def radii_grid(results, step: float = 0.01) -> np.ndarray:
    """0, step, 2*step, ... up to the largest certified radius."""
    if step <= 0:
        raise ConfigurationError("Grid step must be positive", "step", step)
    largest = max((r.radius for r in results), default=0.0)
    return np.arange(int(np.floor(largest / step)) + 1) * step


def envelope(result_sets) -> list[CertResult]:
    """Best certificate per identity across several runs (e.g. a sigma grid).

    Ties keep the record from the earliest run. Output is ordered by identity.
    """
    best: dict[int, CertResult] = {}
    for results in result_sets:
        for r in results:
            current = best.get(r.identity_id)
            if current is None or r.certified_radius > current.certified_radius:
                best[r.identity_id] = r
    if not best:
        raise InsufficientDataError("Envelope of no results is undefined", "results")
    return [best[i] for i in sorted(best)]
