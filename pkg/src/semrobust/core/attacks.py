"""
Adversarial attacks over the identity-preserving set S(V, M).

Two paradigms are provided:

- ``pgd_attack``: constrained-perturbation search maximizing the loss inside
  the ellipsoid ||delta||_{M,2} <= 1.
- ``fab_attack``: targeted minimum-perturbation search that walks toward the
  M-norm-closest point of linearized decision boundaries.

Both return an ``AttackOutcome`` whose ``success`` flag is always backed by
an actual oracle evaluation at the reported perturbation.
"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field

import numpy as np

from ..exceptions import ConfigurationError
from ..exceptions import DegenerateInputError
from ..exceptions import ShapeError
from ..types import AttackMethod
from ..types import ClassLabel
from ..types import Coefficients
from ..types import IdentityId
from ..types import StepRule
from ..utils.logging import get_logger
from .oracle import LOSS_KINDS
from .oracle import logit_difference_and_grad
from .oracle import loss_and_grad_delta
from .oracle import perturbed_code
from .semgeo import BudgetMatrix
from .semgeo import SemanticBasis
from .semgeo import as_coefficients
from .semgeo import m_norm
from .semgeo import project_to_ellipsoid
from .semgeo import sample_uniform_ellipsoid

logger = get_logger(__name__)

STEP_RULES = ("steepest", "gradient")
FINAL_SEARCH_HALVINGS = 10


@dataclass(frozen=True)
class PgdConfig:
    """Settings for the constrained-perturbation attack.

    `step_size` is measured in M-norm units, so 0.25 means a quarter of the
    ellipsoid's radius per step whatever the per-attribute budgets are.
    """

    iterations: int = 10
    restarts: int = 10
    step_size: float = 0.25
    loss_kind: str = "cross_entropy"
    step_rule: StepRule = "steepest"
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("iterations must be at least 1", "iterations", self.iterations)
        if self.restarts < 1:
            raise ConfigurationError("restarts must be at least 1", "restarts", self.restarts)
        if not self.step_size > 0:
            raise ConfigurationError("step_size must be positive", "step_size", self.step_size)
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigurationError(
                f"loss_kind must be one of {LOSS_KINDS}", "loss_kind", self.loss_kind
            )
        if self.step_rule not in STEP_RULES:
            raise ConfigurationError(
                f"step_rule must be one of {STEP_RULES}", "step_rule", self.step_rule
            )


@dataclass(frozen=True)
class FabConfig:
    """Settings for the targeted minimum-perturbation attack."""

    iterations: int = 10
    restarts: int = 10
    target_classes: int = 10
    alpha_max: float = 0.1
    beta: float = 0.9
    eta: float = 1.05
    final_search: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("iterations", "restarts", "target_classes"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1", name, getattr(self, name))
        if not 0 < self.beta < 1:
            raise ConfigurationError("beta must lie in (0, 1)", "beta", self.beta)
        if not self.eta >= 1:
            raise ConfigurationError("eta must be at least 1", "eta", self.eta)
        if not 0 < self.alpha_max <= 1:
            raise ConfigurationError("alpha_max must lie in (0, 1]", "alpha_max", self.alpha_max)


@dataclass
class AttackOutcome:
    """Result of attacking one identity.

    `failed` marks records where the attack itself raised; those carry the
    error text in `diagnostic` and count as non-robust.
    """

    identity_id: IdentityId
    method: AttackMethod
    success: bool
    delta: Coefficients
    energy: float
    predicted_class: ClassLabel
    restart_index: int
    clean_correct: bool
    failed: bool = False
    diagnostic: str = ""
    skipped_targets: list = field(default_factory=list)

    @property
    def robust(self) -> bool:
        return self.clean_correct and not self.success and not self.failed

    @classmethod
    def failure(cls, identity_id, method, num_attributes, y, message) -> AttackOutcome:
        return cls(
            identity_id=identity_id,
            method=method,
            success=False,
            delta=np.zeros(num_attributes),
            energy=0.0,
            predicted_class=int(y),
            restart_index=-1,
            clean_correct=False,
            failed=True,
            diagnostic=message,
        )


def _predict_at(oracle, basis, w, delta) -> int:
    return int(oracle.predict(perturbed_code(basis, w, delta)))


def _clean_outcome(identity_id, method, num_attributes, clean_pred) -> AttackOutcome:
    """Clean misclassification: success with a zero perturbation."""
    return AttackOutcome(
        identity_id=identity_id,
        method=method,
        success=True,
        delta=np.zeros(num_attributes),
        energy=0.0,
        predicted_class=clean_pred,
        restart_index=0,
        clean_correct=False,
    )


def _unsuccessful_outcome(identity_id, method, num_attributes, y) -> AttackOutcome:
    return AttackOutcome(
        identity_id=identity_id,
        method=method,
        success=False,
        delta=np.zeros(num_attributes),
        energy=0.0,
        predicted_class=int(y),
        restart_index=-1,
        clean_correct=True,
    )


def _ascent_direction(grad, m: BudgetMatrix, step_rule: StepRule):
    """Unit-M-norm ascent direction, or None when the gradient vanishes."""
    if step_rule == "steepest":
        scaled = m.inverse_diag * grad
        norm = float(np.sqrt(np.dot(grad, scaled)))
        direction = scaled
    else:
        norm = float(np.sqrt(np.dot(grad * grad, m.diag)))
        direction = grad
    if not np.isfinite(norm) or norm <= 0.0:
        return None
    return direction / norm


def pgd_attack(
    oracle,
    basis: SemanticBasis,
    m: BudgetMatrix,
    w,
    y: ClassLabel,
    cfg: PgdConfig,
    rng: np.random.Generator | None = None,
    identity_id: IdentityId = 0,
) -> AttackOutcome:
    """Projected gradient ascent on the loss over ||delta||_{M,2} <= 1.

    Restart 0 starts at the clean point, later restarts uniformly inside the
    ellipsoid. Every iterate is checked for misclassification and the fooling
    iterate with the smallest energy is returned.
    """
    if rng is None:
        rng = np.random.default_rng([cfg.seed, identity_id])
    n_attr = basis.num_attributes
    if m.size != n_attr:
        raise ShapeError(f"Budget size {m.size} does not match basis size {n_attr}", "m")
    w = np.asarray(w, dtype=np.float64)
    clean_pred = _predict_at(oracle, basis, w, np.zeros(n_attr))
    if clean_pred != y:
        return _clean_outcome(identity_id, "pgd", n_attr, clean_pred)

    best = None
    for restart in range(cfg.restarts):
        if restart == 0:
            delta = np.zeros(n_attr)
        else:
            delta = sample_uniform_ellipsoid(m, rng)
            best = _keep_if_fooling(oracle, basis, m, w, y, delta, restart, best)
        for _ in range(cfg.iterations):
            _, grad = loss_and_grad_delta(oracle, basis, w, delta, y, cfg.loss_kind)
            direction = _ascent_direction(grad, m, cfg.step_rule)
            if direction is None:
                break
            delta = project_to_ellipsoid(delta + cfg.step_size * direction, m)
            best = _keep_if_fooling(oracle, basis, m, w, y, delta, restart, best)

    if best is None:
        return _unsuccessful_outcome(identity_id, "pgd", n_attr, y)
    delta, energy, pred, restart = best
    return AttackOutcome(
        identity_id=identity_id,
        method="pgd",
        success=True,
        delta=delta,
        energy=energy,
        predicted_class=pred,
        restart_index=restart,
        clean_correct=True,
    )


def _keep_if_fooling(oracle, basis, m, w, y, delta, restart, best):
    pred = _predict_at(oracle, basis, w, delta)
    if pred == y:
        return best
    energy = m_norm(delta, m)
    if best is None or energy < best[1]:
        return (np.array(delta), energy, pred, restart)
    return best


def hyperplane_project_m(delta, a, v: float, m: BudgetMatrix) -> Coefficients:
    """M-norm-closest point to `delta` on the linearized boundary.

    The hyperplane is {x : a^T x + (v - a^T delta) = 0}, i.e. the zero set of
    the first-order model of g around delta, so the minimizer is
    delta - v / (a^T M^-1 a) * M^-1 a.
    """
    delta = as_coefficients(delta, m)
    a = as_coefficients(a, m)
    scaled = m.inverse_diag * a
    denom = float(np.dot(a, scaled))
    if denom <= 0.0:
        raise DegenerateInputError(
            "Hyperplane normal is zero",
            field_name="a",
            validation_rule="a != 0",
        )
    return delta - (float(v) / denom) * scaled


def runner_up_targets(logits, y: ClassLabel, count: int) -> list[int]:
    """The `count` highest-scoring classes other than y (lower index first on ties)."""
    order = np.argsort(-np.asarray(logits, dtype=np.float64), kind="stable")
    return [int(c) for c in order if c != y][:count]


def fab_attack(
    oracle,
    basis: SemanticBasis,
    m: BudgetMatrix,
    w,
    y: ClassLabel,
    cfg: FabConfig,
    rng: np.random.Generator | None = None,
    identity_id: IdentityId = 0,
) -> AttackOutcome:
    """Targeted minimum-M-norm adversarial search.

    Energy is unconstrained and may exceed 1; the caller decides what budget
    counts as identity-preserving.
    """
    if rng is None:
        rng = np.random.default_rng([cfg.seed, identity_id])
    n_attr = basis.num_attributes
    w = np.asarray(w, dtype=np.float64)
    zero = np.zeros(n_attr)
    clean_logits = oracle.logits(perturbed_code(basis, w, zero))
    clean_pred = int(np.argmax(clean_logits))
    if clean_pred != y:
        return _clean_outcome(identity_id, "fab", n_attr, clean_pred)

    best_delta = None
    best_energy = np.inf
    best_pred = int(y)
    best_restart = -1
    skipped = []

    for target in runner_up_targets(clean_logits, y, cfg.target_classes):
        for restart in range(cfg.restarts):
            if restart == 0:
                delta = zero.copy()
            else:
                radius = 0.5 * min(1.0, best_energy)
                delta = radius * sample_uniform_ellipsoid(m, rng)
            degenerate = False
            for _ in range(cfg.iterations):
                v, a = logit_difference_and_grad(oracle, basis, w, delta, target, y)
                if not np.any(a):
                    degenerate = True
                    break
                d_current = hyperplane_project_m(delta, a, v, m) - delta
                # Same linear model, re-anchored at the clean point
                d_origin = hyperplane_project_m(zero, a, v - float(np.dot(a, delta)), m)
                a1 = m_norm(d_current, m)
                a2 = m_norm(d_origin, m)
                mix = min(max(a1 / (a1 + a2), 0.0), cfg.alpha_max) if a1 + a2 > 0 else 0.0
                candidate = (1.0 - mix) * (delta + cfg.eta * d_current) + mix * (cfg.eta * d_origin)
                pred = _predict_at(oracle, basis, w, candidate)
                if pred != y:
                    energy = m_norm(candidate, m)
                    if energy < best_energy:
                        best_delta, best_energy = candidate, energy
                        best_pred, best_restart = pred, restart
                    delta = cfg.beta * candidate
                else:
                    delta = candidate
            if degenerate:
                skipped.append(target)
                logger.debug(f"Identity {identity_id}: target {target} has a vanishing gradient")
                break

    if best_delta is None:
        outcome = _unsuccessful_outcome(identity_id, "fab", n_attr, y)
        outcome.skipped_targets = skipped
        if skipped:
            outcome.diagnostic = f"skipped targets with zero gradient: {skipped}"
        return outcome

    if cfg.final_search:
        best_delta, best_pred = _boundary_search(oracle, basis, w, y, best_delta, best_pred)
        best_energy = m_norm(best_delta, m)

    return AttackOutcome(
        identity_id=identity_id,
        method="fab",
        success=True,
        delta=best_delta,
        energy=best_energy,
        predicted_class=best_pred,
        restart_index=best_restart,
        clean_correct=True,
        diagnostic=f"skipped targets with zero gradient: {skipped}" if skipped else "",
        skipped_targets=skipped,
    )


def _boundary_search(oracle, basis, w, y, delta, pred):
    """Bisect the scale of a fooling delta toward the clean point, keeping it fooling."""
    lo, hi = 0.0, 1.0
    for _ in range(FINAL_SEARCH_HALVINGS):
        mid = 0.5 * (lo + hi)
        mid_pred = _predict_at(oracle, basis, w, mid * delta)
        if mid_pred != y:
            hi, pred = mid, mid_pred
        else:
            lo = mid
    return hi * delta, pred
