"""
Attack campaigns over many identities and the accuracy statistics derived from them.
"""

from __future__ import annotations

import concurrent.futures
from typing import NamedTuple

import numpy as np
from tqdm import tqdm

from ..exceptions import ConfigurationError
from ..exceptions import InsufficientDataError
from ..exceptions import SemRobustError
from ..types import AttackMethod
from ..types import ClassLabel
from ..types import IdentityId
from ..types import LatentVector
from ..utils.logging import get_logger
from .attacks import AttackOutcome
from .attacks import FabConfig
from .attacks import PgdConfig
from .attacks import fab_attack
from .attacks import pgd_attack
from .semgeo import BudgetMatrix
from .semgeo import SemanticBasis

logger = get_logger(__name__)

ATTACK_METHODS = ("pgd", "fab")


class AttackTarget(NamedTuple):
    identity_id: IdentityId
    w: LatentVector
    y: ClassLabel


def select_targets(pop, num_attacked: int) -> list[AttackTarget]:
    """The first `num_attacked` identities of a population.

    Populations of different sizes drawn from one seed share their prefix, so
    this keeps the attacked set fixed while the gallery grows.
    """
    if num_attacked < 1:
        raise ConfigurationError("num_attacked must be at least 1", "num_attacked", num_attacked)
    count = min(num_attacked, pop.num_identities)
    if count < num_attacked:
        logger.warning(
            f"Population has only {pop.num_identities} identities; attacking {count}"
        )
    return [AttackTarget(i, pop.codes[i], i) for i in range(count)]


def _attack_fn(method: AttackMethod, cfg):
    if method == "pgd":
        if not isinstance(cfg, PgdConfig):
            raise ConfigurationError("PGD campaigns need a PgdConfig", "method", method)
        return pgd_attack
    if method == "fab":
        if not isinstance(cfg, FabConfig):
            raise ConfigurationError("FAB campaigns need a FabConfig", "method", method)
        return fab_attack
    raise ConfigurationError(
        f"Unknown attack method {method!r}; expected one of {ATTACK_METHODS}", "method", method
    )


def run_campaign(
    oracle,
    basis: SemanticBasis,
    m: BudgetMatrix,
    targets,
    method: AttackMethod,
    cfg,
    workers: int = 1,
    show_progress: bool = False,
) -> list[AttackOutcome]:
    """Attack every target and return the outcomes in input order.

    Each identity draws from its own stream ``default_rng([cfg.seed, identity_id])``,
    so results do not depend on scheduling or on the worker count. An identity
    whose attack raises becomes a failed record; the campaign carries on.
    """
    targets = [AttackTarget(*t) for t in targets]
    if not targets:
        raise InsufficientDataError("A campaign needs at least one target", "targets")
    attack = _attack_fn(method, cfg)
    workers = max(1, int(workers))

    def attack_one(target: AttackTarget) -> AttackOutcome:
        rng = np.random.default_rng([cfg.seed, target.identity_id])
        try:
            return attack(oracle, basis, m, target.w, target.y, cfg, rng, target.identity_id)
        except (SemRobustError, FloatingPointError, ArithmeticError) as e:
            logger.debug(f"Attack on identity {target.identity_id} failed: {e}")
            return AttackOutcome.failure(
                target.identity_id, method, basis.num_attributes, target.y, str(e)
            )

    logger.info(
        f"Running {method.upper()} campaign on {len(targets)} identities "
        f"(N={basis.num_attributes}, workers={workers}, seed={cfg.seed})"
    )
    results: list[AttackOutcome | None] = [None] * len(targets)
    with tqdm(
        total=len(targets),
        desc=f"{method.upper()} attack",
        unit="id",
        ncols=100,
        disable=not show_progress,
    ) as pbar:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_index = {
                executor.submit(attack_one, target): index for index, target in enumerate(targets)
            }
            failures = 0
            for future in concurrent.futures.as_completed(future_to_index):
                outcome = future.result()
                results[future_to_index[future]] = outcome
                if outcome.failed:
                    failures += 1
                    pbar.set_postfix({"failures": failures}, refresh=False)
                pbar.update(1)

    failed = sum(1 for r in results if r.failed)
    if failed:
        logger.warning(f"{failed} of {len(targets)} attacks failed; see diagnostics")
    return results


def robust_accuracy(outcomes) -> float:
    """Share of identities recognized at the clean point and not fooled."""
    outcomes = list(outcomes)
    if not outcomes:
        raise InsufficientDataError("Robust accuracy of an empty campaign is undefined", "outcomes")
    return sum(1 for o in outcomes if o.robust) / len(outcomes)


def clean_accuracy(outcomes) -> float:
    outcomes = list(outcomes)
    if not outcomes:
        raise InsufficientDataError("Clean accuracy of an empty campaign is undefined", "outcomes")
    return sum(1 for o in outcomes if o.clean_correct) / len(outcomes)


def successful_energies(outcomes) -> np.ndarray:
    """Energies of adversarial examples found on clean-correct identities."""
    return np.array(
        [o.energy for o in outcomes if o.success and o.clean_correct and not o.failed],
        dtype=np.float64,
    )


def summarize_outcomes(outcomes) -> dict:
    outcomes = list(outcomes)
    energies = successful_energies(outcomes)
    return {
        "n_attacked": len(outcomes),
        "robust_accuracy": robust_accuracy(outcomes),
        "clean_accuracy": clean_accuracy(outcomes),
        "success_count": int(sum(1 for o in outcomes if o.success)),
        "failed_count": int(sum(1 for o in outcomes if o.failed)),
        "mean_energy": float(np.mean(energies)) if energies.size else None,
        "median_energy": float(np.median(energies)) if energies.size else None,
        "in_ellipsoid_count": int(np.sum(energies <= 1.0)),
    }


def single_attribute_ablation(
    oracle,
    basis: SemanticBasis,
    m: BudgetMatrix,
    targets,
    method: AttackMethod,
    cfg,
    attribute_index: int,
    workers: int = 1,
    show_progress: bool = False,
) -> list[AttackOutcome]:
    """Run a campaign that may only move along one attribute direction."""
    sub_basis = basis.restrict(attribute_index)
    sub_m = m.restrict(attribute_index)
    logger.info(f"Restricting search to attribute '{sub_basis.attribute_names[0]}'")
    return run_campaign(oracle, sub_basis, sub_m, targets, method, cfg, workers, show_progress)
