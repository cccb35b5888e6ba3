"""
Linear test instances with closed-form decision geometry.

Every instance lives directly in perturbation space: the basis is the
identity, the clean code is the origin and the true class is 0, so the
M-norm distance to each decision boundary is |b_c| / ||a_c||_{M^-1,2}.
"""

from typing import NamedTuple

import numpy as np

from semrobust.core.oracle import LinearOracle
from semrobust.core.semgeo import BudgetMatrix
from semrobust.core.semgeo import BudgetSpec
from semrobust.core.semgeo import SemanticBasis
from semrobust.core.semgeo import build_budget_matrix
from semrobust.core.semgeo import dual_norm


class LinearInstance(NamedTuple):
    oracle: LinearOracle
    basis: SemanticBasis
    m: BudgetMatrix
    w: np.ndarray
    y: int


def binary_instance(a, b, epsilons) -> LinearInstance:
    """logit_1 - logit_0 = a . delta + b at the origin code."""
    a = np.asarray(a, dtype=np.float64)
    weights = np.vstack([np.zeros_like(a), a])
    oracle = LinearOracle(weights, [0.0, float(b)])
    m = build_budget_matrix(BudgetSpec(tuple(epsilons)))
    return LinearInstance(oracle, SemanticBasis.identity(a.size), m, np.zeros(a.size), 0)


def random_epsilons(rng, n_attr):
    return tuple(rng.uniform(0.2, 1.0, size=n_attr))


def random_binary_instance(rng, n_attr, distance) -> LinearInstance:
    """Binary instance whose boundary sits at exactly `distance` in M-norm."""
    epsilons = random_epsilons(rng, n_attr)
    m = build_budget_matrix(BudgetSpec(epsilons))
    a = rng.standard_normal(n_attr)
    b = -distance * dual_norm(a, m)
    return binary_instance(a, b, epsilons)


def random_multiclass_instance(rng, n_attr, n_classes) -> LinearInstance:
    """Class 0 wins at the origin; every other class c has a negative offset."""
    epsilons = random_epsilons(rng, n_attr)
    weights = rng.standard_normal((n_classes, n_attr))
    weights[0] = 0.0
    biases = np.concatenate([[0.0], rng.uniform(-2.0, -0.5, size=n_classes - 1)])
    oracle = LinearOracle(weights, biases)
    m = build_budget_matrix(BudgetSpec(epsilons))
    return LinearInstance(oracle, SemanticBasis.identity(n_attr), m, np.zeros(n_attr), 0)


def boundary_distances(instance: LinearInstance) -> np.ndarray:
    """M-norm distance from the origin to each pairwise boundary against class y."""
    oracle, _, m, _, y = instance
    distances = []
    for c in range(oracle.num_classes):
        if c == y:
            continue
        a = oracle.weights[c] - oracle.weights[y]
        v = oracle.biases[c] - oracle.biases[y]
        distances.append(abs(v) / dual_norm(a, m))
    return np.array(distances)


def minimum_distance(instance: LinearInstance) -> float:
    return float(np.min(boundary_distances(instance)))
