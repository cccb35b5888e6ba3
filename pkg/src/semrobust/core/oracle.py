"""
Classifier oracles over latent codes.

An oracle stands for the composition F(w) = f(G(w)) of a generator and a
recognition model: it maps a latent code w in R^d to logits over Y identities
and exposes vector-Jacobian products so attacks can take exact gradients.
The synthetic families here have closed-form decision geometry and are the
verification targets for the attack and certification code.
"""

from __future__ import annotations

from abc import ABC
from abc import abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax
from scipy.special import softmax

from ..exceptions import ConfigurationError
from ..exceptions import DomainError
from ..exceptions import ShapeError
from ..types import ClassLabel
from ..types import FloatArray
from ..types import LatentVector
from ..types import LossKind
from ..utils.logging import get_logger
from .semgeo import SemanticBasis
from .semgeo import as_coefficients

logger = get_logger(__name__)

PROBABILITY_FLOOR = 1e-12
LOSS_KINDS = ("cross_entropy", "margin")


class ClassifierOracle(ABC):
    """Deterministic map from latent codes to logits over `num_classes` identities.

    Implementations are immutable after construction and safe to evaluate
    from several threads at once.
    """

    num_classes: int
    latent_dim: int

    @abstractmethod
    def logits(self, w) -> FloatArray:
        """Logits for a code of shape (d,) or a batch of shape (n, d)."""

    @abstractmethod
    def logit_vjp(self, w: LatentVector, u: FloatArray) -> LatentVector:
        """J(w)^T u, where J is the (Y, d) Jacobian of the logits at a single code."""

    def probabilities(self, w) -> FloatArray:
        return softmax(self.logits(w), axis=-1)

    def predict(self, w):
        """Argmax class; ties resolve to the lowest class index."""
        return np.argmax(self.logits(w), axis=-1)

    def loss_gradient(self, w: LatentVector, y: ClassLabel, loss_kind: LossKind = "cross_entropy"):
        """Loss at w and its gradient with respect to w."""
        w = self._check_code(w)
        logits = self.logits(w)
        value, u = _loss_and_logit_cotangent(logits, y, loss_kind)
        return value, self.logit_vjp(w, u)

    def _check_code(self, w) -> LatentVector:
        w = np.asarray(w, dtype=np.float64)
        if w.shape[-1] != self.latent_dim:
            raise ShapeError(
                f"Latent code has dimension {w.shape[-1]}, oracle expects {self.latent_dim}",
                field_name="w",
            )
        if not np.all(np.isfinite(w)):
            raise ShapeError("Latent code contains non-finite entries", "w")
        return w


class LinearOracle(ClassifierOracle):
    """logits(w) = W w + b."""

    def __init__(self, weights, biases=None):
        weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
        if biases is None:
            biases = np.zeros(weights.shape[0])
        biases = np.asarray(biases, dtype=np.float64)
        if biases.shape != (weights.shape[0],):
            raise ShapeError("Bias length must match the number of weight rows", "biases")
        if weights.shape[0] < 2:
            raise ConfigurationError("A classifier needs at least two classes", "num_classes")
        weights.setflags(write=False)
        biases.setflags(write=False)
        self.weights = weights
        self.biases = biases
        self.num_classes, self.latent_dim = weights.shape

    def logits(self, w) -> FloatArray:
        w = self._check_code(w)
        return w @ self.weights.T + self.biases

    def logit_vjp(self, w, u) -> LatentVector:
        return np.asarray(u, dtype=np.float64) @ self.weights


class ConstantOracle(ClassifierOracle):
    """Ignores its input; always returns the same logits."""

    def __init__(self, logits, latent_dim: int):
        logits = np.asarray(logits, dtype=np.float64)
        if logits.ndim != 1 or logits.size < 2:
            raise ConfigurationError("Constant logits need at least two classes", "logits")
        logits.setflags(write=False)
        self._logits = logits
        self.num_classes = logits.size
        self.latent_dim = int(latent_dim)

    @classmethod
    def always(cls, label: ClassLabel, num_classes: int, latent_dim: int) -> ConstantOracle:
        logits = np.zeros(num_classes)
        logits[label] = 1.0
        return cls(logits, latent_dim)

    def logits(self, w) -> FloatArray:
        w = self._check_code(w)
        return np.broadcast_to(self._logits, w.shape[:-1] + (self.num_classes,)).copy()

    def logit_vjp(self, w, u) -> LatentVector:
        return np.zeros(self.latent_dim)


class PrototypeOracle(ClassifierOracle):
    """Temperature-scaled cosine similarity between an embedding and a gallery.

    logits_c(w) = tau * cos(A w, g_c)
    """

    def __init__(self, embedding, gallery, temperature: float):
        embedding = np.atleast_2d(np.asarray(embedding, dtype=np.float64))
        gallery = np.atleast_2d(np.asarray(gallery, dtype=np.float64))
        if temperature <= 0:
            raise ConfigurationError("Temperature must be positive", "temperature", temperature)
        if gallery.shape[1] != embedding.shape[0]:
            raise ShapeError("Gallery width must equal the embedding dimension", "gallery")
        gallery_norms = np.linalg.norm(gallery, axis=1)
        if np.any(gallery_norms == 0):
            raise ConfigurationError("Gallery prototypes must be nonzero", "gallery")
        unit_gallery = gallery / gallery_norms[:, None]
        for array in (embedding, gallery, unit_gallery):
            array.setflags(write=False)
        self.embedding = embedding
        self.gallery = gallery
        self.unit_gallery = unit_gallery
        self.temperature = float(temperature)
        self.num_classes = gallery.shape[0]
        self.latent_dim = embedding.shape[1]

    def logits(self, w) -> FloatArray:
        w = self._check_code(w)
        emb = w @ self.embedding.T
        norms = np.linalg.norm(emb, axis=-1, keepdims=True)
        norms = np.where(norms == 0.0, 1.0, norms)
        return self.temperature * (emb / norms) @ self.unit_gallery.T

    def logit_vjp(self, w, u) -> LatentVector:
        emb = self.embedding @ w
        norm = float(np.linalg.norm(emb))
        if norm == 0.0:
            return np.zeros(self.latent_dim)
        u = np.asarray(u, dtype=np.float64)
        cos = self.unit_gallery @ emb / norm
        # d cos_c / d emb = g_c / norm - cos_c * emb / norm^2
        s = self.unit_gallery.T @ u / norm - float(np.dot(cos, u)) * emb / norm**2
        return self.temperature * (self.embedding.T @ s)


@dataclass(frozen=True, eq=False)
class SyntheticPopulation:
    """K identities, one latent code each; identity c carries label c."""

    codes: FloatArray
    seed: int

    def __post_init__(self):
        codes = np.atleast_2d(np.asarray(self.codes, dtype=np.float64))
        if codes.shape[0] < 2:
            raise ConfigurationError("A population needs at least two identities", "num_identities")
        if not np.all(np.isfinite(codes)):
            raise ShapeError("Population codes contain non-finite entries", "codes")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def num_identities(self) -> int:
        return self.codes.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.codes.shape[1]

    @property
    def labels(self):
        return np.arange(self.num_identities)

    def subset(self, count: int) -> SyntheticPopulation:
        return SyntheticPopulation(self.codes[:count], self.seed)

    def to_dict(self) -> dict:
        return {"latent_dim": self.latent_dim, "seed": self.seed, "codes": self.codes.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> SyntheticPopulation:
        try:
            codes = np.asarray(data["codes"], dtype=np.float64)
            latent_dim = int(data["latent_dim"])
            seed = int(data["seed"])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"Malformed population document: {e}", "population_file")
        if codes.ndim != 2 or codes.shape[1] != latent_dim:
            raise ShapeError("Population codes do not match the declared latent_dim", "codes")
        return cls(codes, seed)


def gen_population(num_identities: int, latent_dim: int, seed: int) -> SyntheticPopulation:
    """Draw K i.i.d. standard normal codes from a seeded stream."""
    if num_identities < 2:
        raise ConfigurationError(
            "num_identities must be at least 2", "num_identities", num_identities
        )
    if latent_dim < 1:
        raise ConfigurationError("latent_dim must be at least 1", "latent_dim", latent_dim)
    rng = np.random.default_rng(seed)
    codes = rng.standard_normal((num_identities, latent_dim))
    logger.debug(f"Generated population of {num_identities} codes in R^{latent_dim}")
    return SyntheticPopulation(codes, int(seed))


def make_prototype_oracle(
    pop: SyntheticPopulation, embed_dim: int, temperature: float, seed: int, embedding=None
) -> PrototypeOracle:
    """Gallery built from each identity's single exemplar: g_c = A w_c.

    `embedding` overrides the random A (e.g. the identity matrix in tests).
    """
    if embed_dim < 1:
        raise ConfigurationError("embed_dim must be at least 1", "embed_dim", embed_dim)
    if temperature <= 0:
        raise ConfigurationError("temperature must be positive", "temperature", temperature)
    if embedding is None:
        rng = np.random.default_rng(seed)
        embedding = rng.standard_normal((embed_dim, pop.latent_dim)) / np.sqrt(pop.latent_dim)
    embedding = np.asarray(embedding, dtype=np.float64)
    gallery = pop.codes @ embedding.T
    return PrototypeOracle(embedding, gallery, temperature)


def make_linear_oracle(pop: SyntheticPopulation) -> LinearOracle:
    """Nearest-exemplar linear classifier: logit_c = w_c . w - ||w_c||^2 / 2."""
    codes = pop.codes
    return LinearOracle(codes, -0.5 * np.sum(codes * codes, axis=1))


def _loss_and_logit_cotangent(logits, y: ClassLabel, loss_kind: LossKind):
    """Loss value and d loss / d logits for one logit vector."""
    num_classes = logits.shape[-1]
    if not 0 <= y < num_classes:
        raise DomainError(f"Class {y} outside 0..{num_classes - 1}", "y", y)
    u = np.zeros(num_classes)
    if loss_kind == "cross_entropy":
        log_p = log_softmax(logits)
        p = np.exp(log_p)
        # p_y is floored at 1e-12 so the loss stays finite
        value = -max(float(log_p[y]), float(np.log(PROBABILITY_FLOOR)))
        u[:] = p
        u[y] -= 1.0
        return value, u
    if loss_kind == "margin":
        runner_up = runner_up_class(logits, y)
        value = float(logits[runner_up] - logits[y])
        u[runner_up] = 1.0
        u[y] = -1.0
        return value, u
    raise ConfigurationError(
        f"Unknown loss kind {loss_kind!r}; expected one of {LOSS_KINDS}", "loss_kind", loss_kind
    )


def runner_up_class(logits, y: ClassLabel) -> int:
    """Highest-scoring class other than y (lowest index on ties)."""
    masked = np.array(logits, dtype=np.float64)
    masked[y] = -np.inf
    return int(np.argmax(masked))


def perturbed_code(basis: SemanticBasis, w, delta) -> LatentVector:
    delta = as_coefficients(delta, basis.num_attributes)
    return np.asarray(w, dtype=np.float64) + delta @ basis.directions


def loss_value(oracle, basis, w, delta, y, loss_kind="cross_entropy") -> float:
    logits = oracle.logits(perturbed_code(basis, w, delta))
    value, _ = _loss_and_logit_cotangent(logits, y, loss_kind)
    return value


def loss_and_grad_delta(oracle, basis, w, delta, y, loss_kind="cross_entropy"):
    """Loss at w + V^T delta and its exact gradient in delta (chain rule: V grad_w)."""
    code = perturbed_code(basis, w, delta)
    value, grad_w = oracle.loss_gradient(code, y, loss_kind)
    return value, basis.directions @ grad_w


def logit_difference_and_grad(oracle, basis, w, delta, target, y):
    """g(delta) = logit_target - logit_y at w + V^T delta, with its delta-gradient."""
    code = perturbed_code(basis, w, delta)
    logits = oracle.logits(code)
    u = np.zeros(oracle.num_classes)
    u[target] += 1.0
    u[y] -= 1.0
    grad_w = oracle.logit_vjp(code, u)
    return float(logits[target] - logits[y]), basis.directions @ grad_w


def finite_diff_grad_delta(oracle, basis, w, delta, y, loss_kind="cross_entropy", step=1e-5):
    """Central-difference estimate of the delta-gradient of the loss."""
    if step <= 0:
        raise DomainError("Finite-difference step must be positive", "step", step)
    delta = as_coefficients(delta, basis.num_attributes)
    grad = np.zeros_like(delta)
    for i in range(delta.size):
        offset = np.zeros_like(delta)
        offset[i] = step
        upper = loss_value(oracle, basis, w, delta + offset, y, loss_kind)
        lower = loss_value(oracle, basis, w, delta - offset, y, loss_kind)
        grad[i] = (upper - lower) / (2.0 * step)
    return grad


def build_oracle(family: str, pop: SyntheticPopulation, embed_dim=32, temperature=10.0, seed=0):
    """Oracle factory used by the experiment harness."""
    if family == "prototype":
        return make_prototype_oracle(pop, embed_dim, temperature, seed)
    if family == "linear":
        return make_linear_oracle(pop)
    raise ConfigurationError(
        f"Unknown oracle family {family!r}; expected 'prototype' or 'linear'",
        "oracle_family",
        family,
    )
