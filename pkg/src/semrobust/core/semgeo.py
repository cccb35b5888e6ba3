"""
Geometry of the identity-preserving perturbation set.

A semantic perturbation is a coefficient vector delta over N attribute
directions. Its latent displacement is eta = V^T delta and its magnitude is
measured by the anisotropic norm ||delta||_{M,2} = sqrt(delta^T M delta) with
M = diag(eps_i^-2). The admissible set is the ellipsoid ||delta||_{M,2} <= 1.

M is always diagonal, so every bilinear form, inverse and Cholesky factor in
this module reduces to elementwise arithmetic on the diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from dataclasses import field

import numpy as np
from scipy import linalg
from scipy.optimize import bisect

from ..exceptions import DomainError
from ..exceptions import InvalidBudgetError
from ..exceptions import NumericalError
from ..exceptions import ShapeError
from ..types import Coefficients
from ..types import FloatArray
from ..types import LatentVector
from ..utils.logging import get_logger

logger = get_logger(__name__)

DEFAULT_ATTRIBUTE_NAMES = ("pose", "age", "gender", "smile", "eyeglasses")
DEFAULT_EPSILONS = (0.5, 0.5, 0.2, 0.8, 0.5)

UNIT_NORM_TOLERANCE = 1e-9
RENORMALIZE_WARN_THRESHOLD = 1e-6
BRACKET_DOUBLING_CAP = 200
BISECTION_REL_WIDTH = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SemanticBasis:
    """N unit-norm semantic directions in a d-dimensional latent space."""

    directions: FloatArray
    attribute_names: tuple[str, ...]

    def __post_init__(self):
        directions = np.asarray(self.directions, dtype=np.float64)
        if directions.ndim != 2:
            raise ShapeError(
                "Semantic directions must be a 2-D matrix",
                field_name="directions",
                field_value=str(directions.shape),
            )
        n_attr, latent_dim = directions.shape
        if n_attr < 1 or latent_dim < n_attr:
            raise ShapeError(
                f"Semantic basis requires 1 <= N <= d, got N={n_attr}, d={latent_dim}",
                field_name="directions",
                validation_rule="1 <= N <= d",
            )
        if not np.all(np.isfinite(directions)):
            raise ShapeError("Semantic directions contain non-finite entries", "directions")
        norms = np.linalg.norm(directions, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE):
            raise ShapeError(
                "Every semantic direction must have unit Euclidean norm",
                field_name="directions",
                field_value=[float(n) for n in norms],
                validation_rule="|norm - 1| <= 1e-9",
            )
        names = tuple(str(name) for name in self.attribute_names)
        if len(names) != n_attr or len(set(names)) != n_attr:
            raise ShapeError(
                f"Expected {n_attr} distinct attribute names, got {list(names)}",
                field_name="attribute_names",
            )
        object.__setattr__(self, "directions", _frozen(directions))
        object.__setattr__(self, "attribute_names", names)

    @property
    def num_attributes(self) -> int:
        return self.directions.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.directions.shape[1]

    @classmethod
    def from_matrix(cls, directions, attribute_names=None) -> SemanticBasis:
        """Build a basis from an arbitrary direction matrix, renormalizing its rows.

        A warning is logged when a row's norm had to move by more than 1e-6.
        """
        directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        norms = np.linalg.norm(directions, axis=1)
        if np.any(norms == 0) or not np.all(np.isfinite(norms)):
            raise ShapeError("Direction rows must be finite and nonzero", "directions")
        adjustment = float(np.max(np.abs(norms - 1.0)))
        if adjustment > RENORMALIZE_WARN_THRESHOLD:
            logger.warning(
                f"Renormalized semantic directions (max norm adjustment {adjustment:.3g})"
            )
        if attribute_names is None:
            attribute_names = default_attribute_names(directions.shape[0])
        return cls(directions / norms[:, None], tuple(attribute_names))

    @classmethod
    def random_orthonormal(cls, num_attributes, latent_dim, seed, attribute_names=None):
        """Seeded orthonormal rows from the QR factorization of a Gaussian matrix."""
        if num_attributes < 1 or latent_dim < num_attributes:
            raise ShapeError(
                f"Random basis requires 1 <= N <= d, got N={num_attributes}, d={latent_dim}",
                field_name="num_attributes",
            )
        rng = np.random.default_rng(seed)
        gaussian = rng.standard_normal((latent_dim, num_attributes))
        q, r = np.linalg.qr(gaussian)
        # Sign-fix so the factorization is unique
        q = q * np.sign(np.diag(r))[None, :]
        return cls.from_matrix(q.T, attribute_names)

    @classmethod
    def identity(cls, num_attributes, attribute_names=None) -> SemanticBasis:
        """Basis with V = I, so latent codes and perturbation coefficients coincide."""
        if attribute_names is None:
            attribute_names = default_attribute_names(num_attributes)
        return cls(np.eye(num_attributes), tuple(attribute_names))

    def restrict(self, index: int) -> SemanticBasis:
        """Single-attribute sub-basis holding only row `index`."""
        if not 0 <= index < self.num_attributes:
            raise ShapeError(
                f"Attribute index {index} out of range for N={self.num_attributes}",
                field_name="attribute_index",
                field_value=index,
            )
        return SemanticBasis(self.directions[index : index + 1], (self.attribute_names[index],))


def default_attribute_names(num_attributes: int) -> tuple[str, ...]:
    if num_attributes <= len(DEFAULT_ATTRIBUTE_NAMES):
        return DEFAULT_ATTRIBUTE_NAMES[:num_attributes]
    return tuple(f"attr{i}" for i in range(num_attributes))


@dataclass(frozen=True)
class BudgetSpec:
    """Per-attribute maximum latent displacements eps_i."""

    epsilons: tuple[float, ...]

    def __post_init__(self):
        eps = np.atleast_1d(np.asarray(self.epsilons, dtype=np.float64))
        if eps.ndim != 1 or eps.size == 0:
            raise InvalidBudgetError("Budget needs at least one epsilon", "epsilons")
        if not np.all(np.isfinite(eps)) or np.any(eps <= 0):
            raise InvalidBudgetError(
                "Every per-attribute budget must be positive and finite",
                field_name="epsilons",
                field_value=[float(e) for e in eps],
                validation_rule="0 < eps_i < inf",
            )
        object.__setattr__(self, "epsilons", tuple(float(e) for e in eps))


@dataclass(frozen=True, eq=False)
class BudgetMatrix:
    """Diagonal positive-definite M defining the perturbation ellipsoid."""

    diag: FloatArray
    global_scale: float = 1.0
    inverse_diag: FloatArray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        diag = np.atleast_1d(np.asarray(self.diag, dtype=np.float64))
        if diag.ndim != 1 or not np.all(np.isfinite(diag)) or np.any(diag <= 0):
            raise InvalidBudgetError(
                "Budget matrix diagonal must be positive and finite",
                field_name="diag",
                field_value=[float(x) for x in np.ravel(diag)],
            )
        scale = float(self.global_scale)
        if not math.isfinite(scale) or scale <= 0:
            raise InvalidBudgetError("Global budget scale must be positive", "global_scale", scale)
        object.__setattr__(self, "diag", _frozen(diag))
        object.__setattr__(self, "global_scale", scale)
        object.__setattr__(self, "inverse_diag", _frozen(1.0 / diag))

    @property
    def size(self) -> int:
        return self.diag.shape[0]

    @property
    def semi_axes(self) -> FloatArray:
        """Ellipsoid semi-axis lengths eps_i * eps (the diagonal Cholesky factor of M^-1)."""
        return np.sqrt(self.inverse_diag)

    def restrict(self, index: int) -> BudgetMatrix:
        if not 0 <= index < self.size:
            raise ShapeError(
                f"Attribute index {index} out of range for N={self.size}", "attribute_index"
            )
        return BudgetMatrix(self.diag[index : index + 1], self.global_scale)


def build_budget_matrix(spec: BudgetSpec) -> BudgetMatrix:
    """M = diag(eps_i^-2) for a per-attribute budget."""
    eps = np.asarray(spec.epsilons, dtype=np.float64)
    return BudgetMatrix(1.0 / eps**2, 1.0)


def rescale_budget(m: BudgetMatrix, eps_global: float) -> BudgetMatrix:
    """Scale the ellipsoid by eps_global: ||delta||_{M'} <= 1 iff ||delta||_M <= eps_global."""
    eps_global = float(eps_global)
    if not math.isfinite(eps_global) or eps_global <= 0:
        raise InvalidBudgetError(
            "Budget scale must be positive and finite",
            field_name="eps_global",
            field_value=eps_global,
        )
    return BudgetMatrix(m.diag / eps_global**2, m.global_scale * eps_global)


def as_coefficients(delta, m_or_n) -> Coefficients:
    """Validate a perturbation vector against a budget matrix or an expected length."""
    expected = m_or_n.size if isinstance(m_or_n, BudgetMatrix) else int(m_or_n)
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (expected,):
        raise ShapeError(
            f"Perturbation has shape {delta.shape}, expected ({expected},)",
            field_name="delta",
        )
    if not np.all(np.isfinite(delta)):
        raise ShapeError("Perturbation contains non-finite entries", "delta")
    return delta


def m_norm(delta, m: BudgetMatrix) -> float:
    """||delta||_{M,2} = sqrt(sum_i delta_i^2 M_ii)."""
    delta = as_coefficients(delta, m)
    return float(linalg.norm(delta * np.sqrt(m.diag)))


def m_norm_batch(deltas: FloatArray, m: BudgetMatrix) -> FloatArray:
    """Row-wise M-norm of an (n, N) array."""
    deltas = np.asarray(deltas, dtype=np.float64)
    return np.sqrt((deltas * deltas) @ m.diag)


def dual_norm(a, m: BudgetMatrix) -> float:
    """||a||_{M^-1,2}, the norm dual to the M-norm."""
    a = as_coefficients(a, m)
    return float(np.sqrt(np.dot(a * a, m.inverse_diag)))


def to_latent(delta, basis: SemanticBasis) -> LatentVector:
    """eta = V^T delta."""
    delta = as_coefficients(delta, basis.num_attributes)
    return delta @ basis.directions


def _shrunk_m_norm(lam: float, delta, m: BudgetMatrix) -> float:
    """||(I + lambda M)^-1 delta||_{M,2}, accumulated without squaring the entries."""
    terms = np.abs(delta) * np.sqrt(m.diag) / (1.0 + lam * m.diag)
    return float(linalg.norm(terms))


def _shrunk_excess(lam: float, delta, m: BudgetMatrix) -> float:
    # Same sign and root as h, finite for every finite delta
    return _shrunk_m_norm(lam, delta, m) - 1.0


def h_eval(lam: float, delta, m: BudgetMatrix) -> float:
    """Root function of the projection multiplier for diagonal M.

    h(lambda) = sum_i delta_i^2 M_ii / (1 + lambda M_ii)^2 - 1, strictly
    decreasing in lambda >= 0 for delta != 0.
    """
    if lam < 0:
        raise DomainError("Projection multiplier must be nonnegative", "lambda", lam)
    radius = _shrunk_m_norm(lam, np.asarray(delta, dtype=np.float64), m)
    return radius * radius - 1.0


def project_with_multiplier(delta, m: BudgetMatrix) -> tuple[Coefficients, float]:
    """Euclidean projection onto ||x||_{M,2} <= 1, also returning the KKT multiplier.

    Interior points are returned unchanged with multiplier 0. Exterior points
    solve (I + lambda* M) x = delta where lambda* is the positive root of h.
    """
    delta = as_coefficients(delta, m)
    radius = _shrunk_m_norm(0.0, delta, m)
    if radius <= 1.0:
        return delta, 0.0

    # The shrunk norm is at most radius * max(1 / M_ii) / lambda, so this is past the root
    lam_hi = max(1.0, radius * float(np.max(m.inverse_diag)))
    while lam_hi > 1.0 and _shrunk_excess(0.5 * lam_hi, delta, m) < 0.0:
        lam_hi *= 0.5
    doublings = 0
    while _shrunk_excess(lam_hi, delta, m) >= 0.0:
        lam_hi *= 2.0
        doublings += 1
        if doublings > BRACKET_DOUBLING_CAP:
            raise NumericalError(
                "Could not bracket the projection multiplier",
                operation="project_to_ellipsoid",
                diagnostics={"delta": delta.tolist(), "lambda_hi": lam_hi},
            )

    try:
        lam_star = bisect(
            _shrunk_excess,
            0.0,
            lam_hi,
            args=(delta, m),
            xtol=BISECTION_REL_WIDTH * (1.0 + lam_hi),
            rtol=4 * np.finfo(float).eps,
            maxiter=400,
        )
    except (RuntimeError, ValueError) as exc:
        raise NumericalError(
            f"Bisection for the projection multiplier failed: {exc}",
            operation="project_to_ellipsoid",
            diagnostics={"delta": delta.tolist(), "lambda_hi": lam_hi},
        )
    return delta / (1.0 + lam_star * m.diag), float(lam_star)


def project_to_ellipsoid(delta, m: BudgetMatrix) -> Coefficients:
    """Closest point (in Euclidean distance) of the ellipsoid ||x||_{M,2} <= 1."""
    projected, _ = project_with_multiplier(delta, m)
    return projected


def sample_uniform_ellipsoid(m: BudgetMatrix, rng: np.random.Generator, size=None) -> FloatArray:
    """Draw uniformly from the volume of ||delta||_{M,2} <= 1.

    A point uniform in the unit ball (Gaussian direction, radius U^(1/N)) is
    deformed by the Cholesky factor of M^-1, which for diagonal M is
    diag(eps_i * eps).
    """
    n_attr = m.size
    shape = (n_attr,) if size is None else (int(size), n_attr)
    direction = rng.standard_normal(shape)
    norms = np.linalg.norm(direction, axis=-1, keepdims=True)
    # A zero Gaussian draw has probability zero; guard it anyway
    norms = np.where(norms == 0.0, 1.0, norms)
    radius = rng.random(shape[:-1] + (1,)) ** (1.0 / n_attr)
    return direction / norms * radius * m.semi_axes
