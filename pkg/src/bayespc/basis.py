"""Orthonormal polynomial bases, multi-index sets, and design matrices.

Univariate families are evaluated through their three-term recurrence in
orthonormal form, never through monomial expansion, so high degrees stay
numerically stable. Multivariate basis functions are tensor products over
independent input dimensions, selected by a multi-index set.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

#: Excursions beyond a distribution's support up to this size are treated
#: as rounding noise by callers that clamp (see data.map_to_unit_interval).
SUPPORT_TOLERANCE = 1e-9

_TENSOR_GRID_LIMIT = 10_000_000


class DistributionKind(str, Enum):
    UNIFORM_INTERVAL = "uniform_interval"
    STANDARD_GAUSSIAN = "standard_gaussian"


class IndexScheme(str, Enum):
    TENSOR_GRID = "tensor_grid"
    TOTAL_ORDER = "total_order"
    HYPERBOLIC_CROSS = "hyperbolic_cross"


class BasisFamily(str, Enum):
    LEGENDRE = "legendre_orthonormal"
    HERMITE = "hermite_orthonormal"


@dataclass(frozen=True)
class InputDistribution:
    """Marginal distribution of one input dimension.

    The density is normalized to unit mass: uniform on [lower, upper] or a
    standard Gaussian (lower/upper ignored).
    """

    kind: DistributionKind
    lower: float = -1.0
    upper: float = 1.0

    def __post_init__(self):
        if self.kind is DistributionKind.UNIFORM_INTERVAL and not self.lower < self.upper:
            raise ValueError(
                f"uniform interval needs lower < upper, got [{self.lower}, {self.upper}]"
            )

    @classmethod
    def uniform(cls, lower: float = -1.0, upper: float = 1.0) -> "InputDistribution":
        return cls(DistributionKind.UNIFORM_INTERVAL, float(lower), float(upper))

    @classmethod
    def gaussian(cls) -> "InputDistribution":
        return cls(DistributionKind.STANDARD_GAUSSIAN)

    def support(self) -> tuple[float, float]:
        if self.kind is DistributionKind.UNIFORM_INTERVAL:
            return self.lower, self.upper
        return -np.inf, np.inf

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind is DistributionKind.UNIFORM_INTERVAL:
            return rng.uniform(self.lower, self.upper, size=n)
        return rng.standard_normal(n)

    @property
    def family(self) -> BasisFamily:
        """The orthonormal polynomial family matched to this density."""
        if self.kind is DistributionKind.UNIFORM_INTERVAL:
            return BasisFamily.LEGENDRE
        return BasisFamily.HERMITE


@dataclass(frozen=True)
class InputSpace:
    """Independent product of marginal input distributions."""

    dims: tuple[InputDistribution, ...]

    def __post_init__(self):
        if len(self.dims) < 1:
            raise ValueError("input space needs at least one dimension")
        object.__setattr__(self, "dims", tuple(self.dims))

    @classmethod
    def uniform_cube(cls, d: int, lower: float = -1.0, upper: float = 1.0) -> "InputSpace":
        return cls(tuple(InputDistribution.uniform(lower, upper) for _ in range(d)))

    @classmethod
    def gaussian(cls, d: int) -> "InputSpace":
        return cls(tuple(InputDistribution.gaussian() for _ in range(d)))

    @property
    def d(self) -> int:
        return len(self.dims)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n joint samples, shape (n, d)."""
        return np.column_stack([dist.sample(rng, n) for dist in self.dims])


@dataclass(frozen=True)
class MultiIndexSet:
    """Set of polynomial multi-indices, graded-lexicographically ordered.

    The constant (all-zeros) index comes first for sets produced by
    build_index_set; subselections (see moments.subselect) may omit it.
    """

    indices: tuple[tuple[int, ...], ...]
    scheme: IndexScheme
    max_degree: int

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(tuple(int(k) for k in t) for t in self.indices))
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("duplicate multi-indices")
        widths = {len(t) for t in self.indices}
        if len(widths) > 1:
            raise ValueError("multi-indices of mixed dimension")
        if any(k < 0 for t in self.indices for k in t):
            raise ValueError("negative entries in multi-index")

    @property
    def d(self) -> int:
        # subselections may be empty; every built set carries the constant term
        return len(self.indices[0]) if self.indices else 0

    @property
    def n(self) -> int:
        """Cardinality: number of basis terms."""
        return len(self.indices)

    @cached_property
    def _positions(self) -> dict[tuple[int, ...], int]:
        return {t: j for j, t in enumerate(self.indices)}

    def position(self, index: tuple[int, ...]) -> int:
        return self._positions[tuple(index)]

    def __contains__(self, index) -> bool:
        return tuple(index) in self._positions

    def max_degree_per_dim(self) -> np.ndarray:
        return np.max(np.asarray(self.indices, dtype=int), axis=0)


def _graded_lex(indices) -> tuple[tuple[int, ...], ...]:
    return tuple(sorted(set(indices), key=lambda t: (sum(t), t)))


def _total_order_indices(d: int, p: int) -> list[tuple[int, ...]]:
    if d == 1:
        return [(k,) for k in range(p + 1)]
    out = []
    for k in range(p + 1):
        for rest in _total_order_indices(d - 1, p - k):
            out.append((k,) + rest)
    return out


def _hyperbolic_indices(d: int, budget: int) -> list[tuple[int, ...]]:
    # prod(j_k + 1) <= budget
    if d == 1:
        return [(k,) for k in range(budget)]
    out = []
    for k in range(budget):
        for rest in _hyperbolic_indices(d - 1, budget // (k + 1)):
            out.append((k,) + rest)
    return out


def build_index_set(scheme: IndexScheme, d: int, p: int) -> MultiIndexSet:
    """Construct the multi-index set for a scheme, dimension, and max degree.

    Tensor grid keeps every index with all components <= p; total order keeps
    component sums <= p; hyperbolic cross keeps prod(j_k + 1) <= p + 1.
    """
    scheme = IndexScheme(scheme)
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if p < 0:
        raise ValueError(f"max degree must be >= 0, got {p}")
    if scheme is IndexScheme.TENSOR_GRID:
        if (p + 1) ** d > _TENSOR_GRID_LIMIT:
            raise ValueError(
                f"tensor grid with d={d}, p={p} has {(p + 1) ** d} indices; refusing"
            )
        grids = np.indices((p + 1,) * d).reshape(d, -1).T
        indices = [tuple(row) for row in grids]
    elif scheme is IndexScheme.TOTAL_ORDER:
        indices = _total_order_indices(d, p)
    else:
        indices = _hyperbolic_indices(d, p + 1)
    return MultiIndexSet(_graded_lex(indices), scheme, p)


def recurrence_coefficients(dist: InputDistribution, max_degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Monic three-term recurrence (alpha, beta) for the matched family.

    pi_{k+1}(x) = (x - alpha_k) pi_k(x) - beta_k pi_{k-1}(x), with beta_0 = 1
    because the densities carry unit mass.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    n = max_degree + 1
    alpha = np.zeros(n)
    beta = np.ones(n)
    k = np.arange(1, n)
    if dist.kind is DistributionKind.UNIFORM_INTERVAL:
        center = 0.5 * (dist.lower + dist.upper)
        half = 0.5 * (dist.upper - dist.lower)
        alpha[:] = center
        if n > 1:
            beta[1:] = half**2 * k**2 / (4.0 * k**2 - 1.0)
    else:
        if n > 1:
            beta[1:] = k.astype(float)
    return alpha, beta


@dataclass(frozen=True)
class UnivariateBasis:
    """Orthonormal univariate polynomial family defined by its recurrence."""

    family: BasisFamily
    alpha: np.ndarray
    sqrt_beta: np.ndarray

    @classmethod
    def for_distribution(cls, dist: InputDistribution, max_degree: int) -> "UnivariateBasis":
        alpha, beta = recurrence_coefficients(dist, max_degree)
        return cls(dist.family, alpha, np.sqrt(beta))

    @property
    def max_degree(self) -> int:
        return len(self.alpha) - 1

    def eval_all(self, x: np.ndarray, max_degree: int | None = None) -> np.ndarray:
        """Evaluate degrees 0..max_degree at x; shape (len(x), max_degree+1)."""
        if max_degree is None:
            max_degree = self.max_degree
        if max_degree > self.max_degree:
            raise ValueError(
                f"degree {max_degree} beyond stored recurrence (max {self.max_degree})"
            )
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((x.size, max_degree + 1))
        out[:, 0] = 1.0
        if max_degree >= 1:
            out[:, 1] = (x - self.alpha[0]) / self.sqrt_beta[1]
        for k in range(1, max_degree):
            out[:, k + 1] = (
                (x - self.alpha[k]) * out[:, k] - self.sqrt_beta[k] * out[:, k - 1]
            ) / self.sqrt_beta[k + 1]
        return out


def eval_univariate(basis: UnivariateBasis, degree: int, x) -> np.ndarray | float:
    """Orthonormal polynomial of the given degree at x (scalar or array)."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    scalar = np.isscalar(x)
    values = basis.eval_all(x, max_degree=degree)[:, degree]
    return float(values[0]) if scalar else values


def gauss_quadrature(dist: InputDistribution, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule (nodes, weights) integrating against the unit-mass density.

    Exact for polynomials up to degree 2*n_points - 1; weights sum to 1.
    Computed from the Jacobi matrix of the recurrence (Golub-Welsch).
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    alpha, beta = recurrence_coefficients(dist, n_points - 1)
    jacobi = np.diag(alpha)
    if n_points > 1:
        off = np.sqrt(beta[1:n_points])
        jacobi += np.diag(off, 1) + np.diag(off, -1)
    nodes, vecs = np.linalg.eigh(jacobi)
    weights = vecs[0, :] ** 2  # beta_0 = 1
    return nodes, weights


@dataclass(frozen=True)
class DesignMatrix:
    """Row-weighted matrix of multivariate basis evaluations.

    Entry (i, j) is weights[i] * prod_k phi_{index_j[k]}(x_k^{(i)}).
    """

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if values.ndim != 2:
            raise ValueError("design matrix must be 2-D")
        if weights.shape != (values.shape[0],):
            raise ValueError("one weight per row required")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite design matrix entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def design_matrix(space: InputSpace, idx: MultiIndexSet, x: np.ndarray,
                  weights: np.ndarray | None = None) -> DesignMatrix:
    """Assemble the design matrix of basis evaluations at sample inputs.

    ``x`` is (M, d). Points slightly outside a uniform support trigger a
    warning, never a failure; the basis extrapolates polynomially.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != space.d:
        raise ValueError(f"inputs have shape {x.shape}, expected (M, {space.d})")
    if idx.n == 0:
        raise ValueError("cannot build a design matrix from an empty index set")
    if idx.d != space.d:
        raise ValueError(f"index set dimension {idx.d} != space dimension {space.d}")
    m = x.shape[0]
    if weights is None:
        weights = np.ones(m)
    weights = np.asarray(weights, dtype=float)

    per_dim_degree = idx.max_degree_per_dim()
    columns = []
    for i, dist in enumerate(space.dims):
        lo, hi = dist.support()
        excursion = max(
            float(np.max(lo - x[:, i], initial=0.0)),
            float(np.max(x[:, i] - hi, initial=0.0)),
        )
        if excursion > 0.0:
            warnings.warn(
                f"inputs exceed support of dimension {i} by {excursion:.3e}",
                stacklevel=2,
            )
        basis = UnivariateBasis.for_distribution(dist, int(per_dim_degree[i]))
        columns.append(basis.eval_all(x[:, i]))

    values = np.empty((m, idx.n))
    for j, index in enumerate(idx.indices):
        col = weights.copy()
        for i, degree in enumerate(index):
            if degree:
                col *= columns[i][:, degree]
        values[:, j] = col
    # degree-0 factors contribute 1; rows with all-zero index are the weights
    return DesignMatrix(values, weights)
