"""Propagation of coefficient posteriors to output moments and Sobol ratios.

With an orthonormal basis whose constant term comes first, the output mean
is the first coefficient and the output variance is the sum of squares of
the remaining ones. Under a Gaussian coefficient posterior the mean is
Gaussian in closed form, while the variance and Sobol ratios are quadratic
forms (generalized chi-squared) and are reported as seeded sample clouds.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .basis import MultiIndexSet
from .conjugate import CoefficientPosterior
from .linalg import mvn_draws, psd_sqrt, symmetrize

MIN_CLOUD_SIZE = 1000


class MomentKind(str, Enum):
    GAUSSIAN_CLOSED_FORM = "gaussian_closed_form"
    SAMPLE_CLOUD = "sample_cloud"


@dataclass(frozen=True)
class MomentDistribution:
    """Distribution of an output moment under coefficient uncertainty.

    Closed-form results carry (mean, variance) of a Gaussian. Sample clouds
    carry the draws; ``mean`` is the analytic expectation of the moment and
    ``variance`` the spread of the cloud around it.
    """

    kind: MomentKind
    mean: float
    variance: float
    samples: np.ndarray | None = None

    def __post_init__(self):
        if self.kind is MomentKind.SAMPLE_CLOUD:
            if self.samples is None or self.samples.size < MIN_CLOUD_SIZE:
                raise ValueError(f"sample cloud needs at least {MIN_CLOUD_SIZE} draws")
        elif self.variance < 0:
            raise ValueError("closed-form variance must be nonnegative")

    def credible_interval(self, level: float = 0.95) -> tuple[float, float]:
        if self.kind is MomentKind.SAMPLE_CLOUD:
            tail = 100.0 * (1.0 - level) / 2.0
            lo, hi = np.percentile(self.samples, [tail, 100.0 - tail])
            return float(lo), float(hi)
        from scipy.stats import norm

        half = norm.ppf(0.5 + level / 2.0) * np.sqrt(self.variance)
        return self.mean - half, self.mean + half


@dataclass(frozen=True)
class QuadraticForm:
    """Quadratic form alpha^T E alpha of a Gaussian coefficient vector."""

    matrix: np.ndarray
    base: CoefficientPosterior

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if e.shape != (self.base.n, self.base.n):
            raise ValueError("quadratic form matrix does not match posterior dimension")
        if not np.allclose(e, e.T, atol=1e-12 * max(1.0, float(np.abs(e).max(initial=0.0)))):
            raise ValueError("quadratic form matrix must be symmetric")
        object.__setattr__(self, "matrix", symmetrize(e))

    def expectation(self) -> float:
        """Closed form: tr(E Sigma) + mu^T E mu."""
        mu, sigma = self.base.mean, self.base.covariance
        return float(np.trace(self.matrix @ sigma) + mu @ self.matrix @ mu)


def output_mean_distribution(post: CoefficientPosterior) -> MomentDistribution:
    """Gaussian over the output mean: first coefficient's marginal."""
    return MomentDistribution(
        MomentKind.GAUSSIAN_CLOSED_FORM,
        mean=float(post.mean[0]),
        variance=float(post.covariance[0, 0]),
    )


def variance_expectation(post: CoefficientPosterior) -> float:
    """Analytic expectation of the output variance under the posterior."""
    mu, sigma = post.mean[1:], np.diag(post.covariance)[1:]
    return float(np.sum(mu**2 + sigma))


def output_variance_distribution(post: CoefficientPosterior, n_samples: int,
                                 seed: int = 0) -> MomentDistribution:
    """Sample cloud of the output variance over posterior coefficient draws."""
    if n_samples < MIN_CLOUD_SIZE:
        raise ValueError(f"need at least {MIN_CLOUD_SIZE} samples, got {n_samples}")
    rng = np.random.default_rng(seed)
    draws = mvn_draws(rng, post.mean, post.covariance, n_samples)
    cloud = np.sum(draws[:, 1:] ** 2, axis=1)
    return MomentDistribution(
        MomentKind.SAMPLE_CLOUD,
        mean=variance_expectation(post),
        variance=float(cloud.var(ddof=1)) if n_samples > 1 else 0.0,
        samples=cloud,
    )


def quadratic_form_samples(qf: QuadraticForm, n_samples: int, seed: int = 0) -> np.ndarray:
    """Draws of alpha^T E alpha via the centred decomposition.

    alpha^T E alpha = (alpha-mu)^T E (alpha-mu) + 2 (alpha-mu)^T E mu
    + mu^T E mu, with alpha - mu = sqrt(Sigma) a for standard-normal a.
    """
    rng = np.random.default_rng(seed)
    mu = qf.base.mean
    root = psd_sqrt(qf.base.covariance)
    deviations = rng.standard_normal((n_samples, mu.size)) @ root.T
    e_dev = deviations @ qf.matrix
    quad = np.sum(e_dev * deviations, axis=1)
    cross = 2.0 * (deviations @ (qf.matrix @ mu))
    return quad + cross + float(mu @ qf.matrix @ mu)


def subselect(idx: MultiIndexSet, degree: int, axis: int) -> MultiIndexSet:
    """Keep multi-indices whose component along ``axis`` (1-based) equals ``degree``.

    The result can be empty (e.g. when ``degree`` exceeds the max degree).
    """
    if not 1 <= axis <= idx.d:
        raise ValueError(f"axis must be in [1, {idx.d}], got {axis}")
    kept = tuple(t for t in idx.indices if t[axis - 1] == degree)
    return MultiIndexSet(kept, idx.scheme, idx.max_degree)


def first_order_indices(idx: MultiIndexSet, axis: int) -> MultiIndexSet:
    """Multi-indices that involve only ``axis`` (1-based), at any degree >= 1."""
    if not 1 <= axis <= idx.d:
        raise ValueError(f"axis must be in [1, {idx.d}], got {axis}")
    kept = tuple(
        t for t in idx.indices
        if t[axis - 1] >= 1 and all(k == 0 for i, k in enumerate(t) if i != axis - 1)
    )
    return MultiIndexSet(kept, idx.scheme, idx.max_degree)


def sobol_ratio_samples(post: CoefficientPosterior, idx: MultiIndexSet,
                        subsel: MultiIndexSet, n_samples: int, seed: int = 0) -> np.ndarray:
    """Draws of the Sobol ratio for a subselected group of multi-indices.

    Numerator and denominator use the same coefficient draw; the constant
    term is excluded from both (it carries no variance).
    """
    if idx.n != post.n:
        raise ValueError("index set does not match posterior dimension")
    constant = (0,) * idx.d
    try:
        positions = [idx.position(t) for t in subsel.indices if t != constant]
    except KeyError as exc:
        raise ValueError(f"subselection contains {exc.args[0]}, not in the index set") from None
    denom_positions = [j for j, t in enumerate(idx.indices) if t != constant]
    mu_nc = post.mean[denom_positions]
    cov_nc = post.covariance[np.ix_(denom_positions, denom_positions)]
    if np.all(mu_nc == 0.0) and np.all(cov_nc == 0.0):
        raise ValueError("all non-constant coefficients are exactly zero; ratio undefined")

    rng = np.random.default_rng(seed)
    draws = mvn_draws(rng, post.mean, post.covariance, n_samples)
    denom = np.sum(draws[:, denom_positions] ** 2, axis=1)
    if not positions:
        return np.zeros(n_samples)
    numer = np.sum(draws[:, positions] ** 2, axis=1)
    return numer / denom
