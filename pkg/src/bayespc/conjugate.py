"""Conjugate Gaussian inference for polynomial coefficients.

Gaussian prior + Gaussian likelihood gives a Gaussian coefficient posterior
in closed form; pushing it through the basis gives a Gaussian process over
outputs. A kernel-space route to the posterior mean is provided as well.
All solves go through Cholesky factorizations with the shared jitter
policy; no matrix is ever inverted explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import DesignMatrix, InputSpace, MultiIndexSet, design_matrix
from .errors import NumericalError
from .linalg import chol_solve, jittered_cholesky, symmetrize


def _check_gaussian_pair(mean: np.ndarray, cov: np.ndarray, what: str,
                         chol_tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (mean.size, mean.size):
        raise ValueError(f"{what}: covariance shape {cov.shape} does not match mean size {mean.size}")
    if not np.allclose(cov, cov.T, atol=1e-8 * max(1.0, float(np.abs(cov).max(initial=0.0)))):
        raise ValueError(f"{what}: covariance is not symmetric")
    cov = symmetrize(cov)
    ladder = tuple(j for j in (0.0, 1e-12, chol_tol) if j <= chol_tol)
    try:
        jittered_cholesky(cov, ladder=ladder)
    except NumericalError as exc:
        raise ValueError(f"{what}: covariance is not PSD within jitter {chol_tol:g}") from exc
    return mean, cov


@dataclass(frozen=True)
class GaussianPrior:
    """Gaussian prior over polynomial coefficients."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean, cov = _check_gaussian_pair(self.mean, self.covariance, "prior")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def isotropic(cls, n: int, variance: float = 1.0,
                  mean: np.ndarray | None = None) -> "GaussianPrior":
        if mean is None:
            mean = np.zeros(n)
        return cls(mean, variance * np.eye(n))

    @property
    def n(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class NoiseSpec:
    """Observation noise variance of the Gaussian likelihood."""

    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"noise variance must be positive, got {self.variance}")


@dataclass(frozen=True)
class CoefficientPosterior:
    """Gaussian posterior over polynomial coefficients."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean, cov = _check_gaussian_pair(self.mean, self.covariance, "posterior", chol_tol=1e-8)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def n(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class PredictiveDistribution:
    """Gaussian over output values at a finite set of query points."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.covariance, dtype=float)
        if mean.size == 0:
            cov = cov.reshape(0, 0)
        else:
            cov = np.atleast_2d(cov)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("predictive covariance shape does not match mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", symmetrize(cov) if mean.size else cov)

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.covariance).copy() if self.mean.size else np.zeros(0)

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(np.clip(self.variances, 0.0, None))


def _weighted_outputs(v: DesignMatrix, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (v.shape[0],):
        raise ValueError(f"outputs have shape {y.shape}, expected ({v.shape[0]},)")
    return v.weights * y


def conjugate_posterior(v: DesignMatrix, y: np.ndarray, prior: GaussianPrior,
                        noise: NoiseSpec) -> CoefficientPosterior:
    """Closed-form Gaussian coefficient posterior.

    Posterior covariance (V^T V / sigma^2 + prior_precision)^-1 and mean
    Sigma (V^T y / sigma^2 + prior_precision mu), all via Cholesky. Row
    weights of the design matrix are applied to y so both sides of the
    regression are weighted consistently.
    """
    vv = v.values
    m, n = vv.shape
    if m < 1:
        raise ValueError("need at least one observation")
    if n != prior.n:
        raise ValueError(f"design matrix has {n} columns but prior has dimension {prior.n}")
    y_eff = _weighted_outputs(v, y)

    prior_chol, _ = jittered_cholesky(prior.covariance)
    eye = np.eye(n)
    prior_precision = chol_solve(prior_chol, eye)

    inv_noise = 1.0 / noise.variance
    precision = symmetrize(inv_noise * (vv.T @ vv) + prior_precision)
    prec_chol, _ = jittered_cholesky(precision)
    covariance = symmetrize(chol_solve(prec_chol, eye))
    rhs = inv_noise * (vv.T @ y_eff) + prior_precision @ prior.mean
    mean = chol_solve(prec_chol, rhs)
    return CoefficientPosterior(mean, covariance)


def predictive(posterior: CoefficientPosterior, space: InputSpace,
               idx: MultiIndexSet, x_star: np.ndarray) -> PredictiveDistribution:
    """Gaussian over outputs at query points x_star (Q, d)."""
    if idx.n != posterior.n:
        raise ValueError(f"index set has {idx.n} terms but posterior has dimension {posterior.n}")
    x_star = np.asarray(x_star, dtype=float)
    if x_star.size == 0:
        return PredictiveDistribution(np.zeros(0), np.zeros((0, 0)))
    v_star = design_matrix(space, idx, x_star).values
    mean = v_star @ posterior.mean
    cov = v_star @ posterior.covariance @ v_star.T
    return PredictiveDistribution(mean, cov)


def kernel_posterior_coefficients(sigma: np.ndarray, v: DesignMatrix, y: np.ndarray,
                                  noise: NoiseSpec) -> np.ndarray:
    """Posterior-mean coefficients through the kernel-space route.

    alpha = Sigma V^T (V Sigma V^T + sigma^2 I)^-1 y. Equals the conjugate
    posterior mean for a zero-mean prior with covariance Sigma.
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    vv = v.values
    m, n = vv.shape
    if sigma.shape != (n, n):
        raise ValueError(f"Sigma has shape {sigma.shape}, expected ({n}, {n})")
    y_eff = _weighted_outputs(v, y)
    gram = vv @ sigma @ vv.T + noise.variance * np.eye(m)
    gram_chol, _ = jittered_cholesky(symmetrize(gram))
    return sigma @ (vv.T @ chol_solve(gram_chol, y_eff))


def physically_informed_prior(coeffs_lowfi: np.ndarray,
                              scale: np.ndarray) -> GaussianPrior:
    """Prior centred on coefficients fitted from a cheaper, related model."""
    return GaussianPrior(np.asarray(coeffs_lowfi, dtype=float), scale)
