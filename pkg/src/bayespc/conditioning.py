"""Conditioning the polynomial surrogate on linear functionals of the output.

Supported functionals are those expressible in coefficient space as
L{g} = C^T alpha for a coefficient-selection matrix C (N, L). The spatial
mean is the built-in special case C = e1: with an orthonormal basis whose
constant term comes first, the output mean IS the first coefficient, so
its blocks reduce to entries of the coefficient posterior.

Conditioning comes in two equivalent routes: on the joint Gaussian over
(outputs at points X, functional values), or directly on the coefficient
posterior. The functional value may be exact or itself Gaussian; in the
latter case the conditioned covariance picks up a total-covariance
inflation term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import DesignMatrix
from .conjugate import CoefficientPosterior, PredictiveDistribution
from .errors import NumericalError
from .linalg import chol_solve, jittered_cholesky, symmetrize


@dataclass(frozen=True)
class LinearFunctionalBlocks:
    """Blocks of the joint Gaussian over point values and functional values.

    mu1/s11 describe g at M points; mu2/s22 the L functional values; s12 the
    (M, L) cross-covariance.
    """

    mu1: np.ndarray
    mu2: np.ndarray
    s11: np.ndarray
    s12: np.ndarray
    s22: np.ndarray

    def __post_init__(self):
        mu1 = np.atleast_1d(np.asarray(self.mu1, dtype=float))
        mu2 = np.atleast_1d(np.asarray(self.mu2, dtype=float))
        s11 = np.atleast_2d(np.asarray(self.s11, dtype=float))
        s12 = np.asarray(self.s12, dtype=float).reshape(mu1.size, mu2.size)
        s22 = np.atleast_2d(np.asarray(self.s22, dtype=float))
        m, ell = mu1.size, mu2.size
        if s11.shape != (m, m) or s22.shape != (ell, ell):
            raise ValueError("block shapes inconsistent with mean lengths")
        for name, val in (("mu1", mu1), ("mu2", mu2), ("s11", s11), ("s12", s12), ("s22", s22)):
            object.__setattr__(self, name, val)

    def joint_covariance(self) -> np.ndarray:
        top = np.hstack([self.s11, self.s12])
        bottom = np.hstack([self.s12.T, self.s22])
        return np.vstack([top, bottom])


@dataclass(frozen=True)
class UncertainFunctionalValue:
    """Gaussian belief over the value of the linear functional."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match mean")
        if not np.allclose(cov, cov.T, atol=1e-10 * max(1.0, float(np.abs(cov).max(initial=0.0)))):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", symmetrize(cov))


def coefficient_functional(n: int, columns: np.ndarray) -> np.ndarray:
    """Selection matrix C (n, L) for the functional L{g} = C^T alpha."""
    c = np.asarray(columns, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    if c.shape[0] != n:
        raise ValueError(f"functional matrix has {c.shape[0]} rows, expected {n}")
    return c


def spatial_mean_functional(n: int) -> np.ndarray:
    """The output-mean functional: selects the constant coefficient."""
    c = np.zeros((n, 1))
    c[0, 0] = 1.0
    return c


def functional_blocks(post: CoefficientPosterior, v: DesignMatrix,
                      functional: np.ndarray) -> LinearFunctionalBlocks:
    """Joint blocks for g at the design points and L{g} = C^T alpha."""
    c = coefficient_functional(post.n, functional)
    vv = v.values
    if vv.shape[1] != post.n:
        raise ValueError("design matrix does not match posterior dimension")
    sigma_c = post.covariance @ c
    return LinearFunctionalBlocks(
        mu1=vv @ post.mean,
        mu2=c.T @ post.mean,
        s11=vv @ post.covariance @ vv.T,
        s12=vv @ sigma_c,
        s22=c.T @ sigma_c,
    )


def spatial_mean_blocks(post: CoefficientPosterior, v: DesignMatrix) -> LinearFunctionalBlocks:
    """Blocks for conditioning on the output mean.

    mu2 is the first coefficient's posterior mean, s12 the design matrix
    times the first covariance column, s22 the (1, 1) covariance entry.
    """
    return functional_blocks(post, v, spatial_mean_functional(post.n))


def _solve_s22(s22: np.ndarray) -> np.ndarray:
    """Cholesky factor of s22, rejecting (numerically) singular blocks."""
    s22 = symmetrize(np.atleast_2d(s22))
    eigvals = np.linalg.eigvalsh(s22)
    top = float(eigvals.max(initial=0.0))
    if top <= 0.0 or float(eigvals.min()) < 1e-12 * top:
        raise NumericalError(
            "functional covariance block is singular; the prior carries no "
            "uncertainty along (part of) the functional, so conditioning is undefined"
        )
    lower, _ = jittered_cholesky(s22)
    return lower


def condition_on_value(blocks: LinearFunctionalBlocks, value: np.ndarray) -> PredictiveDistribution:
    """Condition the joint Gaussian on an exactly known functional value."""
    value = np.atleast_1d(np.asarray(value, dtype=float))
    if value.shape != blocks.mu2.shape:
        raise ValueError("value length does not match the functional dimension")
    lower = _solve_s22(blocks.s22)
    gain = chol_solve(lower, blocks.s12.T).T  # S12 S22^-1, shape (M, L)
    mean = blocks.mu1 + gain @ (value - blocks.mu2)
    cov = blocks.s11 - gain @ blocks.s12.T
    return PredictiveDistribution(mean, symmetrize(cov))


def condition_on_uncertain_value(blocks: LinearFunctionalBlocks,
                                 value: UncertainFunctionalValue) -> PredictiveDistribution:
    """Condition on a functional value known only up to Gaussian uncertainty.

    The mean uses the belief mean; the covariance is the exact-conditioning
    covariance plus the total-covariance inflation S12 S22^-1 Sigma_a
    S22^-T S12^T.
    """
    exact = condition_on_value(blocks, value.mean)
    lower = _solve_s22(blocks.s22)
    gain = chol_solve(lower, blocks.s12.T).T
    inflation = gain @ value.covariance @ gain.T
    return PredictiveDistribution(exact.mean, symmetrize(exact.covariance + inflation))


def condition_coefficients(post: CoefficientPosterior, functional: np.ndarray,
                           value: np.ndarray,
                           value_covariance: np.ndarray | None = None) -> CoefficientPosterior:
    """Condition the coefficient posterior itself on L{g} = C^T alpha = value.

    Equivalent to the block route pushed back into coefficient space; the
    result can be fed to the moments module or evaluated anywhere. With
    value_covariance the update follows the law of total covariance.
    """
    c = coefficient_functional(post.n, functional)
    value = np.atleast_1d(np.asarray(value, dtype=float))
    if value.size != c.shape[1]:
        raise ValueError("value length does not match the functional dimension")
    sigma_c = post.covariance @ c  # (N, L)
    s22 = c.T @ sigma_c
    lower = _solve_s22(s22)
    gain = chol_solve(lower, sigma_c.T).T  # Sigma C S22^-1, shape (N, L)
    mean = post.mean + gain @ (value - c.T @ post.mean)
    cov = post.covariance - gain @ sigma_c.T
    if value_covariance is not None:
        value_cov = np.atleast_2d(np.asarray(value_covariance, dtype=float))
        cov = cov + gain @ value_cov @ gain.T
    return CoefficientPosterior(mean, symmetrize(cov))
