"""Cholesky-with-jitter helpers and PSD utilities used across modules."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NumericalError

# Shared escalation ladder: try the matrix as-is, then add increasing
# diagonal jitter before giving up.
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def jittered_cholesky(a: np.ndarray, ladder=JITTER_LADDER) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``a``, escalating diagonal jitter on failure.

    Returns (L, jitter_used). Raises NumericalError if the largest jitter
    in the ladder still leaves the matrix indefinite.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    eye = np.eye(a.shape[0])
    for jitter in ladder:
        try:
            lower = scipy.linalg.cholesky(a + jitter * eye, lower=True)
            return lower, jitter
        except scipy.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"Cholesky failed for {a.shape[0]}x{a.shape[0]} matrix even with "
        f"jitter {ladder[-1]:g}"
    )


def chol_solve(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b given the lower Cholesky factor of A."""
    return scipy.linalg.cho_solve((lower, True), b)


def chol_logdet(lower: np.ndarray) -> float:
    """log det A from its lower Cholesky factor."""
    return 2.0 * float(np.sum(np.log(np.diag(lower))))


def psd_sqrt(a: np.ndarray, clip_tol: float = 1e-12) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Tolerates (clips) small negative eigenvalues down to -clip_tol * max_eig;
    anything more negative raises NumericalError. Works for singular
    matrices, unlike Cholesky.
    """
    a = symmetrize(np.asarray(a, dtype=float))
    vals, vecs = np.linalg.eigh(a)
    floor = -clip_tol * max(vals.max(initial=0.0), 1.0)
    if vals.min(initial=0.0) < floor:
        raise NumericalError(
            f"matrix is not PSD: min eigenvalue {vals.min():.3e}"
        )
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def mvn_draws(rng: np.random.Generator, mean: np.ndarray, cov: np.ndarray,
              size: int) -> np.ndarray:
    """Draws from N(mean, cov), shape (size, dim). Handles singular cov."""
    mean = np.asarray(mean, dtype=float)
    root = psd_sqrt(cov)
    z = rng.standard_normal((size, mean.size))
    return mean[None, :] + z @ root.T
