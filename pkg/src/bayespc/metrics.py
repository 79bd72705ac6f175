"""Error metrics and the brute-force Monte Carlo moment oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .basis import InputSpace, MultiIndexSet, design_matrix


@dataclass(frozen=True)
class RmseResult:
    """Both normalizations of the test RMSE, labeled explicitly.

    ``printed`` follows sqrt(sum of squared residuals) / (M * sqrt(sd));
    ``conventional`` is sqrt(mean squared residual) / sd.
    """

    printed: float
    conventional: float


def normalized_rmse(y_test: np.ndarray, y_pred: np.ndarray, output_sd: float) -> RmseResult:
    y_test = np.asarray(y_test, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_test.shape != y_pred.shape:
        raise ValueError("test and prediction vectors must have equal length")
    m = y_test.size
    if m == 0:
        raise ValueError("empty test set")
    if not output_sd > 0:
        raise ValueError("output spread must be positive")
    sse = float(np.sum((y_test - y_pred) ** 2))
    return RmseResult(
        printed=math.sqrt(sse) / (m * math.sqrt(output_sd)),
        conventional=math.sqrt(sse / m) / output_sd,
    )


@dataclass(frozen=True)
class OracleMoments:
    mean: float
    variance: float
    mean_se: float
    variance_se: float


def mc_oracle(space: InputSpace, g: Callable[[np.ndarray], np.ndarray] | np.ndarray,
              n_samples: int, seed: int = 0,
              index_set: MultiIndexSet | None = None,
              chunk: int = 100_000) -> OracleMoments:
    """Brute-force input-sampling moments of g over the input density.

    ``g`` is either a callable on (n, d) arrays or a coefficient vector, in
    which case ``index_set`` selects the basis it multiplies. Standard
    errors come from the empirical second and fourth central moments.
    """
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples for a meaningful oracle")
    if isinstance(g, np.ndarray) or np.isscalar(g):
        coeffs = np.atleast_1d(np.asarray(g, dtype=float))
        if index_set is None:
            raise ValueError("coefficient-vector oracle needs the index set")
        if coeffs.size != index_set.n:
            raise ValueError("coefficient length does not match the index set")

        def evaluate(x):
            return design_matrix(space, index_set, x).values @ coeffs
    else:
        evaluate = g

    rng = np.random.default_rng(seed)
    values = np.empty(n_samples)
    done = 0
    while done < n_samples:
        take = min(chunk, n_samples - done)
        values[done: done + take] = evaluate(space.sample(rng, take))
        done += take

    mean = float(values.mean())
    centered = values - mean
    variance = float(np.sum(centered**2) / (n_samples - 1))
    m4 = float(np.mean(centered**4))
    return OracleMoments(
        mean=mean,
        variance=variance,
        mean_se=float(values.std(ddof=1)) / math.sqrt(n_samples),
        variance_se=math.sqrt(max(m4 - variance**2, 0.0) / n_samples),
    )
