"""Multi-output polynomial surrogates with an intrinsic coregionalization kernel.

Each output shares one orthonormal polynomial basis. The kernel between
output i at x and output j at x' is

    v(x)^T diag(|a_i| * |a_j|) v(x') * B_ij,

where column a_i of the scale matrix collects per-basis-term coefficient
scales for output i and B = W W^T + diag(kappa) (W rank one) correlates
the outputs. Hyperpriors: scale entries and W standard normal, kappa
HalfNormal(1). The noise variance is a fixed input, not inferred.

Hyperparameters are sampled by HMC on the Gaussian-process marginal
likelihood of the stacked outputs; predictions average the per-draw
Gaussian conditionals with mixture moments (mean of means, mean of
covariances plus covariance of means).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import InputSpace, MultiIndexSet, design_matrix
from .conjugate import PredictiveDistribution
from .hmc import ChainConfig, LogDensityModel, SampleBatch, sample
from .linalg import chol_solve, jittered_cholesky, symmetrize

_LOG_HALF_NORMAL_CONST = 0.5 * math.log(2.0 / math.pi)


@dataclass(frozen=True)
class CoregionalModel:
    """Fixed multi-output kernel hyperparameters over a shared basis."""

    a_scales: np.ndarray  # (N, O), column i scales output i's basis terms
    w: np.ndarray         # (O,), rank-one factor of the output correlation
    kappa: np.ndarray     # (O,), positive diagonal boost
    noise_variance: float
    space: InputSpace
    index_set: MultiIndexSet

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_scales, dtype=float))
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        if a.shape[0] != self.index_set.n:
            raise ValueError("a_scales rows must match the index set cardinality")
        if a.shape[1] != w.size or w.size != kappa.size:
            raise ValueError("inconsistent output counts across a_scales, w, kappa")
        if np.any(kappa <= 0):
            raise ValueError("kappa entries must be positive")
        if not self.noise_variance > 0:
            raise ValueError("noise variance must be positive")
        object.__setattr__(self, "a_scales", a)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "kappa", kappa)

    @property
    def n_outputs(self) -> int:
        return self.w.size

    @property
    def output_correlation(self) -> np.ndarray:
        """B = W W^T + diag(kappa)."""
        return np.outer(self.w, self.w) + np.diag(self.kappa)


@dataclass(frozen=True)
class StackedDataset:
    """Per-output training sets over a shared input space; sizes may differ."""

    inputs: tuple[np.ndarray, ...]
    outputs: tuple[np.ndarray, ...]

    def __post_init__(self):
        inputs = tuple(np.atleast_2d(np.asarray(x, dtype=float)) for x in self.inputs)
        outputs = tuple(np.atleast_1d(np.asarray(y, dtype=float)) for y in self.outputs)
        if len(inputs) != len(outputs) or not inputs:
            raise ValueError("need matching, nonempty input/output collections")
        d = {x.shape[1] for x in inputs}
        if len(d) != 1:
            raise ValueError("all outputs must share the input dimension")
        for x, y in zip(inputs, outputs):
            if x.shape[0] != y.size:
                raise ValueError("per-output inputs and outputs disagree in length")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)

    @property
    def n_outputs(self) -> int:
        return len(self.inputs)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(y.size for y in self.outputs)

    def stacked_outputs(self) -> np.ndarray:
        return np.concatenate(self.outputs)


def _pair_block(v_i, v_j, abs_i, abs_j, b_ij):
    return (v_i * (abs_i * abs_j)[None, :]) @ v_j.T * b_ij


def cross_covariance(model: CoregionalModel, i: int, j: int,
                     x_i: np.ndarray, x_j: np.ndarray,
                     include_noise: bool = False) -> np.ndarray:
    """Covariance block between output i at x_i and output j at x_j.

    ``include_noise`` adds sigma^2 I and is only meaningful on a diagonal
    training block (i == j with x_i identical to x_j).
    """
    o = model.n_outputs
    if not (0 <= i < o and 0 <= j < o):
        raise ValueError(f"output labels must lie in [0, {o})")
    v_i = design_matrix(model.space, model.index_set, np.atleast_2d(x_i)).values
    v_j = design_matrix(model.space, model.index_set, np.atleast_2d(x_j)).values
    abs_a = np.abs(model.a_scales)
    block = _pair_block(v_i, v_j, abs_a[:, i], abs_a[:, j], model.output_correlation[i, j])
    if include_noise:
        if i != j or block.shape[0] != block.shape[1]:
            raise ValueError("noise belongs on square diagonal blocks only")
        block = block + model.noise_variance * np.eye(block.shape[0])
    return block


def block_covariance(model: CoregionalModel, inputs,
                     include_noise: bool = False) -> np.ndarray:
    """Full covariance over the stacked outputs at the given per-output inputs."""
    if isinstance(inputs, StackedDataset):
        inputs = inputs.inputs
    designs = [
        design_matrix(model.space, model.index_set, np.atleast_2d(x)).values
        for x in inputs
    ]
    abs_a = np.abs(model.a_scales)
    b = model.output_correlation
    noise = model.noise_variance if include_noise else None
    return _assemble_blocks(designs, designs, abs_a, abs_a, b, noise)


def _assemble_blocks(designs_row, designs_col, abs_row, abs_col, b, noise=None):
    sizes_row = [v.shape[0] for v in designs_row]
    sizes_col = [v.shape[0] for v in designs_col]
    offsets_row = np.concatenate([[0], np.cumsum(sizes_row)])
    offsets_col = np.concatenate([[0], np.cumsum(sizes_col)])
    full = np.empty((offsets_row[-1], offsets_col[-1]))
    for i, v_i in enumerate(designs_row):
        for j, v_j in enumerate(designs_col):
            block = _pair_block(v_i, v_j, abs_row[:, i], abs_col[:, j], b[i, j])
            if noise is not None and i == j and block.shape[0] == block.shape[1]:
                block = block + noise * np.eye(block.shape[0])
            full[offsets_row[i]: offsets_row[i + 1], offsets_col[j]: offsets_col[j + 1]] = block
    return full


def pack_hyperparameters(a_scales: np.ndarray, w: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(a_scales, dtype=float).ravel(),
                           np.asarray(w, dtype=float),
                           np.asarray(kappa, dtype=float)])


def unpack_hyperparameters(theta: np.ndarray, n: int, o: int):
    a = theta[: n * o].reshape(n, o)
    w = theta[n * o: n * o + o]
    kappa = theta[n * o + o:]
    return a, w, kappa


def log_marginal_likelihood(a_scales, w, kappa, designs, y_stacked,
                            noise_variance) -> float:
    """Gaussian-process marginal log likelihood of the stacked outputs."""
    abs_a = np.abs(np.asarray(a_scales, dtype=float))
    b = np.outer(w, w) + np.diag(np.asarray(kappa, dtype=float))
    gram = _assemble_blocks(designs, designs, abs_a, abs_a, b, noise_variance)
    lower, _ = jittered_cholesky(symmetrize(gram))
    beta = chol_solve(lower, y_stacked)
    m = y_stacked.size
    return (
        -0.5 * float(y_stacked @ beta)
        - float(np.sum(np.log(np.diag(lower))))
        - 0.5 * m * math.log(2.0 * math.pi)
    )


def coregional_logdensity(a_scales, w, kappa, data: StackedDataset,
                          space: InputSpace, idx: MultiIndexSet,
                          noise_variance: float) -> tuple[float, np.ndarray]:
    """Marginal likelihood plus hyperpriors, with the analytic gradient.

    The gradient is packed as [vec(a_scales) row-major, w, kappa].
    """
    designs = [design_matrix(space, idx, x).values for x in data.inputs]
    theta = pack_hyperparameters(a_scales, w, kappa)
    return _logdensity_impl(theta, designs, data.stacked_outputs(), idx.n,
                            data.n_outputs, noise_variance)


def _logdensity_impl(theta, designs, y_stacked, n, o, noise_variance):
    a, w, kappa = unpack_hyperparameters(theta, n, o)
    if not np.all(np.isfinite(theta)) or np.any(kappa <= 0) or np.any(kappa > 1e100):
        return -np.inf, np.zeros(theta.size)
    abs_a = np.abs(a)
    sign_a = np.sign(a)
    b = np.outer(w, w) + np.diag(kappa)
    sizes = [v.shape[0] for v in designs]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    m_total = offsets[-1]

    gram = _assemble_blocks(designs, designs, abs_a, abs_a, b, noise_variance)
    try:
        lower = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        return -np.inf, np.zeros(theta.size)
    from scipy.linalg import cho_solve

    beta = cho_solve((lower, True), y_stacked)
    kinv = cho_solve((lower, True), np.eye(m_total))
    s_mat = np.outer(beta, beta) - kinv

    logp = (
        -0.5 * float(y_stacked @ beta)
        - float(np.sum(np.log(np.diag(lower))))
        - 0.5 * m_total * math.log(2.0 * math.pi)
    )
    # hyperpriors: a, w standard normal; kappa HalfNormal(1)
    logp += float(-0.5 * np.sum(a**2) - 0.5 * n * o * math.log(2.0 * math.pi))
    logp += float(-0.5 * np.sum(w**2) - 0.5 * o * math.log(2.0 * math.pi))
    logp += float(np.sum(_LOG_HALF_NORMAL_CONST - kappa**2 / 2.0))

    grad_a = np.empty((n, o))
    c = np.empty((o, o))  # c[i, j] = sum(S_ij * G_ij) for the B-direction terms
    q = {}
    for i in range(o):
        v_i = designs[i]
        for j in range(o):
            v_j = designs[j]
            s_block = s_mat[offsets[i]: offsets[i + 1], offsets[j]: offsets[j + 1]]
            p = s_block @ v_j                      # (M_i, N)
            q[i, j] = np.sum(v_i * p, axis=0)      # v_i[:,k]^T S_ij v_j[:,k]
            c[i, j] = float(np.sum((abs_a[:, i] * abs_a[:, j]) * q[i, j]))
    for i in range(o):
        acc = np.zeros(n)
        for j in range(o):
            acc += b[i, j] * abs_a[:, j] * q[i, j]
        grad_a[:, i] = sign_a[:, i] * acc - a[:, i]
    grad_w = c @ w - w
    grad_kappa = 0.5 * np.diag(c) - kappa
    return float(logp), np.concatenate([grad_a.ravel(), grad_w, grad_kappa])


def coregional_model_logdensity(data: StackedDataset, space: InputSpace,
                                idx: MultiIndexSet,
                                noise_variance: float) -> LogDensityModel:
    """LogDensityModel over [vec(a_scales), w, kappa] for the HMC engine."""
    designs = [design_matrix(space, idx, x).values for x in data.inputs]
    y_stacked = data.stacked_outputs()
    n, o = idx.n, data.n_outputs

    def logp(theta):
        return _logdensity_impl(theta, designs, y_stacked, n, o, noise_variance)[0]

    def grad(theta):
        return _logdensity_impl(theta, designs, y_stacked, n, o, noise_variance)[1]

    transforms = ("identity",) * (n * o + o) + ("log",) * o
    names = tuple(
        [f"a[{k},{i}]" for k in range(n) for i in range(o)]
        + [f"w[{i}]" for i in range(o)]
        + [f"kappa[{i}]" for i in range(o)]
    )
    return LogDensityModel(n * o + 2 * o, logp, grad, transforms, names)


def sample_hyperparameters(data: StackedDataset, space: InputSpace,
                           idx: MultiIndexSet, noise_variance: float,
                           chain_cfg: ChainConfig) -> SampleBatch:
    """HMC over the coregional hyperparameters."""
    model = coregional_model_logdensity(data, space, idx, noise_variance)
    return sample(model, chain_cfg)


def conditional_prediction(model: CoregionalModel, data: StackedDataset,
                           test_inputs) -> PredictiveDistribution:
    """Gaussian conditional at stacked test points for fixed hyperparameters."""
    designs_train = [
        design_matrix(model.space, model.index_set, x).values for x in data.inputs
    ]
    designs_test = [
        design_matrix(model.space, model.index_set, np.atleast_2d(x)).values
        if np.asarray(x).size else np.zeros((0, model.index_set.n))
        for x in test_inputs
    ]
    abs_a = np.abs(model.a_scales)
    b = model.output_correlation
    k11 = _assemble_blocks(designs_train, designs_train, abs_a, abs_a, b,
                           model.noise_variance)
    k21 = _assemble_blocks(designs_test, designs_train, abs_a, abs_a, b)
    k22 = _assemble_blocks(designs_test, designs_test, abs_a, abs_a, b)
    lower, _ = jittered_cholesky(symmetrize(k11))
    y = data.stacked_outputs()
    mean = k21 @ chol_solve(lower, y)
    cov = k22 - k21 @ chol_solve(lower, k21.T)
    return PredictiveDistribution(mean, symmetrize(cov))


def _select_draws(batch: SampleBatch, n_draws: int, use_last: int) -> np.ndarray:
    pooled = batch.pooled()
    tail = pooled[-min(use_last, pooled.shape[0]):]
    if tail.shape[0] <= n_draws:
        return tail
    pick = np.linspace(0, tail.shape[0] - 1, n_draws).round().astype(int)
    return tail[pick]


def mixture_prediction(thetas: np.ndarray, data: StackedDataset, space: InputSpace,
                       idx: MultiIndexSet, noise_variance: float,
                       test_inputs) -> list[PredictiveDistribution]:
    """Equal-weight Gaussian-mixture moments over given hyperparameter draws.

    Mean is the average of conditional means; covariance the average of
    conditional covariances plus the (population) covariance of the means.
    """
    n, o = idx.n, data.n_outputs
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    sizes = [int(np.atleast_2d(np.asarray(x)).shape[0]) if np.asarray(x).size else 0
             for x in test_inputs]
    q_total = int(np.sum(sizes))
    means = np.empty((thetas.shape[0], q_total))
    cov_sum = np.zeros((q_total, q_total))
    for r, theta in enumerate(thetas):
        a, w, kappa = unpack_hyperparameters(theta, n, o)
        model = CoregionalModel(a, w, kappa, noise_variance, space, idx)
        pred = conditional_prediction(model, data, test_inputs)
        means[r] = pred.mean
        cov_sum += pred.covariance
    mixture_mean = means.mean(axis=0)
    centered = means - mixture_mean[None, :]
    mixture_cov = cov_sum / thetas.shape[0] + (centered.T @ centered) / thetas.shape[0]

    results = []
    offset = 0
    for size in sizes:
        sl = slice(offset, offset + size)
        results.append(PredictiveDistribution(mixture_mean[sl], mixture_cov[sl, sl]))
        offset += size
    return results


def predict(batch: SampleBatch, data: StackedDataset, space: InputSpace,
            idx: MultiIndexSet, noise_variance: float, test_inputs,
            n_draws: int = 100, use_last: int = 500) -> list[PredictiveDistribution]:
    """Mixture-of-conditionals prediction over sampled hyperparameters.

    Takes the last ``use_last`` pooled draws thinned to ``n_draws``, forms
    the Gaussian conditional for each, and combines them with mixture
    moments. Returns one distribution per output.
    """
    if batch.pooled().shape[0] < 100:
        raise ValueError("need at least 100 hyperparameter draws")
    chosen = _select_draws(batch, n_draws, use_last)
    return mixture_prediction(chosen, data, space, idx, noise_variance, test_inputs)


def identified_diagnostics(batch: SampleBatch, n_basis: int, n_outputs: int):
    """Convergence diagnostics over sign-invariant quantities.

    The kernel depends on the hyperparameters only through |a| and
    B = W W^T + diag(kappa); raw coordinates are bimodal under sign flips,
    so R-hat is computed on the identified ones: |a| entries, the upper
    triangle of B, and kappa.
    """
    from .hmc import diagnostics as _diagnostics

    draws = batch.draws
    n_chains, n_draws, _ = draws.shape
    o = n_outputs
    a = np.abs(draws[:, :, : n_basis * o])
    w = draws[:, :, n_basis * o: n_basis * o + o]
    kappa = draws[:, :, n_basis * o + o:]
    b_cols = []
    for i in range(o):
        for j in range(i, o):
            entry = w[:, :, i] * w[:, :, j]
            if i == j:
                entry = entry + kappa[:, :, i]
            b_cols.append(entry[:, :, None])
    identified = np.concatenate([a, *b_cols, kappa], axis=2)
    return _diagnostics(identified)


def posterior_output_correlation(batch: SampleBatch, n_basis: int,
                                 n_outputs: int) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and SD of B = W W^T + diag(kappa) over all draws."""
    pooled = batch.pooled()
    o = n_outputs
    bs = np.empty((pooled.shape[0], o, o))
    for r, theta in enumerate(pooled):
        _, w, kappa = unpack_hyperparameters(theta, n_basis, o)
        bs[r] = np.outer(w, w) + np.diag(kappa)
    return bs.mean(axis=0), bs.std(axis=0, ddof=1)
