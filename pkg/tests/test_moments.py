"""Tests for output-moment propagation, quadratic forms, and Sobol ratios."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayespc.basis import IndexScheme, InputSpace, build_index_set, design_matrix
from bayespc.conjugate import CoefficientPosterior
from bayespc.moments import (
    MomentKind,
    QuadraticForm,
    first_order_indices,
    output_mean_distribution,
    output_variance_distribution,
    quadratic_form_samples,
    sobol_ratio_samples,
    subselect,
    variance_expectation,
)


def _mc_input_moments(space, idx, alpha, n, seed):
    """Brute-force input-sampling oracle for mean/variance of one coefficient vector."""
    rng = np.random.default_rng(seed)
    x = space.sample(rng, n)
    g = design_matrix(space, idx, x).values @ alpha
    mean = float(g.mean())
    var = float(g.var(ddof=1))
    mean_se = float(g.std(ddof=1) / math.sqrt(n))
    m4 = float(np.mean((g - mean) ** 4))
    var_se = math.sqrt(max(m4 - var**2, 0.0) / n)
    return mean, var, mean_se, var_se


def _random_posterior(rng, n, scale=1.0):
    a = rng.standard_normal((n, n))
    return CoefficientPosterior(rng.standard_normal(n), scale * (a @ a.T) / n)


class TestOutputMean:
    def test_deterministic_constant(self):
        post = CoefficientPosterior(np.array([5.0, 0.0, 0.0]), np.zeros((3, 3)))
        dist = output_mean_distribution(post)
        assert dist.kind is MomentKind.GAUSSIAN_CLOSED_FORM
        assert dist.mean == 5.0
        assert dist.variance == 0.0

    def test_identity_covariance(self):
        post = CoefficientPosterior(np.zeros(4), np.eye(4))
        assert output_mean_distribution(post).variance == 1.0

    def test_matches_input_sampling_oracle(self):
        # deterministic coefficients: output mean over the input density
        # equals the first coefficient
        rng = np.random.default_rng(11)
        space = InputSpace.uniform_cube(2)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 2)
        alpha = rng.standard_normal(idx.n)
        post = CoefficientPosterior(alpha, np.zeros((idx.n, idx.n)))
        mean, _, mean_se, _ = _mc_input_moments(space, idx, alpha, 200_000, seed=1)
        assert abs(output_mean_distribution(post).mean - mean) <= 3 * mean_se


class TestOutputVariance:
    def test_deterministic_coefficients(self):
        post = CoefficientPosterior(np.array([0.0, 1.0, 2.0]), np.zeros((3, 3)))
        dist = output_variance_distribution(post, 2000, seed=0)
        assert dist.mean == 5.0
        np.testing.assert_allclose(dist.samples, 5.0, atol=1e-12)

    def test_constant_function(self):
        post = CoefficientPosterior(np.array([3.0, 0.0, 0.0]), np.zeros((3, 3)))
        dist = output_variance_distribution(post, 1500, seed=0)
        assert dist.mean == 0.0
        np.testing.assert_allclose(dist.samples, 0.0, atol=1e-12)

    def test_analytic_expectation_with_uncertainty(self):
        post = CoefficientPosterior(np.array([0.0, 1.0, 2.0]), 0.01 * np.eye(3))
        dist = output_variance_distribution(post, 50_000, seed=3)
        assert dist.mean == pytest.approx(5.02, abs=1e-12)
        se = dist.samples.std(ddof=1) / math.sqrt(dist.samples.size)
        assert abs(dist.samples.mean() - 5.02) <= 3 * se

    def test_rejects_small_clouds(self):
        post = CoefficientPosterior(np.zeros(2), np.eye(2))
        with pytest.raises(ValueError):
            output_variance_distribution(post, 10)

    def test_matches_input_sampling_oracle(self):
        rng = np.random.default_rng(12)
        space = InputSpace.uniform_cube(2)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 3)
        alpha = rng.standard_normal(idx.n)
        post = CoefficientPosterior(alpha, np.zeros((idx.n, idx.n)))
        _, var, _, var_se = _mc_input_moments(space, idx, alpha, 400_000, seed=2)
        assert abs(variance_expectation(post) - var) <= 3 * var_se


class TestQuadraticForm:
    def test_zero_matrix(self):
        post = CoefficientPosterior(np.ones(3), np.eye(3))
        qf = QuadraticForm(np.zeros((3, 3)), post)
        np.testing.assert_allclose(quadratic_form_samples(qf, 500, seed=0), 0.0, atol=1e-15)

    def test_chi_squared_mean(self):
        post = CoefficientPosterior(np.zeros(3), np.eye(3))
        qf = QuadraticForm(np.eye(3), post)
        samples = quadratic_form_samples(qf, 100_000, seed=1)
        se = samples.std(ddof=1) / math.sqrt(samples.size)
        assert abs(samples.mean() - 3.0) <= 3 * se

    @given(seed=st.integers(0, 40))
    @settings(max_examples=10, deadline=None)
    def test_mean_matches_trace_formula(self, seed):
        rng = np.random.default_rng(seed)
        n = 4
        post = _random_posterior(rng, n)
        e = rng.standard_normal((n, n))
        qf = QuadraticForm(0.5 * (e + e.T), post)
        samples = quadratic_form_samples(qf, 60_000, seed=seed + 1)
        se = samples.std(ddof=1) / math.sqrt(samples.size)
        assert abs(samples.mean() - qf.expectation()) <= 3 * se

    def test_decomposition_matches_direct_sampling(self):
        # first two moments of the centred decomposition agree with plain
        # multivariate-normal sampling pushed through the form
        rng = np.random.default_rng(9)
        n = 4
        post = _random_posterior(rng, n)
        e = rng.standard_normal((n, n))
        e = 0.5 * (e + e.T)
        qf = QuadraticForm(e, post)
        s = 100_000
        via_decomp = quadratic_form_samples(qf, s, seed=5)
        direct_draws = rng.multivariate_normal(post.mean, post.covariance, size=s)
        direct = np.einsum("si,ij,sj->s", direct_draws, e, direct_draws)
        pooled_se = math.sqrt(via_decomp.var(ddof=1) / s + direct.var(ddof=1) / s)
        assert abs(via_decomp.mean() - direct.mean()) <= 3 * pooled_se
        # variances compared with a generous relative band; their sampling
        # noise is driven by fourth moments
        assert abs(via_decomp.var() - direct.var()) <= 0.1 * max(via_decomp.var(), direct.var())

    def test_rejects_asymmetric_matrix(self):
        post = CoefficientPosterior(np.zeros(2), np.eye(2))
        with pytest.raises(ValueError):
            QuadraticForm(np.array([[0.0, 1.0], [0.0, 0.0]]), post)


class TestSubselect:
    def test_enumerated_example(self):
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 2)
        sel = subselect(idx, 0, 1)
        assert set(sel.indices) == {(0, 0), (0, 1), (0, 2)}

    def test_degree_beyond_max_is_empty(self):
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 2)
        assert subselect(idx, 3, 1).n == 0

    def test_cardinality_against_enumeration(self):
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 3, 3)
        sel = subselect(idx, 1, 2)
        brute = [t for t in idx.indices if t[1] == 1]
        assert sel.n == len(brute) == 6

    def test_axis_out_of_range(self):
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 2)
        with pytest.raises(ValueError):
            subselect(idx, 0, 0)
        with pytest.raises(ValueError):
            subselect(idx, 0, 3)

    def test_first_order_indices(self):
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 3, 3)
        sel = first_order_indices(idx, 2)
        assert set(sel.indices) == {(0, 1, 0), (0, 2, 0), (0, 3, 0)}


class TestSobolRatios:
    def test_single_active_index(self):
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 2)
        alpha = np.zeros(idx.n)
        alpha[idx.position((1, 0))] = 2.5
        post = CoefficientPosterior(alpha, np.zeros((idx.n, idx.n)))
        sel = first_order_indices(idx, 1)
        ratios = sobol_ratio_samples(post, idx, sel, 2000, seed=0)
        np.testing.assert_allclose(ratios, 1.0, atol=1e-12)

    def test_empty_selection_gives_zero(self):
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 2)
        alpha = np.zeros(idx.n)
        alpha[1] = 1.0
        post = CoefficientPosterior(alpha, np.zeros((idx.n, idx.n)))
        empty = subselect(idx, 5, 1)
        ratios = sobol_ratio_samples(post, idx, empty, 1500, seed=0)
        np.testing.assert_allclose(ratios, 0.0, atol=1e-15)

    def test_additive_function_hand_decomposition(self):
        # g = sqrt(3) x1 + 2 sqrt(3) x2: first-order ratios 1/5 and 4/5
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 1)
        alpha = np.zeros(idx.n)
        alpha[idx.position((1, 0))] = 1.0
        alpha[idx.position((0, 1))] = 2.0
        post = CoefficientPosterior(alpha, np.zeros((idx.n, idx.n)))
        r1 = sobol_ratio_samples(post, idx, first_order_indices(idx, 1), 1000, seed=0)
        r2 = sobol_ratio_samples(post, idx, first_order_indices(idx, 2), 1000, seed=0)
        np.testing.assert_allclose(r1, 0.2, atol=1e-12)
        np.testing.assert_allclose(r2, 0.8, atol=1e-12)

    def test_partition_closure(self):
        # deterministic coefficients: ratios over a partition of the
        # non-constant indices sum to one
        rng = np.random.default_rng(21)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 3, 2)
        alpha = rng.standard_normal(idx.n)
        post = CoefficientPosterior(alpha, np.zeros((idx.n, idx.n)))
        total = np.zeros(1000)
        for degree in range(idx.max_degree + 1):
            sel = subselect(idx, degree, 1)
            if sel.n:
                total += sobol_ratio_samples(post, idx, sel, 1000, seed=4)
        np.testing.assert_allclose(total, 1.0, atol=1e-12)

    def test_ratio_bounds(self):
        rng = np.random.default_rng(22)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 2)
        post = _random_posterior(rng, idx.n)
        sel = first_order_indices(idx, 1)
        ratios = sobol_ratio_samples(post, idx, sel, 5000, seed=1)
        assert np.all(ratios >= 0.0)
        assert np.all(ratios <= 1.0 + 1e-12)

    def test_degenerate_denominator(self):
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 1)
        post = CoefficientPosterior(np.array([4.0, 0.0, 0.0]), np.zeros((3, 3)))
        with pytest.raises(ValueError):
            sobol_ratio_samples(post, idx, first_order_indices(idx, 1), 1500)

    def test_shared_draws_between_numerator_and_denominator(self):
        # with identical seeds, group ratios computed separately still close
        # exactly because numerator and denominator share coefficient draws
        rng = np.random.default_rng(23)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 2)
        post = _random_posterior(rng, idx.n)
        total = np.zeros(2000)
        for degree in range(idx.max_degree + 1):
            sel = subselect(idx, degree, 2)
            if sel.n:
                total += sobol_ratio_samples(post, idx, sel, 2000, seed=7)
        np.testing.assert_allclose(total, 1.0, atol=1e-12)


class TestDoubleMonteCarlo:
    def test_posterior_mean_distribution_against_double_oracle(self):
        # coefficient draws pushed through input sampling: the average output
        # mean matches the closed-form posterior mean of the first coefficient
        rng = np.random.default_rng(31)
        space = InputSpace.uniform_cube(2)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 2)
        post = _random_posterior(rng, idx.n, scale=0.5)
        n_coeff, n_inputs = 400, 4000
        x = space.sample(rng, n_inputs)
        v = design_matrix(space, idx, x).values
        coeff_draws = rng.multivariate_normal(post.mean, post.covariance, size=n_coeff)
        per_draw_mean = (v @ coeff_draws.T).mean(axis=0)
        se = per_draw_mean.std(ddof=1) / math.sqrt(n_coeff)
        closed = output_mean_distribution(post)
        assert abs(per_draw_mean.mean() - closed.mean) <= 3 * se + 3 / math.sqrt(n_inputs)
