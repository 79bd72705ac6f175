"""Tests for orthonormal bases, index sets, quadrature, and design matrices."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayespc.basis import (
    BasisFamily,
    IndexScheme,
    InputDistribution,
    InputSpace,
    MultiIndexSet,
    UnivariateBasis,
    build_index_set,
    design_matrix,
    eval_univariate,
    gauss_quadrature,
)


class TestIndexSets:
    def test_reference_cardinalities(self):
        assert build_index_set(IndexScheme.TOTAL_ORDER, 3, 3).n == 20
        assert build_index_set(IndexScheme.TOTAL_ORDER, 7, 3).n == 120
        assert build_index_set(IndexScheme.TOTAL_ORDER, 25, 2).n == 351
        assert build_index_set(IndexScheme.TENSOR_GRID, 3, 3).n == 64

    @given(d=st.integers(1, 6), p=st.integers(0, 4))
    def test_cardinality_formulas(self, d, p):
        assert build_index_set(IndexScheme.TOTAL_ORDER, d, p).n == math.comb(d + p, p)
        assert build_index_set(IndexScheme.TENSOR_GRID, d, p).n == (p + 1) ** d

    @given(d=st.integers(1, 5), p=st.integers(0, 4))
    def test_monotonicity(self, d, p):
        total = set(build_index_set(IndexScheme.TOTAL_ORDER, d, p).indices)
        total_up = set(build_index_set(IndexScheme.TOTAL_ORDER, d, p + 1).indices)
        tensor = set(build_index_set(IndexScheme.TENSOR_GRID, d, p).indices)
        assert total <= total_up
        assert total <= tensor

    def test_constant_term_first_and_graded(self):
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 4, 3)
        assert idx.indices[0] == (0, 0, 0, 0)
        degrees = [sum(t) for t in idx.indices]
        assert degrees == sorted(degrees)

    def test_hyperbolic_cross_rule(self):
        idx = build_index_set(IndexScheme.HYPERBOLIC_CROSS, 3, 3)
        for t in idx.indices:
            assert math.prod(k + 1 for k in t) <= 4
        assert (0, 0, 0) in idx
        # hyperbolic cross is a subset of the total-order set of the same degree
        total = set(build_index_set(IndexScheme.TOTAL_ORDER, 3, 3).indices)
        assert set(idx.indices) <= total

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            build_index_set(IndexScheme.TOTAL_ORDER, 0, 3)
        with pytest.raises(ValueError):
            build_index_set(IndexScheme.TOTAL_ORDER, 2, -1)

    def test_no_duplicates_allowed(self):
        with pytest.raises(ValueError):
            MultiIndexSet(((0, 0), (0, 0)), IndexScheme.TOTAL_ORDER, 1)


class TestUnivariate:
    def test_degree_zero_is_one(self):
        basis = UnivariateBasis.for_distribution(InputDistribution.uniform(), 4)
        for x in [-1.0, -0.3, 0.0, 0.7, 1.0]:
            assert eval_univariate(basis, 0, x) == 1.0

    def test_legendre_degree_one(self):
        basis = UnivariateBasis.for_distribution(InputDistribution.uniform(), 4)
        assert eval_univariate(basis, 1, 1.0) == pytest.approx(math.sqrt(3), abs=1e-12)

    def test_legendre_degree_two_at_zero(self):
        # oracle: classical P2(x) = (3x^2 - 1)/2 normalized by its
        # quadrature-computed norm under the uniform density
        dist = InputDistribution.uniform()
        nodes, weights = gauss_quadrature(dist, 10)
        p2 = 0.5 * (3.0 * nodes**2 - 1.0)
        norm = math.sqrt(float(np.sum(weights * p2**2)))
        expected = (0.5 * (3.0 * 0.0**2 - 1.0)) / norm
        basis = UnivariateBasis.for_distribution(dist, 4)
        assert eval_univariate(basis, 2, 0.0) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(-math.sqrt(5) / 2, abs=1e-12)

    def test_rejects_degree_beyond_recurrence(self):
        basis = UnivariateBasis.for_distribution(InputDistribution.uniform(), 3)
        with pytest.raises(ValueError):
            eval_univariate(basis, 4, 0.5)

    def test_hermite_matches_probabilists_polynomials(self):
        basis = UnivariateBasis.for_distribution(InputDistribution.gaussian(), 3)
        x = np.linspace(-3, 3, 11)
        np.testing.assert_allclose(eval_univariate(basis, 2, x), (x**2 - 1) / math.sqrt(2), atol=1e-12)
        np.testing.assert_allclose(
            eval_univariate(basis, 3, x), (x**3 - 3 * x) / math.sqrt(6), atol=1e-12
        )

    def test_scaled_uniform_interval_orthonormal(self):
        dist = InputDistribution.uniform(2.0, 5.0)
        nodes, weights = gauss_quadrature(dist, 8)
        vals = UnivariateBasis.for_distribution(dist, 5).eval_all(nodes)
        gram = (vals * weights[:, None]).T @ vals
        np.testing.assert_allclose(gram, np.eye(6), atol=1e-10)


class TestGaussQuadrature:
    def test_uniform_one_point_is_midpoint(self):
        nodes, weights = gauss_quadrature(InputDistribution.uniform(), 1)
        np.testing.assert_allclose(nodes, [0.0], atol=1e-15)
        np.testing.assert_allclose(weights, [1.0], atol=1e-15)

    def test_uniform_two_point(self):
        nodes, weights = gauss_quadrature(InputDistribution.uniform(), 2)
        np.testing.assert_allclose(np.sort(nodes), [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-14)
        np.testing.assert_allclose(weights, [0.5, 0.5], atol=1e-14)

    def test_unit_norm_of_degree_three(self):
        dist = InputDistribution.uniform()
        nodes, weights = gauss_quadrature(dist, 10)
        basis = UnivariateBasis.for_distribution(dist, 3)
        phi3 = eval_univariate(basis, 3, nodes)
        assert float(np.sum(weights * phi3**2)) == pytest.approx(1.0, abs=1e-12)

    @given(n=st.integers(1, 12))
    @settings(max_examples=20)
    def test_weights_sum_to_one(self, n):
        for dist in (InputDistribution.uniform(-2.0, 3.0), InputDistribution.gaussian()):
            _, weights = gauss_quadrature(dist, n)
            assert float(weights.sum()) == pytest.approx(1.0, abs=1e-12)

    def test_polynomial_exactness(self):
        # n-point rule integrates monomials up to degree 2n-1 against the density
        dist = InputDistribution.uniform()
        n = 4
        nodes, weights = gauss_quadrature(dist, n)
        for degree in range(2 * n):
            exact = 1.0 / (degree + 1) if degree % 2 == 0 else 0.0
            quad = float(np.sum(weights * nodes**degree))
            assert quad == pytest.approx(exact, abs=1e-14)

    def test_rejects_zero_points(self):
        with pytest.raises(ValueError):
            gauss_quadrature(InputDistribution.uniform(), 0)


class TestGramProperty:
    @pytest.mark.parametrize("dist", [InputDistribution.uniform(), InputDistribution.gaussian()])
    @pytest.mark.parametrize("p", [1, 4, 7, 10])
    def test_univariate_gram_identity(self, dist, p):
        nodes, weights = gauss_quadrature(dist, p + 2)
        vals = UnivariateBasis.for_distribution(dist, p).eval_all(nodes)
        gram = (vals * weights[:, None]).T @ vals
        np.testing.assert_allclose(gram, np.eye(p + 1), atol=1e-10)

    def test_multivariate_gram_identity(self):
        space = InputSpace.uniform_cube(2)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 2)
        nodes, weights = gauss_quadrature(space.dims[0], 4)
        # tensor rule over the two dimensions
        xx, yy = np.meshgrid(nodes, nodes, indexing="ij")
        points = np.column_stack([xx.ravel(), yy.ravel()])
        w2 = np.outer(weights, weights).ravel()
        v = design_matrix(space, idx, points).values
        gram = (v * w2[:, None]).T @ v
        np.testing.assert_allclose(gram, np.eye(idx.n), atol=1e-10)


class TestDesignMatrix:
    def test_constant_column_is_weights(self):
        space = InputSpace.uniform_cube(2)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 2)
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, size=(7, 2))
        w = rng.uniform(0.5, 2.0, size=7)
        dm = design_matrix(space, idx, x, weights=w)
        np.testing.assert_allclose(dm.values[:, idx.position((0, 0))], w, atol=1e-14)

    def test_degree_one_row(self):
        space = InputSpace.uniform_cube(3)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 3, 1)
        dm = design_matrix(space, idx, np.array([[1.0, 1.0, 1.0]]))
        r3 = math.sqrt(3)
        np.testing.assert_allclose(dm.values[0], [1.0, r3, r3, r3], atol=1e-12)

    def test_monte_carlo_orthonormality(self):
        # (1/M) V^T V -> I; allow 3 standard errors of the MC estimate
        space = InputSpace.uniform_cube(3)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 3, 3)
        rng = np.random.default_rng(42)
        m = 200_000
        x = space.sample(rng, m)
        v = design_matrix(space, idx, x).values
        gram = v.T @ v / m
        second_moment = (v**2).T @ (v**2) / m
        se = np.sqrt(np.maximum(second_moment - gram**2, 0.0) / m)
        assert np.all(np.abs(gram - np.eye(idx.n)) <= 3 * se + 1e-12)

    def test_dimension_mismatch(self):
        space = InputSpace.uniform_cube(2)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 1)
        with pytest.raises(ValueError):
            design_matrix(space, idx, np.zeros((4, 3)))

    def test_out_of_support_warns_but_returns(self):
        space = InputSpace.uniform_cube(1)
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 1, 2)
        with pytest.warns(UserWarning, match="support"):
            dm = design_matrix(space, idx, np.array([[1.0 + 1e-10]]))
        assert np.all(np.isfinite(dm.values))

    def test_matched_families_per_dimension(self):
        space = InputSpace((InputDistribution.uniform(), InputDistribution.gaussian()))
        idx = build_index_set(IndexScheme.TOTAL_ORDER, 2, 1)
        dm = design_matrix(space, idx, np.array([[0.5, 1.5]]))
        row = dm.values[0]
        assert row[idx.position((1, 0))] == pytest.approx(math.sqrt(3) * 0.5, abs=1e-12)
        assert row[idx.position((0, 1))] == pytest.approx(1.5, abs=1e-12)


def test_input_distribution_validation():
    with pytest.raises(ValueError):
        InputDistribution.uniform(1.0, 1.0)
    assert InputDistribution.gaussian().family is BasisFamily.HERMITE
