"""Tests for the regularized horseshoe prior and its samplers."""

import math

import numpy as np
import pytest

from bayespc.basis import IndexScheme, InputSpace, build_index_set, design_matrix
from bayespc.conjugate import GaussianPrior, NoiseSpec, conjugate_posterior
from bayespc.hmc import ChainConfig, gradient_check
from bayespc.horseshoe import (
    HorseshoeConfig,
    HorseshoeState,
    fit_hierarchical_gaussian,
    fit_sparse,
    hierarchical_gaussian_marginal_model,
    hierarchical_gaussian_model,
    horseshoe_logdensity,
    horseshoe_marginal_model,
    horseshoe_model,
    local_scales,
    tau,
)

NOISE_SD = 0.15
TRUE_SUPPORT = (1, 6)


def sparse_instance(seed, n_train=15, n_test=200):
    """d=5, p=2 total-order basis (N=21) with a 2-sparse truth."""
    rng = np.random.default_rng(seed)
    space = InputSpace.uniform_cube(5)
    idx = build_index_set(IndexScheme.TOTAL_ORDER, 5, 2)
    alpha_true = np.zeros(idx.n)
    alpha_true[TRUE_SUPPORT[0]] = 3.0
    alpha_true[TRUE_SUPPORT[1]] = 1.5
    x_train = space.sample(rng, n_train)
    x_test = space.sample(rng, n_test)
    v_train = design_matrix(space, idx, x_train)
    v_test = design_matrix(space, idx, x_test)
    y_train = v_train.values @ alpha_true + NOISE_SD * rng.standard_normal(n_train)
    y_test = v_test.values @ alpha_true
    return space, idx, v_train, y_train, v_test, y_test, alpha_true


def default_config(n_train=15):
    return HorseshoeConfig(nu=25.0, s=3.0, beta=0.1,
                           noise_variance=NOISE_SD**2, n_train=n_train)


class TestTau:
    def test_symmetric_unit_case(self):
        cfg = HorseshoeConfig(nu=1.0, s=1.0, beta=0.5, noise_variance=1.0, n_train=1)
        assert tau(cfg) == pytest.approx(1.0, abs=1e-15)

    def test_reference_arithmetic(self):
        cfg = HorseshoeConfig(nu=25.0, s=3.0, beta=0.1, noise_variance=9.0, n_train=15)
        expected = 0.1 * 3.0 / (0.9 * math.sqrt(15.0))
        assert tau(cfg) == pytest.approx(expected, rel=1e-12)
        assert tau(cfg) == pytest.approx(0.08607, abs=5e-6)

    def test_vanishing_beta_limit(self):
        values = [
            tau(HorseshoeConfig(1.0, 1.0, b, 1.0, 10))
            for b in (0.2, 0.05, 0.01, 0.001)
        ]
        assert all(earlier > later for earlier, later in zip(values, values[1:]))
        assert values[-1] < 1e-3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            HorseshoeConfig(nu=0.0, s=1.0, beta=0.5, noise_variance=1.0, n_train=5)
        with pytest.raises(ValueError):
            HorseshoeConfig(nu=1.0, s=1.0, beta=1.0, noise_variance=1.0, n_train=5)
        with pytest.raises(ValueError):
            HorseshoeConfig(nu=1.0, s=1.0, beta=0.5, noise_variance=0.0, n_train=5)


class TestLogDensity:
    def test_gradient_matches_finite_differences(self):
        _, _, v, y, *_ = sparse_instance(0)
        cfg = default_config()
        for parameterization in ("centered", "noncentered"):
            model = horseshoe_model(cfg, v, y, parameterization)
            report = gradient_check(model, n_points=20, seed=1)
            assert report.max_rel_error < 1e-5, parameterization

    def test_marginal_gradient(self):
        _, _, v, y, *_ = sparse_instance(0)
        model = horseshoe_marginal_model(default_config(), v, y)
        assert gradient_check(model, n_points=20, seed=2).max_rel_error < 1e-5

    def test_scale_cap_at_large_local_scale(self):
        # lambda_tilde huge: the regularization caps lambda at c / tau
        cfg = default_config()
        scales, tau_eff = local_scales(cfg, np.array([1e8]), 1.0, 4.0)
        lam = scales[0] / tau_eff
        assert lam == pytest.approx(2.0 / tau_eff, rel=1e-6)

    def test_density_concentrates_as_global_scale_vanishes(self):
        _, _, v, y, *_ = sparse_instance(0)
        cfg = default_config()
        n = v.values.shape[1]
        alpha = 0.05 * np.ones(n)
        small = horseshoe_logdensity(
            HorseshoeState(np.ones(n), 1e-6, 4.0, alpha), cfg, v, y
        )[0]
        moderate = horseshoe_logdensity(
            HorseshoeState(np.ones(n), 1.0, 4.0, alpha), cfg, v, y
        )[0]
        # nonzero coefficients become wildly improbable as tau_tilde -> 0
        assert small < moderate - 100.0

    def test_state_validation(self):
        with pytest.raises(ValueError):
            HorseshoeState(np.array([1.0, -1.0]), 1.0, 1.0, np.zeros(2))
        with pytest.raises(ValueError):
            HorseshoeState(np.ones(2), 0.0, 1.0, np.zeros(2))


class TestFitSparse:
    def test_recovers_support(self):
        _, _, v, y, *_ = sparse_instance(3)
        result = fit_sparse(v, y, default_config(),
                            ChainConfig(n_chains=2, warmup=400, draws=400, seed=7))
        top_two = set(np.argsort(-np.abs(result.coefficient_mean))[:2])
        assert top_two == set(TRUE_SUPPORT)
        assert result.coefficient_diagnostics.max_r_hat() < 1.1

    def test_zero_outputs_shrink_everything(self):
        _, _, v, _, *_ = sparse_instance(4)
        result = fit_sparse(v, np.zeros(15), default_config(),
                            ChainConfig(n_chains=2, warmup=300, draws=300, seed=8))
        assert np.all(np.abs(result.coefficient_mean) < 0.05)

    def test_config_echoed(self):
        _, _, v, y, *_ = sparse_instance(5)
        cfg = default_config()
        result = fit_sparse(v, y, cfg,
                            ChainConfig(n_chains=2, warmup=200, draws=200, seed=9))
        assert result.config == cfg
        assert result.config.nu == 25.0
        assert result.config.s == 3.0
        assert result.config.beta == 0.1

    def test_scale_cap_holds_over_draws(self):
        _, _, v, y, *_ = sparse_instance(6)
        cfg = default_config()
        result = fit_sparse(v, y, cfg,
                            ChainConfig(n_chains=2, warmup=300, draws=300, seed=10))
        n = v.values.shape[1]
        draws = result.batch.draws
        lt = draws[:, :, :n]
        tt = draws[:, :, n]
        c2 = draws[:, :, n + 1]
        tau_eff = tau(cfg) * tt
        lam = np.sqrt(c2)[..., None] * lt / np.sqrt(
            c2[..., None] + tau_eff[..., None] ** 2 * lt**2
        )
        cap = (np.sqrt(c2) / tau_eff)[..., None]
        assert np.all(lam <= cap + 1e-12)

    def test_shrinkage_weights_in_unit_interval(self):
        _, _, v, y, *_ = sparse_instance(2)
        result = fit_sparse(v, y, default_config(),
                            ChainConfig(n_chains=2, warmup=200, draws=200, seed=11))
        assert np.all(result.shrinkage >= 0.0)
        assert np.all(result.shrinkage <= 1.0)
        # the active coefficients should be among the least shrunk
        assert np.mean(result.shrinkage[list(TRUE_SUPPORT)]) < np.mean(result.shrinkage)

    def test_joint_parameterizations_agree_with_marginal_on_means(self):
        # same posterior, three parameterizations; compare the two active
        # coefficient means loosely (the joint samplers mix more slowly)
        _, _, v, y, *_ = sparse_instance(7)
        cfg = default_config()
        marg = fit_sparse(v, y, cfg,
                          ChainConfig(n_chains=2, warmup=400, draws=400, seed=12))
        nonc = fit_sparse(v, y, cfg,
                          ChainConfig(n_chains=2, warmup=800, draws=800, seed=12,
                                      target_accept=0.9),
                          parameterization="noncentered")
        for position in TRUE_SUPPORT:
            assert marg.coefficient_mean[position] == pytest.approx(
                nonc.coefficient_mean[position], abs=0.2
            )


class TestAgainstIsotropicGaussian:
    def test_horseshoe_beats_isotropic_prior_on_sparse_truth(self):
        horseshoe_rmse, gaussian_rmse = [], []
        for seed in range(10):
            space, idx, v_train, y_train, v_test, y_test, _ = sparse_instance(20 + seed)
            cfg = default_config()
            sparse_fit = fit_sparse(
                v_train, y_train, cfg,
                ChainConfig(n_chains=2, warmup=400, draws=400, seed=30 + seed),
            )
            pred_sparse = v_test.values @ sparse_fit.coefficient_mean
            gauss = conjugate_posterior(
                v_train, y_train, GaussianPrior.isotropic(idx.n, 1.0),
                NoiseSpec(cfg.noise_variance),
            )
            pred_gauss = v_test.values @ gauss.mean
            horseshoe_rmse.append(math.sqrt(np.mean((pred_sparse - y_test) ** 2)))
            gaussian_rmse.append(math.sqrt(np.mean((pred_gauss - y_test) ** 2)))
        assert np.median(horseshoe_rmse) < np.median(gaussian_rmse)

    def test_null_coefficients_shrink_below_threshold(self):
        smallest_true = 1.5
        ratios = []
        for seed in range(10):
            _, _, v_train, y_train, *_ = sparse_instance(40 + seed)
            result = fit_sparse(v_train, y_train, default_config(),
                                ChainConfig(n_chains=2, warmup=400, draws=400,
                                            seed=50 + seed))
            null = np.delete(result.coefficient_mean, list(TRUE_SUPPORT))
            ratios.append(np.max(np.abs(null)) / smallest_true)
        assert np.median(ratios) < 0.10


class TestHierarchicalGaussianBaseline:
    def test_gradients(self):
        _, _, v, y, *_ = sparse_instance(1)
        joint = hierarchical_gaussian_model(v, y, NOISE_SD**2)
        assert gradient_check(joint, n_points=15, seed=3).max_rel_error < 1e-5
        marginal = hierarchical_gaussian_marginal_model(v, y, NOISE_SD**2)
        assert gradient_check(marginal, n_points=15, seed=3).max_rel_error < 1e-5

    def test_fit_runs_and_shrinks_toward_ridge(self):
        _, idx, v, y, *_ = sparse_instance(8)
        result = fit_hierarchical_gaussian(
            v, y, NOISE_SD**2, ChainConfig(n_chains=2, warmup=300, draws=300, seed=13)
        )
        assert result.coefficients.shape[1] == idx.n
        assert result.coefficient_diagnostics.max_r_hat() < 1.2
        assert result.config is None
