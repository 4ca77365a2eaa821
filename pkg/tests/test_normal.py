import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from dpdmon import (
    Alpha,
    DegenerateDataError,
    NormalTheta,
    grad_l_alpha_normal,
    info_hat_normal,
    l_alpha_normal,
    mdpde_fit_normal,
)
from dpdmon.normal import score_matrix_normal


def quad_l_alpha(x, mu, sigma, a):
    """Independent oracle: numerical quadrature of the divergence objective."""
    pdf = lambda z: stats.norm.pdf(z, mu, sigma)
    integral, _ = integrate.quad(lambda z: pdf(z) ** (1 + a), mu - 40 * sigma, mu + 40 * sigma)
    return integral - (1 + 1 / a) * pdf(x) ** a


class TestTheta:
    def test_positive_scale_required(self):
        from dpdmon.exceptions import ConfigurationError

        with pytest.raises(ConfigurationError):
            NormalTheta(0.0, 0.0)
        with pytest.raises(ConfigurationError):
            NormalTheta(0.0, -1.0)
        with pytest.raises(ConfigurationError):
            NormalTheta(float("inf"), 1.0)


class TestObjective:
    def test_loglik_branch_at_mode(self):
        assert_allclose(l_alpha_normal(0.0, NormalTheta(0.0, 1.0), 0.0), 0.5 * np.log(2 * np.pi))

    def test_alpha_one_value_from_quadrature(self):
        got = l_alpha_normal(0.0, NormalTheta(0.0, 1.0), Alpha(1.0))
        assert_allclose(got, quad_l_alpha(0.0, 0.0, 1.0, 1.0), rtol=1e-10)
        # closed form: integral of the squared density minus twice f(0)
        closed = 1.0 / (2.0 * np.sqrt(np.pi)) - 2.0 / np.sqrt(2.0 * np.pi)
        assert_allclose(got, closed, rtol=1e-14)
        assert got == pytest.approx(-0.51579, abs=5e-6)

    def test_quadrature_on_random_points(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            x = rng.normal()
            mu = rng.normal()
            sigma = rng.uniform(0.5, 3.0)
            a = rng.choice([0.1, 0.3, 0.5, 1.0])
            got = l_alpha_normal(x, NormalTheta(mu, sigma), a)
            assert_allclose(got, quad_l_alpha(x, mu, sigma, a), rtol=1e-8)

    def test_translation_invariance(self):
        theta = NormalTheta(1.3, 0.8)
        shifted = NormalTheta(1.3 + 5.0, 0.8)
        for a in (0.0, 0.2, 1.0):
            assert_allclose(
                l_alpha_normal(0.4, theta, a), l_alpha_normal(0.4 + 5.0, shifted, a), rtol=1e-14
            )


class TestGradient:
    def test_score_at_standard_normal_mode(self):
        g = grad_l_alpha_normal(0.0, NormalTheta(0.0, 1.0), 0.0)
        assert_allclose(g, [0.0, 1.0])

    def test_mu_component_vanishes_at_center(self):
        for a in (0.1, 0.5, 1.0):
            g = grad_l_alpha_normal(2.0, NormalTheta(2.0, 1.7), a)
            assert g[0] == pytest.approx(0.0, abs=1e-15)

    def test_finite_difference_agreement(self):
        rng = np.random.default_rng(11)
        h = 1e-6
        for _ in range(100):
            x = rng.normal(scale=2.0)
            mu = rng.normal()
            sigma = rng.uniform(0.3, 3.0)
            a = float(rng.choice([0.0, 0.1, 0.3, 0.5, 1.0]))
            g = grad_l_alpha_normal(x, NormalTheta(mu, sigma), a)
            fd_mu = (
                l_alpha_normal(x, NormalTheta(mu + h, sigma), a)
                - l_alpha_normal(x, NormalTheta(mu - h, sigma), a)
            ) / (2 * h)
            fd_sig = (
                l_alpha_normal(x, NormalTheta(mu, sigma + h), a)
                - l_alpha_normal(x, NormalTheta(mu, sigma - h), a)
            ) / (2 * h)
            scale = max(1.0, abs(fd_mu), abs(fd_sig))
            assert_allclose(g, [fd_mu, fd_sig], atol=1e-5 * scale, rtol=1e-5)


class TestFit:
    def test_mle_closed_form(self):
        rng = np.random.default_rng(21)
        data = rng.normal(0.7, 2.1, size=400)
        fit = mdpde_fit_normal(data, 0.0)
        assert_allclose(fit.theta, [data.mean(), data.std()], atol=1e-8)
        assert fit.converged and fit.grad_norm <= 1e-8

    def test_scale_equivariance(self):
        rng = np.random.default_rng(22)
        data = rng.normal(size=300)
        for a in (0.0, 0.3):
            base = mdpde_fit_normal(data, a)
            scaled = mdpde_fit_normal(5.0 * data, a)
            assert_allclose(scaled.theta, 5.0 * base.theta, atol=1e-6)

    def test_robustness_under_contamination(self):
        rng = np.random.default_rng(23)
        data = rng.standard_normal(1000)
        idx = rng.choice(1000, size=30, replace=False)
        data[idx] = 10.0 * np.sign(rng.standard_normal(30))
        robust = mdpde_fit_normal(data, 0.25)
        mle = mdpde_fit_normal(data, 0.0)
        assert abs(robust.params.mu) < 0.1
        assert mle.params.sigma > robust.params.sigma

    def test_grid_search_oracle_small_sample(self):
        # lattice argmin on one fixed contaminated sample
        rng = np.random.default_rng(24)
        data = rng.standard_normal(120)
        data[:4] = [8.0, -8.0, 9.0, -9.0]
        a = 0.25
        mus = np.linspace(-0.5, 0.5, 501)
        sigmas = np.linspace(0.5, 2.5, 1001)
        best = (np.inf, None, None)
        for s in sigmas:
            z = (data[None, :] - mus[:, None]) / s
            c = s ** (-a) * (2 * np.pi) ** (-a / 2)
            vals = (c * ((1 + a) ** -0.5 - (1 + 1 / a) * np.exp(-0.5 * a * z * z))).mean(axis=1)
            i = int(np.argmin(vals))
            if vals[i] < best[0]:
                best = (float(vals[i]), float(mus[i]), float(s))
        fit = mdpde_fit_normal(data, a)
        assert fit.objective <= best[0] + 1e-12
        assert abs(fit.params.mu - best[1]) <= (mus[1] - mus[0])
        assert abs(fit.params.sigma - best[2]) <= (sigmas[1] - sigmas[0])

    def test_alpha_continuity_of_argmin(self):
        rng = np.random.default_rng(25)
        data = rng.normal(1.0, 1.5, size=500)
        f0 = mdpde_fit_normal(data, 0.0)
        f_eps = mdpde_fit_normal(data, 1e-4)
        assert np.max(np.abs(f0.theta - f_eps.theta)) <= 1e-2

    def test_first_order_condition(self):
        rng = np.random.default_rng(26)
        data = rng.normal(size=500)
        for a in (0.0, 0.2):
            fit = mdpde_fit_normal(data, a)
            mean_grad = score_matrix_normal(data, fit.params, a).mean(axis=0)
            assert np.max(np.abs(mean_grad)) <= 1e-6

    def test_constant_data_degenerate(self):
        with pytest.raises(DegenerateDataError):
            mdpde_fit_normal(np.ones(50), 0.2)

    def test_too_few_points(self):
        with pytest.raises(DegenerateDataError):
            mdpde_fit_normal(np.arange(5.0), 0.0)


class TestInfoHat:
    def test_single_point_outer_product(self):
        theta = NormalTheta(0.0, 1.0)
        x = np.full(7, 0.3)
        g = grad_l_alpha_normal(0.3, theta, 0.2)
        assert_allclose(info_hat_normal(x, theta, 0.2), np.outer(g, g), atol=1e-14)

    def test_exact_symmetry_and_psd(self):
        rng = np.random.default_rng(31)
        data = rng.normal(size=200)
        info = info_hat_normal(data, NormalTheta(0.1, 1.2), 0.3)
        assert np.array_equal(info, info.T)
        assert np.linalg.eigvalsh(info)[0] >= -1e-12

    def test_mle_fisher_information_monte_carlo(self):
        # oracle: Fisher information of N(0,1) in (mu, sigma) is diag(1, 2)
        rng = np.random.default_rng(32)
        data = rng.standard_normal(100_000)
        fit = mdpde_fit_normal(data, 0.0)
        info = info_hat_normal(data, fit.params, 0.0)
        assert_allclose(info, np.diag([1.0, 2.0]), rtol=0.05, atol=0.02)
