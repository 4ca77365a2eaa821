import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dpdmon import (
    ConfigurationError,
    ConstantBoundary,
    FitResult,
    NormalTheta,
    NormKind,
    SingularInformationError,
    critical_value_sequential,
    mdpde_fit_garch,
    mdpde_fit_normal,
    monitor_init,
    monitor_step,
    run_monitor,
    simulate_garch_path,
)
from dpdmon.monitor import detector_value

from conftest import THETA0, THETA3, changed_series


def _normal_fit_result(data, alpha=0.0):
    return mdpde_fit_normal(np.asarray(data, dtype=float), alpha)


class TestInit:
    def test_detector_zero_at_start_normal(self):
        rng = np.random.default_rng(1)
        data = rng.normal(size=200)
        fit = _normal_fit_result(data)
        state = monitor_init(fit, data)
        assert detector_value(state) == 0.0
        assert state.d == 2 and state.vol_state is None

    def test_garch_dimension(self, garch_sample_1000):
        fit = mdpde_fit_garch(garch_sample_1000, 0.2)
        state = monitor_init(fit, garch_sample_1000)
        assert state.d == 3
        assert state.vol_state is not None and state.vol_state.count == 1000

    def test_window_mismatch_rejected(self, garch_sample_1000):
        fit = mdpde_fit_garch(garch_sample_1000, 0.2)
        with pytest.raises(ConfigurationError):
            monitor_init(fit, garch_sample_1000[:500])

    def test_unconverged_fit_rejected(self, garch_sample_1000):
        fit = mdpde_fit_garch(garch_sample_1000, 0.2)
        bad = FitResult(
            engine=fit.engine, theta=fit.theta, params=fit.params, objective=fit.objective,
            info_hat=fit.info_hat, grad_norm=1.0, converged=False, n_used=fit.n_used,
            alpha=fit.alpha, p=1, q=1,
        )
        with pytest.raises(ConfigurationError):
            monitor_init(bad, garch_sample_1000)

    def test_unknown_engine_rejected(self, garch_sample_1000):
        fit = mdpde_fit_garch(garch_sample_1000, 0.2)
        weird = FitResult(
            engine="arma", theta=fit.theta, params=fit.params, objective=fit.objective,
            info_hat=fit.info_hat, grad_norm=fit.grad_norm, converged=True,
            n_used=fit.n_used, alpha=fit.alpha, p=1, q=1,
        )
        with pytest.raises(ConfigurationError):
            monitor_init(weird, garch_sample_1000)

    def test_alpha_mismatch_rejected(self, garch_sample_1000):
        fit = mdpde_fit_garch(garch_sample_1000, 0.2)
        with pytest.raises(ConfigurationError):
            monitor_init(fit, garch_sample_1000, alpha=0.3)

    def test_singular_information_rejected(self):
        rng = np.random.default_rng(2)
        data = rng.normal(size=100)
        fit = _normal_fit_result(data)
        singular = FitResult(
            engine="normal", theta=fit.theta, params=fit.params, objective=fit.objective,
            info_hat=np.diag([1.0, 0.0]), grad_norm=fit.grad_norm, converged=True,
            n_used=fit.n_used, alpha=fit.alpha,
        )
        with pytest.raises(SingularInformationError):
            monitor_init(singular, data)


class TestStep:
    def test_score_accumulator_contract(self):
        rng = np.random.default_rng(3)
        data = rng.normal(size=200)
        fit = _normal_fit_result(data)
        state = monitor_init(fit, data)
        from dpdmon import grad_l_alpha_normal

        x = 0.37
        g = grad_l_alpha_normal(x, fit.params, 0.0)
        new_state, _, _ = monitor_step(state, x, ConstantBoundary(10.0))
        assert np.array_equal(new_state.score_sum, g)  # first step: sum is the gradient
        assert new_state.k == 1

    def test_hand_built_golden_detector(self):
        # Historical data [-1, 1, -2, 2]: the MLE is mu=0, sigma^2=2.5.
        # Per-observation scores are (-x/s2, (1 - x^2/s2)/sqrt(s2)); the info
        # matrix is diag(0.4, 0.144).  Two arriving x=0 give score (0, 1/s)
        # each, and the whitened max-norm reduces to exact rationals:
        #   D(k) = (k/sqrt(2.5 * 0.144)) / (2 (1 + k/4)) = (5k/3) / (2 + k/2).
        data = np.array([-1.0, 1.0, -2.0, 2.0])
        theta = NormalTheta(0.0, math.sqrt(2.5))
        from dpdmon import info_hat_normal

        info = info_hat_normal(data, theta, 0.0)
        assert_allclose(info, np.diag([0.4, 0.144]), atol=1e-15)
        fit = FitResult(
            engine="normal", theta=theta.as_array(), params=theta, objective=0.0,
            info_hat=info, grad_norm=0.0, converged=True, n_used=4, alpha=0.0,
        )
        state = monitor_init(fit, data)
        state, d1, a1 = monitor_step(state, 0.0, ConstantBoundary(1.0))
        state, d2, a2 = monitor_step(state, 0.0, ConstantBoundary(1.0))
        assert_allclose([d1, d2], [2.0 / 3.0, 10.0 / 9.0], rtol=1e-13)
        assert (a1, a2) == (False, True)

    def test_run_monitor_matches_stepping_normal(self):
        rng = np.random.default_rng(4)
        data = rng.normal(size=300)
        stream = rng.normal(size=400)
        fit = _normal_fit_result(data, 0.2)
        out = run_monitor(fit, data, stream, ConstantBoundary(1e6), horizon=400)
        state = monitor_init(fit, data)
        for i, x in enumerate(stream):
            state, d, _ = monitor_step(state, x, ConstantBoundary(1e6))
            assert abs(d - out.detector_path[i]) <= 1e-12

    def test_run_monitor_matches_stepping_garch(self, garch_sample_1000):
        fit = mdpde_fit_garch(garch_sample_1000, 0.2)
        stream = simulate_garch_path(THETA0, 500, seed=99)
        out = run_monitor(fit, garch_sample_1000, stream, ConstantBoundary(1e6), horizon=500)
        state = monitor_init(fit, garch_sample_1000)
        for i, x in enumerate(stream):
            state, d, _ = monitor_step(state, x, ConstantBoundary(1e6))
            assert abs(d - out.detector_path[i]) <= 1e-12


class TestRun:
    def test_huge_boundary_never_stops(self, garch_sample_1000):
        fit = mdpde_fit_garch(garch_sample_1000, 0.2)
        stream = simulate_garch_path(THETA0, 300, seed=5)
        out = run_monitor(fit, garch_sample_1000, stream, ConstantBoundary(1e6), horizon=300)
        assert out.stop_k is None and out.detector_path.size == 300

    def test_zero_boundary_configuration_error(self):
        with pytest.raises(ConfigurationError):
            ConstantBoundary(0.0)

    def test_horizon_required(self, garch_sample_1000):
        fit = mdpde_fit_garch(garch_sample_1000, 0.2)
        with pytest.raises(ConfigurationError):
            run_monitor(fit, garch_sample_1000, [0.1], ConstantBoundary(1.0), horizon=None)

    def test_stop_is_first_crossing(self):
        rng = np.random.default_rng(6)
        data = rng.normal(size=200)
        fit = _normal_fit_result(data)
        stream = np.full(50, 30.0)  # gross shift: detector climbs fast
        out = run_monitor(fit, data, stream, ConstantBoundary(2.0), horizon=50)
        assert out.stop_k is not None
        assert out.detector_path.size == out.stop_k
        assert out.detector_path[-1] > 2.0
        assert np.all(out.detector_path[:-1] <= 2.0)

    def test_detector_nonnegative(self, garch_sample_1000):
        fit = mdpde_fit_garch(garch_sample_1000, 0.1)
        stream = simulate_garch_path(THETA0, 200, seed=8)
        out = run_monitor(fit, garch_sample_1000, stream, ConstantBoundary(1e6), horizon=200)
        assert np.all(out.detector_path >= 0.0)

    def test_determinism_bitwise(self, garch_sample_1000):
        fit = mdpde_fit_garch(garch_sample_1000, 0.2)
        stream = simulate_garch_path(THETA0, 300, seed=9)
        b = ConstantBoundary(2.632)
        out1 = run_monitor(fit, garch_sample_1000, stream, b, horizon=300)
        out2 = run_monitor(fit, garch_sample_1000, stream, b, horizon=300)
        assert np.array_equal(out1.detector_path, out2.detector_path)
        assert out1.stop_k == out2.stop_k

    def test_euclidean_norm_dominates_max(self, garch_sample_1000):
        fit = mdpde_fit_garch(garch_sample_1000, 0.2)
        stream = simulate_garch_path(THETA0, 200, seed=10)
        out_max = run_monitor(
            fit, garch_sample_1000, stream, ConstantBoundary(1e6), NormKind.MAX, horizon=200
        )
        out_euc = run_monitor(
            fit, garch_sample_1000, stream, ConstantBoundary(1e6), NormKind.EUCLIDEAN, horizon=200
        )
        assert np.all(out_euc.detector_path >= out_max.detector_path - 1e-15)


class TestMonteCarlo:
    def test_level_shift_median_stop(self):
        # volatility level shift at k*=250 with alpha=0.2, b=2.632
        stops = []
        for seed in range(50):
            x = changed_series(THETA0, THETA3, 1000 + 250, 2000 - 250, seed=3000 + seed)
            hist, stream = x[:1000], x[1000:]
            fit = mdpde_fit_garch(hist, 0.2)
            out = run_monitor(fit, hist, stream, ConstantBoundary(2.632), horizon=2000)
            stops.append(out.stop_k if out.stop_k is not None else 10**9)
        med = float(np.median(stops))
        assert 250 <= med <= 250 + 800

    def test_normal_engine_size_under_null(self):
        # n=1000, horizon 2000, alpha=0.2, d=2 critical value at 5%
        b = ConstantBoundary(critical_value_sequential(2, 0.05))
        rejections = 0
        reps = 500
        for seed in range(reps):
            rng = np.random.default_rng(40_000 + seed)
            data = rng.standard_normal(1000)
            stream = rng.standard_normal(2000)
            fit = mdpde_fit_normal(data, 0.2)
            out = run_monitor(fit, data, stream, b, horizon=2000)
            rejections += out.stop_k is not None
        assert rejections / reps <= 0.08
