import numpy as np
import pytest
from numpy.testing import assert_allclose

from dpdmon import (
    ConfigurationError,
    GarchParams,
    Scenario,
    UndefinedRatioError,
    contaminate,
    delay_ratio_table,
    parse_scenario_config,
    run_scenario,
    simulate_garch_path,
)
from dpdmon.simlab import with_contamination_off

from conftest import THETA0, THETA3

SMALL = dict(n_hist=300, horizon=150, reps=8, level=0.05, alpha_grid=(0.0, 0.3), burn_in=200)
THETA1_CHANGE = GarchParams(0.2, (0.3,), (0.2,))


class TestSimulate:
    def test_iid_case_variance(self):
        x = simulate_garch_path(GarchParams(0.7, (0.0,), (0.0,)), 100_000, seed=1)
        assert abs(x.var() - 0.7) / 0.7 < 0.05

    def test_ergodic_variance(self):
        x = simulate_garch_path(THETA0, 200_000, seed=2)
        assert abs(x.var() - THETA0.unconditional_variance()) < 0.03

    def test_same_seed_same_path(self):
        a = simulate_garch_path(THETA0, 500, seed=3)
        b = simulate_garch_path(THETA0, 500, seed=3)
        assert np.array_equal(a, b)

    def test_nonstationary_rejected(self):
        with pytest.raises(ConfigurationError):
            simulate_garch_path(GarchParams(0.2, (0.5,), (0.6,)), 100, seed=4)


class TestContaminate:
    def test_zero_probability_identity(self):
        x = np.array([1.0, -2.0, 0.0])
        assert np.array_equal(contaminate(x, 0.0, 5.0, seed=5), x)

    def test_outward_shift_formula(self):
        # probability within a hair of 1: every point is hit
        x = np.array([2.0, -2.0, 0.0])
        out = contaminate(x, 1.0 - 1e-12, 5.0, seed=6)
        assert_allclose(out, [7.0, -7.0, 5.0])  # sign(0) treated as +1

    def test_default_outlier_size_rule(self):
        # 5 * sd of the (0.2, 0.2, 0.6) process = 5 * sqrt(0.2 / 0.2) = 5
        sc = Scenario(theta0=THETA0, seed=1, **SMALL)
        assert sc.outlier_size() == pytest.approx(5.0)

    def test_invalid_probability(self):
        with pytest.raises(ConfigurationError):
            contaminate(np.zeros(3), 1.2, 5.0, seed=7)


class TestScenario:
    def test_change_requires_k_star(self):
        with pytest.raises(ConfigurationError):
            Scenario(theta0=THETA0, theta1=THETA3, seed=1, **SMALL)

    def test_k_star_before_horizon(self):
        with pytest.raises(ConfigurationError):
            Scenario(theta0=THETA0, theta1=THETA3, k_star=150, seed=1, **SMALL)

    def test_bad_contamination_kind(self):
        with pytest.raises(ConfigurationError):
            Scenario(theta0=THETA0, contamination="X", seed=1, **SMALL)

    def test_outlier_probability_validated(self):
        with pytest.raises(ConfigurationError):
            Scenario(theta0=THETA0, contamination="H", p_outlier=1.2, seed=1, **SMALL)


class TestRunScenario:
    def test_bit_reproducible(self):
        sc = Scenario(theta0=THETA0, seed=11, **SMALL)
        r1 = run_scenario(sc)
        r2 = run_scenario(sc)
        for a in sc.alpha_grid:
            assert np.array_equal(r1.stops[a], r2.stops[a])
            assert np.array_equal(r1.failed[a], r2.failed[a])
        assert r1.boundary_b == r2.boundary_b

    def test_rejection_curve_nondecreasing(self):
        sc = Scenario(theta0=THETA0, theta1=THETA1_CHANGE, k_star=30, seed=12, **SMALL)
        rep = run_scenario(sc)
        for a in sc.alpha_grid:
            curve = rep.rejection_curve(a)
            assert curve.shape == (sc.horizon,)
            assert np.all(np.diff(curve) >= 0.0)

    def test_contamination_does_not_touch_clean_path(self):
        # paired run's clean side equals a standalone clean scenario
        sc = Scenario(
            theta0=THETA0, theta1=THETA3, k_star=30, contamination="H", p_outlier=0.05,
            paired_clean=True, seed=13, **SMALL,
        )
        paired = run_scenario(sc)
        clean = run_scenario(with_contamination_off(sc))
        for a in sc.alpha_grid:
            assert np.array_equal(paired.clean_stops[a], clean.stops[a])

    def test_parallel_matches_serial(self):
        sc = Scenario(theta0=THETA0, seed=14, **SMALL)
        serial = run_scenario(sc, n_jobs=1)
        parallel = run_scenario(sc, n_jobs=2)
        for a in sc.alpha_grid:
            assert np.array_equal(serial.stops[a], parallel.stops[a])

    def test_delay_statistics_and_cap(self):
        sc = Scenario(theta0=THETA0, theta1=THETA3, k_star=30, seed=15, **SMALL)
        rep = run_scenario(sc)
        for a in sc.alpha_grid:
            d = rep.delays(a)
            assert np.all(d <= sc.horizon + 1 - sc.k_star)
            st = rep.delay_stats(a)
            assert st["q25"] <= st["median"] <= st["q75"]

    def test_m_contamination_confined_to_window(self):
        from dpdmon.simlab import _contaminated_variants, _generate_series

        sc = Scenario(
            theta0=THETA0, contamination="M", p_outlier=0.5, contam_window=(1, 40),
            seed=19, **SMALL,
        )
        rng = np.random.default_rng(0)
        hist, stream = _generate_series(sc, rng)
        hist_c, stream_c = _contaminated_variants(sc, hist, stream, np.random.default_rng(1))
        assert np.array_equal(hist_c, hist)  # M-type leaves the history alone
        assert np.array_equal(stream_c[40:], stream[40:])
        assert np.any(stream_c[:40] != stream[:40])

    def test_m_type_distorts_likelihood_monitor_only(self):
        # outliers confined to early monitoring steps: the alpha=0 monitor
        # false-alarms massively, the robust one stays at level (and the clean
        # twin shows the distortion is entirely outlier-driven)
        sc = Scenario(
            theta0=THETA1_CHANGE, n_hist=1000, horizon=600, reps=100, seed=424242,
            alpha_grid=(0.0, 0.3), level=0.05, contamination="M", p_outlier=0.03,
        )
        rep = run_scenario(sc)
        assert rep.terminal_rate(0.0) >= 0.5
        assert rep.terminal_rate(0.3) <= 0.08
        clean = run_scenario(with_contamination_off(sc))
        assert clean.terminal_rate(0.0) <= 0.08

    def test_hm_type_keeps_ordering(self):
        sc = Scenario(
            theta0=THETA1_CHANGE, n_hist=1000, horizon=600, reps=100, seed=434343,
            alpha_grid=(0.0, 0.3), level=0.05, contamination="HM", p_outlier=0.03,
        )
        rep = run_scenario(sc)
        assert rep.terminal_rate(0.0) >= 2.0 * rep.terminal_rate(0.3)
        assert rep.terminal_rate(0.3) <= 0.05

    def test_flag_threshold_at_two_percent(self):
        from dataclasses import replace

        sc = Scenario(theta0=THETA0, seed=20, n_hist=300, horizon=150, reps=100,
                      level=0.05, alpha_grid=(0.2,), burn_in=200)
        rep = run_scenario(sc)
        assert not rep.flagged
        failed = {0.2: np.zeros(100, dtype=bool)}
        failed[0.2][:2] = True  # exactly 2% fails -> flagged
        assert replace(rep, failed=failed).flagged
        failed_one = {0.2: np.zeros(100, dtype=bool)}
        failed_one[0.2][0] = True  # 1% -> not flagged
        assert not replace(rep, failed=failed_one).flagged


class TestDelayRatios:
    def test_identical_reports_give_unit_ratios(self):
        sc = Scenario(theta0=THETA0, theta1=THETA3, k_star=30, seed=16, **SMALL)
        rep = run_scenario(sc)
        ratios = delay_ratio_table(rep, rep)
        assert all(r == 1.0 for r in ratios.values())

    def test_shape_mismatch_rejected(self):
        sc1 = Scenario(theta0=THETA0, theta1=THETA3, k_star=30, seed=17, **SMALL)
        sc2 = Scenario(
            theta0=THETA0, theta1=THETA3, k_star=30, seed=17,
            n_hist=300, horizon=151, reps=8, level=0.05, alpha_grid=(0.0, 0.3), burn_in=200,
        )
        r1, r2 = run_scenario(sc1), run_scenario(sc2)
        with pytest.raises(ConfigurationError):
            delay_ratio_table(r1, r2)

    def test_all_failed_reps_undefined(self):
        sc = Scenario(theta0=THETA0, theta1=THETA3, k_star=30, seed=18, **SMALL)
        rep = run_scenario(sc)
        broken = {a: np.ones_like(rep.failed[a]) for a in rep.alphas}
        from dataclasses import replace

        bad = replace(rep, failed={a: v.astype(bool) for a, v in broken.items()})
        with pytest.raises(UndefinedRatioError):
            delay_ratio_table(bad, rep)


class TestConfigParsing:
    GOOD = """
    # comment
    theta0 = 0.2, 0.2, 0.6
    theta1 = 0.5, 0.2, 0.6
    k_star = 30
    n_hist = 300
    horizon = 150
    contamination = H
    p_outlier = 0.03
    alpha_grid = 0, 0.3
    reps = 8
    seed = 42
    burn_in = 200
    paired_clean = true
    """

    def test_round_trip(self):
        sc = parse_scenario_config(self.GOOD)
        assert sc.theta0 == THETA0 and sc.theta1 == THETA3
        assert sc.k_star == 30 and sc.paired_clean and sc.contamination == "H"
        assert sc.alpha_grid == (0.0, 0.3)

    def test_invalid_outlier_probability(self):
        text = self.GOOD.replace("p_outlier = 0.03", "p_outlier = 1.2")
        with pytest.raises(ConfigurationError):
            parse_scenario_config(text)

    def test_missing_required_key(self):
        text = self.GOOD.replace("reps = 8", "")
        with pytest.raises(ConfigurationError):
            parse_scenario_config(text)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError):
            parse_scenario_config(self.GOOD + "\nbogus = 1\n")
