"""
饱和效应实验单元测试
平台模型闭式解、Sobolev 速率指数、t 扫描与偏序判定
"""

import math

import numpy as np
import pytest

from src.core.config_params import ConfigPresets
from src.core.exceptions import InvalidGridException, RateComputationException
from src.core.filters import parse_filter
from src.core.models import PlateauScenario
from src.experiments.saturation import (
    check_geometric_grid,
    fit_log_slope,
    interval_grid,
    partial_order_verdict,
    plateau_closed_forms,
    plateau_saturation,
    sobolev_study,
    sobolev_target_exponent,
    sobolev_tuning,
    sweep_rates,
)
from tests.helpers import random_problem

pytestmark = pytest.mark.unit


# ============================================================================
# t 扫描
# ============================================================================

class TestSweepRates:
    """t 网格上的速率最小化"""

    def test_singleton_grid(self, small_problem, ridge):
        sweep = sweep_rates(small_problem, ridge, 0.5, 100, 0.1, [7.0])
        assert sweep.argmin_t == 7.0
        assert sweep.min_rate == sweep.rate_at(7.0).total

    def test_minimum_over_grid(self, small_problem, ridge):
        grid = np.geomspace(1, 1000, 40)
        sweep = sweep_rates(small_problem, ridge, 0.5, 100, 0.1, grid)
        assert sweep.min_rate == min(r.total for r in sweep.rates)
        assert sweep.argmin_t in sweep.t_grid

    @pytest.mark.parametrize("grid", [[], [0.5, 2.0]])
    def test_rejects_invalid_grid(self, small_problem, ridge, grid):
        with pytest.raises(InvalidGridException) as exc:
            sweep_rates(small_problem, ridge, 0.5, 100, 0.1, grid)
        assert exc.value.code == "SWEEP_INVALID_GRID"


# ============================================================================
# 平台模型
# ============================================================================

class TestPlateauSaturation:
    """平台模型上 Ridge / GF 的最优速率"""

    @pytest.mark.parametrize("params", ConfigPresets.plateau_acceptance_scenarios())
    def test_grid_minimum_matches_closed_form(self, params):
        report = plateau_saturation(PlateauScenario.from_dict(params), b=0.5)
        assert report.hypothesis_met, f"场景应满足 4 < SNR ≤ bσ/ε: SNR={report.snr}"
        assert report.ridge_relative_error < 0.01, report.to_dict()
        assert report.gf_relative_error < 0.01, report.to_dict()
        assert report.verdict, "GF 的最优速率应不劣于 Ridge"

    def test_r_equals_snr(self):
        for params in ConfigPresets.plateau_acceptance_scenarios():
            scenario = PlateauScenario.from_dict(params)
            assert scenario.r_value == pytest.approx(scenario.snr, rel=1e-12)

    def test_closed_forms_coincide_at_unit_R(self):
        scenario = PlateauScenario(k=1, sigma=1.0, eps=0.1, p=101, alpha_star=0.1, noise_std=1.0, N=100)
        assert scenario.r_value == pytest.approx(1.0)
        closed = plateau_closed_forms(scenario)
        assert closed['ridge'] == pytest.approx(closed['gf'], rel=1e-12)

    def test_gradient_flow_closed_form_never_above_ridge(self, rng):
        """1 + log R ≤ 2√R − 1 对任意 R > 0 成立"""
        for _ in range(10_000):
            k = int(rng.integers(1, 21))
            sigma = float(rng.uniform(0.1, 1.0))
            scenario = PlateauScenario(
                k=k, sigma=sigma, eps=sigma * float(rng.uniform(0.001, 0.99)),
                p=k + int(rng.integers(1, 1001)), alpha_star=float(rng.uniform(0.001, 2.0)),
                noise_std=float(rng.uniform(0.1, 2.0)), N=int(rng.integers(1, 10_001)),
            )
            closed = plateau_closed_forms(scenario)
            assert closed['gf'] <= closed['ridge'] + 1e-12 * (abs(closed['ridge']) + 1), scenario

    def test_ridge_gap_grows_with_snr(self):
        """α_* 连续翻倍，min_ridge / min_gf 单调增大"""
        ratios = []
        alpha_star = 0.002
        for _ in range(5):
            scenario = PlateauScenario(k=8, sigma=1.0, eps=0.001, p=1008,
                                       alpha_star=alpha_star, noise_std=1.0, N=1000)
            report = plateau_saturation(scenario, b=0.5)
            assert report.hypothesis_met
            ratios.append(report.min_ridge / report.min_gf)
            alpha_star *= 2
        assert all(later > earlier for earlier, later in zip(ratios, ratios[1:])), ratios

    def test_low_snr_is_flagged_but_computed(self):
        scenario = PlateauScenario(k=8, sigma=1.0, eps=0.01, p=1008, alpha_star=0.01, noise_std=1.0, N=1000)
        report = plateau_saturation(scenario, b=0.5)
        assert not report.hypothesis_met
        assert math.isfinite(report.min_ridge) and math.isfinite(report.min_gf)

    def test_noiseless_scenario_is_flagged_not_crashed(self):
        scenario = PlateauScenario(k=2, sigma=1.0, eps=0.01, p=12, alpha_star=1.0, noise_std=0.0, N=400)
        assert scenario.snr == math.inf and scenario.r_value == math.inf
        report = plateau_saturation(scenario, b=0.5)
        assert not report.hypothesis_met
        assert math.isfinite(report.min_ridge) and math.isfinite(report.min_gf)
        assert report.t_star_ridge == math.inf and report.t_star_gf == math.inf
        assert math.isnan(report.closed_ridge) and math.isnan(report.ridge_relative_error)
        assert report.to_dict()['R'] == math.inf

    def test_zero_signal_has_no_closed_form(self):
        scenario = PlateauScenario(k=2, sigma=1.0, eps=0.01, p=12, alpha_star=0.0, noise_std=1.0, N=400)
        closed = plateau_closed_forms(scenario)
        assert all(math.isnan(value) for value in closed.values())

    def test_sample_size_override(self):
        scenario = PlateauScenario.from_dict(ConfigPresets.plateau_acceptance_scenarios()[0])
        report = plateau_saturation(scenario, b=0.5, N=4000)
        assert report.snr == pytest.approx(scenario.snr * 2)

    def test_empty_interval(self):
        scenario = PlateauScenario(k=1, sigma=1.0, eps=0.6, p=2, alpha_star=1.0, noise_std=1.0, N=10)
        with pytest.raises(InvalidGridException) as exc:
            interval_grid(scenario, 0.5)
        assert exc.value.code == "PLATEAU_EMPTY_INTERVAL"

    def test_interval_grid_stays_inside(self):
        scenario = PlateauScenario(k=2, sigma=0.5, eps=0.01, p=12, alpha_star=1.0, noise_std=1.0, N=100)
        grid = interval_grid(scenario, 0.5, 64)
        assert grid.size == 64
        assert grid[0] > 2.0 and grid[-1] <= 50.0


# ============================================================================
# Sobolev 类
# ============================================================================

class TestSobolevStudy:
    """平方速率随 N 的 log-log 斜率"""

    N_GRID = [2 ** e for e in range(10, 17)]

    @pytest.mark.parametrize("alpha,s", [(2.0, 1.0), (2.0, 4.0), (1.5, 3.0)])
    @pytest.mark.parametrize("name", ["gf", "ridge"])
    def test_slope_matches_target(self, alpha, s, name):
        fit = sobolev_study(alpha, s, self.N_GRID, 0.5, None, parse_filter(name))
        assert fit.slope_error <= 0.05, f"{name} α={alpha} s={s}: {fit.fitted_slope} vs {fit.target_exponent}"

    def test_target_exponents(self, ridge, gradient_flow):
        assert sobolev_target_exponent(2.0, 1.0, ridge) == pytest.approx(-2 / 3)
        assert sobolev_target_exponent(2.0, 4.0, ridge) == pytest.approx(-4 / 5)
        assert sobolev_target_exponent(2.0, 4.0, gradient_flow) == pytest.approx(-8 / 9)

    def test_tuning_saturates_for_ridge(self, ridge, gradient_flow):
        assert sobolev_tuning(2.0, 4.0, 1024, ridge) == pytest.approx(1024 ** 0.4)
        assert sobolev_tuning(2.0, 4.0, 1024, gradient_flow) == pytest.approx(1024 ** (2 / 9))

    def test_gradient_descent_tuning_is_integer(self):
        t = sobolev_tuning(2.0, 1.0, 1000, parse_filter('gd:0.1'))
        assert t == float(round(1000 ** (2 / 3)))

    def test_fit_log_slope(self):
        N = [10, 100, 1000, 10000]
        assert fit_log_slope(N, [3.0 * n ** -0.7 for n in N]) == pytest.approx(-0.7)

    @pytest.mark.parametrize("grid,code", [
        ([1000, 2000, 4000], "GRID_TOO_SHORT"),
        ([100, 200, 300, 400], "GRID_NOT_GEOMETRIC"),
        ([800, 400, 200, 100], "GRID_NOT_GEOMETRIC"),
    ])
    def test_rejects_bad_grid(self, grid, code):
        with pytest.raises(InvalidGridException) as exc:
            check_geometric_grid(grid)
        assert exc.value.code == code


# ============================================================================
# 偏序
# ============================================================================

class TestPartialOrder:
    """A ⪯ B 当且仅当头部偏差 A ≤ B"""

    def test_gradient_flow_below_ridge(self, rng, gradient_flow, ridge):
        for _ in range(30):
            problem = random_problem(rng, 20)
            verdict = partial_order_verdict(problem, gradient_flow, ridge, float(rng.uniform(1, 100)), 0.5, 100, None)
            assert verdict.A_leq_B

    def test_reflexive(self, small_problem, all_filters):
        for spec in all_filters:
            verdict = partial_order_verdict(small_problem, spec, spec, 8, 0.5, 100, None)
            assert verdict.A_leq_B and verdict.bias_ratio == 1.0

    def test_pcr_below_ridge(self, small_problem, ridge):
        verdict = partial_order_verdict(small_problem, parse_filter('pcr:0.5'), ridge, 8, 0.5, 100, None)
        assert verdict.A_leq_B and verdict.bias_a == 0.0

    def test_ridge_not_below_gradient_flow(self, small_problem, gradient_flow, ridge):
        verdict = partial_order_verdict(small_problem, ridge, gradient_flow, 8, 0.5, 100, None)
        assert not verdict.A_leq_B
        assert verdict.bias_ratio > 1

    def test_transitive(self, rng, gradient_flow, ridge):
        pcr = parse_filter('pcr:0.5')
        for _ in range(20):
            problem = random_problem(rng, 15)
            t = float(rng.uniform(1, 50))
            ab = partial_order_verdict(problem, pcr, gradient_flow, t, 0.5, 100, None).A_leq_B
            bc = partial_order_verdict(problem, gradient_flow, ridge, t, 0.5, 100, None).A_leq_B
            ac = partial_order_verdict(problem, pcr, ridge, t, 0.5, 100, None).A_leq_B
            assert not (ab and bc) or ac

    def test_pcr_constant_must_equal_b(self, small_problem, ridge):
        with pytest.raises(RateComputationException) as exc:
            partial_order_verdict(small_problem, parse_filter('pcr:0.9'), ridge, 8, 0.5, 100, None)
        assert exc.value.code == "RATE_PCR_B_MISMATCH"
        verdict = partial_order_verdict(small_problem, parse_filter('pcr:0.9'), ridge, 8, 0.9, 100, None)
        assert verdict.A_leq_B and verdict.bias_a == 0.0
