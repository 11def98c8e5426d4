"""
采样与拟合单元测试
验证计数器种子、谱方法拟合的两条计算路径、梯度下降等价性与风险分解
"""

import numpy as np
import pytest

from config import settings
from src.core.exceptions import DimensionMismatchException
from src.core.filters import make_filter, parse_filter
from src.core.models import DesignDistribution, FilterKind, SampleBatch, SpectralFit
from src.core.spectra import (
    make_explicit_signal,
    make_explicit_spectrum,
    make_power_spectrum,
    make_problem,
)
from src.simulation.sampler import (
    draw_batch,
    excess_risk,
    fit_spectral,
    residual_matrix,
    run_gradient_descent,
    trial_generator,
)
from tests.helpers import random_problem

pytestmark = pytest.mark.unit


def _with_response(batch, response):
    return SampleBatch(batch.design, np.asarray(response), batch.seed, batch.distribution, batch.trial_id)


# ============================================================================
# 采样
# ============================================================================

class TestDrawBatch:
    """样本生成"""

    def test_same_seed_is_bit_identical(self, small_problem):
        first = draw_batch(small_problem, 50, seed=7, trial_id=3)
        second = draw_batch(small_problem, 50, seed=7, trial_id=3)
        np.testing.assert_array_equal(first.design, second.design)
        np.testing.assert_array_equal(first.response, second.response)

    def test_trial_id_changes_stream(self, small_problem):
        first = draw_batch(small_problem, 50, seed=7, trial_id=0)
        second = draw_batch(small_problem, 50, seed=7, trial_id=1)
        assert not np.array_equal(first.design, second.design)

    def test_streams_are_independent_of_each_other(self):
        design = trial_generator(11, 0, 0).standard_normal(5)
        noise = trial_generator(11, 0, 1).standard_normal(5)
        assert not np.array_equal(design, noise)

    def test_null_problem_gives_zero_response(self):
        problem = make_problem(make_power_spectrum(2.0, 6), make_explicit_signal(np.zeros(6)), noise_std=0.0)
        batch = draw_batch(problem, 20, seed=1)
        assert not batch.response.any()

    def test_sample_variance_converges(self):
        problem = make_problem(make_explicit_spectrum([1.0]), make_explicit_signal([0.0]))
        batch = draw_batch(problem, 100_000, seed=42)
        assert abs(batch.sample_covariance()[0, 0] - 1.0) < 0.02

    def test_rademacher_entries(self):
        spectrum = make_explicit_spectrum([1.0, 0.25])
        problem = make_problem(spectrum, make_explicit_signal([1.0, 1.0]))
        batch = draw_batch(problem, 40, seed=3, distribution='rademacher')
        assert batch.distribution == DesignDistribution.RADEMACHER
        assert set(np.abs(batch.design[:, 0]).tolist()) == {1.0}
        assert set(np.abs(batch.design[:, 1]).tolist()) == {0.5}

    def test_rejects_empty_sample(self, small_problem):
        with pytest.raises(DimensionMismatchException) as exc:
            draw_batch(small_problem, 0, seed=1)
        assert exc.value.code == "SAMPLE_INVALID_N"


# ============================================================================
# 拟合
# ============================================================================

class TestFitSpectral:
    """β̂ = (1/N)φ_t(Σ̂)Xᵀy"""

    def test_zero_response_gives_zero_estimate(self, small_problem, all_filters):
        batch = draw_batch(small_problem, 30, seed=5)
        zero = _with_response(batch, np.zeros(30))
        for spec in all_filters:
            assert not fit_spectral(zero, spec, 4).beta_hat.any()

    def test_ridge_matches_linear_solve(self, rng):
        for _ in range(100):
            N, p = (int(v) for v in rng.integers(5, 61, size=2))
            problem = random_problem(rng, p)
            batch = draw_batch(problem, N, seed=int(rng.integers(1 << 31)))
            t = float(rng.uniform(1, 50))
            X, y = batch.design, batch.response
            expected = np.linalg.solve(X.T @ X / N + np.eye(p) / t, X.T @ y / N)
            fit = fit_spectral(batch, make_filter(FilterKind.RIDGE), t)
            np.testing.assert_allclose(fit.beta_hat, expected, rtol=1e-9, atol=1e-9, err_msg=f"N={N}, p={p}, t={t}")
            assert fit.route == ('dual' if N < p else 'primal')

    def test_gradient_descent_matches_iterations(self, rng):
        for _ in range(100):
            eta = float(rng.uniform(0.005, 0.124))
            steps = int(rng.integers(1, 65))
            problem = random_problem(rng, 12)
            batch = draw_batch(problem, 100, seed=int(rng.integers(1 << 31)))
            spec = make_filter(FilterKind.GRADIENT_DESCENT, eta=eta)
            np.testing.assert_allclose(
                fit_spectral(batch, spec, steps).beta_hat,
                run_gradient_descent(batch, eta, steps),
                rtol=1e-8, atol=1e-8,
                err_msg=f"η={eta}, t={steps}"
            )

    def test_primal_and_dual_routes_agree(self, rng, all_filters):
        for _ in range(100):
            N, p = (int(v) for v in rng.integers(10, 41, size=2))
            t = int(rng.integers(1, 13))
            problem = random_problem(rng, p)
            batch = draw_batch(problem, N, seed=int(rng.integers(1 << 31)))
            for spec in all_filters:
                primal = fit_spectral(batch, spec, t, route='primal').beta_hat
                dual = fit_spectral(batch, spec, t, route='dual').beta_hat
                np.testing.assert_allclose(primal, dual, rtol=1e-8, atol=1e-8,
                                           err_msg=f"{spec.name} N={N} p={p} t={t}")

    def test_linear_in_response(self, small_problem, ridge):
        batch = draw_batch(small_problem, 25, seed=2)
        other = draw_batch(small_problem, 25, seed=3).response
        combined = _with_response(batch, 2.0 * batch.response - other)
        lhs = fit_spectral(combined, ridge, 5).beta_hat
        rhs = 2.0 * fit_spectral(batch, ridge, 5).beta_hat - fit_spectral(_with_response(batch, other), ridge, 5).beta_hat
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)

    def test_pcr_refit_is_idempotent(self, rng):
        spec = parse_filter('pcr:0.5')
        for _ in range(100):
            problem = random_problem(rng, 15)
            batch = draw_batch(problem, 80, seed=int(rng.integers(1 << 31)))
            first = fit_spectral(batch, spec, 10).beta_hat
            refit = fit_spectral(_with_response(batch, batch.design @ first), spec, 10).beta_hat
            np.testing.assert_allclose(refit, first, rtol=1e-9, atol=1e-9)

    def test_ridge_residual_matrix(self, small_problem, ridge):
        sigma_hat = draw_batch(small_problem, 40, seed=8).sample_covariance()
        t = 3.0
        expected = np.linalg.inv(np.eye(4) + t * sigma_hat)
        np.testing.assert_allclose(residual_matrix(sigma_hat, ridge, t), expected, atol=1e-12)

    def test_pcr_residual_matrix_is_projection(self, rng):
        spec = parse_filter('pcr:0.5')
        for _ in range(100):
            p = int(rng.integers(2, 30))
            problem = random_problem(rng, p)
            sigma_hat = draw_batch(problem, int(rng.integers(5, 60)), seed=int(rng.integers(1 << 31))).sample_covariance()
            psi = residual_matrix(sigma_hat, spec, float(rng.uniform(1, 100)))
            np.testing.assert_allclose(psi @ psi, psi, atol=1e-10)
            np.testing.assert_allclose(psi, psi.T, atol=1e-12)


# ============================================================================
# 风险
# ============================================================================

class TestExcessRisk:
    """‖Σ^{1/2}(β̂−β*)‖₂² 及头/尾分解"""

    def _fit(self, beta_hat, spec, t=10.0):
        return SpectralFit(beta_hat=np.asarray(beta_hat, dtype=float), filter=spec, t=t, route='primal')

    def test_perfect_fit(self, small_problem, ridge):
        risk = excess_risk(self._fit(small_problem.signal.coefficients, ridge), small_problem)
        assert risk.excess_risk == 0.0

    def test_null_estimator(self, small_problem, ridge):
        risk = excess_risk(self._fit(np.zeros(4), ridge), small_problem)
        assert risk.excess_risk == pytest.approx(small_problem.signal_energy() ** 2)

    def test_hand_case(self, ridge):
        problem = make_problem(make_explicit_spectrum([1.0, 0.25]), make_explicit_signal([0.0, 0.0]))
        risk = excess_risk(self._fit([1.0, 2.0], ridge), problem)
        assert risk.excess_risk == pytest.approx(2.0)

    def test_head_tail_split(self, small_problem, ridge):
        risk = excess_risk(self._fit([0.0, 0.0, 0.0, 0.0], ridge), small_problem, b=0.5)
        assert risk.k_star == 2
        assert risk.risk_head == pytest.approx(0.9 * 1.0 + 0.5 * 0.25)
        assert risk.risk_tail == pytest.approx(0.04 * 0.0625 + 0.01 * 4.0)
        assert risk.excess_risk == risk.risk_head + risk.risk_tail

    def test_dimension_mismatch(self, small_problem, ridge):
        with pytest.raises(DimensionMismatchException) as exc:
            excess_risk(self._fit([1.0, 2.0], ridge), small_problem)
        assert exc.value.code == "RISK_DIMENSION_MISMATCH"

    def test_default_b_comes_from_settings(self, small_problem, ridge, monkeypatch):
        fit = self._fit(np.zeros(4), ridge, t=1.5)
        assert excess_risk(fit, small_problem).k_star == 2
        monkeypatch.setattr(settings, 'default_b', 0.9)
        assert excess_risk(fit, small_problem).k_star == 1
