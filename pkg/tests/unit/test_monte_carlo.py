"""
Monte Carlo 执行器单元测试
"""

import numpy as np
import pytest

from src.core.exceptions import TrialFailedException
from src.core.filters import parse_filter
from src.core.spectra import make_explicit_signal, make_power_spectrum, make_problem
from src.simulation.monte_carlo import (
    TRIAL_COLUMNS,
    MonteCarloRunner,
    nearest_rank,
    run_monte_carlo,
    summarize,
    trials_frame,
)
from src.simulation.sampler import trial_generator, trial_seed

pytestmark = pytest.mark.unit


class TestNearestRank:
    """最近秩分位数"""

    @pytest.mark.parametrize("q,expected", [(0.5, 5.0), (0.1, 1.0), (0.9, 9.0), (0.0, 1.0), (1.0, 10.0)])
    def test_ten_values(self, q, expected):
        assert nearest_rank([float(v) for v in range(1, 11)], q) == expected

    def test_single_value(self):
        assert nearest_rank([3.5], 0.1) == nearest_rank([3.5], 0.9) == 3.5

    def test_even_count_median_is_lower_middle(self):
        assert nearest_rank([1.0, 2.0, 3.0, 4.0], 0.5) == 2.0


class TestMonteCarloRunner:
    """重复实验与汇总"""

    def test_single_trial(self, small_problem, ridge):
        summary = MonteCarloRunner(1).run(small_problem, ridge, 5, 0.5, 0.1, 30, trials=1, master_seed=4)
        risk = summary.per_trial[0].excess_risk
        assert summary.median == summary.q10 == summary.q90 == risk

    def test_null_problem(self, ridge):
        problem = make_problem(make_power_spectrum(2.0, 8), make_explicit_signal(np.zeros(8)), noise_std=0.0)
        summary = MonteCarloRunner(1).run(problem, ridge, 5, 0.5, 0.1, 20, trials=5, master_seed=0)
        assert all(r.excess_risk == 0.0 for r in summary.per_trial)
        assert summary.median == 0.0

    def test_parallelism_does_not_change_results(self, small_problem, all_filters):
        for spec in all_filters:
            serial = MonteCarloRunner(1).run(small_problem, spec, 4, 0.5, 0.1, 40, trials=24, master_seed=123)
            pooled = MonteCarloRunner(8).run(small_problem, spec, 4, 0.5, 0.1, 40, trials=24, master_seed=123)
            assert serial.to_dict() == pooled.to_dict(), f"{spec.name} 的汇总依赖并行度"
            assert [r.excess_risk for r in serial.per_trial] == [r.excess_risk for r in pooled.per_trial]

    def test_results_sorted_by_trial_id(self, small_problem, ridge):
        summary = MonteCarloRunner(4).run(small_problem, ridge, 4, 0.5, 0.1, 20, trials=9, master_seed=1)
        assert [r.trial_id for r in summary.per_trial] == list(range(9))

    def test_master_seed_changes_results(self, small_problem, ridge):
        a = MonteCarloRunner(1).run(small_problem, ridge, 4, 0.5, 0.1, 20, trials=3, master_seed=1)
        b = MonteCarloRunner(1).run(small_problem, ridge, 4, 0.5, 0.1, 20, trials=3, master_seed=2)
        assert a.median != b.median

    def test_omega_tracking_optional(self, small_problem, ridge):
        runner = MonteCarloRunner(1)
        tracked = runner.run(small_problem, ridge, 4, 0.5, 0.1, 20, trials=4, master_seed=1)
        untracked = runner.run(small_problem, ridge, 4, 0.5, 0.1, 20, trials=4, master_seed=1, track_omega=False)
        assert 0.0 <= tracked.omega_frequency <= 1.0
        assert untracked.omega_frequency is None
        assert tracked.median == untracked.median

    def test_default_box_rule(self, small_problem, ridge):
        summary = MonteCarloRunner(1).run(small_problem, ridge, 4, 0.5, None, 20, trials=2, master_seed=1)
        assert len(summary.per_trial) == 2

    def test_rejects_zero_trials(self, small_problem, ridge):
        with pytest.raises(TrialFailedException) as exc:
            MonteCarloRunner(1).run(small_problem, ridge, 4, 0.5, 0.1, 20, trials=0, master_seed=1)
        assert exc.value.code == "MC_INVALID_TRIALS"

    def test_trial_failure_carries_trial_id(self, small_problem):
        with pytest.raises(TrialFailedException) as exc:
            MonteCarloRunner(1).run(small_problem, parse_filter('gd:0.1'), 2.5, 0.5, 0.1, 20,
                                    trials=3, master_seed=1)
        assert exc.value.code == "TRIAL_FAILED"
        assert exc.value.details['trial_id'] == 0
        assert exc.value.details['cause']['code'] == "FILTER_GD_NON_INTEGER_T"

    def test_non_fsd_failure_carries_trial_id(self, small_problem, ridge, monkeypatch):
        def broken_fit(batch, spec, t):
            raise np.linalg.LinAlgError("SVD did not converge")

        monkeypatch.setattr("src.simulation.monte_carlo.fit_spectral", broken_fit)
        with pytest.raises(TrialFailedException) as exc:
            MonteCarloRunner(1).run(small_problem, ridge, 4, 0.5, 0.1, 20, trials=2, master_seed=1)
        assert exc.value.code == "TRIAL_FAILED"
        assert exc.value.details['trial_id'] == 0
        assert exc.value.details['cause']['type'] == "LinAlgError"
        assert isinstance(exc.value.__cause__, np.linalg.LinAlgError)

    def test_trial_records_derived_seed(self, small_problem, ridge):
        summary = MonteCarloRunner(1).run(small_problem, ridge, 4, 0.5, 0.1, 20, trials=4, master_seed=5)
        seeds = [r.seed for r in summary.per_trial]
        assert seeds == [trial_seed(5, i) for i in range(4)]
        assert len(set(seeds)) == 4
        assert 5 not in seeds

    def test_derived_seed_reproduces_trial_stream(self):
        key = trial_seed(5, 3)
        expected = np.random.Generator(np.random.Philox(np.random.SeedSequence([key, 1]))).standard_normal(6)
        np.testing.assert_array_equal(trial_generator(5, 3, 1).standard_normal(6), expected)

    def test_functional_entry_point(self, small_problem, ridge):
        direct = MonteCarloRunner(2).run(small_problem, ridge, 4, 0.5, 0.1, 20, trials=6, master_seed=9)
        functional = run_monte_carlo(small_problem, ridge, 4, 0.5, 0.1, 20, trials=6, master_seed=9, parallelism=3)
        assert direct.to_dict() == functional.to_dict()


class TestTrialsFrame:
    """逐次试验表"""

    def test_columns_and_order(self, small_problem, ridge):
        summary = MonteCarloRunner(1).run(small_problem, ridge, 4, 0.5, 0.1, 20, trials=5, master_seed=3)
        frame = trials_frame(summary)
        assert list(frame.columns) == TRIAL_COLUMNS
        assert frame['trial_id'].tolist() == [0, 1, 2, 3, 4]

    def test_summarize_sorts_unordered_results(self, small_problem, ridge):
        summary = MonteCarloRunner(1).run(small_problem, ridge, 4, 0.5, 0.1, 20, trials=5, master_seed=3)
        shuffled = list(reversed(summary.per_trial))
        assert summarize(shuffled).to_dict() == summary.to_dict()
