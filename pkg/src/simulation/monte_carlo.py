"""
Monte Carlo 重复实验
每次试验独立采样、拟合并计算风险；结果按 trial_id 排序后汇总，与并行度无关
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import pandas as pd

from config import settings
from src.core.exceptions import FSDException, TrialFailedException
from src.core.fsd_core import omega_statistic, resolve_box
from src.core.models import (
    DesignDistribution,
    FilterSpec,
    MonteCarloSummary,
    RegressionProblem,
    TrialResult,
)
from .sampler import draw_batch, excess_risk, fit_spectral, trial_seed

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = ['trial_id', 'excess_risk', 'risk_head', 'risk_tail', 'omega_holds']


def nearest_rank(sorted_values: Sequence[float], q: float) -> float:
    """最近秩分位数：第 ⌈q·n⌉ 个值（至少第 1 个）"""
    n = len(sorted_values)
    rank = max(1, math.ceil(q * n))
    return float(sorted_values[min(rank, n) - 1])


def summarize(results: List[TrialResult]) -> MonteCarloSummary:
    """按 trial_id 排序后汇总中位数、10%/90% 分位数与 Ω_t 频率"""
    ordered = sorted(results, key=lambda r: r.trial_id)
    risks = sorted(r.excess_risk for r in ordered)
    tracked = [r.omega_holds for r in ordered if r.omega_holds is not None]
    return MonteCarloSummary(
        median=nearest_rank(risks, 0.5),
        q10=nearest_rank(risks, 0.1),
        q90=nearest_rank(risks, 0.9),
        omega_frequency=(sum(tracked) / len(tracked)) if tracked else None,
        per_trial=ordered,
    )


def trials_frame(summary: MonteCarloSummary) -> pd.DataFrame:
    """逐次试验表，列顺序固定为 TRIAL_COLUMNS"""
    return pd.DataFrame([r.to_row() for r in summary.per_trial], columns=TRIAL_COLUMNS)


class MonteCarloRunner:
    """
    Monte Carlo 执行器

    parallelism > 1 时使用线程池；numpy/LAPACK 在计算中释放 GIL
    """

    def __init__(self, parallelism: Optional[int] = None):
        self.parallelism = parallelism or settings.default_parallelism

    def run_trial(self, problem: RegressionProblem, spec: FilterSpec, t: float, b: float,
                  box: float, N: int, master_seed: int, trial_id: int,
                  distribution: DesignDistribution, track_omega: bool) -> TrialResult:
        """
        单次试验

        Raises:
            TrialFailedException: 拟合或风险计算失败（附带 trial_id）
        """
        try:
            batch = draw_batch(problem, N, master_seed, distribution, trial_id=trial_id)
            fit = fit_spectral(batch, spec, t)
            risk = excess_risk(fit, problem, b)
            omega = None
            if track_omega:
                omega = omega_statistic(batch.sample_covariance(), problem.spectrum, t, box)
        except FSDException as e:
            raise TrialFailedException(
                message=f"试验 {trial_id} 失败: {e}",
                code="TRIAL_FAILED",
                details={'trial_id': trial_id, 'cause': e.to_dict()}
            ) from e
        except Exception as e:
            raise TrialFailedException(
                message=f"试验 {trial_id} 失败: {type(e).__name__}: {e}",
                code="TRIAL_FAILED",
                details={'trial_id': trial_id, 'cause': {'type': type(e).__name__, 'message': str(e)}}
            ) from e

        return TrialResult(
            trial_id=trial_id,
            seed=trial_seed(master_seed, trial_id),
            excess_risk=risk.excess_risk,
            risk_head=risk.risk_head,
            risk_tail=risk.risk_tail,
            omega_holds=None if omega is None else omega.holds,
            omega_value=None if omega is None else omega.value,
            route=fit.route,
        )

    def run(self, problem: RegressionProblem, spec: FilterSpec, t: float, b: float,
            box: Optional[float], N: int, trials: int, master_seed: int,
            parallelism: Optional[int] = None,
            distribution=DesignDistribution.GAUSSIAN,
            track_omega: bool = True) -> MonteCarloSummary:
        """
        执行 trials 次独立试验

        Args:
            problem: 回归问题
            spec: 滤波器
            t: 调节参数
            b: 估计维度常数
            box: □，为空时使用默认规则
            N: 样本量
            trials: 试验次数 ≥ 1
            master_seed: 主种子
            parallelism: 覆盖默认并行度
            distribution: 设计分布
            track_omega: 是否计算 Ω_t（需要构造 p×p 的 Σ̂）

        Returns:
            MonteCarloSummary
        """
        if trials < 1:
            raise TrialFailedException(
                message=f"试验次数要求 ≥ 1，收到 {trials}",
                code="MC_INVALID_TRIALS",
                details={'trials': trials}
            )
        box = resolve_box(t, box)
        distribution = DesignDistribution(distribution)
        workers = parallelism or self.parallelism

        def task(trial_id: int) -> TrialResult:
            return self.run_trial(problem, spec, t, b, box, N, master_seed, trial_id,
                                  distribution, track_omega)

        logger.info("Monte Carlo: %s t=%s N=%d 试验=%d 线程=%d",
                    spec.name, t, N, trials, workers)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                results = list(executor.map(task, range(trials)))
        else:
            results = [task(i) for i in range(trials)]

        return summarize(results)


def run_monte_carlo(problem: RegressionProblem, spec: FilterSpec, t: float, b: float,
                    box: Optional[float], N: int, trials: int, master_seed: int,
                    parallelism: int = 1, distribution=DesignDistribution.GAUSSIAN,
                    track_omega: bool = True) -> MonteCarloSummary:
    """函数式入口，等价于 MonteCarloRunner(parallelism).run(...)"""
    return MonteCarloRunner(parallelism).run(
        problem, spec, t, b, box, N, trials, master_seed,
        distribution=distribution, track_omega=track_omega,
    )
