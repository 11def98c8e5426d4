"""
上界/下界的经验验证

- omega_frequency / omega_study: Ω_t 事件在重复采样下的频率，以及其推论的检查
- bound_matching_study:          中位超额风险 / 速率² 在 N 网格上的稳定性
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from config import settings
from src.core.config_params import SystemConfig
from src.core.exceptions import PreconditionException
from src.core.fsd_core import (
    effective_rank,
    estimation_dimension,
    matching_condition,
    omega_consequences,
    rate_breakdown,
    resolve_box,
)
from src.core.models import FilterSpec, RegressionProblem
from src.simulation.monte_carlo import MonteCarloRunner
from src.simulation.sampler import draw_batch

logger = logging.getLogger(__name__)


# ============================================================================
# Ω_t 频率
# ============================================================================

@dataclass
class OmegaStudyReport:
    """Ω_t 频率研究"""
    frequency: float
    trials: int
    holds_count: int
    effective_rank: float
    box: float
    N: int
    consequence_violations: Dict[int, List[str]] = field(default_factory=dict)

    @property
    def violation_count(self) -> int:
        return sum(len(v) for v in self.consequence_violations.values())

    def to_dict(self) -> Dict:
        return {
            'frequency': self.frequency,
            'trials': self.trials,
            'holds_count': self.holds_count,
            'effective_rank': self.effective_rank,
            'box': self.box,
            'N': self.N,
            'consequence_violations': self.violation_count,
        }


def omega_study(problem: RegressionProblem, t: float, box: Optional[float], N: int,
                trials: int, master_seed: int, b: Optional[float] = None,
                parallelism: int = 1) -> OmegaStudyReport:
    """
    重复采样 Σ̂ = XᵀX/N，统计 Ω_t 成立的频率，并在 Ω_t 成立时检查其推论

    Raises:
        PreconditionException: trials < 50
    """
    min_trials = SystemConfig.EXPERIMENT_CONFIG['min_omega_trials']
    if trials < min_trials:
        raise PreconditionException(
            message=f"Ω_t 频率研究至少需要 {min_trials} 次试验，收到 {trials}",
            code="OMEGA_TOO_FEW_TRIALS",
            details={'trials': trials}
        )
    box = resolve_box(t, box)
    b = settings.default_b if b is None else b

    def task(trial_id: int):
        batch = draw_batch(problem, N, master_seed, trial_id=trial_id)
        return omega_consequences(batch.sample_covariance(), problem.spectrum, t, b, box)

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as executor:
            results = list(executor.map(task, range(trials)))
    else:
        results = [task(i) for i in range(trials)]

    holds = sum(1 for r in results if r.omega.holds)
    violations = {i: r.violations for i, r in enumerate(results) if r.violations}
    return OmegaStudyReport(
        frequency=holds / trials,
        trials=trials,
        holds_count=holds,
        effective_rank=effective_rank(problem.spectrum, t),
        box=box,
        N=N,
        consequence_violations=violations,
    )


def omega_frequency(problem: RegressionProblem, t: float, box: Optional[float], N: int,
                    trials: int, master_seed: int) -> float:
    """Ω_t 成立的试验比例"""
    return omega_study(problem, t, box, N, trials, master_seed).frequency


# ============================================================================
# 速率匹配
# ============================================================================

@dataclass
class MatchingPoint:
    """N 网格上的一个点；速率为 0 时比值无定义，标记 degenerate"""
    N: int
    median_risk: float
    rate_total: float
    ratio: Optional[float]
    matching: bool
    sample_complexity: bool

    @property
    def degenerate(self) -> bool:
        return self.ratio is None

    def to_dict(self) -> Dict:
        return {
            'N': self.N,
            'median_risk': self.median_risk,
            'rate_total': self.rate_total,
            'ratio_median': self.ratio,
            'degenerate': self.degenerate,
            'matching_condition': self.matching,
            'sample_complexity': self.sample_complexity,
        }


@dataclass
class BoundMatchingReport:
    """速率匹配研究报告"""
    points: List[MatchingPoint]
    k_star: int
    null_problem: bool = False
    band_limit: float = 4.0

    @property
    def degenerate(self) -> bool:
        """零问题，或至少一个 N 上速率为 0"""
        return self.null_problem or any(p.degenerate for p in self.points)

    @property
    def ratio_band(self):
        ratios = [p.ratio for p in self.points if not p.degenerate]
        return (min(ratios), max(ratios)) if ratios else (0.0, 0.0)

    @property
    def band_width(self) -> float:
        lo, hi = self.ratio_band
        return hi / lo if lo > 0 else float('inf')

    @property
    def within_band(self) -> bool:
        return not self.degenerate and self.band_width <= self.band_limit

    @property
    def precondition_failures(self) -> List[str]:
        failures = []
        if self.k_star < SystemConfig.FSD_CONFIG['min_k_star_for_matching']:
            failures.append(f"k*={self.k_star} < {SystemConfig.FSD_CONFIG['min_k_star_for_matching']}")
        for p in self.points:
            if p.degenerate:
                failures.append(f"N={p.N}: 速率为 0")
            if not p.matching:
                failures.append(f"N={p.N}: 匹配条件不成立")
            if not p.sample_complexity:
                failures.append(f"N={p.N}: 样本复杂度不足")
        return failures

    def to_dict(self) -> Dict:
        lo, hi = self.ratio_band
        return {
            'k_star': self.k_star,
            'degenerate': self.degenerate,
            'ratio_band': [lo, hi],
            'band_width': self.band_width if not self.degenerate else None,
            'band_limit': self.band_limit,
            'within_band': self.within_band,
            'points': [p.to_dict() for p in self.points],
            'precondition_failures': self.precondition_failures,
        }


def bound_matching_study(problem: RegressionProblem, spec: FilterSpec, t: float, b: float,
                         box: Optional[float], N_grid: Sequence[int], trials: int,
                         master_seed: int, c2: float = 1.0, parallelism: int = 1,
                         band_limit: Optional[float] = None,
                         runner: Optional[MonteCarloRunner] = None) -> BoundMatchingReport:
    """
    在 N 网格上比较中位超额风险与 r(V_J*, V_J*^c)²

    β* = 0 且 σ_ξ = 0 时风险与速率都为 0，直接返回 degenerate 报告

    Args:
        problem: 回归问题
        spec: 滤波器
        t: 固定的调节参数
        b: 估计维度常数
        box: □，为空时使用默认规则
        N_grid: 样本量网格
        trials: 每个 N 的试验次数
        master_seed: 主种子
        c2: 匹配条件常数
        parallelism: 并行度
        band_limit: 比值带宽上限 max/min（默认 4）
    """
    box = resolve_box(t, box)
    band_limit = band_limit or SystemConfig.EXPERIMENT_CONFIG['ratio_band_width']
    dim = estimation_dimension(problem.spectrum, t, b)

    if problem.noise_std == 0 and not problem.signal.coefficients.any():
        logger.info("零问题，跳过速率匹配")
        return BoundMatchingReport(points=[], k_star=dim.k_star, null_problem=True, band_limit=band_limit)

    runner = runner or MonteCarloRunner(parallelism)
    eff = effective_rank(problem.spectrum, t)
    points = []
    for N in N_grid:
        N = int(N)
        rate = rate_breakdown(problem, spec, t, b, N, box)
        summary = runner.run(problem, spec, t, b, box, N, trials, master_seed,
                             parallelism=parallelism, track_omega=False)
        rate_squared = rate.total ** 2
        if rate_squared == 0:
            logger.warning("N=%d 上速率为 0，比值无定义", N)
        points.append(MatchingPoint(
            N=N,
            median_risk=summary.median,
            rate_total=rate.total,
            ratio=summary.median / rate_squared if rate_squared > 0 else None,
            matching=matching_condition(problem, spec, t, b, N, box, c2),
            sample_complexity=box ** 2 * N >= eff,
        ))
        logger.info("速率匹配 N=%d 比值=%s", N, points[-1].ratio)

    return BoundMatchingReport(points=points, k_star=dim.k_star, band_limit=band_limit)
