"""
饱和效应实验

- sweep_rates:           t 网格上的速率扫描与最小化
- plateau_saturation:    平台模型下 Ridge / GF 的最优速率与闭式解对比
- sobolev_study:         Sobolev 类上平方速率随 N 的 log-log 斜率
- partial_order_verdict: 同一 t 下两种滤波器的头部偏差比较
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.core.config_params import SystemConfig
from src.core.exceptions import InvalidGridException
from src.core.filters import make_filter
from src.core.fsd_core import rate_breakdown, resolve_box
from src.core.models import (
    ExponentFit,
    FilterKind,
    FilterSpec,
    PlateauScenario,
    RegressionProblem,
    SweepResult,
)
from src.core.spectra import make_plateau_problem, make_sobolev_problem, sobolev_truncation_dimension
from src.simulation.monte_carlo import MonteCarloRunner

logger = logging.getLogger(__name__)


# ============================================================================
# 速率扫描
# ============================================================================

def sweep_rates(problem: RegressionProblem, spec: FilterSpec, b: float, N: int,
                box: Optional[float], t_grid: Sequence[float]) -> SweepResult:
    """
    在 t 网格上计算速率分解并取最小值（并列时取较小的 t）

    Args:
        problem: 回归问题
        spec: 滤波器
        b: 估计维度常数
        N: 样本量
        box: □，为空时每个 t 使用默认规则
        t_grid: 非空且全部 ≥ 1

    Raises:
        InvalidGridException: 网格为空或含 t < 1
    """
    grid = [float(t) for t in t_grid]
    if not grid or min(grid) < 1:
        raise InvalidGridException(
            message="t 网格必须非空且所有 t ≥ 1",
            code="SWEEP_INVALID_GRID",
            details={'size': len(grid)}
        )

    rates = [rate_breakdown(problem, spec, t, b, N, resolve_box(t, box)) for t in grid]
    best = min(range(len(grid)), key=lambda i: (rates[i].total, grid[i]))
    return SweepResult(
        t_grid=grid,
        rates=rates,
        argmin_t=grid[best],
        min_rate=rates[best].total,
    )


def interval_grid(scenario: PlateauScenario, b: float, points: Optional[int] = None) -> np.ndarray:
    """
    区间 I = {t : b⁻¹ε ≤ t⁻¹ < σ} ∩ {t ≥ 1} 上的对数网格

    开端留 1e-9 的相对余量，闭端留 1e-12 防止舍入越界
    """
    cfg = SystemConfig.get_experiment_config()
    lo, hi = scenario.interval(b)
    lo *= 1 + cfg['open_end_margin']
    hi *= 1 - cfg['closed_end_margin']
    if not lo < hi:
        raise InvalidGridException(
            message=f"区间 I 为空: [{lo}, {hi}]",
            code="PLATEAU_EMPTY_INTERVAL",
            details={'lo': lo, 'hi': hi}
        )
    return np.geomspace(lo, hi, points or cfg['interval_grid_points'])


# ============================================================================
# 平台模型
# ============================================================================

@dataclass
class PlateauReport:
    """平台模型饱和实验报告"""
    snr: float
    r_value: float
    hypothesis_met: bool
    min_ridge: float
    min_gf: float
    closed_ridge: float
    closed_gf: float
    argmin_ridge: float
    argmin_gf: float
    t_star_ridge: float
    t_star_gf: float

    @property
    def verdict(self) -> bool:
        """GF 不劣于 Ridge"""
        return self.min_gf <= self.min_ridge

    @property
    def ridge_relative_error(self) -> float:
        return _relative_error(self.min_ridge, self.closed_ridge)

    @property
    def gf_relative_error(self) -> float:
        return _relative_error(self.min_gf, self.closed_gf)

    def to_dict(self) -> Dict:
        return {
            'snr': self.snr,
            'R': self.r_value,
            'hypothesis_met': self.hypothesis_met,
            'min_ridge': self.min_ridge,
            'min_gf': self.min_gf,
            'closed_ridge': self.closed_ridge,
            'closed_gf': self.closed_gf,
            'argmin_ridge': self.argmin_ridge,
            'argmin_gf': self.argmin_gf,
            't_star_ridge': self.t_star_ridge,
            't_star_gf': self.t_star_gf,
            'ridge_relative_error': self.ridge_relative_error,
            'gf_relative_error': self.gf_relative_error,
            'verdict': self.verdict,
        }


def _relative_error(value: float, reference: float) -> float:
    """参考值不是有限正数时相对误差无定义，返回 nan"""
    if not math.isfinite(reference) or reference <= 0:
        return math.nan
    return abs(value - reference) / reference


def plateau_closed_forms(scenario: PlateauScenario) -> Dict[str, float]:
    """
    平台模型最优速率的闭式解

    ridge: σ_ξ√(k/N) + (σ_ξ/σ)ε√((p−k)/N)(2√R − 1)，t* = (√R − 1)/σ
    gf:    σ_ξ√(k/N) + (σ_ξ/σ)ε√((p−k)/N)(1 + log R)，t* = log R/σ

    R 不是有限正数（σ_ξ = 0 或 α_* = 0）时闭式速率无定义，记为 nan；σ_ξ = 0 时 t* = ∞
    """
    sc = scenario
    R = sc.r_value
    if not math.isfinite(R) or R <= 0:
        logger.warning("平台模型 R=%s 不是有限正数，闭式解无定义", R)
        t_star = math.inf if R == math.inf else math.nan
        return {'ridge': math.nan, 'gf': math.nan, 't_star_ridge': t_star, 't_star_gf': t_star}
    head = sc.noise_std * math.sqrt(sc.k / sc.N)
    prefactor = sc.noise_std / sc.sigma * sc.eps * math.sqrt((sc.p - sc.k) / sc.N)
    return {
        'ridge': head + prefactor * (2 * math.sqrt(R) - 1),
        'gf': head + prefactor * (1 + math.log(R)),
        't_star_ridge': (math.sqrt(R) - 1) / sc.sigma,
        't_star_gf': math.log(R) / sc.sigma,
    }


def plateau_saturation(scenario: PlateauScenario, b: float, N: Optional[int] = None,
                       box: Optional[float] = None,
                       grid_points: Optional[int] = None) -> PlateauReport:
    """
    平台模型上 Ridge 与 GF 在区间 I 上的最优速率

    前提 4 < SNR ≤ bσ/ε 不满足时仍然计算，并在报告中标记

    Args:
        scenario: 平台场景
        b: 估计维度常数
        N: 覆盖场景中的样本量
        box: □，为空时使用默认规则
        grid_points: 区间网格点数（默认 512）
    """
    if N is not None:
        scenario = replace(scenario, N=int(N))
    problem = make_plateau_problem(scenario.k, scenario.sigma, scenario.eps, scenario.p,
                                   scenario.alpha_star, scenario.noise_std)
    grid = interval_grid(scenario, b, grid_points)

    ridge = sweep_rates(problem, make_filter(FilterKind.RIDGE), b, scenario.N, box, grid)
    gf = sweep_rates(problem, make_filter(FilterKind.GRADIENT_FLOW), b, scenario.N, box, grid)
    closed = plateau_closed_forms(scenario)

    hypothesis = scenario.hypothesis_holds(b)
    if not hypothesis:
        logger.warning("平台模型前提 4 < SNR ≤ bσ/ε 不满足 (SNR=%.4g)", scenario.snr)

    return PlateauReport(
        snr=scenario.snr,
        r_value=scenario.r_value,
        hypothesis_met=hypothesis,
        min_ridge=ridge.min_rate,
        min_gf=gf.min_rate,
        closed_ridge=closed['ridge'],
        closed_gf=closed['gf'],
        argmin_ridge=ridge.argmin_t,
        argmin_gf=gf.argmin_t,
        t_star_ridge=closed['t_star_ridge'],
        t_star_gf=closed['t_star_gf'],
    )


# ============================================================================
# Sobolev 类
# ============================================================================

@dataclass
class MonteCarloOptions:
    """sobolev_study 的 Monte Carlo 选项"""
    trials: int = 32
    master_seed: int = 0
    p_cap: int = field(default_factory=lambda: SystemConfig.EXPERIMENT_CONFIG['monte_carlo_slope_p_cap'])
    parallelism: int = 1


def check_geometric_grid(N_grid: Sequence[int]) -> List[int]:
    """
    校验 N 网格为几何网格且至少 4 个点

    Raises:
        InvalidGridException: 点数不足、非递增或非几何
    """
    cfg = SystemConfig.get_experiment_config()
    grid = [int(n) for n in N_grid]
    if len(grid) < cfg['min_exponent_points']:
        raise InvalidGridException(
            message=f"斜率拟合至少需要 {cfg['min_exponent_points']} 个点，收到 {len(grid)}",
            code="GRID_TOO_SHORT",
            details={'N_grid': grid}
        )
    ratios = np.array(grid[1:], dtype=np.float64) / np.array(grid[:-1], dtype=np.float64)
    if np.any(ratios <= 1) or not np.allclose(ratios, ratios[0], rtol=cfg['geometric_grid_rtol'], atol=0):
        raise InvalidGridException(
            message="N 网格必须是递增的几何网格",
            code="GRID_NOT_GEOMETRIC",
            details={'N_grid': grid}
        )
    return grid


def fit_log_slope(N_grid: Sequence[int], values: Sequence[float]) -> float:
    """log(value) 对 log(N) 的最小二乘斜率"""
    slope, _ = np.polyfit(np.log(np.asarray(N_grid, dtype=np.float64)),
                          np.log(np.asarray(values, dtype=np.float64)), 1)
    return float(slope)


def sobolev_tuning(alpha: float, s: float, N: int, spec: FilterSpec) -> float:
    """
    t = N^{α/(1+s̃α)}，Ridge 取 s̃ = s∧2，其余 s̃ = s；GD 四舍五入为整数
    """
    s_tilde = min(s, 2.0) if spec.kind == FilterKind.RIDGE else s
    t = float(N) ** (alpha / (1 + s_tilde * alpha))
    if spec.kind == FilterKind.GRADIENT_DESCENT:
        t = float(max(1, round(t)))
    return t


def sobolev_target_exponent(alpha: float, s: float, spec: FilterSpec) -> float:
    """目标斜率 −αs̃/(1+s̃α)"""
    s_tilde = min(s, 2.0) if spec.kind == FilterKind.RIDGE else s
    return -alpha * s_tilde / (1 + s_tilde * alpha)


def sobolev_study(alpha: float, s: float, N_grid: Sequence[int], b: float,
                  box: Optional[float], spec: FilterSpec, noise_std: float = 1.0,
                  delta: Optional[float] = None,
                  monte_carlo: Optional[MonteCarloOptions] = None,
                  runner: Optional[MonteCarloRunner] = None) -> ExponentFit:
    """
    Sobolev 类上的速率指数

    每个 N：p = max(32N, 4096)，t = N^{α/(1+s̃α)}，计算 total²，再拟合斜率；
    给出 monte_carlo 时在同一网格上（p 截断到 p_cap）计算中位风险斜率

    Raises:
        InvalidGridException: 非几何网格或点数不足
    """
    grid = check_geometric_grid(N_grid)
    values, t_values = [], []
    for N in grid:
        t = sobolev_tuning(alpha, s, N, spec)
        problem = make_sobolev_problem(alpha, s, sobolev_truncation_dimension(N), noise_std, delta)
        rate = rate_breakdown(problem, spec, t, b, N, resolve_box(t, box))
        values.append(rate.total ** 2)
        t_values.append(t)
        logger.debug("Sobolev N=%d t=%.4g 速率²=%.6g", N, t, values[-1])

    result = ExponentFit(
        N_grid=grid,
        values=values,
        fitted_slope=fit_log_slope(grid, values),
        target_exponent=sobolev_target_exponent(alpha, s, spec),
        t_values=t_values,
    )

    if monte_carlo is not None:
        runner = runner or MonteCarloRunner(monte_carlo.parallelism)
        medians = []
        for N, t in zip(grid, t_values):
            p = min(sobolev_truncation_dimension(N), monte_carlo.p_cap)
            problem = make_sobolev_problem(alpha, s, p, noise_std, delta)
            summary = runner.run(problem, spec, t, b, box, N, monte_carlo.trials,
                                 monte_carlo.master_seed, parallelism=monte_carlo.parallelism,
                                 track_omega=False)
            medians.append(summary.median)
        result.monte_carlo_medians = medians
        result.monte_carlo_slope = fit_log_slope(grid, medians)

    return result


# ============================================================================
# 偏序
# ============================================================================

@dataclass
class PartialOrderVerdict:
    """A ⪯ B 判定（同一 t 下只有头部偏差不同）"""
    A_leq_B: bool
    bias_ratio: float
    bias_a: float
    bias_b: float

    def to_dict(self) -> Dict:
        return {
            'A_leq_B': self.A_leq_B,
            'bias_ratio': self.bias_ratio,
            'bias_head_A': self.bias_a,
            'bias_head_B': self.bias_b,
        }


def partial_order_verdict(problem: RegressionProblem, filter_a: FilterSpec, filter_b: FilterSpec,
                          t: float, b: float, N: int, box: Optional[float]) -> PartialOrderVerdict:
    """
    比较两个滤波器在同一 t 下的头部偏差

    bias_ratio = bias_A / bias_B，两者都为 0 时取 1
    """
    box = resolve_box(t, box)
    bias_a = rate_breakdown(problem, filter_a, t, b, N, box).bias_head
    bias_b = rate_breakdown(problem, filter_b, t, b, N, box).bias_head
    if bias_b == 0:
        ratio = 1.0 if bias_a == 0 else math.inf
    else:
        ratio = bias_a / bias_b
    return PartialOrderVerdict(A_leq_B=bias_a <= bias_b, bias_ratio=ratio, bias_a=bias_a, bias_b=bias_b)
