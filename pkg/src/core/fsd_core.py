"""
特征空间分解（FSD）核心计算

确定性量：
- 估计维度 k* 与岭回归维度 k**
- 有效秩及其上下界
- 速率分解 r(V_J*, V_J*^c) 与松弛项
- 匹配条件、Ω_t 统计量及其推论
- PCR 间隔 θ、谱间隙条件与 PCR 松弛项
- 确定性范数界与定理前提条件账本

所有计算都在特征基下进行（对角求和）
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np
from scipy import linalg

from .config_params import SystemConfig
from .exceptions import (
    DimensionMismatchException,
    EigensolverException,
    RateComputationException,
)
from .filters import residual_eval, sandwich_check
from .models import (
    BoundCheck,
    EffectiveRankBracket,
    EstimationDimension,
    FilterKind,
    FilterSpec,
    NormBoundsReport,
    OmegaStatistic,
    PreconditionCheck,
    RateBreakdown,
    RegressionProblem,
    SpectrumModel,
    TuningParameter,
)

logger = logging.getLogger(__name__)

# 不等式比较的相对容差（舍入误差）
_TOL = 1e-12


def _check_t(t: float) -> float:
    return TuningParameter(float(t)).t


def _check_b(b: float) -> float:
    if not 0 < b < 1:
        raise RateComputationException(
            message=f"估计维度常数要求 0 < b < 1，收到 b={b}",
            code="FSD_INVALID_B",
            details={'b': b}
        )
    return float(b)


def _check_box(box: float) -> float:
    box_max = SystemConfig.FSD_CONFIG['box_max']
    if not 0 < box < box_max:
        raise RateComputationException(
            message=f"□ 必须满足 0 < □ < 1/9，收到 □={box}",
            code="FSD_INVALID_BOX",
            details={'box': box}
        )
    return float(box)


def check_pcr_constant(spec: FilterSpec, b: float) -> None:
    """
    PCR 的阈值常数必须与 k* 的常数 b 相同

    Raises:
        RateComputationException: spec 为 pcr:b' 且 b' ≠ b
    """
    if spec.kind == FilterKind.PCR and not math.isclose(spec.b, b, rel_tol=_TOL, abs_tol=0.0):
        raise RateComputationException(
            message=f"PCR 阈值常数 {spec.b} 与估计维度常数 b={b} 不一致",
            code="RATE_PCR_B_MISMATCH",
            details={'pcr_b': spec.b, 'b': b}
        )


def resolve_box(t: float, box: Optional[float] = None) -> float:
    """□ 未给出时使用默认规则 min(0.1, 1/log(e·t))"""
    return SystemConfig.default_box(t) if box is None else float(box)


# ============================================================================
# 估计维度与有效秩
# ============================================================================

def estimation_dimension(spectrum: SpectrumModel, t: float, b: float) -> EstimationDimension:
    """
    估计维度 k* = min{k ∈ [p] : σ_{k+1} ≤ b t⁻¹}，约定 σ_{p+1} = 0

    σ_1 ≤ b t⁻¹ 时 k* 仍取 1，并标记 degenerate

    Args:
        spectrum: 协方差谱
        t: 调节参数 t ≥ 1
        b: 常数 0 < b < 1

    Returns:
        EstimationDimension
    """
    t = _check_t(t)
    b = _check_b(b)
    threshold = b / t
    sigma = spectrum.eigenvalues
    following = np.append(sigma[1:], 0.0)  # σ_{k+1}，k = 1..p
    k_star = int(np.argmax(following <= threshold)) + 1
    return EstimationDimension(
        k_star=k_star,
        threshold=threshold,
        b=b,
        t=t,
        degenerate=bool(sigma[0] <= threshold),
    )


def ridge_estimation_dimension(spectrum: SpectrumModel, t: float, b: float, N: int) -> int:
    """
    岭回归维度 k** = min{k ∈ [p] : σ_{k+1}·N ≤ b·(Tr(Σ_{k+1:p}) + N t⁻¹)}

    仅作参考输出；恒有 k** ≤ k*
    """
    t = _check_t(t)
    b = _check_b(b)
    sigma = spectrum.eigenvalues
    following = np.append(sigma[1:], 0.0)
    # Tr(Σ_{k+1:p}) 对 k = 1..p
    tail_traces = np.append(np.cumsum(sigma[::-1])[::-1][1:], 0.0)
    satisfied = following * N <= b * (tail_traces + N / t)
    return int(np.argmax(satisfied)) + 1


def effective_rank(spectrum: SpectrumModel, t: float) -> float:
    """有效秩 Tr(Σ(Σ + t⁻¹I)⁻¹) = Σ_j σ_j/(σ_j + t⁻¹)"""
    t = _check_t(t)
    sigma = spectrum.eigenvalues
    return float(np.sum(sigma / (sigma + 1.0 / t)))


def effective_rank_bracket(spectrum: SpectrumModel, t: float, b: float) -> EffectiveRankBracket:
    """
    有效秩的上下界

    lower = b·k*/(1+b) + t·Tr(Σ_{J*^c})/(1+b)
    upper = k* + t·Tr(Σ_{J*^c})

    k* 退化（σ_1 ≤ b t⁻¹）时下界不适用，lower_applicable 为 False

    Returns:
        EffectiveRankBracket
    """
    dim = estimation_dimension(spectrum, t, b)
    tail_trace = float(np.sum(spectrum.eigenvalues[dim.k_star:]))
    lower = (dim.b * dim.k_star + dim.t * tail_trace) / (1 + dim.b)
    upper = dim.k_star + dim.t * tail_trace
    if dim.degenerate:
        logger.debug("σ_1 ≤ b/t，有效秩下界不适用")
    return EffectiveRankBracket(lower=lower, upper=upper, degenerate=dim.degenerate)


# ============================================================================
# 速率分解
# ============================================================================

def _head_inverse_norm(sigma_head: np.ndarray, beta_head: np.ndarray) -> float:
    """
    ‖Σ_J^{-1/2}β*_J‖₂，约定 0/0 = 0

    Raises:
        RateComputationException: 零特征值上有非零系数
    """
    zero = sigma_head == 0
    if np.any(zero & (beta_head != 0)):
        index = int(np.argmax(zero & (beta_head != 0))) + 1
        raise RateComputationException(
            message=f"σ_{index} = 0 但 β*_{index} ≠ 0，‖Σ_J^{{-1/2}}β*_J‖ 为无穷",
            code="RATE_INFINITE_SLACK",
            details={'index': index}
        )
    safe = np.where(zero, 1.0, sigma_head)
    return float(np.sqrt(np.sum(np.where(zero, 0.0, beta_head ** 2 / safe))))


def rate_breakdown(problem: RegressionProblem, spec: FilterSpec, t: float, b: float,
                   N: int, box: float) -> RateBreakdown:
    """
    速率分解

    bias_head  = ‖Σ_J^{1/2}ψ_t(Σ)β*_J‖₂
    var_head   = σ_ξ√(k*/N)
    align_tail = ‖Σ_{J^c}^{1/2}β*_{J^c}‖₂
    var_tail   = σ_ξ·t·√(Tr(Σ_{J^c}²)/N)
    slack      = (□/t)‖Σ_J^{-1/2}β*_J‖₂

    Args:
        problem: 回归问题
        spec: 滤波器
        t: 调节参数
        b: 估计维度常数
        N: 样本量 N ≥ 1
        box: □ ∈ (0, 1/9)

    Raises:
        RateComputationException: N < 1、□ 越界、松弛项无穷或 PCR 常数与 b 不一致
    """
    if N < 1:
        raise RateComputationException(
            message=f"样本量要求 N ≥ 1，收到 N={N}",
            code="RATE_INVALID_N",
            details={'N': N}
        )
    box = _check_box(box)
    dim = estimation_dimension(problem.spectrum, t, b)
    k = dim.k_star
    check_pcr_constant(spec, dim.b)

    sigma = problem.spectrum.eigenvalues
    beta = problem.signal.coefficients
    sigma_head, beta_head = sigma[:k], beta[:k]
    sigma_tail, beta_tail = sigma[k:], beta[k:]
    noise = problem.noise_std

    psi = np.asarray(residual_eval(spec, dim.t, sigma_head))
    bias_head = float(np.sqrt(np.sum(sigma_head * (psi * beta_head) ** 2)))
    var_head = noise * math.sqrt(k / N)
    align_tail = float(np.sqrt(np.sum(sigma_tail * beta_tail ** 2)))
    var_tail = noise * dim.t * math.sqrt(float(np.sum(sigma_tail ** 2)) / N)
    slack = box / dim.t * _head_inverse_norm(sigma_head, beta_head)

    return RateBreakdown(
        bias_head=bias_head,
        var_head=var_head,
        align_tail=align_tail,
        var_tail=var_tail,
        slack=slack,
        k_star=k,
        t=dim.t,
    )


def matching_condition(problem: RegressionProblem, spec: FilterSpec, t: float, b: float,
                       N: int, box: float, c2: float = 1.0) -> bool:
    """上下界匹配条件：slack ≤ c2 · total"""
    rate = rate_breakdown(problem, spec, t, b, N, box)
    return rate.slack <= c2 * rate.total


def matching_sufficient_condition(spec: FilterSpec, t: float, box: float,
                                  grid_points: Optional[int] = None) -> bool:
    """
    匹配条件的充分条件：对所有 x ∈ [0, 1]，ψ_t(x) ≥ (□/t)·x

    在 [0, 1] 的均匀网格上检查
    """
    points = grid_points or SystemConfig.FSD_CONFIG['sufficient_condition_grid']
    x = np.linspace(0.0, 1.0, points)
    t = _check_t(t)
    psi = np.asarray(residual_eval(spec, t, x))
    return bool(np.all(psi >= box / t * x))


# ============================================================================
# Ω_t 统计量
# ============================================================================

def _symmetric_eigvals(matrix: np.ndarray, label: str) -> np.ndarray:
    """对称矩阵特征值，失败时报告条件信息"""
    try:
        return linalg.eigh(matrix, eigvals_only=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigensolverException(
            message=f"{label} 特征分解失败: {e}",
            code="EIGENSOLVER_FAILED",
            details={
                'shape': list(matrix.shape),
                'finite': bool(np.all(np.isfinite(matrix))),
                'frobenius_norm': float(np.linalg.norm(matrix)) if np.all(np.isfinite(matrix)) else None,
            }
        )


def _check_square(sigma_hat: np.ndarray, spectrum: SpectrumModel) -> np.ndarray:
    sigma_hat = np.asarray(sigma_hat, dtype=np.float64)
    if sigma_hat.shape != (spectrum.p, spectrum.p):
        raise DimensionMismatchException(
            message=f"Σ̂ 形状 {sigma_hat.shape} 与谱维度 {spectrum.p} 不一致",
            code="OMEGA_DIMENSION_MISMATCH",
            details={'shape': list(sigma_hat.shape), 'p': spectrum.p}
        )
    return sigma_hat


def _is_diagonal(matrix: np.ndarray) -> bool:
    return not np.any(matrix - np.diag(np.diagonal(matrix)))


def omega_statistic(sigma_hat: np.ndarray, spectrum: SpectrumModel, t: float,
                    box: float) -> OmegaStatistic:
    """
    Ω_t 统计量 ‖Σ_t^{-1/2}(Σ̂−Σ)Σ_t^{-1/2}‖_op，Σ_t = Σ + t⁻¹I

    Σ̂ 为对角阵时直接取对角线

    Raises:
        DimensionMismatchException: Σ̂ 维度不符
    """
    sigma_hat = _check_square(sigma_hat, spectrum)
    t = _check_t(t)
    box = _check_box(box)
    sigma = spectrum.eigenvalues
    scale = 1.0 / np.sqrt(sigma + 1.0 / t)

    if _is_diagonal(sigma_hat):
        value = float(np.max(np.abs(scale ** 2 * (np.diagonal(sigma_hat) - sigma))))
    else:
        conjugated = scale[:, None] * (sigma_hat - np.diag(sigma)) * scale[None, :]
        conjugated = (conjugated + conjugated.T) / 2
        value = float(np.max(np.abs(_symmetric_eigvals(conjugated, "Σ_t^{-1/2}(Σ̂−Σ)Σ_t^{-1/2}"))))

    return OmegaStatistic(value=value, box=box, holds=value <= box)


@dataclass
class OmegaConsequences:
    """Ω_t 成立时的算子范数推论"""
    omega: OmegaStatistic
    sample_opnorm: float                  # ‖Σ̂‖_op
    sample_opnorm_bound: float            # 4(σ_1 + t⁻¹)
    population_over_sample: float         # ‖Σ_t^{1/2}Σ̂_t^{-1/2}‖²
    head_over_sample: float               # ‖Σ_J^{1/2}Σ̂_t^{-1/2}‖²
    sample_over_population: float         # ‖Σ_t^{-1/2}Σ̂_t^{1/2}‖²
    violations: List[str] = field(default_factory=list)


def omega_consequences(sigma_hat: np.ndarray, spectrum: SpectrumModel, t: float, b: float,
                       box: float) -> OmegaConsequences:
    """
    测量 Ω_t 的推论，并只在 Ω_t 成立时检查：

        ‖Σ̂‖ ≤ 4(σ_1 + t⁻¹)
        ‖Σ_J^{1/2}Σ̂_t^{-1/2}‖² ≤ ‖Σ_t^{1/2}Σ̂_t^{-1/2}‖² ≤ 2
        ‖Σ_t^{-1/2}Σ̂_t^{1/2}‖² ≤ 2
    """
    sigma_hat = _check_square(sigma_hat, spectrum)
    omega = omega_statistic(sigma_hat, spectrum, t, box)
    dim = estimation_dimension(spectrum, t, b)
    sigma = spectrum.eigenvalues
    t_inv = 1.0 / dim.t

    symmetric = (sigma_hat + sigma_hat.T) / 2
    hat_eigvals = _symmetric_eigvals(symmetric, "Σ̂")
    sample_opnorm = float(np.max(np.abs(hat_eigvals)))

    # ‖A Σ̂_t^{-1/2}‖² = λ_max(A Σ̂_t^{-1} A)，A 为对角阵
    regularized = symmetric + t_inv * np.eye(spectrum.p)
    try:
        reg_eigvals, reg_eigvecs = linalg.eigh(regularized)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigensolverException(
            message=f"Σ̂_t 特征分解失败: {e}",
            code="EIGENSOLVER_FAILED",
            details={'shape': list(regularized.shape)}
        )
    inv_sqrt = (reg_eigvecs / np.sqrt(reg_eigvals)[None, :]) @ reg_eigvecs.T

    def squared_norm(weights: np.ndarray) -> float:
        product = inv_sqrt * weights[None, :]  # Σ̂_t^{-1/2} diag(w)
        gram = product.T @ product             # diag(w) Σ̂_t^{-1} diag(w)
        return float(np.max(_symmetric_eigvals((gram + gram.T) / 2, "gram")))

    population_over_sample = squared_norm(np.sqrt(sigma + t_inv))
    head_weights = np.zeros(spectrum.p)
    head_weights[:dim.k_star] = np.sqrt(sigma[:dim.k_star])
    head_over_sample = squared_norm(head_weights)

    # ‖Σ_t^{-1/2}Σ̂_t^{1/2}‖² = λ_max(Σ_t^{-1/2}Σ̂_tΣ_t^{-1/2})
    scale = 1.0 / np.sqrt(sigma + t_inv)
    conjugated = scale[:, None] * regularized * scale[None, :]
    sample_over_population = float(np.max(_symmetric_eigvals((conjugated + conjugated.T) / 2, "Σ_t^{-1/2}Σ̂_tΣ_t^{-1/2}")))

    report = OmegaConsequences(
        omega=omega,
        sample_opnorm=sample_opnorm,
        sample_opnorm_bound=4.0 * (float(sigma[0]) + t_inv),
        population_over_sample=population_over_sample,
        head_over_sample=head_over_sample,
        sample_over_population=sample_over_population,
    )

    if omega.holds:
        slack = 1 + _TOL
        if sample_opnorm > report.sample_opnorm_bound * slack:
            report.violations.append('sample_opnorm')
        if head_over_sample > population_over_sample * slack:
            report.violations.append('head_over_sample')
        if population_over_sample > 2.0 * slack:
            report.violations.append('population_over_sample')
        if sample_over_population > 2.0 * slack:
            report.violations.append('sample_over_population')

    return report


# ============================================================================
# PCR
# ============================================================================

def pcr_theta(spectrum: SpectrumModel, t: float, b: float, box: float) -> float:
    """
    PCR 间隔

    θ = min(b t⁻¹ − (σ_{k*+1} + □(σ_{k*+1} + t⁻¹)),
            (σ_{k*} − □(σ_{k*} + t⁻¹)) − b t⁻¹)

    θ ≤ 0 表示 PCR 分析不适用；□ = 0 允许
    """
    dim = estimation_dimension(spectrum, t, b)
    t_inv = 1.0 / dim.t
    upper = spectrum.sigma(dim.k_star)
    lower = spectrum.sigma(dim.k_star + 1)
    below = dim.threshold - (lower + box * (lower + t_inv))
    above = (upper - box * (upper + t_inv)) - dim.threshold
    return float(min(below, above))


def pcr_gap_condition(spectrum: SpectrumModel, t: float, b: float, box: float) -> Dict:
    """
    k* 处的谱间隙条件

    Returns:
        {'gap', 'required_gap', 'gap_large_enough', 'threshold_in_window', 'theta', 'applicable'}
    """
    dim = estimation_dimension(spectrum, t, b)
    t_inv = 1.0 / dim.t
    upper = spectrum.sigma(dim.k_star)
    lower = spectrum.sigma(dim.k_star + 1)
    window_lo = lower + box * (lower + t_inv)
    window_hi = upper - box * (upper + t_inv)
    theta = pcr_theta(spectrum, t, b, box)
    return {
        'k_star': dim.k_star,
        'gap': upper - lower,
        'required_gap': box * (upper + lower + 2 * t_inv),
        'gap_large_enough': upper - lower > box * (upper + lower + 2 * t_inv),
        'threshold_in_window': window_lo < dim.threshold < window_hi,
        'theta': theta,
        'applicable': theta > 0,
    }


def pcr_slack(problem: RegressionProblem, t: float, b: float, box: float) -> float:
    """PCR 松弛项 (□/θ²)‖Σ_J^{-1/2}β*_J‖₂，θ ≤ 0 时为无穷"""
    theta = pcr_theta(problem.spectrum, t, b, box)
    if theta <= 0:
        return math.inf
    k = estimation_dimension(problem.spectrum, t, b).k_star
    head_norm = _head_inverse_norm(problem.spectrum.eigenvalues[:k], problem.signal.coefficients[:k])
    return box / theta ** 2 * head_norm


# ============================================================================
# 确定性范数界
# ============================================================================

def deterministic_norm_bounds(spectrum: SpectrumModel, t: float, b: float) -> NormBoundsReport:
    """
    测量并检查由 k* 定义直接推出的范数界：

        ‖Σ_J^{1/2}Σ_t^{-1/2}‖ ≤ ‖Σ^{1/2}Σ_t^{-1/2}‖ ≤ 1
        ‖Σ_{J^c}^{1/2}Σ_t^{-1/2}‖ ≤ √(b/(1+b))
        ‖Σ_J^{-1/2}Σ_t^{1/2}‖ ≤ √((1+b)/b)
        b t⁻¹ ≤ σ_{k*}

    k* 退化（σ_1 ≤ b t⁻¹）时头部界标记为不适用
    """
    dim = estimation_dimension(spectrum, t, b)
    sigma = spectrum.eigenvalues
    t_inv = 1.0 / dim.t
    ratio = sigma / (sigma + t_inv)
    k = dim.k_star
    head_applicable = not dim.degenerate

    full = float(np.sqrt(np.max(ratio)))
    head = float(np.sqrt(np.max(ratio[:k])))
    tail = float(np.sqrt(np.max(ratio[k:]))) if k < spectrum.p else 0.0
    head_sigma = sigma[:k]
    if np.all(head_sigma > 0):
        head_inverse = float(np.sqrt(np.max((head_sigma + t_inv) / head_sigma)))
    else:
        head_inverse = math.inf

    def check(name, measured, bound, applicable=True):
        return BoundCheck(name, measured, bound, measured <= bound * (1 + _TOL), applicable)

    checks = [
        check('head_le_full', head, full),
        check('full_le_one', full, 1.0),
        check('tail_bound', tail, math.sqrt(dim.b / (1 + dim.b))),
        check('head_inverse_bound', head_inverse, math.sqrt((1 + dim.b) / dim.b), head_applicable),
        check('threshold_le_sigma_k', dim.threshold, spectrum.sigma(k), head_applicable),
    ]
    report = NormBoundsReport(checks=checks, degenerate=dim.degenerate)
    if report.violations:
        logger.warning("范数界被违反: %s", report.violations)
    return report


# ============================================================================
# 前提条件账本
# ============================================================================

def theorem_preconditions(problem: RegressionProblem, spec: FilterSpec, t: float, b: float,
                          N: int, box: float) -> List[PreconditionCheck]:
    """
    上下界定理的前提条件账本

    条目：样本复杂度 □²N ≥ max(有效秩, 1)、□ ≤ 1/log(e·t)、0 < □ < 1/9、
    σ_1 ≤ 1、滤波器夹逼认证、k* 非退化
    """
    t_value = _check_t(t)
    eff = effective_rank(problem.spectrum, t_value)
    dim = estimation_dimension(problem.spectrum, t_value, b)
    box_max = SystemConfig.FSD_CONFIG['box_max']
    log_cap = 1.0 / math.log(math.e * t_value)

    sample_budget = box ** 2 * N
    ledger = [
        PreconditionCheck(
            'sample_complexity', sample_budget >= max(eff, 1.0),
            f"□²N = {sample_budget:.6g}, effective_rank = {eff:.6g}"
        ),
        PreconditionCheck(
            'box_log_scale', box <= log_cap * (1 + _TOL),
            f"□ = {box:.6g}, 1/log(e·t) = {log_cap:.6g}"
        ),
        PreconditionCheck('box_range', 0 < box < box_max, f"□ = {box:.6g}"),
        PreconditionCheck(
            'opnorm_at_most_one', problem.spectrum.sigma(1) <= 1.0,
            f"σ_1 = {problem.spectrum.sigma(1):.6g}"
        ),
        PreconditionCheck('k_star_nondegenerate', not dim.degenerate,
                          f"k* = {dim.k_star}, b/t = {dim.threshold:.6g}"),
    ]

    if spec.kind != FilterKind.GRADIENT_DESCENT or float(t_value).is_integer():
        report = sandwich_check(spec, t_value)
        tol = SystemConfig.ACCEPTANCE_CONFIG['sandwich_tol']
        holds = report.max_upper_violation <= tol and (
            not spec.lower_certified or report.max_lower_violation <= tol
        )
        ledger.append(PreconditionCheck(
            'filter_sandwich', holds,
            f"{spec.name}: max_violation = {report.max_violation:.3g}"
        ))
    return ledger
