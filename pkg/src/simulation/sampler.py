"""
采样与谱方法拟合

- draw_batch:     按 (master_seed, trial_id, stream) 计数器种子生成 X 与 y
- fit_spectral:   β̂ = (1/N)φ_t(Σ̂)Xᵀy = (1/N)Xᵀφ_t(XXᵀ/N)y，精确谱演算
- excess_risk:    ‖Σ^{1/2}(β̂−β*)‖₂²，并在 k* 处做头/尾分解
"""

import logging
from typing import Optional, Union

import numpy as np
from scipy import linalg

from config import settings
from src.core.config_params import SystemConfig
from src.core.exceptions import DimensionMismatchException, EigensolverException
from src.core.filters import filter_eval, residual_eval
from src.core.fsd_core import estimation_dimension
from src.core.models import (
    DesignDistribution,
    FilterSpec,
    RegressionProblem,
    RiskDecomposition,
    SampleBatch,
    SpectralFit,
)

logger = logging.getLogger(__name__)


# ============================================================================
# 随机数
# ============================================================================

def trial_seed(master_seed: int, trial_id: int) -> int:
    """第 trial_id 次试验的 64 位派生种子 f(master_seed, trial_id)"""
    state = np.random.SeedSequence([int(master_seed), int(trial_id)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def trial_generator(master_seed: int, trial_id: int, stream: int) -> np.random.Generator:
    """
    计数器型随机数生成器，由 (master_seed, trial_id, stream) 唯一确定

    stream 0 生成设计矩阵，stream 1 生成噪声
    """
    seed_seq = np.random.SeedSequence([trial_seed(master_seed, trial_id), int(stream)])
    return np.random.Generator(np.random.Philox(seed_seq))


def draw_batch(problem: RegressionProblem, N: int, seed: int,
               distribution: Union[str, DesignDistribution] = DesignDistribution.GAUSSIAN,
               trial_id: int = 0) -> SampleBatch:
    """
    生成一批样本

    X_ij = √σ_j · z_ij，z 为标准正态或 ±1；噪声始终为高斯

    Args:
        problem: 回归问题
        N: 样本量
        seed: 主种子
        distribution: 'gaussian' | 'rademacher'
        trial_id: 试验编号

    Returns:
        SampleBatch
    """
    if N < 1:
        raise DimensionMismatchException(
            message=f"样本量要求 N ≥ 1，收到 N={N}",
            code="SAMPLE_INVALID_N",
            details={'N': N}
        )
    distribution = DesignDistribution(distribution)
    cfg = SystemConfig.get_simulation_config()
    design_rng = trial_generator(seed, trial_id, cfg['design_stream'])
    noise_rng = trial_generator(seed, trial_id, cfg['noise_stream'])

    p = problem.p
    if distribution == DesignDistribution.GAUSSIAN:
        z = design_rng.standard_normal((N, p))
    else:
        z = design_rng.integers(0, 2, size=(N, p)).astype(np.float64) * 2.0 - 1.0

    design = z * np.sqrt(problem.spectrum.eigenvalues)[None, :]
    noise = problem.noise_std * noise_rng.standard_normal(N)
    response = design @ problem.signal.coefficients + noise

    return SampleBatch(
        design=design,
        response=response,
        seed=int(seed),
        distribution=distribution,
        trial_id=int(trial_id),
    )


# ============================================================================
# 谱演算
# ============================================================================

def _eigh(matrix: np.ndarray, label: str):
    """对称特征分解；负的舍入特征值截断为 0"""
    try:
        eigvals, eigvecs = linalg.eigh(matrix)
    except (linalg.LinAlgError, ValueError) as e:
        finite = bool(np.all(np.isfinite(matrix)))
        raise EigensolverException(
            message=f"{label} 特征分解失败: {e}",
            code="EIGENSOLVER_FAILED",
            details={
                'shape': list(matrix.shape),
                'finite': finite,
                'condition_number': float(np.linalg.cond(matrix)) if finite else None,
            }
        )
    return np.clip(eigvals, 0.0, None), eigvecs


def residual_matrix(sigma_hat: np.ndarray, spec: FilterSpec, t: float) -> np.ndarray:
    """ψ_t(Σ̂) = V ψ_t(Λ) Vᵀ"""
    eigvals, eigvecs = _eigh((sigma_hat + sigma_hat.T) / 2, "Σ̂")
    weights = np.asarray(residual_eval(spec, t, eigvals))
    return (eigvecs * weights[None, :]) @ eigvecs.T


def fit_spectral(batch: SampleBatch, spec: FilterSpec, t: float,
                 route: Optional[str] = None) -> SpectralFit:
    """
    谱方法拟合

    N < p 时在 N×N 的 XXᵀ/N 上分解（dual），否则在 p×p 的 Σ̂ 上分解（primal）

    Args:
        batch: 样本
        spec: 滤波器
        t: 调节参数
        route: 强制指定 'primal' 或 'dual'

    Returns:
        SpectralFit
    """
    X, y = batch.design, batch.response
    N, p = X.shape
    route = route or ('dual' if N < p else 'primal')

    if route == 'primal':
        eigvals, eigvecs = _eigh(X.T @ X / N, "Σ̂")
        phi = np.asarray(filter_eval(spec, t, eigvals))
        beta_hat = eigvecs @ (phi * (eigvecs.T @ (X.T @ y / N)))
    elif route == 'dual':
        eigvals, eigvecs = _eigh(X @ X.T / N, "XXᵀ/N")
        phi = np.asarray(filter_eval(spec, t, eigvals))
        beta_hat = X.T @ (eigvecs @ (phi * (eigvecs.T @ y))) / N
    else:
        raise ValueError(f"未知的拟合路径: {route}")

    return SpectralFit(beta_hat=beta_hat, filter=spec, t=float(t), route=route)


def run_gradient_descent(batch: SampleBatch, eta: float, steps: int) -> np.ndarray:
    """
    显式梯度下降迭代（平方损失，从 0 出发）

    β ← β + η·Xᵀ(y − Xβ)/N，共 steps 次更新
    """
    X, y = batch.design, batch.response
    N = X.shape[0]
    beta = np.zeros(X.shape[1])
    for _ in range(int(steps)):
        beta = beta + eta * (X.T @ (y - X @ beta)) / N
    return beta


# ============================================================================
# 风险
# ============================================================================

def excess_risk(fit: SpectralFit, problem: RegressionProblem,
                b: Optional[float] = None) -> RiskDecomposition:
    """
    超额风险 Σ_j σ_j(β̂_j − β*_j)²，在 k*（由 fit.t 与 b 确定）处分解

    Args:
        fit: 拟合结果
        problem: 回归问题
        b: 估计维度常数，默认取 settings.default_b
    """
    if fit.beta_hat.shape != (problem.p,):
        raise DimensionMismatchException(
            message=f"β̂ 维度 {fit.beta_hat.shape} 与问题维度 {problem.p} 不一致",
            code="RISK_DIMENSION_MISMATCH",
            details={'beta_hat': list(fit.beta_hat.shape), 'p': problem.p}
        )
    b = settings.default_b if b is None else b
    k = estimation_dimension(problem.spectrum, fit.t, b).k_star
    weighted = problem.spectrum.eigenvalues * (fit.beta_hat - problem.signal.coefficients) ** 2
    head = float(np.sum(weighted[:k]))
    tail = float(np.sum(weighted[k:]))
    return RiskDecomposition(excess_risk=head + tail, risk_head=head, risk_tail=tail, k_star=k)
