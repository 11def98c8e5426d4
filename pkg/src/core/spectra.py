"""
谱与信号构造器
为每一类回归问题构造协方差谱与目标系数（特征基取标准基）

包含：
- 幂律谱 σ_j = j^{-α}
- 平台谱（前 k 个为 σ，其余为 ε）
- 多平台谱（第 ℓ 层为 d^{-ℓ}，层大小为 C(d+ℓ-1, ℓ)）
- Sobolev 源条件信号、壳层信号、平台头部信号
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.special import comb

from config import settings
from .config_params import SystemConfig
from .exceptions import (
    InvalidSignalException,
    InvalidSpectrumException,
)
from .models import (
    FamilyTag,
    RegressionProblem,
    SignalModel,
    SpectrumFamily,
    SpectrumModel,
)

logger = logging.getLogger(__name__)


# ============================================================================
# 谱
# ============================================================================

def make_power_spectrum(alpha: float, p: int) -> SpectrumModel:
    """
    幂律谱 σ_j = j^{-α}

    Args:
        alpha: 衰减指数 α > 1
        p: 维度

    Returns:
        SpectrumModel，σ_1 = 1

    Raises:
        InvalidSpectrumException: α ≤ 1 或 p < 1
    """
    if not alpha > 1:
        raise InvalidSpectrumException(
            message=f"幂律谱要求 α > 1，收到 α={alpha}",
            code="SPECTRUM_INVALID_ALPHA",
            details={'alpha': alpha}
        )
    if p < 1:
        raise InvalidSpectrumException(
            message=f"维度必须为正整数，收到 p={p}",
            code="SPECTRUM_INVALID_DIMENSION",
            details={'p': p}
        )
    j = np.arange(1, p + 1, dtype=np.float64)
    return SpectrumModel(
        j ** (-float(alpha)),
        FamilyTag(SpectrumFamily.POWER, {'alpha': float(alpha)})
    )


def make_plateau_spectrum(k: int, sigma: float, eps: float, p: int) -> SpectrumModel:
    """
    平台谱：σ_1 = … = σ_k = sigma，σ_{k+1} = … = σ_p = eps

    Raises:
        InvalidSpectrumException: 不满足 0 < ε < σ ≤ 1 或 1 ≤ k < p
    """
    if not 0 < eps < sigma <= 1:
        raise InvalidSpectrumException(
            message=f"平台谱要求 0 < ε < σ ≤ 1，收到 σ={sigma}, ε={eps}",
            code="SPECTRUM_INVALID_PLATEAU",
            details={'sigma': sigma, 'eps': eps}
        )
    if not 1 <= k < p:
        raise InvalidSpectrumException(
            message=f"平台谱要求 1 ≤ k < p，收到 k={k}, p={p}",
            code="SPECTRUM_INVALID_PLATEAU",
            details={'k': k, 'p': p}
        )
    values = np.full(p, float(eps))
    values[:k] = float(sigma)
    return SpectrumModel(
        values,
        FamilyTag(SpectrumFamily.PLATEAU, {'k': int(k), 'sigma': float(sigma), 'eps': float(eps)})
    )


def shell_boundaries(d: int, L: int) -> List[int]:
    """
    多平台壳层边界 M_ℓ = Σ_{r=0}^{ℓ} C(d+r-1, r)，ℓ = 0..L

    Returns:
        [M_0, M_1, ..., M_L]
    """
    boundaries = []
    total = 0
    for r in range(L + 1):
        total += int(comb(d + r - 1, r, exact=True))
        boundaries.append(total)
    return boundaries


def make_multiplateau_spectrum(d: int, L: int,
                               max_dimension: Optional[int] = None) -> SpectrumModel:
    """
    多平台谱：σ_j = d^{-ℓ}，M_{ℓ-1} < j ≤ M_ℓ

    Args:
        d: 输入维度 d ≥ 2
        L: 层数 L ≥ 1
        max_dimension: 允许的最大 p，默认取 settings.max_dimension

    Returns:
        SpectrumModel，family_tag.params['boundaries'] 记录 [M_0..M_L]

    Raises:
        InvalidSpectrumException: 参数越界或 M_L 超过最大维度
    """
    if d < 2 or L < 1:
        raise InvalidSpectrumException(
            message=f"多平台谱要求 d ≥ 2 且 L ≥ 1，收到 d={d}, L={L}",
            code="SPECTRUM_INVALID_MULTIPLATEAU",
            details={'d': d, 'L': L}
        )
    cap = settings.max_dimension if max_dimension is None else max_dimension
    boundaries = shell_boundaries(d, L)
    if boundaries[-1] > cap:
        raise InvalidSpectrumException(
            message=f"多平台谱维度 M_L={boundaries[-1]} 超过上限 {cap}",
            code="SPECTRUM_DIMENSION_OVERFLOW",
            details={'d': d, 'L': L, 'M_L': boundaries[-1], 'max_dimension': cap}
        )

    values = np.empty(boundaries[-1])
    lower = 0
    for level, upper in enumerate(boundaries):
        values[lower:upper] = float(d) ** (-level)
        lower = upper

    logger.debug("多平台谱 d=%d L=%d p=%d", d, L, boundaries[-1])
    return SpectrumModel(
        values,
        FamilyTag(SpectrumFamily.MULTIPLATEAU, {'d': int(d), 'L': int(L), 'boundaries': boundaries})
    )


def make_explicit_spectrum(eigenvalues: Sequence[float]) -> SpectrumModel:
    """显式给定的谱（按原样校验，不做排序）"""
    return SpectrumModel(np.asarray(eigenvalues, dtype=np.float64))


# ============================================================================
# 信号
# ============================================================================

def make_sobolev_signal(spectrum: SpectrumModel, s: float,
                        delta: Optional[float] = None) -> SignalModel:
    """
    Sobolev 源条件信号

    ⟨β*, e_j⟩ = j^{-α(s-1)/2 - 1/2 - δ}，即 β* = Σ^{(s-1)/2} w，w_j = j^{-1/2-δ}

    Args:
        spectrum: 幂律谱
        s: 光滑度 s ≥ 1
        delta: 边界偏移 δ > 0，默认 settings.sobolev_delta

    Raises:
        InvalidSpectrumException: 谱不是幂律族
        InvalidSignalException: s < 1 或 δ ≤ 0
    """
    if spectrum.family_tag.family != SpectrumFamily.POWER:
        raise InvalidSpectrumException(
            message="Sobolev 信号只能在幂律谱上构造",
            code="SIGNAL_REQUIRES_POWER_SPECTRUM",
            details={'family': spectrum.family_tag.family.value}
        )
    if s < 1:
        raise InvalidSignalException(
            message=f"光滑度要求 s ≥ 1，收到 s={s}",
            code="SIGNAL_INVALID_SMOOTHNESS",
            details={'s': s}
        )
    delta = settings.sobolev_delta if delta is None else delta
    if delta <= 0:
        raise InvalidSignalException(
            message=f"边界偏移要求 δ > 0，收到 δ={delta}",
            code="SIGNAL_INVALID_DELTA",
            details={'delta': delta}
        )

    alpha = spectrum.family_tag.params['alpha']
    j = np.arange(1, spectrum.p + 1, dtype=np.float64)
    coefficients = j ** (-alpha * (s - 1) / 2 - 0.5 - delta)
    norm = float(np.sqrt(np.sum(spectrum.eigenvalues * coefficients ** 2)))
    return SignalModel(coefficients, norm_cache=norm)


def source_norm(spectrum: SpectrumModel, signal: SignalModel, s: float) -> float:
    """
    源范数 ‖Σ^{(1-s)/2}β*‖₂

    要求所有 σ_j > 0（s > 1 时需要对 σ 取负幂）
    """
    sigma = spectrum.eigenvalues
    if s > 1 and np.any(sigma == 0):
        raise InvalidSpectrumException(
            message="源范数要求谱严格为正",
            code="SPECTRUM_ZERO_EIGENVALUE",
        )
    weights = sigma ** ((1 - s) / 2)
    return float(np.sqrt(np.sum((weights * signal.coefficients) ** 2)))


def make_shell_signal(spectrum: SpectrumModel, shell: int, magnitude: float) -> SignalModel:
    """
    壳层信号：在 M_{ℓ0-1} < j ≤ M_{ℓ0} 上等于 magnitude，其余为 0

    Raises:
        InvalidSpectrumException: 谱不是多平台族
        InvalidSignalException: ℓ0 不在 [1, L]
    """
    if spectrum.family_tag.family != SpectrumFamily.MULTIPLATEAU:
        raise InvalidSpectrumException(
            message="壳层信号只能在多平台谱上构造",
            code="SIGNAL_REQUIRES_MULTIPLATEAU",
            details={'family': spectrum.family_tag.family.value}
        )
    boundaries = spectrum.family_tag.params['boundaries']
    L = len(boundaries) - 1
    if not 1 <= shell <= L:
        raise InvalidSignalException(
            message=f"壳层编号要求 1 ≤ ℓ0 ≤ {L}，收到 {shell}",
            code="SIGNAL_INVALID_SHELL",
            details={'shell': shell, 'L': L}
        )
    coefficients = np.zeros(spectrum.p)
    coefficients[boundaries[shell - 1]:boundaries[shell]] = float(magnitude)
    return SignalModel(coefficients)


def make_head_signal(spectrum: SpectrumModel, k: int, magnitude: float) -> SignalModel:
    """
    头部对齐信号：前 k 个系数等于 magnitude，其余为 0

    平台模型中 β* 与平台头部对齐时使用
    """
    if not 1 <= k <= spectrum.p:
        raise InvalidSignalException(
            message=f"头部长度要求 1 ≤ k ≤ p，收到 k={k}",
            code="SIGNAL_INVALID_HEAD",
            details={'k': k, 'p': spectrum.p}
        )
    coefficients = np.zeros(spectrum.p)
    coefficients[:k] = float(magnitude)
    return SignalModel(coefficients)


def make_explicit_signal(coefficients: Sequence[float]) -> SignalModel:
    """显式给定的信号系数"""
    return SignalModel(np.asarray(coefficients, dtype=np.float64))


# ============================================================================
# 回归问题
# ============================================================================

def make_problem(spectrum: SpectrumModel, signal: SignalModel,
                 noise_std: float = 1.0) -> RegressionProblem:
    """组装 (Σ, β*, σ_ξ)"""
    return RegressionProblem(spectrum, signal, float(noise_std))


def make_plateau_problem(k: int, sigma: float, eps: float, p: int,
                         alpha_star: float, noise_std: float) -> RegressionProblem:
    """平台谱 + 头部对齐信号"""
    spectrum = make_plateau_spectrum(k, sigma, eps, p)
    return make_problem(spectrum, make_head_signal(spectrum, k, alpha_star), noise_std)


def make_sobolev_problem(alpha: float, s: float, p: int, noise_std: float = 1.0,
                         delta: Optional[float] = None) -> RegressionProblem:
    """幂律谱 + Sobolev 信号"""
    spectrum = make_power_spectrum(alpha, p)
    return make_problem(spectrum, make_sobolev_signal(spectrum, s, delta), noise_std)


def sobolev_truncation_dimension(N: int) -> int:
    """无限维 Sobolev 问题的截断维度 p = max(32·N, 4096)"""
    cfg = SystemConfig.get_simulation_config()
    return max(cfg['sobolev_truncation_factor'] * int(N), cfg['sobolev_truncation_floor'])


# ============================================================================
# JSON 文档
# ============================================================================

def save_problem(problem: RegressionProblem, path: Union[str, Path]) -> None:
    """写出问题 JSON 文档"""
    Path(path).write_text(json.dumps(problem.to_dict(), ensure_ascii=False), encoding='utf-8')


def load_problem(path: Union[str, Path]) -> RegressionProblem:
    """读取问题 JSON 文档"""
    data = json.loads(Path(path).read_text(encoding='utf-8'))
    return RegressionProblem.from_dict(data)
