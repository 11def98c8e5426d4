"""
核心数据模型
定义系统中所有的数据结构（谱、信号、滤波器、速率分解、试验结果）

约定：Σ 的特征基取标准基，所有向量都以特征基坐标表示。
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .exceptions import (
    DimensionMismatchException,
    InvalidSignalException,
    InvalidSpectrumException,
    InvalidTuningParameterException,
)


def _frozen_array(values) -> np.ndarray:
    """复制为只读的 float64 数组"""
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


# ============================================================================
# 谱与信号
# ============================================================================

class SpectrumFamily(Enum):
    """谱族"""
    EXPLICIT = "explicit"
    POWER = "power"
    PLATEAU = "plateau"
    MULTIPLATEAU = "multiplateau"


@dataclass(frozen=True)
class FamilyTag:
    """
    谱族描述符

    params 示例：
        power:        {'alpha': 2.0}
        plateau:      {'k': 2, 'sigma': 1.0, 'eps': 0.1}
        multiplateau: {'d': 4, 'L': 2, 'boundaries': [1, 5, 15]}
    """
    family: SpectrumFamily
    params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {'name': self.family.value, **self.params}

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> 'FamilyTag':
        if not data:
            return cls(SpectrumFamily.EXPLICIT)
        data = dict(data)
        name = data.pop('name', 'explicit')
        return cls(SpectrumFamily(name), data)


@dataclass(frozen=True, eq=False)
class SpectrumModel:
    """
    协方差谱 σ_1 ≥ … ≥ σ_p ≥ 0

    不变量：
        - 非增、非负
        - σ_1 ≤ 1（‖Σ‖_op ≤ 1）
    """
    eigenvalues: np.ndarray
    family_tag: FamilyTag = field(default_factory=lambda: FamilyTag(SpectrumFamily.EXPLICIT))

    def __post_init__(self):
        values = _frozen_array(self.eigenvalues)
        if values.ndim != 1 or values.size == 0:
            raise InvalidSpectrumException(
                message="谱必须是非空一维序列",
                code="SPECTRUM_EMPTY",
                details={'shape': list(values.shape)}
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidSpectrumException(
                message="特征值必须是有限非负实数",
                code="SPECTRUM_NEGATIVE",
                details={'min': float(np.min(values))}
            )
        if np.any(np.diff(values) > 0):
            raise InvalidSpectrumException(
                message="特征值必须非增排列",
                code="SPECTRUM_NOT_SORTED",
            )
        if values[0] > 1.0:
            raise InvalidSpectrumException(
                message=f"σ_1 = {values[0]} 超过 1（要求 ‖Σ‖_op ≤ 1）",
                code="SPECTRUM_OPNORM",
                details={'sigma_1': float(values[0])}
            )
        object.__setattr__(self, 'eigenvalues', values)

    @property
    def p(self) -> int:
        """环境维度"""
        return int(self.eigenvalues.size)

    def sigma(self, j: int) -> float:
        """σ_j（1起始），约定 σ_{p+1} = 0"""
        if j > self.p:
            return 0.0
        return float(self.eigenvalues[j - 1])

    def to_dict(self) -> Dict:
        return {
            'eigenvalues': self.eigenvalues.tolist(),
            'family': self.family_tag.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class SignalModel:
    """β* 在特征基下的系数 ⟨β*, e_j⟩"""
    coefficients: np.ndarray
    norm_cache: Optional[float] = None  # ‖Σ^{1/2}β*‖₂

    def __post_init__(self):
        coeffs = _frozen_array(self.coefficients)
        if coeffs.ndim != 1 or not np.all(np.isfinite(coeffs)):
            raise InvalidSignalException(
                message="信号系数必须是有限实数的一维序列",
                code="SIGNAL_INVALID",
            )
        object.__setattr__(self, 'coefficients', coeffs)

    @property
    def p(self) -> int:
        return int(self.coefficients.size)


@dataclass(frozen=True, eq=False)
class RegressionProblem:
    """
    线性回归问题三元组 R = (Σ, β*, σ_ξ)
    """
    spectrum: SpectrumModel
    signal: SignalModel
    noise_std: float = 1.0

    def __post_init__(self):
        if self.spectrum.p != self.signal.p:
            raise DimensionMismatchException(
                message=f"谱维度 {self.spectrum.p} 与信号维度 {self.signal.p} 不一致",
                code="PROBLEM_DIMENSION_MISMATCH",
                details={'spectrum_p': self.spectrum.p, 'signal_p': self.signal.p}
            )
        if not np.isfinite(self.noise_std) or self.noise_std < 0:
            raise InvalidSignalException(
                message=f"噪声标准差必须是有限非负数，收到 {self.noise_std}",
                code="PROBLEM_INVALID_NOISE",
            )

    @property
    def p(self) -> int:
        return self.spectrum.p

    def signal_energy(self) -> float:
        """‖Σ^{1/2}β*‖₂（零估计量的风险平方根）"""
        if self.signal.norm_cache is not None:
            return self.signal.norm_cache
        sigma = self.spectrum.eigenvalues
        beta = self.signal.coefficients
        return float(np.sqrt(np.sum(sigma * beta ** 2)))

    def to_dict(self) -> Dict:
        """序列化为CLI使用的JSON文档"""
        return {
            'eigenvalues': self.spectrum.eigenvalues.tolist(),
            'coefficients': self.signal.coefficients.tolist(),
            'noise_std': float(self.noise_std),
            'family': self.spectrum.family_tag.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'RegressionProblem':
        spectrum = SpectrumModel(
            np.asarray(data['eigenvalues'], dtype=np.float64),
            FamilyTag.from_dict(data.get('family'))
        )
        signal = SignalModel(np.asarray(data['coefficients'], dtype=np.float64))
        return cls(spectrum, signal, float(data.get('noise_std', 1.0)))


# ============================================================================
# 滤波器
# ============================================================================

class FilterKind(Enum):
    """滤波器族"""
    GRADIENT_FLOW = "gf"
    RIDGE = "ridge"
    GRADIENT_DESCENT = "gd"
    PCR = "pcr"


@dataclass(frozen=True)
class FilterSpec:
    """
    滤波器 φ_t 及其夹逼常数

    c1/(x+t⁻¹) ≤ φ_t(x) ≤ C1/(x+t⁻¹)，x ∈ sandwich_domain
    """
    kind: FilterKind
    c1: float
    C1: float
    eta: Optional[float] = None   # 仅 GD
    b: Optional[float] = None     # 仅 PCR
    sandwich_domain: Tuple[float, float] = (0.0, 8.0)

    @property
    def name(self) -> str:
        """CLI 名称：gf | ridge | gd:η | pcr:b"""
        if self.kind == FilterKind.GRADIENT_DESCENT:
            return f"gd:{self.eta!r}"
        if self.kind == FilterKind.PCR:
            return f"pcr:{self.b!r}"
        return self.kind.value

    @property
    def lower_certified(self) -> bool:
        """下界是否被认证（PCR 只认证上界）"""
        return self.c1 > 0


@dataclass(frozen=True)
class TuningParameter:
    """调节参数 t ≥ 1"""
    t: float

    def __post_init__(self):
        if not np.isfinite(self.t) or self.t < 1:
            raise InvalidTuningParameterException(
                message=f"调节参数必须满足 t ≥ 1，收到 {self.t}",
                code="TUNING_T_BELOW_ONE",
                details={'t': self.t}
            )

    @property
    def inverse(self) -> float:
        return 1.0 / self.t


# ============================================================================
# FSD 量
# ============================================================================

@dataclass(frozen=True)
class EstimationDimension:
    """
    估计维度 k* = min{k ∈ [p] : σ_{k+1} ≤ b t⁻¹}

    degenerate=True 表示 σ_1 ≤ b t⁻¹（k* 被强制为 1）
    """
    k_star: int
    threshold: float
    b: float
    t: float
    degenerate: bool = False

    def to_dict(self) -> Dict:
        return {
            'k_star': self.k_star,
            'threshold': self.threshold,
            'b': self.b,
            't': self.t,
            'degenerate': self.degenerate,
        }


@dataclass(frozen=True)
class EffectiveRankBracket:
    """
    有效秩的上下界

    degenerate=True（σ_1 ≤ b t⁻¹）时下界不适用，上界照常成立
    """
    lower: float
    upper: float
    degenerate: bool = False

    @property
    def lower_applicable(self) -> bool:
        return not self.degenerate

    def contains(self, value: float, rtol: float = 1e-12) -> bool:
        """value 位于适用的界之内"""
        above = not self.lower_applicable or value >= self.lower * (1 - rtol)
        return above and value <= self.upper * (1 + rtol)

    def to_dict(self) -> Dict:
        return {
            'lower': self.lower,
            'upper': self.upper,
            'lower_applicable': self.lower_applicable,
        }


@dataclass(frozen=True)
class RateBreakdown:
    """
    速率 r(V_J*, V_J*^c) 的四项加上松弛项

    total = bias_head + var_head + align_tail + var_tail
    """
    bias_head: float
    var_head: float
    align_tail: float
    var_tail: float
    slack: float
    k_star: int
    t: float

    @property
    def total(self) -> float:
        return self.bias_head + self.var_head + self.align_tail + self.var_tail

    def to_dict(self) -> Dict:
        return {
            'bias_head': self.bias_head,
            'var_head': self.var_head,
            'align_tail': self.align_tail,
            'var_tail': self.var_tail,
            'slack': self.slack,
            'total': self.total,
        }


@dataclass(frozen=True)
class OmegaStatistic:
    """Ω_t 统计量 ‖Σ_t^{-1/2}(Σ̂−Σ)Σ_t^{-1/2}‖_op 及判定"""
    value: float
    box: float
    holds: bool


@dataclass
class BoundCheck:
    """单个不等式检查"""
    name: str
    measured: float
    bound: float
    holds: bool
    applicable: bool = True


@dataclass
class NormBoundsReport:
    """确定性范数界的测量结果"""
    checks: List[BoundCheck]
    degenerate: bool

    @property
    def violations(self) -> List[str]:
        return [c.name for c in self.checks if c.applicable and not c.holds]


@dataclass
class PreconditionCheck:
    """定理前提条件账本中的一项"""
    name: str
    holds: bool
    detail: str = ""

    def to_dict(self) -> Dict:
        return {'name': self.name, 'holds': self.holds, 'detail': self.detail}


# ============================================================================
# 模拟
# ============================================================================

class DesignDistribution(Enum):
    """设计矩阵的坐标分布"""
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """一批样本 y = Xβ* + ξ"""
    design: np.ndarray
    response: np.ndarray
    seed: int
    distribution: DesignDistribution
    trial_id: int = 0

    @property
    def n_samples(self) -> int:
        return int(self.design.shape[0])

    def sample_covariance(self) -> np.ndarray:
        """Σ̂ = XᵀX / N"""
        return self.design.T @ self.design / self.n_samples


@dataclass(frozen=True, eq=False)
class SpectralFit:
    """谱方法拟合结果"""
    beta_hat: np.ndarray
    filter: FilterSpec
    t: float
    route: str  # 'primal' | 'dual'


@dataclass(frozen=True)
class RiskDecomposition:
    """超额风险在 J*/J*^c 上的正交分解"""
    excess_risk: float
    risk_head: float
    risk_tail: float
    k_star: int


@dataclass(frozen=True)
class TrialResult:
    """一次 Monte Carlo 重复"""
    trial_id: int
    seed: int  # trial_seed(master_seed, trial_id)
    excess_risk: float
    risk_head: float
    risk_tail: float
    omega_holds: Optional[bool] = None
    omega_value: Optional[float] = None
    route: str = ""

    def to_row(self) -> Dict:
        return {
            'trial_id': self.trial_id,
            'excess_risk': self.excess_risk,
            'risk_head': self.risk_head,
            'risk_tail': self.risk_tail,
            'omega_holds': self.omega_holds,
        }


@dataclass
class MonteCarloSummary:
    """Monte Carlo 汇总（按 trial_id 排序）"""
    median: float
    q10: float
    q90: float
    omega_frequency: Optional[float]
    per_trial: List[TrialResult]

    def to_dict(self) -> Dict:
        return {
            'median': self.median,
            'q10': self.q10,
            'q90': self.q90,
            'omega_frequency': self.omega_frequency,
            'trials': len(self.per_trial),
        }


# ============================================================================
# 实验
# ============================================================================

@dataclass
class SweepResult:
    """t 网格上的速率扫描"""
    t_grid: List[float]
    rates: List[RateBreakdown]
    argmin_t: float
    min_rate: float

    def rate_at(self, t: float) -> RateBreakdown:
        return self.rates[self.t_grid.index(t)]


@dataclass(frozen=True)
class PlateauScenario:
    """
    平台协方差模型场景

    σ_1 = … = σ_k = sigma，σ_{k+1} = … = σ_p = eps，
    β* 在前 k 个坐标上等于 alpha_star，其余为 0
    """
    k: int
    sigma: float
    eps: float
    p: int
    alpha_star: float
    noise_std: float
    N: int

    @property
    def snr(self) -> float:
        """SNR = (‖Σ^{1/2}β*‖₂/σ_ξ) · σ√N / √Tr(Σ_{J^c}²)"""
        if self.noise_std == 0:
            return math.inf
        signal_norm = self.alpha_star * np.sqrt(self.k * self.sigma)
        tail = np.sqrt((self.p - self.k) * self.eps ** 2)
        return float(signal_norm / self.noise_std * self.sigma * np.sqrt(self.N) / tail)

    @property
    def r_value(self) -> float:
        """R = (α_*/σ_ξ)(σ^{3/2}/ε)√(kN/(p−k))，与 SNR 代数相等"""
        if self.noise_std == 0:
            return math.inf
        return float(
            self.alpha_star / self.noise_std
            * self.sigma ** 1.5 / self.eps
            * np.sqrt(self.k * self.N / (self.p - self.k))
        )

    def interval(self, b: float) -> Tuple[float, float]:
        """区间 I 在 t 上的端点：t ∈ (1/σ, b/ε]，并截断到 t ≥ 1"""
        return max(1.0, 1.0 / self.sigma), b / self.eps

    def hypothesis_holds(self, b: float) -> bool:
        """4 < SNR ≤ bσ/ε；无噪声时 SNR = ∞，不满足"""
        return 4.0 < self.snr <= b * self.sigma / self.eps

    @classmethod
    def from_dict(cls, data: Dict) -> 'PlateauScenario':
        return cls(
            k=int(data['k']),
            sigma=float(data['sigma']),
            eps=float(data['eps']),
            p=int(data['p']),
            alpha_star=float(data['alpha_star']),
            noise_std=float(data['noise_std']),
            N=int(data['N']),
        )


@dataclass
class ExponentFit:
    """log-log 斜率拟合"""
    N_grid: List[int]
    values: List[float]
    fitted_slope: float
    target_exponent: float
    t_values: List[float] = field(default_factory=list)
    monte_carlo_medians: Optional[List[float]] = None
    monte_carlo_slope: Optional[float] = None

    @property
    def slope_error(self) -> float:
        return abs(self.fitted_slope - self.target_exponent)
