"""
谱滤波器注册表
φ_t（滤波函数）与 ψ_t(x) = 1 − xφ_t(x)（残差函数），支持标量与数组输入

支持：
- gf      梯度流      φ_t(x) = (1 − e^{-tx})/x
- ridge   岭回归      φ_t(x) = 1/(x + t⁻¹)
- gd:η    梯度下降    φ_t(x) = (1 − (1 − ηx)^t)/x，t 为正整数
- pcr:b   主成分回归  φ_t(x) = x⁻¹·1{x ≥ b t⁻¹}
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .config_params import SystemConfig
from .exceptions import InvalidFilterException, InvalidTuningParameterException
from .models import FilterKind, FilterSpec, TuningParameter

ArrayLike = Union[float, Sequence[float], np.ndarray]
TLike = Union[float, int, TuningParameter]


# ============================================================================
# 构造与解析
# ============================================================================

def make_filter(kind: Union[str, FilterKind], eta: Optional[float] = None,
                b: Optional[float] = None) -> FilterSpec:
    """
    构造滤波器规格并填入夹逼常数

    夹逼常数 (c1, C1)：GF (1, 2)，Ridge (1, 1)，GD (η/2, 2)，PCR (0, (b+1)/b)

    Raises:
        InvalidFilterException: 名称未知、η ∉ (0, 1/8) 或 b ∉ (0, 1)
    """
    try:
        kind = FilterKind(kind) if isinstance(kind, str) else kind
    except ValueError:
        raise InvalidFilterException(
            message=f"未知滤波器: {kind}（可选 gf | ridge | gd:η | pcr:b）",
            code="FILTER_UNKNOWN",
            details={'name': kind}
        )

    domain = tuple(SystemConfig.FILTER_CONFIG['sandwich_domain'])

    if kind == FilterKind.GRADIENT_FLOW:
        return FilterSpec(kind, c1=1.0, C1=2.0, sandwich_domain=domain)
    if kind == FilterKind.RIDGE:
        return FilterSpec(kind, c1=1.0, C1=1.0, sandwich_domain=domain)
    if kind == FilterKind.GRADIENT_DESCENT:
        eta_max = SystemConfig.FILTER_CONFIG['gd_eta_max']
        if eta is None or not 0 < eta < eta_max:
            raise InvalidFilterException(
                message=f"梯度下降步长必须满足 0 < η < 1/8，收到 η={eta}",
                code="FILTER_INVALID_ETA",
                details={'eta': eta}
            )
        return FilterSpec(kind, c1=eta / 2, C1=2.0, eta=float(eta), sandwich_domain=domain)

    if b is None or not 0 < b < 1:
        raise InvalidFilterException(
            message=f"PCR 阈值常数必须满足 0 < b < 1，收到 b={b}",
            code="FILTER_INVALID_PCR_B",
            details={'b': b}
        )
    return FilterSpec(kind, c1=0.0, C1=(b + 1) / b, b=float(b), sandwich_domain=domain)


def parse_filter(name: str) -> FilterSpec:
    """
    解析 CLI 滤波器名称："gf" | "ridge" | "gd:η" | "pcr:b"

    Raises:
        InvalidFilterException: 名称或参数非法
    """
    text = name.strip().lower()
    head, sep, arg = text.partition(':')

    if head in ('gf', 'ridge'):
        if sep:
            raise InvalidFilterException(
                message=f"滤波器 {head} 不接受参数: {name}",
                code="FILTER_UNEXPECTED_ARGUMENT",
                details={'name': name}
            )
        return make_filter(head)

    if head in ('gd', 'pcr'):
        if not arg:
            raise InvalidFilterException(
                message=f"滤波器 {head} 需要参数，例如 {head}:0.1",
                code="FILTER_MISSING_ARGUMENT",
                details={'name': name}
            )
        try:
            value = float(arg)
        except ValueError:
            raise InvalidFilterException(
                message=f"无法解析滤波器参数: {name}",
                code="FILTER_INVALID_ARGUMENT",
                details={'name': name}
            )
        if head == 'gd':
            return make_filter(FilterKind.GRADIENT_DESCENT, eta=value)
        return make_filter(FilterKind.PCR, b=value)

    return make_filter(head)


def _resolve_t(spec: FilterSpec, t: TLike) -> float:
    """校验 t ≥ 1；GD 额外要求 t 为整数"""
    t_value = float(t.t) if isinstance(t, TuningParameter) else float(TuningParameter(float(t)).t)
    if spec.kind == FilterKind.GRADIENT_DESCENT and not t_value.is_integer():
        raise InvalidTuningParameterException(
            message=f"梯度下降要求整数步数 t，收到 t={t_value}",
            code="FILTER_GD_NON_INTEGER_T",
            details={'t': t_value}
        )
    return t_value


def _as_eigenvalues(x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InvalidFilterException(
            message="滤波器只在有限非负实数上求值",
            code="FILTER_NEGATIVE_ARGUMENT",
        )
    return arr


def _unwrap(result: np.ndarray, x: ArrayLike):
    """标量输入返回 Python float"""
    return float(result) if np.ndim(x) == 0 else result


# ============================================================================
# 求值
# ============================================================================

def filter_eval(spec: FilterSpec, t: TLike, x: ArrayLike):
    """
    计算 φ_t(x)

    Args:
        spec: 滤波器规格
        t: 调节参数 t ≥ 1（GD 要求整数）
        x: 非负特征值（标量或数组）

    Returns:
        与 x 同形状的 φ_t(x)
    """
    t_value = _resolve_t(spec, t)
    x_arr = _as_eigenvalues(x)

    with np.errstate(divide='ignore', invalid='ignore'):
        if spec.kind == FilterKind.GRADIENT_FLOW:
            tx = t_value * x_arr
            cutoff = SystemConfig.FILTER_CONFIG['gf_series_cutoff']
            # |tx| 很小时 (1 − e^{-tx})/x = t(1 − tx/2 + (tx)²/6 − …)
            series = t_value * (1.0 - tx / 2.0 + tx ** 2 / 6.0)
            closed = -np.expm1(-tx) / x_arr
            result = np.where(tx < cutoff, series, closed)

        elif spec.kind == FilterKind.RIDGE:
            result = 1.0 / (x_arr + 1.0 / t_value)

        elif spec.kind == FilterKind.GRADIENT_DESCENT:
            base = 1.0 - spec.eta * x_arr
            positive = base > 0
            # base > 0 时用 expm1/log1p 避免 x → 0 处的消去
            stable = -np.expm1(t_value * np.log1p(np.where(positive, -spec.eta * x_arr, 0.0))) / x_arr
            direct = (1.0 - np.power(base, t_value)) / x_arr
            result = np.where(positive, stable, direct)
            result = np.where(x_arr == 0, spec.eta * t_value, result)

        else:
            threshold = spec.b / t_value
            result = np.where(x_arr >= threshold, 1.0 / x_arr, 0.0)

    return _unwrap(result, x)


def residual_eval(spec: FilterSpec, t: TLike, x: ArrayLike):
    """
    计算 ψ_t(x) = 1 − xφ_t(x)

    GF: e^{-tx}；Ridge: 1/(xt+1)；GD: (1−ηx)^t；PCR: 1{x < b t⁻¹}
    """
    t_value = _resolve_t(spec, t)
    x_arr = _as_eigenvalues(x)

    if spec.kind == FilterKind.GRADIENT_FLOW:
        result = np.exp(-t_value * x_arr)
    elif spec.kind == FilterKind.RIDGE:
        result = 1.0 / (x_arr * t_value + 1.0)
    elif spec.kind == FilterKind.GRADIENT_DESCENT:
        result = np.power(1.0 - spec.eta * x_arr, t_value)
    else:
        result = (x_arr < spec.b / t_value).astype(np.float64)

    return _unwrap(result, x)


# ============================================================================
# 夹逼检查
# ============================================================================

@dataclass
class SandwichReport:
    """c1/(x+t⁻¹) ≤ φ_t(x) ≤ C1/(x+t⁻¹) 的检查结果"""
    max_violation: float
    max_lower_violation: float
    max_upper_violation: float
    c1: float
    C1: float
    lower_certified: bool

    def to_dict(self):
        return {
            'max_violation': self.max_violation,
            'max_lower_violation': self.max_lower_violation,
            'max_upper_violation': self.max_upper_violation,
            'c1': self.c1,
            'C1': self.C1,
            'lower_certified': self.lower_certified,
        }


def default_sandwich_grid(points: Optional[int] = None) -> np.ndarray:
    """[0, 8] 上的均匀网格"""
    cfg = SystemConfig.get_filter_config()
    lo, hi = cfg['sandwich_domain']
    return np.linspace(lo, hi, points or cfg['sandwich_grid_points'])


def sandwich_check(spec: FilterSpec, t: TLike, grid: Optional[ArrayLike] = None) -> SandwichReport:
    """
    在网格上检查夹逼不等式，返回最大违反量

    PCR 只认证上界（c1 = 0 时下界平凡成立）

    Raises:
        InvalidFilterException: 网格为空或越出 [0, 8]
    """
    points = default_sandwich_grid() if grid is None else np.atleast_1d(np.asarray(grid, dtype=np.float64))
    lo, hi = spec.sandwich_domain
    if points.size == 0 or np.any(points < lo) or np.any(points > hi):
        raise InvalidFilterException(
            message=f"夹逼网格必须非空且位于 [{lo}, {hi}] 内",
            code="FILTER_INVALID_GRID",
            details={'size': int(points.size)}
        )

    t_value = _resolve_t(spec, t)
    phi = np.asarray(filter_eval(spec, t_value, points))
    denominator = points + 1.0 / t_value

    lower_violation = float(np.max(np.maximum(spec.c1 / denominator - phi, 0.0)))
    upper_violation = float(np.max(np.maximum(phi - spec.C1 / denominator, 0.0)))

    return SandwichReport(
        max_violation=max(lower_violation, upper_violation),
        max_lower_violation=lower_violation,
        max_upper_violation=upper_violation,
        c1=spec.c1,
        C1=spec.C1,
        lower_certified=spec.lower_certified,
    )
