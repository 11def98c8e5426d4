"""
单指标模型的样本壁垒

多平台谱上，信号只落在第 IE 层。k*(t) 没有覆盖这一层时不发生学习
（尾部对齐项等于零估计量的风险）；覆盖整层时头部方差为 σ_ξ√(k*/N)。
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from src.core.exceptions import InvalidGridException, InvalidSignalException
from src.core.fsd_core import rate_breakdown, resolve_box
from src.core.filters import make_filter
from src.core.models import FilterKind
from src.core.spectra import make_multiplateau_spectrum, make_problem, make_shell_signal

logger = logging.getLogger(__name__)

NO_LEARNING = "no_learning"
LEARNING = "learning"
INTERMEDIATE = "intermediate"

# 对齐项与零估计量风险的比较容差
_EQUALITY_TOL = 1e-12


@dataclass
class BarrierEntry:
    """单个 t 的分类结果"""
    t: float
    k_star: int
    regime: str
    align_tail: float
    var_head: float

    def to_dict(self) -> Dict:
        return {
            't': self.t,
            'k_star': self.k_star,
            'regime': self.regime,
            'align_tail': self.align_tail,
            'var_head': self.var_head,
        }


@dataclass
class BarrierReport:
    """单指标壁垒报告"""
    boundaries: List[int]
    information_exponent: int
    null_risk: float
    entries: List[BarrierEntry]
    inconsistencies: List[str] = field(default_factory=list)

    @property
    def no_learning_ts(self) -> List[float]:
        return [e.t for e in self.entries if e.regime == NO_LEARNING]

    @property
    def learning_ts(self) -> List[float]:
        return [e.t for e in self.entries if e.regime == LEARNING]

    @property
    def kernel_rate_at_learning(self) -> Dict[float, float]:
        return {e.t: e.var_head for e in self.entries if e.regime == LEARNING}

    def to_dict(self) -> Dict:
        return {
            'boundaries': self.boundaries,
            'information_exponent': self.information_exponent,
            'null_risk': self.null_risk,
            'no_learning_ts': self.no_learning_ts,
            'learning_ts': self.learning_ts,
            'kernel_rate_at_learning': [
                {'t': t, 'var_head': v} for t, v in self.kernel_rate_at_learning.items()
            ],
            'entries': [e.to_dict() for e in self.entries],
            'inconsistencies': self.inconsistencies,
        }


def classify_regime(k_star: int, boundaries: Sequence[int], information_exponent: int) -> str:
    """
    k* ≤ M_{IE−1}：支撑集完全在 J* 之外，不学习
    k* ≥ M_IE：  支撑集完全在 J* 之内，学习
    """
    if k_star <= boundaries[information_exponent - 1]:
        return NO_LEARNING
    if k_star >= boundaries[information_exponent]:
        return LEARNING
    return INTERMEDIATE


def single_index_barrier(d: int, L: int, information_exponent: int, magnitude: float,
                         noise_std: float, N: int, b: float, box: Optional[float],
                         t_grid: Sequence[float]) -> BarrierReport:
    """
    单指标壁垒实验

    Args:
        d, L: 多平台谱参数
        information_exponent: 信号所在层 IE（1 ≤ IE ≤ L）
        magnitude: 信号幅度
        noise_std: σ_ξ
        N: 样本量
        b: 估计维度常数
        box: □，为空时使用默认规则
        t_grid: t 网格

    Raises:
        InvalidSignalException: IE > L
        InvalidGridException: t 网格为空
    """
    if not 1 <= information_exponent <= L:
        raise InvalidSignalException(
            message=f"信息指数要求 1 ≤ IE ≤ L={L}，收到 IE={information_exponent}",
            code="BARRIER_INVALID_IE",
            details={'IE': information_exponent, 'L': L}
        )
    if not t_grid:
        raise InvalidGridException(
            message="t 网格不能为空",
            code="BARRIER_EMPTY_GRID",
        )

    spectrum = make_multiplateau_spectrum(d, L)
    boundaries = spectrum.family_tag.params['boundaries']
    problem = make_problem(spectrum, make_shell_signal(spectrum, information_exponent, magnitude), noise_std)
    null_risk = problem.signal_energy()
    # 核方法的壁垒不依赖具体滤波器，头部偏差之外各项相同
    spec = make_filter(FilterKind.RIDGE)

    report = BarrierReport(
        boundaries=boundaries,
        information_exponent=information_exponent,
        null_risk=null_risk,
        entries=[],
    )
    for t in t_grid:
        t = float(t)
        rate = rate_breakdown(problem, spec, t, b, N, resolve_box(t, box))
        regime = classify_regime(rate.k_star, boundaries, information_exponent)
        entry = BarrierEntry(t=t, k_star=rate.k_star, regime=regime,
                             align_tail=rate.align_tail, var_head=rate.var_head)
        report.entries.append(entry)

        if regime == NO_LEARNING and not math.isclose(rate.align_tail, null_risk,
                                                      rel_tol=_EQUALITY_TOL, abs_tol=_EQUALITY_TOL):
            report.inconsistencies.append(f"t={t}: align_tail {rate.align_tail} 与零估计风险 {null_risk} 不一致")
        if regime == LEARNING and rate.align_tail > _EQUALITY_TOL:
            report.inconsistencies.append(f"t={t}: 学习区间内 align_tail {rate.align_tail} > 0")

    if report.inconsistencies:
        logger.warning("壁垒检查不一致: %s", report.inconsistencies)
    return report
