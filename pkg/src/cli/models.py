"""
实验配置与运行报告模型
定义 JSON 配置文档的结构；未知键一律拒绝
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config import settings
from src.core.config_params import SystemConfig
from src.core.exceptions import ConfigParseException, ConfigValidationException, FSDException
from src.core.filters import parse_filter
from src.core.models import FilterKind, RegressionProblem
from src.core.spectra import (
    load_problem,
    make_explicit_signal,
    make_explicit_spectrum,
    make_head_signal,
    make_multiplateau_spectrum,
    make_plateau_spectrum,
    make_power_spectrum,
    make_problem,
    make_shell_signal,
    make_sobolev_signal,
)


class StrictModel(BaseModel):
    """拒绝未知键的基类"""
    model_config = ConfigDict(extra="forbid")


# ==================== 子配置 ====================

class ProblemSpec(StrictModel):
    """
    回归问题描述：file 引用 JSON 问题文档，或内联给出谱族与信号
    """
    file: Optional[str] = Field(None, description="问题 JSON 文档路径")
    family: Optional[Literal['explicit', 'power', 'plateau', 'multiplateau']] = Field(
        None, description="谱族")

    # 谱参数
    eigenvalues: Optional[List[float]] = Field(None, description="显式谱")
    alpha: Optional[float] = Field(None, description="幂律指数 α")
    p: Optional[int] = Field(None, description="维度")
    k: Optional[int] = Field(None, description="平台长度")
    sigma: Optional[float] = Field(None, description="平台高度")
    eps: Optional[float] = Field(None, description="平台尾部 ε")
    d: Optional[int] = Field(None, description="多平台输入维度")
    L: Optional[int] = Field(None, description="多平台层数")

    # 信号参数
    signal: Optional[Literal['head', 'sobolev', 'shell', 'explicit', 'zero']] = Field(
        None, description="信号类型（默认随谱族）")
    alpha_star: Optional[float] = Field(None, description="头部信号幅度 α_*")
    s: Optional[float] = Field(None, description="Sobolev 光滑度")
    delta: Optional[float] = Field(None, description="Sobolev 边界偏移 δ")
    shell: Optional[int] = Field(None, description="壳层编号")
    magnitude: Optional[float] = Field(None, description="壳层信号幅度")
    coefficients: Optional[List[float]] = Field(None, description="显式信号系数")

    noise_std: float = Field(1.0, ge=0, description="噪声标准差 σ_ξ")

    @model_validator(mode='after')
    def check_problem(self) -> 'ProblemSpec':
        if self.file is None and self.family is None:
            raise ValueError("problem 需要 'file' 或 'family' 之一")
        if self.file is not None:
            return self
        # 构造一次以便在任何计算之前暴露非法参数
        try:
            build_problem(self)
        except FSDException as e:
            raise ValueError(str(e))
        return self


_DEFAULT_SIGNAL = {
    'explicit': 'explicit',
    'power': 'sobolev',
    'plateau': 'head',
    'multiplateau': 'shell',
}


def _need(spec: ProblemSpec, *names: str) -> None:
    missing = [n for n in names if getattr(spec, n) is None]
    if missing:
        raise ConfigValidationException(
            message=f"谱族 '{spec.family}' 缺少必需的键: {', '.join(missing)}",
            code="CONFIG_MISSING_FIELD",
            details={'missing': missing}
        )


def build_problem(spec: ProblemSpec) -> RegressionProblem:
    """
    由配置构造回归问题

    Raises:
        FSDException: 参数缺失或谱/信号构造失败
    """
    if spec.file is not None:
        return load_problem(spec.file)

    if spec.family == 'explicit':
        _need(spec, 'eigenvalues')
        spectrum = make_explicit_spectrum(spec.eigenvalues)
    elif spec.family == 'power':
        _need(spec, 'alpha', 'p')
        spectrum = make_power_spectrum(spec.alpha, spec.p)
    elif spec.family == 'plateau':
        _need(spec, 'k', 'sigma', 'eps', 'p')
        spectrum = make_plateau_spectrum(spec.k, spec.sigma, spec.eps, spec.p)
    else:
        _need(spec, 'd', 'L')
        spectrum = make_multiplateau_spectrum(spec.d, spec.L)

    kind = spec.signal or _DEFAULT_SIGNAL[spec.family]
    if kind == 'zero':
        signal = make_explicit_signal(np.zeros(spectrum.p))
    elif kind == 'head':
        _need(spec, 'alpha_star')
        k = spec.k if spec.k is not None else spectrum.p
        signal = make_head_signal(spectrum, k, spec.alpha_star)
    elif kind == 'sobolev':
        _need(spec, 's')
        signal = make_sobolev_signal(spectrum, spec.s, spec.delta)
    elif kind == 'shell':
        _need(spec, 'shell')
        signal = make_shell_signal(spectrum, spec.shell,
                                   1.0 if spec.magnitude is None else spec.magnitude)
    else:
        _need(spec, 'coefficients')
        signal = make_explicit_signal(spec.coefficients)

    return make_problem(spectrum, signal, spec.noise_std)


class TInterval(StrictModel):
    """t 的对数网格 [lo, hi]"""
    lo: float = Field(..., ge=1, description="下端")
    hi: float = Field(..., ge=1, description="上端")
    points: int = Field(
        default_factory=lambda: SystemConfig.EXPERIMENT_CONFIG['interval_grid_points'],
        ge=1, description="点数")

    @model_validator(mode='after')
    def check_order(self) -> 'TInterval':
        if self.hi < self.lo:
            raise ValueError("t_interval 要求 lo ≤ hi")
        return self


class SobolevSpec(StrictModel):
    """Sobolev 速率研究"""
    alpha: float = Field(..., gt=1, description="幂律指数 α > 1")
    s: float = Field(..., ge=1, description="光滑度 s ≥ 1")
    delta: Optional[float] = Field(None, gt=0, description="边界偏移 δ")
    noise_std: float = Field(1.0, ge=0, description="噪声标准差")
    monte_carlo: bool = Field(False, description="是否同时计算 Monte Carlo 中位风险")
    mc_trials: int = Field(32, ge=1, description="每个 N 的试验次数")
    p_cap: int = Field(
        default_factory=lambda: SystemConfig.EXPERIMENT_CONFIG['monte_carlo_slope_p_cap'],
        ge=1, description="Monte Carlo 维度上限")


class SingleIndexSpec(StrictModel):
    """单指标壁垒"""
    d: int = Field(..., ge=2, description="输入维度")
    L: int = Field(..., ge=1, description="层数")
    ie: int = Field(..., ge=1, description="信息指数 IE")
    magnitude: float = Field(1.0, description="信号幅度")
    noise_std: float = Field(1.0, ge=0, description="噪声标准差")

    @model_validator(mode='after')
    def check_ie(self) -> 'SingleIndexSpec':
        if self.ie > self.L:
            raise ValueError(f"ie 必须满足 1 ≤ ie ≤ L={self.L}")
        return self


class OutputSpec(StrictModel):
    """输出路径"""
    dir: Optional[str] = Field(None, description="输出目录（默认 settings.output_dir）")
    report_name: Optional[str] = Field(None, description="JSON 报告文件名")
    csv_name: Optional[str] = Field(None, description="CSV 文件名")


# ==================== 实验配置 ====================

class ExperimentConfig(StrictModel):
    """实验配置文档"""
    problem: Optional[ProblemSpec] = Field(None, description="回归问题")
    filter: str = Field("ridge", description="滤波器：gf | ridge | gd:η | pcr:b")
    filters: Optional[List[str]] = Field(None, description="compare 使用的两个滤波器")

    t: Optional[float] = Field(None, ge=1, description="调节参数 t")
    t_grid: Optional[List[float]] = Field(None, description="t 网格")
    t_interval: Optional[TInterval] = Field(None, description="t 对数网格")

    b: float = Field(default_factory=lambda: settings.default_b, gt=0, lt=1, description="常数 b")
    box: Optional[float] = Field(None, gt=0, lt=1 / 9, description="□，为空时取 min(0.1, 1/log(e·t))")
    c2: float = Field(
        default_factory=lambda: SystemConfig.FSD_CONFIG['default_c2'], gt=0, description="匹配常数 c2")

    N: Optional[int] = Field(None, ge=1, description="样本量")
    N_grid: Optional[List[int]] = Field(None, description="样本量网格")

    trials: int = Field(64, ge=1, description="Monte Carlo 试验次数")
    master_seed: int = Field(
        default_factory=lambda: settings.default_seed, ge=0, lt=2 ** 64, description="主种子")
    parallelism: int = Field(
        default_factory=lambda: settings.default_parallelism, ge=1, description="并行度")
    distribution: Literal['gaussian', 'rademacher'] = Field("gaussian", description="设计分布")

    sobolev: Optional[SobolevSpec] = None
    single_index: Optional[SingleIndexSpec] = None
    band_limit: float = Field(
        default_factory=lambda: SystemConfig.EXPERIMENT_CONFIG['ratio_band_width'],
        gt=1, description="速率匹配比值带宽 max/min")
    output: OutputSpec = Field(default_factory=OutputSpec)

    @field_validator('filter')
    @classmethod
    def check_filter(cls, value: str) -> str:
        _validate_filter_name(value)
        return value

    @field_validator('filters')
    @classmethod
    def check_filters(cls, value: Optional[List[str]]) -> Optional[List[str]]:
        if value is None:
            return value
        if len(value) != 2:
            raise ValueError("filters 必须恰好给出两个滤波器")
        for name in value:
            _validate_filter_name(name)
        return value

    @model_validator(mode='after')
    def check_pcr_constant(self) -> 'ExperimentConfig':
        """PCR 的阈值常数就是 b：未显式给出 b 时取 pcr:b 的值，给出且不一致时拒绝"""
        names = [self.filter, *(self.filters or [])]
        constants = sorted({spec.b for spec in map(parse_filter, names) if spec.kind == FilterKind.PCR})
        if not constants:
            return self
        if len(constants) > 1:
            raise ValueError(f"PCR 滤波器的阈值常数不一致: {constants}")
        if 'b' not in self.model_fields_set:
            self.b = constants[0]
        elif not math.isclose(self.b, constants[0], rel_tol=1e-12, abs_tol=0.0):
            raise ValueError(f"PCR 阈值常数 {constants[0]} 与 b={self.b} 不一致")
        return self

    @field_validator('t_grid')
    @classmethod
    def check_t_grid(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and (not value or min(value) < 1):
            raise ValueError("t_grid 必须非空且所有 t ≥ 1")
        return value

    @field_validator('N_grid')
    @classmethod
    def check_N_grid(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        if value is not None and (not value or min(value) < 1):
            raise ValueError("N_grid 必须非空且所有 N ≥ 1")
        return value


def _validate_filter_name(name: str) -> None:
    try:
        parse_filter(name)
    except FSDException as e:
        raise ValueError(e.message)


# ==================== 运行报告 ====================

class RunReport(BaseModel):
    """运行报告：配置回显、版本、输出、耗时与前提条件账本"""
    command: str
    version: str
    config: Dict[str, Any]
    resolved: Dict[str, Any] = Field(default_factory=dict, description="默认规则解析后的取值")
    outputs: Dict[str, Any]
    timings: Dict[str, float] = Field(default_factory=dict)
    preconditions: List[Dict[str, Any]] = Field(default_factory=list)
    hypothesis_met: bool = True
    exit_code: int = 0
    files: Dict[str, str] = Field(default_factory=dict)


# ==================== 解析与序列化 ====================

def _validation_exception(error: ValidationError) -> ConfigValidationException:
    """把 pydantic 的第一条错误转换为带键名的配置异常"""
    first = error.errors()[0]
    key = ".".join(str(part) for part in first['loc']) or "<root>"
    if first['type'] == 'extra_forbidden':
        return ConfigValidationException(
            message=f"未知的键: '{key}'",
            code="CONFIG_UNKNOWN_KEY",
            details={'key': key}
        )
    return ConfigValidationException(
        message=f"键 '{key}' 的取值非法: {first['msg']}",
        code="CONFIG_INVALID_VALUE",
        details={'key': key, 'errors': [
            {'loc': ".".join(str(p) for p in e['loc']), 'msg': e['msg']} for e in error.errors()
        ]}
    )


def validate_config(data: Dict[str, Any]) -> ExperimentConfig:
    """
    校验配置字典

    Raises:
        ConfigValidationException: 未知键或非法取值
    """
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise _validation_exception(e)


def parse_config(source: Union[str, Path]) -> ExperimentConfig:
    """
    解析配置：Path 或不以 '{' 开头的字符串视为文件路径，否则视为内联 JSON

    Raises:
        ConfigParseException: 文件不可读或 JSON 语法错误（附行列号）
        ConfigValidationException: 校验失败
    """
    if isinstance(source, Path) or not source.lstrip().startswith('{'):
        try:
            text = Path(source).read_text(encoding='utf-8')
        except OSError as e:
            raise ConfigParseException(
                message=f"无法读取配置文件: {source}",
                code="CONFIG_UNREADABLE",
                details={'path': str(source), 'error': str(e)}
            )
    else:
        text = source

    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseException(
            message=f"配置 JSON 解析失败（第 {e.lineno} 行第 {e.colno} 列）: {e.msg}",
            code="CONFIG_PARSE_ERROR",
            details={'line': e.lineno, 'column': e.colno}
        )
    if not isinstance(data, dict):
        raise ConfigParseException(
            message="配置文档的顶层必须是 JSON 对象",
            code="CONFIG_NOT_OBJECT",
        )
    return validate_config(data)


def serialize_config(config: ExperimentConfig) -> str:
    """序列化为 JSON 文本，parse_config(serialize_config(c)) == c"""
    return config.model_dump_json(indent=2)
