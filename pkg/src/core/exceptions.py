"""
统一异常体系
提供结构化的异常处理，便于调试和错误追踪
"""

from typing import Dict, Optional


class FSDException(Exception):
    """
    基础异常

    所有自定义异常的基类，提供结构化的错误信息
    """

    def __init__(self, message: str, code: str, details: Optional[Dict] = None):
        """
        初始化异常

        Args:
            message: 人类可读的错误消息
            code: 机器可读的错误代码（如 SPECTRUM_INVALID_ALPHA）
            details: 额外的错误详情
        """
        self.message = message
        self.code = code
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict:
        """转换为字典格式，用于CLI错误输出"""
        return {
            "message": self.message,
            "code": self.code,
            "details": self.details,
            "type": self.__class__.__name__
        }

    def __str__(self):
        return f"[{self.code}] {self.message}"


# ============================================================================
# 模型层异常（谱、信号、回归问题）
# ============================================================================

class ModelException(FSDException):
    """模型构造异常基类"""
    pass


class InvalidSpectrumException(ModelException):
    """非法谱参数"""
    pass


class InvalidSignalException(ModelException):
    """非法信号参数"""
    pass


class DimensionMismatchException(ModelException):
    """维度不一致"""
    pass


# ============================================================================
# 滤波器异常
# ============================================================================

class FilterException(FSDException):
    """滤波器异常基类"""
    pass


class InvalidFilterException(FilterException):
    """非法滤波器规格（名称、η、b）"""
    pass


class InvalidTuningParameterException(FilterException):
    """非法调节参数 t"""
    pass


# ============================================================================
# 计算异常
# ============================================================================

class ComputationException(FSDException):
    """数值计算异常基类"""
    pass


class RateComputationException(ComputationException):
    """速率分解无法计算"""
    pass


class EigensolverException(ComputationException):
    """特征分解失败"""
    pass


class TrialFailedException(ComputationException):
    """Monte Carlo 单次试验失败"""
    pass


# ============================================================================
# 实验异常
# ============================================================================

class ExperimentException(FSDException):
    """实验异常基类"""
    pass


class InvalidGridException(ExperimentException):
    """非法网格（空网格、非几何网格等）"""
    pass


class PreconditionException(ExperimentException):
    """实验前提条件不满足且无法继续"""
    pass


# ============================================================================
# 配置异常
# ============================================================================

class ConfigException(FSDException):
    """配置异常基类"""
    pass


class ConfigParseException(ConfigException):
    """配置文本无法解析"""
    pass


class ConfigValidationException(ConfigException):
    """配置校验失败"""
    pass
