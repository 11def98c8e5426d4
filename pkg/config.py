"""
系统配置
使用Pydantic Settings管理配置，支持环境变量
"""

from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field

# 尝试加载.env文件
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass  # dotenv不是必需的


class Settings(BaseSettings):
    """
    应用配置

    所有配置项都可以通过环境变量覆盖（前缀 FSD_）
    例如：export FSD_LOG_LEVEL="DEBUG"
    """

    model_config = SettingsConfigDict(
        env_prefix="FSD_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # ========================================================================
    # 应用配置
    # ========================================================================
    app_env: str = Field(default="development", description="应用环境")
    log_level: str = Field(default="INFO", description="日志级别")
    log_dir: str = Field(default="", description="JSON日志目录（为空则只输出到控制台）")
    output_dir: str = Field(default="results", description="报告与CSV输出目录")

    # ========================================================================
    # 数值配置
    # ========================================================================
    max_dimension: int = Field(
        default=2_000_000,
        description="多平台谱允许的最大维度 M_L"
    )
    default_b: float = Field(default=0.5, description="估计维度常数 b")
    sobolev_delta: float = Field(default=0.01, description="Sobolev信号的边界偏移 δ")

    # ========================================================================
    # Monte Carlo 配置
    # ========================================================================
    default_parallelism: int = Field(default=1, description="默认并行度")
    default_seed: int = Field(default=0, description="默认主种子")


# 创建全局配置实例
settings = Settings()

