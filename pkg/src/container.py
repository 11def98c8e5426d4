"""
依赖注入容器
统一管理 Monte Carlo 执行器、报告写出器与子命令分发器
"""

from typing import Dict, Optional

from dependency_injector import containers, providers
from config import settings

from src.simulation.monte_carlo import MonteCarloRunner
from src.cli.report_writer import ReportWriter
from src.cli.commands import CommandDispatcher


class Container(containers.DeclarativeContainer):
    """
    应用依赖注入容器

    config 键：
    - default_parallelism: Monte Carlo 默认并行度
    - output_dir:          报告输出目录
    """

    # ========================================================================
    # 配置
    # ========================================================================
    config = providers.Configuration()

    # ========================================================================
    # 模拟层
    # ========================================================================

    monte_carlo_runner = providers.Singleton(
        MonteCarloRunner,
        parallelism=config.default_parallelism
    )

    # ========================================================================
    # CLI 层
    # ========================================================================

    report_writer = providers.Factory(
        ReportWriter,
        output_dir=config.output_dir
    )

    dispatcher = providers.Factory(
        CommandDispatcher,
        runner=monte_carlo_runner,
        writer=report_writer
    )


def create_container(overrides: Optional[Dict] = None) -> Container:
    """
    创建并配置容器

    Args:
        overrides: 覆盖 settings 中的取值（如 {'output_dir': 'out'}）

    Returns:
        配置好的依赖注入容器
    """
    container = Container()
    values = {
        'default_parallelism': settings.default_parallelism,
        'output_dir': settings.output_dir,
    }
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    container.config.from_dict(values)
    return container
