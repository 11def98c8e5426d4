"""
CLI模块
命令行入口、实验配置与报告输出
"""

__version__ = "1.0.0"
