"""
测试配置
提供通用的fixtures和测试工具
"""

import pytest
import sys
import os

import numpy as np

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from src.core.filters import make_filter, parse_filter
from src.core.models import FilterKind
from src.core.spectra import (
    make_explicit_signal,
    make_explicit_spectrum,
    make_plateau_problem,
    make_problem,
)
from src.container import Container


@pytest.fixture
def test_container(tmp_path):
    """测试用依赖容器（输出写到临时目录）"""
    container = Container()
    container.config.from_dict({
        'default_parallelism': 1,
        'output_dir': str(tmp_path / 'results'),
    })
    return container


@pytest.fixture
def rng():
    """固定种子的随机数生成器"""
    return np.random.default_rng(20240611)


@pytest.fixture
def ridge():
    return make_filter(FilterKind.RIDGE)


@pytest.fixture
def gradient_flow():
    return make_filter(FilterKind.GRADIENT_FLOW)


@pytest.fixture
def all_filters():
    """每个滤波器族各一个实例"""
    return [parse_filter(name) for name in ('gf', 'ridge', 'gd:0.1', 'pcr:0.5')]


@pytest.fixture
def plateau_problem():
    """平台问题：k=8, σ=1, ε=0.01, p=208, α_*=0.5, σ_ξ=1"""
    return make_plateau_problem(k=8, sigma=1.0, eps=0.01, p=208, alpha_star=0.5, noise_std=1.0)


@pytest.fixture
def small_problem():
    """p=4 的显式问题"""
    spectrum = make_explicit_spectrum([0.9, 0.5, 0.04, 0.01])
    return make_problem(spectrum, make_explicit_signal([1.0, -0.5, 0.25, 2.0]), noise_std=0.5)
