"""
测试工具函数
随机谱与随机问题的构造
"""

import numpy as np

from src.core.spectra import make_explicit_signal, make_explicit_spectrum, make_problem


def random_spectrum(rng, p, top=1.0):
    """σ_1 = top 的随机非增谱"""
    values = np.sort(rng.uniform(0.0, 1.0, size=p))[::-1]
    values = values / values[0] * top
    return make_explicit_spectrum(values)


def random_problem(rng, p, noise_std=0.5):
    """随机谱 + 随机信号"""
    spectrum = random_spectrum(rng, p)
    return make_problem(spectrum, make_explicit_signal(rng.standard_normal(p)), noise_std)
