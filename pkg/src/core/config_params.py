"""
算法参数集中管理
便于调优和复现实验
"""

import math
from typing import Dict, List


class SystemConfig:
    """系统全局参数"""

    # ========== FSD 核心量 ==========
    FSD_CONFIG = {
        'box_cap': 0.1,                # □ 默认上限
        'box_max': 1.0 / 9.0,          # □ 必须严格小于 1/9
        'default_c2': 1.0,             # 匹配条件常数 c2
        'min_k_star_for_matching': 4,  # 下界要求 k* ≥ c（约定为 4）
        'sufficient_condition_grid': 1001,  # ψ_t(x) ≥ (□/t)x 的检查网格
    }

    # ========== 滤波器 ==========
    FILTER_CONFIG = {
        'gd_eta_max': 1.0 / 8.0,       # GD 步长上限（开区间）
        'gf_series_cutoff': 1e-4,      # |tx| 低于此值用级数展开
        'sandwich_domain': (0.0, 8.0), # 夹逼不等式的认证区间
        'sandwich_grid_points': 10_000,
    }

    # ========== 模拟 ==========
    SIMULATION_CONFIG = {
        'design_stream': 0,            # 设计矩阵随机流
        'noise_stream': 1,             # 噪声随机流
        'route_agreement_tol': 1e-8,   # 原始/对偶路径一致性
        'sobolev_truncation_factor': 32,   # p = max(32·N, 4096)
        'sobolev_truncation_floor': 4096,
    }

    # ========== 实验 ==========
    EXPERIMENT_CONFIG = {
        'interval_grid_points': 512,   # 区间 I 上的对数网格点数
        'open_end_margin': 1e-9,       # 区间 I 开端相对余量
        'closed_end_margin': 1e-12,    # 区间 I 闭端相对余量（防止舍入越界）
        'min_exponent_points': 4,      # 斜率拟合最少点数
        'geometric_grid_rtol': 1e-6,   # 几何网格判定的相对容差
        'min_omega_trials': 50,
        'ratio_band_width': 4.0,       # 速率匹配比值带宽 max/min
        'monte_carlo_slope_p_cap': 8192,
    }

    # ========== 验收容差 ==========
    ACCEPTANCE_CONFIG = {
        'sandwich_tol': 1e-12,
        'closed_form_rtol': 0.01,
        'theory_slope_tol': 0.05,
        'monte_carlo_slope_tol': 0.12,
        'omega_min_frequency': 0.95,
        'identity_tol': 1e-12,
    }

    @classmethod
    def get_fsd_config(cls) -> Dict:
        """获取FSD参数"""
        return cls.FSD_CONFIG.copy()

    @classmethod
    def get_filter_config(cls) -> Dict:
        """获取滤波器参数"""
        return cls.FILTER_CONFIG.copy()

    @classmethod
    def get_simulation_config(cls) -> Dict:
        """获取模拟参数"""
        return cls.SIMULATION_CONFIG.copy()

    @classmethod
    def get_experiment_config(cls) -> Dict:
        """获取实验参数"""
        return cls.EXPERIMENT_CONFIG.copy()

    @classmethod
    def get_acceptance_config(cls) -> Dict:
        """获取验收容差"""
        return cls.ACCEPTANCE_CONFIG.copy()

    @classmethod
    def default_box(cls, t: float) -> float:
        """
        □ 的默认规则：min(0.1, 1/log(e·t))

        Args:
            t: 调节参数 t ≥ 1

        Returns:
            □ 值
        """
        return min(cls.FSD_CONFIG['box_cap'], 1.0 / math.log(math.e * t))


# ========== 预设场景 ==========

class ConfigPresets:
    """实验预设场景"""

    @staticmethod
    def plateau_acceptance_scenarios() -> List[Dict]:
        """
        平台协方差模型的五个验收场景

        均满足 4 < SNR ≤ bσ/ε（b = 0.5）
        """
        return [
            {'k': 8, 'sigma': 1.0, 'eps': 0.01, 'p': 1008,
             'alpha_star': 0.15, 'noise_std': 1.0, 'N': 1000},
            {'k': 4, 'sigma': 1.0, 'eps': 0.005, 'p': 2004,
             'alpha_star': 0.2, 'noise_std': 1.0, 'N': 2000},
            {'k': 16, 'sigma': 0.8, 'eps': 0.01, 'p': 816,
             'alpha_star': 0.05, 'noise_std': 0.5, 'N': 500},
            {'k': 2, 'sigma': 1.0, 'eps': 0.002, 'p': 5002,
             'alpha_star': 0.6, 'noise_std': 2.0, 'N': 4000},
            {'k': 10, 'sigma': 0.5, 'eps': 0.004, 'p': 1010,
             'alpha_star': 0.2, 'noise_std': 1.0, 'N': 800},
        ]

    @staticmethod
    def omega_study_spectra() -> List[Dict]:
        """Ω_t 频率研究使用的三类谱"""
        return [
            {'family': 'power', 'alpha': 2.0, 'p': 20},
            {'family': 'plateau', 'k': 2, 'sigma': 1.0, 'eps': 0.1, 'p': 10},
            {'family': 'multiplateau', 'd': 2, 'L': 2},
        ]

    @staticmethod
    def bound_matching_problem() -> Dict:
        """速率匹配研究的平台问题（k* = 8）"""
        return {
            'k': 8, 'sigma': 1.0, 'eps': 0.01, 'p': 208,
            'alpha_star': 0.5, 'noise_std': 1.0, 't': 5.0,
            'N_grid': [250, 500, 1000, 2000, 4000],
        }
