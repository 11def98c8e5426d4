"""
子命令分发
每个子命令调用 fsd_core / simulation / experiments 中对应的操作，
生成 RunReport 并写出 JSON 报告与 CSV
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from src.core.exceptions import ConfigValidationException
from src.core.filters import parse_filter
from src.core.fsd_core import (
    deterministic_norm_bounds,
    effective_rank,
    effective_rank_bracket,
    estimation_dimension,
    matching_condition,
    matching_sufficient_condition,
    pcr_gap_condition,
    pcr_slack,
    rate_breakdown,
    resolve_box,
    ridge_estimation_dimension,
    theorem_preconditions,
)
from src.core.models import PlateauScenario, PreconditionCheck
from src.core.spectra import make_sobolev_problem, sobolev_truncation_dimension
from src.experiments.barriers import single_index_barrier
from src.experiments.saturation import (
    MonteCarloOptions,
    partial_order_verdict,
    plateau_saturation,
    sobolev_study,
    sweep_rates,
)
from src.experiments.verification import bound_matching_study, omega_study
from src.simulation.monte_carlo import MonteCarloRunner, trials_frame
from src.simulation.sampler import draw_batch, excess_risk, fit_spectral
from src.utils.logger import experiment_logger, performance_monitor
from . import __version__
from .models import ExperimentConfig, RunReport, build_problem
from .report_writer import ReportWriter, tidy_frame, to_jsonable

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    'kstar', 'rate', 'theta', 'fit', 'mc', 'sobolev', 'plateau',
    'compare', 'single-index', 'omega', 'match',
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_HYPOTHESIS_NOT_MET = 2

BOX_RULE = "min(0.1, 1/log(e*t))"


@dataclass
class HandlerResult:
    """子命令的计算结果"""
    outputs: Dict
    preconditions: List[PreconditionCheck] = field(default_factory=list)
    hypothesis_met: bool = True
    frame: Optional[pd.DataFrame] = None
    resolved: Dict = field(default_factory=dict)


@dataclass
class CommandResult:
    """报告 + 主表"""
    report: RunReport
    frame: pd.DataFrame


def _require(config: ExperimentConfig, *names: str) -> None:
    missing = [n for n in names if getattr(config, n) is None]
    if missing:
        raise ConfigValidationException(
            message=f"缺少必需的键: {', '.join(missing)}",
            code="CONFIG_MISSING_FIELD",
            details={'missing': missing}
        )


def _t_grid(config: ExperimentConfig) -> List[float]:
    if config.t_grid is not None:
        return [float(t) for t in config.t_grid]
    if config.t_interval is not None:
        iv = config.t_interval
        return [float(t) for t in np.geomspace(iv.lo, iv.hi, iv.points)]
    if config.t is not None:
        return [float(config.t)]
    raise ConfigValidationException(
        message="缺少必需的键: t_grid 或 t_interval",
        code="CONFIG_MISSING_FIELD",
        details={'missing': ['t_grid']}
    )


def _box_resolution(config: ExperimentConfig, t: Optional[float]) -> Dict:
    if config.box is not None:
        return {'b': config.b, 'box': config.box, 'box_rule': 'explicit'}
    resolved = {'b': config.b, 'box_rule': BOX_RULE}
    if t is not None:
        resolved['box'] = resolve_box(t)
    return resolved


def _ledger_ok(ledger: List[PreconditionCheck]) -> bool:
    return all(entry.holds for entry in ledger)


class CommandDispatcher:
    """
    子命令分发器

    依赖 MonteCarloRunner（并行试验）与 ReportWriter（文件输出）
    """

    def __init__(self, runner: Optional[MonteCarloRunner] = None,
                 writer: Optional[ReportWriter] = None):
        self.runner = runner or MonteCarloRunner()
        self.writer = writer or ReportWriter()
        self._handlers: Dict[str, Callable[[ExperimentConfig], HandlerResult]] = {
            'kstar': self.handle_kstar,
            'rate': self.handle_rate,
            'theta': self.handle_theta,
            'fit': self.handle_fit,
            'mc': self.handle_mc,
            'sobolev': self.handle_sobolev,
            'plateau': self.handle_plateau,
            'compare': self.handle_compare,
            'single-index': self.handle_single_index,
            'omega': self.handle_omega,
            'match': self.handle_match,
        }

    # ========================================================================
    # 入口
    # ========================================================================

    def run(self, subcommand: str, config: ExperimentConfig, write: bool = True) -> CommandResult:
        """
        执行子命令并（可选）写出报告

        Raises:
            ConfigValidationException: 未知子命令或缺少必需键
            FSDException: 计算失败
        """
        handler = self._handlers.get(subcommand)
        if handler is None:
            raise ConfigValidationException(
                message=f"未知子命令: '{subcommand}'",
                code="CLI_UNKNOWN_SUBCOMMAND",
                details={'subcommand': subcommand, 'choices': list(SUBCOMMANDS)}
            )

        experiment_logger.info(f"运行子命令 {subcommand}", command=subcommand)
        timed = performance_monitor.track_time(subcommand)(handler)
        result = timed(config)

        ledger = [entry.to_dict() for entry in result.preconditions]
        hypothesis = result.hypothesis_met and _ledger_ok(result.preconditions)
        report = RunReport(
            command=subcommand,
            version=__version__,
            config=config.model_dump(mode='json'),
            resolved=to_jsonable(result.resolved),
            outputs=to_jsonable(result.outputs),
            timings={subcommand: performance_monitor.get_summary().get(subcommand, 0.0)},
            preconditions=ledger,
            hypothesis_met=hypothesis,
            exit_code=EXIT_OK if hypothesis else EXIT_HYPOTHESIS_NOT_MET,
        )
        frame = result.frame if result.frame is not None else tidy_frame(report.outputs)

        if write:
            base = subcommand.replace('-', '_')
            csv_path = self.writer.write_frame(frame, config.output.csv_name or f"{base}.csv")
            report.files = {'csv': str(csv_path)}
            report_path = self.writer.path_for(config.output.report_name or f"{base}_report.json")
            report.files['report'] = str(report_path)
            self.writer.write_report(report, report_path.name)

        if not hypothesis:
            experiment_logger.warning(f"{subcommand}: 定理前提不满足", command=subcommand)
        return CommandResult(report=report, frame=frame)

    # ========================================================================
    # fsd_core
    # ========================================================================

    def handle_kstar(self, config: ExperimentConfig) -> HandlerResult:
        _require(config, 'problem', 't')
        problem = build_problem(config.problem)
        dim = estimation_dimension(problem.spectrum, config.t, config.b)
        bracket = effective_rank_bracket(problem.spectrum, config.t, config.b)
        bounds = deterministic_norm_bounds(problem.spectrum, config.t, config.b)

        outputs = {
            **dim.to_dict(),
            'effective_rank': effective_rank(problem.spectrum, config.t),
            'effective_rank_bracket': bracket.to_dict(),
            'norm_bounds': {
                c.name: {'measured': c.measured, 'bound': c.bound,
                         'holds': c.holds, 'applicable': c.applicable}
                for c in bounds.checks
            },
        }
        if config.N is not None:
            outputs['ridge_k'] = ridge_estimation_dimension(problem.spectrum, config.t, config.b, config.N)

        ledger = [
            PreconditionCheck('k_star_nondegenerate', not dim.degenerate,
                              f"σ_1 = {problem.spectrum.sigma(1):.6g}, b/t = {dim.threshold:.6g}"),
            PreconditionCheck('norm_bounds', not bounds.violations, ", ".join(bounds.violations)),
        ]
        return HandlerResult(outputs=outputs, preconditions=ledger, resolved={'b': config.b})

    def handle_rate(self, config: ExperimentConfig) -> HandlerResult:
        _require(config, 'problem', 't', 'N')
        problem = build_problem(config.problem)
        spec = parse_filter(config.filter)
        box = resolve_box(config.t, config.box)
        rate = rate_breakdown(problem, spec, config.t, config.b, config.N, box)
        dim = estimation_dimension(problem.spectrum, config.t, config.b)

        outputs = {
            'k_star': rate.k_star,
            'threshold': dim.threshold,
            'degenerate': dim.degenerate,
            'terms': rate.to_dict(),
            'matching_condition': matching_condition(problem, spec, config.t, config.b,
                                                     config.N, box, config.c2),
            'matching_sufficient_condition': matching_sufficient_condition(spec, config.t, box),
            'effective_rank': effective_rank(problem.spectrum, config.t),
            'ridge_k': ridge_estimation_dimension(problem.spectrum, config.t, config.b, config.N),
        }
        ledger = theorem_preconditions(problem, spec, config.t, config.b, config.N, box)
        return HandlerResult(outputs=outputs, preconditions=ledger,
                             resolved=_box_resolution(config, config.t))

    def handle_theta(self, config: ExperimentConfig) -> HandlerResult:
        _require(config, 'problem', 't')
        problem = build_problem(config.problem)
        box = resolve_box(config.t, config.box)
        gap = pcr_gap_condition(problem.spectrum, config.t, config.b, box)
        slack = pcr_slack(problem, config.t, config.b, box)

        outputs = {
            'k_star': gap['k_star'],
            'threshold': config.b / config.t,
            'theta': gap['theta'],
            'gap_condition': gap,
            'pcr_slack': slack,
        }
        ledger = [PreconditionCheck('pcr_theta_positive', gap['applicable'], f"θ = {gap['theta']:.6g}")]
        return HandlerResult(outputs=outputs, preconditions=ledger,
                             resolved=_box_resolution(config, config.t))

    # ========================================================================
    # simulation
    # ========================================================================

    def handle_fit(self, config: ExperimentConfig) -> HandlerResult:
        _require(config, 'problem', 't', 'N')
        problem = build_problem(config.problem)
        spec = parse_filter(config.filter)
        batch = draw_batch(problem, config.N, config.master_seed, config.distribution)
        box = resolve_box(config.t, config.box)
        fit = fit_spectral(batch, spec, config.t)
        risk = excess_risk(fit, problem, config.b)

        outputs = {
            'route': fit.route,
            'beta_hat_norm': float(np.linalg.norm(fit.beta_hat)),
            'excess_risk': risk.excess_risk,
            'risk_head': risk.risk_head,
            'risk_tail': risk.risk_tail,
            'k_star': risk.k_star,
        }
        frame = pd.DataFrame({
            'j': np.arange(1, problem.p + 1),
            'beta_hat': fit.beta_hat,
            'beta_star': problem.signal.coefficients,
        })
        ledger = theorem_preconditions(problem, spec, config.t, config.b, config.N, box)
        return HandlerResult(outputs=outputs, preconditions=ledger, frame=frame,
                             resolved=_box_resolution(config, config.t))

    def handle_mc(self, config: ExperimentConfig) -> HandlerResult:
        _require(config, 'problem', 't', 'N')
        problem = build_problem(config.problem)
        spec = parse_filter(config.filter)
        box = resolve_box(config.t, config.box)
        summary = self.runner.run(problem, spec, config.t, config.b, box, config.N,
                                  config.trials, config.master_seed,
                                  parallelism=config.parallelism,
                                  distribution=config.distribution)
        outputs = summary.to_dict()
        ledger = theorem_preconditions(problem, spec, config.t, config.b, config.N, box)
        return HandlerResult(outputs=outputs, preconditions=ledger, frame=trials_frame(summary),
                             resolved=_box_resolution(config, config.t))

    # ========================================================================
    # experiments
    # ========================================================================

    def handle_sobolev(self, config: ExperimentConfig) -> HandlerResult:
        _require(config, 'sobolev', 'N_grid')
        sob = config.sobolev
        spec = parse_filter(config.filter)
        options = None
        if sob.monte_carlo:
            options = MonteCarloOptions(trials=sob.mc_trials, master_seed=config.master_seed,
                                        p_cap=sob.p_cap, parallelism=config.parallelism)
        result = sobolev_study(sob.alpha, sob.s, config.N_grid, config.b, config.box, spec,
                               noise_std=sob.noise_std, delta=sob.delta,
                               monte_carlo=options, runner=self.runner)
        points = []
        for i, N in enumerate(result.N_grid):
            point = {'N': N, 't': result.t_values[i], 'rate_squared': result.values[i]}
            if result.monte_carlo_medians is not None:
                point['median_risk'] = result.monte_carlo_medians[i]
            points.append(point)

        outputs = {
            'fitted_slope': result.fitted_slope,
            'target_exponent': result.target_exponent,
            'slope_error': result.slope_error,
            'monte_carlo_slope': result.monte_carlo_slope,
            'points': points,
        }
        ledger = []
        for N, t in zip(result.N_grid, result.t_values):
            problem = make_sobolev_problem(sob.alpha, sob.s, sobolev_truncation_dimension(N),
                                           sob.noise_std, sob.delta)
            ledger.extend(
                PreconditionCheck(f"N={N}.{entry.name}", entry.holds, entry.detail)
                for entry in theorem_preconditions(problem, spec, t, config.b, N, resolve_box(t, config.box))
            )
        return HandlerResult(outputs=outputs, preconditions=ledger,
                             resolved=_box_resolution(config, None))

    def handle_plateau(self, config: ExperimentConfig) -> HandlerResult:
        _require(config, 'problem', 'N')
        spec = config.problem
        if spec.family != 'plateau' or spec.alpha_star is None:
            raise ConfigValidationException(
                message="plateau 子命令要求 problem.family = 'plateau' 且给出 alpha_star",
                code="CONFIG_INVALID_VALUE",
                details={'key': 'problem.family'}
            )
        scenario = PlateauScenario(k=spec.k, sigma=spec.sigma, eps=spec.eps, p=spec.p,
                                   alpha_star=spec.alpha_star, noise_std=spec.noise_std,
                                   N=config.N)
        points = config.t_interval.points if config.t_interval is not None else None
        report = plateau_saturation(scenario, config.b, box=config.box, grid_points=points)

        ledger = [PreconditionCheck(
            'snr_in_range', report.hypothesis_met,
            f"4 < SNR = {report.snr:.6g} <= bσ/ε = {config.b * spec.sigma / spec.eps:.6g}"
        )]
        return HandlerResult(outputs=report.to_dict(), preconditions=ledger,
                             resolved=_box_resolution(config, None))

    def handle_compare(self, config: ExperimentConfig) -> HandlerResult:
        _require(config, 'problem', 't', 'N')
        problem = build_problem(config.problem)
        names = config.filters or ['gf', 'ridge']
        filter_a, filter_b = (parse_filter(n) for n in names)
        verdict = partial_order_verdict(problem, filter_a, filter_b, config.t, config.b,
                                        config.N, config.box)
        box = resolve_box(config.t, config.box)

        outputs = {
            'filters': names,
            'verdict': verdict.to_dict(),
            'rates': {
                name: rate_breakdown(problem, spec, config.t, config.b, config.N, box).to_dict()
                for name, spec in zip(names, (filter_a, filter_b))
            },
        }
        if config.t_grid is not None or config.t_interval is not None:
            grid = _t_grid(config)
            outputs['sweeps'] = {}
            for name, spec in zip(names, (filter_a, filter_b)):
                sweep = sweep_rates(problem, spec, config.b, config.N, config.box, grid)
                outputs['sweeps'][name] = {'argmin_t': sweep.argmin_t, 'min_rate': sweep.min_rate}
        ledger = [
            PreconditionCheck(f"{name}.{entry.name}", entry.holds, entry.detail)
            for name, spec in zip(names, (filter_a, filter_b))
            for entry in theorem_preconditions(problem, spec, config.t, config.b, config.N, box)
        ]
        return HandlerResult(outputs=outputs, preconditions=ledger,
                             resolved=_box_resolution(config, config.t))

    def handle_single_index(self, config: ExperimentConfig) -> HandlerResult:
        _require(config, 'single_index', 'N')
        si = config.single_index
        report = single_index_barrier(si.d, si.L, si.ie, si.magnitude, si.noise_std, config.N,
                                      config.b, config.box, _t_grid(config))
        ledger = [PreconditionCheck('barrier_consistent', not report.inconsistencies,
                                    "; ".join(report.inconsistencies))]
        return HandlerResult(outputs=report.to_dict(), preconditions=ledger,
                             resolved=_box_resolution(config, None))

    def handle_omega(self, config: ExperimentConfig) -> HandlerResult:
        _require(config, 'problem', 't', 'N')
        problem = build_problem(config.problem)
        report = omega_study(problem, config.t, config.box, config.N, config.trials,
                             config.master_seed, b=config.b, parallelism=config.parallelism)
        budget = report.box ** 2 * config.N
        ledger = [
            PreconditionCheck('sample_complexity', budget >= report.effective_rank,
                              f"□²N = {budget:.6g}, effective_rank = {report.effective_rank:.6g}"),
            PreconditionCheck('omega_consequences', report.violation_count == 0,
                              f"{report.violation_count} 次违反"),
        ]
        return HandlerResult(outputs=report.to_dict(), preconditions=ledger,
                             resolved=_box_resolution(config, config.t))

    def handle_match(self, config: ExperimentConfig) -> HandlerResult:
        _require(config, 'problem', 't', 'N_grid')
        problem = build_problem(config.problem)
        spec = parse_filter(config.filter)
        report = bound_matching_study(problem, spec, config.t, config.b, config.box,
                                      config.N_grid, config.trials, config.master_seed,
                                      c2=config.c2, parallelism=config.parallelism,
                                      band_limit=config.band_limit, runner=self.runner)
        ledger = [PreconditionCheck(name, False) for name in report.precondition_failures]
        ledger.append(PreconditionCheck('ratio_within_band', report.within_band,
                                        f"带宽 {report.band_width:.4g} ≤ {report.band_limit}"))
        return HandlerResult(outputs=report.to_dict(), preconditions=ledger,
                             resolved=_box_resolution(config, config.t))


def run_command(subcommand: str, config: ExperimentConfig,
                dispatcher: Optional[CommandDispatcher] = None) -> CommandResult:
    """函数式入口：分发子命令并写出报告"""
    return (dispatcher or CommandDispatcher()).run(subcommand, config)
