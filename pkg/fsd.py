"""
FSD 命令行入口

用法：
    python fsd.py rate --config configs/rate.json
    python fsd.py mc --config mc.json --trials 64 --seed 7 --out results/mc
退出码：0 成功；2 定理前提不满足（数值照常输出）；1 错误
"""

import argparse
import json
import sys
import os
from typing import List, Optional

# 添加项目路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.cli.commands import EXIT_ERROR, SUBCOMMANDS
from src.cli.models import ExperimentConfig, parse_config, validate_config
from src.cli.report_writer import ReportWriter
from src.container import create_container
from src.core.exceptions import FSDException
from src.utils.logger import log_error, log_system_event


def build_parser() -> argparse.ArgumentParser:
    """构造参数解析器；全局参数在每个子命令上都可用"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH', help='JSON 配置文件（或以 { 开头的内联 JSON）')
    common.add_argument('--seed', type=int, metavar='U64', help='覆盖 master_seed')
    common.add_argument('--parallelism', type=int, metavar='INT', help='覆盖并行度')
    common.add_argument('--trials', type=int, metavar='INT', help='覆盖试验次数')
    common.add_argument('--out', metavar='DIR', help='输出目录')
    common.add_argument('--format', choices=['json', 'csv'], default='json',
                        help='标准输出格式（文件始终同时写出 JSON 与 CSV）')

    parser = argparse.ArgumentParser(prog='fsd', description='谱正则化估计量的 FSD 速率与验证工具')
    sub = parser.add_subparsers(dest='command', required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """读取配置并应用命令行覆盖"""
    config = parse_config(args.config) if args.config else validate_config({})
    overrides = {
        'master_seed': args.seed,
        'parallelism': args.parallelism,
        'trials': args.trials,
    }
    data = config.model_dump()
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.out:
        data['output']['dir'] = args.out
    return validate_config(data)


def main(argv: Optional[List[str]] = None) -> int:
    """
    CLI 主函数

    Returns:
        退出码
    """
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        container = create_container({
            'output_dir': config.output.dir,
            'default_parallelism': config.parallelism,
        })
        dispatcher = container.dispatcher()
        result = dispatcher.run(args.command, config)
    except FSDException as e:
        log_error(f"{args.command} 失败", e, context={'command': args.command})
        print(json.dumps(e.to_dict(), ensure_ascii=False), file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        log_error(f"{args.command} 内部错误", e, context={'command': args.command})
        print(json.dumps({'message': str(e), 'code': 'INTERNAL_ERROR',
                          'type': type(e).__name__}, ensure_ascii=False), file=sys.stderr)
        return EXIT_ERROR

    if args.format == 'json':
        print(ReportWriter.render_report(result.report))
    else:
        print(ReportWriter.render_frame(result.frame), end='')

    log_system_event("command_finished", command=args.command, exit_code=result.report.exit_code)
    return result.report.exit_code


if __name__ == '__main__':
    sys.exit(main())
