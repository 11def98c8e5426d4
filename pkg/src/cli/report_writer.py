"""
报告输出
JSON 报告 + CSV 表（pandas）；单写者，不同子命令应指向不同目录
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import settings
from src.utils.logger import log_system_event
from .models import RunReport


def to_jsonable(value: Any) -> Any:
    """
    转换为可 JSON 序列化的值

    numpy 标量/数组转为 Python 类型；inf/nan 转为字符串
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


def flatten(data: Dict[str, Any], prefix: str = "") -> List[Tuple[str, Any]]:
    """嵌套字典展开为 (parameter, value) 行，列表元素以下标命名"""
    rows = []
    for key, value in data.items():
        name = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            rows.extend(flatten(value, name))
        elif isinstance(value, list):
            rows.extend(flatten({str(i): v for i, v in enumerate(value)}, name))
        else:
            rows.append((name, value))
    return rows


def tidy_frame(outputs: Dict[str, Any]) -> pd.DataFrame:
    """输出字典 → 两列 (parameter, value) 的长表"""
    return pd.DataFrame(flatten(outputs), columns=['parameter', 'value'])


class ReportWriter:
    """报告写出器"""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = Path(output_dir or settings.output_dir)

    def path_for(self, name: str) -> Path:
        """输出文件路径（确保目录存在）"""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / name

    def write_report(self, report: RunReport, name: str) -> Path:
        """写出 JSON 报告"""
        path = self.path_for(name)
        path.write_text(self.render_report(report), encoding='utf-8')
        log_system_event("report_written", path=str(path), command=report.command)
        return path

    def write_frame(self, frame: pd.DataFrame, name: str) -> Path:
        """写出 CSV（始终带表头）"""
        path = self.path_for(name)
        frame.to_csv(path, index=False)
        return path

    @staticmethod
    def render_report(report: RunReport) -> str:
        return json.dumps(report.model_dump(mode='json'), ensure_ascii=False, indent=2)

    @staticmethod
    def render_frame(frame: pd.DataFrame) -> str:
        return frame.to_csv(index=False)
