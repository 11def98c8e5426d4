"""
实验配置模型单元测试
未知键、非法取值、解析错误定位与序列化往返
"""

import json
from pathlib import Path

import pytest

from src.cli.models import build_problem, parse_config, serialize_config, validate_config
from src.core.exceptions import ConfigParseException, ConfigValidationException, FSDException
from src.core.spectra import save_problem

pytestmark = pytest.mark.unit


POWER_PROBLEM = {"family": "power", "alpha": 2.0, "p": 10, "s": 1.0}


class TestValidateConfig:
    """配置字典校验"""

    def test_defaults(self):
        config = validate_config({})
        assert config.b == 0.5
        assert config.box is None
        assert config.filter == "ridge"
        assert config.trials == 64
        assert config.master_seed == 0
        assert config.distribution == "gaussian"

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigValidationException) as exc:
            validate_config({"tt": 5})
        assert exc.value.code == "CONFIG_UNKNOWN_KEY"
        assert "'tt'" in exc.value.message
        assert exc.value.details['key'] == "tt"

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigValidationException) as exc:
            validate_config({"problem": {**POWER_PROBLEM, "foo": 1}})
        assert exc.value.code == "CONFIG_UNKNOWN_KEY"
        assert exc.value.details['key'] == "problem.foo"

    def test_gradient_descent_step_too_large(self):
        with pytest.raises(ConfigValidationException) as exc:
            validate_config({"filter": "gd:0.2"})
        assert exc.value.code == "CONFIG_INVALID_VALUE"
        assert "1/8" in exc.value.message

    @pytest.mark.parametrize("box", [0.2, 1 / 9, 0.0])
    def test_box_out_of_range(self, box):
        with pytest.raises(ConfigValidationException) as exc:
            validate_config({"box": box})
        assert exc.value.code == "CONFIG_INVALID_VALUE"
        assert exc.value.details['key'] == "box"

    @pytest.mark.parametrize("b", [0.0, 1.0])
    def test_b_out_of_range(self, b):
        with pytest.raises(ConfigValidationException) as exc:
            validate_config({"b": b})
        assert exc.value.code == "CONFIG_INVALID_VALUE"

    def test_compare_needs_two_filters(self):
        with pytest.raises(ConfigValidationException) as exc:
            validate_config({"filters": ["gf", "ridge", "pcr:0.5"]})
        assert exc.value.code == "CONFIG_INVALID_VALUE"

    def test_pcr_constant_becomes_b(self):
        config = validate_config({"filters": ["pcr:0.9", "ridge"]})
        assert config.b == 0.9
        assert validate_config(config.model_dump(mode='json')).b == 0.9

    def test_pcr_constant_agrees_with_explicit_b(self):
        assert validate_config({"filter": "pcr:0.3", "b": 0.3}).b == 0.3

    @pytest.mark.parametrize("data", [
        {"filter": "pcr:0.9", "b": 0.5},
        {"filter": "pcr:0.3", "filters": ["pcr:0.5", "gf"]},
    ])
    def test_pcr_constant_conflict(self, data):
        with pytest.raises(ConfigValidationException) as exc:
            validate_config(data)
        assert exc.value.code == "CONFIG_INVALID_VALUE"
        assert "PCR" in exc.value.message

    def test_t_below_one(self):
        with pytest.raises(ConfigValidationException):
            validate_config({"t": 0.5})

    def test_invalid_plateau(self):
        problem = {"family": "plateau", "k": 2, "sigma": 0.5, "eps": 0.5, "p": 10, "alpha_star": 1.0}
        with pytest.raises(ConfigValidationException) as exc:
            validate_config({"problem": problem})
        assert exc.value.code == "CONFIG_INVALID_VALUE"

    def test_power_family_needs_smoothness(self):
        with pytest.raises(ConfigValidationException) as exc:
            validate_config({"problem": {"family": "power", "alpha": 2.0, "p": 10}})
        assert exc.value.code == "CONFIG_INVALID_VALUE"
        assert "缺少必需的键: s" in exc.value.message

    def test_problem_needs_family_or_file(self):
        with pytest.raises(ConfigValidationException):
            validate_config({"problem": {"noise_std": 1.0}})

    def test_single_index_exponent_above_depth(self):
        with pytest.raises(ConfigValidationException) as exc:
            validate_config({"single_index": {"d": 4, "L": 2, "ie": 3}})
        assert exc.value.code == "CONFIG_INVALID_VALUE"

    def test_reversed_t_interval(self):
        with pytest.raises(ConfigValidationException):
            validate_config({"t_interval": {"lo": 10, "hi": 2}})


class TestParseConfig:
    """JSON 文本与文件解析"""

    def test_inline_json(self):
        config = parse_config('{"t": 4, "N": 100, "problem": %s}' % json.dumps(POWER_PROBLEM))
        assert config.t == 4.0 and config.N == 100
        assert config.problem.family == "power"

    def test_parse_error_reports_line(self):
        with pytest.raises(ConfigParseException) as exc:
            parse_config('{\n  "N": 10,\n}')
        assert exc.value.code == "CONFIG_PARSE_ERROR"
        assert exc.value.details['line'] == 3

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1]", encoding='utf-8')
        with pytest.raises(ConfigParseException) as exc:
            parse_config(str(path))
        assert exc.value.code == "CONFIG_NOT_OBJECT"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigParseException) as exc:
            parse_config(str(tmp_path / "absent.json"))
        assert exc.value.code == "CONFIG_UNREADABLE"

    def test_path_object(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"trials": 7}', encoding='utf-8')
        assert parse_config(path).trials == 7

    def test_serialize_round_trip(self):
        config = validate_config({
            "problem": {"family": "plateau", "k": 2, "sigma": 1.0, "eps": 0.01, "p": 12, "alpha_star": 1.0},
            "filter": "gd:0.1",
            "t": 5,
            "N_grid": [100, 200],
            "t_interval": {"lo": 1, "hi": 100, "points": 16},
            "box": 0.05,
            "master_seed": 2 ** 63,
        })
        assert parse_config(serialize_config(config)) == config

    def test_file_referenced_problem(self, tmp_path, small_problem):
        path = tmp_path / "problem.json"
        save_problem(small_problem, path)
        config = parse_config(json.dumps({"problem": {"file": str(path)}, "t": 5}))
        problem = build_problem(config.problem)
        assert problem.p == 4
        assert problem.noise_std == small_problem.noise_std

    def test_exceptions_are_serializable(self):
        with pytest.raises(FSDException) as exc:
            parse_config('{"tt": 1}')
        data = exc.value.to_dict()
        assert data['code'] == "CONFIG_UNKNOWN_KEY"
        assert data['type'] == "ConfigValidationException"
        json.dumps(data)


CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"


class TestExampleConfigs:
    """configs/ 下的示例配置都能通过校验"""

    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_example_config_is_valid(self, path):
        config = parse_config(path)
        if config.problem is not None:
            assert build_problem(config.problem).p >= 1
