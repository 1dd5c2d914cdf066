"""
Unit-тесты для валидации конфигурации
"""
import importlib
import json
import os
import sys

import pytest
from pydantic import ValidationError
from unittest.mock import patch

# Добавить корневую директорию в путь
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import config
from services.errors import ConfigError


@pytest.fixture(autouse=True)
def restore_config():
    """Перезагрузить config с чистым окружением после теста"""
    yield
    with patch.dict(os.environ, {"SKIP_CONFIG_VALIDATION": "1"}, clear=True):
        importlib.reload(config)


def _reload(env: dict):
    env = {"SKIP_CONFIG_VALIDATION": "1", **env}
    with patch.dict(os.environ, env, clear=True):
        return importlib.reload(config)


def test_defaults():
    """Тест значений по умолчанию"""
    cfg = _reload({})
    assert cfg.WALSH_GRID_CAP_LOG2 == 22
    assert cfg.WALSH_FACTOR_CAP_LOG2 == 16
    assert cfg.WALSH_SAMPLE_COUNT == 10000
    assert cfg.WALSH_SEED == 0
    assert cfg.WALSH_HORIZON == 2
    assert cfg.WALSH_OUTPUT_FORMAT == "json"
    cfg.validate_config()


def test_env_override():
    """Тест переопределения из окружения"""
    cfg = _reload({"WALSH_SEED": "42", "WALSH_OUTPUT_FORMAT": " CSV "})
    assert cfg.WALSH_SEED == 42
    assert cfg.WALSH_OUTPUT_FORMAT == "csv"


def test_invalid_integer_falls_back_and_fails_validation():
    """Тест некорректного целого: значение по умолчанию и ошибка валидации"""
    cfg = _reload({"WALSH_SEED": "abc"})
    assert cfg.WALSH_SEED == 0
    with pytest.raises(ValueError, match="WALSH_SEED must be an integer"):
        cfg.validate_config()


def test_grid_cap_out_of_range():
    """Тест предела сетки вне [4, 30]"""
    cfg = _reload({"WALSH_GRID_CAP_LOG2": "40"})
    with pytest.raises(ValueError, match="WALSH_GRID_CAP_LOG2 must be in"):
        cfg.validate_config()


def test_bad_output_format():
    """Тест неизвестного формата вывода"""
    cfg = _reload({"WALSH_OUTPUT_FORMAT": "xml"})
    with pytest.raises(ValueError, match="WALSH_OUTPUT_FORMAT"):
        cfg.validate_config()


def test_all_errors_collected():
    """Тест: все ошибки собираются в одно сообщение"""
    cfg = _reload({"WALSH_HORIZON": "0", "WALSH_DELTA2_BOUND": "1", "WALSH_LOG_LEVEL": "LOUD"})
    with pytest.raises(ValueError) as exc:
        cfg.validate_config()
    message = str(exc.value)
    assert message.startswith("Configuration validation failed:")
    assert "WALSH_HORIZON" in message
    assert "WALSH_DELTA2_BOUND" in message
    assert "WALSH_LOG_LEVEL" in message


def test_low_sample_count_warns(capsys):
    """Тест предупреждения о малой выборке"""
    cfg = _reload({"WALSH_SAMPLE_COUNT": "500"})
    cfg.validate_config()
    assert "below 1000" in capsys.readouterr().err


def test_import_validation_raises():
    """Тест автоматической валидации при импорте"""
    with patch.dict(os.environ, {"WALSH_FACTOR_CAP_LOG2": "0"}, clear=True):
        with pytest.raises(ValueError, match="WALSH_FACTOR_CAP_LOG2"):
            importlib.reload(config)


# ==================== RUN CONFIG ====================

def test_run_config_flags_override_file(tmp_path):
    """Тест: флаги важнее JSON-файла"""
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"kind": "powers-of-two", "count": 2}))
    cfg = config.load_run_config("seq gen", {"count": 3}, str(path))
    assert cfg.kind == "powers-of-two"
    assert cfg.count == 3
    assert cfg.command == "seq gen"


def test_run_config_default_sequences():
    """Тест последовательностей по умолчанию"""
    assert config.load_run_config("lemma1", {}).seq == "nested-canonical"
    assert config.load_run_config("witness", {}).seq == "nested-canonical-from-zero"
    assert config.load_run_config("relocate", {}).seq == "nested-canonical-from-zero"
    assert config.load_run_config("lemma1", {"terms": [1, 5, 21]}).seq is None


def test_run_config_rejects_both_sources():
    """Тест отказа при одновременных seq и terms"""
    with pytest.raises(ValidationError, match="either seq or terms"):
        config.load_run_config("lemma1", {"seq": "nested-canonical", "terms": [5, 21]})


def test_run_config_rejects_unknown_keys_and_ranges():
    """Тест лишних ключей и выхода за диапазон"""
    with pytest.raises(ValidationError):
        config.load_run_config("kernel", {"n_max": 8, "colour": "red"})
    with pytest.raises(ValidationError):
        config.load_run_config("kernel", {"n_max": 0})
    with pytest.raises(ValidationError):
        config.load_run_config("lemma1", {"grid_cap_log2": 2})
    with pytest.raises(ValidationError, match="unknown sequence kind"):
        config.load_run_config("phi", {"seq": "fibonacci"})


def test_run_config_file_errors(tmp_path):
    """Тест нечитаемого файла и неизвестной команды"""
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError, match="cannot read config file"):
        config.load_run_config("kernel", {"n_max": 4}, str(broken))
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        config.load_run_config("kernel", {"n_max": 4}, str(listing))
    with pytest.raises(ConfigError, match="unknown command"):
        config.load_run_config("plot", {})
