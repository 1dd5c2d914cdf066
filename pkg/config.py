"""
Конфигурация вычислений с валидацией
"""
import json
import os
import sys
from typing import ClassVar, List, Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, model_validator

from services.dyadic import NESTED_CANONICAL, NESTED_CANONICAL_FROM_ZERO, SEQUENCE_KINDS
from services.errors import ConfigError

load_dotenv()

# Ошибки разбора переменных окружения (сообщаются в validate_config)
_PARSE_ERRORS: List[str] = []


def _env_int(name: str, default: int) -> int:
    """Целое из окружения; некорректное значение заменяется default с записью ошибки"""
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        print(f"⚠️ WARNING: Invalid {name} '{raw}' (not an integer), using {default}", file=sys.stderr)
        _PARSE_ERRORS.append(f"{name} must be an integer, got '{raw}'")
        return default


# Сетки и выборка
WALSH_GRID_CAP_LOG2 = _env_int("WALSH_GRID_CAP_LOG2", 22)  # плотные сетки до 2^22 ячеек
WALSH_FACTOR_CAP_LOG2 = _env_int("WALSH_FACTOR_CAP_LOG2", 16)  # до 2^16 множителей в P_ν
WALSH_SAMPLE_COUNT = _env_int("WALSH_SAMPLE_COUNT", 10000)
WALSH_SEED = _env_int("WALSH_SEED", 0)
WALSH_HORIZON = _env_int("WALSH_HORIZON", 2)

# Последовательности и φ
WALSH_PREFIX_LENGTH = _env_int("WALSH_PREFIX_LENGTH", 64)
WALSH_EXACT_GAP_BITS = _env_int("WALSH_EXACT_GAP_BITS", 4096)
WALSH_DELTA2_BOUND = _env_int("WALSH_DELTA2_BOUND", 3)
WALSH_LEMMA4_SEGMENTS = _env_int("WALSH_LEMMA4_SEGMENTS", 64)

# Вывод и логирование
WALSH_OUTPUT_FORMAT = os.getenv("WALSH_OUTPUT_FORMAT", "json").strip().lower()
WALSH_LOG_LEVEL = os.getenv("WALSH_LOG_LEVEL", "INFO").strip().upper()

SCHEMA_VERSION = 1


def validate_config():
    """
    Валидация конфигурации при запуске.
    Выбрасывает исключение если параметры некорректны.
    """
    errors = list(_PARSE_ERRORS)

    if not 4 <= WALSH_GRID_CAP_LOG2 <= 30:
        errors.append(f"WALSH_GRID_CAP_LOG2 must be in [4, 30], got {WALSH_GRID_CAP_LOG2}")
    if not 1 <= WALSH_FACTOR_CAP_LOG2 <= 20:
        errors.append(f"WALSH_FACTOR_CAP_LOG2 must be in [1, 20], got {WALSH_FACTOR_CAP_LOG2}")
    if WALSH_SAMPLE_COUNT < 1:
        errors.append(f"WALSH_SAMPLE_COUNT must be positive, got {WALSH_SAMPLE_COUNT}")
    if WALSH_SEED < 0:
        errors.append(f"WALSH_SEED must be non-negative, got {WALSH_SEED}")
    if WALSH_HORIZON < 1:
        errors.append(f"WALSH_HORIZON must be at least 1, got {WALSH_HORIZON}")
    if WALSH_PREFIX_LENGTH < 2:
        errors.append(f"WALSH_PREFIX_LENGTH must be at least 2, got {WALSH_PREFIX_LENGTH}")
    if WALSH_EXACT_GAP_BITS < 1:
        errors.append(f"WALSH_EXACT_GAP_BITS must be positive, got {WALSH_EXACT_GAP_BITS}")
    if WALSH_DELTA2_BOUND < 2:
        errors.append(f"WALSH_DELTA2_BOUND must be at least 2, got {WALSH_DELTA2_BOUND}")
    if WALSH_LEMMA4_SEGMENTS < 2:
        errors.append(f"WALSH_LEMMA4_SEGMENTS must be at least 2, got {WALSH_LEMMA4_SEGMENTS}")

    if WALSH_OUTPUT_FORMAT not in ("csv", "json"):
        errors.append(f"WALSH_OUTPUT_FORMAT must be 'csv' or 'json', got '{WALSH_OUTPUT_FORMAT}'")
    if WALSH_LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        errors.append(f"WALSH_LOG_LEVEL must be DEBUG, INFO, WARNING or ERROR, got '{WALSH_LOG_LEVEL}'")

    # Предупреждение: 10^4 точек на 2^N ячеек дают грубые оценки мер
    if WALSH_SAMPLE_COUNT < 1000:
        print("⚠️ WARNING: WALSH_SAMPLE_COUNT below 1000, sampled E-measures will be coarse", file=sys.stderr)

    if errors:
        error_msg = "Configuration validation failed:\n" + "\n".join(f"  - {err}" for err in errors)
        raise ValueError(error_msg)


# ==================== RUN CONFIG ====================

class RunConfig(BaseModel):
    """Общие параметры запуска подкоманды"""
    model_config = ConfigDict(extra="forbid")

    command: str
    output_format: Literal["csv", "json"] = Field(default_factory=lambda: WALSH_OUTPUT_FORMAT)
    grid_cap_log2: int = Field(default_factory=lambda: WALSH_GRID_CAP_LOG2, ge=4, le=30)
    out: Optional[str] = None


class SequenceConfig(RunConfig):
    """Источник последовательности: именованное правило или явные члены"""
    default_seq: ClassVar[str] = NESTED_CANONICAL

    seq: Optional[str] = None
    terms: Optional[List[int]] = None

    @model_validator(mode="after")
    def _one_source(self):
        if self.seq is not None and self.terms is not None:
            raise ValueError("give either seq or terms, not both")
        if self.terms is None and self.seq is None:
            self.seq = self.default_seq
        if self.seq is not None and self.seq not in SEQUENCE_KINDS:
            raise ValueError(f"unknown sequence kind '{self.seq}'")
        if self.terms is not None and any(t < 0 for t in self.terms):
            raise ValueError("sequence terms must be non-negative")
        return self


class SeqGenConfig(RunConfig):
    kind: str = NESTED_CANONICAL
    count: int = Field(5, ge=1, le=4096)

    @model_validator(mode="after")
    def _known_kind(self):
        if self.kind not in SEQUENCE_KINDS:
            raise ValueError(f"unknown sequence kind '{self.kind}'")
        return self


class SeqClassifyConfig(RunConfig):
    terms: List[int] = Field(min_length=2)
    compare: Optional[List[int]] = None


class KernelConfig(RunConfig):
    n_max: int = Field(ge=1, le=1 << 20)
    resolution: Optional[int] = Field(None, ge=1, le=30)


class Lemma1Config(SequenceConfig):
    nu: int = Field(1, ge=1)
    samples: int = Field(default_factory=lambda: WALSH_SAMPLE_COUNT, ge=1)
    seed: int = Field(default_factory=lambda: WALSH_SEED, ge=0)


class WitnessConfig(SequenceConfig):
    # канонический план из двух уровней не помещается в пределы
    default_seq: ClassVar[str] = NESTED_CANONICAL_FROM_ZERO

    horizon: int = Field(default_factory=lambda: WALSH_HORIZON, ge=1)
    samples: int = Field(default_factory=lambda: WALSH_SAMPLE_COUNT, ge=1)
    seed: int = Field(default_factory=lambda: WALSH_SEED, ge=0)
    phi_slope: int = Field(1, ge=1)


class PhiConfig(SequenceConfig):
    knots: int = Field(20, ge=2)
    delta2_bound: int = Field(default_factory=lambda: WALSH_DELTA2_BOUND, ge=2)


class RelocateConfig(SequenceConfig):
    default_seq: ClassVar[str] = NESTED_CANONICAL_FROM_ZERO

    horizon: int = Field(default_factory=lambda: WALSH_HORIZON, ge=1)
    count: int = Field(100, ge=1)
    seed: int = Field(default_factory=lambda: WALSH_SEED, ge=0)


COMMAND_MODELS = {
    "seq gen": SeqGenConfig,
    "seq classify": SeqClassifyConfig,
    "kernel": KernelConfig,
    "lemma1": Lemma1Config,
    "witness": WitnessConfig,
    "phi": PhiConfig,
    "relocate": RelocateConfig,
}


def load_run_config(command: str, flags: dict, config_path: Optional[str] = None) -> RunConfig:
    """
    Собрать RunConfig: JSON-файл, поверх него флаги (флаги важнее)

    Raises:
        ConfigError: Файл не читается или неизвестная команда
        pydantic.ValidationError: Параметры некорректны
    """
    model = COMMAND_MODELS.get(command)
    if model is None:
        raise ConfigError(f"unknown command '{command}'")

    merged = {}
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config file {config_path}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {config_path} must hold a JSON object")
        merged.update(loaded)
    merged.update({k: v for k, v in flags.items() if v is not None})
    merged["command"] = command
    return model.model_validate(merged)


# Автоматическая валидация при импорте (можно отключить для тестов)
if os.getenv("SKIP_CONFIG_VALIDATION") != "1":
    validate_config()
