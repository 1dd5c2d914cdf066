"""
Точка входа: разбор аргументов, запуск подкоманды, коды выхода
"""
import argparse
import logging
import sys
from typing import List, Optional

try:
    import config
except ValueError as e:
    print(f"❌ {e}", file=sys.stderr)
    sys.exit(2)

from pydantic import ValidationError

from handlers import kernel, lemma1, phi, relocate, seq, witness
from services.dyadic import SEQUENCE_KINDS
from services.errors import ConfigError, InvariantViolation, PreconditionError
from services.metrics import metrics
from utils.helpers import format_summary


EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

HANDLERS = {
    "seq gen": seq.handle_gen,
    "seq classify": seq.handle_classify,
    "kernel": kernel.handle,
    "lemma1": lemma1.handle,
    "witness": witness.handle,
    "phi": phi.handle,
    "relocate": relocate.handle,
}

# аргументы argparse, которые не переходят в RunConfig
_PARSER_ONLY = ("command", "seq_command", "config", "format")

logger = logging.getLogger(__name__)


def _int_list(raw: str) -> List[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{raw}'")


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON-файл с параметрами (флаги важнее)")
    parser.add_argument("--format", choices=("csv", "json"), default=None, help="формат вывода")
    parser.add_argument("--grid-cap-log2", dest="grid_cap_log2", type=int, default=None)
    parser.add_argument("--out", default=None, help="файл результата (по умолчанию stdout)")


def _sequence(parser: argparse.ArgumentParser):
    parser.add_argument("--seq", choices=SEQUENCE_KINDS, default=None)
    parser.add_argument("--terms", type=_int_list, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="walsh-lab", description="Расходимость рядов Уолша–Фурье по подпоследовательностям")
    sub = parser.add_subparsers(dest="command", required=True)

    seq_parser = sub.add_parser("seq", help="генерация и классификация последовательностей")
    seq_sub = seq_parser.add_subparsers(dest="seq_command", required=True)
    gen = seq_sub.add_parser("gen")
    gen.add_argument("--kind", choices=SEQUENCE_KINDS, default=None)
    gen.add_argument("--count", type=int, default=None)
    _common(gen)
    classify = seq_sub.add_parser("classify")
    classify.add_argument("--terms", type=_int_list, required=True)
    classify.add_argument("--compare", type=_int_list, default=None)
    _common(classify)

    kern = sub.add_parser("kernel", help="таблица норм ядер Дирихле")
    kern.add_argument("--n-max", dest="n_max", type=int, required=True)
    kern.add_argument("--resolution", type=int, default=None)
    _common(kern)

    lem = sub.add_parser("lemma1", help="построение P_ν и E_ν")
    _sequence(lem)
    lem.add_argument("--nu", type=int, default=None)
    lem.add_argument("--samples", type=int, default=None)
    lem.add_argument("--seed", type=int, default=None)
    _common(lem)

    wit = sub.add_parser("witness", help="план уровней и проверка f*_J")
    _sequence(wit)
    wit.add_argument("--horizon", type=int, default=None)
    wit.add_argument("--samples", type=int, default=None)
    wit.add_argument("--seed", type=int, default=None)
    wit.add_argument("--phi-slope", dest="phi_slope", type=int, default=None)
    _common(wit)

    ph = sub.add_parser("phi", help="свойства φ_(n_k)")
    _sequence(ph)
    ph.add_argument("--knots", type=int, default=None)
    ph.add_argument("--delta2-bound", dest="delta2_bound", type=int, default=None)
    _common(ph)

    rel = sub.add_parser("relocate", help="перенос спектров в зазоры плана")
    _sequence(rel)
    rel.add_argument("--horizon", type=int, default=None)
    rel.add_argument("--count", type=int, default=None)
    rel.add_argument("--seed", type=int, default=None)
    _common(rel)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Выполнить одну подкоманду и вернуть код выхода"""
    args = build_parser().parse_args(argv)
    command = f"seq {args.seq_command}" if args.command == "seq" else args.command
    flags = {k: v for k, v in vars(args).items() if k not in _PARSER_ONLY}
    flags["output_format"] = args.format

    try:
        cfg = config.load_run_config(command, flags, args.config)
    except (ConfigError, ValidationError) as e:
        print(f"❌ Invalid configuration:\n{e}", file=sys.stderr)
        return EXIT_CONFIG

    metrics.reset()
    logger.info(f"Running {command}")
    try:
        ok = HANDLERS[command](cfg)
    except InvariantViolation as e:
        logger.error(f"🚨 Invariant violated: {e}")
        _print_summary(cfg.out)
        return EXIT_FAILED
    except PreconditionError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CONFIG

    for stage, seconds in metrics.durations().items():
        logger.info(f"⏱ {stage}: {seconds:.3f}s")
    _print_summary(cfg.out)
    if not ok or not metrics.all_passed():
        for verdict in metrics.failed_checks():
            print(f"FAIL {verdict.tag}: {verdict.detail or verdict.value}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def _print_summary(out: Optional[str]):
    # без --out stdout занят результатом
    stream = sys.stdout if out else sys.stderr
    print(format_summary(metrics.summary_rows()), end="", file=stream)


def main():
    logging.basicConfig(
        level=getattr(logging, config.WALSH_LOG_LEVEL, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    sys.exit(run())


if __name__ == "__main__":
    main()
