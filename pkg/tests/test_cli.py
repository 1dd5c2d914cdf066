"""
Тесты командной строки: подкоманды, форматы вывода и коды выхода
"""
import csv
import json
import os
import sys

import pytest

# Добавить корневую директорию в путь
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import main
from handlers.witness import WITNESS_COLUMNS
from services.errors import InvariantViolation


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_seq_gen_json(capsys):
    """Тест seq gen в JSON на stdout"""
    code = main.run(["seq", "gen", "--kind", "nested-canonical", "--count", "3"])
    assert code == main.EXIT_OK
    data = _json_out(capsys)
    assert data["schema_version"] == 1
    assert [t["value"] for t in data["terms"]] == [5, 21, 85]
    assert data["terms"][0]["exponents"] == [0, 2]


def test_seq_gen_csv_to_file(tmp_path, capsys):
    """Тест seq gen в CSV-файл; сводка проверок уходит в stdout"""
    out = tmp_path / "seq.csv"
    code = main.run(["seq", "gen", "--count", "2", "--format", "csv", "--out", str(out)])
    assert code == main.EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "k,value,variation,exponents"
    assert lines[1] == "1,5,4,0;2"
    assert "no checks recorded" in capsys.readouterr().out


def test_seq_gen_config_file(tmp_path, capsys):
    """Тест --config: флаги важнее файла"""
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"kind": "powers-of-two", "count": 2}))
    code = main.run(["seq", "gen", "--config", str(path), "--count", "3"])
    assert code == main.EXIT_OK
    assert [t["value"] for t in _json_out(capsys)["terms"]] == [2, 4, 8]


def test_seq_classify(capsys):
    """Тест seq classify"""
    code = main.run(["seq", "classify", "--terms", "5,21,85", "--compare", "6,20,90"])
    assert code == main.EXIT_OK
    report = _json_out(capsys)["report"]
    assert report["nested"] is True
    assert report["variation_profile"] == [4, 6, 8]
    assert report["close_bound"] == 5


def test_kernel(capsys):
    """Тест таблицы ядер"""
    code = main.run(["kernel", "--n-max", "64"])
    assert code == main.EXIT_OK
    rows = _json_out(capsys)["rows"]
    assert len(rows) == 64
    assert rows[4]["norm"] == "7/4"
    assert all(r["lower_ok"] and r["upper_ok"] for r in rows)


def test_lemma1_small_level(capsys):
    """Тест lemma1 для n_1 = 1"""
    code = main.run(["lemma1", "--seq", "nested-canonical-from-zero", "--nu", "1"])
    assert code == main.EXIT_OK
    data = _json_out(capsys)
    assert [b["delta_exponents"] for b in data["branches"]] == [[2], [2, 4]]
    assert data["deg_Q"] == 20
    assert data["E"]["cell_measures"] == ["1/2", "1/2"]
    assert data["orlicz_bound"]["linear"] == {"lhs": 1, "rhs": 1}
    assert data["checks"]["spectrum_localized"] == "pass"


def test_lemma1_csv(tmp_path):
    """Тест CSV-таблицы ветвей"""
    out = tmp_path / "lemma1.csv"
    code = main.run(["lemma1", "--seq", "nested-canonical-from-zero", "--format", "csv", "--out", str(out)])
    assert code == main.EXIT_OK
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["branch"] for r in rows] == ["A", "A"]
    assert [r["upper_cut"] for r in rows] == ["5", "21"]
    assert rows[0]["E_measure"] == "1/2"


def test_lemma1_prefix_too_short():
    """Тест: короткий явный префикс — ошибка предусловия, код 2"""
    assert main.run(["lemma1", "--terms", "5,21"]) == main.EXIT_CONFIG


def test_witness_csv(tmp_path):
    """Тест witness: заголовок CSV и прохождение проверки"""
    out = tmp_path / "witness.csv"
    code = main.run([
        "witness", "--horizon", "1", "--samples", "300", "--seed", "1",
        "--format", "csv", "--out", str(out),
    ])
    assert code == main.EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(WITNESS_COLUMNS)
    assert len(lines) > 1
    assert all(line.endswith(",true") for line in lines[1:])


def test_witness_reports_hit_fraction(capsys):
    """Тест доли точек с достигнутым порогом в JSON и в сводке проверок"""
    code = main.run(["witness", "--horizon", "1", "--samples", "200", "--seed", "3"])
    assert code == main.EXIT_OK
    captured = capsys.readouterr()
    report = json.loads(captured.out)["report"]
    assert report["hits"] == 200
    assert report["hit_fraction"] == 1
    assert report["flat_max"] == "0.0"
    assert "witness_hits" in captured.err


def test_phi(capsys):
    """Тест phi по пяти узлам"""
    code = main.run(["phi", "--knots", "5"])
    assert code == main.EXIT_OK
    data = _json_out(capsys)
    assert data["exponents"] == [10, 42, 170, 682, 2730]
    assert data["report"]["delta2"] is True


def test_phi_delta2_bound_fails(capsys):
    """Тест: Δ2-константа выше границы — код 1"""
    code = main.run(["phi", "--knots", "5", "--delta2-bound", "2"])
    assert code == main.EXIT_FAILED
    assert "FAIL delta2" in capsys.readouterr().err


def test_relocate(capsys):
    """Тест relocate для плана из одного уровня"""
    code = main.run(["relocate", "--horizon", "1", "--count", "5", "--seed", "2"])
    assert code == main.EXIT_OK
    data = _json_out(capsys)
    assert len(data["relocations"]) == 5
    assert all(r["support_min"] > 85 and r["support_max"] <= 341 for r in data["relocations"])


@pytest.mark.parametrize("argv", [
    ["witness", "--horizon", "1", "--samples", "300", "--seed", "4", "--format", "csv"],
    ["witness", "--horizon", "1", "--samples", "300", "--seed", "4", "--format", "json"],
    ["lemma1", "--seq", "nested-canonical-from-zero", "--nu", "1"],
    ["relocate", "--horizon", "1", "--count", "5", "--seed", "2"],
])
def test_runs_are_byte_identical(argv, tmp_path):
    """Тест: два запуска с одинаковыми флагами пишут одинаковые байты"""
    first, second = tmp_path / "first.out", tmp_path / "second.out"
    assert main.run(argv + ["--out", str(first)]) == main.EXIT_OK
    assert main.run(argv + ["--out", str(second)]) == main.EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_invalid_flags_exit_2(capsys):
    """Тест некорректной конфигурации — код 2"""
    assert main.run(["lemma1", "--seq", "nested-canonical", "--terms", "1,5"]) == main.EXIT_CONFIG
    assert "Invalid configuration" in capsys.readouterr().err
    assert main.run(["kernel", "--n-max", "4", "--config", "/nonexistent/run.json"]) == main.EXIT_CONFIG


def test_invariant_violation_exit_1(monkeypatch):
    """Тест: нарушение инварианта — код 1"""
    def broken(cfg):
        raise InvariantViolation("spectrum_localized", "stray coefficient")

    monkeypatch.setitem(main.HANDLERS, "kernel", broken)
    assert main.run(["kernel", "--n-max", "4"]) == main.EXIT_FAILED


def test_unknown_subcommand():
    """Тест неизвестной подкоманды: argparse завершает процесс"""
    with pytest.raises(SystemExit):
        main.run(["plot"])
