import csv
import json

import jsonschema
import pytest

from iegs_attack.cli import main, schema
from iegs_attack.instance import FIXTURE_DIR, dump_instance, instance_to_dict, load_instance
from iegs_attack.oracle import MAX_R

TWO_BUS = str(FIXTURE_DIR / "two-bus.json")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_validate(capsys):
    assert main(["validate", TWO_BUS]) == 0
    assert "two-bus: ok" in capsys.readouterr().out


def test_solve_writes_outputs(tmp_path):
    assert main(["solve", TWO_BUS, "--out", str(tmp_path)]) == 0
    for name in ("report.json", "iterations.csv", "attack.csv", "dispatch.csv"):
        assert (tmp_path / name).exists()
    doc = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(doc, schema())
    assert doc["objective"] == pytest.approx(2155.0)
    assert doc["realized"]["realized_cost"] == pytest.approx(2050.0)
    attack = {r["measurement"]: float(r["delta"]) for r in read_csv(tmp_path / "attack.csv")}
    assert attack["dp[PL1]"] == pytest.approx(-1.05)
    assert attack["dp_line[L1]"] == pytest.approx(1.05)


def test_solve_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", TWO_BUS, "--out", str(a)]) == 0
    assert main(["solve", TWO_BUS, "--out", str(b)]) == 0
    for name in ("report.json", "iterations.csv", "attack.csv", "dispatch.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_timings_flag_adds_columns(tmp_path):
    assert main(["solve", TWO_BUS, "--out", str(tmp_path), "--timings"]) == 0
    assert "seconds" in (tmp_path / "iterations.csv").read_text().splitlines()[0]
    doc = json.loads((tmp_path / "report.json").read_text())
    assert "generated_at" in doc["metadata"]
    jsonschema.validate(doc, schema())


def test_flag_overrides_file(tmp_path):
    assert main(["solve", TWO_BUS, "--tau-p", "0.1", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["objective"] == pytest.approx(697.0)


def test_iteration_cap_exit_code(tmp_path):
    assert main(["solve", TWO_BUS, "--max-iter", "1", "--out", str(tmp_path)]) == 2


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    assert "not found" in capsys.readouterr().err


def test_invalid_instance_exit_code(tmp_path, two_bus):
    d = instance_to_dict(two_bus)
    d["power"]["loads"][0]["node"] = "9"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    assert main(["validate", str(path)]) == 1


def test_bad_flag_value(tmp_path):
    assert main(["solve", TWO_BUS, "--rho", "-3", "--out", str(tmp_path)]) == 1


def test_oracle_cap_exit_code(tmp_path, two_bus):
    d = instance_to_dict(two_bus)
    gens = d["power"]["generators"]
    for k in range(MAX_R):
        gens.append({**gens[1], "id": f"X{k}", "p_min": 0.0})
    path = tmp_path / "big.json"
    path.write_text(dump_instance(load_instance(d)))
    assert main(["oracle", str(path), "--out", str(tmp_path)]) == 3


def test_classify_z(tmp_path):
    assert main(["classify-z", TWO_BUS, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "classify-z.csv")
    assert [(r["z"], r["oracle"], r["sp2"]) for r in rows] == [
        ("00", "mu", "mu"),
        ("01", "mu", "mu"),
        ("10", "nu", "nu"),
        ("11", "nu", "nu"),
    ]


def test_compare(tmp_path):
    assert main(["compare", TWO_BUS, "--points", "41", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "compare.csv")
    assert [r["method"] for r in rows] == ["M-R&D", "fixed-commitment", "U-R&D", "oracle"]
    assert list(rows[0]) == ["method", "objective", "iterations", "status", "dp[PL1]", "dp[PL2]"]
    vals = {r["method"]: float(r["objective"]) for r in rows}
    assert vals["M-R&D"] == pytest.approx(vals["oracle"])
    assert vals["U-R&D"] <= vals["M-R&D"] + 1e-6


def test_oracle_outputs(tmp_path):
    assert main(["oracle", TWO_BUS, "--points", "21", "--out", str(tmp_path)]) == 0
    assert len(read_csv(tmp_path / "oracle-classification.csv")) == 4
    assert len(read_csv(tmp_path / "oracle-trace.csv")) >= 21


def test_pwl_report(tmp_path):
    assert main(["pwl-report", "--limit", "4", "--segments", "8", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "pwl-report.csv")
    assert len(rows) == 8
    assert all(float(r["breakpoint_error"]) == 0.0 for r in rows)


def test_pwl_report_needs_input(tmp_path):
    assert main(["pwl-report", "--out", str(tmp_path)]) == 1
    assert main(["pwl-report", "--limit", "4", "--segments", "3", "--out", str(tmp_path)]) == 1


def test_sweep(tmp_path):
    assert main(["sweep", TWO_BUS, "--tau-p-list", "0,0.3", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 4
    om = [float(r["objective"]) for r in rows if r["method"] == "M-R&D"]
    assert om == pytest.approx([690.0, 2155.0])
