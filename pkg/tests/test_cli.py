import json

import pytest

from crashrecon.casefile import (
    REPORT_COLUMNS,
    CaseFileError,
    load_cases,
    load_truths,
    read_report,
    write_report,
)
from crashrecon.cli import main
from crashrecon.counterfactual import CounterfactualReport
from crashrecon.sampler import Summary

FAST = ["--chains", "2", "--iters", "2000", "--burnin", "500", "--thin", "2"]


def write_cases(path, cases, **extra):
    path.write_text(json.dumps({"cases": cases, **extra}))
    return path


def test_load_single_case(tmp_path):
    p = write_cases(tmp_path / "c.json",
                    [{"id": "c1", "speed_limit_kmh": 60, "measurements": {"s1_m": 23.44}}])
    (case,) = load_cases(p)
    assert case.id == "c1" and case.s1_m == 23.44 and case.severity is None


@pytest.mark.parametrize("case, msg", [
    ({"id": "c1", "measurements": {"severity": "catastrophic"}}, "severity"),
    ({"id": "c1", "measurements": {}}, "at least one measurement"),
    ({"id": "c1", "measurements": {"s1": 20.0}}, "unknown"),
    ({"id": "c1", "measurements": {"s1_m": -2.0}}, "positive"),
    ({"id": "c1", "speed_limit": 60, "measurements": {"s1_m": 2.0}}, "unknown"),
])
def test_load_rejects(tmp_path, case, msg):
    p = write_cases(tmp_path / "c.json", [case])
    with pytest.raises(CaseFileError, match=msg) as exc:
        load_cases(p)
    assert "c1" in str(exc.value)


def test_parse_error_has_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"cases": [\n  {"id": "c1",,}\n]}')
    with pytest.raises(CaseFileError, match="line 2"):
        load_cases(p)


def _report(cid, pn):
    s = Summary(50.0, 5.0, 40.0, 50.0, 60.0)
    return CounterfactualReport(cid, 0.5, pn, s, s, 70.0, 10.0, 3, 1.01)


def test_report_total_line(tmp_path):
    pns = (0.45, 0.76, 0.65, 0.43, 0.55, 0.29, 0.63, 0.03)
    write_report(tmp_path / "r.csv", [_report(f"k{i}", p) for i, p in enumerate(pns)])
    rows = read_report(tmp_path / "r.csv")
    assert len(rows) == 9
    assert tuple(rows[0].keys()) == REPORT_COLUMNS
    assert rows[-1]["case_id"] == "TOTAL"
    assert float(rows[-1]["pn"]) == pytest.approx(3.79, abs=1e-6)


def test_report_flags_nonconverged(tmp_path):
    r = CounterfactualReport("k", 0.5, 0.5, Summary(1, 1, 1, 1, 1), Summary(1, 1, 1, 1, 1),
                             n_chains=3, psrf_max=1.3)
    write_report(tmp_path / "r.csv", [r], failures={"z": "boom"}, order=["z", "k"])
    rows = read_report(tmp_path / "r.csv")
    assert rows[0]["case_id"] == "z" and rows[0]["status"].startswith("failed")
    assert rows[1]["status"] == "nonconverged"


def test_simulate_round_trip(tmp_path):
    assert main(["simulate", "--n", "5", "--seed", "9", "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--n", "5", "--seed", "9", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "fixtures.json").read_bytes()
    assert a == (tmp_path / "b" / "fixtures.json").read_bytes()
    cases = load_cases(tmp_path / "a" / "fixtures.json")
    truths = load_truths(tmp_path / "a" / "fixtures.json")
    assert len(cases) == 5 and all(c.has_measurements for c in cases)
    assert all(truths[c.id].vi > 0 for c in cases)


def test_reconstruct_deterministic(tmp_path):
    p = write_cases(tmp_path / "c.json", [
        {"id": "a", "speed_limit_kmh": 60, "measurements": {"s1_m": 30.0, "throw_m": 15.0}},
        {"id": "b", "speed_limit_kmh": 50, "measurements": {"s1_m": 20.0, "s2_m": 6.0,
                                                            "severity": "slight"}},
    ])
    for out in ("r1", "r2"):
        assert main(["reconstruct", "--cases", str(p), "--out", str(tmp_path / out),
                     "--seed", "4"] + FAST) == 0
    r1 = (tmp_path / "r1" / "report.csv").read_bytes()
    assert r1 == (tmp_path / "r2" / "report.csv").read_bytes()
    rows = read_report(tmp_path / "r1" / "report.csv")
    assert [r["case_id"] for r in rows] == ["a", "b", "TOTAL"]
    assert float(rows[-1]["pn"]) == pytest.approx(float(rows[0]["pn"]) + float(rows[1]["pn"]),
                                                  abs=2e-6)


def test_reconstruct_grid_mode(tmp_path):
    p = write_cases(tmp_path / "c.json",
                    [{"id": "a", "measurements": {"s1_m": 30.0, "throw_m": 15.0}}])
    assert main(["reconstruct", "--grid", "--cases", str(p), "--out", str(tmp_path)]) == 0
    (row, total) = read_report(tmp_path / "report.csv")
    assert row["n_chains"] == "0" and row["v_q025_kmh"] == "" and 0 <= float(row["pn"]) <= 1


def test_reconstruct_failed_case_exit_code(tmp_path):
    pri = tmp_path / "priors.json"
    pri.write_text(json.dumps({"v_range": [5, 6], "x_range": [200, 200]}))
    p = write_cases(tmp_path / "c.json", [{"id": "a", "measurements": {"throw_m": 10.0}}])
    code = main(["reconstruct", "--grid", "--cases", str(p), "--out", str(tmp_path),
                 "--priors", str(pri)])
    assert code == 1
    rows = read_report(tmp_path / "report.csv")
    assert rows[0]["status"].startswith("failed")


def test_config_errors_exit_2(tmp_path):
    assert main(["reconstruct", "--cases", str(tmp_path / "missing.json")]) == 2
    p = write_cases(tmp_path / "c.json", [{"id": "a", "measurements": {}}])
    assert main(["reconstruct", "--cases", str(p), "--out", str(tmp_path)]) == 2
    assert main(["reconstruct", "--cases", str(p), "--iters", "1001"]) == 2


def test_method1_and_diagnose(tmp_path):
    p = write_cases(tmp_path / "c.json", [
        {"id": "a", "measurements": {"s1_m": 23.44, "s2_m": 5.0}},
        {"id": "b", "measurements": {"throw_m": 10.0}},
    ])
    assert main(["method1", "--cases", str(p), "--out", str(tmp_path)]) == 1
    text = (tmp_path / "method1.csv").read_text().splitlines()
    assert text[1].startswith("a,73.4")
    assert "failed" in text[2]
    assert main(["diagnose", "--cases", str(p), "--out", str(tmp_path)] + FAST) == 0
    diag = (tmp_path / "diagnostics.csv").read_text()
    assert "a,v," in diag and "b,x," in diag
