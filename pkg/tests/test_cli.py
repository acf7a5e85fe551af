import hashlib
import json

import pytest

from bsnassure.cli import main
from bsnassure.mutations import mutate_for
from bsnassure.selftest import scenario_path
from bsnassure.trace import read_csv, write_csv


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def nominal_trace(work):
    out = work / "nominal.csv"
    assert main(["simulate", "--config", str(scenario_path("nominal_5")), "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def nominal_report(work, nominal_trace):
    out = work / "nominal.json"
    assert main(["verify", "--trace", str(nominal_trace), "--out", str(out)]) == 0
    return out


def test_simulate_prints_digest(work, capsys):
    out = work / "d.csv"
    assert main(["simulate", "--seed", "3", "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("config_digest=")
    assert out.stat().st_size > 0


def test_simulate_is_byte_identical(work):
    a, b = work / "a.csv", work / "b.csv"
    cfg = str(scenario_path("nominal_5"))
    main(["simulate", "--config", cfg, "--seed", "11", "--out", str(a)])
    main(["simulate", "--config", cfg, "--seed", "11", "--out", str(b)])
    assert digest(a) == digest(b)


def test_unknown_config_key(work, capsys):
    bad = work / "bad.json"
    bad.write_text(json.dumps({"num_sensor_nodes": 3, "warp_factor": 9}))
    assert main(["simulate", "--config", str(bad), "--out", str(work / "x.csv")]) == 2
    assert "warp_factor" in capsys.readouterr().err


def test_verify_nominal(nominal_report):
    doc = json.loads(nominal_report.read_text())
    assert [p["id"] for p in doc["properties"]] == [f"P{i}" for i in range(1, 11)]


def test_verify_single_property(work, nominal_trace):
    out = work / "p4.json"
    assert main(["verify", "--trace", str(nominal_trace), "--props", "P4", "--out", str(out)]) == 0
    assert [p["id"] for p in json.loads(out.read_text())["properties"]] == ["P4"]


def test_verify_range(work, nominal_trace):
    out = work / "range.json"
    assert main(["verify", "--trace", str(nominal_trace), "--props", "P2..P4",
                 "--out", str(out)]) == 0
    assert [p["id"] for p in json.loads(out.read_text())["properties"]] == ["P2", "P3", "P4"]


def test_verify_mutated_p3(work, nominal_trace):
    mutated, index = mutate_for(read_csv(nominal_trace), "P3")
    path = work / "p3.csv"
    write_csv(mutated, path)
    out = work / "p3.json"
    assert main(["verify", "--trace", str(path), "--props", "P3", "--out", str(out)]) == 1
    (p3,) = json.loads(out.read_text())["properties"]
    assert p3["verdict"] == "Violated" and p3["witness"]


@pytest.mark.parametrize("argv", [
    ["verify", "--trace", "/nonexistent.csv", "--out", "/tmp/x.json"],
    ["verify", "--props", "P11"],
    ["simulate"],
    [],
    ["launch"],
])
def test_usage_and_io_errors(argv, nominal_trace, work):
    if argv[:2] == ["verify", "--props"]:
        argv = ["verify", "--trace", str(nominal_trace), "--props", "P11",
                "--out", str(work / "e.json")]
    assert main(argv) == 2


def test_malformed_trace(work):
    bad = work / "bad.csv"
    bad.write_text("not,a,trace\n1,2\n")
    assert main(["verify", "--trace", str(bad), "--out", str(work / "e.json")]) == 2


def test_mine_nominal(work, nominal_trace, nominal_report, capsys):
    out = work / "knowledge.json"
    assert main(["mine", "--trace", str(nominal_trace), "--verdicts", str(nominal_report),
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["dissonances"] == []
    assert out.with_suffix(".txt").read_text()
    assert "0 dissonance" in capsys.readouterr().out


def test_mine_twenty_nodes(work):
    trace, report, out = work / "n20.csv", work / "n20.json", work / "n20k.json"
    main(["simulate", "--config", str(scenario_path("nodes_20")), "--out", str(trace)])
    assert main(["verify", "--trace", str(trace), "--out", str(report)]) == 1
    assert main(["mine", "--trace", str(trace), "--verdicts", str(report),
                 "--out", str(out)]) == 0
    assert any(d["property_id"] == "P2" for d in json.loads(out.read_text())["dissonances"])


def test_mine_is_byte_identical(work, nominal_trace, nominal_report):
    a, b = work / "k1.json", work / "k2.json"
    for out in (a, b):
        main(["mine", "--trace", str(nominal_trace), "--verdicts", str(nominal_report),
              "--out", str(out)])
    assert digest(a) == digest(b)


def test_mine_missing_cgm(work, nominal_trace, nominal_report):
    assert main(["mine", "--trace", str(nominal_trace), "--cgm", str(work / "none.json"),
                 "--verdicts", str(nominal_report), "--out", str(work / "k.json")]) == 2


def test_mine_digest_mismatch(work, nominal_trace, nominal_report, capsys):
    other = work / "other.csv"
    main(["simulate", "--seed", "99", "--out", str(other)])
    assert main(["mine", "--trace", str(other), "--verdicts", str(nominal_report),
                 "--out", str(work / "k.json")]) == 2
    assert "digest" in capsys.readouterr().err


def test_report_on_empty_inputs(work):
    assert main(["report", "--out", str(work / "r.md")]) == 2
    empty = work / "empty.json"
    empty.write_text("")
    assert main(["report", "--in", str(empty), "--out", str(work / "r.md")]) == 2


def test_report_tables_and_plots(work, nominal_trace, nominal_report):
    out = work / "rep" / "report.md"
    assert main(["report", "--in", str(nominal_trace), str(nominal_report),
                 "--out", str(out)]) == 0
    assert out.read_text().startswith("#")
    plots = {p.name for p in (out.parent / "plotdata").iterdir()}
    assert {"scheduling_window.csv", "emergency_detection.csv"} <= plots


def test_refine_writes_comparison(work, capsys):
    cfg = work / "small.json"
    cfg.write_text(json.dumps({"num_sensor_nodes": 2, "energy": {"battery_capacity_eu": 150.0}}))
    out = work / "cmp.json"
    assert main(["refine", "--config", str(cfg), "--seeds", "1,2", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["ratio"] >= 3.0 and doc["reverification"]["status"] == "VALID"
    assert (work / "cmp_battery.csv").read_text().startswith("time_ms,battery_eu,arm")
    assert "ratio=" in capsys.readouterr().out


def test_refine_bad_seeds(work):
    assert main(["refine", "--seeds", "one,two", "--out", str(work / "c.json")]) == 2


def test_selftest_exit_codes(monkeypatch, capsys):
    import bsnassure.selftest as selftest
    fast = [c for c in selftest.CRITERIA if c[0] in (1, 6)]
    monkeypatch.setattr(selftest, "CRITERIA", fast)
    assert main(["selftest"]) == 0
    assert "2/2 criteria passed" in capsys.readouterr().out
    broken = [(99, "always fails", lambda: (False, "forced"), 1.0)]
    monkeypatch.setattr(selftest, "CRITERIA", fast + broken)
    assert main(["selftest"]) == 1
