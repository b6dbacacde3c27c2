import json

import pytest

from noclock import cli
from noclock.scenario import Scenario


@pytest.fixture
def scenario_file(tmp_path):
    sc = Scenario(n=4, f=1, theta="1.1", duration="110", seed=3,
                  adversary={"byzantine": "silent", "delays": "uniform",
                             "byzantine_set": [3]},
                  script=[{"t": "8", "node": 0, "action": "initiate"}])
    path = tmp_path / "scenario.json"
    sc.dump(path)
    return path


def test_run_writes_outputs_and_exits_zero(scenario_file, tmp_path, capsys):
    out = tmp_path / "results"
    rc = cli.main(["run", "--scenario", str(scenario_file), "--out", str(out)])
    assert rc == 0
    for name in ("trace.log", "trace.jsonl", "verdicts.json", "metrics.json",
                 "scenario.json"):
        assert (out / name).exists()
    stored = json.loads((out / "verdicts.json").read_text())
    assert all(v["passed"] for v in stored)
    first = (out / "trace.log").read_text().splitlines()[0]
    assert len(first.split(" | ")) == 5        # time | node | kind | digest | bits


def test_check_trace_reevaluates(scenario_file, tmp_path, capsys):
    out = tmp_path / "results"
    assert cli.main(["run", "--scenario", str(scenario_file),
                     "--out", str(out)]) == 0
    capsys.readouterr()
    rc = cli.main(["check-trace", "--dir", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "[PASS] oracle-equivalence" in text


def test_explain_prints_one_verdict(scenario_file, tmp_path, capsys):
    out = tmp_path / "results"
    cli.main(["run", "--scenario", str(scenario_file), "--out", str(out)])
    capsys.readouterr()
    rc = cli.main(["explain", "--dir", str(out), "timing-windows"])
    assert rc == 0
    assert "timing-windows" in capsys.readouterr().out
    assert cli.main(["explain", "--dir", str(out), "no-such"]) == 2


def test_invalid_scenario_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 6, "f": 2}))
    rc = cli.main(["run", "--scenario", str(bad)])
    assert rc == 2
    assert "f < n/3" in capsys.readouterr().err


def test_sweep_axes(scenario_file, capsys):
    rc = cli.main(["sweep", "--scenario", str(scenario_file),
                   "--axis", "seed=3,4"])
    assert rc == 0
    assert "2/2 runs fully passed" in capsys.readouterr().out
