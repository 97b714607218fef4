import json
import subprocess
import sys

import pytest

from viqds_lab.cli import cmd_exact, render, run


def call(argv, capsys):
    code, text = run(argv)
    captured = capsys.readouterr()
    return code, text, captured.err


def test_exact_completeness_and_power(capsys):
    code, text, _ = call(["exact", "--p", "2"], capsys)
    rep = json.loads(text)
    assert code == 0 and rep["pass"]
    assert set(rep) == {"command", "config", "rows", "pass"}
    rows = {r["quantity"]: r for r in rep["rows"]}
    assert rows["completeness"]["value"] == pytest.approx(1.0, abs=1e-12)
    _, text, _ = call(["exact", "--p", "2", "--l", "3"], capsys)
    rows = {r["quantity"]: r for r in json.loads(text)["rows"]}
    assert rows["soundness"]["value"] == pytest.approx(0.125, abs=1e-12)


def test_non_prime_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["exact", "--p", "4"])
    assert exc.value.code == 2
    assert "p must be prime" in capsys.readouterr().err


def test_unknown_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["exact", "--bogus"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_soundness(capsys):
    code, text, _ = call(["soundness", "--p", "2"], capsys)
    row = json.loads(text)["rows"][0]
    assert code == 0 and row["primal"] == pytest.approx(0.5, abs=1e-6) and row["gap"] < 1e-6
    assert {"primal", "dual", "gap", "iterations"} <= set(row)
    code, text, _ = call(["soundness", "--p", "3"], capsys)
    assert code == 0 and json.loads(text)["rows"][0]["primal"] == pytest.approx(1 / 3, abs=1e-5)
    code, text, _ = call(["soundness", "--p", "2", "--tensor", "2"], capsys)
    assert code == 0 and json.loads(text)["rows"][0]["primal"] == pytest.approx(0.25, abs=1e-5)
    code, _, err = call(["soundness", "--p", "5", "--tensor", "2"], capsys)
    assert code == 2 and "cap" in err


def test_zk(capsys):
    code, text, _ = call(["zk", "--p", "3", "--instruments", "random:20"], capsys)
    rep = json.loads(text)
    assert code == 0 and len(rep["rows"]) == 20
    code, text, _ = call(["zk", "--p", "2", "--instruments", "honest,eigenbasis"], capsys)
    rows = {r["instrument"]: r for r in json.loads(text)["rows"]}
    assert rows["honest"]["specious"] and rows["honest"]["max_tv"] < 1e-9
    leak = rows["eigenbasis-measure-t0"]
    assert not leak["specious"] and leak["max_tv"] > 0.01
    code, _, err = call(["zk", "--instruments", "nonsense"], capsys)
    assert code == 2


def test_viqds_scenarios(tmp_path, capsys):
    honest = tmp_path / "honest.json"
    honest.write_text(json.dumps({"p": 2, "L": 2, "N": 2, "l": 1, "messages": [0, 1],
                                  "sessions": 10_000, "seed": 1, "adversary": {"kind": "none"}}))
    code, text, _ = call(["viqds", "--scenario", str(honest)], capsys)
    rep = json.loads(text)
    assert code == 0 and rep["summary"]["completeness_rate"] == 1.0 and len(rep["rows"]) == 10_000

    forge = tmp_path / "forge.json"
    forge.write_text(json.dumps({"p": 2, "L": 2, "N": 1, "sessions": 500, "seed": 2,
                                 "adversary": {"kind": "constant", "parameters": {"value": 0}}}))
    code, text, _ = call(["viqds", "--scenario", str(forge)], capsys)
    s = json.loads(text)["summary"]
    assert code == 0 and s["exact_bound"] == 0.5 and "forgery_rate" in s

    bits = tmp_path / "bits.json"
    bits.write_text(json.dumps({"p": 2, "N": 1, "scheme": "bitwise", "bits": "10110010", "seed": 3}))
    code, text, _ = call(["viqds", "--scenario", str(bits), "--format", "table"], capsys)
    assert code == 0 and "key_systems=16" in text.splitlines()

    code, text, _ = call(["viqds", "--scenario", str(forge), "--jsonl"], capsys)
    lines = [json.loads(x) for x in text.splitlines()]
    assert "summary" in lines[-1]


def test_viqds_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert call(["viqds", "--scenario", str(bad)], capsys)[0] == 2
    assert call(["viqds", "--scenario", str(tmp_path / "missing.json")], capsys)[0] == 2
    bad.write_text(json.dumps({"p": 6, "seed": 1}))
    assert call(["viqds", "--scenario", str(bad)], capsys)[0] == 2


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("VIQDS_SEED", "17")
    _, text, _ = call(["exact", "--p", "2"], capsys)
    assert json.loads(text)["config"]["seed"] == 17
    monkeypatch.setenv("VIQDS_SEED", "abc")
    assert call(["exact", "--p", "2"], capsys)[0] == 2


def test_formats(capsys):
    rep = cmd_exact(2, 1, 0)
    csv_text = render(rep, "csv")
    assert csv_text.splitlines()[0].split(",") == sorted(rep["rows"][0].keys() | rep["rows"][1].keys())
    assert render(rep, "table").startswith("command=exact pass=True")
    assert render(rep, "json") == render(cmd_exact(2, 1, 0), "json")


def test_output_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = call(["exact", "--p", "3", "--output", str(out)], capsys)
    assert code == 0 and json.loads(out.read_text())["pass"]


def test_violated_bound_exits_one(monkeypatch, capsys):
    import viqds_lab.cli as cli
    monkeypatch.setattr(cli, "SDP_GAP_TOL", -1.0)
    assert call(["soundness", "--p", "2"], capsys)[0] == 1


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "viqds_lab.cli", "exact", "--p", "2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["pass"]
