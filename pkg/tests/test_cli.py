import json
import subprocess
import sys

import pytest

from codedchain.cli import main, sweep_points


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_run_honest_writes_metrics(tmp_path, capsys):
    out = tmp_path / "m.jsonl"
    assert main(["run", "--config", "honest.json", "--out", str(out)]) == 0
    recs = read_jsonl(out)
    assert all(r["schema"] == 1 for r in recs)
    assert [r["type"] for r in recs] == ["epoch"] * 3 + ["summary"]
    assert recs[-1]["epochs_committed"] == 3 and recs[-1]["oracle_ok"]
    assert "safety ok" in capsys.readouterr().out


def test_seed_override(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    main(["run", "--config", "equivocation.json", "--seed", "7", "--out", str(a)])
    main(["run", "--config", "equivocation.json", "--seed", "8", "--out", str(b)])
    assert read_jsonl(a)[-1]["seed"] == 7 and read_jsonl(b)[-1]["seed"] == 8


def test_malformed_config(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"N": 16,')
    assert main(["run", "--config", str(p)]) == 2
    err = capsys.readouterr().err
    assert "invalid JSON" in err and "line 1" in err
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


def test_infeasible_config(tmp_path, capsys):
    p = tmp_path / "small.json"
    p.write_text(json.dumps({"N": 10, "K": 2, "Q": 4, "f": 2}))
    assert main(["run", "--config", str(p)]) == 2
    assert "infeasible" in capsys.readouterr().err


def test_nonhomology_markers(tmp_path):
    out = tmp_path / "m.jsonl"
    assert main(["run", "--config", "nonhomology.json", "--out", str(out)]) == 0
    attacks = [r for r in read_jsonl(out) if r["type"] == "attack"]
    assert attacks and attacks[0]["rejected"] and "nonhomologous" in attacks[0]["honest_notes"]


@pytest.mark.parametrize("name", ["honest.json", "invalid_tx.json", "wrong_results.json"])
def test_verify_oracle(name, capsys):
    assert main(["verify-oracle", "--config", name]) == 0
    assert "matches the uncoded replay" in capsys.readouterr().out


def test_run_with_oracle_flag():
    assert main(["run", "--config", "invalid_tx.json", "--oracle"]) == 0


def test_sweep_repetitions_identical(tmp_path):
    spec = {"base": {"N": 16, "K": 2, "Q": 2, "f": 2, "epochs": 1, "seed": 3},
            "axis": "Q", "values": [2], "repetitions": 3}
    p = tmp_path / "s.json"
    p.write_text(json.dumps(spec))
    out = tmp_path / "rows.jsonl"
    assert main(["sweep", "--sweep", str(p), "--out", str(out)]) == 0
    rows = read_jsonl(out)
    assert len(rows) == 3
    strip = [{k: v for k, v in r.items() if k != "rep"} for r in rows]
    assert strip[0] == strip[1] == strip[2]


def test_sweep_skips_infeasible(caplog):
    spec = {"base": {"N": 16, "K": 2, "Q": 4, "f": 0, "epochs": 2, "seed": 1},
            "axis": "f", "values": [1, 2, 3, 4]}
    points = sweep_points(spec)
    assert [p["f"] for p in points] == [1, 2, 3]
    assert "skipping f=4" in caplog.text


def test_sweep_parallel_matches_serial(tmp_path):
    spec = {"base": {"N": 16, "K": 2, "Q": 2, "f": 2, "epochs": 1, "seed": 3},
            "axis": "Q", "values": [1, 2]}
    p = tmp_path / "s.json"
    p.write_text(json.dumps(spec))
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["sweep", "--sweep", str(p), "--out", str(a)]) == 0
    assert main(["sweep", "--sweep", str(p), "--out", str(b), "--jobs", "2"]) == 0
    assert read_jsonl(a) == read_jsonl(b)


def test_sweep_rejects_bad_axis(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"base": {"N": 16, "K": 2, "Q": 2, "f": 2}, "axis": "gamma", "values": [1]}))
    assert main(["sweep", "--sweep", str(p)]) == 2


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "codedchain.cli", "run", "--config", "honest.json"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "epochs 3/3" in r.stdout
