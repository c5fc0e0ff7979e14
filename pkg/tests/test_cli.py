import json
import subprocess
import sys
from types import SimpleNamespace

import pytest

from shortcutlab.cli import cmd_verify_formats, main
from shortcutlab.formats import RECOGNIZERS, Dfa, FormatId


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "hierarchy.json"
    path.write_text(json.dumps({"experiment": "HierarchyFlat", "steps": 12}))
    return path


def test_run_writes_outputs(config, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--config", str(config), "--set", "seed=7", "--out", str(out), "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["steps"] == 12
    assert (out / "log.jsonl").exists() and (out / "policy.ckpt").exists()
    header = json.loads((out / "log.jsonl").read_text().splitlines()[0])["header"]
    assert header["seed"] == 7


def test_override_is_recorded_in_header(tmp_path, capsys):
    path = tmp_path / "conflict.json"
    path.write_text(json.dumps({"experiment": "Conflict", "steps": 4, "out_dir": str(tmp_path / "c")}))
    assert main(["run", "--config", str(path), "--set", "optimizer.algo=ReinforcePP"]) == 0
    header = json.loads((tmp_path / "c" / "log.jsonl").read_text().splitlines()[0])["header"]
    assert header["optimizer"]["algo"] == "ReinforcePP"


def test_config_errors_exit_2(config, tmp_path, capsys):
    assert main(["run", "--config", str(config), "--set", "optimizer.bogus=1"]) == 2
    assert "optimizer.bogus" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"experiment": "HierarchyFlat", "scheme": {"kind": "Conflict"}}))
    assert main(["run", "--config", str(bad)]) == 2


def test_kl_leash_dispatches_pair(tmp_path, capsys):
    path = tmp_path / "leash.json"
    path.write_text(json.dumps({"experiment": "KlLeash", "steps": 5}))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "k"), "--json"]) == 0
    comparison = json.loads(capsys.readouterr().out)
    assert sorted(v["beta"] for v in comparison.values()) == [0.1, 0.3]


def test_verify_formats(capsys):
    assert main(["verify-formats", "--max-len", "8", "--samples", "0", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] and len(report["reports"]) == 2
    assert main(["verify-formats", "--max-len", "20"]) == 2


def test_verify_formats_reports_witness(capsys):
    good = RECOGNIZERS[FormatId.F2_EXCL]
    accepting = good.accepting.copy()
    accepting[:] = True
    accepting[good.dead] = False
    broken = {**RECOGNIZERS, FormatId.F2_EXCL: Dfa(good.table, accepting, good.dead)}
    args = SimpleNamespace(max_len=5, samples=0, seed=None, json=False)
    assert cmd_verify_formats(args, recognizers=broken) == 1
    assert "witness:" in capsys.readouterr().out


def test_score(capsys):
    assert main(["score", "<think> </think> <answer> \\boxed{ 1 2 } </answer>", "--truth", "12", "--scheme", "HierarchyExponential", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["total"] == 7.0 and out["correctness"] == 3.0
    assert main(["score", "<nope>", "--task", "3"]) == 2
    assert main(["score", "_", "--task", "300"]) == 2


def test_plot_and_sweep(config, tmp_path, capsys):
    assert main(["sweep", str(config), str(config), "--out", str(tmp_path / "sw"), "--set", "steps=6"]) == 0
    logs = sorted((tmp_path / "sw").glob("*/log.jsonl"))
    assert len(logs) == 2
    svg = tmp_path / "p.svg"
    assert main(["plot", str(logs[0]), "--out", str(svg)]) == 0
    assert svg.read_text().count("<polyline") == 3
    csv = tmp_path / "p.csv"
    assert main(["plot", str(logs[0]), "--format", "csv", "--out", str(csv)]) == 0
    assert len(csv.read_text().splitlines()) == 1 + 6
    assert main(["plot", str(logs[0]), "--metrics", "nope", "--out", str(svg)]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "shortcutlab", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "verify-formats" in proc.stdout
