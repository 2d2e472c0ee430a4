"""Command-line subcommands, exit codes and output files."""
import json

import pytest

from crotnum.atlas import ScanConfig, scan, to_jsonl
from crotnum.cli import EXIT_FAILED, EXIT_NUMERICAL, EXIT_OK, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    return code, [json.loads(line) for line in out]


def test_rot(capsys):
    code, (rec,) = run(capsys, "rot", "--epsilon", "0.0", "--t", "0.25")
    assert code == EXIT_OK and rec["rot"] == pytest.approx(0.25, abs=1e-12)


def test_rot_of_map_record(capsys, tmp_path):
    path = tmp_path / "map.json"
    path.write_text(json.dumps({"c0": 0.5, "coef": [[0.0, 0.05]], "h": 0.5}))
    code, (rec,) = run(capsys, "rot", "--map", str(path))
    assert code == EXIT_OK and rec["exact"] == "1/2"


def test_crot_and_lock(capsys):
    code, (rec,) = run(capsys, "crot", "--epsilon", "0.6", "--t", "0.0", "--pq", "0")
    assert code == EXIT_OK and rec["im_tau"] == pytest.approx(0.0988847171971581, abs=1e-13)
    assert rec["engine"] == "bands"
    code, (rec,) = run(capsys, "lock", "--epsilon", "0.6", "--pq", "0")
    assert code == EXIT_OK and rec["t_plus"] == pytest.approx(0.6 / (2 * 3.141592653589793), abs=1e-12)


def test_renorm(capsys):
    code, (rec,) = run(capsys, "renorm", "--epsilon", "0.0", "--t", "0.4", "--m", "0")
    assert code == EXIT_OK and rec["map"]["c0"] == pytest.approx(0.5, abs=1e-8)


def test_verify_mobius(capsys):
    code, (rec,) = run(capsys, "verify-mobius", "--epsilon", "0.6", "--t", "0.5", "--pq", "1/2", "--m", "0")
    assert code == EXIT_OK and rec["consistent"] and rec["matched"] == "conjugated"


def test_scan_emit_and_bound(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epsilon": 0.6, "q_max": 2, "samples_per_bubble": 3}))
    code, (rec,) = run(capsys, "scan", "--config", str(cfg), "--out", str(tmp_path), "--format", "csv")
    assert code == EXIT_OK and rec["failures"] == 0
    assert (tmp_path / "scan.csv").exists() and (tmp_path / "scan.jsonl").exists()
    code, recs = run(capsys, "verify-bound", "--report", str(tmp_path / "scan.jsonl"))
    assert code == EXIT_OK and all(r["passed"] for r in recs)
    code, (rec,) = run(capsys, "emit", "--report", str(tmp_path / "scan.jsonl"), "--format", "svg",
                       "--out", str(tmp_path / "svg"))
    assert code == EXIT_OK and rec["path"].endswith("scan.svg")


def test_failed_bound_exits_2(capsys, tmp_path):
    rep = scan(ScanConfig(epsilon=0.6, q_max=1, samples_per_bubble=3))
    text = to_jsonl(rep).replace('"im_tau": 0.', '"im_tau": 5.')
    path = tmp_path / "bad.jsonl"
    path.write_text(text)
    code, recs = run(capsys, "verify-bound", "--report", str(path))
    assert code == EXIT_FAILED and not all(r["passed"] for r in recs)


def test_numerical_failure_exits_3(capsys):
    # rotation number 0 requested where the map has none: no periodic points
    code = main(["crot", "--epsilon", "0.6", "--t", "0.3", "--pq", "0"])
    capsys.readouterr()
    assert code == EXIT_NUMERICAL


def test_parallel_scan_matches_serial():
    a = scan(ScanConfig(epsilon=0.6, q_max=2, samples_per_bubble=3, jobs=1))
    b = scan(ScanConfig(epsilon=0.6, q_max=2, samples_per_bubble=3, jobs=2))
    assert to_jsonl(a) == to_jsonl(b)
