import csv
import json
from pathlib import Path

import pytest

from qidlab.cli import main


def _read_csv(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# schema=qidlab.")
    assert "config=" in lines[0] and "version=" in lines[0]
    return list(csv.DictReader(lines[1:]))


def _write_config(tmp_path, doc):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(doc), encoding="utf-8")
    return str(cfg)


def test_verify_clean_and_filtered(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "verify", "--filter", "divergences"]) == 0
    out = capsys.readouterr().out
    assert "divergences.pinsker" in out and "FAIL" not in out
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert doc["failures"] == []


def test_verify_mutation_detected(tmp_path):
    assert main(["--out", str(tmp_path), "verify", "--mutate", "cov_ii_ij"]) == 1
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert any("primitive_oracle" in f["name"] for f in doc["failures"])


def test_estimate_csv(tmp_path):
    assert main(["--out", str(tmp_path), "estimate"]) == 0
    rows = _read_csv(tmp_path / "estimate.csv")
    assert len(rows) == 30
    for row in rows:
        assert abs(float(row["mean"]) - float(row["m_hs_sq"])) <= 1e-8
        assert float(row["bound_rhs"]) >= float(row["variance"]) - 1e-9
        if row["instance"].startswith(("mixed_equal", "equal_random")):
            assert abs(float(row["mean"])) <= 1e-8
        if row["instance"] == "orth_d2":
            assert abs(float(row["mean"]) - 1.0) <= 1e-8


def test_test_command_summary_and_determinism(tmp_path):
    cfg = _write_config(tmp_path, {"test": {"trials": 40}})
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", cfg, "--out", str(out_a), "test"]) == 0
    assert main(["--config", cfg, "--out", str(out_b), "test"]) == 0
    assert (out_a / "test.jsonl").read_bytes() == (out_b / "test.jsonl").read_bytes()
    assert (out_a / "test_summary.csv").read_bytes() == (out_b / "test_summary.csv").read_bytes()
    rows = _read_csv(out_a / "test_summary.csv")
    for row in rows:
        rate = float(row["accept_rate"])
        if row["case"].startswith("A"):
            assert rate >= 2 / 3
        else:
            assert rate <= 1 / 3
    with open(out_a / "test.jsonl", encoding="utf-8") as f:
        first = json.loads(f.readline())
    assert {"trial", "decision", "estimate", "mu", "M"} <= set(first)


def test_workers_do_not_change_output(tmp_path):
    cfg = _write_config(tmp_path, {"test": {"trials": 24, "Ns": [2]}})
    out_a, out_b = tmp_path / "w1", tmp_path / "w2"
    assert main(["--config", cfg, "--out", str(out_a), "test"]) == 0
    assert main(["--config", cfg, "--workers", "3", "--out", str(out_b), "test"]) == 0
    assert (out_a / "test.jsonl").read_bytes() == (out_b / "test.jsonl").read_bytes()


def test_lowerbound_csv(tmp_path):
    cfg = _write_config(
        tmp_path,
        {"lowerbound": {"Ns": [2, 4], "max_M": 4, "far_trials": 200, "witness_samples": 3}},
    )
    assert main(["--config", cfg, "--out", str(tmp_path), "lowerbound"]) == 0
    rows = _read_csv(tmp_path / "lowerbound.csv")
    kinds = {row["kind"] for row in rows}
    assert {"tv", "chi2", "far", "witness", "headline_bound"} <= kinds
    for row in rows:
        if row["kind"] in ("tv", "chi2", "far", "witness"):
            assert float(row["slack"]) >= -1e-12
        if row["kind"] == "tv" and row["M"] == "1":
            assert float(row["lhs"]) == 0.0


def test_sweep_small_grid(tmp_path):
    cfg = _write_config(
        tmp_path,
        {"sweep": {"Ns": [2, 4], "ds": [2], "trials": 60, "bisection_steps": 6}},
    )
    assert main(["--config", cfg, "--out", str(tmp_path), "sweep"]) == 0
    cells = _read_csv(tmp_path / "sweep.csv")
    assert len(cells) == 2
    for cell in cells:
        assert float(cell["mu_min"]) >= 1.0
        assert float(cell["success_at_mu_min"]) >= float(cell["target"]) - 0.15
    fits = _read_csv(tmp_path / "sweep_fit.csv")
    assert any(row["axis"] == "N" for row in fits)


def test_sweep_epsilon_scaling():
    # the threshold scales like eps^2, so doubling eps quarters minimal mu;
    # checked at small eps where counts are large enough to be in the
    # Gaussian regime (at eps ~ 0.25 count discreteness bends the law)
    from qidlab.cli import _minimal_mu

    sweep_cfg = {"trials": 250, "bisection_steps": 9, "target": 0.75}
    mu_small = _minimal_mu(2, 2, 0.0625, sweep_cfg, 777, 0)
    mu_large = _minimal_mu(2, 2, 0.125, sweep_cfg, 777, 1)
    assert mu_large / mu_small == pytest.approx(0.25, rel=0.25)


def test_calibrate(tmp_path):
    assert main(["--out", str(tmp_path), "calibrate"]) == 0
    doc = json.loads((tmp_path / "calibration.json").read_text())
    assert doc["variance_C"] == 8.0
    assert doc["suite_max_C"] <= doc["variance_C"]
