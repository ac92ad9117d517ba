import json
from pathlib import Path

import pytest

from tubenull.cli import main
from tubenull.config import ConfigError, validate_config
from tubenull.runner import run_experiment


MINIMAL_BUILD = """
kind = "build"
dimension = 2
n_max = 6
seed = 1
[gauge]
family = "power"
beta = 1.5
"""

LINES_TOML = """
kind = "lines"
dimension = 2
n_max = 5
seed = 3
[gauge]
family = "power"
beta = 1.5
[lines]
net_level = 1
c0 = 8.0
probes = 40
trials = 400
martingale_levels = [3]
"""


def test_validate_minimal_build():
    cfg = validate_config(MINIMAL_BUILD)
    assert cfg.kind == "build"
    assert cfg.gauge.beta == 1.5
    assert cfg.config_hash == validate_config(MINIMAL_BUILD).config_hash


def test_validate_json_form():
    data = {
        "kind": "build",
        "dimension": 2,
        "n_max": 4,
        "seed": 9,
        "gauge": {"family": "power", "beta": 1.0},
    }
    cfg = validate_config(json.dumps(data))
    assert cfg.n_max == 4


def test_rejects_dimension_one():
    bad = MINIMAL_BUILD.replace("dimension = 2", "dimension = 1")
    with pytest.raises(ConfigError) as err:
        validate_config(bad)
    assert "dimension" in str(err.value)


def test_rejects_bad_kind():
    with pytest.raises(ConfigError) as err:
        validate_config(MINIMAL_BUILD.replace('"build"', '"bogus"'))
    assert "kind" in str(err.value)


def test_net_cap_warning_surfaces():
    cfg = validate_config(
        LINES_TOML.replace("net_level = 1", "net_level = 8").replace(
            "n_max = 5", "n_max = 12"
        )
    )
    assert cfg.warnings and "cap" in cfg.warnings[0]


def test_hash_ignores_out_dir():
    a = validate_config(MINIMAL_BUILD)
    b = validate_config(MINIMAL_BUILD + '\nout = "elsewhere"\n')
    assert a.config_hash == b.config_hash


def test_build_run_and_reproducibility(tmp_path):
    cfg = validate_config(MINIMAL_BUILD)
    r1 = run_experiment(cfg, tmp_path / "a")
    assert r1.status == 0
    body1 = (tmp_path / "a" / "box_cover.csv").read_bytes()
    assert (tmp_path / "a" / "levels" / "level_06.txt").exists()

    r2 = run_experiment(cfg, tmp_path / "b")
    body2 = (tmp_path / "b" / "box_cover.csv").read_bytes()
    assert body1 == body2
    assert r2.summary["verdicts"]["schedule_tracking"] == "pass"


def test_lines_run(tmp_path):
    cfg = validate_config(LINES_TOML)
    result = run_experiment(cfg, tmp_path / "run")
    assert result.status == 0
    for name in ("trend.csv", "domination.csv", "martingale.csv", "tails.csv"):
        assert (tmp_path / "run" / name).exists()
    summary = json.loads((tmp_path / "run" / "summary.json").read_text())
    assert summary["verdicts"]["net_domination"] == "pass"
    assert summary["config_hash"] == cfg.config_hash


def test_convex_run_contains_golden_values(tmp_path):
    cfg = validate_config(
        """
kind = "convex"
dimension = 2
n_max = 4
seed = 2
[gauge]
family = "power"
beta = 1.5
[convex]
n_values = [5, 10, 20, 40]
ensemble = 40
"""
    )
    result = run_experiment(cfg, tmp_path / "cx")
    assert result.status == 0
    body = (tmp_path / "cx" / "breakpoints.csv").read_text()
    for token in ("5/25", "10/25", "15/25", "19/25", "23/25"):
        assert token in body
    assert result.summary["verdicts"]["reconstruction_decay"] == "pass"


def test_fibers_run(tmp_path):
    cfg = validate_config(
        """
kind = "fibers"
dimension = 2
n_max = 6
seed = 5
[gauge]
family = "power"
beta = 1.5
[fibers]
lines = 12
r_exponents = [2, 3, 4, 5]
"""
    )
    result = run_experiment(cfg, tmp_path / "fb")
    assert (tmp_path / "fb" / "fibers.csv").exists()
    assert result.status in (0, 1)


def test_tubes_run_and_report(tmp_path):
    cfg = validate_config(
        """
kind = "tubes"
dimension = 2
n_max = 6
seed = 4
[gauge]
family = "power"
beta = 1.5
[tubes]
directions = 24
bin_width = 0.015625
covers = 2
cover_tubes = 6
"""
    )
    out = tmp_path / "tb"
    result = run_experiment(cfg, out)
    assert result.status == 0
    assert result.summary["verdicts"]["tube_certificates"] == "pass"

    status = main(["report", "--run-dir", str(out)])
    assert status == 0
    report = (out / "report.md").read_text()
    assert "tube_certificates" in report
    assert (out / "density.png").exists()


def test_cli_build_roundtrip(tmp_path):
    cfg_path = tmp_path / "cfg.toml"
    cfg_path.write_text(MINIMAL_BUILD)
    status = main(["build", "--config", str(cfg_path), "--out", str(tmp_path / "out")])
    assert status == 0
    assert (tmp_path / "out" / "box_cover.csv").exists()


def test_cli_bad_config_exit_2(tmp_path):
    cfg_path = tmp_path / "cfg.toml"
    cfg_path.write_text(MINIMAL_BUILD.replace("dimension = 2", "dimension = 1"))
    status = main(["build", "--config", str(cfg_path), "--out", str(tmp_path / "out")])
    assert status == 2
    err = json.loads((tmp_path / "out" / "error.json").read_text())
    assert "dimension" in err["message"]


def test_cli_kind_mismatch(tmp_path):
    cfg_path = tmp_path / "cfg.toml"
    cfg_path.write_text(MINIMAL_BUILD)
    assert main(["lines", "--config", str(cfg_path)]) == 2


def test_report_missing_files(tmp_path):
    status = main(["report", "--run-dir", str(tmp_path / "nothing")])
    assert status == 2


def test_report_flags_synthetic_tail_violation(tmp_path):
    # a hand-written tails.csv whose frequency exceeds the envelope at
    # kappa/2 must be flagged in the report
    run = tmp_path / "run"
    run.mkdir()
    (run / "summary.json").write_text(
        json.dumps({"kind": "lines", "config_hash": "x", "seed": 0, "verdicts": {}})
    )
    (run / "tails.csv").write_text(
        "# config=x\n"
        "n,kappa,frequency,envelope,envelope_at_half\n"
        "3,1,0.5,0.01,0.02\n"
        "3,2,0.001,0.002,0.004\n"
    )
    from tubenull.report import emit_report

    path, missing = emit_report(run)
    assert not missing
    text = path.read_text()
    assert "VIOLATION" in text
    assert "kappa=1" in text
