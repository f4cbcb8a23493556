"""CLI surface tests: parsing, outputs, manifests, exit codes."""

import json
import math
import subprocess
import sys

import pytest

from qwqkd.cli import main, parse_angle
from qwqkd.errors import ValidationError


def run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "qwqkd.cli", *args],
                          cwd=cwd, capture_output=True, text=True)


def test_parse_angle_forms():
    assert parse_angle("0") == 0.0
    assert parse_angle("pi") == pytest.approx(math.pi)
    assert parse_angle("pi/4") == pytest.approx(math.pi / 4)
    assert parse_angle("0.3pi") == pytest.approx(0.3 * math.pi)
    assert parse_angle("3pi/10") == pytest.approx(0.3 * math.pi)
    assert parse_angle("-pi/2") == pytest.approx(-math.pi / 2)
    for bad in ("0.785", "45deg", "pie", "2*pi"):
        with pytest.raises(ValidationError):
            parse_angle(bad)


def test_walk_dist_delta(tmp_path):
    rc = main(["walk-dist", "--topology", "circle", "-P", "3", "-t", "0",
               "--symbol", "0", "--out", str(tmp_path / "wd")])
    assert rc == 0
    lines = (tmp_path / "wd.csv").read_text().splitlines()
    assert lines[0] == "position,probability"
    assert lines[1] == "0,1"
    assert (tmp_path / "wd.manifest.json").exists()


def test_unknown_topology_exits_2(tmp_path):
    res = run_cli(["walk-dist", "--topology", "triangle", "-P", "3"], tmp_path)
    assert res.returncode == 2
    assert "usage" in (res.stderr + res.stdout).lower()


def test_even_circle_validation_exit_2(tmp_path):
    rc = main(["sweep-c", "--topology", "circle", "-P", "4", "--t-max", "5",
               "--out", str(tmp_path / "x")])
    assert rc == 2


def test_statistical_insufficiency_exit_3(tmp_path):
    rc = main(["protocol", "--topology", "circle", "-P", "1", "-t", "1",
               "-N", "12", "--out", str(tmp_path / "p")])
    assert rc == 3


def test_resource_cap_exit_4(tmp_path):
    rc = main(["sweep-c", "--topology", "hypercube-tensor", "-P", "14",
               "--t-max", "2", "--out", str(tmp_path / "r")])
    assert rc == 4


def test_sweep_csv_and_rerun_byte_identical(tmp_path):
    out = tmp_path / "sw"
    rc = main(["sweep-c", "--topology", "circle", "-P", "3", "--t-max", "50",
               "--out", str(out)])
    assert rc == 0
    first = (tmp_path / "sw.csv").read_bytes()
    assert first.endswith(b"\n") and b"\r" not in first
    rc = main(["rerun", "--manifest", str(tmp_path / "sw.manifest.json"),
               "--out", str(tmp_path / "sw2")])
    assert rc == 0
    assert (tmp_path / "sw2.csv").read_bytes() == first


def test_protocol_json_and_rerun(tmp_path):
    args = ["protocol", "--topology", "circle", "-P", "1", "-t", "1",
            "--noise", "depolarizing", "--strength", "0.4", "-N", "2000",
            "--seed", "9", "--out", str(tmp_path / "p")]
    assert main(args) == 0
    payload = json.loads((tmp_path / "p.json").read_text())
    assert set(payload) >= {"q_z", "q_w", "r", "c", "sifted_count", "settings"}
    assert main(["rerun", "--manifest", str(tmp_path / "p.manifest.json"),
                 "--out", str(tmp_path / "p2")]) == 0
    assert (tmp_path / "p2.json").read_bytes() == (tmp_path / "p.json").read_bytes()


def test_p_list_summary(tmp_path):
    rc = main(["sweep-c", "--topology", "circle", "--p-list", "1,3", "-P", "1",
               "--t-max", "30", "--out", str(tmp_path / "pl")])
    assert rc == 0
    lines = (tmp_path / "pl.csv").read_text().splitlines()
    assert lines[0] == "P,c_min,t_opt"
    assert len(lines) == 3


def test_config_file_defaults_and_override(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("topology = circle\nP = 3\nt-max = 40\n")
    rc = main(["sweep-c", "--config", str(cfgfile), "--t-max", "25",
               "--out", str(tmp_path / "c1")])
    assert rc == 0
    manifest = json.loads((tmp_path / "c1.manifest.json").read_text())
    assert manifest["config"]["t-max"] == "25"  # flag wins over file
    assert manifest["config"]["P"] == "3"


def test_optimize_smoke(tmp_path):
    rc = main(["optimize", "--topology", "circle", "-P", "1", "--ks", "0,5",
               "--t-max", "10", "--out", str(tmp_path / "opt")])
    assert rc == 0
    lines = (tmp_path / "opt.csv").read_text().splitlines()
    assert lines[0] == "F,phi_over_pi,theta_over_pi,c_min,t_opt"
    assert len(lines) == 1 + 3 * 2 * 2
