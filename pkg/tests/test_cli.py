import hashlib
import os
import subprocess
import sys
from pathlib import Path

import pytest

from fefetmult.cli import OUTDIR_ENV, run

ROOT = Path(__file__).parents[1]
NET = ROOT / "netlists"
GOLDEN = Path(__file__).parent / "golden"


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_unknown_subcommand(capsys):
    assert run(["frobnicate"]).exit_code == 1
    assert "invalid choice" in capsys.readouterr().err


def test_missing_required_flag(capsys):
    assert run(["sweep"]).exit_code == 1
    assert capsys.readouterr().err


def test_empty_netlist(tmp_path, capsys):
    empty = tmp_path / "empty.fnet"
    empty.write_text("")
    out = run(["sweep", "--netlist", str(empty), "--out", str(tmp_path / "s.csv")])
    assert out.exit_code == 2
    assert "missing preset" in capsys.readouterr().err
    assert out.artifacts == []


def test_unreadable_netlist(tmp_path, capsys):
    assert run(["sweep", "--netlist", str(tmp_path / "nope.fnet")]).exit_code == 2
    assert "cannot read" in capsys.readouterr().err


def test_unsupported_mode(tmp_path, capsys):
    out = run(["configure", "--netlist", str(NET / "2n-parallel.fnet"), "--mode", "ThirdH",
               "--out", str(tmp_path / "c.txt")])
    assert out.exit_code == 2 and "ThirdH" in capsys.readouterr().err


def test_help_documents_columns(capsys):
    assert run(["spectrum", "--help"]).exit_code == 0
    assert "order, power_db" in capsys.readouterr().out


def test_sweep_golden(tmp_path):
    target = tmp_path / "sweep.csv"
    assert run(["sweep", "--netlist", str(NET / "2n-parallel.fnet"), "--points", "9",
                "--vmin", "-1", "--vmax", "1", "--out", str(target)]).exit_code == 0
    assert target.read_text() == (GOLDEN / "sweep_2n_parallel.csv").read_text()


def test_outdir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTDIR_ENV, str(tmp_path / "o"))
    out = run(["sweep", "--netlist", str(NET / "2n-parallel.fnet"), "--points", "5"])
    assert out.exit_code == 0
    assert out.artifacts == [str(tmp_path / "o" / "sweep.csv")]


@pytest.fixture(scope="module")
def second_h(tmp_path_factory):
    d = tmp_path_factory.mktemp("cfg")
    cfg = d / "c2.txt"
    assert run(["configure", "--netlist", str(NET / "2n-parallel.fnet"), "--mode", "SecondH",
                "--out", str(cfg)]).exit_code == 0
    return cfg


def test_spectrum_secondh(second_h, tmp_path, capsys):
    before = digest(second_h), digest(NET / "2n-parallel.fnet")
    out = run(["spectrum", "--netlist", str(NET / "2n-parallel.fnet"), "--config", str(second_h),
               "--fin", "1e6", "--target", "2", "--out", str(tmp_path / "sp.csv")])
    assert out.exit_code == 0
    kv = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    assert float(kv["dominance_margin_db"]) >= 10 and kv["pass"] == "yes"
    assert len(kv["dominance_margin_db"].lstrip("-").replace(".", "").lstrip("0")) <= 12
    assert (digest(second_h), digest(NET / "2n-parallel.fnet")) == before


def test_determinism(second_h, tmp_path):
    runs = []
    for k in range(2):
        d = tmp_path / str(k)
        args = ["spectrum", "--netlist", str(NET / "2n-parallel.fnet"), "--config", str(second_h),
                "--out", str(d / "sp.csv"), "--waveform"]
        out = run(args)
        assert out.exit_code == 0
        runs.append([Path(a).read_bytes() for a in out.artifacts])
    assert runs[0] == runs[1] and len(runs[0]) == 3


def test_write_plan_and_maxfreq(second_h, tmp_path, capsys):
    out = run(["write-plan", "--netlist", str(NET / "4n-serial.fnet"), "--vth", "M1=0.1", "--vth", "M2=0.2",
               "--vth", "M3=0.3", "--vth", "M4=0.4", "--out", str(tmp_path / "wp.csv")])
    assert out.exit_code == 0
    rows = (tmp_path / "wp.csv").read_text().splitlines()
    assert rows[0] == "step,device,purpose,amplitude,duration" and len(rows) == 13
    assert run(["write-plan", "--netlist", str(NET / "4n-serial.fnet"), "--vth", "M1"]).exit_code == 1
    capsys.readouterr()
    mf = tmp_path / "mf.txt"
    assert run(["maxfreq", "--netlist", str(NET / "2n-parallel.fnet"), "--config", str(second_h),
                "--fmax", "1e9", "--out", str(mf)]).exit_code == 0
    assert "hit_upper_bound=yes" in capsys.readouterr().out
    assert mf.read_text().startswith("f_max_hz=1000000000\n")


def test_fsk_cli(tmp_path, capsys):
    out = run(["fsk", "--netlist", str(NET / "4n-serial.fnet"), "--bits", "1010", "--out", str(tmp_path / "f.csv")])
    assert out.exit_code == 0
    text = capsys.readouterr().out
    assert "bit_errors=0" in text
    assert (tmp_path / "f.csv").read_text().startswith("t,vin,iout\n")
    assert run(["fsk", "--netlist", str(NET / "4n-serial.fnet"), "--bits", "10", "--pair", "2,3"]).exit_code == 2
    assert run(["fsk", "--netlist", str(NET / "4n-serial.fnet"), "--bits", "1x"]).exit_code == 1


def test_console_entry(tmp_path):
    env = {**os.environ, OUTDIR_ENV: str(tmp_path)}
    r = subprocess.run([sys.executable, "-m", "fefetmult.cli", "bogus"], capture_output=True, text=True, env=env)
    assert r.returncode == 1 and r.stderr
