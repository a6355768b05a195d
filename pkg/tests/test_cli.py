import json
import subprocess
import sys

import pytest

from magdirac.cli import main, run_cli


def run(*args):
    return subprocess.run([sys.executable, "-m", "magdirac", *args], capture_output=True, text=True)


def test_regimes_command():
    r = run("regimes", "--mu", "10", "--h", "1e-4", "--m", "2")
    assert r.returncode == 0
    d = json.loads(r.stdout)
    assert d["T_star"] == "0.01" and d["regime"] == "intermediate"


def test_levels_command(capsys):
    assert main(["levels", "--mu", "10", "--h", "0.02", "--V", "1"]) == 0
    out = capsys.readouterr().out
    assert "N = 3" in out
    e = float(out.split("e_MW = ")[1].split()[0])
    assert e == pytest.approx(238.732, abs=1e-3)


def test_selftest_command(tmp_path):
    r1 = run("selftest", "--out", str(tmp_path / "a"))
    r2 = run("selftest", "--out", str(tmp_path / "b"))
    assert r1.returncode == 0 and r2.returncode == 0 and "FAIL" not in r1.stdout
    assert (tmp_path / "a" / "selftest.csv").read_bytes() == (tmp_path / "b" / "selftest.csv").read_bytes()
    man = json.loads((tmp_path / "a" / "selftest_manifest.json").read_text())
    assert {"config", "seed", "versions", "wall_time_s", "outputs"} <= set(man)


def test_kernel_command(capsys):
    assert run_cli(["kernel", "--mu", "4", "--h", "0.1", "--x", "0.1,0.2", "--y=-0.1,0.05"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert float(d["re"]) == pytest.approx(float(d["laguerre_re"]), rel=1e-8)
    assert float(d["im"]) == pytest.approx(float(d["laguerre_im"]), rel=1e-8)


def test_flow_command(tmp_path, capsys):
    ev = tmp_path / "ev.json"
    out = tmp_path / "traj.csv"
    assert main(["flow", "--mu", "16", "--windings", "6", "--intersections", "--events", str(ev),
                 "--out", str(out)]) == 0
    d = json.loads(capsys.readouterr().out)
    assert float(d["energy_drift"]) <= 1e-9
    assert int(d["crossings_on_reference"]) == len([e for e in json.loads(ev.read_text())
                                                    if 3 in e["winding_pair"]])
    assert out.read_text().startswith("t,x1,x2,xi1,xi2,H")


def test_sweep_command(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(f"[sweep]\nquantity = kernel_trace\nmu = 1 4\nh = 0.1 0.05\n"
                   f"output_path = {tmp_path / 'out'}\n")
    r = run("sweep", "--config", str(cfg))
    assert r.returncode == 0, r.stderr
    for name in ("kernel_trace.csv", "kernel_trace.dat", "kernel_trace_fits.json",
                 "kernel_trace_manifest.json"):
        assert (tmp_path / "out" / name).exists()


def test_exit_codes(tmp_path):
    assert run("levels", "--mu", "10", "--h", "-1").returncode == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[sweep]\nquantity = nothing\nmu = 1\n")
    assert run("sweep", "--config", str(bad)).returncode == 2
    assert run("sweep", "--config", str(tmp_path / "missing.ini")).returncode == 2
    # an outer rule too coarse for the cutoffs is a numerical-accuracy failure
    assert run("dirac", "--mu", "2", "--h", "0.1", "--outer-order", "6").returncode == 3
    with pytest.raises(SystemExit) as ex:
        main(["no-such-command"])
    assert ex.value.code == 2
