import json

import numpy as np
import pytest

from cgsbp import cli


def run(capsys, tmp_path, *argv):
    code = cli.main([*argv, "--out", str(tmp_path)])
    out, err = capsys.readouterr()
    return code, out, err


def manifest(tmp_path, tag):
    return json.loads((tmp_path / f"manifest_{tag}.json").read_text())


def test_fraction_parsing():
    assert cli.parse_number("9/125") == 0.072
    assert cli.parse_number(" -1/3 ") == pytest.approx(-1 / 3, rel=1e-16)
    assert cli.parse_ad_pairs("e1=9/125, e2=1/500") == {"ad.e1": "9/125", "ad.e2": "1/500"}
    with pytest.raises(cli.ConfigError):
        cli.parse_number("one")
    with pytest.raises(cli.ConfigError):
        cli.parse_ad_pairs("x=1")


def test_steady_table_and_manifest(capsys, tmp_path):
    code, out, _ = run(capsys, tmp_path, "steady-convergence", "--p", "2", "--set", "table.nodes=9,19,39", "--tag", "t")
    assert code == 0
    assert "P2" in out
    m = manifest(tmp_path, "t")
    assert m["experiment"] == "steady-convergence"
    assert m["parameters"]["table.nodes"] == "9,19,39"
    for name in m["files"]:
        assert (tmp_path / name).exists()
    rows = (tmp_path / "table_t.csv").read_text().splitlines()
    assert rows[0] == "p,N,requested_N,error,order,note" and len(rows) == 4


def test_outputs_are_bit_identical_on_rerun(capsys, tmp_path):
    args = ["advect", "--p", "2", "--nodes", "41", "--t-end", "0.01", "--dt", "1e-3", "--ad", "e1=1/6,e2=1/50", "--tag", "r"]
    assert run(capsys, tmp_path, *args)[0] == 0
    first = (tmp_path / "u_r.csv").read_bytes()
    assert run(capsys, tmp_path, *args)[0] == 0
    assert (tmp_path / "u_r.csv").read_bytes() == first
    data = np.loadtxt(tmp_path / "u_r.csv")
    assert data.shape == (41, 2)


def test_config_file_then_set_then_flag(capsys, tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[mesh]\np = 3\nnodes = 31\n[time]\nt_end = 0.01\ndt = 1e-3\n[ad]\ne1 = 1/4\ne2 = 1/500\n")
    code, _, _ = run(capsys, tmp_path, "advect", "--config", str(ini), "--set", "mesh.nodes=22", "--t-end", "0.005", "--tag", "c")
    assert code == 0
    m = manifest(tmp_path, "c")
    assert m["parameters"]["mesh.p"] == "3"
    assert m["parameters"]["mesh.nodes"] == "22"
    assert m["parameters"]["time.t_end"] == "0.005"
    assert m["summary"]["nodes"] == 22


def test_env_output_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["operators", "--p", "3"]) == 0
    assert (tmp_path / "env" / "manifest_operators_p3.json").exists()
    assert "Qx" in capsys.readouterr().out


def test_burgers_and_weno_runs(capsys, tmp_path):
    assert run(capsys, tmp_path, "burgers", "--nodes", "41", "--t-end", "0.01", "--dt", "1e-3", "--tag", "b")[0] == 0
    assert manifest(tmp_path, "b")["summary"]["max_error"] < 1e-2
    assert run(capsys, tmp_path, "weno3", "--problem", "burgers", "--nodes", "41", "--t-end", "0.05", "--tag", "w")[0] == 0
    assert manifest(tmp_path, "w")["summary"]["max_error"] < 5e-2


def test_ad_check_reports_violation(capsys, tmp_path):
    code, out, _ = run(capsys, tmp_path, "ad-check", "--p", "2", "--ad", "e1=1,e2=-1/2")
    assert code == 0
    assert "violation: eps2 >= -eps1/3" in out
    code, out, _ = run(capsys, tmp_path, "ad-check", "--p", "2", "--ad", "e1=1,e2=-1/3")
    assert "verdict = ok" in out and "psd = True" in out


def test_region_violation_exits_2(capsys, tmp_path):
    code, _, err = run(capsys, tmp_path, "advect", "--ad", "e1=-1", "--t-end", "0.001")
    assert code == 2
    msg = json.loads(err.strip())
    assert msg["error"] == "coefficient-region" and "eps1 > 0" in msg["message"]


def test_bad_config_exits_2(capsys, tmp_path):
    code, _, err = run(capsys, tmp_path, "advect", "--set", "time.dt=abc")
    assert code == 2 and json.loads(err.strip())["error"] == "config"
    code, _, err = run(capsys, tmp_path, "advect", "--config", str(tmp_path / "missing.ini"))
    assert code == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exits_3(capsys, tmp_path):
    code, _, err = run(capsys, tmp_path, "steady-convergence", "--p", "2", "--ratio", "0", "--set", "table.nodes=9,19")
    assert code == 3
    assert json.loads(err.strip())["error"] == "numerical"
