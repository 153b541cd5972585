import csv
import io
import math
import os
import subprocess
import sys

import pytest

from qsm import analytic
from qsm.cli import ConfigError, load_config, main, run
from qsm.state import ThermoState


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _rows(text):
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_weight_profile_origin(capsys):
    code, out, err = _run(capsys, "weight-profile", "--beta", "0.1:3:30")
    assert code == 0 and err == ""
    rows = _rows(out)
    assert list(rows[0]) == ["beta", "P", "Q", "re_exact", "re_bigW", "re_smallw", "boltzmann"]
    at2 = min(rows, key=lambda r: abs(float(r["beta"]) - 2.0))
    beta = float(at2["beta"])
    assert float(at2["re_exact"]) == pytest.approx(1 / math.sqrt(math.cosh(beta)), abs=1e-11)
    exact2 = run(load_config("weight-profile", overrides={"beta": "2"}))
    assert float(_rows(exact2)[0]["re_exact"]) == pytest.approx(0.5156, abs=1e-4)


def test_weight_profile_line(tmp_path, capsys):
    cfg = tmp_path / "line.ini"
    cfg.write_text("[weight-profile]\nbeta = 1\npq_line = 0:4:9\n")
    code, out, _ = _run(capsys, "weight-profile", "--config", str(cfg))
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 9 and rows[-1]["P"] == "4"
    near = [r for r in rows if float(r["P"]) <= 1.0]
    assert all(float(r["re_exact"]) <= float(r["boltzmann"]) for r in near)


def test_grand_potential_truncated_row(capsys):
    code, out, _ = _run(capsys, "grand-potential", "--beta", "0.2, 2", "--nmax", "8")
    assert code == 0
    r02, r2 = _rows(out)
    assert float(r02["analytic_l1"]) == pytest.approx(4.99, abs=5e-3)
    assert float(r02["quad_l1"]) == pytest.approx(4.17, abs=5e-3)
    assert float(r02["quad_l2"]) == pytest.approx(1.21, abs=5e-3)
    assert float(r2["quad_l1"]) == pytest.approx(float(r2["analytic_l1"]), rel=5e-3)


def test_grand_potential_divergence_guard(capsys):
    code, out, err = _run(capsys, "grand-potential", "--beta", "0.2", "--z", "1.2")
    assert code != 0 and out == ""
    assert err.count("\n") == 1 and "diverges" in err


def test_energy_command(capsys):
    code, out, _ = _run(capsys, "energy", "--beta", "0.2, 1, 3, 5")
    assert code == 0
    rows = _rows(out)
    for r in rows:
        assert float(r["analytic_50mer_boson"]) > float(r["analytic_50mer_fermion"])
        assert float(r["quad_dimer_boson"]) > float(r["quad_dimer_fermion"])
    r3 = rows[2]
    ts = ThermoState(3.0)
    two_loops = analytic.loop_energy_term(ts, 1) + analytic.loop_energy_term(ts, 2)
    assert float(r3["quad_dimer_boson"]) == pytest.approx(two_loops, rel=1e-6)
    # the gap to the 50-mer sum is exactly the analytic l >= 3 loops
    rest = sum(analytic.loop_energy_term(ts, l) for l in range(3, 51))
    assert float(r3["analytic_50mer_boson"]) - float(r3["quad_dimer_boson"]) == pytest.approx(
        rest, rel=1e-5)


def test_meanfield_demo_single_sho(tmp_path, capsys):
    cfg = tmp_path / "one.ini"
    cfg.write_text("[meanfield-demo]\nbeta = 1\nn_particles = 1\nconfinement = 1\n")
    code, out, _ = _run(capsys, "meanfield-demo", "--config", str(cfg))
    assert code == 0
    row = _rows(out)[0]
    assert float(row["omega"]) == pytest.approx(1.0)
    assert float(row["q_bar"]) == pytest.approx(0.0, abs=1e-12)
    assert row["valid"] == "1"


def test_meanfield_demo_lj_dimer(tmp_path, capsys):
    cfg = tmp_path / "two.ini"
    cfg.write_text("[meanfield-demo]\nbeta = 1\nn_particles = 2\njitter = 0\n")
    code, out, _ = _run(capsys, "meanfield-demo", "--config", str(cfg))
    assert code == 0
    rows = _rows(out)
    assert [r["particle"] for r in rows] == ["0", "1", "total"]
    for r in rows[:2]:
        assert float(r["omega"]) ** 2 == pytest.approx(28.573, abs=1e-3)


def test_meanfield_demo_ejected(tmp_path, capsys):
    cfg = tmp_path / "eject.ini"
    cfg.write_text("[meanfield-demo]\nbeta = 1\nn_particles = 3\neject = 2\n")
    code, out, _ = _run(capsys, "meanfield-demo", "--config", str(cfg))
    assert code == 0
    assert _rows(out)[2]["valid"] == "0"


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\nbeta = 0.5\nz = 0.5\n\n[grand-potential]\nbeta = 1, 2\nnmax = 8\n")
    c = load_config("grand-potential", str(cfg))
    assert c["beta"] == [1.0, 2.0] and c["z"] == 0.5 and c["nmax"] == 8
    c = load_config("grand-potential", str(cfg), {"beta": "3", "nmax": None})
    assert c["beta"] == [3.0] and c["nmax"] == 8
    assert load_config("energy", str(cfg))["beta"] == [0.5]


@pytest.mark.parametrize("argv", [
    ["energy", "--beta", ""],
    ["energy", "--beta", "0,1"],
    ["energy", "--stats", "anyon"],
    ["energy", "--nmax", "eight"],
    ["energy", "--config", "/nonexistent/qsm.ini"],
    ["meanfield-demo", "--beta", "1,2"],
    ["frobnicate"],
])
def test_errors_are_one_line(capsys, argv):
    code, out, err = _run(capsys, *argv)
    assert code != 0
    assert err.startswith("qsm: error:") and err.count("\n") == 1


def test_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[run]\ntemperature = 3\n")
    code, _, err = _run(capsys, "energy", "--config", str(cfg))
    assert code != 0 and "temperature" in err


def test_csv_format_is_deterministic(tmp_path, capsys):
    path = tmp_path / "gp.csv"
    runs = []
    for _ in range(2):
        assert main(["grand-potential", "--beta", "0.7, 1.3", "--out", str(path)]) == 0
        runs.append(path.read_bytes())
    raw = runs[0]
    assert raw == runs[1]
    assert b"\r" not in raw and raw.endswith(b"\n")
    text = raw.decode()
    assert text.startswith("# qsm grand-potential\n")
    assert "# beta = 0.7, 1.3\n" in text
    row = _rows(text)[0]
    assert len(row["analytic_l1"].replace(".", "").lstrip("0")) <= 12
    assert float(row["analytic_l1"]) == pytest.approx(
        analytic.loop_term(ThermoState(0.7), 1), rel=1e-11)


def test_console_script_and_workers(tmp_path):
    outs = set()
    for workers in ("1", "4"):
        env = dict(os.environ, QSM_WORKERS=workers)
        res = subprocess.run([sys.executable, "-m", "qsm.cli", "energy", "--beta", "0.5,2"],
                             env=env, capture_output=True, text=True, check=True)
        outs.add(res.stdout)
    assert len(outs) == 1
    res = subprocess.run([sys.executable, "-m", "qsm.cli", "energy", "--z", "-1"],
                         capture_output=True, text=True)
    assert res.returncode != 0 and res.stderr.count("\n") == 1


def test_config_error_type():
    with pytest.raises(ConfigError):
        load_config("energy", overrides={"d": "4"})
