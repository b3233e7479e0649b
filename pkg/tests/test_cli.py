import json
import subprocess
import sys

import pytest

from gkdv_stab.cli import main, read_config, worker_count


def run(argv, capsys):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_analyze_kdv_is_stable(capsys):
    code, out, _ = run(["analyze", "--p", "1", "--a", "0", "--c", "1", "--E", "-0.05"], capsys)
    assert code == 0
    assert json.loads(out)["verdict"] == "OrbitallyStable"


def test_analyze_p5_near_separatrix_is_unstable(capsys):
    code, out, _ = run(["analyze", "--p", "5", "--a", "0", "--c", "1", "--s", "0.9999"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["verdict"] == "SpectrallyUnstable"
    assert doc["brackets"]["bracket_TMP_aEc"] < 0


def test_analyze_above_separatrix_exits_2(capsys):
    code, out, err = run(["analyze", "--p", "1", "--a", "0", "--c", "1", "--E", "0.5"], capsys)
    assert code == 2 and out == ""
    assert "not in Omega" in err


def test_strict_band_exits_3(capsys):
    code, _, err = run(["analyze", "--p", "1", "--E", "-0.05", "--band", "1e4", "--strict"], capsys)
    assert code == 3
    assert "sign" in err


def test_lenient_band_reports_indeterminate(capsys):
    code, out, _ = run(["analyze", "--p", "1", "--E", "-0.05", "--band", "1e4"], capsys)
    assert code == 0 and json.loads(out)["verdict"] == "Indeterminate"


@pytest.mark.parametrize("argv", [
    ["analyze", "--E", "nan"],
    ["analyze", "--E", "inf"],
    ["analyze", "--p", "0.5", "--E", "-0.1"],
    ["profile", "--E", "-0.1", "--n", "0"],
    ["sweep", "--E", "1:0:x"],
    ["evolve", "--E", "-0.1", "--periods", "-1"],
    ["analyze", "--E", "-0.1", "--s", "0.5"],
])
def test_invalid_numbers_rejected_before_computing(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_kdv_energy_sweep_all_stable(capsys):
    code, out, _ = run(["sweep", "--p", "1", "--c", "1", "--a", "0", "--E", "-0.16:-0.005:6"], capsys)
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert len(rows) == 6
    assert all(r.endswith(",OrbitallyStable") for r in rows)


def test_p3_near_homoclinic_bracket_positive(capsys):
    code, out, _ = run(["sweep", "--p", "3", "--s", "0.999,0.9999"], capsys)
    assert code == 0
    header, *rows = [line.split(",") for line in out.strip().splitlines()]
    col = header.index("bracket_TMP_aEc")
    assert all(float(r[col]) > 0 for r in rows)


def test_empty_sweep_exits_2(capsys):
    code, _, _ = run(["sweep", "--p", "1", "--E", "0.5,0.6"], capsys)
    assert code == 2
    code, _, _ = run(["sweep", "--p", "1", "--E", "-0.1:-0.05:0"], capsys)
    assert code == 2


def test_sweep_rows_independent_of_thread_count(capsys, monkeypatch):
    argv = ["sweep", "--p", "2", "--a", "-0.05,0,0.05", "--s", "0.2,0.6"]
    _, one, _ = run(argv + ["--threads", "1"], capsys)
    _, four, _ = run(argv + ["--threads", "4"], capsys)
    monkeypatch.setenv("GKDV_STAB_THREADS", "3")
    _, env, _ = run(argv, capsys)
    assert one == four == env
    assert [line.split(",")[0] for line in one.splitlines()[1:]] == [str(i) for i in range(6)]


def test_worker_count_precedence(monkeypatch):
    monkeypatch.delenv("GKDV_STAB_THREADS", raising=False)
    assert worker_count(None) == 1
    monkeypatch.setenv("GKDV_STAB_THREADS", "5")
    assert worker_count(None) == 5
    assert worker_count(2) == 2


def test_outputs_reproducible(capsys):
    argv = ["evolve", "--p", "1", "--E", "-0.05", "--perturbation", "noise", "--seed", "7",
            "--periods", "1", "--n-modes", "64", "--output-every", "0.25"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert a == b and len(a.splitlines()) == 6


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\np = 1\nE = -0.05\nn = 64\n")
    code, out, _ = run(["--config", str(cfg), "profile"], capsys)
    assert code == 0 and len(out.splitlines()) == 65
    code, out, _ = run(["--config", str(cfg), "profile", "--n", "128"], capsys)
    assert code == 0 and len(out.splitlines()) == 129


def test_config_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("p = 1\nbogus = 3\n")
    with pytest.raises(SystemExit) as exc:
        main(["--config", str(cfg), "analyze", "--E", "-0.05"])
    assert exc.value.code == 2
    assert "bogus" in capsys.readouterr().err


def test_config_values_validated(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("E = abc\n")
    with pytest.raises(SystemExit):
        main(["--config", str(cfg), "analyze"])


def test_read_config_format(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n-modes = 64   # trailing comment\n\nseed=3\n")
    assert read_config(cfg) == {"n_modes": "64", "seed": "3"}
    cfg.write_text("no equals sign\n")
    with pytest.raises(ValueError):
        read_config(cfg)


def test_verify_tampered_quadrature_fails(capsys):
    code, out, _ = run(["verify", "--level", "fast", "--tamper-action", "1e-4"], capsys)
    assert code == 1
    line = next(s for s in out.splitlines() if "action_identity" in s)
    assert line.startswith("FAIL")


def test_cnoidal_requires_one_of_k_and_E(capsys):
    assert run(["cnoidal"], capsys)[0] == 1
    assert run(["cnoidal", "--k", "1.2"], capsys)[0] == 2
    code, out, _ = run(["cnoidal", "--E", "-0.1"], capsys)
    assert code == 0 and json.loads(out)["wave_speed"] == 1.0


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "gkdv_stab.cli", "analyze", "--E", "0.5"],
                         capture_output=True, text=True)
    assert res.returncode == 2
