"""Every JSON and CSV output of the CLI against the documented schemas."""

import csv
import json
from pathlib import Path

import jsonschema
import pytest

from gkdv_stab.cli import main
from gkdv_stab.evolution import write_snapshot_csv
from gkdv_stab.hill import hill_report, write_discriminant_csv
from gkdv_stab.quadrature import reconstruct_profile

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"
COLUMNS = json.loads((SCHEMAS / "csv_columns.json").read_text())


def schema(name):
    s = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(s)
    return s


def roundtrip_json(path, name):
    text = Path(path).read_text()
    doc = json.loads(text)
    jsonschema.validate(doc, schema(name))
    # writing the parsed document back gives the same bytes
    assert json.dumps(doc, indent=2, sort_keys=True) + "\n" == text
    return doc


def read_csv(path, name):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == COLUMNS[name]
    assert all(len(r) == len(rows[0]) for r in rows[1:])
    return rows


def test_analyze_report(tmp_path):
    out = tmp_path / "r.json"
    assert main(["analyze", "--p", "1", "--E", "-0.05", "--out", str(out)]) == 0
    doc = roundtrip_json(out, "index_report")
    assert doc["verdict"] == "OrbitallyStable"


def test_evans_outputs(tmp_path):
    out, summ = tmp_path / "d.csv", tmp_path / "d.json"
    assert main(["evans", "--p", "5", "--s", "0.9999", "--n", "11", "--scaled", "--mu-min", "-2",
                 "--mu-max", "2", "--out", str(out), "--summary", str(summ)]) == 0
    rows = read_csv(out, "evans")
    assert len(rows) == 12
    values = [float(r[0]) for r in rows[1:]]
    assert values == sorted(values)
    doc = roundtrip_json(summ, "evans_summary")
    assert len(doc["real_roots"]) == 1


def test_profile_outputs(tmp_path):
    out, summ = tmp_path / "p.csv", tmp_path / "p.json"
    assert main(["profile", "--p", "2", "--s", "0.5", "--n", "64", "--out", str(out),
                 "--summary", str(summ)]) == 0
    rows = read_csv(out, "profile")
    assert len(rows) == 65
    doc = roundtrip_json(summ, "profile_summary")
    assert float(rows[-1][0]) < doc["T"]


@pytest.mark.parametrize("growth", [False, True])
def test_evolve_outputs(tmp_path, growth):
    out, summ = tmp_path / "s.csv", tmp_path / "s.json"
    argv = ["evolve", "--p", "1", "--E", "-0.05", "--periods", "2", "--n-modes", "64",
            "--output-every", "0.5", "--out", str(out), "--summary", str(summ)]
    if growth:
        argv.append("--growth")
    assert main(argv) == 0
    rows = read_csv(out, "series")
    assert len(rows) == 6
    doc = roundtrip_json(summ, "evolve_summary")
    assert ("growth" in doc) is growth


def test_cnoidal_report(tmp_path):
    out = tmp_path / "c.json"
    assert main(["cnoidal", "--k", "0.7", "--c", "1.3", "--a", "0.1", "--out", str(out)]) == 0
    doc = roundtrip_json(out, "cnoidal")
    assert max(doc["relative_difference"].values()) < 1e-10


def test_verify_report(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert main(["verify", "--level", "fast", "--out", str(out)]) == 0
    doc = roundtrip_json(out, "verify_report")
    assert doc["passed"] and len(doc["suites"]) == 12
    assert capsys.readouterr().out.count("PASS  ") == 12


def test_sweep_csv(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["sweep", "--p", "1", "--E", "-0.1,-0.05,0.5", "--out", str(out)]) == 0
    rows = read_csv(out, "sweep")
    assert [r[5] for r in rows[1:]] == ["ok", "ok", "NotInOmega"]


def test_library_csv_writers(tmp_path, kdv_point):
    prof = reconstruct_profile(kdv_point, 256)
    rep = hill_report(prof, n_nu=50, check_refinement=False)
    write_discriminant_csv(tmp_path / "h.csv", rep.discriminant_samples)
    rows = read_csv(tmp_path / "h.csv", "discriminant")
    assert len(rows) == 51
    x, u, _ = prof.uniform(32)
    write_snapshot_csv(tmp_path / "u.csv", x, u)
    rows = read_csv(tmp_path / "u.csv", "snapshot")
    assert [float(v) for v in rows[5]] == [x[4], u[4]]
