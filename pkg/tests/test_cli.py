import json
import math

import pytest

from torus_hopf.cli import SCHEMA, main, render_json, run


def invoke(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def test_spectrum_vdp_row(capsys):
    code, out, _ = invoke(capsys, "spectrum", "--variant", "vdp", "-N", "3", "--delta", "1",
                          "-a", "0", "-b", "1")
    assert code == 0
    assert out.splitlines()[0] == f"# {SCHEMA}"
    rows = csv_rows(out)
    assert len(rows) == 14
    row = next(r for r in rows if (r["t1"], r["t2"], r["t3"]) == ("1", "0", "0"))
    assert float(row["K"]) == pytest.approx(4.0)
    assert sorted([float(row["lambda1_im"]), float(row["lambda2_im"])]) == pytest.approx([-2, 2])
    assert abs(float(row["lambda1_re"])) < 1e-15


def test_spectrum_vdpl_uncoupled(capsys):
    code, out, _ = invoke(capsys, "spectrum", "--variant", "vdpl", "-N", "5")
    rows = csv_rows(out)
    assert code == 0 and len(rows) == 63
    assert all(float(r["critical_a"]) == 0.0 for r in rows)


def test_csv_is_deterministic(capsys):
    argv = ["catalog", "--variant", "vdpl", "--delta", "0.3", "--zeta=-0.2", "--epsilon", "0.1"]
    _, a, _ = invoke(capsys, *argv)
    _, b, _ = invoke(capsys, *argv, "--workers", "1")
    assert a == b


def test_json_round_trip(capsys):
    code, report = run(["catalog", "--delta", "0.2", "--format", "json"])
    out, _ = capsys.readouterr()
    assert code == 0
    assert json.loads(out) == json.loads(render_json(report))
    data = json.loads(out)
    assert data["schema"] == SCHEMA
    assert len(data["rows"]) == len(report.rows)


def test_catalog_rows(capsys):
    _, out, _ = invoke(capsys, "catalog", "--delta", "0.2", "--format", "json")
    data = json.loads(out)["rows"]
    ones = [r for r in data if (r["t1"], r["t2"], r["t3"]) == (1, 1, 1)]
    assert len(ones) == 27
    z = next(r for r in ones if r["symmetry"] == "(Z3 x Z3 x Z3)^(1,1,1)")
    assert z["branches"] == 8
    _, out, _ = invoke(capsys, "catalog", "--variant", "vdpl", "--format", "json")
    data = json.loads(out)["rows"]
    assert len(data) == 14


def test_stability_table(capsys):
    for N in ("3", "5", "7"):
        code, out, _ = invoke(capsys, "stability", "--variant", "vdpl", "--table", "-N", N,
                              "--format", "json")
        rows = json.loads(out)["rows"]
        assert code == 0 and len(rows) == 8
        first = rows[0]
        assert first["a_star"] == 0.0 and (first["t1"], first["t2"], first["t3"]) == (0, 0, 0)
        for r in rows:
            assert r["a_star"] == pytest.approx(r["max_critical_a"], abs=1e-14)


def test_stability_instability_scan(capsys):
    _, out, _ = invoke(capsys, "stability", "-N", "3", "--delta=-1", "--format", "json")
    rows = json.loads(out)["rows"]
    scan = [r for r in rows if r["check"] == "instability_scan"]
    assert scan[0]["witness"] == "(1,0,0)"
    assert scan[0]["value"] == pytest.approx(-2.0)


def test_simulate_columns(capsys):
    code, out, _ = invoke(capsys, "simulate", "--variant", "vdpl", "-a", "0.1", "--t-end", "1",
                          "--samples", "5", "--init", "sync")
    lines = [ln for ln in out.splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    assert code == 0
    assert header[:3] == ["t", "x_000", "x_001"] and header[-1] == "y_222"
    assert len(header) == 55 and len(lines) == 6


def test_orbit_verify_pipeline(capsys, tmp_path):
    path = tmp_path / "orbit.json"
    code, out, _ = invoke(capsys, "orbit", "--variant", "vdpl", "-N", "3", "--delta=-0.1",
                          "--zeta=-0.1", "--epsilon=-0.1", "-a", "0.05", "--save", str(path),
                          "--format", "json")
    assert code == 0
    fields = {r["field"]: r["value"] for r in json.loads(out)["rows"] if r["index"] is None}
    assert abs(fields["period"] - 2 * math.pi) / (2 * math.pi) <= 0.02
    assert fields["residual"] <= 1e-8
    assert fields["symmetry_holds"]
    code, out, _ = invoke(capsys, "verify", "--orbit", str(path), "--symmetry",
                          "(Z3 x Z3 x Z3)^(0,0,0)", "--format", "json")
    row = json.loads(out)["rows"][0]
    assert code == 0 and row["holds"] and row["max_defect"] < 1e-4
    code, out, _ = invoke(capsys, "verify", "--orbit", str(path), "--symmetry",
                          "(Z3 x Z3 x Z3)^(1,1,1)", "--format", "json")
    row = json.loads(out)["rows"][0]
    assert code == 0 and not row["holds"]


def test_trace_command(capsys):
    code, out, _ = invoke(capsys, "trace", "--delta", "0.2", "--mode", "1,1,1", "--symmetry",
                          "(Z3 x Z3 x Z3)^(1,1,1)", "--a-values", "0.01,0.02,0.03",
                          "--format", "json")
    data = json.loads(out)
    assert code == 0 and len(data["rows"]) == 3
    assert all(r["symmetry_holds"] for r in data["rows"])
    assert data["meta"]["fit_r2"] > 0.99


def test_existence_catalog_and_empty(capsys):
    code, out, _ = invoke(capsys, "existence", "-p", "10", "--format", "json")
    assert code == 0 and json.loads(out)["meta"]["admissible_modes"] == 14
    code, out, err = invoke(capsys, "existence", "-p", "3")
    assert code == 4 and out == ""
    payload = json.loads(err)
    assert "no admissible modes" in payload["message"]


def test_resonant_period_exit_code(capsys):
    code, _, err = invoke(capsys, "existence", "-p", repr(2 * math.pi))
    payload = json.loads(err)
    assert code == 4 and payload["error"] == "RejectedResonantPeriod"
    assert payload["hits"] == [[1, 1.0]]


def test_existence_short_grid_exit_code(capsys):
    code, out, _ = invoke(capsys, "existence", "-p", "10", "-a", "1", "--mode", "0,0,0",
                          "--nu-grid", "0.05,0.1", "--format", "json")
    assert code == 3
    assert json.loads(out)["meta"]["found"] is False


@pytest.mark.parametrize("argv", [
    ["spectrum", "-N", "4"],
    ["spectrum", "--nu", "0"],
    ["spectrum", "--variant", "other"],
    ["spectrum", "--bogus", "1"],
    ["nonsense"],
    ["verify", "--orbit", "/nonexistent.json", "--symmetry", "G x S1"],
])
def test_config_errors(capsys, argv):
    code, _, err = invoke(capsys, *argv)
    assert code == 2
    assert json.loads(err)["error"] == "ConfigError"


def test_config_file_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# manifest\nvariant = vdpl\ndelta = 0.5\nzeta=0.25\n")
    _, out, _ = invoke(capsys, "spectrum", "--config", str(cfg), "--delta", "1", "--format", "json")
    meta = json.loads(out)["meta"]
    assert meta["variant"] == "vdpl" and meta["delta"] == 1.0 and meta["zeta"] == 0.25
    cfg.write_text("unknown_key=1\n")
    code, _, err = invoke(capsys, "spectrum", "--config", str(cfg))
    assert code == 2 and "unknown_key" in json.loads(err)["message"]


def test_not_converged_exit_code(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"samples": [[0.0] * 54] * 4, "period": 1.0, "residual": 0.5,
                                "params": {"N": 3}}))
    code, _, err = invoke(capsys, "verify", "--orbit", str(path), "--symmetry", "G x S1")
    assert code == 3 and json.loads(err)["error"] == "NotConverged"


def test_output_file(capsys, tmp_path):
    path = tmp_path / "out.csv"
    code, out, _ = invoke(capsys, "spectrum", "--output", str(path))
    assert code == 0 and out == ""
    assert path.read_text().startswith(f"# {SCHEMA}\n")
