import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from conftest import run_cli
from stalebc.channels import StateChannel, make_blackwell_with_state
from stalebc.cli import main, round_floats
from stalebc.reproduce import report_schema


def doc_of(argv, capsys):
    code, out, _ = run_cli(argv, capsys)
    assert code == 0
    return json.loads(out)


def test_rate_ts_erasure(capsys):
    d = doc_of(["rate", "ts", "--channel", "erasure:0.5"], capsys)
    assert d["value"] == pytest.approx(0.3, abs=1e-9)
    assert d["argument"]["p_star"] == pytest.approx(0.4, abs=1e-9)
    assert d["term_breakdown"]["C1"] == pytest.approx(0.5, abs=1e-9)
    m = d["manifest"]
    assert m["command"] == "rate ts"
    assert m["parameters"]["channel"] == "erasure:0.5"
    assert m["seed"] == 7


def test_rate_ts_finite_field_and_blackwell(capsys):
    assert doc_of(["rate", "ts", "--channel", "ff:2"], capsys)["value"] == pytest.approx(
        2 / 3, abs=1e-6)
    d = doc_of(["rate", "ts", "--channel", "blackwell"], capsys)
    assert d["value"] == pytest.approx(0.5989, abs=1e-3)


def test_rate_sp_reference_point(capsys):
    d = doc_of(["rate", "sp", "--channel", "blackwell", "--q1", "0.5", "--a1", "0.13628",
                "--b1", "0.23025"], capsys)
    assert d["value"] >= 0.6103
    assert d["argument"]["figure_params"]["a1"] == 0.13628


def test_rate_sp_degenerate(capsys):
    d = doc_of(["rate", "sp", "--channel", "blackwell", "--a1", "1", "--b1", "0",
                "--q1", "0.5"], capsys)
    assert d["value"] == d["term_breakdown"]["common_layer_rate"]


def test_rate_sp_explicit_needs_three_inputs(capsys):
    code, _, err = run_cli(["rate", "sp", "--channel", "erasure:0.5"], capsys)
    assert code == 2 and "3-input" in err


def test_bound_copy_auxiliary(capsys):
    d = doc_of(["bound", "--channel", "erasure:0.5", "--point", "u-equals-x"], capsys)
    assert d["value"] == 0.0
    assert d["gap_to_best_inner"] == pytest.approx(-0.3, abs=1e-9)


def test_bound_reference_point(capsys, tmp_path):
    fig = tmp_path / "bounds.png"
    d = doc_of(["bound", "--channel", "blackwell", "--point", "paper",
                "--figure", str(fig)], capsys)
    assert d["value"] >= 0.653 - 1e-3
    assert d["best_inner"]["scheme"] == "superposition_at_reference_point"
    assert d["gap_to_best_inner"] == pytest.approx(0.6529893 - 0.6103007, abs=1e-6)
    assert fig.stat().st_size > 1000
    d2 = doc_of(["bound", "--channel", "blackwell", "--point", "reference"], capsys)
    assert d2["value"] == d["value"]


def test_bound_reference_point_blackwell_only(capsys):
    code, _, err = run_cli(["bound", "--channel", "ff:2", "--point", "reference"], capsys)
    assert code == 2


def test_bound_needs_a_mode(capsys):
    code, _, _ = run_cli(["bound", "--channel", "blackwell"], capsys)
    assert code == 2


@pytest.mark.parametrize("argv", [
    ["rate", "ts", "--channel", "nonexistent.json"],
    ["rate", "ts", "--channel", "erasure:2"],
    ["rate", "ts", "--channel", "ff:4"],
    ["simulate", "--eps", "1.5", "--bits", "10", "--trials", "1"],
    ["simulate", "--sweep", "0.2", "0", "--bits", "10", "--trials", "1"],
])
def test_input_errors_exit_2(argv, capsys):
    code, out, err = run_cli(argv, capsys)
    assert code == 2
    assert err.startswith("error:")


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["rate", "ts"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["simulate", "--bits", "0"])
    assert e.value.code == 2


def test_unreadable_channel_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("[1, 2")
    code, _, err = run_cli(["rate", "ts", "--channel", str(p)], capsys)
    assert code == 2 and "cannot read" in err


def test_simulate_csv(capsys):
    code, out, _ = run_cli(["simulate", "--eps", "0.5", "--bits", "2000", "--trials", "100",
                            "--seed", "7"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# {")
    assert json.loads(lines[0][2:])["command"] == "simulate"
    assert lines[1] == "eps,empirical_rate,stderr,analytic_rate"
    eps, emp, se, ana = map(float, lines[2].split(","))
    assert abs(emp - 0.3) <= 0.03 * 0.3
    assert ana == 0.3
    assert "\r" not in out


def test_simulate_sweep_shape_and_determinism(capsys, tmp_path):
    fig = tmp_path / "curve.png"
    argv = ["simulate", "--sweep", "--bits", "200", "--trials", "3", "--seed", "3"]
    code, out1, _ = run_cli(argv + ["--figure", str(fig)], capsys)
    assert code == 0
    rows = out1.splitlines()[2:]
    assert len(rows) == 9
    assert [float(r.split(",")[0]) for r in rows] == pytest.approx(np.arange(1, 10) / 10)
    code, out2, _ = run_cli(argv + ["--figure", str(fig)], capsys)
    assert out1 == out2
    assert fig.read_bytes()[:4] == b"\x89PNG"


def test_simulate_json_format(capsys):
    d = doc_of(["simulate", "--eps", "0.3", "--bits", "100", "--trials", "4",
                "--format", "json"], capsys)
    assert len(d["rows"]) == 1 and d["rows"][0]["failures"] == 0


def test_simulate_out_file_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "sub" / "b.csv"
    for p in (a, b):
        run_cli(["simulate", "--eps", "0.4", "--bits", "300", "--trials", "5", "--out", str(p)],
                capsys)
    assert a.read_bytes() == b.read_bytes()
    assert "out" not in json.loads(a.read_text().splitlines()[0][2:])["parameters"]


def test_manifest_timestamp_controls(capsys, monkeypatch):
    d = doc_of(["rate", "ts", "--channel", "erasure:0.1"], capsys)
    assert d["manifest"]["timestamp"] == "1970-01-01T00:00:00Z"
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    d = doc_of(["rate", "ts", "--channel", "erasure:0.1"], capsys)
    assert d["manifest"]["timestamp"] == "2023-11-14T22:13:20Z"
    d = doc_of(["rate", "ts", "--channel", "erasure:0.1", "--timestamp",
                "2026-01-02T03:04:05Z"], capsys)
    assert d["manifest"]["timestamp"] == "2026-01-02T03:04:05Z"


def test_ten_significant_digits():
    assert round_floats({"a": [1 / 3, np.float64(2 / 3)], "b": 7}) == {
        "a": [0.3333333333, 0.6666666667], "b": 7}


def test_channel_validate_and_export(tmp_path, capsys):
    code, out, _ = run_cli(["channel", "export", "blackwell"], capsys)
    assert code == 0
    p = tmp_path / "bw.json"
    p.write_text(out)
    d = doc_of(["channel", "validate", str(p)], capsys)
    assert d["valid"] and d["symmetric"] and d["deterministic"]
    assert d["pi"] == [1, 0] and d["pi_is_involution"]


def test_channel_validate_reports_asymmetry(tmp_path, capsys):
    ch = make_blackwell_with_state()
    p = tmp_path / "asym.json"
    StateChannel(ch.state_pmf, ch.kernel, (0, 1)).save(p)
    d = doc_of(["channel", "validate", str(p)], capsys)
    assert d["valid"] and not d["symmetric"]
    assert "differs" in d["symmetry_error"]


def test_channel_validate_invalid_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"x_size": 2, "y_size": 2, "s_size": 1, "state_pmf": [1.0],
                             "kernel": [[[0.5, 0.5, 0.5, 0.5]], [[1, 0, 0, 0]]]}))
    code, _, err = run_cli(["channel", "validate", str(p)], capsys)
    assert code == 2 and "sums to" in err


def test_reproduce_json_matches_schema(reproduce_run):
    assert reproduce_run["code"] == 0
    jsonschema.validate(reproduce_run["doc"], report_schema())
    ids = [r["id"] for r in reproduce_run["doc"]["rows"]]
    assert len(ids) == len(set(ids))
    assert reproduce_run["doc"]["passed"]


def test_reproduce_schema_rejects_junk():
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"manifest": {}, "passed": True, "rows": []}, report_schema())


def test_reproduce_negative_control(tmp_path, capsys):
    # swapping the first two input letters keeps the channel symmetric and
    # deterministic but no longer matches the scalar formula's labelling
    ch = make_blackwell_with_state()
    p = tmp_path / "perturbed.json"
    StateChannel(ch.state_pmf, ch.kernel[[1, 0, 2]], ch.pi).save(p)
    out_json = tmp_path / "r.json"
    code, out, _ = run_cli(["reproduce", "--blackwell", str(p), "--skip-simulation",
                            "--json", str(out_json)], capsys)
    assert code == 1
    rows = {r["id"]: r for r in json.loads(out_json.read_text())["rows"]}
    assert not rows["blackwell_scalar_formula_grid"]["passed"]
    assert rows["erasure_ts_eps0.5"]["passed"]
    assert "FAIL" in out


def test_module_entry_point_exit_codes():
    ok = subprocess.run([sys.executable, "-m", "stalebc", "rate", "ts", "--channel",
                         "erasure:0.5"], capture_output=True, text=True)
    assert ok.returncode == 0 and json.loads(ok.stdout)["value"] == 0.3
    bad = subprocess.run([sys.executable, "-m", "stalebc", "rate", "ts", "--channel",
                          "nope"], capture_output=True, text=True)
    assert bad.returncode == 2
