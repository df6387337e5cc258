import io
import json
import math

import numpy as np
import pytest

from waistlab.cli import build_parser, load_config, main, parse_samples, run
from waistlab.report import dumps, jsonable, svg_plot, write_csv


def _run(argv):
    buf = io.StringIO()
    code, report = run(argv, stdout=buf)
    return code, report, buf.getvalue()


def test_parse_samples():
    assert parse_samples("1e7") == 10_000_000
    assert parse_samples("250000") == 250_000
    for bad in ("0", "-3", "1.5", "abc", "inf"):
        with pytest.raises(Exception):
            parse_samples(bad)


def test_volumes_examples():
    code, rep, _ = _run(["volumes", "--unit-ball", "2", "--ball", "k=2", "kappa=1", "R=1.5707963",
                         "--fubini", "m=1", "l=1"])
    assert code == 0
    rows = rep["results"]
    assert rows[0]["value"] == pytest.approx(math.pi)
    assert rows[1]["value"] == pytest.approx(2 * math.pi, rel=1e-7)
    assert rows[2]["value"] == pytest.approx(math.pi, rel=1e-12) and rows[2]["passed"]
    assert rep["verdicts"] == {"fubini(m=1,l=1)": "pass"}


def test_volumes_default_table_and_tube():
    code, rep, out = _run(["volumes"])
    assert code == 0 and len(rep["results"]) == 11
    code, rep, _ = _run(["volumes", "--tube", "n=2", "k=1", "t=1.5707963267948966"])
    assert rep["results"][0]["value"] == pytest.approx(4 * math.pi)


def test_volumes_domain_error_exit_code():
    assert _run(["volumes", "--ball", "k=2", "kappa=1", "R=4"])[0] == 2
    assert _run(["volumes", "--ball", "k=2", "kappa=1"])[0] == 2
    assert _run(["volumes", "--unit-ball", "-1"])[0] == 2


def test_transport_cap_example():
    code, rep, _ = _run(["transport", "--rho", "sphere", "--sigma", "cap", "--k", "1", "--R", "1.5707963",
                         "--size", "200"])
    assert code == 0
    res = rep["results"]
    assert res["A"] == pytest.approx(2.0, rel=1e-6)
    assert res["passed"] and res["ratio_certificate"] and res["c_below_one"]


def test_transport_identity_reports_boundary_equality():
    code, rep, _ = _run(["transport", "--rho", "sphere", "--sigma", "sphere", "--k", "2", "--size", "200"])
    assert code == 0
    cond = rep["results"]["radial_condition"]
    assert cond["boundary_equality"] and not cond["violations"]


def test_transport_hyperbolic_example():
    code, rep, _ = _run(["transport", "--rho", "sphere", "--sigma", "hyperbolic-ball", "--k", "2", "--R", "1",
                         "--size", "200"])
    assert code == 0 and rep["results"]["ratio_certificate"]


def test_transport_usage_errors():
    assert _run(["transport", "--sigma", "cap"])[0] == 2
    assert _run(["transport", "--sigma", "bogus"])[0] == 2


def test_kp_two_balls_merge():
    code, rep, _ = _run(["kp", "--scenario", "two-balls-merge", "--t", "1"])
    assert code == 0
    res = rep["results"]
    assert res["exact"]
    assert res["endpoints"] == pytest.approx([2 * math.pi, math.pi])
    assert res["lens_endpoints"] == pytest.approx(res["endpoints"])
    assert np.all(np.diff(res["volume"]) <= 1e-12)
    assert _run(["kp", "--scenario", "nope"])[0] == 2


def test_waist_cube_max_example():
    code, rep, out = _run(["waist", "--scenario", "cube-max", "--n", "3", "--t", "0.01", "--samples", "1e7",
                           "--seed", "7"])
    assert code == 0
    assert rep["results"]["ratio"] == pytest.approx(6.0, rel=0.05)
    assert "cube-max: pass" in out


def test_waist_unknown_scenario_and_expected_violation():
    assert _run(["waist", "--scenario", "nope"])[0] == 2
    code, rep, _ = _run(["waist", "--scenario", "two-punctures"])
    assert code == 0 and rep["verdicts"] == {"two-punctures": "expected-violation"}


def test_content_circle_and_failed_verdict():
    code, rep, _ = _run(["content", "--set", "circle", "--t-levels", "6", "--samples", "5e5"])
    assert code == 0
    m = rep["results"]["minkowski"]
    assert abs(m["lower"] - 2 * math.pi) < 0.02 * 2 * math.pi
    # a schedule far from the limit misses the 2% window: mathematical verdict fails
    code, rep, _ = _run(["content", "--set", "segment", "--t-max", "0.5", "--samples", "1e5"])
    assert code == 1 and rep["verdicts"]["minkowski-content"] == "fail"
    # a budget below the estimator minimum is a validation error
    assert _run(["content", "--set", "segment", "--samples", "10"])[0] == 2


def test_json_to_stdout_is_one_document():
    code, _, out = _run(["volumes", "--unit-ball", "3", "--json"])
    doc = json.loads(out)
    assert set(doc) == {"command", "config", "results", "verdicts", "wall_clock", "version"}
    assert doc["config"]["seed"] == 20170601


def test_artifacts(tmp_path):
    out = tmp_path / "o"
    code, _, _ = _run(["waist", "--scenario", "sphere-cap-distance", "--samples", "2e5", "--out", str(out),
                       "--json", "--csv", "--svg"])
    assert code == 0
    doc = json.loads((out / "waist.json").read_text())
    assert doc["results"]["verdict"] == "pass"
    raw = (out / "waist.csv").read_bytes()
    assert b"\r\n" not in raw and raw.startswith(b"level,value\n")
    svg = (out / "waist.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg
    code, _, _ = _run(["kp", "--scenario", "identity", "--samples", "1e5", "--out", str(out), "--csv", "--svg"])
    assert (out / "kp.csv").read_text().startswith("alpha,volume,stderr\n")


def test_seed_resolution(tmp_path, monkeypatch):
    monkeypatch.setenv("WAISTLAB_SEED", "11")
    assert _run(["volumes", "--unit-ball", "1"])[1]["config"]["seed"] == 11
    assert _run(["volumes", "--unit-ball", "1", "--seed", "12"])[1]["config"]["seed"] == 12
    monkeypatch.delenv("WAISTLAB_SEED")
    assert _run(["volumes", "--unit-ball", "1"])[1]["config"]["seed"] == 20170601
    assert _run(["volumes", "--seed", "-1"])[0] == 2


def test_config_files(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nseed = 5\nsamples = 2e5\n\n[waist]\nscenario = cube-max\nn = 2\nt = 0.02\n")
    assert load_config(ini, "waist") == {"seed": "5", "samples": "2e5", "scenario": "cube-max", "n": "2",
                                         "t": "0.02"}
    code, rep, _ = _run(["waist", "--config", str(ini)])
    assert code == 0
    cfg = rep["config"]
    assert cfg["seed"] == 5 and cfg["samples"] == 200_000 and cfg["n"] == 2 and cfg["t"] == 0.02
    # explicit flags win over the file
    assert _run(["waist", "--config", str(ini), "--n", "3"])[1]["config"]["n"] == 3
    js = tmp_path / "c.json"
    js.write_text(json.dumps({"run": {"seed": 9}, "kp": {"scenario": "identity", "samples": 100000}}))
    code, rep, _ = _run(["kp", "--config", str(js)])
    assert code == 0 and rep["config"]["seed"] == 9 and rep["results"]["name"] == "identity"
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nbogus = 1\n")
    assert _run(["volumes", "--config", str(bad)])[0] == 2
    assert _run(["volumes", "--config", str(tmp_path / "missing.ini")])[0] == 2


def test_workers_do_not_change_results():
    base = ["kp", "--scenario", "contraction-20", "--samples", "3e5", "--seed", "4"]
    a = _run(base + ["--workers", "1"])[1]
    b = _run(base + ["--workers", "4"])[1]
    assert dumps(a["results"]) == dumps(b["results"])
    assert dumps(a["verdicts"]) == dumps(b["verdicts"])


def test_usage_errors_exit_two():
    assert _run([])[0] == 2
    assert _run(["volumes", "--workers", "0"])[0] == 2
    assert main(["volumes", "--unit-ball", "2"]) == 0
    assert build_parser().parse_args(["kp"]).command == "kp"


def test_jsonable_and_dumps():
    obj = {"a": np.float64(1.5), "b": np.arange(3), "c": np.bool_(True), "d": float("nan"), 3: (np.int32(2),)}
    j = jsonable(obj)
    assert j == {"a": 1.5, "b": [0, 1, 2], "c": True, "d": "nan", "3": [2]}
    assert json.loads(dumps(obj))["a"] == 1.5
    x = 0.1 + 0.2
    assert json.loads(dumps({"x": x}))["x"] == x


def test_write_csv_and_svg():
    buf = io.StringIO()
    write_csv(buf, ["a", "b"], [[1, 0.1 + 0.2], ["x", np.float64(2.5)]])
    assert buf.getvalue() == "a,b\n1,0.30000000000000004\nx,2.5\n"
    svg = svg_plot([0, 1, 2], [1, 3, 2], [0.1, 0.2, 0.1], title="a<b", hline=2.5)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert "a&lt;b" in svg and svg.count("<circle") == 3 and "stroke-dasharray" in svg
    assert svg_plot([1.0], [1.0]).count("<polyline") == 1
