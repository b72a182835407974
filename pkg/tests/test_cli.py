import json

import numpy as np
import pytest

from poisson_sprays import report
from poisson_sprays.cli import main
from poisson_sprays.exceptions import ConfigError


def run_cli(tmp_path, *argv, name="out.json"):
    out = tmp_path / name
    code = main([*argv, "--output", str(out)])
    return code, json.loads(out.read_text()) if out.exists() else None


def test_list_examples(capsys):
    assert main(["list-examples"]) == 0
    text = capsys.readouterr().out
    assert "so3-star" in text and "non-poisson" in text


def test_verify_poisson_entry_passes(tmp_path):
    code, rep = run_cli(tmp_path, "verify", "--example", "heisenberg", "--count", "3", "--seed", "1",
                        "--checks", "jacobi,spray-axioms,realization,orthogonality")
    assert code == 0 and rep["status"]["all_passed"]
    names = {r["name"] for r in rep["records"]}
    assert names == {"jacobi", "spray-axiom1", "spray-homogeneity", "realization", "orthogonality"}
    assert set(rep["metadata"]) >= {"version", "config", "conventions", "integrator", "seed", "bivector"}


def test_verify_witness_fails_and_expectation_inverts(tmp_path):
    args = ("verify", "--example", "non-poisson-witness", "--count", "2", "--seed", "0", "--checks", "jacobi,realization")
    code, rep = run_cli(tmp_path, *args)
    assert code == 2
    witness = [r for r in rep["records"] if r["sample_id"] == "witness"]
    assert {r["name"] for r in witness} == {"jacobi", "realization"}
    assert all(not r["pass"] for r in witness)
    code, _ = run_cli(tmp_path, *args, "--expect", "non-poisson", name="b.json")
    assert code == 0


def test_config_errors_exit_3(tmp_path, capsys):
    assert main(["verify", "--example", "so3-star", "--count", "3"]) == 3
    assert "samples.seed" in capsys.readouterr().err
    assert main(["verify", "--example", "so4-star", "--count", "1", "--seed", "0"]) == 3
    assert "poisson.builtin" in capsys.readouterr().err
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"poisson": {"builtin": "so3-star"}, "colour": 1}))
    assert main(["verify", "--config", str(cfg)]) == 3
    assert "colour" in capsys.readouterr().err
    cfg.write_text(json.dumps({"poisson": {"builtin": "so3-star"}, "integrator": {"steps": 2}}))
    assert main(["verify", "--config", str(cfg)]) == 3
    assert "integrator" in capsys.readouterr().err
    assert main(["verify", "--example", "so3-star", "--count", "1", "--seed", "0", "--checks", "twisted"]) == 3
    assert main(["verify", "--example", "so3-star", "--count", "1", "--seed", "0", "--y-radius", "5"]) == 3
    assert main(["realize", "--example", "so3-star", "--x", "3,0,0", "--y", "0,0,0"]) == 3


def test_parse_config_field_paths():
    with pytest.raises(ConfigError, match="poisson"):
        report.parse_config({})
    with pytest.raises(ConfigError, match="checks"):
        report.parse_config({"poisson": {"builtin": "zero"}, "checks": ["everything"]})
    with pytest.raises(ConfigError, match="expect"):
        report.parse_config({"poisson": {"builtin": "zero"}, "expect": "maybe"})
    cfg = report.parse_config({"poisson": {"polynomial": {"dim": 2, "terms": [{"i": 1, "j": 2, "coefficient": 1.0, "exponents": [3]}]}}})
    with pytest.raises(ConfigError, match="poisson.polynomial"):
        report.resolve(cfg)


def test_numerical_failure_exit_4(tmp_path):
    code, rep = run_cli(tmp_path, "realize", "--example", "so3-star", "--x", "0,0,1", "--y", f"{2 * np.pi},0,0")
    assert code == 4
    assert rep["records"][0]["status"] == "degenerate"


def test_realize_and_heatmap(tmp_path, capsys):
    code, rep = run_cli(tmp_path, "realize", "--example", "so3-star", "--x", "0,0,1", "--y", "0.05,0.02,0")
    assert code == 0
    rec = rep["records"][0]
    assert rec["name"] == "omega" and rec["defect"] <= 1e-6
    table = tmp_path / "h.txt"
    assert main(["export", "--report", str(tmp_path / "out.json"), "--kind", "omega-heatmap", "--output", str(table)]) == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "row col value abs" and len(lines) == 1 + 36


def test_radius_sweep_export(tmp_path):
    code, rep = run_cli(tmp_path, "radius", "--example", "so3-star", "--count", "10", "--seed", "3")
    assert code == 0
    assert np.all(np.array([r["defect"] for r in rep["records"]]) > 0)
    table = tmp_path / "r.txt"
    assert main(["export", "--report", str(tmp_path / "out.json"), "--kind", "radius-vs-point", "--output", str(table)]) == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "sample_id radius x1 x2 x3" and len(lines) == 11


def test_export_of_empty_report_is_header_only(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"records": []}))
    for kind, header in (("defect-histogram", "check log10_lo log10_hi count"), ("radius-vs-point", "sample_id radius"),
                         ("omega-heatmap", "row col value abs")):
        out = tmp_path / f"{kind}.txt"
        assert main(["export", "--report", str(empty), "--kind", kind, "--output", str(out)]) == 0
        assert out.read_text() == header + "\n"
    assert main(["export", "--report", str(empty), "--kind", "pie"]) == 3


def test_defect_histogram_counts(tmp_path):
    run_cli(tmp_path, "verify", "--example", "so3-star", "--count", "4", "--seed", "2", "--checks", "realization")
    text = report.export_plot_data(json.loads((tmp_path / "out.json").read_text()), "defect-histogram")
    rows = [line.split() for line in text.splitlines()[1:]]
    assert sum(int(r[3]) for r in rows) == 4 and all(r[0] == "realization" for r in rows)


def test_check_jacobi_at_point(tmp_path):
    code, rep = run_cli(tmp_path, "check-jacobi", "--example", "non-poisson-witness", "--x", "1,1,1")
    assert code == 2
    assert rep["records"][0]["defect"] == pytest.approx(3.0, abs=1e-12)


def test_polynomial_input_and_geodesic(tmp_path):
    poly = tmp_path / "p.json"
    # {x1, x2} = 1 + x1^2
    poly.write_text(json.dumps({"dim": 2, "domain_radius": 2.0, "terms": [
        {"i": 1, "j": 2, "coefficient": 1.0, "exponents": [0, 0]}, {"i": 1, "j": 2, "coefficient": 1.0, "exponents": [2, 0]}]}))
    code, rep = run_cli(tmp_path, "verify", "--polynomial", str(poly), "--spray", "geodesic", "--metric", "1,2",
                        "--count", "3", "--seed", "0", "--checks", "jacobi,realization")
    assert code == 0 and rep["metadata"]["bivector"] == "polynomial"


def test_threads_do_not_change_output(tmp_path, monkeypatch):
    args = ("verify", "--example", "sl2-star", "--count", "6", "--seed", "4", "--checks", "realization,zero-section")
    main([*args, "--output", str(tmp_path / "a.json"), "--threads", "1"])
    monkeypatch.setenv(report.THREADS_ENV, "3")
    main([*args, "--output", str(tmp_path / "b.json")])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_escaped_samples_are_flagged(tmp_path):
    code, rep = run_cli(tmp_path, "verify", "--example", "quadratic", "--count", "20", "--seed", "0",
                        "--y-radius", "2.0", "--checks", "realization")
    escaped = [r for r in rep["records"] if r["status"] == "escaped"]
    assert escaped and all(not r["pass"] and r["defect"] is None for r in escaped)
    assert code == 2


def test_sampling_scheme_is_pinned():
    xs, ys, vw = report.draw_samples(5, 3, 2, 1.0, 0.1)
    rng = np.random.Generator(np.random.PCG64(5))
    d = rng.standard_normal((3, 2))
    r = rng.uniform(0.0, 1.0, (3, 1)) ** 0.5
    np.testing.assert_array_equal(xs, d / np.linalg.norm(d, axis=1, keepdims=True) * r)
    assert np.all(np.linalg.norm(ys, axis=1) <= 0.1) and vw.shape == (3, 2, 4)


def test_zero_entry_all_applicable_checks(tmp_path):
    code, rep = run_cli(tmp_path, "verify", "--example", "zero", "--count", "3", "--seed", "0")
    assert code == 0
    assert set(rep["summary"]) == {"jacobi", "spray-axiom1", "spray-homogeneity", "zero-section", "realization",
                                   "orthogonality", "boundary-formula", "closedness", "radius"}
    assert max(r["defect"] for r in rep["records"] if r["name"] != "radius") <= 1e-10
