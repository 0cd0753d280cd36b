import json

import numpy as np
import pytest

from lpoc.cli import main
from lpoc.empirical import format_panel_csv
from lpoc.matrices import format_matrix_csv, read_matrix_csv
from lpoc.simulation import default_scenario, run_study


GOLDEN_RT = np.array([[1.0, 0.8, 0.5], [0.8, 1.0, 0.1], [0.5, 0.1, 1.0]])
GOLDEN_P = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])


def write_golden_inputs(tmp_path):
    r = tmp_path / "r.csv"
    p = tmp_path / "p.csv"
    r.write_text(format_matrix_csv(GOLDEN_RT, ("a", "b", "c")))
    p.write_text(format_matrix_csv(GOLDEN_P, ("a", "b", "c")))
    return r, p


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "lpoc" in capsys.readouterr().out


def test_usage_error_exits_one():
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--rtilde", "missing-penalty.csv"])
    assert exc.value.code == 1


def test_missing_file_exits_one(tmp_path):
    rc = main([
        "estimate", "--rtilde", str(tmp_path / "nope.csv"),
        "--penalty", str(tmp_path / "nope2.csv"), "--lambda-eff", "0.5",
        "--out", str(tmp_path / "o.csv"), "--report", str(tmp_path / "o.json"),
    ])
    assert rc == 1


def test_estimate_golden_three_by_three(tmp_path):
    r, p = write_golden_inputs(tmp_path)
    out = tmp_path / "est.csv"
    rep = tmp_path / "est.json"
    rc = main([
        "estimate", "--rtilde", str(r), "--penalty", str(p),
        "--lambda-eff", "0.5", "--out", str(out), "--report", str(rep),
    ])
    assert rc == 0
    est = read_matrix_csv(out)
    assert est.labels == ("a", "b", "c")
    got = (est.values[0, 1], est.values[0, 2], est.values[1, 2])
    for g, e in zip(got, (0.8211, 0.1542, -0.1813)):
        assert g == pytest.approx(e, abs=1e-3)
    payload = json.loads(rep.read_text())
    assert payload["converged"] is True
    assert payload["lambda_eff"] == 0.5
    # manifest sidecars accompany every output
    assert (tmp_path / "est.csv.manifest.json").exists()
    manifest = json.loads((tmp_path / "est.csv.manifest.json").read_text())
    assert manifest["command"] == "estimate"
    assert str(r) in manifest["inputs"]


def test_estimate_zero_lambda_returns_input(tmp_path):
    r, p = write_golden_inputs(tmp_path)
    out = tmp_path / "est.csv"
    rc = main([
        "estimate", "--rtilde", str(r), "--penalty", str(p),
        "--lambda-eff", "0", "--out", str(out), "--report", str(tmp_path / "rep.json"),
    ])
    assert rc == 0
    assert np.array_equal(read_matrix_csv(out).values, GOLDEN_RT)


def test_estimate_lam_requires_n_obs(tmp_path):
    r, p = write_golden_inputs(tmp_path)
    rc = main([
        "estimate", "--rtilde", str(r), "--penalty", str(p), "--lam", "5.5",
        "--out", str(tmp_path / "o.csv"), "--report", str(tmp_path / "o.json"),
    ])
    assert rc == 1
    rc = main([
        "estimate", "--rtilde", str(r), "--penalty", str(p), "--lam", "5.5",
        "--n-obs", "11",
        "--out", str(tmp_path / "o.csv"), "--report", str(tmp_path / "o.json"),
    ])
    assert rc == 0


def test_estimate_validation_and_numerical_exit_codes(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1.0,0.6\n0.5,1.0\n")  # asymmetric: validation error
    _, p2 = write_golden_inputs(tmp_path)
    two = tmp_path / "p2.csv"
    two.write_text(format_matrix_csv(np.zeros((2, 2)), ("a", "b")))
    rc = main([
        "estimate", "--rtilde", str(bad), "--penalty", str(two),
        "--lambda-eff", "0.1", "--out", str(tmp_path / "o.csv"),
        "--report", str(tmp_path / "o.json"),
    ])
    assert rc == 1

    singular = tmp_path / "singular.csv"
    v = np.array([1.0, -1.0, 1.0])
    rank1 = np.outer(v, v).astype(float)
    np.fill_diagonal(rank1, 1.0)
    singular.write_text(format_matrix_csv(rank1, ("a", "b", "c")))
    _, p3 = write_golden_inputs(tmp_path)
    rc = main([
        "estimate", "--rtilde", str(singular), "--penalty", str(p3),
        "--lambda-eff", "0.1", "--out", str(tmp_path / "o.csv"),
        "--report", str(tmp_path / "o.json"),
    ])
    assert rc == 2  # strictly singular input: factorization fails


def test_estimate_deterministic_outputs(tmp_path):
    r, p = write_golden_inputs(tmp_path)
    before = (r.read_bytes(), p.read_bytes())
    outs = []
    for sub in ("one", "two"):
        d = tmp_path / sub
        d.mkdir()
        out = d / "est.csv"
        main([
            "estimate", "--rtilde", str(r), "--penalty", str(p),
            "--lambda-eff", "0.5", "--out", str(out), "--report", str(d / "r.json"),
        ])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    # inputs are never mutated
    assert (r.read_bytes(), p.read_bytes()) == before


def test_fit_errors_pipeline(tmp_path):
    rng = np.random.default_rng(3)
    g = np.cumsum(rng.normal(0, 1.0, size=(4, 12)), axis=1) * 0.2 + rng.normal(0, 0.5, (4, 12))
    panel = tmp_path / "panel.csv"
    panel.write_text(format_panel_csv(("w", "x", "y", "z"), g))
    rc = main([
        "fit-errors", "--panel", str(panel),
        "--out-errors", str(tmp_path / "e.csv"),
        "--out-params", str(tmp_path / "par.csv"),
        "--out-rtilde-basic", str(tmp_path / "rb.csv"),
        "--out-rtilde-pd", str(tmp_path / "rp.csv"),
    ])
    assert rc == 0
    rb = read_matrix_csv(tmp_path / "rb.csv")
    rp = read_matrix_csv(tmp_path / "rp.csv")
    assert rb.labels == ("w", "x", "y", "z")
    assert np.allclose(rp.values, 0.99 * rb.values + 0.01 * np.eye(4), atol=1e-15)
    lines = (tmp_path / "par.csv").read_text().strip().split("\n")
    assert lines[0] == "label,mu,phi,sigma"
    assert len(lines) == 5


def test_select_lambda_cli(tmp_path):
    r, p = write_golden_inputs(tmp_path)
    rc = main([
        "select-lambda", "--rtilde", str(r), "--penalty", str(p),
        "--n-obs", "11", "--grid", "0:0.5:1", "--no-figures",
        "--out-json", str(tmp_path / "scan.json"), "--out-csv", str(tmp_path / "scan.csv"),
    ])
    assert rc == 0
    payload = json.loads((tmp_path / "scan.json").read_text())
    assert payload["grid"] == [0.0, 0.5, 1.0]
    assert payload["chosen_lambda"] in payload["grid"]
    lines = (tmp_path / "scan.csv").read_text().strip().split("\n")
    assert lines[0] == "lambda,k,smoothed_k"


def test_select_lambda_renders_figure(tmp_path):
    r, p = write_golden_inputs(tmp_path)
    fig = tmp_path / "scan.png"
    rc = main([
        "select-lambda", "--rtilde", str(r), "--penalty", str(p),
        "--n-obs", "11", "--grid", "0,0.5,1,1.5", "--smooth",
        "--out-json", str(tmp_path / "scan.json"), "--out-csv", str(tmp_path / "scan.csv"),
        "--figure", str(fig),
    ])
    assert rc == 0
    assert fig.exists() and fig.stat().st_size > 0
    assert (tmp_path / "scan.png.manifest.json").exists()


def test_simulate_study_cli_matches_library(tmp_path):
    rc = main([
        "simulate-study", "--replications", "3", "--seed", "5",
        "--threads", "1", "--out-dir", str(tmp_path), "--no-figures",
    ])
    assert rc == 0
    payload = json.loads((tmp_path / "study.json").read_text())
    direct = run_study(default_scenario(replications=3, seed=5)).to_json_dict()
    assert payload == json.loads(json.dumps(direct))
    table = (tmp_path / "study_table.csv").read_text().strip().split("\n")
    assert table[0] == "cell_class,estimator,mae,mse"
    assert len(table) == 10
    entries = (tmp_path / "study_entries.csv").read_text().strip().split("\n")
    assert len(entries) == 1 + 3 * 3 * 36


def test_simulate_study_renders_figure(tmp_path):
    rc = main([
        "simulate-study", "--replications", "2", "--threads", "1",
        "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    fig = tmp_path / "study_distributions.png"
    assert fig.exists() and fig.stat().st_size > 0


def test_scenario_file_roundtrip(tmp_path):
    scenario = default_scenario(replications=2, seed=11)
    scen_path = tmp_path / "scen.json"
    scen_path.write_text(json.dumps(scenario.to_dict()))
    rc = main([
        "simulate-study", "--scenario", str(scen_path), "--threads", "1",
        "--out-dir", str(tmp_path), "--no-figures",
    ])
    assert rc == 0
    payload = json.loads((tmp_path / "study.json").read_text())
    assert payload["scenario"]["seed"] == 11


def test_screen_and_build_penalty_cli(tmp_path):
    from lpoc.empirical import r_tilde_basic, r_tilde_pd
    from lpoc.simulation import simulate_panel

    scenario = default_scenario()
    _, errors = simulate_panel(scenario, 0)
    rtilde = r_tilde_pd(r_tilde_basic(errors))
    r = tmp_path / "rt.csv"
    r.write_text(format_matrix_csv(rtilde.values, scenario.labels))

    rows = ["label_i,label_j,covariate,value"]
    labels = scenario.labels
    for b in range(3):
        block = labels[3 * b : 3 * b + 3]
        for i in range(3):
            for j in range(i + 1, 3):
                rows.append(f"{block[i]},{block[j]},same_block,1")
    rows.append(f"{labels[0]},{labels[3]},same_block,0")
    cov = tmp_path / "cov.csv"
    cov.write_text("\n".join(rows) + "\n")

    report_path = tmp_path / "screen.json"
    rc = main([
        "screen-covariates", "--rtilde", str(r), "--covariates", str(cov),
        "--n", "11", "--out", str(report_path),
    ])
    assert rc == 0
    report = json.loads(report_path.read_text())
    assert report["selected"] == ["same_block"]

    pen_path = tmp_path / "pen.csv"
    rc = main([
        "build-penalty", "--covariates", str(cov), "--labels-from", str(r),
        "--select", "same_block", "--out", str(pen_path),
    ])
    assert rc == 0
    from lpoc.matrices import read_penalty_csv

    penalty = read_penalty_csv(pen_path)
    assert np.array_equal(penalty.values, scenario.penalty.values)


def test_project_and_evaluate_crps_cli(tmp_path):
    rng = np.random.default_rng(9)
    t = 12
    g = rng.normal(0, 1.0, size=(3, t))
    panel = tmp_path / "panel.csv"
    panel.write_text(format_panel_csv(("a", "b", "c"), g))
    main([
        "fit-errors", "--panel", str(panel),
        "--out-errors", str(tmp_path / "e.csv"), "--out-params", str(tmp_path / "par.csv"),
        "--out-rtilde-basic", str(tmp_path / "rb.csv"),
        "--out-rtilde-pd", str(tmp_path / "rp.csv"),
    ])
    ens_a = tmp_path / "a.npz"
    rc = main([
        "project", "--params", str(tmp_path / "par.csv"),
        "--correlation", str(tmp_path / "rp.csv"), "--last-from-panel", str(panel),
        "--horizon", "4", "--trajectories", "64", "--seed", "2", "--out", str(ens_a),
    ])
    assert rc == 0
    ens_b = tmp_path / "b.npz"
    rc = main([
        "project", "--params", str(tmp_path / "par.csv"),
        "--correlation", str(tmp_path / "rp.csv"), "--last-from-panel", str(panel),
        "--horizon", "4", "--trajectories", "64", "--seed", "3", "--out", str(ens_b),
    ])
    assert rc == 0

    obs = tmp_path / "obs.csv"
    obs.write_text(format_panel_csv(("a", "b", "c"), rng.normal(0, 1.0, (3, 4))))
    weights = tmp_path / "w.csv"
    weights.write_text(
        "region,label,period,weight\nall,a,*,10\nall,b,*,20\nall,c,*,30\n"
        "pair,a,*,1\npair,b,*,1\n"
    )
    out = tmp_path / "crps.csv"
    rc = main([
        "evaluate-crps", "--ensemble-a", str(ens_a), "--ensemble-b", str(ens_b),
        "--observations", str(obs), "--weights", str(weights),
        "--names", "seed2,seed3", "--out", str(out),
    ])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "region,seed2,seed3,better"
    assert len(lines) == 3
    # identical ensembles score identically
    rc = main([
        "evaluate-crps", "--ensemble-a", str(ens_a), "--ensemble-b", str(ens_a),
        "--observations", str(obs), "--weights", str(weights), "--out", str(out),
    ])
    assert rc == 0
    for line in out.read_text().strip().split("\n")[1:]:
        _, ca, cb, better = line.split(",")
        assert ca == cb
        assert better == "tie"
