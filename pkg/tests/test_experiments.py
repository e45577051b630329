import json
import math
import os

import numpy as np
import pytest

from ridgekern.config import parse_config
from ridgekern.errors import ConfigError, HypothesisError
from ridgekern.experiments import (Table, domain_cloud, least_squares_polynomial_error,
                                   minimax_polynomial_error, monomial_design,
                                   near_optimal_epsilon, parallel_map, polynomial_fit_residual,
                                   read_points_csv, run_experiment, target_function,
                                   uniform_bound_value, write_report, write_table)

SMALL = {
    "mc-rate": {"N_sweep": [8, 32], "trials": 20, "grid_per_axis": 9, "n_mu_samples": 128,
                "reference_nodes": 8},
    "uniform-bound": {"N_sweep": [64, 256], "replicates": 8, "grid_per_axis": 9,
                      "reference_nodes": 8, "n_eps_search": 8},
    "dichotomy": {"branch1_N": 12, "branch1_models": 2, "fit_per_axis": 9,
                  "branch2_N_sweep": [16, 64], "branch2_seeds": 2, "train_per_axis": 9,
                  "eval_per_axis": 11},
    "smoothing": {"widths": [0.8, 0.4], "reference_nodes": 8, "grid_per_axis": 7, "N": 256,
                  "replicates": 3},
    "psd-contrast": {"n_points": 8, "n_draws": 40, "mean_draws": 200},
    "synth": {"m_sweep": [8, 32], "seeds": 2, "grid_per_axis": 5, "reference_nodes": 8,
              "refit_max_m": 32, "nnls_sizes": [5, 20], "nnls_points": 10,
              "nnls_max_iter": 500, "final_tol": 1.0, "slack": 1.0},
    "train": {"N": 20, "train_per_axis": 7},
}

EXPECTED_TABLES = {
    "mc-rate": {"rate", "trials", "tail"},
    "uniform-bound": {"replicates", "bounds", "epsilon_scan"},
    "dichotomy": {"branch1", "branch1_floor", "branch2", "branch2_median"},
    "smoothing": {"smoothing", "end_to_end"},
    "psd-contrast": {"psd_contrast", "pathwise"},
    "synth": {"conic", "conic_median", "nnls_gap"},
    "train": {"training"},
}


def _cfg(experiment, seed=0, **extra):
    doc = {"schema_version": 1, "experiment": experiment, "seed": seed,
           "params": SMALL[experiment], **extra}
    return parse_config(doc)


# ---- helpers


def test_uniform_bound_value_formula():
    v = uniform_bound_value(1.0, 0.5, 100, 10, 0.1, 0.01)
    expect = math.sqrt((2 * math.log(20) + 2 * math.log(10)) / 100) + 2 * 0.5 * 0.01
    assert v == pytest.approx(expect, rel=1e-15)


def test_near_optimal_epsilon():
    assert near_optimal_epsilon(2.0, 2, 1024) == pytest.approx(
        0.5 * math.sqrt(2 / (1024 * math.log(1024))), rel=1e-15)
    with pytest.raises(ValueError):
        near_optimal_epsilon(1.0, 2, 1)


def test_parallel_map_preserves_order():
    items = list(range(50))
    assert parallel_map(lambda x: x * x, items, jobs=4) == [x * x for x in items]
    assert parallel_map(lambda x: -x, items, jobs=1) == [-x for x in items]


def test_domain_cloud():
    assert domain_cloud(2, 5, 0).shape == (25, 2)
    c3 = domain_cloud(3, 5, 1, n_random=100)
    assert c3.shape == (100, 3) and np.all(np.abs(c3) <= 1)
    assert np.array_equal(c3, domain_cloud(3, 5, 1, n_random=100))


def test_monomial_design_columns():
    P = monomial_design(np.array([[2.0, 3.0]]), 2)
    np.testing.assert_array_equal(P, [[1, 2, 3, 4, 6, 9]])


def test_polynomial_fit_residual_exact_for_polynomials():
    X = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    y = 1 + X[:, 0] * X[:, 1] - 2 * X[:, 1] ** 2
    assert polynomial_fit_residual(X, y, 2) < 1e-13
    assert polynomial_fit_residual(X, y, 1) > 0.1


def test_minimax_chebyshev_oracle():
    # best linear approximation of x^2 on [-1, 1] is x^2 - 1/2 with error 1/2
    X = np.linspace(-1, 1, 201)[:, None]
    assert minimax_polynomial_error(X, X[:, 0] ** 2, 1) == pytest.approx(0.5, abs=1e-9)
    sup_ls, rms_ls = least_squares_polynomial_error(X, X[:, 0] ** 2, 1)
    assert sup_ls >= 0.5 - 1e-12 and rms_ls <= sup_ls


def test_target_functions():
    X = np.array([[0.5, 0.0], [0.5, 1.0]])
    np.testing.assert_allclose(target_function("sin_pi_x1_cos_pi_x2", X), [1.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(target_function("sin_pi_x1", X), [1.0, 1.0])
    with pytest.raises(ValueError):
        target_function("sin_pi_x1_cos_pi_x2", X[:, :1])


def test_write_table_format(tmp_path):
    t = Table(("n", "x", "ok", "note"), [(1, 0.1, True, None), (2, 1 / 3, False, "a")])
    write_table(t, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_bytes() == b"n,x,ok,note\n1,0.1,1,\n2,0.3333333333333333,0,a\n"


def test_read_points_csv(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("x1,x2\n0.5,1\n\n-1,2e-3\n")
    np.testing.assert_array_equal(read_points_csv(p, 2), [[0.5, 1.0], [-1.0, 0.002]])
    with pytest.raises(ValueError):
        read_points_csv(p, 3)
    p.write_text("1,2\n3\n")
    with pytest.raises(ValueError):
        read_points_csv(p)
    p.write_text("1,2\nx,y\n")
    with pytest.raises(ValueError):
        read_points_csv(p)
    p.write_text("a,b\n")
    with pytest.raises(ValueError):
        read_points_csv(p)


# ---- experiments on small configs


@pytest.mark.parametrize("experiment", list(SMALL))
def test_small_run_writes_outputs(experiment, tmp_path):
    report = run_experiment(_cfg(experiment))
    assert set(report.tables) == EXPECTED_TABLES[experiment]
    paths = write_report(report, tmp_path)
    assert {os.path.basename(p) for p in paths} == {f"{t}.csv" for t in report.tables} | {"summary.json"}
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary) == {"experiment", "params", "metrics", "criteria", "passed",
                            "wall_time_seconds", "backend"}
    assert summary["experiment"] == experiment
    for name, table in report.tables.items():
        lines = (tmp_path / f"{name}.csv").read_bytes().split(b"\n")
        assert lines[0].decode() == ",".join(table.columns)
        assert b"\r" not in b"".join(lines)
        assert len(lines) == len(table.rows) + 2


@pytest.mark.parametrize("experiment", ["mc-rate", "uniform-bound", "psd-contrast", "synth",
                                        "dichotomy"])
def test_jobs_do_not_change_outputs(experiment, tmp_path):
    outs = []
    for jobs in (1, 3):
        d = tmp_path / f"j{jobs}"
        write_report(run_experiment(_cfg(experiment, seed=11), jobs=jobs), d)
        outs.append({f: (d / f).read_bytes() for f in sorted(os.listdir(d)) if f.endswith(".csv")})
    assert outs[0] == outs[1]


def test_seed_changes_outputs(tmp_path):
    a = run_experiment(_cfg("mc-rate", seed=1)).tables["trials"].rows
    b = run_experiment(_cfg("mc-rate", seed=2)).tables["trials"].rows
    assert a != b


def test_mc_rate_bound_column():
    report = run_experiment(_cfg("mc-rate"))
    # constant coefficient 1 on a probability measure: bound C^2 / N with C = 1
    for N, trials, mean_mse, se, bound in report.tables["rate"].rows:
        assert bound == pytest.approx(1.0 / N)
        assert trials == 20


def test_psd_contrast_small_passes():
    report = run_experiment(_cfg("psd-contrast"))
    assert report.passed
    assert report.criteria["mean_gram_psd"].value > 0


def test_psd_contrast_pathwise_pd_kernel():
    cfg = _cfg("psd-contrast", kernel={"family": "random_phase_cosine", "sigma": 1.0})
    report = run_experiment(cfg)
    assert report.criteria["pathwise_indefinite_fraction"].value == 0.0
    assert report.passed


def test_dichotomy_small_domain_rejected():
    params = dict(SMALL["dichotomy"], poly_kernel={"family": "polynomial_slice",
                                                   "params": {"degree": 2, "scale": 1.0,
                                                              "bound": 1.0}})
    cfg = parse_config({"schema_version": 1, "experiment": "dichotomy", "params": params})
    with pytest.raises(HypothesisError):
        run_experiment(cfg)


def test_dichotomy_polynomial_branch_contained():
    report = run_experiment(_cfg("dichotomy"))
    assert report.criteria["polynomial_containment"].passed


def test_train_from_csv(tmp_path):
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, (30, 2))
    data = np.column_stack([X, X[:, 0] - X[:, 1]])
    np.savetxt(tmp_path / "data.csv", data, delimiter=",", header="x1,x2,y", comments="")
    cfg = parse_config({"schema_version": 1, "experiment": "train",
                        "params": {"N": 10, "data": "data.csv"}}, base_dir=str(tmp_path))
    report = run_experiment(cfg)
    assert report.tables["training"].rows[0][0] == 30
    assert report.data.n_neurons == 10


def test_train_missing_csv(tmp_path):
    cfg = parse_config({"schema_version": 1, "experiment": "train",
                        "params": {"data": "nope.csv"}}, base_dir=str(tmp_path))
    with pytest.raises(ConfigError) as info:
        run_experiment(cfg)
    assert info.value.field == "params.data"
