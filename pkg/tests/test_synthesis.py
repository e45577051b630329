import json

import numpy as np
import pytest
from scipy.optimize import nnls as scipy_nnls

from ridgekern.kernels import BaseKernel, GramMatrix, eval_lifted_kernel_quadrature
from ridgekern.measures import ParamMeasure, sample_params
from ridgekern.params import ParamBatch, RidgeParam
from ridgekern.synthesis import (ConicKernel, NNLSConvergenceWarning, brownian_gram,
                                 conic_from_measure, nnls_fit, reports_to_json, sup_grid_error,
                                 synthesis_gap_report, write_reports_csv)

G1 = BaseKernel.gaussian(1.0)


def _design(desc, dictionary, X):
    from ridgekern.kernels import ridge_features
    V = ridge_features(desc, dictionary, X)
    return np.stack([np.outer(v, v).ravel() for v in V.T], axis=1)


def test_conic_gram_is_psd():
    rho = ParamMeasure.product_ball(2)
    ck = conic_from_measure(G1, rho, 30, seed=1)
    X = np.random.default_rng(0).uniform(-1, 1, (40, 2))
    g = ck.gram(X)
    assert g.min_eigenvalue >= -1e-12
    assert ck.n_atoms == 30 and np.allclose(ck.weights, 1 / 30)


def test_conic_pointwise_matches_gram():
    ck = conic_from_measure(BaseKernel.laplace(1.0), ParamMeasure.product_ball(1), 12, seed=2)
    X = np.array([[-0.5], [0.1], [0.9]])
    g = ck.gram(X).entries
    for i in range(3):
        for j in range(3):
            assert ck(X[i], X[j]) == pytest.approx(g[i, j], rel=1e-13)


def test_conic_atomic_measure_is_exact():
    atoms = [RidgeParam([0.3], 0.1, 0.2), RidgeParam([-0.5], 0.0, -0.4)]
    rho = ParamMeasure.atomic(atoms, [0.4, 1.1])
    ck = conic_from_measure(G1, rho, 5, seed=0)
    for x, y in ([[0.2], [0.7]], [[-1.0], [0.5]]):
        assert ck(x, y) == pytest.approx(eval_lifted_kernel_quadrature(G1, rho, x, y, 2), rel=1e-14)


def test_conic_rejects_negative_weights():
    with pytest.raises(ValueError):
        ConicKernel(G1, ParamBatch.from_params([RidgeParam([0.0], 0, 0)]), [-1.0])
    with pytest.raises(ValueError):
        conic_from_measure(G1, ParamMeasure.product_ball(1), 0, seed=0)


def test_conic_converges_to_lifted_kernel():
    rho = ParamMeasure.product_ball(1)
    X = np.linspace(-1, 1, 5)[:, None]
    ref = np.array([[eval_lifted_kernel_quadrature(G1, rho, x, y, 64) for y in X] for x in X])
    errs = [sup_grid_error(conic_from_measure(G1, rho, m, seed=3).gram(X), ref)
            for m in (10, 1000, 100_000)]
    assert errs[2] < errs[0] and errs[2] < 5e-3


def test_nnls_matches_scipy_oracle():
    rng = np.random.default_rng(4)
    X = rng.uniform(-1, 1, (12, 2))
    dictionary = sample_params(ParamMeasure.product_ball(2), 15, seed=5)
    T = np.exp(-0.5 * np.sum((X[:, None] - X[None]) ** 2, axis=-1))
    res = nnls_fit(T, dictionary, G1, X, tol=1e-10)
    w_ref, r_ref = scipy_nnls(_design(G1, dictionary, X), T.ravel(), maxiter=10_000)
    assert res.converged
    assert res.frobenius_error == pytest.approx(r_ref, rel=1e-6, abs=1e-9)
    assert np.all(res.weights >= 0)


def test_nnls_planted_recovery():
    rng = np.random.default_rng(6)
    X = rng.uniform(-1, 1, (25, 2))
    dictionary = sample_params(ParamMeasure.product_ball(2), 8, seed=7)
    w_true = np.array([0.5, 0.0, 1.2, 0.0, 0.3, 0.0, 0.0, 0.8])
    T = ConicKernel(G1, dictionary, w_true).gram(X)
    res = nnls_fit(T, dictionary, G1, X, tol=1e-12)
    assert res.converged
    assert res.frobenius_error < 1e-8
    np.testing.assert_allclose(res.weights, w_true, atol=1e-6)


def test_nnls_zero_target():
    X = np.linspace(-1, 1, 6)[:, None]
    dictionary = sample_params(ParamMeasure.product_ball(1), 5, seed=8)
    res = nnls_fit(np.zeros((6, 6)), dictionary, G1, X)
    assert res.converged and np.all(res.weights == 0) and res.frobenius_error == 0


def test_nnls_negative_target_gives_zero_weights():
    X = np.linspace(-1, 1, 4)[:, None]
    dictionary = sample_params(ParamMeasure.product_ball(1), 5, seed=8)
    res = nnls_fit(-np.eye(4), dictionary, G1, X)
    assert np.all(res.weights == 0)
    assert res.frobenius_error == pytest.approx(2.0)


def test_nnls_shape_errors():
    X = np.zeros((3, 1))
    dictionary = sample_params(ParamMeasure.product_ball(1), 2, seed=0)
    with pytest.raises(ValueError):
        nnls_fit(np.zeros((2, 2)), dictionary, G1, X)
    with pytest.raises(ValueError):
        nnls_fit(np.zeros((3, 3)), dictionary[:0], G1, X)


def test_nnls_budget_warning():
    X = np.linspace(0.05, 1, 30)[:, None]
    dictionary = sample_params(ParamMeasure.product_ball(1), 200, seed=9)
    with pytest.warns(NNLSConvergenceWarning):
        res = nnls_fit(brownian_gram(X), dictionary, G1, X, tol=1e-14, max_iter=3, polish_every=1000)
    assert not res.converged and res.iterations == 3


def test_brownian_gram():
    g = brownian_gram([0.2, 0.5, 1.0])
    np.testing.assert_array_equal(g.entries, [[0.2, 0.2, 0.2], [0.2, 0.5, 0.5], [0.2, 0.5, 1.0]])
    with pytest.raises(ValueError):
        brownian_gram([-0.1])


def test_gap_report_monotone_and_serializable(tmp_path):
    X = np.linspace(0.05, 1.0, 20)[:, None]
    rho = ParamMeasure.product_ball(1)
    reps = synthesis_gap_report(brownian_gram(X), [5, 20, 80], G1, rho, seed=10, points=X,
                                target_id="brownian", max_iter=3000)
    fro = [r.frobenius_error for r in reps]
    assert all(b <= a * (1 + 1e-6) for a, b in zip(fro, fro[1:]))
    write_reports_csv(reps, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "n_atoms,sup_error,frobenius_error,iterations,converged"
    assert len(lines) == 4
    doc = json.loads(reports_to_json(reps))
    assert doc[0]["target"] == "brownian" and "seconds" in doc[0]
    assert synthesis_gap_report(brownian_gram(X), [], G1, rho, 0, X) == []


def test_sup_grid_error_accepts_arrays():
    a = GramMatrix.from_array(np.zeros((2, 1)), np.eye(2))
    assert sup_grid_error(a, np.zeros((2, 2))) == 1.0
