import json
import math

import numpy as np
import pytest

from ridgekern.errors import ModelFormatError
from ridgekern.kernels import BaseKernel, eval_ridge_atom
from ridgekern.measures import CoefficientFn, ParamMeasure, derive_child_seed, sample_params
from ridgekern.networks import (NetworkModel, assemble_features, build_network, evaluate_f_c,
                                evaluate_f_c_estimate, load_model, model_from_record,
                                model_to_record, neuron_activation, predict, save_model,
                                set_unbiased_weights, train_ridge)
from ridgekern.params import ParamBatch, RidgeParam
from ridgekern.random_kernels import RandomKernel

G1 = BaseKernel.gaussian(1.0)
BALL2 = ParamMeasure.product_ball(2)


def test_build_is_deterministic_and_uses_child_seeds():
    m1 = build_network(G1, BALL2, 10, seed=3)
    m2 = build_network(G1, BALL2, 10, seed=3)
    assert m1.params == m2.params and np.array_equal(m1.states, m2.states)
    assert m1.params == sample_params(BALL2, 10, derive_child_seed(3, "z", 0))
    assert np.all(m1.alpha == 0) and m1.provenance["master_seed"] == 3
    with pytest.raises(ValueError):
        build_network(G1, BALL2, 0, seed=3)


def test_neuron_activation_spot_value():
    z = RidgeParam([0.6, 0.8], 0.1, 0.0)
    model = NetworkModel(RandomKernel.deterministic(G1), ParamBatch.from_params([z]),
                         np.zeros(1), np.ones(1))
    assert neuron_activation(model, 0, [1.0, 1.0]) == pytest.approx(math.exp(-1.125), rel=1e-14)
    assert predict(model, [1.0, 1.0]) == pytest.approx(math.exp(-1.125), rel=1e-14)
    with pytest.raises(IndexError):
        neuron_activation(model, 1, [0.0, 0.0])


def test_sign_mixture_activation_follows_state():
    k = RandomKernel.sign_mixture(G1, BaseKernel.laplace(1.0), 0.5, 0.5)
    model = build_network(k, BALL2, 20, seed=4)
    x = np.array([0.2, -0.3])
    for i in range(20):
        z = model.params[i]
        s = float(z.a @ x + z.b)
        expect = 0.5 * G1(s, z.t) + model.states[i] * 0.5 * math.exp(-abs(s - z.t))
        assert neuron_activation(model, i, x) == pytest.approx(float(expect), rel=1e-13)


def test_features_and_predict_agree():
    model = build_network(RandomKernel.sign_mixture(), BALL2, 30, seed=5)
    model = set_unbiased_weights(model, CoefficientFn.constant(1.0))
    X = np.random.default_rng(0).uniform(-1, 1, (5000, 2))
    np.testing.assert_allclose(predict(model, X), assemble_features(model, X) @ model.alpha,
                               rtol=1e-12, atol=1e-14)
    assert isinstance(predict(model, X[0]), float)


def test_unbiased_weights():
    model = build_network(G1, BALL2, 8, seed=6)
    c = CoefficientFn.polynomial([[2.0, {"t": 1}]])
    m = set_unbiased_weights(model, c)
    np.testing.assert_allclose(m.alpha, 2.0 * model.params.t / 8)
    assert m.provenance["coefficient"] == c.to_record()
    m3 = set_unbiased_weights(model, c, total_mass=3.0)
    np.testing.assert_allclose(m3.alpha, 3 * m.alpha)


def test_network_mean_equals_f_c():
    # E F_N(x) = f_c(x) over independent networks; check at 3 points within 4 SE
    k = RandomKernel.sign_mixture()
    c = CoefficientFn.constant(1.0)
    X = np.array([[0.0, 0.0], [0.5, -0.5], [-0.8, 0.1]])
    vals = np.array([predict(set_unbiased_weights(build_network(k, BALL2, 1, seed=s), c), X)
                     for s in range(4000)])
    ref = evaluate_f_c_estimate(k, BALL2, c, X, nodes_per_axis=24)
    se = vals.std(axis=0, ddof=1) / math.sqrt(len(vals))
    assert np.all(np.abs(vals.mean(axis=0) - ref.value) <= 4 * se + ref.error)


def test_f_c_methods_agree():
    c = CoefficientFn.indicator_box({"t": (0.0, None)})
    X = np.array([[0.1, 0.2], [-0.4, 0.6]])
    q = evaluate_f_c_estimate(G1, BALL2, c, X, nodes_per_axis=24)
    mc = evaluate_f_c_estimate(G1, BALL2, c, X, method="mc", n_samples=200_000, seed=1)
    assert np.all(np.abs(q.value - mc.value) <= 4 * mc.error + q.error)
    np.testing.assert_array_equal(evaluate_f_c(G1, BALL2, c, X, nodes_per_axis=24), q.value)
    with pytest.raises(ValueError):
        evaluate_f_c(G1, BALL2, c, X, method="simpson")


def test_f_c_atomic_exact():
    z = RidgeParam([0.5, 0.5], 0.0, 0.2)
    rho = ParamMeasure.atomic([z], [2.0])
    x = np.array([0.4, -0.2])
    est = evaluate_f_c_estimate(G1, rho, CoefficientFn.constant(1.5), x[None])
    assert est.value[0] == pytest.approx(3.0 * eval_ridge_atom(G1, z, x), rel=1e-14)
    assert est.error[0] == 0.0


def test_f_c_is_linear_in_c():
    c1 = CoefficientFn.polynomial([[1.0, {"b": 1}]])
    c2 = CoefficientFn.polynomial([[1.0, {"t": 2}]])
    c12 = CoefficientFn.polynomial([[2.0, {"b": 1}], [-3.0, {"t": 2}]])
    X = np.random.default_rng(1).uniform(-1, 1, (4, 2))
    f1, f2, f12 = (evaluate_f_c(G1, BALL2, c, X, nodes_per_axis=12) for c in (c1, c2, c12))
    np.testing.assert_allclose(f12, 2 * f1 - 3 * f2, atol=1e-13)


def test_ridge_cholesky_matches_normal_equations():
    model = build_network(G1, BALL2, 12, seed=7)
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 1, (40, 2))
    y = np.sin(X[:, 0])
    m = train_ridge(model, X, y, 1e-3)
    Phi = assemble_features(model, X)
    ref = np.linalg.solve(Phi.T @ Phi + 1e-3 * np.eye(12), Phi.T @ y)
    np.testing.assert_allclose(m.alpha, ref, rtol=1e-8, atol=1e-10)
    assert m.provenance["solver"]["method"] == "cholesky"
    assert m.provenance["lambda"] == 1e-3 and m.provenance["coefficient"] == "trained"


def test_ridge_exact_interpolation_when_full_rank():
    model = build_network(G1, BALL2, 5, seed=8)
    X = np.random.default_rng(3).uniform(-1, 1, (5, 2))
    y = np.array([1.0, -2.0, 0.5, 0.0, 3.0])
    m = train_ridge(model, X, y, 0.0)
    assert m.provenance["solver"]["method"] == "qr"
    np.testing.assert_allclose(predict(m, X), y, atol=1e-7)


def test_ridge_rank_deficient_min_norm():
    z = RidgeParam([1.0, 0.0], 0.0, 0.0)
    params = ParamBatch.from_params([z, z, RidgeParam([0.0, 1.0], 0.0, 0.3)])
    model = NetworkModel(RandomKernel.deterministic(G1), params, np.zeros(3), np.zeros(3))
    X = np.random.default_rng(4).uniform(-1, 1, (10, 2))
    y = np.cos(X[:, 1])
    m = train_ridge(model, X, y, 0.0)
    assert m.provenance["solver"]["method"] == "lstsq_min_norm"
    # duplicated neurons share the weight equally at minimum norm
    assert m.alpha[0] == pytest.approx(m.alpha[1], rel=1e-8)
    ref = np.linalg.pinv(assemble_features(model, X)) @ y
    np.testing.assert_allclose(m.alpha, ref, rtol=1e-8, atol=1e-10)


def test_ridge_large_lambda_shrinks():
    model = build_network(G1, BALL2, 6, seed=9)
    X = np.random.default_rng(5).uniform(-1, 1, (20, 2))
    m = train_ridge(model, X, np.ones(20), 1e12)
    assert np.max(np.abs(m.alpha)) < 1e-10


@pytest.mark.parametrize("lam", [-1.0, math.nan, math.inf])
def test_ridge_bad_lambda(lam):
    model = build_network(G1, BALL2, 3, seed=0)
    with pytest.raises(ValueError):
        train_ridge(model, np.zeros((2, 2)), np.zeros(2), lam)


def test_ridge_length_mismatch():
    model = build_network(G1, BALL2, 3, seed=0)
    with pytest.raises(ValueError):
        train_ridge(model, np.zeros((2, 2)), np.zeros(3), 0.1)


def _trained():
    model = build_network(RandomKernel.sign_mixture(), BALL2, 16, seed=10)
    X = np.random.default_rng(6).uniform(-1, 1, (30, 2))
    return train_ridge(model, X, X[:, 0] * X[:, 1], 1e-6)


def test_save_load_round_trip(tmp_path):
    m = _trained()
    path = tmp_path / "model.json"
    save_model(m, path)
    back = load_model(path)
    X = np.random.default_rng(7).uniform(-1, 1, (50, 2))
    assert np.array_equal(predict(back, X), predict(m, X))
    assert back.provenance == json.loads(json.dumps(m.provenance))
    assert model_to_record(back) == model_to_record(m)


def test_truncated_file(tmp_path):
    path = tmp_path / "model.json"
    save_model(_trained(), path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError):
        load_model(path)


def _record():
    return model_to_record(_trained())


@pytest.mark.parametrize("mutate, field", [
    (lambda r: r.update(version=2), "version"),
    (lambda r: r.update(format="other"), "format"),
    (lambda r: r.pop("alpha"), "alpha"),
    (lambda r: r.update(alpha=r["alpha"][:-1]), "alpha"),
    (lambda r: r.update(kernel={"family": "bessel"}), "kernel"),
    (lambda r: r["neurons"][0].pop("state"), "neurons"),
    (lambda r: r["neurons"][0].update(a=[1.0]), "neurons"),
    (lambda r: r.update(provenance=[]), "provenance"),
])
def test_malformed_records(mutate, field):
    rec = _record()
    mutate(rec)
    with pytest.raises(ModelFormatError) as info:
        model_from_record(rec)
    assert info.value.field == field


def test_version_error_names_supported_version():
    rec = _record()
    rec["version"] = 7
    with pytest.raises(ModelFormatError, match="supported: 1"):
        model_from_record(rec)
