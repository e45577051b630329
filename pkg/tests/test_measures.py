import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgekern.errors import DomainError
from ridgekern.measures import (CoefficientFn, SeedTree, as_rng, derive_child_seed,
                                eval_coefficient, l2_distance_quadrature, l2_norm_of_coefficient,
                                quadrature_rule, sample_params)
from ridgekern.measures import ParamMeasure
from ridgekern.params import ParamBatch, RidgeParam


# ---- seeds


def test_child_seed_frozen_value():
    # BLAKE2b-64 of "0\x1fz\x1f0", little-endian
    import hashlib
    expect = int.from_bytes(hashlib.blake2b(b"0\x1fz\x1f0", digest_size=8).digest(), "little")
    assert derive_child_seed(0, "z", 0) == expect


def test_child_seeds_distinct_and_pure():
    seeds = {derive_child_seed(7, p, i) for p in ("a", "b", "mc-rate/N=16") for i in range(100)}
    assert len(seeds) == 300
    assert derive_child_seed(7, "a", 3) == derive_child_seed(7, "a", 3)
    assert derive_child_seed(7, "a", 3) != derive_child_seed(8, "a", 3)


@pytest.mark.parametrize("bad", [-1, 2 ** 64])
def test_child_seed_range(bad):
    with pytest.raises(ValueError):
        derive_child_seed(bad, "x")


def test_seed_tree_and_as_rng():
    tree = SeedTree(42)
    assert tree.child("p", 1) == derive_child_seed(42, "p", 1)
    assert tree.rng("p", 1).random() == np.random.default_rng(derive_child_seed(42, "p", 1)).random()
    g = np.random.default_rng(0)
    assert as_rng(g) is g


# ---- measures


def test_atomic_validation():
    z = RidgeParam([0.0], 0.0, 0.0)
    with pytest.raises(ValueError):
        ParamMeasure.atomic([z], [0.0])
    with pytest.raises(ValueError):
        ParamMeasure.atomic([z], [1.0, 2.0])
    with pytest.raises(ValueError):
        ParamMeasure.product_ball(2, a_radius=-1.0)
    assert ParamMeasure.atomic([z, z], [0.5, 2.0]).total_mass == 2.5


def test_single_atom_sampling_repeats_atom():
    z = RidgeParam([0.1, 0.2], 0.3, 0.4)
    batch = sample_params(ParamMeasure.atomic([z], [3.0]), 10, seed=1)
    assert len(batch) == 10
    assert all(p == z for p in batch)


def test_sampling_zero_points():
    assert len(sample_params(ParamMeasure.product_ball(3), 0, seed=1)) == 0


@pytest.mark.parametrize("rho", [
    ParamMeasure.product_ball(2),
    ParamMeasure.product_ball(3, 0.5, 0.2, 0.9),
    ParamMeasure.truncated_gaussian(2, (0.5, 1.0, 2.0), (0.7, 1.0, 0.3)),
], ids=["ball", "ball-radii", "tgauss"])
def test_samples_in_support(rho):
    batch = sample_params(rho, 20_000, seed=3)
    assert np.all(rho.in_support(batch))
    assert len(batch) == 20_000 and batch.d == rho.d


def test_sampling_deterministic():
    rho = ParamMeasure.product_ball(2)
    assert sample_params(rho, 100, seed=9) == sample_params(rho, 100, seed=9)
    assert not sample_params(rho, 100, seed=9) == sample_params(rho, 100, seed=10)


def test_ball_direction_moments():
    # uniform on the unit disc: E|a|^2 = 1/2, E a = 0; b, t uniform on [-1, 1]: E b^2 = 1/3
    batch = sample_params(ParamMeasure.product_ball(2), 200_000, seed=4)
    r2 = np.sum(batch.A ** 2, axis=1)
    assert np.mean(r2) == pytest.approx(0.5, abs=4 * np.std(r2) / math.sqrt(len(r2)))
    assert np.mean(batch.b ** 2) == pytest.approx(1 / 3, abs=0.004)
    assert abs(np.mean(batch.A[:, 0])) < 0.006


def test_atomic_sampling_frequencies():
    zs = [RidgeParam([float(i)], 0.0, 0.0) for i in range(3)]
    batch = sample_params(ParamMeasure.atomic(zs, [1.0, 2.0, 1.0]), 40_000, seed=5)
    freq = np.bincount(batch.A[:, 0].astype(int), minlength=3) / 40_000
    np.testing.assert_allclose(freq, [0.25, 0.5, 0.25], atol=0.01)


def test_measure_record_round_trip():
    rhos = [ParamMeasure.product_ball(2, 0.5, 1.0, 0.7, name="p"),
            ParamMeasure.truncated_gaussian(3, (1.0, 0.5, 0.2), (0.5, 1.0, 1.0)),
            ParamMeasure.atomic([RidgeParam([0.1, 0.2], 0.3, 0.4)], [2.0])]
    for rho in rhos:
        back = ParamMeasure.from_record(rho.to_record())
        assert back.to_record() == rho.to_record()


def test_measure_record_rejects_unknown():
    with pytest.raises(ValueError):
        ParamMeasure.from_record({"family": "dirichlet", "d": 2})
    with pytest.raises(ValueError):
        ParamMeasure.from_record({"family": "uniform_product_ball", "d": 2, "colour": 1})


def test_within_unit_product_ball():
    assert ParamMeasure.product_ball(2).within_unit_product_ball()
    assert not ParamMeasure.product_ball(2, t_radius=1.5).within_unit_product_ball()
    # the a-box of a truncated Gaussian must fit in the unit ball
    assert not ParamMeasure.truncated_gaussian(2).within_unit_product_ball()
    assert ParamMeasure.truncated_gaussian(2, box=(0.7, 1, 1)).within_unit_product_ball()


# ---- quadrature


@pytest.mark.parametrize("rho", [ParamMeasure.product_ball(1), ParamMeasure.product_ball(2),
                                 ParamMeasure.truncated_gaussian(2)], ids=["ball1", "ball2", "tg"])
def test_quadrature_mass(rho):
    nodes, w = quadrature_rule(rho, 8)
    assert w.sum() == pytest.approx(rho.total_mass, rel=1e-12)
    assert np.all(w > 0)
    assert np.all(rho.in_support(nodes, atol=1e-12))


def test_quadrature_second_moment_of_ball():
    # E|a|^2 = d/(d+2) for the uniform d-ball
    for d in (1, 2):
        nodes, w = quadrature_rule(ParamMeasure.product_ball(d), 24)
        m = float(np.sum(w * np.sum(nodes.A ** 2, axis=1)))
        assert m == pytest.approx(d / (d + 2), abs=3e-3)


def test_quadrature_atomic_exact():
    rho = ParamMeasure.atomic([RidgeParam([1.0], 0, 0), RidgeParam([0.0], 1, 0)], [0.3, 0.9])
    nodes, w = quadrature_rule(rho, 2)
    assert nodes == rho.atoms and np.array_equal(w, [0.3, 0.9])


def test_quadrature_size_guard():
    with pytest.raises(ValueError):
        quadrature_rule(ParamMeasure.product_ball(6), 32)
    with pytest.raises(ValueError):
        quadrature_rule(ParamMeasure.product_ball(1), 1)


# ---- coefficient functions


def test_coefficient_forms():
    z = RidgeParam([0.5, -0.25], 0.1, -0.4)
    assert CoefficientFn.constant(2.5)(z) == 2.5
    poly = CoefficientFn.polynomial([[2.0, {"a0": 1, "t": 2}], [1.0, {}]])
    assert poly(z) == pytest.approx(2 * 0.5 * 0.16 + 1.0)
    ind = CoefficientFn.indicator_box({"t": (0.0, None)})
    assert ind(z) == 0.0 and ind(RidgeParam([0.0, 0.0], 0.0, 0.0)) == 1.0
    bump = CoefficientFn.lipschitz_bump([0.5, -0.25, 0.1, 0.0], 2.0, 0.8)
    assert bump(z) == pytest.approx(2.0 * (1 - 0.4 / 0.8))


def test_ramped_indicator_is_lipschitz_average():
    c = CoefficientFn.indicator_box({"t": (0.0, None)}, ramp=0.2)
    ts = np.array([-0.2, -0.1, 0.0, 0.05, 0.1, 0.5])
    batch = ParamBatch(np.zeros((6, 1)), np.zeros(6), ts)
    np.testing.assert_allclose(c(batch), [0.0, 0.0, 0.5, 0.75, 1.0, 1.0])
    assert c.is_continuous and not CoefficientFn.indicator_box({"t": (0, None)}).is_continuous


def test_coefficient_record_round_trip():
    cs = [CoefficientFn.constant(1.5),
          CoefficientFn.polynomial([[1.0, {"b": 2}]]),
          CoefficientFn.indicator_box({"t": (0.0, None), "a0": (-0.5, 0.5)}, 2.0, 0.1),
          CoefficientFn.lipschitz_bump([0, 0, 0], 1.0, 0.5)]
    batch = sample_params(ParamMeasure.product_ball(1), 500, seed=6)
    for c in cs:
        back = CoefficientFn.from_record(c.to_record())
        assert np.array_equal(back(batch), c(batch))
        assert back.sup_bound == c.sup_bound


def test_coefficient_record_errors():
    with pytest.raises(ValueError):
        CoefficientFn.from_record({"form": "spline"})
    with pytest.raises(ValueError):
        CoefficientFn.from_record({"form": "constant"})
    with pytest.raises(ValueError):
        CoefficientFn.polynomial([[1.0, {"zz": 1}]])(RidgeParam([0.0], 0, 0))


def test_eval_coefficient_rejects_off_support():
    rho = ParamMeasure.product_ball(1)
    c = CoefficientFn.indicator_box({"t": (0.0, None)})
    assert eval_coefficient(c, RidgeParam([0.5], 0.0, 0.5), rho) == 1.0
    with pytest.raises(DomainError):
        eval_coefficient(c, RidgeParam([2.0], 0.0, 0.5), rho)


def test_indicator_l2_norm():
    rho = ParamMeasure.product_ball(2)
    c = CoefficientFn.indicator_box({"t": (0.0, None)})
    est = l2_norm_of_coefficient(c, rho, 200_000, seed=7)
    assert abs(est.value - math.sqrt(0.5)) <= 4 * est.error
    assert est.error < 2e-3


def test_atomic_l2_norm_exact():
    rho = ParamMeasure.atomic([RidgeParam([0.0], 0, 0.5), RidgeParam([0.0], 0, -0.5)], [2.0, 1.0])
    c = CoefficientFn.polynomial([[1.0, {"t": 1}]])
    est = l2_norm_of_coefficient(c, rho)
    assert est == (pytest.approx(math.sqrt(2 * 0.25 + 0.25)), 0.0)


def test_l2_distance_quadrature():
    rho = ParamMeasure.product_ball(1)
    c1 = CoefficientFn.constant(1.0)
    c0 = CoefficientFn.constant(0.0)
    assert l2_distance_quadrature(c1, c0, rho, 8) == pytest.approx(1.0)
    # t uniform on [-1, 1]: ||t||^2 = 1/3, exact for the midpoint rule up to h^2/12
    t = CoefficientFn.polynomial([[1.0, {"t": 1}]])
    assert l2_distance_quadrature(t, c0, rho, 40) == pytest.approx(math.sqrt(1 / 3), rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 200), st.integers(0, 2 ** 63))
def test_sampling_support_property(d, n, seed):
    rho = ParamMeasure.product_ball(d, 0.6, 0.3, 0.9)
    batch = sample_params(rho, n, seed)
    assert len(batch) == n and np.all(rho.in_support(batch))
