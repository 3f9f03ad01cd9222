import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from walkbounds.errors import PremiseViolation, ShapeMismatchError
from walkbounds.functions import REGISTRY
from walkbounds.maps import UINorm, partial_trace_map, ui_norm
from walkbounds.markov import TransitionMatrix, generate_chain
from walkbounds.rng import substream
from walkbounds.tensors import HermitianTensor, TensorShape, apply_scalar_function
from walkbounds.walks import (TensorField, WalkConfig, c_constants, constant_field, empirical_tail,
                              enumerate_tuples, exact_distribution, exact_tail, expectation_norm,
                              generate_field, marginal_lower_rhs, marginal_upper_rhs, path_values,
                              simulate_paths, step_marginals, weighted_tensor_sum)

SHAPE = TensorShape((2,))
SQ = REGISTRY["square"]()


def chain(n, seed=0, kind="dirichlet"):
    return generate_chain({"kind": kind}, n, substream(seed, "walk-test"))


def uniform(n):
    return TransitionMatrix.from_array(np.full((n, n), 1.0 / n))


def test_field_examples():
    f = generate_field(3, SHAPE, (2, 2), 0)
    assert all(np.array_equal(v.matrix, 2 * np.eye(2)) for v in f.values)
    f = generate_field(4, TensorShape((3,)), (1, 2), 5)
    for v in f.values:
        lam = v.eigvalsh()
        assert lam[0] >= 1 - 1e-12 and lam[-1] <= 2 + 1e-12
    g = generate_field(4, TensorShape((3,)), (1, 2), 5)
    assert all(np.array_equal(a.matrix, b.matrix) for a, b in zip(f.values, g.values))
    with pytest.raises(ValueError):
        generate_field(2, SHAPE, (2, 1), 0)


def test_field_json_round_trip():
    f = generate_field(3, SHAPE, (1, 2), 1)
    g = TensorField.from_json(f.to_json())
    assert all(np.array_equal(a.matrix, b.matrix) for a, b in zip(f.values, g.values))


def test_deterministic_two_cycle():
    paths = simulate_paths([[0, 1], [1, 0]], 2, 100, 0)
    assert np.all(paths[:, 1] == 1 - paths[:, 0])
    assert np.all(paths[:, 2] == paths[:, 0])


def test_first_step_marginal_within_3_sigma():
    p = chain(5, 1)
    count = 100_000
    paths = simulate_paths(p, 3, count, 7)
    exact = step_marginals(p, 3)
    for s in range(4):
        emp = np.bincount(paths[:, s], minlength=5) / count
        sigma = np.sqrt(exact[s] * (1 - exact[s]) / count)
        assert np.all(np.abs(emp - exact[s]) <= 3.5 * sigma)


def test_uniform_chain_marginals():
    assert_allclose(step_marginals(uniform(4), 3), 0.25)


def test_paths_deterministic_and_prefix_stable():
    p = chain(4)
    a = simulate_paths(p, 3, 5000, 2)
    b = simulate_paths(p, 3, 9000, 2)
    assert np.array_equal(a, b[:5000])


def test_weighted_sum_examples():
    f = constant_field(3, 2.0, SHAPE)
    cfg = WalkConfig.uniform(3)
    assert_allclose(weighted_tensor_sum([0, 1, 2, 0], f, cfg).matrix, 2 * np.eye(2))
    g = generate_field(2, SHAPE, (1, 2), 3)
    one = WalkConfig([1.0])
    assert g.values[1].allclose(weighted_tensor_sum([0, 1], g, one))
    half = WalkConfig([0.5, 0.5])
    hand = 0.5 * g.values[1].matrix + 0.5 * g.values[0].matrix
    assert np.max(np.abs(weighted_tensor_sum([0, 1, 0], g, half).matrix - hand)) < 1e-12


def test_map_shape_mismatch():
    f = generate_field(2, SHAPE, (1, 2), 0)
    cfg = WalkConfig([1.0], psi=partial_trace_map(TensorShape((2, 2)), [0]))
    with pytest.raises(ShapeMismatchError):
        weighted_tensor_sum([0, 1], f, cfg)


def test_weights_must_be_probability_vector():
    with pytest.raises(PremiseViolation):
        WalkConfig([0.5, 0.6])


def test_constant_field_expectation():
    est = expectation_norm(chain(4), constant_field(4, 2.0, SHAPE), WalkConfig.uniform(2))
    assert est.mean == pytest.approx(2.0)


def test_exact_guard():
    with pytest.raises(ValueError):
        exact_distribution(chain(10), generate_field(10, SHAPE, (1, 2), 0), WalkConfig.uniform(6))


def test_enumeration_probabilities_sum_to_one():
    total = sum(prob.sum() for _, prob in enumerate_tuples(chain(5), 3))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_mc_matches_exact():
    p = chain(5, 2)
    f = generate_field(5, SHAPE, (1, 2), 2)
    cfg = WalkConfig.uniform(3, g=SQ)
    ex = expectation_norm(p, f, cfg, "exact")
    mc = expectation_norm(p, f, cfg, "mc", 100_000, 3)
    assert abs(mc.mean - ex.mean) <= 3 * mc.stderr


def test_uniform_chain_matches_iid_sampler():
    n, steps = 4, 3
    f = generate_field(n, SHAPE, (1, 2), 8)
    cfg = WalkConfig([0.2, 0.3, 0.5], g=SQ)
    ex = expectation_norm(uniform(n), f, cfg, "exact")
    rng = np.random.default_rng(0)
    idx = rng.integers(0, n, size=(40_000, steps))
    gm = np.stack([apply_scalar_function(v, SQ).matrix for v in f.values])
    sums = sum(w * gm[idx[:, i]] for i, w in enumerate(cfg.weights))
    vals = np.abs(np.linalg.eigvalsh(sums)).max(axis=1)
    se = vals.std() / np.sqrt(vals.size)
    assert abs(vals.mean() - ex.mean) <= 4 * se


def test_marginal_rhs_examples():
    n = 4
    f = generate_field(n, SHAPE, (1, 2), 1)
    cfg = WalkConfig.uniform(3, g=SQ)
    mean_norm = np.mean([ui_norm(apply_scalar_function(v, SQ)) for v in f.values])
    assert marginal_upper_rhs(uniform(n), f, cfg) == pytest.approx(mean_norm)
    cf = constant_field(n, 2.0, SHAPE)
    assert marginal_upper_rhs(chain(n), cf, cfg) == pytest.approx(4.0)
    c = c_constants(cf, cfg)
    assert_allclose(c.values, 1.0)
    assert marginal_lower_rhs(chain(n), cf, cfg, c) == pytest.approx(marginal_upper_rhs(chain(n), cf, cfg))


def test_c_constants_single_step_is_one():
    f = generate_field(5, SHAPE, (1, 2), 4)
    assert_allclose(c_constants(f, WalkConfig([1.0], g=SQ)).values, 1.0)


def test_sampled_c_dominates_exhaustive():
    f = generate_field(4, SHAPE, (1, 2), 6)
    cfg = WalkConfig([0.2, 0.5, 0.3], g=SQ)
    ex = c_constants(f, cfg, "exhaustive")
    sm = c_constants(f, cfg, "sampled", 10_000, 1)
    assert ex.certified and not sm.certified
    assert np.all(sm.values >= ex.values - 1e-15)


def test_c_constants_reject_zero_norm():
    f = constant_field(3, 0.0, SHAPE)
    with pytest.raises(PremiseViolation):
        c_constants(f, WalkConfig.uniform(2))


@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(1, 3),
       st.sampled_from(["spectral", "trace", "frobenius"]))
def test_expectation_sandwich(seed, n, steps, norm):
    rng = substream(seed, "sandwich")
    p = generate_chain({"kind": "dirichlet", "alpha": 1.0}, n, rng)
    f = generate_field(n, SHAPE, (1, 2), seed)
    cfg = WalkConfig(rng.dirichlet(np.ones(steps)), g=SQ, norm=UINorm(norm))
    ex = expectation_norm(p, f, cfg, "exact").mean
    lo = marginal_lower_rhs(p, f, cfg, c_constants(f, cfg))
    hi = marginal_upper_rhs(p, f, cfg)
    assert lo - 1e-9 <= ex <= hi + 1e-9


def test_walk_sum_spectrum_contained():
    p = chain(3, 9)
    f = generate_field(3, TensorShape((3,)), (1, 2), 9)
    cfg = WalkConfig.uniform(3)
    for tuples, _ in enumerate_tuples(p, 3):
        for t in tuples:
            lam = weighted_tensor_sum([0, *t], f, cfg).eigvalsh()
            assert lam[0] >= 1 - 1e-9 and lam[-1] <= 2 + 1e-9


def test_tail_examples():
    p = chain(5, 3)
    f = generate_field(5, SHAPE, (1, 2), 3)
    cfg = WalkConfig.uniform(3)
    assert empirical_tail(p, f, cfg, 2.5, 5000, 0).p_hat == 0.0
    vals, _ = exact_distribution(p, f, cfg)
    assert empirical_tail(p, f, cfg, 0.99 * vals.min(), 5000, 0).p_hat == 1.0
    theta = float(np.median(vals))
    t = empirical_tail(p, f, cfg, theta, 100_000, 1)
    assert t.low <= exact_tail(p, f, cfg, theta) <= t.high


def test_path_values_deterministic():
    p = chain(4)
    f = generate_field(4, SHAPE, (1, 2), 0)
    cfg = WalkConfig.uniform(2)
    assert np.array_equal(path_values(p, f, cfg, 10_000, 5), path_values(p, f, cfg, 10_000, 5))


def test_field_values_must_share_shape():
    with pytest.raises(ShapeMismatchError):
        TensorField((HermitianTensor.identity(SHAPE), HermitianTensor.identity(TensorShape((3,)))), 1, 1)
