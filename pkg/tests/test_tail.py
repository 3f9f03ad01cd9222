import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from walkbounds.errors import PremiseViolation
from walkbounds.functions import REGISTRY
from walkbounds.manifold import build_graph, circle, compare_spectra, graph_from_weights, graph_spectra, sample_net
from walkbounds.maps import UINorm
from walkbounds.markov import TransitionMatrix, generate_chain, lb2, matrix_power, spectrum
from walkbounds.rng import substream
from walkbounds.tail import (bound_all, graph_exact_constants, judge, manifold_constants, norm_cap,
                             thm_lower_1, thm_lower_2, thm_upper_1, thm_upper_2, ub2_violated_on_powers)
from walkbounds.tensors import HermitianTensor, TensorShape
from walkbounds.walks import (TensorField, WalkConfig, c_constants, exact_distribution, exact_tail,
                              expectation_norm, generate_field, path_values, tail_from_values)

SHAPE = TensorShape((2,))
SQ, ID, SQRT = REGISTRY["square"](), REGISTRY["identity"](), REGISTRY["sqrt"]()


def const_field(n, value, c, d):
    return TensorField((HermitianTensor.identity(SHAPE) * value,) * n, c, d)


def uniform(n):
    return TransitionMatrix.from_array(np.full((n, n), 1.0 / n))


def test_norm_cap_examples():
    assert norm_cap(ID, 1, 2, UINorm("spectral"), 2).value == pytest.approx(2)
    assert norm_cap(SQ, 1, 2, UINorm("trace"), 4).value == pytest.approx(16)


def test_exhaustive_cap_below_interval_cap():
    p = generate_chain({"kind": "dirichlet"}, 4, substream(0, "cap"))
    f = generate_field(4, SHAPE, (1, 2), 0)
    cfg = WalkConfig.uniform(3, h=SQ, norm=UINorm("frobenius"))
    ex = norm_cap(SQ, 1, 2, cfg.norm, 2, "exhaustive", p, f, cfg)
    assert ex.value <= norm_cap(SQ, 1, 2, cfg.norm, 2).value + 1e-12
    vals, _ = exact_distribution(p, f, cfg)
    assert np.all(vals <= ex.value + 1e-12)


def test_manifold_constants_without_error_term():
    p = generate_chain({"kind": "dirichlet"}, 4, substream(1, "mc"))
    lam = np.array([0.0, 1.0, 1.0, 4.0])
    deg = np.array([2.0, 3.0, 4.0, 5.0])
    k = manifold_constants(lam, 0.0, 0.1, 0.3, 0.0, deg, p, 2)
    assert k.c1 == pytest.approx(1.0)
    assert_allclose(k.c2, 1 - lam / deg)
    diag2 = np.diag(matrix_power(p, 2).p)
    assert_allclose(k.c3[1], np.abs((1 - lam / deg) ** 2 - diag2))
    assert_allclose(k.c4[1], np.abs((1 - lam / deg) ** 2))
    assert k.source == "manifold-derived"


def test_manifold_constants_need_c_hat():
    p = uniform(3)
    with pytest.raises(ValueError):
        manifold_constants([0, 1, 1], None, 0.1, 0.3, 0, [1, 1, 1], p, 1)


def test_graph_exact_constants_toy_graph():
    w = np.array([[0, 1.0, 1.0], [1.0, 0, 0], [1.0, 0, 0]])
    g = graph_from_weights(w, np.ones(3), 1.0)
    p = g.transition_matrix()
    k = graph_exact_constants(p, 2, 0.5, graph_spectra(g, "plain"))
    # path graph 1-0-2: L eigenvalues 0, 1, 3; D^-1 A eigenvalues 1, 0, -1
    assert k.c1 == pytest.approx(1.0, abs=1e-10)
    assert_allclose(np.sort(k.c2.real), [-1, 0, 1], atol=1e-10)
    assert k.lambda2_transition == pytest.approx(1.0, abs=1e-10)


def test_c4_matches_lb2_quantities():
    p = TransitionMatrix.from_array([[0.8, 0.2], [0.3, 0.7]])
    k = graph_exact_constants(p, 1)
    for j in range(2):
        best = max(r.bound for r in lb2(p).records if r.column == j)
        assert k.c4[0, j] ** 2 == pytest.approx(best, abs=1e-12)


def test_manifold_constants_from_measured_error_contain_graph_values():
    m = circle()
    g = build_graph(sample_net(m, 8, 0), m)
    cmp = compare_spectra(g, m, 8)
    p = g.transition_matrix()
    k = manifold_constants(cmp.analytic, cmp.c_hat["plain"], cmp.epsilon, cmp.kappa, cmp.curvature,
                           g.degrees, p, 2)
    graph_form = 1 - cmp.graph["plain"] / g.degrees
    err = cmp.errors["plain"]
    candidates = np.stack([1 - (cmp.analytic + err) / g.degrees, 1 - (cmp.analytic - err) / g.degrees])
    assert np.all(np.min(np.abs(candidates - graph_form), axis=0) < 1e-9)
    assert np.all(k.c2 >= graph_form - 1e-9)
    assert k.c1 <= cmp.graph["plain"][1] + 1e-9


def test_c_hat_pipeline_circle_256():
    m = circle()
    g = build_graph(sample_net(m, 256, 0), m)
    cmp = compare_spectra(g, m, 256)
    k = manifold_constants(cmp.analytic, cmp.c_hat[cmp.tracking_mode], cmp.epsilon, cmp.kappa,
                           cmp.curvature, g.degrees, g.transition_matrix(), 1)
    assert np.isfinite(k.c1) and np.all(np.isfinite(k.c2))
    assert k.c1 > 0


def test_upper_1_uniform_two_state():
    # on [1, 3] the tangent line of s^2 vanishes at s = 1, so alpha_min = 0 and the bound is infinite
    p = uniform(2)
    f = const_field(2, 2.0, 1, 3)
    cfg = WalkConfig.uniform(2, g=SQ, h=ID)
    r = thm_upper_1(p, f, cfg, 1.0)
    assert not r.premises["m_g s + b_gL > 0"]
    assert r.raw_bound == math.inf and r.bound == 1.0
    tail = tail_from_values(path_values(p, f, cfg, 100_000, 0), 1.0)
    assert r.bound >= tail.p_hat


def test_upper_1_uniform_two_state_finite_on_narrower_interval():
    p = uniform(2)
    f = const_field(2, 2.0, 1, 2)
    cfg = WalkConfig.uniform(2, g=SQ, h=ID)
    r = thm_upper_1(p, f, cfg, 1.0)
    assert r.premises_ok
    # sum_i w_i sum_j (N - 0) * 4 over two columns, divided by N * theta * alpha_min with alpha_min = 3/4
    assert r.raw_bound == pytest.approx(2 * 2 * 4 / (2 * 1.0 * 0.75))
    tail = tail_from_values(path_values(p, f, cfg, 100_000, 0), 1.0)
    judge(r, tail)
    assert r.raw_bound >= tail.p_hat and r.consistent


def test_upper_1_large_theta_goes_to_zero():
    p = uniform(2)
    f = const_field(2, 2.0, 1, 2)
    cfg = WalkConfig.uniform(2, g=SQ)
    r = thm_upper_1(p, f, cfg, 1e9)
    assert r.raw_bound * 1e9 == pytest.approx(thm_upper_1(p, f, cfg, 1.0).raw_bound)
    assert r.raw_bound < 1e-7
    assert tail_from_values(path_values(p, f, cfg, 1000, 0), 1e9).p_hat == 0


def test_upper_1_premise_gate():
    p = generate_chain({"kind": "dirichlet", "alpha": 5.0}, 6, substream(3, "g"))
    f = generate_field(6, SHAPE, (1, 2), 0)
    r = thm_upper_1(p, f, WalkConfig.uniform(2, g=SQ), 1.5)
    assert not r.premises_ok and r.verdict == "premise-not-satisfied"
    assert judge(r, tail_from_values(np.ones(10), 1.5)).consistent is None


def test_upper_2_lazy_chain():
    p = TransitionMatrix.from_array(0.9 * np.eye(2) + 0.05)
    f = generate_field(2, SHAPE, (1, 2), 1)
    r = thm_upper_2(p, f, WalkConfig([1.0], g=SQ, h=SQ), 3.0)
    assert r.premises_ok and math.isfinite(r.raw_bound)


def test_upper_2_premise_fails_at_higher_power():
    # diagonal 0.6 at step one, 0.36 at step two
    p = TransitionMatrix.from_array([[0.6, 0.4, 0], [0, 0.6, 0.4], [0.4, 0, 0.6]])
    f = generate_field(3, SHAPE, (1, 2), 1)
    assert thm_upper_2(p, f, WalkConfig([1.0], g=SQ), 1.5).premises_ok
    r = thm_upper_2(p, f, WalkConfig.uniform(2, g=SQ), 1.5)
    assert not r.premises_ok
    assert judge(r, tail_from_values(np.ones(10), 1.5)).verdict == "premise-not-satisfied"


def test_upper_2_failure_is_classified_as_lemma_finding():
    p = TransitionMatrix.from_array([[0.8, 0.2], [0.3, 0.7]])
    assert ub2_violated_on_powers(p, 1, 0.5)
    f = generate_field(2, SHAPE, (1, 2), 2)
    r = thm_upper_2(p, f, WalkConfig([1.0], g=SQ, h=SQ), 3.9)
    fake = tail_from_values(np.full(100, 4.0), 3.9)  # every path in the tail
    judge(r, fake, None, True)
    assert r.verdict == "finding:lemma-ub2"


def test_lower_bound_closed_form_uniform_chain():
    n = 3
    p = uniform(n)
    f = const_field(n, 2.0, 1, 2)
    cfg = WalkConfig.uniform(2, g=SQ, h=ID)
    cap = norm_cap(ID, 1, 2, cfg.norm, 2)
    c = c_constants(f, cfg)
    e = expectation_norm(p, f, cfg, "exact", quantity="h-sum").mean
    for theta in (0.5, 1.0, 1.5):
        want = (e - theta) / (cap.value - theta)
        assert thm_lower_1(p, f, cfg, theta, cap, c).raw_bound == pytest.approx(want)
        assert thm_lower_2(p, f, cfg, theta, cap, c).raw_bound == pytest.approx(want)


def test_lower_bound_closed_form_wider_interval():
    # on [1, 3], alpha_max = 3 and the estimate of E||h|| is E||g|| / alpha_max = 4/3
    n = 2
    p = uniform(n)
    f = const_field(n, 2.0, 1, 3)
    cfg = WalkConfig.uniform(2, g=SQ, h=ID)
    cap = norm_cap(ID, 1, 3, cfg.norm, 2)
    r = thm_lower_1(p, f, cfg, 1.0, cap, c_constants(f, cfg))
    assert r.raw_bound == pytest.approx((4 / 3 - 1) / (3 - 1))
    assert r.variants["as-printed"] == pytest.approx((n * 4 - 1 * 3) / (n * 2 * 3))


def test_lower_rejects_theta_above_cap():
    p = uniform(2)
    f = const_field(2, 2.0, 1, 2)
    cfg = WalkConfig.uniform(1, g=SQ)
    cap = norm_cap(ID, 1, 2, cfg.norm, 2)
    with pytest.raises(PremiseViolation):
        thm_lower_1(p, f, cfg, 2.0, cap, c_constants(f, cfg))
    with pytest.raises(PremiseViolation):
        thm_lower_2(p, f, cfg, 2.5, cap, c_constants(f, cfg))


def test_vacuous_lower_bound_is_consistent():
    p = generate_chain({"kind": "dirichlet"}, 4, substream(0, "vac"))
    f = generate_field(4, SHAPE, (1, 2), 0)
    cfg = WalkConfig.uniform(3, g=SQ)
    cap = norm_cap(ID, 1, 2, cfg.norm, 2)
    r = thm_lower_2(p, f, cfg, 1.9, cap, c_constants(f, cfg))
    assert r.raw_bound <= 0 and r.bound == 0
    judge(r, tail_from_values(np.zeros(10), 1.9))
    assert r.verdict == "vacuous" and r.consistent


def test_sampled_c_blocks_lower_verdict():
    p = generate_chain({"kind": "dirichlet"}, 4, substream(0, "s"))
    f = generate_field(4, SHAPE, (1, 2), 0)
    cfg = WalkConfig.uniform(2, g=SQ)
    cap = norm_cap(ID, 1, 2, cfg.norm, 2)
    r = thm_lower_1(p, f, cfg, 1.2, cap, c_constants(f, cfg, "sampled", 100, 0))
    assert not r.premises["c constants certified (exhaustive)"]
    assert r.verdict == "premise-not-satisfied"


def test_reports_clamped_with_raw_kept():
    p = uniform(2)
    f = const_field(2, 2.0, 1, 3)
    cfg = WalkConfig.uniform(2, g=SQ)
    cap = norm_cap(ID, 1, 3, cfg.norm, 2)
    for r in bound_all(p, f, cfg, 0.1, cap, c_constants(f, cfg)):
        assert 0 <= r.bound <= 1
        assert r.raw_bound == r.to_dict()["raw_bound"]


def test_seeded_suite_consistency():
    seen = {"upper-1": 0, "lower-1": 0, "lower-2": 0}
    for k in range(12):
        rng = substream(0, "suite", k)
        gen = [{"kind": "hub", "beta": 0.1}, {"kind": "dirichlet"}, {"kind": "lazy", "beta": 0.9}][k % 3]
        p = generate_chain(gen, 5, rng)
        f = generate_field(5, SHAPE, (1, 2), k)
        cfg = WalkConfig.uniform(3, g=SQ, h=SQ)
        cap = norm_cap(SQ, 1, 2, cfg.norm, 2)
        c = c_constants(f, cfg)
        vals = path_values(p, f, cfg, 20_000, k)
        finding = ub2_violated_on_powers(p, 3, 0.5)
        for theta in (1.5, 2.5, 3.5):
            tail = tail_from_values(vals, theta)
            for r in bound_all(p, f, cfg, theta, cap, c):
                judge(r, tail, exact_tail(p, f, cfg, theta), finding)
                if r.premises_ok and r.theorem in seen:
                    seen[r.theorem] += 1
                    assert r.consistent, r.to_dict()
    assert all(v > 0 for v in seen.values())


def test_spectrum_sorting_used_for_lambda_2():
    p = TransitionMatrix.from_array([[0.8, 0.2], [0.3, 0.7]])
    assert abs(spectrum(p)[1]) == pytest.approx(0.5)
