import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from walkbounds.errors import DisconnectedGraphError
from walkbounds.manifold import (EpsilonNet, WeightedGraph, analytic_lb_spectrum, build_graph, circle,
                                 compare_spectra, flat_torus, graph_from_weights, graph_spectra,
                                 manifold_from_config, perturbation_scale, predicted_transition_eigs,
                                 sample_net, sphere2, weight_constant)
from walkbounds.markov import as_transition


@pytest.fixture(scope="module")
def circle64():
    m = circle()
    return m, build_graph(sample_net(m, 64, 0), m)


def _voronoi_arcs(angles):
    a = np.sort(angles)
    gaps = np.diff(np.append(a, a[0] + 2 * math.pi))
    arcs = 0.5 * (gaps + np.roll(gaps, 1))
    order = np.argsort(np.argsort(angles))
    return arcs[order]


def test_circle_n4_net():
    m = circle()
    net = sample_net(m, 4, 0)
    assert net.epsilon == pytest.approx(math.pi / 4, rel=0.15)
    arcs = _voronoi_arcs(net.points[:, 0])
    assert_allclose(arcs, math.pi / 2, rtol=0.10)
    # Monte Carlo cell measures: 200 N samples, binomial noise about the geometric cell
    p = arcs / (2 * math.pi)
    sigma = 2 * math.pi * np.sqrt(p * (1 - p) / 800)
    assert np.all(np.abs(net.measures - arcs) <= 4 * sigma)


@pytest.mark.parametrize("m", [circle(), sphere2(), flat_torus(2 * math.pi, 2 * math.pi)])
def test_measures_total_volume(m):
    net = sample_net(m, 32, 1)
    assert net.measures.sum() == pytest.approx(m.volume, rel=0.02)


def test_net_deterministic():
    a, b = sample_net(sphere2(), 20, 3), sample_net(sphere2(), 20, 3)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.measures, b.measures)


def test_net_covers_pool():
    m = sphere2()
    net = sample_net(m, 40, 2)
    probe = m.sample(np.random.default_rng(0), 2000)
    assert m.distances(probe, net.points).min(axis=1).max() <= 1.5 * net.epsilon


def test_weight_constants():
    assert weight_constant(1, 0.5) * 0.01 == pytest.approx(0.24)
    assert weight_constant(2, 0.5) * 1e-4 == pytest.approx(8 / (math.pi * 0.0625) * 1e-4)


def test_threshold_and_symmetry(circle64):
    m, g = circle64
    d = m.distances(g.net.points, g.net.points)
    w = g.weights
    assert_allclose(w, w.T)
    assert np.all(w[d >= g.kappa] == 0)
    off = ~np.eye(g.size, dtype=bool)
    assert np.all(w[off & (d < g.kappa)] > 0)
    assert np.all(np.diag(w) == 0)


def test_disconnected_graph_names_components():
    m = circle()
    net = sample_net(m, 16, 0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(DisconnectedGraphError) as exc:
            build_graph(net, m, 0.5 * net.epsilon)
    assert len(exc.value.components) > 1


def test_small_kappa_warns():
    m = circle()
    net = sample_net(m, 16, 0)
    with pytest.warns(UserWarning):
        try:
            build_graph(net, m, 2.0 * net.epsilon)
        except DisconnectedGraphError:
            pass


def test_laplacian_kernel_and_transition_top(circle64):
    _, g = circle64
    plain = graph_spectra(g, "plain")
    assert abs(plain[0]) < 1e-8 and plain[1] > 0
    assert graph_spectra(g, "transition")[0] == pytest.approx(1, abs=1e-8)
    p = g.transition_matrix()
    assert_allclose(p.p.sum(axis=1), 1, atol=1e-12)
    as_transition(p)


def test_mass_normalized_permutation_invariant(circle64):
    _, g = circle64
    perm = np.random.default_rng(0).permutation(g.size)
    h = graph_from_weights(g.weights[np.ix_(perm, perm)], g.net.measures[perm], g.kappa, g.manifold)
    assert_allclose(graph_spectra(h, "mass-normalized"), graph_spectra(g, "mass-normalized"), atol=1e-9)


def test_circle_second_eigenvalue_kappa_03():
    m = circle()
    g = build_graph(sample_net(m, 256, 0), m, 0.3)
    assert graph_spectra(g, "mass-normalized")[1] == pytest.approx(1, rel=0.10)


def test_analytic_spectra():
    assert_allclose(analytic_lb_spectrum(circle(), 5), [0, 1, 1, 4, 4])
    assert_allclose(analytic_lb_spectrum(sphere2(), 4), [0, 2, 2, 2])
    assert_allclose(analytic_lb_spectrum(flat_torus(2 * math.pi, 2 * math.pi), 5), [0, 1, 1, 1, 1])
    assert_allclose(analytic_lb_spectrum(flat_torus(2 * math.pi, 2 * math.pi), 9)[5:], [2, 2, 2, 2])


def test_compare_spectra_kernel(circle64):
    m, g = circle64
    cmp = compare_spectra(g, m, 5)
    for mode in cmp.errors:
        assert cmp.errors[mode][0] == pytest.approx(0, abs=1e-8)
    assert cmp.tracking_mode == "mass-normalized"
    rows = list(cmp.rows())
    assert len(rows) == 5 and rows[0][0] == 1


def test_perturbation_scale_zero_at_kernel():
    assert perturbation_scale(0.0, 0.1, 0.3, 1.0) == 0.0
    assert perturbation_scale(4.0, 0.1, 0.5, 0.0) == pytest.approx(0.2 * 4 + 0.5 * 8)


def test_transition_prediction_regular_graph():
    w = np.ones((4, 4)) - np.eye(4)
    g = graph_from_weights(w, np.ones(4), 1.0, circle())
    tp = predicted_transition_eigs(g)
    assert tp.degree_discrepancy <= 1e-8 and tp.exact_discrepancy <= 1e-8


def test_transition_prediction_irregular_graph():
    w = np.array([[0, 2.0, 0.5], [2.0, 0, 1.0], [0.5, 1.0, 0]])
    g = graph_from_weights(w, np.array([0.2, 0.5, 0.3]), 1.0, circle())
    tp = predicted_transition_eigs(g)
    assert tp.degree_discrepancy > 1e-3
    assert tp.exact_discrepancy <= 1e-8


def test_graph_json_round_trip(circle64):
    _, g = circle64
    h = WeightedGraph.from_json(g.to_json())
    assert_allclose(h.weights, g.weights, rtol=1e-12)
    assert h.kappa == g.kappa


@pytest.mark.parametrize("spec", ["circle", {"kind": "sphere2", "params": [2.0]}, "torus"])
def test_manifold_config(spec):
    m = manifold_from_config(spec)
    assert manifold_from_config(m.to_config()).to_config() == m.to_config()


def test_epsilon_net_fields():
    net = EpsilonNet(np.zeros((4, 1)), 0.1, np.ones(4))
    assert net.size == 4
