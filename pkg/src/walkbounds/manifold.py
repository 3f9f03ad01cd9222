"""Model manifolds, epsilon-nets and the weighted graphs that approximate them."""

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.special import gamma

from .errors import DisconnectedGraphError, WalkBoundsError
from .markov import TransitionMatrix
from .rng import substream

POOL_FACTOR = 50
MEASURE_FACTOR = 200
DEFAULT_KAPPA_FACTOR = 3.0
_CHUNK = 8192


@dataclass(frozen=True)
class Manifold:
    """``circle(radius)``, ``sphere2(radius)`` or ``flat-torus(L1, L2)``.

    Points use intrinsic coordinates: an angle for the circle,
    (colatitude, longitude) for the sphere, and ``[0, L1) x [0, L2)`` for the torus.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in ("circle", "sphere2", "flat-torus"):
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        want = 2 if self.kind == "flat-torus" else 1
        if len(self.params) != want or any(x <= 0 for x in self.params):
            raise ValueError(f"{self.kind} needs {want} positive parameter(s), got {self.params!r}")
        object.__setattr__(self, "params", tuple(float(x) for x in self.params))

    @property
    def dimension(self):
        return 1 if self.kind == "circle" else 2

    @property
    def volume(self):
        if self.kind == "circle":
            return 2.0 * math.pi * self.params[0]
        if self.kind == "sphere2":
            return 4.0 * math.pi * self.params[0] ** 2
        return self.params[0] * self.params[1]

    @property
    def diameter(self):
        if self.kind == "flat-torus":
            return math.hypot(*self.params) / 2.0
        return math.pi * self.params[0]

    @property
    def injectivity_radius(self):
        if self.kind == "flat-torus":
            return min(self.params) / 2.0
        return math.pi * self.params[0]

    @property
    def curvature_bound(self):
        return 1.0 / self.params[0] ** 2 if self.kind == "sphere2" else 0.0

    def sample(self, rng, count):
        """Uniform (volume-measure) samples in intrinsic coordinates."""
        if self.kind == "circle":
            return rng.uniform(0.0, 2.0 * math.pi, size=(count, 1))
        if self.kind == "sphere2":
            z = rng.uniform(-1.0, 1.0, size=count)
            lon = rng.uniform(0.0, 2.0 * math.pi, size=count)
            return np.column_stack([np.arccos(z), lon])
        l1, l2 = self.params
        return np.column_stack([rng.uniform(0.0, l1, size=count), rng.uniform(0.0, l2, size=count)])

    def _embed(self, x):
        colat, lon = x[:, 0], x[:, 1]
        s = np.sin(colat)
        return np.column_stack([s * np.cos(lon), s * np.sin(lon), np.cos(colat)])

    def distances(self, a, b):
        """Geodesic distance matrix between point sets ``a`` (m rows) and ``b`` (k rows)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.kind == "circle":
            d = np.abs(a[:, 0][:, None] - b[:, 0][None, :]) % (2.0 * math.pi)
            return self.params[0] * np.minimum(d, 2.0 * math.pi - d)
        if self.kind == "sphere2":
            cos = np.clip(self._embed(a) @ self._embed(b).T, -1.0, 1.0)
            return self.params[0] * np.arccos(cos)
        out = np.zeros((a.shape[0], b.shape[0]))
        for k, length in enumerate(self.params):
            d = np.abs(a[:, k][:, None] - b[:, k][None, :]) % length
            d = np.minimum(d, length - d)
            out += d * d
        return np.sqrt(out)

    def to_config(self):
        return {"kind": self.kind, "params": list(self.params)}


def circle(radius=1.0):
    return Manifold("circle", (radius,))


def sphere2(radius=1.0):
    return Manifold("sphere2", (radius,))


def flat_torus(l1, l2):
    return Manifold("flat-torus", (l1, l2))


def manifold_from_config(spec):
    if isinstance(spec, Manifold):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec["kind"]
    if kind == "torus":
        kind = "flat-torus"
    default = (2.0 * math.pi, 2.0 * math.pi) if kind == "flat-torus" else (1.0,)
    return Manifold(kind, tuple(spec.get("params", default)))


@dataclass(frozen=True, eq=False)
class EpsilonNet:
    points: np.ndarray
    epsilon: float
    measures: np.ndarray

    @property
    def size(self):
        return self.points.shape[0]


def _nearest(m, pool, centers):
    idx = np.empty(pool.shape[0], dtype=np.int64)
    dist = np.empty(pool.shape[0])
    for start in range(0, pool.shape[0], _CHUNK):
        d = m.distances(pool[start:start + _CHUNK], centers)
        idx[start:start + _CHUNK] = np.argmin(d, axis=1)
        dist[start:start + _CHUNK] = d[np.arange(d.shape[0]), idx[start:start + _CHUNK]]
    return idx, dist


def sample_net(m, n, seed):
    """Farthest-point epsilon-net with Monte Carlo Voronoi cell measures.

    A pool of ``50 n`` uniform points is thinned by farthest-point selection
    starting from the first pool point.  ``epsilon`` is the largest pool
    distance to the nearest center; ``mu_i`` is the volume share of
    ``200 n`` fresh samples whose nearest center is ``v_i``.
    """
    if n < 4:
        raise ValueError("an epsilon-net needs at least 4 points")
    pool = m.sample(substream(seed, "net-pool"), POOL_FACTOR * n)
    chosen = [0]
    near = m.distances(pool, pool[:1])[:, 0]
    for _ in range(n - 1):
        k = int(np.argmax(near))
        chosen.append(k)
        near = np.minimum(near, m.distances(pool, pool[k:k + 1])[:, 0])
    centers = pool[chosen]
    eps = float(near.max())
    mc = m.sample(substream(seed, "net-measure"), MEASURE_FACTOR * n)
    idx, _ = _nearest(m, mc, centers)
    counts = np.bincount(idx, minlength=n).astype(float)
    mu = m.volume * counts / counts.sum()
    centers.setflags(write=False)
    mu.setflags(write=False)
    return EpsilonNet(centers, eps, mu)


def weight_constant(n_dim, kappa):
    """``2(n+2) Gamma(1+n/2) / (pi^(n/2) kappa^(n+2))``."""
    return 2.0 * (n_dim + 2) * gamma(1.0 + n_dim / 2.0) / (math.pi ** (n_dim / 2.0) * kappa ** (n_dim + 2))


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    manifold: Manifold
    net: EpsilonNet
    kappa: float
    weights: np.ndarray

    @property
    def size(self):
        return self.weights.shape[0]

    @property
    def degrees(self):
        return self.weights.sum(axis=1)

    @property
    def laplacian(self):
        return np.diag(self.degrees) - self.weights

    def transition_matrix(self):
        deg = self.degrees
        if np.any(deg <= 0):
            raise WalkBoundsError("zero-degree vertex: transition matrix undefined")
        p = self.weights / deg[:, None]
        return TransitionMatrix.from_array(p / p.sum(axis=1, keepdims=True))

    def edges(self):
        i, j = np.nonzero(np.triu(self.weights, 1))
        return [(int(a), int(b), float(self.weights[a, b])) for a, b in zip(i, j)]

    def to_json(self):
        return {
            "manifold": self.manifold.to_config(),
            "points": self.net.points.tolist(),
            "mu": self.net.measures.tolist(),
            "epsilon": self.net.epsilon,
            "kappa": self.kappa,
            "edges": [list(e) for e in self.edges()],
        }

    @classmethod
    def from_json(cls, doc):
        m = manifold_from_config(doc["manifold"])
        pts = np.asarray(doc["points"], dtype=float)
        mu = np.asarray(doc["mu"], dtype=float)
        w = np.zeros((len(mu), len(mu)))
        for i, j, wt in doc["edges"]:
            w[int(i), int(j)] = w[int(j), int(i)] = float(wt)
        return cls(m, EpsilonNet(pts, float(doc.get("epsilon", math.nan)), mu), float(doc["kappa"]), w)


def build_graph(net, m, kappa=None):
    """Weighted graph with ``w_ij = const(n, kappa) mu_i mu_j`` for ``d(v_i, v_j) < kappa``.

    ``kappa`` defaults to ``3 epsilon``.  ``kappa <= 2 epsilon`` only warns;
    a disconnected result raises :class:`DisconnectedGraphError`.
    """
    if kappa is None:
        kappa = DEFAULT_KAPPA_FACTOR * net.epsilon
    kappa = float(kappa)
    if kappa <= 2.0 * net.epsilon:
        warnings.warn(f"kappa = {kappa:.4g} <= 2 epsilon = {2 * net.epsilon:.4g}; neighbouring cells may disconnect")
    d = m.distances(net.points, net.points)
    adj = d < kappa
    np.fill_diagonal(adj, False)
    mu = np.asarray(net.measures, dtype=float)
    w = np.where(adj, weight_constant(m.dimension, kappa) * np.outer(mu, mu), 0.0)
    ncomp, labels = connected_components(adj.astype(np.int8), directed=False)
    if ncomp > 1:
        raise DisconnectedGraphError([np.flatnonzero(labels == c) for c in range(ncomp)])
    w.setflags(write=False)
    return WeightedGraph(m, net, kappa, w)


def graph_from_weights(weights, measures=None, kappa=1.0, manifold=None):
    """Wrap an explicit symmetric weight matrix (toy graphs and tests)."""
    w = np.array(weights, dtype=float)
    if not np.allclose(w, w.T, rtol=0, atol=0) or np.any(np.diag(w) != 0) or np.any(w < 0):
        raise ValueError("weights must be symmetric, nonnegative, with zero diagonal")
    n = w.shape[0]
    mu = np.ones(n) if measures is None else np.asarray(measures, dtype=float)
    ncomp, labels = connected_components((w > 0).astype(np.int8), directed=False)
    if ncomp > 1:
        raise DisconnectedGraphError([np.flatnonzero(labels == c) for c in range(ncomp)])
    w.setflags(write=False)
    return WeightedGraph(manifold or circle(), EpsilonNet(np.zeros((n, 1)), math.nan, mu), float(kappa), w)


def graph_spectra(g, mode="mass-normalized"):
    """Graph eigenvalues.

    ``plain``: ascending eigenvalues of ``L = D - A``;
    ``mass-normalized``: ascending eigenvalues of ``L x = lambda M x``, ``M = diag(mu)``;
    ``transition``: descending eigenvalues of ``D^-1 A`` (real by similarity
    to ``D^-1/2 A D^-1/2``).
    """
    lap = g.laplacian
    if mode == "plain":
        return np.linalg.eigvalsh(lap)
    if mode == "mass-normalized":
        mu = np.asarray(g.net.measures, dtype=float)
        if np.any(mu <= 0):
            raise WalkBoundsError("zero-measure vertex: mass-normalized spectrum undefined")
        s = 1.0 / np.sqrt(mu)
        return np.linalg.eigvalsh(s[:, None] * lap * s[None, :])
    if mode == "transition":
        deg = g.degrees
        if np.any(deg <= 0):
            raise WalkBoundsError("zero-degree vertex: transition spectrum undefined")
        s = 1.0 / np.sqrt(deg)
        return np.linalg.eigvalsh(s[:, None] * g.weights * s[None, :])[::-1]
    raise ValueError(f"unknown spectral mode {mode!r}")


def analytic_lb_spectrum(m, count):
    """First ``count`` Laplace-Beltrami eigenvalues (ascending, with multiplicity)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if m.kind == "circle":
        r = m.params[0]
        ks = [0] + [k for k in range(1, count) for _ in (0, 1)]
        return np.array([(k / r) ** 2 for k in ks[:count]])
    if m.kind == "sphere2":
        r = m.params[0]
        out = []
        level = 0
        while len(out) < count:
            out += [level * (level + 1) / r**2] * (2 * level + 1)
            level += 1
        return np.array(out[:count])
    l1, l2 = m.params
    k = 2
    while True:
        j = np.arange(-k, k + 1)
        vals = np.sort(((2 * math.pi * j[:, None] / l1) ** 2 + (2 * math.pi * j[None, :] / l2) ** 2).ravel())
        outside = (2 * math.pi * (k + 1) / max(l1, l2)) ** 2
        if vals.size >= count and vals[count - 1] < outside:
            return vals[:count]
        k *= 2


@dataclass(frozen=True, eq=False)
class SpectrumComparison:
    analytic: np.ndarray
    graph: dict       # mode -> eigenvalues (first i_max)
    errors: dict      # mode -> |graph - analytic|
    c_hat: dict       # mode -> per-index constant estimate (nan where lambda = 0)
    tracking_mode: str
    epsilon: float
    kappa: float
    curvature: float

    def rows(self, mode=None):
        mode = mode or self.tracking_mode
        for i, (a, gv, e, ch) in enumerate(zip(self.analytic, self.graph[mode], self.errors[mode], self.c_hat[mode])):
            yield i + 1, float(gv), float(a), float(e), float(ch)


def perturbation_scale(lam, eps, kappa, curvature):
    """``(eps/kappa + K kappa^2) lambda + kappa lambda^(3/2)``."""
    lam = np.asarray(lam, dtype=float)
    return (eps / kappa + curvature * kappa**2) * lam + kappa * np.power(np.maximum(lam, 0.0), 1.5)


def compare_spectra(g, m, i_max):
    """Index-wise comparison of graph and analytic spectra with constant estimates.

    The tracking mode is the one with the smaller mean relative error over
    indices ``2..i_max``.
    """
    if i_max > g.size:
        raise ValueError(f"i_max = {i_max} exceeds graph size {g.size}")
    analytic = analytic_lb_spectrum(m, i_max)
    eps = float(g.net.epsilon)
    scale = perturbation_scale(analytic, eps, g.kappa, m.curvature_bound)
    graph, errors, c_hat, rel = {}, {}, {}, {}
    for mode in ("plain", "mass-normalized"):
        ev = graph_spectra(g, mode)[:i_max]
        err = np.abs(ev - analytic)
        with np.errstate(divide="ignore", invalid="ignore"):
            ch = np.where(scale > 0, err / scale, np.nan)
            rel[mode] = float(np.mean(err[1:] / analytic[1:])) if i_max > 1 else 0.0
        graph[mode], errors[mode], c_hat[mode] = ev, err, ch
    tracking = min(rel, key=rel.get)
    return SpectrumComparison(analytic, graph, errors, c_hat, tracking, eps, g.kappa, m.curvature_bound)


@dataclass(frozen=True, eq=False)
class TransitionPrediction:
    true: np.ndarray       # descending eigenvalues of D^-1 A
    degree_form: np.ndarray  # 1 - lambda_L,i / deg_i, vertex i paired with eigen-index i
    exact_form: np.ndarray  # 1 - lambda_i(D^-1 L), descending
    degree_discrepancy: float
    exact_discrepancy: float


def predicted_transition_eigs(g):
    """Compare ``1 - lambda_L,i / deg_i`` with the true transition spectrum.

    The vertex-degree reading pairs the ``i``-th smallest Laplacian eigenvalue
    with vertex ``i``; it is exact only on degree-regular graphs.  The exact
    alternative uses the eigenvalues of ``D^-1 L``.
    """
    true = graph_spectra(g, "transition")
    lam_l = graph_spectra(g, "plain")
    deg = g.degrees
    by_degree = 1.0 - lam_l / deg
    s = 1.0 / np.sqrt(deg)
    exact = (1.0 - np.linalg.eigvalsh(s[:, None] * g.laplacian * s[None, :]))
    return TransitionPrediction(
        true, by_degree, exact,
        float(np.max(np.abs(by_degree - true))),
        float(np.max(np.abs(exact - true))),
    )
