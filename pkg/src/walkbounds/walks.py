"""Random walks carrying Hermitian tensors, and the expectation bounds built on column sums.

A walk ``v_0, v_1, ..., v_l`` starts uniformly on the vertices and steps by
the rows of ``P``.  The walk sum is ``sum_{i=1..l} w_i Psi(f(v_i))``; the
start vertex is not summed.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.stats import binomtest

from .errors import PremiseViolation, ShapeMismatchError
from .functions import ScalarFunction, make_function
from .maps import UINorm, identity_map
from .markov import as_transition, column_sums, matrix_power
from .rng import substream
from .tensors import HermitianTensor, apply_scalar_function, random_hermitian_with_spectrum

EXACT_LIMIT = 10**6
PATH_BLOCK = 4096
_ENUM_CHUNK = 1 << 15


@dataclass(frozen=True, eq=False)
class TensorField:
    values: tuple
    c: float
    d: float
    seed: object = None

    def __post_init__(self):
        vals = tuple(self.values)
        if not vals:
            raise ValueError("a tensor field needs at least one vertex")
        shapes = {v.shape for v in vals}
        if len(shapes) != 1:
            raise ShapeMismatchError("all field values must share one shape")
        object.__setattr__(self, "values", vals)

    @property
    def size(self):
        return len(self.values)

    @property
    def shape(self):
        return self.values[0].shape

    def to_json(self):
        return {"interval": [self.c, self.d], "seed": self.seed, "values": [v.to_json() for v in self.values]}

    @classmethod
    def from_json(cls, doc):
        c, d = doc["interval"]
        return cls(tuple(HermitianTensor.from_json(v) for v in doc["values"]), float(c), float(d), doc.get("seed"))


def generate_field(n_vertices, shape, interval, seed):
    """Independent seeded tensors per vertex with spectra inside ``interval``."""
    c, d = float(interval[0]), float(interval[1])
    if c > d:
        raise ValueError(f"empty interval [{c}, {d}]")
    vals = tuple(random_hermitian_with_spectrum(shape, (c, d), seed, stream=("field", v))
                 for v in range(int(n_vertices)))
    return TensorField(vals, c, d, seed)


def constant_field(n_vertices, value, shape):
    t = HermitianTensor.identity(shape) * float(value)
    return TensorField((t,) * int(n_vertices), float(value), float(value))


@dataclass(frozen=True, eq=False)
class WalkConfig:
    weights: np.ndarray
    psi: object = None
    g: ScalarFunction = None
    h: ScalarFunction = None
    norm: UINorm = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a nonempty vector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise PremiseViolation(f"weights must be a probability vector, sum = {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.g is None:
            object.__setattr__(self, "g", make_function("identity"))
        if self.h is None:
            object.__setattr__(self, "h", make_function("identity"))
        if self.norm is None:
            object.__setattr__(self, "norm", UINorm())

    @property
    def steps(self):
        return self.weights.size

    @classmethod
    def uniform(cls, steps, **kw):
        return cls(np.full(int(steps), 1.0 / steps), **kw)

    def map_for(self, field):
        psi = self.psi if self.psi is not None else identity_map(field.shape)
        if psi.input_shape != field.shape:
            raise ShapeMismatchError(
                f"map expects {psi.input_shape.mode_sizes}, field has {field.shape.mode_sizes}"
            )
        return psi


@dataclass(frozen=True, eq=False)
class _Prepared:
    f: np.ndarray       # Psi(f(v)), shape (N, D, D)
    gf: np.ndarray      # Psi(g(f(v)))
    gnorm: np.ndarray   # ||Psi(g(f(v)))||
    out_shape: object


def prepare(field, cfg):
    """Per-vertex arrays ``Psi(f(v))``, ``Psi(g(f(v)))`` and their norms."""
    psi = cfg.map_for(field)
    f = np.stack([psi(v).matrix for v in field.values])
    gf = np.stack([psi(apply_scalar_function(v, cfg.g)).matrix for v in field.values])
    gnorm = cfg.norm.from_singular_values(np.abs(np.linalg.eigvalsh(gf)))
    return _Prepared(f, gf, gnorm, psi.output_shape)


def batch_norms(mats, norm, fn=None):
    """``||fn(S)||`` for a stack of Hermitian matrices ``S``."""
    lam = np.linalg.eigvalsh(mats)
    if fn is not None:
        fn.check_domain(lam)
        lam = fn(lam)
    return norm.from_singular_values(np.abs(lam))


def _tuple_sums(arr, tuples, weights):
    acc = weights[0] * arr[tuples[:, 0]]
    for i in range(1, tuples.shape[1]):
        acc = acc + weights[i] * arr[tuples[:, i]]
    return acc


def weighted_tensor_sum(path, field, cfg, apply_g=False):
    """``sum_{i=1..l} w_i Psi(f(v_i))`` (or with ``g`` inside) for one path ``v_0..v_l``."""
    path = [int(v) for v in path]
    if len(path) != cfg.steps + 1:
        raise ValueError(f"path must have {cfg.steps + 1} vertices, got {len(path)}")
    psi = cfg.map_for(field)
    acc = None
    for w, v in zip(cfg.weights, path[1:]):
        x = field.values[v]
        if apply_g:
            x = apply_scalar_function(x, cfg.g)
        term = w * psi(x).matrix
        acc = term if acc is None else acc + term
    return HermitianTensor.from_matrix(acc, psi.output_shape)


def simulate_paths(p, steps, count, seed):
    """``count`` walks of ``steps`` steps, shape ``(count, steps + 1)``.

    Paths are generated in fixed blocks of 4096, block ``b`` drawing from the
    substream ``(seed, "paths", b)``, so path ``k`` depends only on
    ``(seed, k)``.  Each step inverts the row CDF of ``P``.
    """
    p = as_transition(p)
    n = p.n
    cdf = np.cumsum(p.p, axis=1)
    cdf[:, -1] = 1.0
    out = np.empty((count, steps + 1), dtype=np.int64)
    for b, start in enumerate(range(0, count, PATH_BLOCK)):
        rng = substream(seed, "paths", b)
        u = rng.random((PATH_BLOCK, steps + 1))
        cur = np.minimum((u[:, 0] * n).astype(np.int64), n - 1)
        block = np.empty((PATH_BLOCK, steps + 1), dtype=np.int64)
        block[:, 0] = cur
        for s in range(1, steps + 1):
            cur = np.minimum((u[:, s][:, None] >= cdf[cur]).sum(axis=1), n - 1)
            block[:, s] = cur
        stop = min(count, start + PATH_BLOCK)
        out[start:stop] = block[: stop - start]
    return out


def step_marginals(p, steps):
    """Exact occupancy ``(1/N) 1^T P^i`` for ``i = 0..steps``."""
    p = as_transition(p)
    dist = np.full(p.n, 1.0 / p.n)
    out = [dist]
    for _ in range(steps):
        dist = dist @ p.p
        out.append(dist)
    return np.array(out)


def _check_exact(n, steps, limit=EXACT_LIMIT):
    total = n ** (steps + 1)
    if total > limit:
        raise ValueError(f"exact enumeration needs N^(l+1) = {total} paths, above the limit {limit}")


def enumerate_tuples(p, steps):
    """Yield ``(tuples, probabilities)`` chunks over all ``(v_1..v_l)``.

    The start vertex is summed out: ``P(v_1) = (1/N) 1^T P``.
    """
    p = as_transition(p)
    n = p.n
    first = step_marginals(p, 1)[1]
    total = n**steps
    powers = n ** np.arange(steps - 1, -1, -1)
    for start in range(0, total, _ENUM_CHUNK):
        idx = np.arange(start, min(total, start + _ENUM_CHUNK))
        tuples = (idx[:, None] // powers[None, :]) % n
        prob = first[tuples[:, 0]].copy()
        for s in range(1, steps):
            prob *= p.p[tuples[:, s - 1], tuples[:, s]]
        yield tuples, prob


@dataclass(frozen=True)
class ExpectationEstimate:
    mean: float
    stderr: float
    count: int
    mode: str


def _quantity_values(prep, cfg, tuples, quantity):
    if quantity == "g-sum":
        return batch_norms(_tuple_sums(prep.gf, tuples, cfg.weights), cfg.norm)
    if quantity == "h-sum":
        return batch_norms(_tuple_sums(prep.f, tuples, cfg.weights), cfg.norm, cfg.h)
    raise ValueError(f"unknown quantity {quantity!r}")


def exact_distribution(p, field, cfg, quantity="h-sum", limit=EXACT_LIMIT):
    """All realized values of the walk quantity with their probabilities."""
    p = as_transition(p)
    _check_exact(p.n, cfg.steps, limit)
    prep = prepare(field, cfg)
    vals, probs = [], []
    for tuples, prob in enumerate_tuples(p, cfg.steps):
        vals.append(_quantity_values(prep, cfg, tuples, quantity))
        probs.append(prob)
    return np.concatenate(vals), np.concatenate(probs)


def path_values(p, field, cfg, count, seed, quantity="h-sum"):
    paths = simulate_paths(p, cfg.steps, count, seed)
    prep = prepare(field, cfg)
    out = np.empty(count)
    for start in range(0, count, _ENUM_CHUNK):
        out[start:start + _ENUM_CHUNK] = _quantity_values(prep, cfg, paths[start:start + _ENUM_CHUNK, 1:], quantity)
    return out


def expectation_norm(p, field, cfg, mode="exact", count=100_000, seed=0, quantity="g-sum"):
    """Expected walk norm.

    ``quantity="g-sum"`` is ``E||sum w_i Psi(g(f(v_i)))||``; ``"h-sum"`` is
    ``E||h(sum w_i Psi(f(v_i)))||``.  ``mode="exact"`` enumerates every
    path (guarded by ``N^(l+1) <= 1e6``); ``"mc"`` averages ``count``
    simulated walks.
    """
    if mode == "exact":
        vals, probs = exact_distribution(p, field, cfg, quantity)
        return ExpectationEstimate(float(np.sum(vals * probs)), 0.0, int(vals.size), "exact")
    if mode == "mc":
        vals = path_values(p, field, cfg, count, seed, quantity)
        return ExpectationEstimate(float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(count)),
                                   int(count), "monte-carlo")
    raise ValueError(f"unknown mode {mode!r}")


def power_column_sums(p, steps):
    """Rows ``i = 1..steps`` hold the column sums of ``P^i``."""
    return np.array([column_sums(matrix_power(p, i)) for i in range(1, steps + 1)])


def marginal_upper_rhs(p, field, cfg):
    """``(1/N) sum_j sum_i C_{P^i, j} w_i ||Psi(g(f(v_j)))||``."""
    p = as_transition(p)
    cs = power_column_sums(p, cfg.steps)
    gn = prepare(field, cfg).gnorm
    return float(np.sum(cs * cfg.weights[:, None] * gn[None, :]) / p.n)


@dataclass(frozen=True, eq=False)
class CConstants:
    values: np.ndarray
    mode: str          # "exhaustive" or "sampled"
    examined: int

    @property
    def certified(self):
        return self.mode == "exhaustive"


def c_constants(field, cfg, mode="exhaustive", count=10_000, seed=0, limit=EXACT_LIMIT):
    """Largest ``c_i`` such that ``sum_i w_i c_i ||G(v_i)|| <= ||sum_i w_i G(v_i)||`` on every tuple.

    ``c_i = min over tuples of (1/l)||sum_j w_j G(v_j)|| / (w_i ||G(v_i)||)``
    with ``G = Psi(g(f(.)))``.  Exhaustive mode examines all ``N^l`` tuples;
    sampled mode examines ``count`` random tuples and is not certified.
    """
    prep = prepare(field, cfg)
    w = cfg.weights
    if np.any(w <= 0):
        raise PremiseViolation("c constants need w_i > 0 for every step")
    if np.any(prep.gnorm <= 0):
        raise PremiseViolation("c constants need ||Psi(g(f(v)))|| > 0 at every vertex")
    n, steps = field.size, cfg.steps
    best = np.full(steps, np.inf)

    def update(tuples):
        num = batch_norms(_tuple_sums(prep.gf, tuples, w), cfg.norm) / steps
        den = w[None, :] * prep.gnorm[tuples]
        np.minimum(best, (num[:, None] / den).min(axis=0), out=best)

    if mode == "exhaustive":
        total = n**steps
        if total > limit:
            raise ValueError(f"exhaustive c needs N^l = {total} tuples, above the limit {limit}")
        powers = n ** np.arange(steps - 1, -1, -1)
        for start in range(0, total, _ENUM_CHUNK):
            idx = np.arange(start, min(total, start + _ENUM_CHUNK))
            update((idx[:, None] // powers[None, :]) % n)
        examined = total
    elif mode == "sampled":
        rng = substream(seed, "c-constants")
        for start in range(0, count, _ENUM_CHUNK):
            k = min(_ENUM_CHUNK, count - start)
            update(rng.integers(0, n, size=(k, steps)))
        examined = count
    else:
        raise ValueError(f"unknown mode {mode!r}")
    best.setflags(write=False)
    return CConstants(best, mode, int(examined))


def marginal_lower_rhs(p, field, cfg, c):
    """``(1/N) sum_j sum_i C_{P^i, j} w_i c_i ||Psi(g(f(v_j)))||``."""
    p = as_transition(p)
    cs = power_column_sums(p, cfg.steps)
    gn = prepare(field, cfg).gnorm
    cw = cfg.weights * np.asarray(c.values)
    return float(np.sum(cs * cw[:, None] * gn[None, :]) / p.n)


@dataclass(frozen=True)
class TailEstimate:
    p_hat: float
    low: float
    high: float
    hits: int
    count: int

    @property
    def radius(self):
        return max(self.p_hat - self.low, self.high - self.p_hat)


def wilson_interval(hits, count, confidence=0.95):
    ci = binomtest(int(hits), int(count)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def tail_from_values(values, theta):
    hits = int(np.count_nonzero(values >= theta))
    lo, hi = wilson_interval(hits, values.size)
    return TailEstimate(hits / values.size, lo, hi, hits, int(values.size))


def empirical_tail(p, field, cfg, theta, count=100_000, seed=0):
    """Fraction of walks with ``||h(sum w_i Psi(f(v_i)))|| >= theta`` and its Wilson 95% interval."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    return tail_from_values(path_values(p, field, cfg, count, seed, "h-sum"), theta)


def exact_tail(p, field, cfg, theta):
    vals, probs = exact_distribution(p, field, cfg, "h-sum")
    return float(np.sum(probs[vals >= theta]))
