"""Chord/tangent envelopes of convex functions and the Mond-Pecaric ensemble bounds."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, PremiseViolation, ShapeMismatchError
from .maps import identity_map
from .tensors import HermitianTensor, apply_scalar_function, loewner_leq

ENVELOPE_GRID = 1000
EXTREMUM_GRID = 2049
BISECTION_TOL = 1e-12
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EnvelopeConstants:
    """Slope ``m`` shared by the chord (intercept ``b_upper``) and the
    parallel tangent (intercept ``b_lower``) of a convex ``g`` on ``[c, d]``."""

    slope: float
    b_upper: float
    b_lower: float
    c: float
    d: float
    tangent_point: float

    def chord(self, s):
        return self.slope * np.asarray(s, dtype=float) + self.b_upper

    def tangent(self, s):
        return self.slope * np.asarray(s, dtype=float) + self.b_lower


def _bisect_derivative(g, slope, c, d):
    lo, hi = c, d
    flo = float(g.derivative(lo)) - slope
    fhi = float(g.derivative(hi)) - slope
    scale = 1.0 + abs(slope)
    if flo > 1e-9 * scale or fhi < -1e-9 * scale:
        raise DomainError(
            f"derivative of {g.label} does not attain slope {slope!r} on [{c}, {d}]", value=slope
        )
    while hi - lo > BISECTION_TOL * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if float(g.derivative(mid)) < slope:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def envelope_constants(g, c, d):
    """Chord and tangent lines sandwiching a convex ``g`` on ``[c, d]``."""
    c, d = float(c), float(d)
    if not c < d:
        raise ValueError(f"need c < d, got [{c}, {d}]")
    g.check_domain([c, d], what="interval endpoint")
    if not g.is_convex_on(c, d):
        raise PremiseViolation(f"{g.label} is not convex on [{c}, {d}]")
    gc, gd = float(g(c)), float(g(d))
    slope = (gd - gc) / (d - c)
    b_upper = (d * gc - c * gd) / (d - c)
    s0 = g.inverse_derivative(slope)
    if s0 is not None and math.isnan(s0):
        # affine: the tangent coincides with the chord
        s0 = c
    elif s0 is None:
        s0 = _bisect_derivative(g, slope, c, d)
    else:
        span = 1e-9 * (d - c)
        if not (c - span <= s0 <= d + span):
            raise DomainError(
                f"(g')^-1({slope!r}) = {s0!r} lies outside [{c}, {d}] for {g.label}", value=s0
            )
        s0 = min(max(s0, c), d)
    b_lower = float(g(s0)) - slope * s0
    return EnvelopeConstants(slope, b_upper, b_lower, c, d, s0)


def sandwich_slack(g, env, points=ENVELOPE_GRID):
    """Minimum of ``g - tangent`` and ``chord - g`` over a uniform grid."""
    s = np.linspace(env.c, env.d, points)
    v = g(s)
    return float(min(np.min(v - env.tangent(s)), np.min(env.chord(s) - v)))


@dataclass(frozen=True)
class Objective:
    kind: str  # "difference" or "ratio"
    slope: float
    intercept: float
    h: object
    c_r: float = 0.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        line = self.slope * s + self.intercept
        if self.kind == "difference":
            return line - self.c_r * self.h(s)
        return line / self.h(s)


def difference_objective(slope, intercept, c_r, h):
    """``slope*s + intercept - c_r*h(s)``."""
    return Objective("difference", float(slope), float(intercept), h, float(c_r))


def ratio_objective(slope, intercept, h):
    """``(slope*s + intercept) / h(s)``."""
    return Objective("ratio", float(slope), float(intercept), h)


@dataclass(frozen=True)
class ExtremumResult:
    value: float
    location: float
    mode: str
    objective: str


def _golden(f, a, b, sign):
    # maximizes sign*f on [a, b]
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = sign * f(x1), sign * f(x2)
    while b - a > 1e-13 * max(1.0, abs(a), abs(b)):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = sign * f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = sign * f(x2)
    x = 0.5 * (a + b)
    return x, f(x)


def extremize(objective, c, d, mode="max"):
    """Extremum of a 1-D objective on ``[c, d]``: dense grid, then golden section.

    Ties on the grid resolve toward the smaller ``s``.
    """
    if mode not in ("max", "min"):
        raise ValueError("mode must be 'max' or 'min'")
    c, d = float(c), float(d)
    if c > d:
        raise ValueError(f"empty interval [{c}, {d}]")
    grid = np.linspace(c, d, EXTREMUM_GRID) if d > c else np.array([c])
    if getattr(objective, "kind", None) == "ratio":
        hv = objective.h(grid)
        if np.any(~(hv > 0)):
            bad = float(grid[np.argmax(~(hv > 0))])
            raise PremiseViolation(f"h(s) > 0 fails at s = {bad!r}")
    vals = np.asarray(objective(grid), dtype=float)
    sign = 1.0 if mode == "max" else -1.0
    k = int(np.argmax(sign * vals))
    best_s, best_v = float(grid[k]), float(vals[k])
    if grid.size > 1:
        a = grid[max(k - 1, 0)]
        b = grid[min(k + 1, grid.size - 1)]
        f = lambda s: float(objective(s))  # noqa: E731
        s_ref, v_ref = _golden(f, float(a), float(b), sign)
        if sign * v_ref > sign * best_v:
            best_s, best_v = s_ref, v_ref
    name = getattr(objective, "kind", "callable")
    return ExtremumResult(best_v, best_s, mode, name)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted ensemble of Hermitian tensors, each passed through its own map."""

    tensors: tuple
    weights: np.ndarray
    maps: tuple
    c: float
    d: float

    @classmethod
    def build(cls, tensors, weights, interval, maps=None, spectrum_tol=1e-9):
        tensors = tuple(tensors)
        w = np.asarray(weights, dtype=float)
        if len(tensors) == 0 or w.shape != (len(tensors),):
            raise ShapeMismatchError("need one weight per tensor")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise PremiseViolation("weights must be a probability vector")
        if maps is None:
            maps = tuple(identity_map(x.shape) for x in tensors)
        elif not isinstance(maps, (list, tuple)):
            maps = (maps,) * len(tensors)
        maps = tuple(maps)
        if len(maps) != len(tensors):
            raise ShapeMismatchError("need one map per tensor")
        outs = {m.output_shape for m in maps}
        if len(outs) != 1:
            raise ShapeMismatchError("maps must share one output shape")
        c, d = float(interval[0]), float(interval[1])
        tol = spectrum_tol * (1.0 + max(abs(c), abs(d)))
        for i, x in enumerate(tensors):
            lam = x.eigvalsh()
            if lam[0] < c - tol or lam[-1] > d + tol:
                raise PremiseViolation(
                    f"tensor {i} has spectrum [{lam[0]:.6g}, {lam[-1]:.6g}] outside [{c}, {d}]"
                )
        w.setflags(write=False)
        return cls(tensors, w, maps, c, d)

    def mean(self):
        """``sum_i w_i Psi_i(X_i)``."""
        return _weighted(self.weights, [m(x) for m, x in zip(self.maps, self.tensors)])

    def g_mean(self, g):
        """``sum_i w_i Psi_i(g(X_i))``."""
        return _weighted(
            self.weights, [m(apply_scalar_function(x, g)) for m, x in zip(self.maps, self.tensors)]
        )


def _weighted(weights, tensors):
    acc = np.zeros_like(tensors[0].matrix)
    for w, t in zip(weights, tensors):
        acc = acc + w * t.matrix
    return HermitianTensor.from_matrix(acc, tensors[0].shape)


@dataclass(frozen=True, eq=False)
class LemmaBounds:
    lhs: HermitianTensor
    upper_rhs: HermitianTensor
    lower_rhs: HermitianTensor
    upper_constant: ExtremumResult
    lower_constant: ExtremumResult
    upper_check: object
    lower_check: object

    @property
    def holds(self):
        return bool(self.upper_check.holds and self.lower_check.holds)


def ensemble_lemma_bounds(ensemble, g, h, c_r, tol=None):
    """Both sides of the ``c_r``-parametrized sandwich of ``sum w_i Psi_i(g(X_i))``.

    upper: ``c_r h(mean) + max_s[m s + b_U - c_r h(s)] I``
    lower: ``c_r h(mean) + min_s[m s + b_L - c_r h(s)] I``
    """
    env = envelope_constants(g, ensemble.c, ensemble.d)
    up = extremize(difference_objective(env.slope, env.b_upper, c_r, h), ensemble.c, ensemble.d, "max")
    lo = extremize(difference_objective(env.slope, env.b_lower, c_r, h), ensemble.c, ensemble.d, "min")
    lhs = ensemble.g_mean(g)
    h_mean = apply_scalar_function(ensemble.mean(), h)
    ident = HermitianTensor.identity(lhs.shape)
    upper = float(c_r) * h_mean + up.value * ident
    lower = float(c_r) * h_mean + lo.value * ident
    return LemmaBounds(
        lhs, upper, lower, up, lo,
        loewner_leq(lhs, upper, tol),
        loewner_leq(lower, lhs, tol),
    )


@dataclass(frozen=True, eq=False)
class DoubleBound:
    """``(1/alpha_max) G <= h(M) <= (1/alpha_min) G`` with ``G`` the g-mean
    and ``M`` the plain mean.  A side whose premise fails is ``None``."""

    alpha_max: float
    alpha_min: float
    lower_side: object
    upper_side: object
    violated_premises: tuple

    @property
    def verified(self):
        return (
            None if self.lower_side is None else bool(self.lower_side.holds),
            None if self.upper_side is None else bool(self.upper_side.holds),
        )


def positivity_premises(env, h, c, d, points=EXTREMUM_GRID):
    """Grid check of ``h > 0``, ``m s + b_U > 0``, ``m s + b_L > 0`` on ``[c, d]``."""
    s = np.linspace(c, d, points)
    return {
        "h(s) > 0": bool(np.all(h(s) > 0)),
        "m_g s + b_gU > 0": bool(np.all(env.chord(s) > 0)),
        "m_g s + b_gL > 0": bool(np.all(env.tangent(s) > 0)),
    }


def alpha_constants(g, h, c, d):
    """``(alpha_max, alpha_min, envelope)``: extremes of the chord/tangent-to-h ratios."""
    env = envelope_constants(g, c, d)
    a_max = extremize(ratio_objective(env.slope, env.b_upper, h), c, d, "max").value
    a_min = extremize(ratio_objective(env.slope, env.b_lower, h), c, d, "min").value
    return a_max, a_min, env


def mp_double_bound(ensemble, g, h, tol=None):
    """Evaluate and verify the Mond-Pecaric double inequality on an ensemble.

    ``h <= 0`` somewhere, or both line-positivity premises failing, raises
    :class:`PremiseViolation`.  If only one line premise fails the other side
    is still checked.
    """
    c, d = ensemble.c, ensemble.d
    env = envelope_constants(g, c, d)
    prem = positivity_premises(env, h, c, d)
    failed = tuple(k for k, ok in prem.items() if not ok)
    if not prem["h(s) > 0"] or (not prem["m_g s + b_gU > 0"] and not prem["m_g s + b_gL > 0"]):
        raise PremiseViolation(list(failed))
    gm = ensemble.g_mean(g)
    hm = apply_scalar_function(ensemble.mean(), h)
    a_max = a_min = math.nan
    lower_side = upper_side = None
    if prem["m_g s + b_gU > 0"]:
        a_max = extremize(ratio_objective(env.slope, env.b_upper, h), c, d, "max").value
        lower_side = loewner_leq(gm / a_max, hm, tol)
    if prem["m_g s + b_gL > 0"]:
        a_min = extremize(ratio_objective(env.slope, env.b_lower, h), c, d, "min").value
        upper_side = loewner_leq(hm, gm / a_min, tol)
    return DoubleBound(a_max, a_min, lower_side, upper_side, failed)


ENSEMBLE_SHAPES = ((2,), (3,), (4,), (2, 2), (5,), (2, 3), (3, 2), (3, 3), (9,))
MAP_KINDS = ("identity", "unitary", "pinching", "partial-trace")


def random_ensemble(seed, index, interval=(1.0, 2.0), max_steps=5, max_side=9):
    """Seeded ensemble: 1..max_steps tensors with spectra in ``interval``,
    Dirichlet weights and one map family (a fresh Haar unitary per tensor for
    ``unitary``).  Partial traces apply only to multi-mode shapes."""
    from .maps import map_from_config
    from .rng import substream
    from .tensors import TensorShape, random_hermitian_with_spectrum

    rng = substream(seed, "ensemble", index)
    shapes = [s for s in ENSEMBLE_SHAPES if int(np.prod(s)) <= max_side]
    shape = TensorShape(shapes[int(rng.integers(len(shapes)))])
    k = int(rng.integers(1, max_steps + 1))
    kinds = [m for m in MAP_KINDS if m != "partial-trace" or len(shape.mode_sizes) > 1]
    kind = kinds[int(rng.integers(len(kinds)))]
    spec = {"kind": kind}
    if kind == "pinching":
        cut = int(rng.integers(1, shape.side)) if shape.side > 1 else 1
        spec["blocks"] = [list(range(cut)), list(range(cut, shape.side))] if cut < shape.side else [list(range(shape.side))]
    tensors = [random_hermitian_with_spectrum(shape, interval, seed, stream=("ensemble", index, i)) for i in range(k)]
    maps = [map_from_config(spec, shape, rng) for _ in range(k)]
    weights = rng.dirichlet(np.ones(k))
    return Ensemble.build(tensors, weights, interval, maps)


ENVELOPE_FAMILIES = (
    ("square", None),
    ("exp", None),
    ("neglog", (0.5, 2.0)),
    ("cube", (0.0, 2.0)),
)


def envelope_cases(seed, count, families=ENVELOPE_FAMILIES):
    """Seeded ``(name, c, d)`` triples; unrestricted families draw ``c`` in ``[-2, 2]``
    and a width in ``[0.1, 3]``, restricted ones draw inside their range."""
    from .rng import substream

    out = []
    for name, box in families:
        rng = substream(seed, "envelope", name)
        for _ in range(count):
            if box is None:
                c = float(rng.uniform(-2.0, 2.0))
                d = c + float(rng.uniform(0.1, 3.0))
            else:
                c, d = sorted(float(x) for x in rng.uniform(box[0], box[1], size=2))
                if d - c < 1e-3:
                    d = min(box[1], c + 1e-3)
                    c = d - 1e-3
            out.append((name, c, d))
    return out
