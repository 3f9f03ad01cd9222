"""Real scalar functions used as the ``g`` and ``h`` of the tensor inequalities.

Functions come from a small registry so that convexity and derivative
inverses can be certified instead of parsed from user expressions.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError, DomainError

CONVEXITY_GRID = 1000
CONVEXITY_TOL = 1e-9


@dataclass(frozen=True)
class ScalarFunction:
    """A real function with value, derivative and derivative inverse.

    ``kind`` is one of ``identity``, ``affine``, ``power``, ``exponential``,
    ``negative-log`` or ``polynomial``; ``params`` holds the kind-specific
    parameters (see :func:`make_function`).  ``domain`` is the closed/open
    natural domain as ``(lo, hi, lo_open)``.
    """

    kind: str
    params: tuple = ()
    domain: tuple = (-math.inf, math.inf, False)
    name: str = field(default="", compare=False)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        k, p = self.kind, self.params
        if k == "identity":
            return s * 1.0
        if k == "affine":
            return p[0] * s + p[1]
        if k == "power":
            return np.power(s, p[0])
        if k == "exponential":
            return np.power(p[0], s)
        if k == "negative-log":
            return -np.log(s)
        if k == "polynomial":
            return np.polynomial.polynomial.polyval(s, p)
        raise ValueError(f"unknown function kind {k!r}")

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        k, p = self.kind, self.params
        if k == "identity":
            return np.ones_like(s)
        if k == "affine":
            return np.full_like(s, p[0])
        if k == "power":
            return p[0] * np.power(s, p[0] - 1.0)
        if k == "exponential":
            return math.log(p[0]) * np.power(p[0], s)
        if k == "negative-log":
            return -1.0 / s
        if k == "polynomial":
            return np.polynomial.polynomial.polyval(s, np.polynomial.polynomial.polyder(p))
        raise ValueError(f"unknown function kind {k!r}")

    def inverse_derivative(self, slope):
        """Closed-form ``(g')^{-1}(slope)`` or ``None`` when only bisection applies.

        For affine functions every point has derivative equal to the slope;
        ``nan`` is returned and callers choose a point themselves.
        """
        k, p = self.kind, self.params
        if k in ("identity", "affine"):
            return math.nan
        if k == "power":
            a = p[0]
            if a == 1.0:
                return math.nan
            if slope / a < 0:
                return None
            return (slope / a) ** (1.0 / (a - 1.0))
        if k == "exponential":
            lt = math.log(p[0])
            if slope / lt <= 0:
                return None
            return math.log(slope / lt) / lt
        if k == "negative-log":
            if slope >= 0:
                return None
            return -1.0 / slope
        return None

    def in_domain(self, s):
        lo, hi, lo_open = self.domain
        s = np.asarray(s, dtype=float)
        ok = s <= hi
        ok &= (s > lo) if lo_open else (s >= lo)
        return ok

    def check_domain(self, values, what="eigenvalue"):
        values = np.atleast_1d(np.asarray(values, dtype=float))
        bad = ~self.in_domain(values)
        if np.any(bad):
            v = float(values[np.argmax(bad)])
            raise DomainError(f"{what} {v!r} lies outside the domain of {self.label}", value=v)

    def is_convex_on(self, c, d, points=CONVEXITY_GRID, tol=CONVEXITY_TOL):
        """Second-difference convexity test on a uniform grid of ``[c, d]``."""
        s = np.linspace(c, d, points)
        v = self(s)
        second = v[2:] - 2.0 * v[1:-1] + v[:-2]
        return bool(np.all(second >= -tol))

    @property
    def label(self):
        if self.name:
            return self.name
        return f"{self.kind}{tuple(self.params) if self.params else ''}"

    def to_dict(self):
        return {"kind": self.kind, "params": list(self.params)}


def make_function(kind, *params):
    """Build a registry function.

    ``affine(alpha, beta)``, ``power(p)`` (``p > 0``; convex for ``p >= 1``),
    ``exponential(base)`` with ``base > 0``, ``negative-log()``,
    ``polynomial(c0, c1, ...)`` in ascending coefficient order.
    """
    params = tuple(float(x) for x in params)
    if kind == "identity":
        return ScalarFunction("identity", (), name="s")
    if kind == "affine":
        if len(params) != 2:
            raise ConfigError("affine takes (alpha, beta)")
        return ScalarFunction("affine", params, name=f"{params[0]:g}*s+{params[1]:g}")
    if kind == "power":
        if len(params) != 1 or params[0] <= 0:
            raise ConfigError("power takes one exponent p > 0")
        p = params[0]
        integral = p == int(p)
        domain = (-math.inf, math.inf, False) if integral else (0.0, math.inf, False)
        return ScalarFunction("power", params, domain, name=f"s^{p:g}")
    if kind == "exponential":
        base = params[0] if params else math.e
        if base <= 0:
            raise ConfigError("exponential base must be positive")
        return ScalarFunction("exponential", (base,), name="exp" if base == math.e else f"{base:g}^s")
    if kind == "negative-log":
        return ScalarFunction("negative-log", (), (0.0, math.inf, True), name="-log")
    if kind == "polynomial":
        if not params:
            raise ConfigError("polynomial needs at least one coefficient")
        return ScalarFunction("polynomial", params, name=f"poly{params}")
    raise ConfigError(f"unknown function name {kind!r}")


REGISTRY = {
    "identity": lambda: make_function("identity"),
    "square": lambda: make_function("power", 2),
    "cube": lambda: make_function("power", 3),
    "sqrt": lambda: make_function("power", 0.5),
    "exp": lambda: make_function("exponential", math.e),
    "neglog": lambda: make_function("negative-log"),
}


def function_from_config(spec):
    """Resolve ``"square"``, ``{"kind": "power", "params": [2]}`` and the like."""
    if isinstance(spec, ScalarFunction):
        return spec
    if isinstance(spec, str):
        if spec in REGISTRY:
            return REGISTRY[spec]()
        return make_function(spec)
    if isinstance(spec, dict):
        if "name" in spec and spec["name"] in REGISTRY:
            return REGISTRY[spec["name"]]()
        if "kind" not in spec:
            raise ConfigError(f"function spec {spec!r} has no 'kind' or registry 'name'")
        return make_function(spec["kind"], *spec.get("params", []))
    raise ConfigError(f"unknown function spec {spec!r}")


def function_to_config(fn):
    for name, build in REGISTRY.items():
        if build() == fn:
            return name
    return fn.to_dict()
