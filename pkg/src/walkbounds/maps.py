"""Normalized positive linear maps and unitarily invariant norms."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError, ShapeMismatchError
from .tensors import HermitianTensor, TensorShape, as_shape

UNITARY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class PositiveLinearMap:
    """A normalized positive linear map between matricized tensor spaces.

    kinds:
      ``identity``
      ``unitary``   X -> U X U^H
      ``pinching``  keeps the diagonal blocks of a partition of ``0..D-1``
      ``partial-trace``  traces out ``modes`` and divides by their dimension
    """

    kind: str
    input_shape: TensorShape
    unitary: np.ndarray = None
    blocks: tuple = ()
    modes: tuple = ()
    output_shape: TensorShape = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "input_shape", as_shape(self.input_shape))
        side = self.input_shape.side
        out = self.input_shape
        if self.kind == "identity":
            pass
        elif self.kind == "unitary":
            u = np.asarray(self.unitary, dtype=complex)
            if u.shape != (side, side):
                raise ShapeMismatchError(f"conjugator has shape {u.shape}, expected {(side, side)}")
            dev = np.max(np.abs(u @ u.conj().T - np.eye(side)))
            if dev > UNITARY_TOL:
                raise ValueError(f"conjugator is not unitary: max |U U^H - I| = {dev:.3e}")
            u = u.copy()
            u.setflags(write=False)
            object.__setattr__(self, "unitary", u)
        elif self.kind == "pinching":
            blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
            flat = sorted(i for b in blocks for i in b)
            if flat != list(range(side)):
                raise ValueError(f"pinching blocks must partition 0..{side - 1}")
            object.__setattr__(self, "blocks", blocks)
        elif self.kind == "partial-trace":
            m = len(self.input_shape.mode_sizes)
            modes = tuple(sorted(set(int(k) for k in self.modes)))
            if not modes or any(k < 0 or k >= m for k in modes) or len(modes) == m:
                raise ValueError(f"partial trace needs a proper nonempty subset of modes 0..{m - 1}")
            object.__setattr__(self, "modes", modes)
            kept = tuple(s for k, s in enumerate(self.input_shape.mode_sizes) if k not in modes)
            out = TensorShape(kept)
        else:
            raise ConfigError(f"unknown positive linear map kind {self.kind!r}")
        object.__setattr__(self, "output_shape", out)

    def apply_matrix(self, m):
        """Apply to a raw (possibly batched, ``... x D x D``) matrix array."""
        m = np.asarray(m)
        if self.kind == "identity":
            return m
        if self.kind == "unitary":
            u = self.unitary
            return u @ m @ u.conj().T
        if self.kind == "pinching":
            out = np.zeros_like(m)
            for b in self.blocks:
                idx = np.ix_(b, b)
                out[(..., *idx)] = m[(..., *idx)]
            return out
        sizes = self.input_shape.mode_sizes
        lead = m.shape[:-2]
        t = m.reshape(lead + sizes + sizes)
        off = len(lead)
        # contract row/column index pairs of the traced modes, highest first
        for k in sorted(self.modes, reverse=True):
            cur = (t.ndim - off) // 2
            t = np.trace(t, axis1=off + k, axis2=off + cur + k)
        traced = math.prod(sizes[k] for k in self.modes)
        side = self.output_shape.side
        return t.reshape(lead + (side, side)) / traced

    def __call__(self, x):
        if x.shape != self.input_shape:
            raise ShapeMismatchError(
                f"map expects shape {self.input_shape.mode_sizes}, got {x.shape.mode_sizes}"
            )
        return HermitianTensor.from_matrix(self.apply_matrix(x.matrix), self.output_shape)


def identity_map(shape):
    return PositiveLinearMap("identity", as_shape(shape))


def unitary_map(shape, unitary):
    return PositiveLinearMap("unitary", as_shape(shape), unitary=unitary)


def pinching_map(shape, blocks):
    return PositiveLinearMap("pinching", as_shape(shape), blocks=tuple(blocks))


def partial_trace_map(shape, modes):
    return PositiveLinearMap("partial-trace", as_shape(shape), modes=tuple(modes))


def map_from_config(spec, shape, rng=None):
    """Build a map from ``{"kind": ...}``; ``unitary`` without a matrix draws a Haar one."""
    from .tensors import random_unitary

    if spec is None:
        spec = {"kind": "identity"}
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind", "identity")
    shape = as_shape(shape)
    if kind == "identity":
        return identity_map(shape)
    if kind == "unitary":
        if "real" in spec:
            u = np.asarray(spec["real"]) + 1j * np.asarray(spec.get("imag", 0.0))
        else:
            if rng is None:
                raise ConfigError("unitary map without a matrix needs a random stream")
            u = random_unitary(shape.side, rng)
        return unitary_map(shape, u)
    if kind == "pinching":
        blocks = spec.get("blocks")
        if blocks is None:
            blocks = [[i] for i in range(shape.side)]
        return pinching_map(shape, blocks)
    if kind == "partial-trace":
        return partial_trace_map(shape, spec.get("modes", [0]))
    raise ConfigError(f"unknown positive linear map kind {kind!r}")


@dataclass(frozen=True)
class UINorm:
    """Unitarily invariant norm computed from singular values.

    kinds: ``spectral``, ``trace``, ``frobenius``, ``ky-fan`` (param k),
    ``schatten`` (param p >= 1).
    """

    kind: str = "spectral"
    param: float = None

    def __post_init__(self):
        if self.kind in ("spectral", "trace", "frobenius"):
            return
        if self.kind == "ky-fan":
            if self.param is None or int(self.param) != self.param or self.param < 1:
                raise ConfigError("ky-fan norm needs an integer k >= 1")
            return
        if self.kind == "schatten":
            if self.param is None or self.param < 1:
                raise ConfigError("schatten norm needs p >= 1")
            return
        raise ConfigError(f"unknown norm kind {self.kind!r}")

    def from_singular_values(self, sv):
        """Norm of each row of ``sv`` (last axis holds singular values)."""
        sv = np.abs(np.asarray(sv, dtype=float))
        if self.kind == "spectral":
            return sv.max(axis=-1)
        if self.kind == "trace":
            return sv.sum(axis=-1)
        if self.kind == "frobenius":
            return np.sqrt((sv * sv).sum(axis=-1))
        if self.kind == "ky-fan":
            k = int(self.param)
            return -np.sort(-sv, axis=-1)[..., :k].sum(axis=-1)
        p = float(self.param)
        return (sv**p).sum(axis=-1) ** (1.0 / p)

    def dimension_factor(self, side):
        """``||I_D||`` -- the ratio between this norm and the spectral norm on multiples of I."""
        if self.kind == "spectral":
            return 1.0
        if self.kind == "trace":
            return float(side)
        if self.kind == "frobenius":
            return math.sqrt(side)
        if self.kind == "ky-fan":
            return float(min(int(self.param), side))
        return float(side) ** (1.0 / float(self.param))

    def to_config(self):
        return {"kind": self.kind} if self.param is None else {"kind": self.kind, "param": self.param}


def norm_from_config(spec):
    if spec is None:
        return UINorm()
    if isinstance(spec, UINorm):
        return spec
    if isinstance(spec, str):
        return UINorm(spec)
    return UINorm(spec.get("kind", "spectral"), spec.get("param"))


def ui_norm(x, norm=None):
    """Unitarily invariant norm of a tensor or a raw matrix."""
    norm = norm or UINorm()
    if isinstance(x, HermitianTensor):
        sv = np.abs(np.linalg.eigvalsh(x.matrix))
    else:
        sv = np.linalg.svd(np.asarray(x), compute_uv=False)
    return float(norm.from_singular_values(sv))
