"""Hermitian tensors stored through their square matricization.

An order-2M tensor with mode sizes ``I_1..I_M`` is kept as a ``D x D`` complex
matrix, ``D = prod(I_k)``.  Everything the inequalities need (spectra,
functional calculus, Loewner order) acts through that matrix.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import NonHermitianError, ShapeMismatchError
from .rng import substream

HERMITIAN_RTOL = 1e-10


@dataclass(frozen=True)
class TensorShape:
    mode_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.mode_sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError(f"mode sizes must be positive integers, got {self.mode_sizes!r}")
        object.__setattr__(self, "mode_sizes", sizes)

    @property
    def side(self):
        return math.prod(self.mode_sizes)

    @classmethod
    def square(cls, side):
        return cls((int(side),))


def as_shape(shape):
    if isinstance(shape, TensorShape):
        return shape
    if isinstance(shape, int):
        return TensorShape((shape,))
    return TensorShape(tuple(shape))


def _readonly(a):
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HermitianTensor:
    shape: TensorShape
    matrix: np.ndarray

    @classmethod
    def from_matrix(cls, matrix, shape=None, rtol=HERMITIAN_RTOL):
        """Validate Hermitian symmetry and store ``(X + X^H) / 2``."""
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeMismatchError(f"expected a square matrix, got shape {m.shape}")
        shape = TensorShape((m.shape[0],)) if shape is None else as_shape(shape)
        if shape.side != m.shape[0]:
            raise ShapeMismatchError(
                f"mode sizes {shape.mode_sizes} give side {shape.side}, matrix side is {m.shape[0]}"
            )
        scale = np.max(np.abs(m)) if m.size else 0.0
        asym = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        tol = rtol * (1.0 + scale)
        if asym > tol:
            raise NonHermitianError(asym, tol)
        return cls(shape, _readonly((m + m.conj().T) / 2.0))

    @classmethod
    def identity(cls, shape):
        shape = as_shape(shape)
        return cls(shape, _readonly(np.eye(shape.side)))

    @classmethod
    def diag(cls, values, shape=None):
        return cls.from_matrix(np.diag(np.asarray(values, dtype=float)), shape)

    @property
    def side(self):
        return self.shape.side

    def __add__(self, other):
        _check_same_shape(self, other)
        return HermitianTensor(self.shape, _readonly(self.matrix + other.matrix))

    def __sub__(self, other):
        _check_same_shape(self, other)
        return HermitianTensor(self.shape, _readonly(self.matrix - other.matrix))

    def __mul__(self, scalar):
        scalar = float(scalar)
        return HermitianTensor(self.shape, _readonly(self.matrix * scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def allclose(self, other, atol=1e-9):
        return self.shape == other.shape and bool(
            np.allclose(self.matrix, other.matrix, atol=atol, rtol=0.0)
        )

    def eigvalsh(self):
        return np.linalg.eigvalsh(self.matrix)

    def to_json(self):
        return {
            "shape": list(self.shape.mode_sizes),
            "real": self.matrix.real.tolist(),
            "imag": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_json(cls, doc):
        m = np.asarray(doc["real"], dtype=float) + 1j * np.asarray(doc["imag"], dtype=float)
        return cls.from_matrix(m, TensorShape(tuple(doc["shape"])))


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape.mode_sizes} vs {b.shape.mode_sizes}")


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def eigendecompose(x):
    """Ascending eigenvalues and unitary eigenvectors of a Hermitian tensor."""
    if not isinstance(x, HermitianTensor):
        x = HermitianTensor.from_matrix(x)
    w, u = np.linalg.eigh(x.matrix)
    w.setflags(write=False)
    u.setflags(write=False)
    return SpectralDecomposition(w, u)


def apply_scalar_function(x, fn):
    """Spectral functional calculus ``U diag(fn(lambda)) U^H``.

    ``fn`` is a :class:`~walkbounds.functions.ScalarFunction` (its domain is
    enforced) or any vectorized callable.
    """
    dec = eigendecompose(x)
    if hasattr(fn, "check_domain"):
        fn.check_domain(dec.eigenvalues)
    vals = np.asarray(fn(dec.eigenvalues), dtype=float)
    u = dec.eigenvectors
    return HermitianTensor.from_matrix((u * vals) @ u.conj().T, x.shape)


@dataclass(frozen=True)
class LoewnerResult:
    holds: bool
    min_eigenvalue: float
    tolerance: float

    def __bool__(self):
        return self.holds


def default_loewner_tol(b):
    return 1e-8 * (1.0 + float(np.max(np.abs(b.eigvalsh()))))


def loewner_leq(a, b, tol=None):
    """Check ``a <= b`` in Loewner order: ``min eig(b - a) >= -tol``.

    The returned witness is the minimum eigenvalue of ``b - a``.
    """
    _check_same_shape(a, b)
    if tol is None:
        tol = default_loewner_tol(b)
    lam = float(np.linalg.eigvalsh(b.matrix - a.matrix)[0])
    return LoewnerResult(lam >= -tol, lam, float(tol))


def random_unitary(side, rng):
    """Haar-distributed unitary via QR with phase correction."""
    z = (rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_hermitian_with_spectrum(shape, interval, seed, stream=()):
    """Seeded Hermitian tensor whose eigenvalues are drawn uniformly from ``interval``.

    Deterministic per ``(seed, stream, shape)``.  A degenerate interval
    ``[c, c]`` returns exactly ``c * I``.
    """
    shape = as_shape(shape)
    c, d = float(interval[0]), float(interval[1])
    if c > d:
        raise ValueError(f"empty interval [{c}, {d}]")
    if c == d:
        return HermitianTensor(shape, _readonly(c * np.eye(shape.side)))
    rng = substream(seed, "hermitian", *stream, *shape.mode_sizes)
    lam = rng.uniform(c, d, size=shape.side)
    u = random_unitary(shape.side, rng)
    return HermitianTensor.from_matrix((u * lam) @ u.conj().T, shape)


def random_psd(shape, seed, stream=(), scale=1.0):
    shape = as_shape(shape)
    rng = substream(seed, "psd", *stream, *shape.mode_sizes)
    z = rng.standard_normal((shape.side, shape.side)) + 1j * rng.standard_normal((shape.side, shape.side))
    return HermitianTensor.from_matrix(scale * (z @ z.conj().T) / shape.side, shape)
