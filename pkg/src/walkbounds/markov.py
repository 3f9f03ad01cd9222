"""Row-stochastic matrices, column sums and spectral column-sum bounds.

The four bounds audited here estimate a column sum ``C_j`` of a transition
matrix from its spectrum:

* ``ub1``  ``C_j <= N - |lambda_2|`` when ``max_j C_j >= N - 1``
* ``ub2``  ``C_j <= [min_i |lambda_i| / (2 p_jj - 1)^q]^(1/(1-q))`` when all ``p_ii > 1/2``
* ``lb1``  ``p_jj + |lambda - p_jj|^(1/(1-q)) / (1 - p_jj)^(q/(1-q)) <= C_j``
  for eigenvalues in the Ostrowski disc of column ``j``
* ``lb2``  ``|lambda|^2 <= C_j`` for eigenvalues in the ``q = 1/2`` disc
"""

from dataclasses import asdict, dataclass, field
import math

import numpy as np

from .rng import substream

ROW_TOL = 1e-12
AUDIT_TOL = 1e-9
ELIGIBILITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float, copy=True)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] == 0:
            raise ValueError(f"transition matrix must be square, got shape {p.shape}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_array(cls, p, tol=ROW_TOL):
        p = np.asarray(p, dtype=float)
        if np.any(p < 0):
            raise ValueError("transition matrix has negative entries")
        dev = np.max(np.abs(p.sum(axis=1) - 1.0))
        if dev > tol:
            raise ValueError(f"rows must sum to 1: max deviation {dev:.3e} > {tol:.1e}")
        return cls(p)

    @property
    def n(self):
        return self.p.shape[0]

    def to_csv(self):
        lines = [f"N,{self.n}"]
        lines += [",".join(format(float(x), ".17g") for x in row) for row in self.p]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        rows = [r.strip() for r in text.strip().splitlines() if r.strip()]
        head = rows[0].split(",")
        if head[0].strip() != "N":
            raise ValueError("CSV transition matrix must start with a header 'N,<size>'")
        n = int(head[1])
        data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
        if data.shape != (n, n):
            raise ValueError(f"header says N={n} but data has shape {data.shape}")
        return cls.from_array(data)


def as_transition(p):
    return p if isinstance(p, TransitionMatrix) else TransitionMatrix.from_array(p)


def column_sums(p):
    return as_transition(p).p.sum(axis=0)


def matrix_power(p, i):
    """``P^i`` for ``i >= 1``; rows still sum to one within 1e-10."""
    p = as_transition(p)
    if int(i) != i or i < 1:
        raise ValueError("matrix_power needs a positive integer exponent (use the identity for i = 0)")
    return TransitionMatrix.from_array(np.linalg.matrix_power(p.p, int(i)), tol=1e-10)


def sort_by_modulus(values):
    """Descending modulus; ties by descending real part, then imaginary part."""
    v = np.asarray(values, dtype=complex)
    key_mod = np.round(np.abs(v), 12)
    key_re = np.round(v.real, 12)
    key_im = np.round(v.imag, 12)
    order = np.lexsort((-key_im, -key_re, -key_mod))
    return v[order]


def spectrum(p):
    """Eigenvalues sorted by descending modulus (Perron eigenvalue first)."""
    return sort_by_modulus(np.linalg.eigvals(as_transition(p).p))


def power_spectra(p, steps):
    """Spectra of ``P^1..P^steps`` as ``lambda^i``, each list in descending modulus."""
    lam = spectrum(p)
    return [sort_by_modulus(lam**i) for i in range(1, steps + 1)]


@dataclass(frozen=True)
class BoundAuditRecord:
    lemma: str
    column: int
    premise_satisfied: bool
    bound: float
    actual: float
    violated: bool
    eigenvalue: complex = None
    q: float = None
    seed: object = None

    def to_dict(self):
        d = asdict(self)
        if self.eigenvalue is not None:
            d["eigenvalue"] = [float(self.eigenvalue.real), float(self.eigenvalue.imag)]
        return d


@dataclass(frozen=True)
class ColumnBoundAudit:
    lemma: str
    premise_satisfied: bool
    records: tuple
    premise_detail: str = ""
    q: float = None

    @property
    def violations(self):
        return tuple(r for r in self.records if r.violated)

    @property
    def bounds(self):
        return np.array([r.bound for r in self.records])


def ub1(p):
    """Audit ``C_j <= N - |lambda_2|`` under the premise ``max_j C_j >= N - 1``."""
    p = as_transition(p)
    n = p.n
    cs = column_sums(p)
    lam = spectrum(p)
    second = abs(lam[1]) if n > 1 else 0.0
    premise = bool(cs.max() >= n - 1 - ROW_TOL)
    bound = n - second
    recs = tuple(
        BoundAuditRecord("ub1", j, premise, float(bound), float(cs[j]),
                         premise and bool(cs[j] > bound + AUDIT_TOL))
        for j in range(n)
    )
    return ColumnBoundAudit("ub1", premise, recs, f"max C_j = {cs.max():.17g}, N - 1 = {n - 1}")


def ub2(p, q=0.5):
    """Audit the min-modulus column-sum upper bound exactly as stated."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    p = as_transition(p)
    cs = column_sums(p)
    diag = np.diag(p.p)
    premise = bool(np.all(2.0 * diag - 1.0 > 0.0))
    min_mod = float(np.min(np.abs(spectrum(p))))
    recs = []
    for j in range(p.n):
        base = 2.0 * diag[j] - 1.0
        bound = (min_mod / base**q) ** (1.0 / (1.0 - q)) if base > 0 else math.nan
        recs.append(BoundAuditRecord("ub2", j, premise, float(bound), float(cs[j]),
                                     premise and bool(cs[j] > bound + AUDIT_TOL), q=q))
    return ColumnBoundAudit("ub2", premise, tuple(recs), f"min 2p_jj - 1 = {np.min(2 * diag - 1):.17g}", q)


@dataclass(frozen=True)
class OstrowskiDisc:
    column: int
    center: float
    radius: float
    q: float


def _check_not_absorbing(p):
    diag = np.diag(p.p)
    if np.any(diag >= 1.0):
        j = int(np.argmax(diag >= 1.0))
        raise ValueError(f"diagonal entry p[{j},{j}] equals 1; Ostrowski discs degenerate")


def ostrowski_discs(p, q):
    """Discs ``|z - p_jj| <= (1 - p_jj)^q (C_j - p_jj)^(1-q)``, one per column."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q!r}")
    p = as_transition(p)
    cs = column_sums(p)
    diag = np.diag(p.p)
    out = []
    for j in range(p.n):
        row_def = max(1.0 - diag[j], 0.0)
        col_def = max(cs[j] - diag[j], 0.0)
        out.append(OstrowskiDisc(j, float(diag[j]), float(row_def**q * col_def ** (1.0 - q)), float(q)))
    return out


def ostrowski_eligible(p, q, eigenvalues=None):
    """Per column, the eigenvalues lying in that column's Ostrowski disc.

    Returns a list (one entry per column) of lists of ``(index, eigenvalue)``
    with indices into the descending-modulus spectrum.  Empty lists are a
    normal outcome.
    """
    p = as_transition(p)
    _check_not_absorbing(p)
    lam = spectrum(p) if eigenvalues is None else np.asarray(eigenvalues, dtype=complex)
    out = []
    for disc in ostrowski_discs(p, q):
        dist = np.abs(lam - disc.center)
        slack = ELIGIBILITY_TOL * (1.0 + disc.radius)
        out.append([(int(k), complex(lam[k])) for k in np.flatnonzero(dist <= disc.radius + slack)])
    return out


def union_covers_spectrum(p, q, slack=1e-9):
    """True when every eigenvalue lies in at least one disc."""
    p = as_transition(p)
    lam = spectrum(p)
    discs = ostrowski_discs(p, q)
    centers = np.array([d.center for d in discs])
    radii = np.array([d.radius for d in discs])
    inside = np.abs(lam[:, None] - centers[None, :]) <= radii[None, :] + slack
    return bool(np.all(inside.any(axis=1)))


def lb1_value(p_jj, lam, q):
    """``p_jj + |lam - p_jj|^(1/(1-q)) / (1 - p_jj)^(q/(1-q))``; ``q = 0`` gives ``p_jj + |lam - p_jj|``."""
    if q >= 1.0:
        raise ValueError("q = 1 makes the exponent 1/(1-q) diverge")
    dist = abs(lam - p_jj)
    if q == 0.0:
        return p_jj + dist
    return p_jj + dist ** (1.0 / (1.0 - q)) / (1.0 - p_jj) ** (q / (1.0 - q))


def lb1(p, q=0.5):
    """Audit the Ostrowski column-sum lower bound over every eligible (column, eigenvalue) pair."""
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must lie in [0, 1), got {q!r}")
    p = as_transition(p)
    cs = column_sums(p)
    diag = np.diag(p.p)
    recs = []
    for j, pairs in enumerate(ostrowski_eligible(p, q)):
        for _, lam in pairs:
            b = lb1_value(diag[j], lam, q)
            recs.append(BoundAuditRecord("lb1", j, True, float(b), float(cs[j]),
                                         bool(b > cs[j] + AUDIT_TOL), eigenvalue=lam, q=q))
    return ColumnBoundAudit("lb1", True, tuple(recs), q=q)


def lb2(p):
    """Audit ``|lambda|^2 <= C_j`` over the ``q = 1/2`` eligible pairs."""
    p = as_transition(p)
    cs = column_sums(p)
    recs = []
    for j, pairs in enumerate(ostrowski_eligible(p, 0.5)):
        for _, lam in pairs:
            b = abs(lam) ** 2
            recs.append(BoundAuditRecord("lb2", j, True, float(b), float(cs[j]),
                                         bool(b > cs[j] + AUDIT_TOL), eigenvalue=lam, q=0.5))
    return ColumnBoundAudit("lb2", True, tuple(recs), q=0.5)


# -- generators ------------------------------------------------------------------

def generate_chain(generator, n, rng):
    """Draw one chain.

    ``generator`` is ``{"kind": "dirichlet", "alpha": a}``,
    ``{"kind": "diagonally-dominant", "delta": d}`` (rows ``d e_i + (1-d) Dir(1)``)
    ``{"kind": "lazy", "beta": b}`` (``b I + (1-b) J/N``)
    or ``{"kind": "hub", "beta": b}`` (rows ``(1-b) e_0 + b Dir(1)``; column 0
    sums to at least ``N(1-b)`` for every power).
    """
    kind = generator["kind"]
    if kind == "dirichlet":
        a = float(generator.get("alpha", 1.0))
        p = rng.dirichlet(np.full(n, a), size=n)
    elif kind == "diagonally-dominant":
        delta = float(generator.get("delta", 0.6))
        p = delta * np.eye(n) + (1.0 - delta) * rng.dirichlet(np.ones(n), size=n)
    elif kind == "lazy":
        beta = float(generator.get("beta", 0.9))
        p = beta * np.eye(n) + (1.0 - beta) * np.full((n, n), 1.0 / n)
    elif kind == "hub":
        beta = float(generator.get("beta", 0.1))
        p = beta * rng.dirichlet(np.ones(n), size=n)
        p[:, 0] += 1.0 - beta
    else:
        raise ValueError(f"unknown chain generator {kind!r}")
    p = p / p.sum(axis=1, keepdims=True)
    return TransitionMatrix.from_array(p)


DEFAULT_GENERATORS = (
    {"kind": "dirichlet", "alpha": 1.0},
    {"kind": "diagonally-dominant", "delta": 0.6},
    {"kind": "lazy", "beta": 0.9},
)


@dataclass
class LemmaStats:
    cases: int = 0
    premise_cases: int = 0
    checks: int = 0
    violations: int = 0
    reproducers: list = field(default_factory=list)

    @property
    def premise_rate(self):
        return self.premise_cases / self.cases if self.cases else 0.0

    @property
    def violation_rate(self):
        return self.violations / self.checks if self.checks else 0.0

    def summary(self):
        return {
            "cases": self.cases,
            "premise_cases": self.premise_cases,
            "premise_rate": self.premise_rate,
            "checks": self.checks,
            "violations": self.violations,
            "violation_rate": self.violation_rate,
            "reproducers": len(self.reproducers),
        }


def falsification_harness(count, seed, generators=DEFAULT_GENERATORS, sizes=range(2, 9),
                          qs=(0.0, 0.25, 0.5, 0.75), ub2_q=0.5, max_reproducers=50):
    """Audit ub1/ub2/lb1/lb2 on ``count`` seeded chains.

    Case ``k`` uses generator ``k % len(generators)``, size drawn from
    ``sizes`` and randomness from the substream ``(seed, "chain", k)``.
    Violations are counted per (column) check among premise-satisfying
    cases; each violating case stores a reproducer.
    """
    sizes = list(sizes)
    stats = {name: LemmaStats() for name in ("ub1", "ub2", "lb1", "lb2")}
    for k in range(count):
        rng = substream(seed, "chain", k)
        gen = generators[k % len(generators)]
        n = int(sizes[int(rng.integers(len(sizes)))])
        p = generate_chain(gen, n, rng)
        repro = {"case": k, "seed": int(seed), "generator": dict(gen), "N": n, "matrix": p.p.tolist()}
        audits = [ub1(p), ub2(p, ub2_q)]
        if np.all(np.diag(p.p) < 1.0):
            audits += [lb1(p, q) for q in qs] + [lb2(p)]
        seen = set()
        for a in audits:
            st = stats[a.lemma]
            if a.lemma not in seen:
                st.cases += 1
                st.premise_cases += int(a.premise_satisfied)
                seen.add(a.lemma)
            if not a.premise_satisfied:
                continue
            st.checks += len(a.records)
            bad = a.violations
            st.violations += len(bad)
            if bad and len(st.reproducers) < max_reproducers:
                st.reproducers.append({**repro, "q": a.q, "records": [r.to_dict() for r in bad]})
    return stats
