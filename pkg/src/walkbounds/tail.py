"""Tail bounds for functions of weighted tensor sums along random walks.

Four bounds on ``P(||h(sum_i w_i Psi(f(v_i)))|| >= theta)``:

* ``upper-1``  Markov + MP + column sums bounded by ``N - |lambda_2(P^i)|``
* ``upper-2``  Markov + MP + the min-modulus column-sum bound
* ``lower-1``  reverse Markov + MP + Ostrowski column-sum lower bound
* ``lower-2``  reverse Markov + MP + ``|lambda|^2 <= C_j``

Each can be evaluated in ``graph-exact`` mode (true spectra of ``P``) or in
``manifold-derived`` mode (spectra predicted from the Laplace-Beltrami
eigenvalues and an approximation constant).
"""

from dataclasses import asdict, dataclass, field
import math

import numpy as np

from .errors import PremiseViolation
from .manifold import perturbation_scale
from .markov import as_transition, column_sums, matrix_power, ostrowski_eligible, spectrum, ub2
from .mp import alpha_constants, extremize, positivity_premises
from .walks import prepare

THEOREMS = ("upper-1", "upper-2", "lower-1", "lower-2")


@dataclass(frozen=True)
class NormCap:
    value: float
    method: str


def norm_cap(h, c, d, norm, side, method="spectral-interval", p=None, field=None, cfg=None):
    """Upper bound ``A`` on ``||h(S)||`` over all walk sums ``S``.

    ``spectral-interval``: ``S`` has spectrum in ``[c, d]``, so
    ``A = ||I_side|| * max_[c,d] |h|``.  ``exhaustive``: the largest realized
    value over every path (needs ``p``, ``field`` and ``cfg``).
    """
    if method == "spectral-interval":
        hi = extremize(h, c, d, "max").value
        lo = extremize(h, c, d, "min").value
        return NormCap(float(max(abs(hi), abs(lo)) * norm.dimension_factor(side)), method)
    if method == "exhaustive":
        from .walks import exact_distribution

        vals, _ = exact_distribution(p, field, cfg, "h-sum")
        return NormCap(float(vals.max()), method)
    raise ValueError(f"unknown norm-cap method {method!r}")


@dataclass(frozen=True, eq=False)
class SpectralConstants:
    """Spectral inputs of the four theorems.

    ``c1``  second Laplacian eigenvalue (estimate)
    ``c2``  per-index transition eigenvalue estimates, length N
    ``c3``  ``(steps, N)`` table: distance of the column's eigenvalue of ``P^i`` to ``[P^i]_jj``
    ``c4``  ``(steps, N)`` table: modulus of the column's eigenvalue of ``P^i``
    """

    c1: float
    c2: np.ndarray
    c3: np.ndarray
    c4: np.ndarray
    source: str
    degrees: np.ndarray = None
    lambda2_transition: float = math.nan


def manifold_constants(lam_m, c_hat, eps, kappa, curvature, degrees, p, steps):
    """Constants predicted from manifold eigenvalues ``lam_m`` (ascending, ``lam_m[0] = 0``).

    ``c_hat`` is a scalar approximation constant or one value per index.
    Each constant takes the min/max over the two perturbed eigenvalues
    ``lam +- c_hat * [(eps/kappa + K kappa^2) lam + kappa lam^1.5]``.
    """
    p = as_transition(p)
    n = p.n
    lam = np.asarray(lam_m, dtype=float)[:n]
    if lam.size < n:
        raise ValueError(f"need {n} manifold eigenvalues, got {lam.size}")
    if c_hat is None:
        raise ValueError("manifold-derived constants need an approximation constant")
    ch = np.broadcast_to(np.nan_to_num(np.asarray(c_hat, dtype=float), nan=0.0), lam.shape)
    err = ch * perturbation_scale(lam, eps, kappa, curvature)
    deg = np.asarray(degrees, dtype=float)
    hi, lo = lam + err, lam - err
    c1 = float(min(hi[1], lo[1])) if n > 1 else 0.0
    t_hi, t_lo = 1.0 - hi / deg, 1.0 - lo / deg
    c2 = np.maximum(t_hi, t_lo)
    c3 = np.empty((steps, n))
    c4 = np.empty((steps, n))
    for i in range(1, steps + 1):
        diag = np.diag(matrix_power(p, i).p)
        c3[i - 1] = np.minimum(np.abs(t_hi**i - diag), np.abs(t_lo**i - diag))
        c4[i - 1] = np.minimum(np.abs(t_hi**i), np.abs(t_lo**i))
    return SpectralConstants(c1, c2, c3, c4, "manifold-derived", deg)


def _eligible_choice(p_i, q, key):
    """Per column, the eligible eigenvalue of ``p_i`` maximizing ``key`` (nan if none)."""
    diag = np.diag(p_i.p)
    out = np.full(p_i.n, np.nan)
    for j, pairs in enumerate(ostrowski_eligible(p_i, q)):
        if pairs:
            out[j] = max(key(lam, diag[j]) for _, lam in pairs)
    return out


def graph_exact_constants(p, steps, q=0.5, laplacian_eigs=None):
    """Constants taken from the true spectrum of ``P`` and its powers.

    Column ``j`` of ``P^i`` is paired with the Ostrowski-eligible eigenvalue
    giving the largest (tightest) lemma bound; columns without one are nan.
    """
    p = as_transition(p)
    lam = spectrum(p)
    c3 = np.empty((steps, p.n))
    c4 = np.empty((steps, p.n))
    for i in range(1, steps + 1):
        p_i = matrix_power(p, i)
        if np.any(np.diag(p_i.p) >= 1.0):
            c3[i - 1] = c4[i - 1] = np.nan
            continue
        c3[i - 1] = _eligible_choice(p_i, q, lambda z, pjj: abs(z - pjj))
        c4[i - 1] = _eligible_choice(p_i, 0.5, lambda z, pjj: abs(z))
    c1 = math.nan
    if laplacian_eigs is not None and len(laplacian_eigs) > 1:
        c1 = float(np.sort(np.asarray(laplacian_eigs, dtype=float))[1])
    second = float(abs(lam[1])) if p.n > 1 else 0.0
    return SpectralConstants(c1, lam, c3, c4, "graph-exact", lambda2_transition=second)


@dataclass
class TailBoundReport:
    theorem: str
    mode: str
    theta: float
    premises: dict
    raw_bound: float
    bound: float
    variants: dict = field(default_factory=dict)
    p_hat: float = math.nan
    ci_low: float = math.nan
    ci_high: float = math.nan
    exact_probability: float = math.nan
    verdict: str = "not-evaluated"
    q: float = None
    source: str = ""

    @property
    def premises_ok(self):
        return all(self.premises.values())

    @property
    def consistent(self):
        if self.verdict in ("consistent", "vacuous"):
            return True
        if self.verdict in ("unexplained", "finding:lemma-ub2"):
            return False
        return None

    def to_dict(self):
        d = asdict(self)
        d["premises_ok"] = self.premises_ok
        return d


def _clamp(x):
    return float(min(max(x, 0.0), 1.0)) if math.isfinite(x) else (1.0 if x > 0 else 0.0)


@dataclass(frozen=True, eq=False)
class _Context:
    p: object
    n: int
    steps: int
    weights: np.ndarray
    gnorm: np.ndarray
    alpha_max: float
    alpha_min: float
    premises: dict
    side: int


def _context(p, field, cfg, theta):
    p = as_transition(p)
    prem = {"theta > 0": bool(theta > 0)}
    c, d = field.c, field.d
    tol = 1e-9 * (1.0 + max(abs(c), abs(d)))
    prem["field spectra within [c, d]"] = all(
        v.eigvalsh()[0] >= c - tol and v.eigvalsh()[-1] <= d + tol for v in field.values
    )
    a_max = a_min = math.nan
    if c < d:
        try:
            a_max, a_min, env = alpha_constants(cfg.g, cfg.h, c, d)
            prem["g convex on [c, d]"] = True
            prem.update(positivity_premises(env, cfg.h, c, d))
        except PremiseViolation as exc:
            prem["g convex on [c, d]"] = not any("convex" in m for m in exc.conditions)
            prem["h(s) > 0"] = not any("h(s)" in m for m in exc.conditions)
    else:
        prem["c < d"] = False
    prep = prepare(field, cfg)
    return _Context(p, p.n, cfg.steps, cfg.weights, prep.gnorm, a_max, a_min, prem, prep.out_shape.side)


def _gate(report):
    if not report.premises_ok:
        report.verdict = "premise-not-satisfied"
    return report


def _upper(ctx, theta, column_bound, name, mode, q=None, variants=None, source=""):
    num = float(np.sum(column_bound * ctx.weights[:, None] * ctx.gnorm[None, :]))
    raw = num / (ctx.n * theta * ctx.alpha_min) if theta > 0 and ctx.alpha_min > 0 else math.inf
    return TailBoundReport(name, mode, float(theta), dict(ctx.premises), raw, _clamp(raw),
                           variants or {}, q=q, source=source)


def thm_upper_1(p, field, cfg, theta, constants=None):
    """Markov-type bound using ``C_{P^i, j} <= N - |lambda_2(P)|^i``.

    Premise (checked per power): ``max_j C_{P^i, j} >= N - 1`` for ``i <= l``.
    ``constants`` switches to manifold-derived mode, where
    ``|lambda_2|^i`` becomes ``|(C_1 / sum_k w_{v,k})^i|``; both the
    min-degree and the vertex-2 readings of the degree are reported.
    """
    ctx = _context(p, field, cfg, theta)
    prem = ctx.premises
    n, steps = ctx.n, ctx.steps
    prem["max_j C_(P^i),j >= N - 1 for all i"] = all(
        column_sums(matrix_power(ctx.p, i)).max() >= n - 1 - 1e-12 for i in range(1, steps + 1)
    )
    powers = np.arange(1, steps + 1)
    variants = {}
    if constants is None or constants.source == "graph-exact":
        second = float(abs(spectrum(ctx.p)[1])) if n > 1 else 0.0
        cb = np.repeat((n - second**powers)[:, None], n, axis=1)
        mode, source = "graph-exact", "graph-exact"
    else:
        deg = np.asarray(constants.degrees, dtype=float)
        prem["spectral constants exact"] = False
        readings = {"min-degree": deg.min(), "vertex-2": deg[1] if n > 1 else deg[0]}
        cbs = {k: np.repeat((n - np.abs((constants.c1 / v) ** powers))[:, None], n, axis=1)
               for k, v in readings.items()}
        per_col = n - np.abs((constants.c1 / deg[None, :]) ** powers[:, None])
        cbs["per-column"] = per_col
        for k, v in cbs.items():
            r = _upper(ctx, theta, v, "upper-1", "manifold-derived")
            variants[k] = r.raw_bound
        cb = cbs["min-degree"]
        mode, source = "manifold-derived", constants.source
    report = _upper(ctx, theta, cb, "upper-1", mode, variants=variants, source=source)
    return _gate(report)


def thm_upper_2(p, field, cfg, theta, q=0.5, constants=None):
    """Markov-type bound through the min-modulus column-sum bound on each ``P^i``.

    Premise: ``2 [P^i]_jj - 1 > 0`` for all ``i <= l`` and all ``j``.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    ctx = _context(p, field, cfg, theta)
    prem = ctx.premises
    n, steps = ctx.n, ctx.steps
    diags = np.array([np.diag(matrix_power(ctx.p, i).p) for i in range(1, steps + 1)])
    base = 2.0 * diags - 1.0
    prem["2[P^i]_jj - 1 > 0 for all i, j"] = bool(np.all(base > 0))
    if constants is None or constants.source == "graph-exact":
        min_mod = np.array([np.min(np.abs(spectrum(ctx.p))) ** i for i in range(1, steps + 1)])
        mode, source = "graph-exact", "graph-exact"
    else:
        c2 = np.abs(np.asarray(constants.c2))
        min_mod = np.array([np.min(c2**i) for i in range(1, steps + 1)])
        prem["spectral constants exact"] = False
        mode, source = "manifold-derived", constants.source
    with np.errstate(invalid="ignore", divide="ignore"):
        cb = np.where(base > 0, (min_mod[:, None] / np.abs(base) ** q) ** (1.0 / (1.0 - q)), np.nan)
    report = _upper(ctx, theta, cb, "upper-2", mode, q=q, source=source)
    return _gate(report)


def _lower(ctx, theta, cap, c, column_est, name, mode, q=None, source="", exact_cs=None, index_est=None):
    prem = ctx.premises
    a_max = ctx.alpha_max
    cw = ctx.weights * np.asarray(c.values)
    with np.errstate(invalid="ignore"):
        s = float(np.sum(column_est * cw[:, None] * ctx.gnorm[None, :]))
    denom_n = ctx.n * (cap.value - theta) * a_max
    raw = (s - ctx.n * theta * a_max) / denom_n
    variants = {"as-printed": (s - theta * a_max) / denom_n}
    if exact_cs is not None:
        se = float(np.sum(exact_cs * cw[:, None] * ctx.gnorm[None, :]))
        variants["column-sums-exact"] = (se - ctx.n * theta * a_max) / denom_n
    if index_est is not None:
        si = float(np.sum(index_est * cw[:, None] * ctx.gnorm[None, :]))
        variants["eigen-index-j"] = (si - ctx.n * theta * a_max) / denom_n
    if not math.isfinite(raw):
        prem["column estimates available"] = False
        raw = math.nan
    return TailBoundReport(name, mode, float(theta), dict(prem), raw, _clamp(raw) if math.isfinite(raw) else math.nan,
                           variants, q=q, source=source)


def _lower_premises(ctx, field, cfg, theta, cap, c):
    prem = ctx.premises
    if theta >= cap.value:
        raise PremiseViolation(f"theta = {theta!r} must be below the norm cap A = {cap.value!r}")
    prem["diag(P^i) < 1 for all i"] = all(
        np.all(np.diag(matrix_power(ctx.p, i).p) < 1.0) for i in range(1, ctx.steps + 1)
    )
    prem["w_i > 0"] = bool(np.all(ctx.weights > 0))
    prem["c constants certified (exhaustive)"] = bool(c.certified)
    s = np.linspace(field.c, field.d, 2049)
    prem["g >= 0 on [c, d]"] = bool(np.all(cfg.g(s) >= 0))


def _index_eigs(ctx):
    # eigenvalue j of P^i (modulus-descending) paired with column j
    return np.array([spectrum(matrix_power(ctx.p, i)) for i in range(1, ctx.steps + 1)])


def _exact_power_sums(ctx):
    return np.array([column_sums(matrix_power(ctx.p, i)) for i in range(1, ctx.steps + 1)])


def thm_lower_1(p, field, cfg, theta, cap, c, q=0.5, constants=None):
    """Reverse-Markov bound with Ostrowski column-sum lower estimates.

    ``raw = (S / N - theta alpha_max) / ((A - theta) alpha_max)`` where
    ``S = sum_j sum_i est_ij w_i c_i ||Psi(g(f(v_j)))||`` and
    ``est_ij = [P^i]_jj + C3_ij^(1/(1-q)) / (1 - [P^i]_jj)^(q/(1-q))``.
    The literal printed normalization is kept as the ``as-printed`` variant.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    ctx = _context(p, field, cfg, theta)
    _lower_premises(ctx, field, cfg, theta, cap, c)
    if constants is None:
        constants = graph_exact_constants(ctx.p, ctx.steps, q)
    diags = np.array([np.diag(matrix_power(ctx.p, i).p) for i in range(1, ctx.steps + 1)])
    c3 = np.asarray(constants.c3, dtype=float)
    if constants.source == "graph-exact":
        ctx.premises["Ostrowski-eligible eigenvalue for every (i, j)"] = bool(np.all(np.isfinite(c3)))
        mode = "graph-exact"
    else:
        ctx.premises["spectral constants exact"] = False
        mode = "manifold-derived"
    with np.errstate(invalid="ignore", divide="ignore"):
        est = diags + c3 ** (1.0 / (1.0 - q)) / (1.0 - diags) ** (q / (1.0 - q))
    index_est = None
    if mode == "graph-exact":
        with np.errstate(invalid="ignore", divide="ignore"):
            index_est = diags + np.abs(_index_eigs(ctx) - diags) ** (1.0 / (1.0 - q)) / (1.0 - diags) ** (q / (1.0 - q))
    report = _lower(ctx, theta, cap, c, est, "lower-1", mode, q=q, source=constants.source,
                    exact_cs=_exact_power_sums(ctx), index_est=index_est)
    return _gate(report)


def thm_lower_2(p, field, cfg, theta, cap, c, constants=None):
    """Reverse-Markov bound with ``|lambda|^2`` column-sum lower estimates (``q = 1/2`` discs)."""
    ctx = _context(p, field, cfg, theta)
    _lower_premises(ctx, field, cfg, theta, cap, c)
    if constants is None:
        constants = graph_exact_constants(ctx.p, ctx.steps, 0.5)
    c4 = np.asarray(constants.c4, dtype=float)
    if constants.source == "graph-exact":
        ctx.premises["Ostrowski-eligible eigenvalue for every (i, j)"] = bool(np.all(np.isfinite(c4)))
        mode = "graph-exact"
    else:
        ctx.premises["spectral constants exact"] = False
        mode = "manifold-derived"
    index_est = np.abs(_index_eigs(ctx)) ** 2 if mode == "graph-exact" else None
    report = _lower(ctx, theta, cap, c, c4**2, "lower-2", mode, source=constants.source,
                    exact_cs=_exact_power_sums(ctx), index_est=index_est)
    return _gate(report)


def ub2_violated_on_powers(p, steps, q):
    """True when the min-modulus column-sum bound fails on some ``P^i``."""
    p = as_transition(p)
    for i in range(1, steps + 1):
        a = ub2(matrix_power(p, i), q)
        if a.premise_satisfied and a.violations:
            return True
    return False


def judge(report, tail, exact=None, ub2_finding=None):
    """Attach empirical evidence and set the verdict.

    Upper bounds must reach the Wilson lower endpoint, lower bounds must not
    exceed the Wilson upper endpoint.  Out-of-range raw values are vacuous.
    Upper-2 failures backed by a column-sum bound failure are classified as
    lemma findings.
    """
    report.p_hat, report.ci_low, report.ci_high = tail.p_hat, tail.low, tail.high
    if exact is not None:
        report.exact_probability = float(exact)
    if report.verdict == "premise-not-satisfied":
        return report
    upper = report.theorem.startswith("upper")
    raw = report.raw_bound
    if upper:
        if raw >= 1.0:
            report.verdict = "vacuous"
        elif raw >= tail.low:
            report.verdict = "consistent"
        elif report.theorem == "upper-2" and ub2_finding:
            report.verdict = "finding:lemma-ub2"
        else:
            report.verdict = "unexplained"
    else:
        if raw <= 0.0:
            report.verdict = "vacuous"
        elif raw <= tail.high:
            report.verdict = "consistent"
        else:
            report.verdict = "unexplained"
    return report


def default_theta_grid(h, c, d, cap, count=5):
    """Thresholds spread between ``min |h|`` and the norm cap."""
    lo = max(extremize(h, c, d, "min").value, 0.0)
    fr = np.linspace(0.1, 0.9, count)
    return [float(lo + (cap.value - lo) * t) for t in fr]


def bound_all(p, field, cfg, theta, cap, c, q=0.5, constants=None):
    """The four reports for one threshold (lower bounds skipped when ``theta >= A``)."""
    out = [thm_upper_1(p, field, cfg, theta, constants), thm_upper_2(p, field, cfg, theta, q, constants)]
    if theta < cap.value:
        lower_consts = constants if constants is not None and constants.source != "graph-exact" else None
        out.append(thm_lower_1(p, field, cfg, theta, cap, c, q, lower_consts))
        out.append(thm_lower_2(p, field, cfg, theta, cap, c, lower_consts))
    return out

