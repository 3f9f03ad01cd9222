"""One function per CLI command: config in, ``Outcome`` (payload, tables, status) out.

Status is ``"ok"``, ``"premise-failure"`` or ``"consistency-failure"``.
"""

from dataclasses import dataclass, field

import numpy as np

from .audit import REPORT_COLUMNS, audit_suite, default_plan, report_rows
from .errors import PremiseViolation
from .functions import REGISTRY, function_from_config
from .manifold import build_graph, compare_spectra, manifold_from_config, predicted_transition_eigs, sample_net
from .maps import map_from_config, norm_from_config
from .markov import DEFAULT_GENERATORS, falsification_harness, generate_chain
from .mp import (ensemble_lemma_bounds, envelope_cases, envelope_constants, mp_double_bound,
                 random_ensemble, sandwich_slack)
from .rng import substream
from .tensors import TensorShape
from .walks import (WalkConfig, c_constants, expectation_norm, generate_field, marginal_lower_rhs,
                    marginal_upper_rhs)

SANDWICH_TOL = 1e-9


@dataclass
class Outcome:
    payload: dict
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    status: str = "ok"
    lines: list = field(default_factory=list)    # console summary


def run_mp_verify(cfg):
    seed = cfg["seed"]
    env_rows = []
    for name, c, d in envelope_cases(seed, cfg["envelope_intervals"]):
        g = REGISTRY[name]()
        env = envelope_constants(g, c, d)
        env_rows.append([name, c, d, env.slope, env.b_upper, env.b_lower,
                         sandwich_slack(g, env, cfg["envelope_points"])])
    env_min = min((r[-1] for r in env_rows), default=0.0)

    pairs = [(function_from_config(g), function_from_config(h), g, h) for g, h in cfg["pairs"]]
    c_r = cfg["c_r"]
    rows = []
    double_fail = lemma_fail = 0
    for k in range(cfg["ensembles"]):
        e = random_ensemble(seed, k, tuple(cfg["interval"]), cfg["max_steps"], cfg["max_side"])
        side = e.maps[0].output_shape.side
        for g, h, gname, hname in pairs:
            try:
                db = mp_double_bound(e, g, h)
            except PremiseViolation:
                rows.append([k, side, len(e.tensors), "double", str(gname), str(hname), "", "premise-failure", ""])
                continue
            for label, side_res in (("double-lower", db.lower_side), ("double-upper", db.upper_side)):
                if side_res is None:
                    continue
                ok = bool(side_res.holds)
                double_fail += not ok
                rows.append([k, side, len(e.tensors), label, str(gname), str(hname), "", ok, side_res.min_eigenvalue])
            for cr in c_r:
                lb = ensemble_lemma_bounds(e, g, h, cr)
                for label, chk in (("lemma-upper", lb.upper_check), ("lemma-lower", lb.lower_check)):
                    ok = bool(chk.holds)
                    lemma_fail += not ok
                    rows.append([k, side, len(e.tensors), label, str(gname), str(hname), cr, ok, chk.min_eigenvalue])
    payload = {
        "envelope": {"cases": len(env_rows), "min_slack": env_min},
        "double_bound_violations": double_fail,
        "lemma_violations": lemma_fail,
        "checks": len(rows),
    }
    status = "ok" if double_fail == 0 and lemma_fail == 0 and env_min >= -SANDWICH_TOL else "consistency-failure"
    return Outcome(payload, {
        "envelope": (["function", "c", "d", "slope", "b_upper", "b_lower", "min_slack"], env_rows),
        "checks": (["ensemble", "side", "terms", "check", "g", "h", "c_r", "holds", "min_eig_slack"], rows),
    }, status, [
        f"envelope cases: {len(env_rows)}, min slack {env_min:.3e}",
        f"ensemble checks: {len(rows)}, double-bound violations {double_fail}, lemma violations {lemma_fail}",
    ])


def run_markov_audit(cfg):
    lo, hi = cfg["sizes"]
    stats = falsification_harness(cfg["count"], cfg["seed"], DEFAULT_GENERATORS, range(lo, hi + 1),
                                  tuple(cfg["qs"]), cfg["ub2_q"], cfg["max_reproducers"])
    summary = {k: v.summary() for k, v in stats.items()}
    hard = sum(stats[k].violations for k in ("ub1", "lb1", "lb2"))
    payload = {
        "lemmas": summary,
        "classification": {"ub2": "finding" if stats["ub2"].violations else "no violations observed"},
        "reproducers": {k: v.reproducers for k, v in stats.items()},
    }
    rows = [[k, s["cases"], s["premise_cases"], s["premise_rate"], s["checks"], s["violations"], s["violation_rate"]]
            for k, s in summary.items()]
    lines = [f"{k}: premise {s['premise_cases']}/{s['cases']}, violations {s['violations']}/{s['checks']}"
             f" (rate {s['violation_rate']:.4f})" for k, s in summary.items()]
    return Outcome(payload, {"lemmas": (["lemma", "cases", "premise_cases", "premise_rate", "checks",
                                         "violations", "violation_rate"], rows)},
                   "ok" if hard == 0 else "consistency-failure", lines)


def _graph(cfg):
    m = manifold_from_config(cfg["manifold"])
    net = sample_net(m, cfg["N"], cfg["seed"])
    kappa = cfg["kappa"] if cfg["kappa"] is not None else cfg["kappa_factor"] * net.epsilon
    return m, build_graph(net, m, kappa)


def run_manifold_build(cfg):
    m, g = _graph(cfg)
    net = g.net
    rows = [[i, *map(float, pt), float(mu), float(dg)]
            for i, (pt, mu, dg) in enumerate(zip(net.points, net.measures, g.degrees))]
    coords = [f"x{k}" for k in range(net.points.shape[1])]
    payload = {"graph": g.to_json(), "epsilon": net.epsilon, "kappa": g.kappa, "edges": len(g.edges())}
    return Outcome(payload, {"vertices": (["vertex", *coords, "mu", "degree"], rows)}, "ok",
                   [f"{m.kind}: N={g.size}, epsilon={net.epsilon:.5g}, kappa={g.kappa:.5g}, edges={len(g.edges())}"])


def run_spectrum_compare(cfg):
    m, g = _graph(cfg)
    cmp = compare_spectra(g, m, cfg["i_max"])
    rows = []
    for mode in cmp.graph:
        for i, gv, a, e, ch in cmp.rows(mode):
            rows.append([mode, i, gv, a, e, e / a if a > 0 else float("nan"), ch])
    tp = predicted_transition_eigs(g)
    payload = {
        "tracking_mode": cmp.tracking_mode,
        "epsilon": cmp.epsilon,
        "kappa": cmp.kappa,
        "curvature": cmp.curvature,
        "analytic": cmp.analytic,
        "graph": cmp.graph,
        "c_hat": cmp.c_hat,
        "transition_prediction": {"degree_discrepancy": tp.degree_discrepancy,
                                  "exact_discrepancy": tp.exact_discrepancy},
    }
    lines = [f"tracking mode: {cmp.tracking_mode}"]
    lines += [f"  i={i}: graph {gv:.5f} vs analytic {a:.5f}" for i, gv, a, _, _ in cmp.rows()]
    return Outcome(payload, {"spectrum": (["mode", "index", "graph", "analytic", "abs_error", "rel_error",
                                           "c_hat"], rows)}, "ok", lines)


def walk_instance(cfg, k):
    """Chain, field and walk config of seeded instance ``k``."""
    seed = cfg["seed"]
    rng = substream(seed, "walk-instance", k)
    lo, hi = cfg["sizes"]
    n = int(rng.integers(lo, hi + 1))
    steps = int(rng.integers(1, cfg["max_steps"] + 1))
    p = generate_chain(DEFAULT_GENERATORS[k % len(DEFAULT_GENERATORS)], n, rng)
    shape = TensorShape(tuple(cfg["shape"]))
    inst_seed = int(rng.integers(2**62))
    field = generate_field(n, shape, tuple(cfg["interval"]), inst_seed)
    wcfg = WalkConfig(rng.dirichlet(np.full(steps, 2.0)),
                      psi=map_from_config(cfg["psi"], shape, rng),
                      g=function_from_config(cfg["g"]), h=function_from_config(cfg["h"]),
                      norm=norm_from_config(cfg["norm"]))
    return p, field, wcfg, inst_seed


def run_walk_experiment(cfg):
    rows = []
    sandwich_fail = mc_fail = 0
    for k in range(cfg["instances"]):
        p, field, wcfg, inst_seed = walk_instance(cfg, k)
        exact = expectation_norm(p, field, wcfg, "exact")
        mc = expectation_norm(p, field, wcfg, "mc", cfg["paths"], inst_seed)
        upper = marginal_upper_rhs(p, field, wcfg)
        c = c_constants(field, wcfg, "exhaustive")
        lower = marginal_lower_rhs(p, field, wcfg, c)
        slack = min(exact.mean - lower, upper - exact.mean)
        z = (mc.mean - exact.mean) / mc.stderr if mc.stderr > 0 else 0.0
        sandwich_fail += slack < -SANDWICH_TOL
        mc_fail += abs(z) > 3.0
        rows.append([k, p.n, wcfg.steps, lower, exact.mean, upper, slack, mc.mean, mc.stderr, z])
    payload = {"instances": len(rows), "sandwich_violations": sandwich_fail, "mc_beyond_3se": mc_fail,
               "min_slack": min((r[6] for r in rows), default=0.0)}
    status = "ok" if sandwich_fail == 0 and mc_fail == 0 else "consistency-failure"
    return Outcome(payload, {"expectations": (["instance", "N", "steps", "lower_rhs", "exact", "upper_rhs",
                                               "slack", "mc_mean", "mc_stderr", "z"], rows)}, status,
                   [f"instances {len(rows)}: sandwich violations {sandwich_fail}, MC beyond 3 s.e. {mc_fail}"])


def run_tail_audit(cfg, workers=1, cache_dir=None):
    plan = cfg["plan"] or default_plan(cfg["seed"], cfg["paths"])
    if cfg.get("modes"):
        plan = {**plan, "entries": [{**e, "modes": list(cfg["modes"])} for e in plan.get("entries", [])]}
    results, summary = audit_suite(plan, workers, cache_dir)
    payload = {"summary": summary, "results": results}
    lines = [f"{k}: premise {v['premise_satisfied']}/{v['instances']}, verdicts {v['verdicts']}"
             for k, v in summary["by_theorem"].items()]
    lines.append(f"unexplained failures: {summary['unexplained']}")
    status = "ok" if summary["unexplained"] == 0 else "consistency-failure"
    return Outcome(payload, {"reports": (list(REPORT_COLUMNS), list(report_rows(results)))}, status, lines)


RUNNERS = {
    "mp-verify": run_mp_verify,
    "markov-audit": run_markov_audit,
    "manifold-build": run_manifold_build,
    "spectrum-compare": run_spectrum_compare,
    "walk-experiment": run_walk_experiment,
    "tail-audit": run_tail_audit,
}
