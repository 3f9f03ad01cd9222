"""Batch evaluation of the tail-bound theorems over an experiment plan.

A plan is ``{"seed": s, "entries": [entry, ...]}``.  Each entry names a
chain source (synthetic generator, explicit matrix, or a manifold net), the
tensor field, the walk configuration, the threshold grid and the modes.
Entries are evaluated independently and merged in plan order, so the
summary is identical for any worker count.
"""

from concurrent.futures import ProcessPoolExecutor
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DisconnectedGraphError, PremiseViolation
from .functions import function_from_config
from .manifold import build_graph, compare_spectra, manifold_from_config, sample_net
from .maps import map_from_config, norm_from_config
from .markov import TransitionMatrix, generate_chain
from .report import jsonable
from .rng import substream
from .tail import (THEOREMS, bound_all, default_theta_grid, judge, manifold_constants, norm_cap,
                   ub2_violated_on_powers)
from .tensors import TensorShape
from .walks import (EXACT_LIMIT, WalkConfig, c_constants, exact_distribution, generate_field,
                    path_values, tail_from_values)

ENTRY_DEFAULTS = {
    "shape": [2],
    "interval": [1.0, 2.0],
    "g": "square",
    "h": "identity",
    "psi": {"kind": "identity"},
    "norm": {"kind": "spectral"},
    "steps": 3,
    "weights": None,
    "thetas": None,
    "paths": 100_000,
    "q": 0.5,
    "modes": ["graph-exact"],
}

REPORT_COLUMNS = ("entry", "theorem", "mode", "theta", "premises_ok", "raw_bound", "bound",
                  "p_hat", "ci_low", "ci_high", "exact_probability", "verdict")


def materialize(entry, index, plan_seed):
    out = {**ENTRY_DEFAULTS, **entry}
    out.setdefault("seed", int(plan_seed) * 1_000_003 + index)
    if out["weights"] is None:
        out["weights"] = [1.0 / out["steps"]] * out["steps"]
    out["steps"] = len(out["weights"])
    return out


def entry_key(entry):
    return hashlib.sha256(json.dumps(jsonable(entry), sort_keys=True).encode()).hexdigest()


def _source(entry):
    src = entry["source"]
    kind = src["kind"]
    seed = entry["seed"]
    if kind == "chain":
        return generate_chain(src["generator"], int(src["N"]), substream(seed, "chain")), None
    if kind == "matrix":
        return TransitionMatrix.from_array(np.asarray(src["matrix"], dtype=float)), None
    if kind == "manifold":
        m = manifold_from_config(src["manifold"])
        net = sample_net(m, int(src["N"]), seed)
        g = build_graph(net, m, src.get("kappa_factor", 3.0) * net.epsilon)
        return g.transition_matrix(), (g, m)
    raise ValueError(f"unknown source kind {kind!r}")


def evaluate_entry(entry):
    """All reports for one materialized entry (a plain dict, ready for JSON)."""
    seed = entry["seed"]
    try:
        p, graph = _source(entry)
    except DisconnectedGraphError as exc:
        return {"entry": entry, "error": str(exc), "reports": []}
    n = p.n
    shape = TensorShape(tuple(entry["shape"]))
    c, d = entry["interval"]
    field = generate_field(n, shape, (c, d), seed)
    cfg = WalkConfig(np.asarray(entry["weights"], dtype=float),
                     psi=map_from_config(entry["psi"], shape, substream(seed, "psi")),
                     g=function_from_config(entry["g"]), h=function_from_config(entry["h"]),
                     norm=norm_from_config(entry["norm"]))
    side = cfg.map_for(field).output_shape.side
    cap = norm_cap(cfg.h, c, d, cfg.norm, side)
    steps = cfg.steps
    try:
        cc = c_constants(field, cfg, "exhaustive" if n**steps <= EXACT_LIMIT else "sampled", seed=seed)
    except PremiseViolation as exc:
        return {"entry": entry, "error": str(exc), "reports": []}
    values = path_values(p, field, cfg, int(entry["paths"]), seed, "h-sum")
    exact = None
    if n ** (steps + 1) <= EXACT_LIMIT:
        exact = exact_distribution(p, field, cfg, "h-sum")
    thetas = entry["thetas"] or default_theta_grid(cfg.h, c, d, cap)
    q = float(entry["q"])
    finding = ub2_violated_on_powers(p, steps, q)

    consts = {"graph-exact": None}
    if "manifold-derived" in entry["modes"] and graph is not None:
        g, m = graph
        cmp = compare_spectra(g, m, n)
        consts["manifold-derived"] = manifold_constants(
            cmp.analytic, cmp.c_hat["plain"], cmp.epsilon, cmp.kappa, cmp.curvature, g.degrees, p, steps)

    reports = []
    for theta in thetas:
        tail = tail_from_values(values, theta)
        ex = None if exact is None else float(np.sum(exact[1][exact[0] >= theta]))
        for mode in entry["modes"]:
            if mode not in consts:
                continue
            for r in bound_all(p, field, cfg, theta, cap, cc, q, consts[mode]):
                reports.append(judge(r, tail, ex, finding).to_dict())
    return {"entry": entry, "norm_cap": cap.value, "c_certified": cc.certified,
            "c": cc.values.tolist(), "ub2_finding": finding, "reports": reports}


def _cached(path, key):
    if path is not None and path.exists():
        doc = json.loads(path.read_text(encoding="utf-8"))
        if doc.get("key") == key:
            return doc["result"]
    return None


def summarize(results):
    """Per (theorem, mode): instance counts, premise rate, verdict counts, failures with reproducers."""
    summary = {}
    failures = []
    for k, res in enumerate(results):
        for r in res["reports"]:
            key = f"{r['theorem']}/{r['mode']}"
            s = summary.setdefault(key, {"instances": 0, "premise_satisfied": 0, "verdicts": {}})
            s["instances"] += 1
            s["premise_satisfied"] += int(r["premises_ok"])
            s["verdicts"][r["verdict"]] = s["verdicts"].get(r["verdict"], 0) + 1
            if r["verdict"] in ("unexplained", "finding:lemma-ub2"):
                failures.append({"entry": k, "seed": res["entry"]["seed"], "theorem": r["theorem"],
                                 "mode": r["mode"], "theta": r["theta"], "verdict": r["verdict"],
                                 "raw_bound": r["raw_bound"], "p_hat": r["p_hat"],
                                 "ci_low": r["ci_low"], "ci_high": r["ci_high"],
                                 "source": res["entry"]["source"]})
    for s in summary.values():
        s["premise_rate"] = s["premise_satisfied"] / s["instances"] if s["instances"] else 0.0
        s["verdicts"] = dict(sorted(s["verdicts"].items()))
    return {
        "entries": len(results),
        "errors": [{"entry": k, "error": r["error"]} for k, r in enumerate(results) if "error" in r],
        "by_theorem": dict(sorted(summary.items())),
        "failures": failures,
        "unexplained": sum(f["verdict"] == "unexplained" for f in failures),
    }


def audit_suite(plan, workers=1, cache_dir=None):
    """Evaluate every plan entry; returns ``(results, summary)``.

    With ``cache_dir`` each entry is stored under its content hash and reused
    on rerun, so an interrupted audit resumes where it stopped.
    """
    seed = int(plan.get("seed", 0))
    entries = [materialize(e, k, seed) for k, e in enumerate(plan.get("entries", []))]
    cache = Path(cache_dir) if cache_dir is not None else None
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)
    paths = [cache / f"entry-{k:04d}.json" if cache else None for k in range(len(entries))]
    keys = [entry_key(e) for e in entries]
    results = [_cached(pth, key) for pth, key in zip(paths, keys)]
    todo = [k for k, r in enumerate(results) if r is None]
    if todo:
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                fresh = list(pool.map(evaluate_entry, [entries[k] for k in todo]))
        else:
            fresh = [evaluate_entry(entries[k]) for k in todo]
        for k, res in zip(todo, fresh):
            res = jsonable(res)
            results[k] = res
            if paths[k] is not None:
                paths[k].write_text(json.dumps({"key": keys[k], "result": res}, sort_keys=True), encoding="utf-8")
    results = [jsonable(r) for r in results]
    return results, summarize(results)


def report_rows(results):
    for k, res in enumerate(results):
        for r in res["reports"]:
            yield [k] + [r[c] for c in REPORT_COLUMNS[1:]]


def default_plan(seed=0, paths=100_000):
    """Desk-scale plan: synthetic chains and circle nets, N <= 8, l <= 4, five thresholds each."""
    gens = [
        {"kind": "dirichlet", "alpha": 1.0},
        {"kind": "diagonally-dominant", "delta": 0.8},
        {"kind": "lazy", "beta": 0.9},
        {"kind": "hub", "beta": 0.1},
    ]
    fg = [("square", "identity"), ("square", "square"), ("exp", "exp"), ("square", "sqrt"), ("cube", "identity")]
    shapes = [[2], [3], [2, 2]]
    rng = substream(seed, "plan")
    entries = []
    for k in range(32):
        n = 2 + k % 7
        steps = 1 + k % 4
        g, h = fg[k % len(fg)]
        w = rng.dirichlet(np.full(steps, 2.0)).tolist() if k % 2 else None
        entries.append({"source": {"kind": "chain", "generator": gens[k % len(gens)], "N": n},
                        "shape": shapes[k % len(shapes)], "g": g, "h": h, "steps": steps,
                        "weights": w, "paths": paths})
    for k in range(8):
        n = 4 + k % 5
        steps = 1 + (k + 1) % 4
        g, h = fg[k % len(fg)]
        entries.append({"source": {"kind": "manifold", "manifold": {"kind": "circle"}, "N": n},
                        "shape": shapes[k % len(shapes)], "g": g, "h": h, "steps": steps,
                        "paths": paths, "modes": ["graph-exact", "manifold-derived"]})
    return {"seed": int(seed), "entries": entries}


__all__ = ["THEOREMS", "audit_suite", "default_plan", "evaluate_entry", "summarize", "report_rows"]
