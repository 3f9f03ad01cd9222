"""Deterministic artifact writers: JSON and CSV with the config echo and version embedded."""

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def fmt(x):
    """17 significant digits, '.' decimal, no locale."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


def jsonable(obj):
    """Plain JSON types; non-finite floats become strings so output stays valid JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    if isinstance(obj, complex):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    return obj


def dumps(obj):
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, payload, config):
    doc = {"version": __version__, "config": config, "result": payload}
    Path(path).write_text(dumps(doc), encoding="utf-8")
    return Path(path)


def csv_text(header, rows, config):
    buf = io.StringIO()
    buf.write(f"# version: {__version__}\n")
    buf.write("# config: " + json.dumps(jsonable(config), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, config):
    Path(path).write_text(csv_text(header, rows, config), encoding="utf-8")
    return Path(path)
