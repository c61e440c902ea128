"""JSON / CSV readers and writers for forms, potentials, matrices and reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import InputError
from .forms import FormSpec
from .perturbation import SignedPotential

__all__ = [
    "load_form",
    "load_kappa",
    "load_matrix_csv",
    "matrix_payload",
    "to_jsonable",
    "dumps_report",
]

_FORM_KEYS = {"vertices", "edges", "kill", "m", "boundary", "mu"}


def _read_json(source):
    if not isinstance(source, (str, Path)):
        return source  # already parsed
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror}", str(path)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from exc


def _number(value, path, minimum=None, strict=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"expected a number, got {type(value).__name__}", path)
    value = float(value)
    if not math.isfinite(value):
        raise InputError("must be finite", path)
    if minimum is not None and (value <= minimum if strict else value < minimum):
        raise InputError(f"must be {'>' if strict else '>='} {minimum}, got {value}", path)
    return value


def _id_lookup(vertices):
    """Map JSON object keys (always strings) back to vertex ids."""
    return {str(v): v for v in vertices}


def _vertex_dict(data, key, lookup, allowed, minimum, strict):
    raw = data.get(key, {})
    if not isinstance(raw, dict):
        raise InputError("expected an object keyed by vertex id", key)
    out = {}
    for k, v in raw.items():
        if k not in lookup or lookup[k] not in allowed:
            raise InputError(f"unknown vertex {k!r}", f"{key}.{k}")
        out[lookup[k]] = _number(v, f"{key}.{k}", minimum, strict)
    return out


def load_form(source) -> FormSpec:
    """Read and validate a form-spec JSON document (path or already-parsed dict).

    The first violated invariant is reported with its field path.
    """
    data = _read_json(source)
    if not isinstance(data, dict):
        raise InputError("top level must be an object", "$")
    extra = set(data) - _FORM_KEYS
    if extra:
        raise InputError(f"unexpected field {sorted(extra)[0]!r}", "$")
    for key in ("vertices", "edges", "boundary"):
        if key not in data:
            raise InputError("missing required field", key)
    vertices = data["vertices"]
    if not isinstance(vertices, list) or not vertices:
        raise InputError("expected a nonempty list", "vertices")
    for p, v in enumerate(vertices):
        if not isinstance(v, (str, int)) or isinstance(v, bool):
            raise InputError("vertex ids must be strings or integers", f"vertices[{p}]")
    if len(set(map(str, vertices))) != len(vertices):
        raise InputError("duplicate vertex ids", "vertices")
    lookup = _id_lookup(vertices)
    vset = set(vertices)

    edges = data["edges"]
    if not isinstance(edges, list):
        raise InputError("expected a list", "edges")
    triples = []
    for p, e in enumerate(edges):
        if not isinstance(e, dict):
            raise InputError("expected an object with keys i, j, w", f"edges[{p}]")
        for key in ("i", "j", "w"):
            if key not in e:
                raise InputError("missing required field", f"edges[{p}].{key}")
        i, j = e["i"], e["j"]
        if i not in vset:
            raise InputError(f"unknown vertex {i!r}", f"edges[{p}].i")
        if j not in vset:
            raise InputError(f"unknown vertex {j!r}", f"edges[{p}].j")
        if i == j:
            raise InputError("self-loops are not allowed", f"edges[{p}]")
        triples.append((i, j, _number(e["w"], f"edges[{p}].w", 0.0)))

    boundary = data["boundary"]
    if not isinstance(boundary, list) or not boundary:
        raise InputError("expected a nonempty list", "boundary")
    for p, b in enumerate(boundary):
        if b not in vset:
            raise InputError(f"unknown vertex {b!r}", f"boundary[{p}]")
    if len(set(boundary)) != len(boundary):
        raise InputError("duplicate boundary ids", "boundary")

    kill = _vertex_dict(data, "kill", lookup, vset, 0.0, False)
    m = _vertex_dict(data, "m", lookup, vset, 0.0, True)
    mu = _vertex_dict(data, "mu", lookup, set(boundary), 0.0, True)
    return FormSpec.from_edges(vertices, triples, boundary, kill=kill, m=m, mu=mu)


def load_kappa(source, form: FormSpec) -> SignedPotential:
    """Read ``{"plus": {id: val}, "minus": {id: val}}``."""
    data = _read_json(source)
    if not isinstance(data, dict):
        raise InputError("top level must be an object", "$")
    extra = set(data) - {"plus", "minus"}
    if extra:
        raise InputError(f"unexpected field {sorted(extra)[0]!r}", "$")
    lookup = _id_lookup(form.vertices)
    vset = set(form.vertices)
    plus = _vertex_dict(data, "plus", lookup, vset, 0.0, False)
    minus = _vertex_dict(data, "minus", lookup, vset, 0.0, False)
    for v in plus:
        if plus[v] > 0 and minus.get(v, 0.0) > 0:
            raise InputError("plus and minus parts must have disjoint supports", f"minus.{v}")
    return SignedPotential.from_dicts(form, plus, minus)


def load_matrix_csv(path):
    """Read a square matrix written by :func:`dnlab.trace.to_csv`; returns ``(ids, M)``."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror}", str(path)) from exc
    if not rows or len(rows[0]) < 2:
        raise InputError("expected a header row of ids", str(path))
    ids = rows[0][1:]
    body = rows[1:]
    if len(body) != len(ids):
        raise InputError(f"expected {len(ids)} data rows, got {len(body)}", str(path))
    M = np.empty((len(ids), len(ids)))
    for r, row in enumerate(body):
        if len(row) != len(ids) + 1:
            raise InputError(f"expected {len(ids) + 1} columns", f"{path}:row {r + 2}")
        for c, cell in enumerate(row[1:]):
            try:
                M[r, c] = float(cell)
            except ValueError:
                raise InputError(f"not a number: {cell!r}", f"{path}:row {r + 2}") from None
    return ids, M


def matrix_payload(M, ids, row_ids=None) -> dict:
    """Row-major matrix with id headers."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return {
        "columns": list(ids),
        "rows": list(ids if row_ids is None else row_ids),
        "data": M.tolist(),
    }


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n"
