"""JSON file format for coframe algebras and invariant metrics.

A model file is a JSON document:

    {
      "n": 2,
      "structure": [
        {"target": 1, "i": 1, "j": 2, "re": 0.0, "im": -0.5},
        ...
      ],
      "metric": {"h": [[[1.0, 0.0], [0.0, 0.0]],
                       [[0.0, 0.0], [1.0, 0.0]]]}
             or {"family": "inoue_sm", "r": 1.0, "s": 1.0,
                 "u_re": 0.0, "u_im": 0.0},
      "volume_constant": 1.0
    }

Each structure row adds ``(re + i im) * e_i ^ e_j`` (with ``i < j``) to the
derivative of generator ``target``; generators are numbered 1..2n with the
barred half starting at n+1.  Rows for barred targets may be omitted, in
which case they are filled in by conjugation; when present they must agree
with the conjugates of the unbarred rows.  A direct metric gives the n x n
Hermitian matrix ``h`` as [re, im] pairs.  Files without a "metric" key
parse to a bare algebra.

Parsing enforces the algebra invariants (closure of d under conjugation,
d o d = 0, the unimodularity proxy) and metric positivity; violations
raise :class:`ModelFileError` with a machine-readable code.
"""

from __future__ import annotations

import json

import numpy as np

from .exterior import Form, InvariantMetric, zero_form
from .invariant import (
    CoframeAlgebra,
    InvariantModel,
    JacobiError,
    UnimodularityError,
    inoue_sm,
)

__all__ = ["ModelFileError", "load", "loads", "dump_model", "inoue_file_dict"]


class ModelFileError(ValueError):
    """Invalid model file; ``code`` is machine readable."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _complex_pair(value, where):
    try:
        re, im = value
        return complex(float(re), float(im))
    except (TypeError, ValueError) as exc:
        raise ModelFileError("bad_schema", f"expected [re, im] at {where}") from exc


def loads(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError("bad_schema", f"not valid JSON: {exc}") from exc
    return _parse(doc)


def load(path):
    with open(path, "r", encoding="utf-8") as fh:
        return _parse_checked(json.load(fh))


def _parse_checked(doc):
    try:
        return _parse(doc)
    except ModelFileError:
        raise
    except (JacobiError, UnimodularityError, ValueError):
        raise


def _parse(doc):
    if not isinstance(doc, dict):
        raise ModelFileError("bad_schema", "top level must be an object")
    try:
        n = int(doc["n"])
    except (KeyError, TypeError, ValueError):
        raise ModelFileError("bad_schema", "missing or invalid 'n'")
    if n < 2:
        raise ModelFileError("bad_schema", "need n >= 2")

    rows = doc.get("structure", [])
    unbarred = [zero_form(n, 2) for _ in range(n)]
    barred: dict = {}
    for pos, row in enumerate(rows):
        where = f"structure[{pos}]"
        try:
            target = int(row["target"])
            i, j = int(row["i"]), int(row["j"])
            coeff = complex(float(row.get("re", 0.0)), float(row.get("im", 0.0)))
        except (KeyError, TypeError, ValueError):
            raise ModelFileError("bad_schema", f"malformed row at {where}")
        if not (1 <= target <= 2 * n and 1 <= i <= 2 * n and 1 <= j <= 2 * n):
            raise ModelFileError("bad_schema",
                                 f"generator index out of range at {where}")
        if i >= j:
            raise ModelFileError("bad_schema", f"need i < j at {where}")
        term = Form(n, 2, {(i - 1, j - 1): coeff})
        if target <= n:
            unbarred[target - 1] = unbarred[target - 1] + term
        else:
            barred[target - n - 1] = barred.get(target - n - 1,
                                                zero_form(n, 2)) + term

    d_gen = list(unbarred) + [barred.get(a) for a in range(n)]
    try:
        algebra = CoframeAlgebra(n, d_gen)
    except JacobiError as exc:
        raise ModelFileError("jacobi_violation", str(exc)) from exc
    except UnimodularityError as exc:
        raise ModelFileError("unimodularity_violation", str(exc)) from exc
    except ValueError as exc:
        raise ModelFileError("bad_schema", str(exc)) from exc

    if "metric" not in doc:
        return algebra
    spec = doc["metric"]
    c = float(doc.get("volume_constant", 1.0))
    if not isinstance(spec, dict):
        raise ModelFileError("bad_schema", "'metric' must be an object")
    if "family" in spec:
        if spec["family"] != "inoue_sm":
            raise ModelFileError("bad_schema",
                                 f"unknown metric family {spec['family']!r}")
        if n != 2:
            raise ModelFileError("bad_schema", "inoue_sm metric needs n = 2")
        try:
            model = inoue_sm(float(spec["r"]), float(spec["s"]),
                             complex(float(spec.get("u_re", 0.0)),
                                     float(spec.get("u_im", 0.0))), c)
        except (KeyError, TypeError) as exc:
            raise ModelFileError("bad_schema", "malformed family metric") from exc
        except ValueError as exc:
            raise ModelFileError("metric_not_positive", str(exc)) from exc
        # the family algebra is fixed; keep the file's algebra authoritative
        return InvariantModel(algebra, model.metric)
    if "h" not in spec:
        raise ModelFileError("bad_schema", "metric needs 'h' or 'family'")
    rows = spec["h"]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ModelFileError("bad_schema", f"'h' must be {n}x{n}")
    h = np.array([[_complex_pair(rows[a][b], f"h[{a}][{b}]")
                   for b in range(n)] for a in range(n)])
    try:
        metric = InvariantMetric(n, h, c)
    except ValueError as exc:
        raise ModelFileError("metric_not_positive", str(exc)) from exc
    return InvariantModel(algebra, metric)


def _structure_rows(algebra: CoframeAlgebra):
    rows = []
    for target in range(algebra.n):
        form = algebra.d_generator[target]
        for (i, j), coeff in sorted(form.coeffs.items()):
            rows.append({"target": target + 1, "i": i + 1, "j": j + 1,
                         "re": coeff.real, "im": coeff.imag})
    return rows


def dump_model(model, path=None):
    """Serialize a model (or bare algebra) to the file format."""
    if isinstance(model, InvariantModel):
        algebra, metric = model.algebra, model.metric
    else:
        algebra, metric = model, None
    doc = {"n": algebra.n, "structure": _structure_rows(algebra)}
    if metric is not None:
        doc["metric"] = {"h": [[[metric.h[a, b].real, metric.h[a, b].imag]
                                for b in range(metric.n)]
                               for a in range(metric.n)]}
        doc["volume_constant"] = metric.c
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


def inoue_file_dict(r: float, s: float, u: complex = 0.0, c: float = 1.0):
    """The stock surface model as a file document (ships as a fixture)."""
    return {
        "n": 2,
        "structure": [
            {"target": 1, "i": 1, "j": 2, "re": 0.0, "im": -0.5},
            {"target": 1, "i": 1, "j": 4, "re": 0.0, "im": 0.5},
            {"target": 2, "i": 2, "j": 4, "re": 0.0, "im": -1.0},
        ],
        "metric": {"family": "inoue_sm", "r": r, "s": s,
                   "u_re": complex(u).real, "u_im": complex(u).imag},
        "volume_constant": c,
    }
