"""Mini-grammar for trig-polynomial fields and coordinate drift forms.

Scalar expressions::

    expr   := term (('+' | '-') term)*
    term   := number ['*' factor] | factor
    factor := ('cos' | 'sin') '(' [int '*'] coord ')'
    coord  := ('x' | 'y') digits

Examples: ``"0"``, ``"0.3*cos(x1)"``, ``"cos(2*x1) - 0.5*sin(y2)"``.

Drift (1-form) expressions append a coordinate basis element to each
term::

    dterm := [term '*'] basis
    basis := ('dx' | 'dy') digits

Examples: ``"0.5*dx1"``, ``"0.4*dx1 + 0.2*cos(x2)*dx1"``.

Alternatively a scalar field spec may be the path of a CSV snapshot
written by :func:`leelab.torus.export_field_csv`.
"""

from __future__ import annotations

import os
import re

import numpy as np

from .torus import FieldForm, ScalarField, TorusGrid

__all__ = ["FieldSpecError", "parse_scalar", "parse_drift", "load_field_csv",
           "scalar_field_from_spec"]

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
                    r"|\d+(?:[eE][+-]?\d+)?)|(?P<name>[a-zA-Z]+\d*)"
                    r"|(?P<sym>[+\-*()]))")


class FieldSpecError(ValueError):
    """Malformed field specification."""


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FieldSpecError(f"cannot tokenize {text[pos:]!r}")
        if m.group("num") is not None:
            out.append(("num", float(m.group("num"))))
        elif m.group("name") is not None:
            out.append(("name", m.group("name")))
        else:
            out.append(("sym", m.group("sym")))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok is None:
            raise FieldSpecError("unexpected end of expression")
        if kind is not None and tok[0] != kind:
            raise FieldSpecError(f"expected {kind}, got {tok[1]!r}")
        if value is not None and tok[1] != value:
            raise FieldSpecError(f"expected {value!r}, got {tok[1]!r}")
        self.pos += 1
        return tok

    def done(self):
        return self.pos >= len(self.tokens)


def _parse_trig(parser: _Parser, grid: TorusGrid):
    fn = parser.take("name")[1]
    if fn not in ("cos", "sin"):
        raise FieldSpecError(f"unknown function {fn!r}")
    parser.take("sym", "(")
    tok = parser.peek()
    freq = 1
    if tok and tok[0] == "num":
        freq = parser.take("num")[1]
        if freq != int(freq) or freq < 1:
            raise FieldSpecError("frequency must be a positive integer")
        freq = int(freq)
        parser.take("sym", "*")
    coord_name = parser.take("name")[1]
    parser.take("sym", ")")
    coord = grid.coordinate(coord_name)
    return np.cos(freq * coord) if fn == "cos" else np.sin(freq * coord)


def _parse_term(parser: _Parser, grid: TorusGrid, drift: bool):
    """One term: coefficient, optional trig factor, optional basis element."""
    coeff = 1.0
    trig = None
    basis = None
    tok = parser.peek()
    if tok and tok[0] == "num":
        coeff = parser.take("num")[1]
        if parser.peek() == ("sym", "*"):
            parser.take("sym", "*")
        else:
            if drift and coeff != 0.0:
                raise FieldSpecError("drift terms must end in a basis element")
            # a bare zero denotes the zero drift
            return coeff, None, None if not drift else "zero"
    while True:
        tok = parser.peek()
        if tok is None or tok[0] != "name":
            break
        name = tok[1]
        if name in ("cos", "sin"):
            if trig is not None:
                raise FieldSpecError("at most one trig factor per term")
            trig = _parse_trig(parser, grid)
        elif name[:2] in ("dx", "dy"):
            parser.take("name")
            basis = name
            break
        else:
            raise FieldSpecError(f"unexpected name {name!r}")
        if parser.peek() == ("sym", "*"):
            parser.take("sym", "*")
        else:
            break
    if drift and basis is None:
        raise FieldSpecError("drift terms must end in dx<i> or dy<i>")
    if not drift and basis is not None:
        raise FieldSpecError("scalar expressions cannot contain basis elements")
    if trig is None and basis is None and parser.peek() is not None \
            and parser.peek()[0] == "name":
        raise FieldSpecError("malformed term")
    return coeff, trig, basis


def _parse_sum(text: str, grid: TorusGrid, drift: bool):
    parser = _Parser(text)
    terms = []
    sign = 1.0
    tok = parser.peek()
    if tok == ("sym", "-"):
        parser.take()
        sign = -1.0
    while True:
        coeff, trig, basis = _parse_term(parser, grid, drift)
        terms.append((sign * coeff, trig, basis))
        if parser.done():
            break
        op = parser.take("sym")[1]
        if op == "+":
            sign = 1.0
        elif op == "-":
            sign = -1.0
        else:
            raise FieldSpecError(f"unexpected {op!r} between terms")
    return terms


def parse_scalar(text: str, grid: TorusGrid) -> ScalarField:
    """Evaluate a scalar trig-polynomial expression on the grid."""
    vals = np.zeros(grid.shape)
    for coeff, trig, _ in _parse_sum(text, grid, drift=False):
        vals = vals + coeff * (trig if trig is not None else 1.0)
    return ScalarField(grid, vals)


def parse_drift(text: str, grid: TorusGrid) -> FieldForm:
    """Evaluate a drift expression as a real 1-form on the grid."""
    n = grid.n
    coeffs: dict = {}

    def add(idx, arr):
        coeffs[idx] = coeffs.get(idx, 0) + arr

    for coeff, trig, basis in _parse_sum(text, grid, drift=True):
        if basis == "zero":
            continue
        field = coeff * (trig if trig is not None else np.ones(grid.shape))
        axis = int(basis[2:]) - 1
        if not 0 <= axis < n:
            raise FieldSpecError(f"basis element {basis!r} out of range")
        if basis.startswith("dx"):
            add((axis,), field / 2.0)
            add((n + axis,), field / 2.0)
        else:
            add((axis,), field / 2j)
            add((n + axis,), -field / 2j)
    return FieldForm(grid, 1, coeffs)


def load_field_csv(path, grid: TorusGrid) -> ScalarField:
    """Read a field snapshot written by export_field_csv."""
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim != 2 or data.shape[1] != grid.dim + 1:
        raise FieldSpecError(f"CSV at {path} does not match the grid layout")
    vals = np.zeros(grid.shape)
    idx = data[:, :grid.dim].astype(int)
    vals[tuple(idx.T)] = data[:, grid.dim]
    return ScalarField(grid, vals)


def scalar_field_from_spec(spec: str, grid: TorusGrid) -> ScalarField:
    """Either a trig expression or the path of a CSV snapshot."""
    if os.path.exists(spec):
        return load_field_csv(spec, grid)
    return parse_scalar(spec, grid)
