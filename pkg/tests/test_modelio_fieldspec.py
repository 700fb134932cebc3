import json
import os

import numpy as np
import pytest

from leelab import fieldspec, modelio
from leelab.exterior import form_norm
from leelab.invariant import CoframeAlgebra, InvariantModel, inoue_sm, lee_form
from leelab.torus import ScalarField, TorusGrid, export_field_csv

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


# -- model files -------------------------------------------------------------


def test_fixture_file_parses_to_surface_model():
    model = modelio.load(os.path.join(FIXTURES, "inoue_sm.json"))
    assert isinstance(model, InvariantModel)
    reference = inoue_sm(1.0, 1.0)
    assert form_norm(lee_form(model) - lee_form(reference)) < 1e-12


def test_roundtrip_preserves_structure_and_metric():
    model = inoue_sm(1.2, 0.9, 0.3 + 0.1j, 1.7)
    text = modelio.dump_model(model)
    back = modelio.loads(text)
    assert form_norm(back.omega() - model.omega()) < 1e-14
    for a in range(4):
        assert form_norm(back.algebra.d_generator[a]
                         - model.algebra.d_generator[a]) < 1e-14
    assert back.metric.c == pytest.approx(1.7)


def test_barred_rows_autofilled_and_checked():
    doc = modelio.inoue_file_dict(1.0, 1.0)
    # explicit barred row consistent with conjugation: conj(-i e2^e4bar)
    # resorts to -i e2^e4bar again, so d(e_4) carries the same -i term
    doc["structure"].append(
        {"target": 4, "i": 2, "j": 4, "re": 0.0, "im": -1.0})
    model = modelio.loads(json.dumps(doc))
    assert isinstance(model, InvariantModel)
    # an inconsistent barred row must be rejected
    doc["structure"][-1]["im"] = 1.0
    with pytest.raises(modelio.ModelFileError):
        modelio.loads(json.dumps(doc))


def test_algebra_only_file():
    doc = {"n": 2, "structure": []}
    algebra = modelio.loads(json.dumps(doc))
    assert isinstance(algebra, CoframeAlgebra)


def test_schema_errors():
    for doc, code in [
        ([], "bad_schema"),
        ({"n": 1}, "bad_schema"),
        ({"n": 2, "structure": [{"target": 1, "i": 2, "j": 2}]}, "bad_schema"),
        ({"n": 2, "structure": [], "metric": {"h": [[1]]}}, "bad_schema"),
        ({"n": 2, "structure": [],
          "metric": {"h": [[[1, 0], [2, 0]], [[2, 0], [1, 0]]]}},
         "metric_not_positive"),
        ({"n": 2, "structure": [],
          "metric": {"family": "inoue_sm", "r": 1.0, "s": 1.0,
                     "u_re": 3.0, "u_im": 0.0}}, "metric_not_positive"),
    ]:
        with pytest.raises(modelio.ModelFileError) as err:
            modelio.loads(json.dumps(doc))
        assert err.value.code == code


def test_unimodularity_violation_code():
    # d(e_1) = e_1 ^ e_2 satisfies d^2 = 0 but leaks volume from a
    # (2n-1)-form, which the unimodularity proxy must catch
    doc = {"n": 2, "structure": [
        {"target": 1, "i": 1, "j": 2, "re": 1.0, "im": 0.0},
    ]}
    with pytest.raises(modelio.ModelFileError) as err:
        modelio.loads(json.dumps(doc))
    assert err.value.code in ("jacobi_violation", "unimodularity_violation")


# -- field specs -------------------------------------------------------------


@pytest.fixture
def grid():
    return TorusGrid(2, 8)


def test_parse_scalar_terms(grid):
    f = fieldspec.parse_scalar("0.3*cos(x1)", grid)
    assert np.max(np.abs(f.values - 0.3 * np.cos(grid.coordinate("x1")))) < 1e-15
    g = fieldspec.parse_scalar("cos(2*x1) - 0.5*sin(y2) + 1.5", grid)
    expect = (np.cos(2 * grid.coordinate("x1"))
              - 0.5 * np.sin(grid.coordinate("y2")) + 1.5)
    assert np.max(np.abs(g.values - expect)) < 1e-14
    assert np.max(np.abs(fieldspec.parse_scalar("0", grid).values)) == 0.0


def test_parse_drift_terms(grid):
    d = fieldspec.parse_drift("0.5*dx1", grid)
    assert np.max(np.abs(2.0 * d.coefficient((0,)).real - 0.5)) < 1e-15
    assert d.is_real()
    d2 = fieldspec.parse_drift("0.4*dx1 + 0.2*cos(x2)*dx1 - 0.1*dy2", grid)
    assert d2.is_real()
    dx1 = 2.0 * d2.coefficient((0,)).real
    assert np.max(np.abs(dx1 - (0.4 + 0.2 * np.cos(grid.coordinate("x2"))))) \
        < 1e-14
    zero = fieldspec.parse_drift("0", grid)
    assert zero.max_abs() == 0.0


def test_parse_errors(grid):
    for bad, drift in [
        ("0.5*dx1", False),       # basis element in a scalar
        ("0.5*cos(x1)", True),    # missing basis element
        ("cos(x9)", False),       # unknown coordinate
        ("tan(x1)", False),       # unknown function
        ("0.3**cos(x1)", False),  # malformed operator
        ("cos(x1", False),        # unbalanced paren
        ("0.5*dz1", True),        # unknown basis
    ]:
        with pytest.raises((fieldspec.FieldSpecError, ValueError)):
            if drift:
                fieldspec.parse_drift(bad, grid)
            else:
                fieldspec.parse_scalar(bad, grid)


def test_csv_roundtrip(tmp_path, grid):
    f = fieldspec.parse_scalar("0.3*cos(x1)+0.1*sin(y2)", grid)
    path = tmp_path / "f.csv"
    export_field_csv(f, path)
    back = fieldspec.load_field_csv(path, grid)
    assert np.max(np.abs(back.values - f.values)) < 1e-14
    via_spec = fieldspec.scalar_field_from_spec(str(path), grid)
    assert np.max(np.abs(via_spec.values - f.values)) < 1e-14


def test_spec_or_path_dispatch(grid):
    f = fieldspec.scalar_field_from_spec("0.2*cos(x1)", grid)
    assert isinstance(f, ScalarField)
