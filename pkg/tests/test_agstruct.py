import random
from fractions import Fraction

import pytest
from conftest import FIXTURE_NAMES, pq22, structure

from agsemi.agstruct import (
    DimensionMismatch,
    SingularCoframe,
    ValidationError,
    decomposable_vector,
    parse_structure,
    segre_metric,
    serialize_structure,
)
from agsemi.oracle import instantiate

FLAT = """\
[structure]
p = 2
q = 2
coordinates = x, y, u, v

[coframe]
w_1_3 = "dx"
w_2_3 = "dy"
w_1_4 = "du"
w_2_4 = "dv"
"""


def test_load_example():
    s = structure("beta_f_u")
    assert (s.p, s.q) == (2, 2)
    assert s.w(1, 3) == s.form("dx + f(u)*dy")
    assert s.functions == {"f": "u"}


def test_flat_is_valid():
    s = parse_structure(FLAT)
    assert s.w(2, 4) == s.form("dv")
    assert s.index == [(1, 3), (2, 3), (1, 4), (2, 4)]


def test_repeated_form_is_singular():
    with pytest.raises(SingularCoframe):
        parse_structure(FLAT.replace('w_2_3 = "dy"', 'w_2_3 = "dx"'))


def test_dependent_rows_are_singular():
    text = FLAT.replace('w_2_4 = "dv"', 'w_2_4 = "x*dx + du"')
    with pytest.raises(SingularCoframe):
        parse_structure(text)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        parse_structure(FLAT.replace("x, y, u, v", "x, y, u"))
    with pytest.raises(DimensionMismatch):
        parse_structure(FLAT.replace('w_2_4 = "dv"\n', ""))


def test_errors_carry_line_numbers():
    with pytest.raises(ValidationError) as exc:
        parse_structure(FLAT.replace('"du"', '"dz"'), source="bad.ag")
    assert exc.value.line == 9
    assert "bad.ag" in str(exc.value)
    with pytest.raises(ValidationError) as exc:
        parse_structure(FLAT.replace("w_1_4", "w_3_4"))
    assert exc.value.line == 9


def test_other_validation_errors():
    with pytest.raises(ValidationError):
        parse_structure(FLAT.replace("p = 2", "p = two"))
    with pytest.raises(ValidationError):
        parse_structure(FLAT.replace("x, y, u, v", "x, x, u, v"))
    with pytest.raises(ValidationError):
        parse_structure(FLAT + "\n[domain]\nzero = x\n")
    with pytest.raises(ValidationError):
        parse_structure("[coframe]\n")


def test_segre_metric_examples():
    s = structure("beta_f_u")
    g = segre_metric(s)
    assert g.coefficient("x", "v") == s.scalar("1")
    assert g.coefficient("y", "v") == s.scalar("f(u)")
    assert g.coefficient("y", "u") == s.scalar("-1")
    assert len(g.terms) == 3

    r = structure("rational_quadruple_zero")
    g = segre_metric(r)
    assert g.coefficient("x", "u") == r.scalar("2*(y+v)")
    assert g.coefficient("x", "v") == r.scalar("u-x")
    assert g.coefficient("y", "u") == r.scalar("-(u-x)")

    f = segre_metric(parse_structure(FLAT))
    assert {k: str(v) for k, v in f.terms.items()} == {
        k: str(v) for k, v in segre_metric(structure("flat22")).terms.items()}
    assert f.coefficient("x", "v") == s.scalar("1") and f.coefficient("y", "u") == s.scalar("-1")


def test_segre_metric_needs_pq22():
    with pytest.raises(ValueError):
        segre_metric(structure("bol_exp_q3"))


@pytest.mark.parametrize("name", [n for n in FIXTURE_NAMES if pq22(n)])
def test_rank_one_vectors_are_null(name):
    s = structure(name)
    g = segre_metric(s)
    rng = random.Random(7)
    for k in range(20):
        inst = instantiate(s.coordinates, s.constraints, seed=k, constants=s.constants)
        t = [Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(2)]
        sv = [Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(2)]
        z = [float(inst.evaluate(c)) for c in decomposable_vector(s, t, sv)]
        M = [[float(inst.evaluate(c)) for c in row] for row in g.matrix()]
        val = sum(M[a][b] * z[a] * z[b] for a in range(4) for b in range(4))
        scale = sum(abs(M[a][b] * z[a] * z[b]) for a in range(4) for b in range(4))
        assert abs(val) <= 1e-9 * max(1.0, scale)


@pytest.mark.parametrize("name", [n for n in FIXTURE_NAMES if pq22(n)])
def test_metric_has_split_signature(name):
    import numpy as np

    s = structure(name)
    g = segre_metric(s)
    inst = instantiate(s.coordinates, s.constraints, seed=1, constants=s.constants)
    M = np.array([[float(inst.evaluate(c)) for c in row] for row in g.matrix()])
    ev = np.linalg.eigvalsh(M)
    assert (ev > 0).sum() == 2 and (ev < 0).sum() == 2


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_serialize_round_trip(name):
    s = structure(name)
    t = parse_structure(serialize_structure(s))
    assert (t.p, t.q, t.coordinates, t.functions, t.constants) == (s.p, s.q, s.coordinates, s.functions, s.constants)
    assert all(t.coframe[k] == v for k, v in s.coframe.items())
    assert [str(c) for c in t.constraints] == [str(c) for c in s.constraints]
    assert serialize_structure(t) == serialize_structure(s)
