import pytest
from conftest import FIXTURE_NAMES, pq22, structure

from agsemi.cli import RunConfig, run_pipeline
from agsemi.connection import (
    UnsupportedSignature,
    classify,
    conformal,
    curvature,
    root_analysis,
    solve_connection,
    structure_residuals,
)
from agsemi.exterior import wedge
from agsemi.frobenius import specialize
from agsemi.symcore import constant
from agsemi.tensorops import component

P22 = [n for n in FIXTURE_NAMES if pq22(n)]


def test_connection_forms_sheared_row():
    s = structure("beta_f_u")
    conn = solve_connection(s)
    assert conn.form(1, 2) == s.w(1, 4).scale(s.scalar("f'(u)/2"))
    assert conn.form(2, 1).is_zero()
    assert conn.form(4, 3) == s.w(2, 3).scale(s.scalar("f'(u)/2"))
    assert conn.form(3, 4).is_zero()
    assert conn.form(1, 1) == s.w(2, 4).scale(s.scalar("f'(u)/4"))
    assert conn.form(2, 2) == -conn.form(1, 1)


def test_connection_forms_function_of_y():
    s = structure("alpha_p_y")
    conn = solve_connection(s)
    assert conn.form(1, 2) == s.w(1, 4).scale(s.scalar("-p'(y)/2"))
    assert conn.form(4, 3) == s.w(2, 3).scale(s.scalar("-p'(y)/2"))
    assert conn.form(1, 1) == s.w(2, 4).scale(s.scalar("-p'(y)/4"))


def test_flat_connection_vanishes():
    conn = solve_connection(structure("flat22"))
    same_kind = [(a, b) for a, b in conn.forms if (a <= 2) == (b <= 2)]
    assert len(same_kind) == 8
    assert all(conn.form(*k).is_zero() for k in same_kind)


def test_second_order_values():
    s = structure("beta_f_u")
    named = curvature(s).connection.second_order_named()
    assert named["C4"] == s.scalar("-f''(u)/4")
    assert named["E4"] == s.scalar("-f'(u)^2/4")
    assert all(v.is_zero() for k, v in named.items() if k not in ("C4", "E4"))

    t = structure("beta_f_u_g_y")
    named = curvature(t).connection.second_order_named()
    assert named["C4"] == t.scalar("-f''(u)/4")
    assert named["E4"] == t.scalar("f''(u)*g(y)/2 - f'(u)^2/4")


def test_second_order_symmetric():
    for name in P22:
        S = curvature(structure(name)).connection.second_order
        assert all((S[r][c] - S[c][r]).is_zero() for r in range(4) for c in range(4))


def test_curvature_forms_sheared_row():
    s = structure("beta_f_u")
    cd = curvature(s)
    k = s.scalar("f''(u)/4")
    w13, w23, w14, w24 = s.w(1, 3), s.w(2, 3), s.w(1, 4), s.w(2, 4)
    assert cd.curvature_form(3, 3) == wedge(w14, w24).scale(k)
    assert cd.curvature_form(4, 4) == -cd.curvature_form(3, 3)
    assert cd.curvature_form(4, 3) == (wedge(w13, w24) - wedge(w23, w14)).scale(k)
    for lo in (1, 2):
        for up in (1, 2):
            assert cd.curvature_form(lo, up).is_zero()
    assert component(cd.b1, cd.b2, "344^321") == -k


def test_curvature_rational_infinity_root():
    s = structure("alpha_rational_quadruple_inf")
    cd = curvature(s)
    assert cd.curvature_form(4, 3) == wedge(s.w(1, 4), s.w(2, 4)).scale(s.scalar("8*(x+u)/(y-v)^2"))
    others = [k for k in cd.omega if k != (4, 3)]
    assert all(cd.curvature_form(*k).is_zero() for k in others)


@pytest.mark.parametrize("name", P22)
def test_structure_equations_recheck(name):
    res = structure_residuals(curvature(structure(name)))
    assert all(not v for v in res.values()), res


def test_classification():
    cc = conformal(curvature(structure("beta_f_u")))
    c = classify(cc)
    assert c.kind == "BetaSemiintegrable"
    assert c.side_status("beta") == "Integrable"
    assert c.side_status("alpha") == "Conditional"
    s = structure("beta_f_u")
    assert c.flat_condition in (s.scalar("f''(u)"), -s.scalar("f''(u)"))
    assert "flat iff" in c.describe()
    assert classify(conformal(curvature(structure("flat22")))).kind == "Flat"
    assert classify(conformal(curvature(structure("rational_quadruple_zero")))).side_status("alpha") == "Obstructed"


def test_root_patterns():
    s = structure("beta_f_u")
    rep = root_analysis(conformal(curvature(s)), "alpha", s)
    assert sorted(rep.pattern()) == [("0", 1), ("inf", 3)]
    r = structure("rational_quadruple_zero")
    assert root_analysis(conformal(curvature(r)), "alpha", r).pattern() == [("0", 4)]
    t = structure("alpha_rational_quadruple_inf")
    assert root_analysis(conformal(curvature(t)), "alpha", t).pattern() == [("inf", 4)]


def test_root_of_triple_zero_structure():
    s = structure("rational_triple_zero")
    rep = root_analysis(conformal(curvature(s)), "alpha", s)
    by = {r.label(): r for r in rep.roots}
    assert by["0"].multiplicity == 3
    finite = [r for r in rep.roots if r.label() not in ("0", "inf")]
    assert len(finite) == 1 and finite[0].exact and finite[0].multiplicity == 1
    assert by["0"].flagged and not finite[0].flagged
    # the simple finite root closes; the triple root is checked too
    assert finite[0].frobenius == "Integrable"
    assert by["0"].frobenius is not None


def test_root_overrides():
    s = structure("rational_triple_zero")
    rep = root_analysis(conformal(curvature(s)), "alpha", overrides={"finite": True, "0": False})
    flags = {r.label() if r.label() in ("0", "inf") else "finite": r.flagged for r in rep.roots}
    assert flags == {"0": False, "finite": True}


def test_only_pq22_supported():
    with pytest.raises(UnsupportedSignature):
        solve_connection(structure("bol_exp_q3"))


def test_flat_specialization_of_sheared_row():
    s = structure("beta_f_u")
    flat = specialize(s, "f", [constant("b"), constant("a")], ["a", "b"])
    assert "f" not in flat.functions
    res = run_pipeline(flat, RunConfig())
    assert res.classification.kind == "Flat"
    assert res.verdicts["alpha"].kind == "Integrable"
    assert res.verdicts["beta"].kind == "Integrable"
    assert res.checks["cross_pipeline"]["ok"]
