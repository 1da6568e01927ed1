import pytest
from conftest import FAMILIES, FIXTURE_NAMES, structure

from agsemi.agstruct import parse_structure, serialize_structure
from agsemi.cli import same_zero_set
from agsemi.exterior import DiffForm, parse_form, wedge
from agsemi.frobenius import (
    InconsistentFamily,
    PfaffianSystem,
    build_system,
    closure_residuals,
    fixed_system,
    load_family,
    param_names,
    parse_family,
    prolong_and_test,
    restrict_to_locus,
    same_span,
    solve_locus,
    verify_solution,
)
from agsemi.symcore import coordinate


def verdict(name, side, pivot=None):
    return prolong_and_test(build_system(structure(name), side, pivot))


def ext_form(s, text, params):
    return parse_form(text, list(s.coordinates) + params, s.functions, s.constants)


def test_alpha_system_of_sheared_row():
    s = structure("beta_f_u")
    sys = build_system(s, "alpha")
    assert sys.params == ["lam"] and sys.pivot == 3
    want = [ext_form(s, "lam*(dx + f(u)*dy) + du", ["lam"]), ext_form(s, "lam*dy + dv", ["lam"])]
    assert sys.forms == want
    assert sys.independence == wedge(s.w(1, 3), s.w(2, 3))


def test_prolongation_solves_parameter_differential():
    s = structure("beta_f_u")
    v = verdict("beta_f_u", "beta")
    assert v.kind == "Integrable"
    # d mu = -f'(u) du, written on the independent differentials (du = -mu dv)
    assert v.system.independent == ["y", "v"]
    assert v.solved["mu"] == ext_form(s, "mu*f'(u)*dv", ["mu"])
    a = verdict("beta_f_u", "alpha")
    assert a.kind == "Conditional"
    assert same_zero_set(a.obstruction, s.scalar("f''(u)"))


def test_obstructed_alpha_side():
    v = verdict("rational_quadruple_zero", "alpha")
    assert v.kind == "Obstructed"
    assert v.obstruction is not None


def test_param_names():
    assert param_names(structure("beta_f_u"), "alpha") == ["lam"]
    assert param_names(structure("bol_exp_q3"), "alpha") == ["lam1", "lam2"]
    assert param_names(structure("p3_beta_f"), "beta") == ["mu1", "mu3"]


EXPECTED_KIND = {}
for _n in FIXTURE_NAMES:
    _top = {e.key: e.value for e in structure(_n).expected("expected")}
    for _side in ("alpha", "beta"):
        if _side in _top:
            EXPECTED_KIND[(_n, _side)] = _top[_side]


@pytest.mark.parametrize("name,side", sorted(EXPECTED_KIND))
def test_verdicts_match_fixtures(name, side):
    assert verdict(name, side).kind == EXPECTED_KIND[(name, side)]


def permuted(name, order):
    s = structure(name)
    text = serialize_structure(s).replace("coordinates = " + ", ".join(s.coordinates),
                                          "coordinates = " + ", ".join(order))
    return parse_structure(text)


@pytest.mark.parametrize("name", ["beta_f_u", "alpha_p_y", "rational_quadruple_zero"])
@pytest.mark.parametrize("order", [("v", "u", "y", "x"), ("u", "x", "v", "y")])
def test_verdict_stable_under_coordinate_order(name, order):
    t = permuted(name, order)
    for side in ("alpha", "beta"):
        a = verdict(name, side)
        b = prolong_and_test(build_system(t, side))
        assert a.kind == b.kind
        if a.kind == "Conditional":
            assert same_zero_set(a.obstruction, b.obstruction)


@pytest.mark.parametrize("name", ["beta_f_u", "alpha_p_y", "rational_quadruple_zero"])
def test_verdict_stable_under_pivot(name):
    for side, pivots in (("alpha", (3, 4)), ("beta", (1, 2))):
        kinds = {verdict(name, side, p).kind for p in pivots}
        assert len(kinds) == 1


@pytest.mark.parametrize("name,side", sorted(k for k, v in EXPECTED_KIND.items() if v == "Integrable"))
def test_integrable_verdicts_close(name, side):
    assert not closure_residuals(verdict(name, side))


def test_general_signature_solutions():
    s = structure("bol_exp_q3")
    v = verdict("bol_exp_q3", "alpha")
    assert v.kind == "Integrable"
    assert v.solved["lam1"] == ext_form(s, "-2*lam1*(dx + du)", ["lam1", "lam2"])
    assert v.solved["lam2"].is_zero()
    assert verdict("bol_exp_q3", "beta").kind == "Obstructed"
    assert verdict("p3_beta_f", "beta").kind == "Integrable"
    c = verdict("p3_beta_f", "alpha")
    assert c.kind == "Conditional"
    assert same_zero_set(c.obstruction, structure("p3_beta_f").scalar("f'(y1)"))
    c = verdict("q3_alpha_p", "beta")
    assert same_zero_set(c.obstruction, structure("q3_alpha_p").scalar("p'(y3)"))


def test_locus_restriction_on_beta_obstruction():
    s = structure("bol_exp_q3")
    v = verdict("bol_exp_q3", "beta")
    mu = coordinate("mu")
    assert v.obstruction == (s.scalar("x") - 1) * (mu - 1)
    assert v.locus == [mu - 1]
    loc = solve_locus(v)
    assert [str(c) for c in loc.values()] == ["1"]
    # the single surviving parameter value gives a closed system of its own
    assert prolong_and_test(restrict_to_locus(v, loc)).kind == "Integrable"


def test_fixed_root_systems():
    s = structure("rational_triple_zero")
    # both root plane fields close
    assert prolong_and_test(fixed_system(s, "alpha", s.scalar("(x+u)/(x*v-y*u)"))).kind == "Integrable"
    assert prolong_and_test(fixed_system(s, "alpha", s.scalar("0"))).kind == "Integrable"
    r = structure("rational_quadruple_zero")
    assert prolong_and_test(fixed_system(r, "beta", "inf")).kind == "Integrable"


# printed system of the triple zero structure --------------------------------------

def printed_alpha_reduction(s):
    return [s.form("(v+y)*(x+u)*dx - (x^2+u^2)*dy"), s.form("(v+y)*(x+u)*du - (x^2+u^2)*dv")]


def test_printed_reduction_is_obstructed():
    s = structure("rational_triple_zero")
    forms = printed_alpha_reduction(s)
    ind = wedge(DiffForm.d("x"), DiffForm.d("u"))
    sys = PfaffianSystem(s, "alpha", None, [], forms, ind, ["x", "u"], ["y", "v"])
    v = prolong_and_test(sys)
    assert v.kind == "Obstructed"
    assert same_zero_set(v.obstruction, s.scalar("x*(v+y)"))


def test_printed_reduction_forms_pin_different_parameters():
    # each printed form matches the alpha plane of one row, at different lam
    s = structure("rational_triple_zero")
    first, second = printed_alpha_reduction(s)
    lam_a = s.scalar("(v*x^2 - u^2*y - u*v*x - u*x*y)/(x^2 + u^2)")
    lam_b = s.scalar("(v*x^2 - u^2*y + u*v*x + u*x*y)/(x^2 + u^2)")
    assert same_span([first], [s.w(1, 4) + s.w(1, 3).scale(lam_a)])
    assert same_span([second], [s.w(2, 4) + s.w(2, 3).scale(lam_b)])
    assert not (lam_a - lam_b).is_zero()


# families -------------------------------------------------------------------------

FAMILY_FILES = sorted(p.name for p in FAMILIES.glob("*.fam"))
FAILING = {"beta_f_u.beta_perturbed.fam", "alpha_rational_quadruple_inf.beta_printed.fam"}


def run_family(fname):
    s = structure(fname.split(".")[0])
    return verify_solution(s, load_family(FAMILIES / fname, s))


@pytest.mark.parametrize("fname", [f for f in FAMILY_FILES if f not in FAILING])
def test_families_verify(fname):
    res = run_family(fname)
    assert res.ok, (res.residuals, res.closure)


def test_perturbed_family_fails_with_residual():
    res = run_family("beta_f_u.beta_perturbed.fam")
    assert not res.ok
    assert res.residuals


def test_uncorrected_squared_relation_fails_closure():
    res = run_family("alpha_rational_quadruple_inf.beta_printed.fam")
    assert not res.ok
    assert not res.residuals and res.closure


def test_dependent_relations_rejected():
    s = structure("beta_f_u")
    text = "[family]\nside = beta\ndiff = dx + dy\ndiff = 2*dx + 2*dy\n"
    with pytest.raises(InconsistentFamily):
        verify_solution(s, parse_family(text, s))


def test_reduction_check_controls():
    from test_acceptance import is_alpha_reduction

    s = structure("rational_triple_zero")
    lam = s.scalar("(x*v - y*u)/(x + u)")
    rows = [s.w(1, 4) + s.w(1, 3).scale(lam), s.w(2, 4) + s.w(2, 3).scale(lam)]
    assert is_alpha_reduction(s, [rows[0] + rows[1], rows[1].scale(s.scalar("x"))])
    assert not is_alpha_reduction(s, [rows[0], s.w(2, 4) + s.w(2, 3).scale(lam + 1)])
