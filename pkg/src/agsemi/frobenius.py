"""Pfaffian systems of the alpha- and beta-submanifolds and their prolongation.

On an alpha-submanifold the rows of the coframe matrix are proportional, on a
beta-submanifold the columns are.  Writing the proportionality with affine
parameters gives a Pfaffian system on the base extended by the parameters.
``prolong_and_test`` solves the closure conditions for the parameter
differentials and re-checks closure; whatever refuses to vanish is reported as
the obstruction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .agstruct import AGStructure, ValidationError, _split_list, read_sections
from .exterior import (
    DiffForm,
    NotSolvable,
    ext_d,
    parse_form,
    solve_for_differentials,
    substitute_differentials,
    wedge_all,
)
from .symcore import (
    ATOMS,
    ParseContext,
    ScalarExpr,
    SymbolicError,
    as_expr,
    coordinate,
    coordinate_index,
    degree_in,
    diff,
    numerator_factors,
    one,
    parse_scalar,
    pseudo_remainder,
    solve_linear,
    specialize_function,
    subs,
    zero,
)
from .symcore.expr import _all_atoms_deep


class PivotVanishes(ValueError):
    pass


class InconsistentFamily(ValueError):
    pass


# systems ---------------------------------------------------------------------

@dataclass
class PfaffianSystem:
    structure: AGStructure
    side: str
    pivot: int | None
    params: list[str]
    forms: list[DiffForm]
    independence: DiffForm
    independent: list[str] = field(default_factory=list)
    dependent: list[str] = field(default_factory=list)
    note: str = ""
    warnings: list[str] = field(default_factory=list)

    @property
    def base(self) -> list[str]:
        return list(self.structure.coordinates)

    @property
    def coordinates(self) -> list[str]:
        return self.base + self.params

    def param_index(self) -> list[int]:
        return [coordinate_index(n) for n in self.params]


def _fresh(stem: str, taken: Sequence[str]) -> str:
    name = stem
    while name in taken:
        name += "_"
    return name


def param_names(s: AGStructure, side: str, pivot: int | None = None) -> list[str]:
    taken = list(s.coordinates) + list(s.constants) + list(s.functions)
    if side == "alpha":
        stem, count = "lam", s.q - 1
    else:
        stem, count = "mu", s.p - 1
    if count == 1:
        return [_fresh(stem, taken)]
    if side == "beta":
        piv = pivot or 2
        return [_fresh(f"{stem}{a}", taken) for a in range(1, s.p + 1) if a != piv]
    return [_fresh(f"{stem}{k}", taken) for k in range(1, count + 1)]


def _pivot_candidates(s: AGStructure, side: str) -> list[int]:
    if side == "alpha":
        return list(range(s.p + 1, s.p + s.q + 1))
    return [2, 1] + list(range(3, s.p + 1))


def _raw_system(s: AGStructure, side: str, pivot: int) -> tuple[list[str], list[DiffForm], DiffForm]:
    names = param_names(s, side, pivot)
    forms = []
    if side == "alpha":
        rows = [i for i in range(s.p + 1, s.p + s.q + 1) if i != pivot]
        for name, r in zip(names, rows):
            lam = coordinate(name)
            for a in range(1, s.p + 1):
                forms.append(s.w(a, pivot).scale(lam) + s.w(a, r))
        ind = wedge_all([s.w(a, pivot) for a in range(1, s.p + 1)])
    else:
        cols = [a for a in range(1, s.p + 1) if a != pivot]
        for name, c in zip(names, cols):
            mu = coordinate(name)
            for i in range(s.p + 1, s.p + s.q + 1):
                forms.append(s.w(pivot, i).scale(mu) + s.w(c, i))
        ind = wedge_all([s.w(pivot, i) for i in range(s.p + 1, s.p + s.q + 1)])
    return names, forms, ind


def _choose_independent(forms: Sequence[DiffForm], ind: DiffForm, coords: Sequence[str]) -> tuple[list[str], list[str]]:
    order = {coordinate_index(c): n for n, c in enumerate(coords)}

    def rank(item):
        key, c = item
        simple = 0 if c.is_constant() else (1 if not c.den.is_ground or len(c.num) > 1 else 0) + 1
        return (simple, [order[i] for i in key])

    for key, _ in sorted(ind.terms.items(), key=rank):
        indep = [coords[order[i]] for i in key]
        dep = [c for c in coords if c not in indep]
        try:
            solve_for_differentials(forms, [coordinate_index(c) for c in dep])
        except NotSolvable:
            continue
        return indep, dep
    raise PivotVanishes("no choice of independent differentials solves the system")


def build_system(s: AGStructure, side: str, pivot: int | None = None) -> PfaffianSystem:
    """The Pfaffian system of the alpha (rows) or beta (columns) submanifolds.

    ``pivot`` is the row (alpha) or column (beta) the parameters multiply;
    by default the first row and the second column.
    """
    if side not in ("alpha", "beta"):
        raise ValueError("side must be 'alpha' or 'beta'")
    cands = [pivot] if pivot is not None else _pivot_candidates(s, side)
    warnings = []
    for piv in cands:
        names, forms, ind = _raw_system(s, side, piv)
        if ind.is_zero():
            warnings.append(f"pivot {piv} has vanishing wedge")
            continue
        indep, dep = _choose_independent(forms, ind, s.coordinates)
        return PfaffianSystem(s, side, piv, names, forms, ind, indep, dep, warnings=warnings)
    raise PivotVanishes(f"every {side} pivot has vanishing wedge")


def fixed_system(s: AGStructure, side: str, value) -> PfaffianSystem:
    """System of the plane field with a fixed conformal root parameter (p = q = 2).

    ``value`` is a scalar or ``"inf"``.  For the alpha side the planes are
    ``w_a^3 + value * w_a^4 = 0``, for the beta side
    ``value * w_2^i + w_1^i = 0``.
    """
    if (s.p, s.q) != (2, 2):
        raise ValueError("root distributions are defined here for p = q = 2")
    inf = isinstance(value, str)
    if side == "alpha":
        if inf:
            forms = [s.w(a, 4) for a in (1, 2)]
            ind = wedge_all([s.w(a, 3) for a in (1, 2)])
        else:
            c = as_expr(value)
            forms = [s.w(a, 3) + s.w(a, 4).scale(c) for a in (1, 2)]
            ind = wedge_all([s.w(a, 4) for a in (1, 2)])
    else:
        if inf:
            forms = [s.w(2, i) for i in (3, 4)]
            ind = wedge_all([s.w(1, i) for i in (3, 4)])
        else:
            c = as_expr(value)
            forms = [s.w(2, i).scale(c) + s.w(1, i) for i in (3, 4)]
            ind = wedge_all([s.w(2, i) for i in (3, 4)])
    indep, dep = _choose_independent(forms, ind, s.coordinates)
    return PfaffianSystem(s, side, None, [], forms, ind, indep, dep, note=f"fixed {value}")


# verdicts --------------------------------------------------------------------

@dataclass
class Verdict:
    kind: str  # "Integrable" | "Conditional" | "Obstructed"
    system: PfaffianSystem
    solved: dict[str, DiffForm] = field(default_factory=dict)
    obstruction: ScalarExpr | None = None
    conditions: list[ScalarExpr] = field(default_factory=list)
    residual: DiffForm | None = None
    locus: list[ScalarExpr] = field(default_factory=list)
    rounds: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def integrable(self) -> bool:
        return self.kind == "Integrable"


def _is_fn_dependent(e: ScalarExpr) -> bool:
    return any(ATOMS.atoms[i].kind == "fn" for i in _all_atoms_deep(e))


def _split_factors(r: ScalarExpr, params: set[int]):
    """Split the numerator of ``r`` into function, locus and generic factors."""
    fn, loc, other = [], [], []
    for f, _ in numerator_factors(r):
        deep = _all_atoms_deep(f)
        has_par = bool(deep & params)
        if has_par and len(f.num) == 1 and f.atoms() <= params:
            continue  # a power of a parameter
        if has_par:
            loc.append(f)
        elif _is_fn_dependent(f):
            fn.append(f)
        else:
            other.append(f)
    return fn, loc, other


def _product(fs: Sequence[ScalarExpr]) -> ScalarExpr:
    out = one()
    for f in fs:
        out = out * f
    return out


def classify_obstruction(residuals: Sequence[ScalarExpr], params: Sequence[int]):
    """(kind, obstruction, conditions, locus) for nonzero closure residuals."""
    pset = set(params)
    conditions: list[ScalarExpr] = []
    locus: list[ScalarExpr] = []
    hard = None
    for r in residuals:
        fn, loc, other = _split_factors(r, pset)
        for f in loc:
            if f not in locus:
                locus.append(f)
        if fn and not loc:
            c = _product(fn)
            if c not in conditions:
                conditions.append(c)
        elif hard is None:
            hard = _product(loc + other) if (loc or other) else one()
    if hard is not None or not conditions:
        return "Obstructed", hard if hard is not None else one(), [], locus
    conditions.sort(key=lambda e: (len(str(e)), str(e)))
    return "Conditional", conditions[0], conditions, locus


def _closure(forms: Sequence[DiffForm], images: dict[int, DiffForm]) -> list[tuple[int, DiffForm]]:
    out = []
    for n, f in enumerate(forms):
        r = substitute_differentials(ext_d(f), images)
        if not r.is_zero():
            out.append((n, r))
    return out


def _coefficients(items) -> list[ScalarExpr]:
    seen: list[ScalarExpr] = []
    for _, f in items:
        for c in f.terms.values():
            if c not in seen:
                seen.append(c)
    return seen


def prolong_and_test(sys: PfaffianSystem, max_rounds: int = 3) -> Verdict:
    """Solve closure for the parameter differentials, then re-check closure."""
    dep = [coordinate_index(c) for c in sys.dependent]
    indep = [coordinate_index(c) for c in sys.independent]
    par = sys.param_index()
    images = solve_for_differentials(sys.forms, dep)
    warnings = list(sys.warnings)
    solved: dict[str, DiffForm] = {}
    rounds = 0

    if par:
        rounds = 1
        # closure with the parameter differentials left free
        k = len(indep)
        pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
        nq = len(par) * k
        rows, rhs = [], []
        for f in sys.forms:
            w = substitute_differentials(ext_d(f), images)
            eq = {pr: ([zero()] * nq, zero()) for pr in pairs}
            for key, c in w.terms.items():
                ps = [x for x in key if x in par]
                if len(ps) == 2:
                    raise NotSolvable("quadratic terms in the parameter differentials")
                if not ps:
                    a, b = indep.index(key[0]), indep.index(key[1])
                    if a > b:
                        a, b, c = b, a, -c
                    row, r0 = eq[(a, b)]
                    eq[(a, b)] = (row, r0 - c)
                    continue
                lam = ps[0]
                other = key[1] if key[0] == lam else key[0]
                sign = 1 if key[0] == lam else -1
                j = indep.index(other)
                # d lam ^ dt_j with d lam = sum_i Q_i dt_i
                for i in range(k):
                    if i == j:
                        continue
                    a, b, s = (i, j, 1) if i < j else (j, i, -1)
                    row, r0 = eq[(a, b)]
                    col = par.index(lam) * k + i
                    row[col] = row[col] + c * (sign * s)
            for pr in pairs:
                row, r0 = eq[pr]
                if any(not v.is_zero() for v in row) or not r0.is_zero():
                    rows.append(row)
                    rhs.append(r0)
        sol = solve_linear(rows, rhs, nq) if rows else None
        if sol is not None and not sol.consistent:
            kind, obs, conds, loc = classify_obstruction(sol.residuals, par)
            return Verdict(kind, sys, {}, obs, conds, None, loc, rounds, warnings)
        values = sol.values if sol is not None else [zero()] * nq
        free = sol.free if sol is not None else list(range(nq))
        if free:
            warnings.append("parameter differentials not determined by closure")
        for n, name in enumerate(sys.params):
            q = DiffForm(1, {(indep[i],): values[n * k + i] for i in range(k)})
            solved[name] = q
            images[par[n]] = q

    if rounds + 1 > max_rounds:
        warnings.append("prolongation depth exhausted")
        return Verdict("Obstructed", sys, solved, None, [], None, [], rounds, warnings)
    rounds += 1
    full = list(sys.forms) + [DiffForm.d(n) - solved[n] for n in sys.params]
    bad = _closure(full, images)
    if not bad:
        return Verdict("Integrable", sys, solved, None, [], None, [], rounds, warnings)
    kind, obs, conds, loc = classify_obstruction(_coefficients(bad), par)
    return Verdict(kind, sys, solved, obs, conds, bad[0][1], loc, rounds, warnings)


def closure_residuals(verdict: Verdict) -> list[tuple[int, DiffForm]]:
    """Re-check closure of an Integrable verdict's prolonged system."""
    sys = verdict.system
    images = solve_for_differentials(sys.forms, [coordinate_index(c) for c in sys.dependent])
    for n, name in enumerate(sys.params):
        images[coordinate_index(name)] = verdict.solved[name]
    full = list(sys.forms) + [DiffForm.d(n) - verdict.solved[n] for n in sys.params]
    return _closure(full, images)


def solve_locus(verdict: Verdict) -> dict[str, ScalarExpr]:
    """Parameter values on the algebraic locus of an obstruction (linear factors only)."""
    out: dict[str, ScalarExpr] = {}
    for f in verdict.locus:
        for name in verdict.system.params:
            if name in out:
                continue
            i = coordinate_index(name)
            if degree_in(f, i) != 1:
                continue
            c1 = diff(f, i)
            if i in _all_atoms_deep(c1):
                continue
            c0 = subs(f, {i: zero()})
            out[name] = -c0 / c1
            break
    return out


def restrict_to_locus(verdict: Verdict, values: dict[str, ScalarExpr] | None = None) -> PfaffianSystem:
    """Substitute parameters solved from the obstruction; the result lives on the base."""
    sys = verdict.system
    values = values if values is not None else solve_locus(verdict)
    if set(values) != set(sys.params):
        raise NotSolvable("obstruction does not determine every parameter")
    mapping = {coordinate_index(k): v for k, v in values.items()}
    forms = [f.map_coeffs(lambda c: subs(c, mapping)) for f in sys.forms]
    indep, dep = _choose_independent(forms, sys.independence, sys.base)
    return PfaffianSystem(sys.structure, sys.side, sys.pivot, [], forms, sys.independence, indep, dep,
                          note="restricted to " + ", ".join(f"{k} = {v}" for k, v in values.items()))


def specialize(s: AGStructure, name: str, coeffs: Sequence, constants: Sequence[str] = ()) -> AGStructure:
    """Replace formal function ``name`` by ``sum coeffs[j] t^j`` in the coframe."""
    coeffs = [as_expr(c) for c in coeffs]
    out = s.map_coefficients(lambda c: specialize_function(c, name, coeffs), name=f"{s.name}[{name}]")
    out.functions = {k: v for k, v in s.functions.items() if k != name}
    out.constants = list(s.constants) + [c for c in constants if c not in s.constants]
    return out


def polynomial_coefficients(e: ScalarExpr, var: str) -> list[ScalarExpr]:
    """Coefficients of ``e`` as a polynomial in coordinate ``var``."""
    i = coordinate_index(var)
    out, k, fact = [], 0, 1
    cur = e
    while True:
        out.append(subs(cur, {i: zero()}) / fact)
        cur = diff(cur, i)
        k += 1
        fact *= k
        if cur.is_zero():
            return out
        if k > 32:
            raise ValueError(f"{e} is not a polynomial in {var}")


# solution families ---------------------------------------------------------------

@dataclass
class SolutionFamily:
    side: str
    eqs: list[ScalarExpr]
    diffs: list[DiffForm]
    constants: list[str]
    pivot: int | None = None
    specialize: dict[str, list[ScalarExpr]] = field(default_factory=dict)
    name: str = ""


@dataclass
class VerifyResult:
    ok: bool
    residuals: list[tuple[int, ScalarExpr]]
    system: PfaffianSystem
    solved_for: list[str]
    closure: list[tuple[int, ScalarExpr]] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def parse_family(text: str, s: AGStructure, source: str | None = None) -> SolutionFamily:
    secs = read_sections(text, source)
    fam = secs.get("family")
    if fam is None:
        raise ValidationError("missing [family] section", None, source)
    side = pivot = None
    consts: list[str] = []
    for e in secs.get("params", []):
        if e.key != "constants":
            raise ValidationError(f"unknown params key {e.key!r}", e.line, source)
        consts += _split_list(e.value)
    spec_lines = []
    for e in fam:
        if e.key == "side":
            side = e.value
        elif e.key == "pivot":
            pivot = int(e.value)
        elif e.key == "specialize":
            spec_lines.append(e)
    if side not in ("alpha", "beta"):
        raise ValidationError("side must be alpha or beta", None, source)
    names = param_names(s, side, pivot)
    coords = list(s.coordinates) + names
    funcs = dict(s.functions)
    allc = list(s.constants) + consts
    specs: dict[str, list[ScalarExpr]] = {}
    for e in spec_lines:
        m = re.fullmatch(r"([A-Za-z_]\w*)\s*=\s*(.+)", e.value)
        if not m or m.group(1) not in funcs:
            raise ValidationError(f"bad specialization {e.value!r}", e.line, source)
        var = funcs[m.group(1)]
        try:
            rhs = parse_scalar(m.group(2), ParseContext(tuple(coords), {}, tuple(allc)))
        except SymbolicError as exc:
            raise ValidationError(str(exc), e.line, source) from None
        specs[m.group(1)] = polynomial_coefficients(rhs, var)
        funcs.pop(m.group(1))
    ctx = ParseContext(tuple(coords), funcs, tuple(allc))
    eqs, diffs = [], []
    for e in fam:
        try:
            if e.key == "eq":
                eqs.append(parse_scalar(e.value, ctx))
            elif e.key == "diff":
                diffs.append(parse_form(e.value, coords, funcs, allc))
            elif e.key not in ("side", "pivot", "specialize"):
                raise ValidationError(f"unknown family key {e.key!r}", e.line, source)
        except SymbolicError as exc:
            raise ValidationError(str(exc), e.line, source) from None
    name = Path(source).stem if source else "family"
    return SolutionFamily(side, eqs, diffs, consts, pivot, specs, name)


def load_family(path, s: AGStructure) -> SolutionFamily:
    path = Path(path)
    return parse_family(path.read_text(), s, str(path))


def _reduce_mod_relations(c: ScalarExpr, chain: Sequence[tuple[ScalarExpr, int]]) -> ScalarExpr:
    r = ScalarExpr(c.num)
    for rel, var in chain:
        if r.is_zero():
            break
        if degree_in(r, var):
            r = pseudo_remainder(r, rel, var)
    return r


def _elimination_chain(eqs: Sequence[ScalarExpr], prefs: Sequence[int], forbidden: set[int]):
    chain: list[tuple[ScalarExpr, int]] = []
    used: set[int] = set()
    for rel in eqs:
        r = _reduce_mod_relations(rel, chain)
        if r.is_zero():
            raise InconsistentFamily(f"relation {rel} is implied by the others")
        var = next((v for v in prefs if v not in used and v not in forbidden and degree_in(r, v)), None)
        if var is None:
            raise InconsistentFamily(f"cannot eliminate a variable from {rel}")
        chain.append((r, var))
        used.add(var)
    return chain


def verify_solution(s: AGStructure, fam: SolutionFamily) -> VerifyResult:
    """Check that every system form vanishes on the tangent spaces of the family.

    Relations supplied as differentials must also be closed modulo the whole
    family, otherwise they do not cut out submanifolds at all.
    """
    for name, coeffs in fam.specialize.items():
        s = specialize(s, name, coeffs, fam.constants)
    sys = build_system(s, fam.side, fam.pivot)
    rels = [ext_d(DiffForm.scalar(e)) for e in fam.eqs] + list(fam.diffs)
    if any(r.is_zero() for r in rels):
        raise InconsistentFamily("a relation has vanishing differential")
    order = sys.params + sys.dependent + sys.independent
    cols = [coordinate_index(c) for c in order]
    M = [[r.terms.get((x,), zero()) for x in cols] for r in rels]
    sol = solve_linear(M, [zero()] * len(rels), len(cols))
    if len(sol.pivots) < len(rels):
        raise InconsistentFamily("relations are dependent")
    solved = [cols[c] for c in sol.pivots]
    images = solve_for_differentials(rels, solved)

    consts = []
    for c in fam.constants:
        from .symcore import constant
        consts.append(next(iter(constant(c).atoms())))
    forbidden: set[int] = set()
    for f in list(sys.forms) + rels:
        for c in f.terms.values():
            for i in _all_atoms_deep(c):
                a = ATOMS.atoms[i]
                if a.arg is not None:
                    forbidden |= _all_atoms_deep(a.arg)
    for e in fam.eqs:
        for i in _all_atoms_deep(e):
            a = ATOMS.atoms[i]
            if a.arg is not None:
                forbidden |= _all_atoms_deep(a.arg)
    prefs = [coordinate_index(c) for c in sys.params + sys.dependent] + consts + \
            [coordinate_index(c) for c in sys.independent]
    chain = _elimination_chain(fam.eqs, prefs, forbidden)

    residuals = []
    for n, f in enumerate(sys.forms):
        r = substitute_differentials(f, images)
        for c in r.terms.values():
            red = _reduce_mod_relations(c, chain)
            if not red.is_zero():
                residuals.append((n, red))
    # relations given by their differentials must themselves close
    closure = []
    for n, r in enumerate(fam.diffs):
        dr = substitute_differentials(ext_d(r), images)
        for c in dr.terms.values():
            red = _reduce_mod_relations(c, chain)
            if not red.is_zero():
                closure.append((n, red))
    ok = not residuals and not closure
    return VerifyResult(ok, residuals, sys, [ATOMS.atoms[i].name for i in solved], closure)


def same_span(a: Sequence[DiffForm], b: Sequence[DiffForm]) -> bool:
    """Whether two sets of 1-forms span the same module generically."""
    keys = sorted({k for f in list(a) + list(b) for k in f.terms})

    def rank(forms):
        M = [[f.terms.get(k, zero()) for k in keys] for f in forms]
        return len(solve_linear(M, [zero()] * len(M), len(keys)).pivots) if M else 0

    return rank(a) == rank(b) == rank(list(a) + list(b))
