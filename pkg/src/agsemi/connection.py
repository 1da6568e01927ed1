"""Normal connection and curvature of a four-dimensional almost Grassmann structure.

All forms are handled through their coframe components.  With the scalar
form normalized to zero, both unknown layers enter the structure equations
linearly with integer coefficients, so each layer is one exact linear solve
whose right-hand side carries all the symbolic content.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product

from .exterior import DiffForm, Frame, ext_d
from .symcore import ATOMS, ScalarExpr, as_expr, numerator_factors, one, solve_linear, zero
from .symcore.expr import _all_atoms_deep
from .tensorops import B1_SLOTS, B2_SLOTS, ConformalCurvature, VPTensor, check_b_symmetries
from .tensorops import conformal_curvature as _conformal_from_b


class UnsupportedSignature(NotImplementedError):
    pass


class NormalizationInapplicable(ValueError):
    """The zero-torsion, zero-scalar-form normalization has no solution."""


class SecondOrderInconsistent(ValueError):
    pass


class SymmetryBroken(ValueError):
    pass


# An affine 2-form: {(A, B) with A < B: (constant, {unknown: Fraction})}
Affine2 = dict


def _add(acc: Affine2, key, const=None, lin=None, sign=1) -> None:
    c0, l0 = acc.get(key, (zero(), {}))
    if const is not None:
        c0 = c0 + const if sign > 0 else c0 - const
    if lin:
        l0 = dict(l0)
        for u, c in lin.items():
            l0[u] = l0.get(u, 0) + sign * c
    acc[key] = (c0, l0)


def _wedge_comps(a: list, b: list) -> dict[tuple[int, int], ScalarExpr]:
    """Coframe components of a wedge of two 1-forms, keyed by ``A < B``."""
    out: dict[tuple[int, int], ScalarExpr] = {}
    n = len(a)
    for A, B in combinations(range(n), 2):
        v = a[A] * b[B] - a[B] * b[A]
        if not v.is_zero():
            out[(A, B)] = v
    return out


@dataclass
class ConnectionData:
    """Connection forms by ``(lower, upper)`` index, as coframe components."""

    p: int
    q: int
    frame: Frame
    index: list[tuple[int, int]]
    forms: dict[tuple[int, int], list[ScalarExpr]]
    second_order: list[list[ScalarExpr]] | None = None

    def form(self, lower: int, upper: int) -> DiffForm:
        return self.frame.to_form(self.forms[(lower, upper)])

    def coefficient(self, lower: int, upper: int, alpha: int, i: int) -> ScalarExpr:
        """Coefficient of the connection form on the coframe element ``w_alpha^i``."""
        return self.forms[(lower, upper)][self.index.index((alpha, i))]

    def second_order_named(self) -> dict[str, ScalarExpr]:
        S = self.second_order
        names = {"A1": (0, 0), "A2": (0, 1), "A3": (0, 2), "A4": (0, 3), "B2": (1, 1), "B3": (1, 2),
                 "B4": (1, 3), "C3": (2, 2), "C4": (2, 3), "E4": (3, 3)}
        return {k: S[r][c] for k, (r, c) in names.items()}


def coframe_index(p: int, q: int) -> list[tuple[int, int]]:
    """Order of coframe elements ``w_alpha^i``: Latin index outer, Greek inner."""
    return [(a, i) for i in range(p + 1, p + q + 1) for a in range(1, p + 1)]


def _check_signature(p: int, q: int) -> None:
    if (p, q) != (2, 2):
        raise UnsupportedSignature(f"connection is implemented for p = q = 2, got p={p}, q={q}")


def solve_connection(structure) -> ConnectionData:
    """First-order connection forms under the zero-torsion, zero-scalar normalization."""
    p, q = structure.p, structure.q
    _check_signature(p, q)
    frame = structure.frame
    index = coframe_index(p, q)
    pos = {ai: A for A, ai in enumerate(index)}
    n = len(index)
    greek = range(1, p + 1)
    latin = range(p + 1, p + q + 1)

    # unknown templates: traceless gl(p) and gl(q) blocks
    templates: dict[tuple[int, int], dict[int, int]] = {}
    unknowns: list[str] = []

    def new(name: str) -> int:
        unknowns.append(name)
        return len(unknowns) - 1

    for blk in (greek, latin):
        first = blk[0]
        diag = {}
        for a in blk[:-1]:
            diag[a] = new(f"w_{a}^{a}")
        for a in blk:
            for b in blk:
                if a == b:
                    if a in diag:
                        templates[(a, a)] = {diag[a]: 1}
                    else:
                        templates[(a, a)] = {diag[c]: -1 for c in blk[:-1]}
                else:
                    templates[(a, b)] = {new(f"w_{a}^{b}"): 1}
        del first

    nvar = len(unknowns) * n

    def var(u: int, D: int) -> int:
        return u * n + D

    rows, rhs = [], []
    K = frame.structure
    for (al, i) in index:
        A = pos[(al, i)]
        for B, C in combinations(range(n), 2):
            row = [Fraction(0)] * nvar
            # sum_j theta_(al,j) ^ w_j^i
            for j in latin:
                E = pos[(al, j)]
                for u, s in templates[(j, i)].items():
                    if E == B:
                        row[var(u, C)] += s
                    elif E == C:
                        row[var(u, B)] -= s
            # sum_beta w_al^beta ^ theta_(beta,i)
            for be in greek:
                E = pos[(be, i)]
                for u, s in templates[(al, be)].items():
                    if E == C:
                        row[var(u, B)] += s
                    elif E == B:
                        row[var(u, C)] -= s
            rows.append(row)
            rhs.append(K[A][(B, C)])
    sol = solve_linear(rows, rhs, nvar)
    if sol.residuals:
        raise NormalizationInapplicable(
            "structure equations are inconsistent with vanishing torsion and scalar form; residual "
            + str(sol.residuals[0]))
    if sol.free:
        raise NormalizationInapplicable("first-order connection is not uniquely determined")
    forms: dict[tuple[int, int], list[ScalarExpr]] = {}
    for key, tpl in templates.items():
        comps = [zero()] * n
        for u, s in tpl.items():
            for D in range(n):
                v = sol.values[var(u, D)]
                comps[D] = comps[D] + v if s > 0 else comps[D] - v
        forms[key] = comps
    for (al, i) in index:
        comps = [zero()] * n
        comps[pos[(al, i)]] = as_expr(1)
        forms[(al, i)] = comps
    return ConnectionData(p, q, frame, index, forms)


@dataclass
class CurvatureData:
    connection: ConnectionData
    omega: dict[tuple[int, int], dict[tuple[int, int], ScalarExpr]]
    b1: VPTensor
    b2: VPTensor
    residuals: dict = field(default_factory=dict)

    def curvature_form(self, lower: int, upper: int) -> DiffForm:
        frame = self.connection.frame
        out = DiffForm(2)
        for (A, B), c in self.omega[(lower, upper)].items():
            from .exterior import wedge

            out = out + wedge(frame.forms[A], frame.forms[B]).scale(c)
        return out

    def full_coefficient(self, lower: int, upper: int, e1: tuple[int, int], e2: tuple[int, int]) -> ScalarExpr:
        idx = self.connection.index
        A, B = idx.index(e1), idx.index(e2)
        if A == B:
            return zero()
        c = self.omega[(lower, upper)].get((min(A, B), max(A, B)), zero())
        return c if A < B else -c


def _d_comps(frame: Frame, comps: list[ScalarExpr]) -> dict[tuple[int, int], ScalarExpr]:
    """Coframe components of ``d(sum c_A theta_A)``."""
    n = frame.n
    out: dict[tuple[int, int], ScalarExpr] = {}
    K = frame.structure
    for A, c in enumerate(comps):
        if c.is_zero():
            continue
        dc = frame.d_scalar(c)
        for B in range(n):
            if dc[B].is_zero() or B == A:
                continue
            key, s = ((B, A), 1) if B < A else ((A, B), -1)
            v = dc[B] if s > 0 else -dc[B]
            out[key] = out[key] + v if key in out else v
        for key, k in K[A].items():
            if key[0] < key[1] and not k.is_zero():
                v = c * k
                out[key] = out[key] + v if key in out else v
    return out


def solve_second_order(conn: ConnectionData) -> CurvatureData:
    """Determine the forms ``w_i^alpha`` and the curvature tensor ``b``.

    The unknown 4x4 matrix ``S`` (``w_i^alpha = sum_B S[(alpha,i), B] theta_B``)
    is fixed by ``d(omega) = 0`` together with the mixed b1/b2 relation.
    """
    p, q = conn.p, conn.q
    _check_signature(p, q)
    frame = conn.frame
    index = conn.index
    pos = {ai: A for A, ai in enumerate(index)}
    n = len(index)
    greek = range(1, p + 1)
    latin = range(p + 1, p + q + 1)
    nvar = n * n

    def svar(A: int, B: int) -> int:
        return A * n + B

    def theta_wedge_S(A: int, R: int, sign: int, acc: Affine2) -> None:
        """acc += sign * theta_A ^ (sum_B S[R,B] theta_B)."""
        for B in range(n):
            if B == A:
                continue
            if A < B:
                _add(acc, (A, B), lin={svar(R, B): 1}, sign=sign)
            else:
                _add(acc, (B, A), lin={svar(R, B): 1}, sign=-sign)

    def S_wedge_theta(R: int, A: int, sign: int, acc: Affine2) -> None:
        """acc += sign * (sum_B S[R,B] theta_B) ^ theta_A."""
        theta_wedge_S(A, R, -sign, acc)

    def trace_term(acc: Affine2, sign: int) -> None:
        """acc += sign * sum_{gamma,k} w_gamma^k ^ w_k^gamma."""
        for A in range(n):
            theta_wedge_S(A, A, sign, acc)

    known = conn.forms
    omega: dict[tuple[int, int], Affine2] = {}
    for al, be in product(greek, greek):
        acc: Affine2 = {}
        for key, v in _d_comps(frame, known[(al, be)]).items():
            _add(acc, key, const=v)
        for ga in greek:
            for key, v in _wedge_comps(known[(al, ga)], known[(ga, be)]).items():
                _add(acc, key, const=v, sign=-1)
        if al == be:
            trace_term(acc, -Fraction(1, 2))
        for k in latin:
            # + w_al^k ^ w_k^be
            theta_wedge_S(pos[(al, k)], pos[(be, k)], 1, acc)
        omega[(al, be)] = acc
    for j, i in product(latin, latin):
        acc = {}
        for key, v in _d_comps(frame, known[(j, i)]).items():
            _add(acc, key, const=v)
        for k in latin:
            for key, v in _wedge_comps(known[(j, k)], known[(k, i)]).items():
                _add(acc, key, const=v, sign=-1)
        if i == j:
            # - 1/2 * sum w_k^gamma ^ w_gamma^k = + 1/2 * sum w_gamma^k ^ w_k^gamma
            trace_term(acc, Fraction(1, 2))
        for ga in greek:
            # + w_j^ga ^ w_ga^i
            S_wedge_theta(pos[(ga, j)], pos[(ga, i)], 1, acc)
        omega[(j, i)] = acc

    def full(lower: int, upper: int, e1, e2):
        A, B = pos[e1], pos[e2]
        if A == B:
            return (zero(), {})
        c0, lin = omega[(lower, upper)].get((min(A, B), max(A, B)), (zero(), {}))
        if A < B:
            return c0, lin
        return -c0, {u: -c for u, c in lin.items()}

    def b2c(be, ga, de, al, k, l):
        return full(al, be, (ga, k), (de, l))

    def b1c(i, ga, de, j, k, l):
        return full(j, i, (ga, k), (de, l))

    rows, rhs = [], []

    def emit(terms) -> None:
        row = [Fraction(0)] * nvar
        const = zero()
        for s, (c0, lin) in terms:
            const = const + c0 if s > 0 else const - c0
            for u, c in lin.items():
                row[u] += s * c
        rows.append(row)
        rhs.append(-const)

    # d(omega) = sum w_i^alpha ^ w_alpha^i = 0
    for B, C in combinations(range(n), 2):
        row = [Fraction(0)] * nvar
        row[svar(C, B)] += 1
        row[svar(B, C)] -= 1
        rows.append(row)
        rhs.append(zero())
    for g, d, k, l in product(greek, greek, latin, latin):
        terms = []
        for al in greek:
            terms.append((1, b2c(g, al, d, al, k, l)))
            terms.append((1, b2c(d, al, g, al, l, k)))
        for i in latin:
            terms.append((-1, b1c(i, g, d, k, i, l)))
            terms.append((-1, b1c(i, d, g, l, i, k)))
        emit(terms)
    sol = solve_linear(rows, rhs, nvar)
    if sol.residuals:
        raise SecondOrderInconsistent("second-order system is inconsistent: " + str(sol.residuals[0]))
    if sol.free:
        raise SecondOrderInconsistent(f"second-order system leaves {len(sol.free)} coefficients free")
    S = [[sol.values[svar(A, B)] for B in range(n)] for A in range(n)]
    asym = [(A, B) for A, B in combinations(range(n), 2) if not (S[A][B] - S[B][A]).is_zero()]
    if asym:
        raise SymmetryBroken(f"second-order coefficients not symmetric at {asym}")

    def ev(aff) -> ScalarExpr:
        c0, lin = aff
        v = c0
        for u, c in lin.items():
            if c:
                v = v + S[u // n][u % n] * c
        return v

    Om = {key: {pair: ev(aff) for pair, aff in acc.items()} for key, acc in omega.items()}
    Om = {key: {pair: v for pair, v in d.items() if not v.is_zero()} for key, d in Om.items()}
    for (al, i) in index:
        conn.forms[(i, al)] = list(S[pos[(al, i)]])
    conn.second_order = S

    def fullv(lower, upper, e1, e2):
        A, B = pos[e1], pos[e2]
        if A == B:
            return zero()
        c = Om[(lower, upper)].get((min(A, B), max(A, B)), zero())
        return c if A < B else -c

    b1 = VPTensor.zeros(B1_SLOTS, p, q, zero())
    b2 = VPTensor.zeros(B2_SLOTS, p, q, zero())
    for vals in product(*b1.ranges()):
        i, ga, de, j, k, l = vals
        b1.set(vals, fullv(j, i, (ga, k), (de, l)))
    for vals in product(*b2.ranges()):
        be, ga, de, al, k, l = vals
        b2.set(vals, fullv(al, be, (ga, k), (de, l)))
    report = check_b_symmetries(b1, b2)
    return CurvatureData(conn, Om, b1, b2, {"symmetries": report})


def curvature(structure) -> CurvatureData:
    return solve_second_order(solve_connection(structure))


def structure_residuals(cd: CurvatureData) -> dict[str, list]:
    """Re-check the structure equations with whole forms, wedges and ``d``.

    This path shares nothing with the linear solves above: the solved
    components are turned back into 1-forms and every equation is evaluated
    in coordinate differentials.  Keys name the equation group; values list
    the offending index tuples (empty when everything holds).
    """
    from .exterior import wedge

    conn = cd.connection
    p, q = conn.p, conn.q
    greek = range(1, p + 1)
    latin = range(p + 1, p + q + 1)
    theta = {ai: conn.frame.forms[A] for A, ai in enumerate(conn.index)}
    w = {k: conn.form(*k) for k in conn.forms}
    # w_i^alpha is stored under (i, alpha); theta_alpha^i under (alpha, i)
    up = {(al, i): theta[(al, i)] for al in greek for i in latin}
    down = {(i, al): w[(i, al)] for al in greek for i in latin}
    trace = DiffForm(2)
    for al in greek:
        for i in latin:
            trace = trace + wedge(up[(al, i)], down[(i, al)])
    out: dict[str, list] = {"first": [], "scalar": [], "greek_curvature": [], "latin_curvature": [],
                            "closure": []}
    for al in greek:
        for i in latin:
            rhs = DiffForm(2)
            for be in greek:
                rhs = rhs + wedge(w[(al, be)], theta[(be, i)])
            for j in latin:
                rhs = rhs + wedge(theta[(al, j)], w[(j, i)])
            if not (ext_d(theta[(al, i)]) - rhs).is_zero():
                out["first"].append((al, i))
            if not ext_d(rhs).is_zero():
                out["closure"].append((al, i))
    if not trace.is_zero():
        out["scalar"].append(())
    half = as_expr(Fraction(1, 2))
    for al in greek:
        for be in greek:
            om = ext_d(w[(al, be)])
            for ga in greek:
                om = om - wedge(w[(al, ga)], w[(ga, be)])
            for k in latin:
                om = om + wedge(up[(al, k)], down[(k, be)])
            if al == be:
                om = om - trace.scale(half)
            if not (om - cd.curvature_form(al, be)).is_zero():
                out["greek_curvature"].append((al, be))
    for j in latin:
        for i in latin:
            om = ext_d(w[(j, i)])
            for k in latin:
                om = om - wedge(w[(j, k)], w[(k, i)])
            for ga in greek:
                om = om + wedge(down[(j, ga)], up[(ga, i)])
            if i == j:
                om = om + trace.scale(half)
            if not (om - cd.curvature_form(j, i)).is_zero():
                out["latin_curvature"].append((j, i))
    return out


def conformal(cd: CurvatureData) -> ConformalCurvature:
    """The ten conformal components read from ``b``."""
    return _conformal_from_b(cd.b1, cd.b2)


# classification ---------------------------------------------------------------

@dataclass
class Classification:
    kind: str  # Flat | AlphaSemiintegrable | BetaSemiintegrable | Generic
    alpha_zero: bool
    beta_zero: bool
    alpha_condition: ScalarExpr | None = None
    beta_condition: ScalarExpr | None = None
    flat_condition: ScalarExpr | None = None
    components: dict[str, ScalarExpr] = field(default_factory=dict)

    def side_status(self, side: str) -> str:
        """``Integrable``, ``Conditional`` or ``Obstructed`` for one side."""
        zero_, cond = ((self.alpha_zero, self.alpha_condition) if side == "alpha"
                       else (self.beta_zero, self.beta_condition))
        if zero_:
            return "Integrable"
        return "Conditional" if cond is not None else "Obstructed"

    def describe(self) -> str:
        out = self.kind
        if self.kind != "Flat" and self.flat_condition is not None:
            out += f"; flat iff {self.flat_condition} = 0"
        return out


def _same_up_to_sign(a: ScalarExpr, b: ScalarExpr) -> bool:
    return (a - b).is_zero() or (a + b).is_zero()


def common_function_factor(values) -> ScalarExpr | None:
    """Product of the function-dependent irreducible factors shared by all values.

    ``None`` when there is no such factor; zero values are ignored.
    """
    vals = [v for v in values if not v.is_zero()]
    if not vals:
        return None
    common = [f for f, _ in numerator_factors(vals[0])
              if any(ATOMS.atoms[i].kind == "fn" for i in _all_atoms_deep(f))]
    for v in vals[1:]:
        fs = [f for f, _ in numerator_factors(v)]
        common = [c for c in common if any(_same_up_to_sign(c, f) for f in fs)]
    if not common:
        return None
    out = one()
    for c in common:
        out = out * c
    return out


def classify(cc: ConformalCurvature) -> Classification:
    a_zero = all(v.is_zero() for v in cc.a)
    b_zero = all(v.is_zero() for v in cc.b)
    comps = {k: v for k, v in cc.named().items() if not v.is_zero()}
    if a_zero and b_zero:
        kind = "Flat"
    elif a_zero:
        kind = "AlphaSemiintegrable"
    elif b_zero:
        kind = "BetaSemiintegrable"
    else:
        kind = "Generic"
    return Classification(kind, a_zero, b_zero,
                          None if a_zero else common_function_factor(cc.a),
                          None if b_zero else common_function_factor(cc.b),
                          common_function_factor(list(cc.a) + list(cc.b)),
                          comps)


# roots of the conformal quartics ------------------------------------------------

@dataclass
class Root:
    value: object  # "0", "inf", a ScalarExpr, or None when only numeric
    multiplicity: int
    exact: bool
    samples: list = field(default_factory=list)
    flagged: bool = False
    frobenius: str | None = None

    def label(self) -> str:
        return str(self.value) if self.value is not None else "numeric"


@dataclass
class RootReport:
    side: str
    degree: int
    roots: list[Root]
    warnings: list[str] = field(default_factory=list)

    def pattern(self) -> list[tuple[str, int]]:
        return [(r.label(), r.multiplicity) for r in self.roots]


def _cluster(values, tol: float) -> list[list[complex]]:
    groups: list[list[complex]] = []
    for z in sorted(values, key=lambda c: (c.real, c.imag)):
        for g in groups:
            if abs(g[0] - z) <= tol * max(1.0, abs(g[0])):
                g.append(z)
                break
        else:
            groups.append([z])
    return groups


def root_analysis(cc: ConformalCurvature, side: str, structure=None, n_samples: int = 5,
                  tol: float = 1e-6, seed: int = 0, max_rounds: int = 3,
                  overrides: dict | None = None) -> RootReport:
    """Roots of ``C_alpha(lambda)`` or ``C_beta(mu)`` with multiplicities.

    Roots at 0 and infinity come from identically vanishing end coefficients.
    A single remaining root is solved exactly; otherwise the remaining roots
    are clustered numerically at ``n_samples`` sample points.  With a
    structure, the plane field of every exact root is tested for closure.
    ``overrides`` maps root labels to a forced integrability flag; the label
    ``"finite"`` stands for any root other than 0 and infinity.
    """
    import numpy as np

    from .oracle import DomainViolation, OracleConfig, instantiate

    coeffs = cc.c_alpha() if side == "alpha" else cc.c_beta()
    report = RootReport(side, 0, [])
    if all(c.is_zero() for c in coeffs):
        report.warnings.append(f"C_{side} vanishes identically")
        return report
    low = next(k for k, c in enumerate(coeffs) if not c.is_zero())
    top = max(k for k, c in enumerate(coeffs) if not c.is_zero())
    report.degree = top
    roots: list[Root] = []
    if low:
        roots.append(Root("0", low, True))
    rest = coeffs[low:top + 1]
    if len(rest) == 2:
        val = -rest[0] / rest[1]
        roots.append(Root(val, 1, True))
    elif len(rest) > 2:
        pattern = None
        samples: list[list[list[complex]]] = []
        coords = list(structure.coordinates) if structure is not None else sorted(
            {ATOMS.atoms[i].name for c in rest for i in _all_atoms_deep(c) if ATOMS.atoms[i].kind == "coord"})
        cons = list(structure.constraints) if structure is not None else []
        for k in range(n_samples):
            try:
                inst = instantiate(coords, cons, seed=seed + k, config=OracleConfig(seed=seed))
                num = [complex(float(inst.evaluate(c))) for c in reversed(rest)]
            except DomainViolation as exc:
                report.warnings.append(f"sample {k}: {exc}")
                continue
            groups = _cluster(np.roots(num), tol)
            pat = sorted(len(g) for g in groups)
            if pattern is None:
                pattern = pat
            elif pat != pattern:
                report.warnings.append(f"root multiplicities differ at sample {k}: {pat} vs {pattern}")
            samples.append(groups)
        if samples:
            for g in sorted(samples[0], key=len, reverse=True):
                roots.append(Root(None, len(g), False, [complex(np.mean(g))]))
            for groups in samples[1:]:
                for r, g in zip([r for r in roots if not r.exact], sorted(groups, key=len, reverse=True)):
                    r.samples.append(complex(np.mean(g)))
    if top < 4:
        roots.append(Root("inf", 4 - top, True))
    overrides = overrides or {}
    for r in roots:
        key = r.label() if r.value in ("0", "inf") or r.label() in overrides else "finite"
        r.flagged = overrides.get(key, r.multiplicity > 1)
    if structure is not None:
        from .frobenius import fixed_system, prolong_and_test

        for r in roots:
            if not r.exact:
                continue
            val = "inf" if r.value == "inf" else (zero() if r.value == "0" else r.value)
            try:
                r.frobenius = prolong_and_test(fixed_system(structure, side, val), max_rounds).kind
            except Exception as exc:  # reported, not fatal
                report.warnings.append(f"root {r.label()}: {type(exc).__name__}: {exc}")
    report.roots = roots
    return report
