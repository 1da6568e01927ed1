"""Independent numeric checks: random instantiations and finite differences.

Formal functions are replaced by random quartic polynomials with rational
coefficients, coordinates by seeded points in ``[1, 2]`` kept away from the
declared domain constraints.  Nothing here uses symbolic differentiation, so
agreement with the symbolic pipeline is a genuine cross-check.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .exterior import DiffForm, ext_d
from .symcore import ATOMS, ScalarExpr, coordinate_index, eval_poly, sort_with_sign
from .symcore.expr import _qq_to_fraction


class DomainViolation(ValueError):
    pass


@dataclass
class OracleConfig:
    seed: int = 0
    n_points: int = 8
    lo: float = 1.0
    hi: float = 2.0
    margin: float = 0.1
    fd_step: float = 1e-5
    max_retries: int = 16
    zero_tol: float = 1e-9


@dataclass
class Instantiation:
    values: dict[int, object] = field(default_factory=dict)
    polys: dict[str, list[Fraction]] = field(default_factory=dict)
    rng: random.Random = field(default_factory=random.Random)

    def _atom_value(self, i: int, overrides: dict[int, float] | None):
        if overrides and i in overrides:
            return overrides[i]
        a = ATOMS.atoms[i]
        if a.kind in ("coord", "const"):
            if i not in self.values:
                self.values[i] = Fraction(self.rng.randint(1000, 2000), 1000)
            return self.values[i]
        arg = self.evaluate(a.arg, overrides)
        if a.kind == "fn":
            if a.name not in self.polys:
                self.polys[a.name] = random_quartic(self.rng)
            return poly_derivative_value(self.polys[a.name], a.order, arg)
        if a.kind == "exp":
            return math.exp(float(arg))
        if arg <= 0:
            raise DomainViolation("log of a non-positive value")
        return math.log(float(arg))

    def evaluate(self, e: ScalarExpr, overrides: dict[int, float] | None = None):
        cache: dict[int, object] = {}

        def val(i: int):
            if i not in cache:
                cache[i] = self._atom_value(i, overrides)
            return cache[i]

        float_mode = bool(overrides)
        coerce = (lambda c: float(_qq_to_fraction(c))) if float_mode else _qq_to_fraction
        den = eval_poly(e.den, val, coerce)
        if den == 0:
            raise DomainViolation("denominator vanishes at the sample point")
        return eval_poly(e.num, val, coerce) / den

    def point(self, coords: Iterable[str]) -> dict[str, float]:
        return {c: float(self.values[coordinate_index(c)]) for c in coords}


def random_quartic(rng: random.Random) -> list[Fraction]:
    return [Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(5)]


def poly_derivative_value(coeffs: Sequence[Fraction], order: int, t):
    out = 0
    for j, c in enumerate(coeffs):
        if j < order:
            continue
        fall = 1
        for s in range(order):
            fall *= j - s
        out = out + c * fall * t ** (j - order)
    return out


def instantiate(coordinates: Sequence[str], constraints: Sequence[ScalarExpr] = (),
                seed: int = 0, config: OracleConfig | None = None,
                constants: Sequence[str] = ()) -> Instantiation:
    """Sample a point satisfying every ``|constraint| >= margin``."""
    cfg = config or OracleConfig()
    rng = random.Random(seed)
    polys: dict[str, list[Fraction]] = {}
    const_vals = {}
    for c in constants:
        from .symcore import constant

        idx = next(iter(constant(c).atoms()))
        const_vals[idx] = Fraction(rng.randint(1000, 3000), 1000)
    for _ in range(cfg.max_retries):
        vals = dict(const_vals)
        for c in coordinates:
            vals[coordinate_index(c)] = Fraction(rng.randint(int(cfg.lo * 1000), int(cfg.hi * 1000)), 1000)
        inst = Instantiation(vals, polys, random.Random(rng.random()))
        try:
            ok = all(abs(float(inst.evaluate(g))) >= cfg.margin for g in constraints)
        except (DomainViolation, ZeroDivisionError):
            ok = False
        if ok:
            return inst
    raise DomainViolation(f"no admissible sample point after {cfg.max_retries} attempts")


def eval_scalar(e: ScalarExpr, inst: Instantiation):
    return inst.evaluate(e)


def magnitude(e: ScalarExpr, inst: Instantiation) -> float:
    """Scale of an expression: sum of absolute term values over the denominator."""
    cache: dict[int, float] = {}

    def val(i: int):
        if i not in cache:
            cache[i] = float(inst._atom_value(i, None))
        return cache[i]

    tot = 0.0
    for mon, c in e.num.items():
        t = abs(float(_qq_to_fraction(c)))
        for i, k in enumerate(mon):
            if k:
                t *= abs(val(i)) ** k
        tot += t
    den = abs(float(eval_poly(e.den, val, lambda c: float(_qq_to_fraction(c)))))
    return tot / den if den else math.inf


def sample_zero(e: ScalarExpr, n: int = 8, seed: int = 0, coordinates: Sequence[str] = (),
                constraints: Sequence[ScalarExpr] = (), tol: float = 1e-9) -> bool:
    """Numerically test ``e == 0`` at ``n`` seeded points."""
    coords = list(coordinates) or [ATOMS.atoms[i].name for i in sorted(e.atoms())
                                   if ATOMS.atoms[i].kind == "coord"]
    for k in range(n):
        inst = instantiate(coords, constraints, seed=seed + k)
        try:
            v = float(inst.evaluate(e))
        except DomainViolation:
            continue
        if abs(v) > tol * max(1.0, magnitude(e, inst)):
            return False
    return True


def fd_ext_d_check(a: DiffForm, inst: Instantiation, coordinates: Sequence[str], h: float = 1e-5) -> float:
    """Largest relative gap between symbolic ``d a`` and central differences."""
    xs = [coordinate_index(c) for c in coordinates]
    base = {i: float(inst._atom_value(i, None)) for i in xs}
    numeric: dict[tuple[int, ...], float] = {}
    for key, coef in a.terms.items():
        for x in xs:
            plus = dict(base)
            minus = dict(base)
            plus[x] += h
            minus[x] -= h
            deriv = (float(inst.evaluate(coef, plus)) - float(inst.evaluate(coef, minus))) / (2 * h)
            res = sort_with_sign((x,) + key)
            if res is None:
                continue
            k, s = res
            numeric[k] = numeric.get(k, 0.0) + s * deriv
    symbolic = {k: float(inst.evaluate(v)) for k, v in ext_d(a).terms.items()}
    worst = 0.0
    for k in set(numeric) | set(symbolic):
        sv, nv = symbolic.get(k, 0.0), numeric.get(k, 0.0)
        worst = max(worst, abs(sv - nv) / max(1.0, abs(sv)))
    return worst


def numeric_matrix(rows: Sequence[Sequence[ScalarExpr]], inst: Instantiation):
    import numpy as np

    return np.array([[float(inst.evaluate(v)) for v in r] for r in rows], dtype=float)
