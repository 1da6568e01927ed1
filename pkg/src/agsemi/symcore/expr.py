"""Exact scalar expressions.

A scalar is a quotient of two polynomials with rational coefficients in a
growing table of atoms.  Atoms are coordinates, constants, derivatives of
formal one-variable functions, and ``exp``/``log`` of canonical arguments.
Numerator and denominator are kept coprime with a monic denominator, so
structural equality is mathematical equality for the supported fragment.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from sympy import QQ
from sympy.polys.rings import PolyRing


class SymbolicError(Exception):
    """Base class for errors raised by the symbolic core."""


class NonIntegerExponent(SymbolicError):
    pass


@dataclass(frozen=True)
class Atom:
    kind: str  # 'coord' | 'const' | 'fn' | 'exp' | 'log'
    name: str = ""
    order: int = 0
    arg: "ScalarExpr | None" = None

    @property
    def key(self) -> tuple:
        return (self.kind, self.name, self.order, None if self.arg is None else self.arg.key)

    def display(self) -> str:
        if self.kind in ("coord", "const"):
            return self.name
        if self.kind == "fn":
            a = str(self.arg)
            if self.order <= 2:
                return f"{self.name}{chr(39) * self.order}({a})"
            return f"D({self.name},{self.order})({a})"
        return f"{self.kind}({self.arg})"


class _AtomTable:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.atoms: list[Atom] = []
        self.index: dict[tuple, int] = {}
        self._rings: dict[int, PolyRing] = {}

    def intern(self, atom: Atom) -> int:
        k = atom.key
        i = self.index.get(k)
        if i is not None:
            return i
        with self._lock:
            i = self.index.get(k)
            if i is None:
                i = len(self.atoms)
                self.atoms.append(atom)
                self.index[k] = i
        return i

    def ring(self, n: int) -> PolyRing:
        r = self._rings.get(n)
        if r is None:
            r = PolyRing([f"a{i}" for i in range(n)], QQ)
            self._rings[n] = r
        return r


ATOMS = _AtomTable()


def _lift(p, n: int):
    """Move polynomial ``p`` into the ring with ``n`` generators."""
    m = p.ring.ngens
    if m == n:
        return p
    ring = ATOMS.ring(n)
    pad = (0,) * (n - m)
    return ring.from_dict({mon + pad: c for mon, c in p.items()})


def _sparse(p) -> tuple:
    return tuple(sorted(
        (tuple((i, e) for i, e in enumerate(mon) if e), c) for mon, c in p.items()
    ))


class ScalarExpr:
    __slots__ = ("num", "den", "_key", "_hash")

    def __init__(self, num, den=None, *, _canonical: bool = False) -> None:
        if den is None:
            den = num.ring.one
        if num.ring.ngens != den.ring.ngens:
            n = max(num.ring.ngens, den.ring.ngens)
            num, den = _lift(num, n), _lift(den, n)
        if not _canonical:
            if not den:
                raise ZeroDivisionError("division by zero expression")
            if not num:
                den = num.ring.one
            elif not den.is_ground or den.LC != 1:
                num, den = num.cancel(den)
                lc = den.LC
                if lc != 1:
                    num = num.quo_ground(lc)
                    den = den.quo_ground(lc)
        self.num = num
        self.den = den
        self._key = None
        self._hash = None

    # construction -----------------------------------------------------
    @staticmethod
    def const(value) -> "ScalarExpr":
        if isinstance(value, ScalarExpr):
            return value
        if isinstance(value, float):
            value = Fraction(value)
        if isinstance(value, Fraction):
            q = QQ(value.numerator, value.denominator)
        else:
            q = QQ(value)
        ring = ATOMS.ring(len(ATOMS.atoms))
        return ScalarExpr(ring.ground_new(q), ring.one, _canonical=True)

    @staticmethod
    def atom(index: int) -> "ScalarExpr":
        ring = ATOMS.ring(len(ATOMS.atoms))
        return ScalarExpr(ring.gens[index], ring.one, _canonical=True)

    # structure --------------------------------------------------------
    @property
    def key(self) -> tuple:
        if self._key is None:
            self._key = (_sparse(self.num), _sparse(self.den))
        return self._key

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.key)
        return self._hash

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScalarExpr):
            try:
                other = ScalarExpr.const(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self.key == other.key

    def is_zero(self) -> bool:
        return not self.num

    def __bool__(self) -> bool:
        return bool(self.num)

    def is_constant(self) -> bool:
        return self.num.is_ground and self.den.is_ground

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("expression is not constant")
        c = QQ.to_sympy(self.num.LC if self.num else QQ(0))
        return Fraction(int(c.p), int(c.q))

    def atoms(self) -> set[int]:
        out: set[int] = set()
        for p in (self.num, self.den):
            for mon in p.itermonoms():
                out.update(i for i, e in enumerate(mon) if e)
        return out

    def is_polynomial(self) -> bool:
        return self.den.is_ground

    # arithmetic -------------------------------------------------------
    def _pair(self, other):
        if not isinstance(other, ScalarExpr):
            other = ScalarExpr.const(other)
        n = max(self.num.ring.ngens, other.num.ring.ngens)
        return (_lift(self.num, n), _lift(self.den, n), _lift(other.num, n), _lift(other.den, n))

    def __add__(self, other) -> "ScalarExpr":
        if not isinstance(other, (ScalarExpr, int, Fraction)):
            return NotImplemented
        a, b, c, d = self._pair(other)
        if b == d:
            return ScalarExpr(a + c, b)
        return ScalarExpr(a * d + c * b, b * d)

    __radd__ = __add__

    def __neg__(self) -> "ScalarExpr":
        return ScalarExpr(-self.num, self.den, _canonical=True)

    def __sub__(self, other) -> "ScalarExpr":
        if not isinstance(other, (ScalarExpr, int, Fraction)):
            return NotImplemented
        return self + (-ScalarExpr.const(other))

    def __rsub__(self, other) -> "ScalarExpr":
        return ScalarExpr.const(other) - self

    def __mul__(self, other) -> "ScalarExpr":
        if not isinstance(other, (ScalarExpr, int, Fraction)):
            return NotImplemented
        a, b, c, d = self._pair(other)
        if b == 1 and d == 1:
            return ScalarExpr(a * c, b, _canonical=True)
        return ScalarExpr(a * c, b * d)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ScalarExpr":
        if not isinstance(other, (ScalarExpr, int, Fraction)):
            return NotImplemented
        a, b, c, d = self._pair(other)
        return ScalarExpr(a * d, b * c)

    def __rtruediv__(self, other) -> "ScalarExpr":
        return ScalarExpr.const(other) / self

    def __pow__(self, k) -> "ScalarExpr":
        if isinstance(k, Fraction) and k.denominator == 1:
            k = int(k)
        if not isinstance(k, int):
            raise NonIntegerExponent(f"exponent {k!r} is not an integer")
        if k >= 0:
            return ScalarExpr(self.num**k, self.den**k, _canonical=True)
        if not self.num:
            raise ZeroDivisionError("zero to a negative power")
        return ScalarExpr(self.den ** (-k), self.num ** (-k))

    # printing ---------------------------------------------------------
    def __str__(self) -> str:
        num = _poly_str(self.num)
        if self.den == 1:
            return num
        den = _poly_str(self.den)
        if len(self.num) > 1:
            num = f"({num})"
        if len(self.den) > 1 or not _is_single_factor(self.den):
            den = f"({den})"
        return f"{num}/{den}"

    def __repr__(self) -> str:
        return f"ScalarExpr({self})"

    def to_sympy(self):
        import sympy

        syms = {i: sympy.Symbol(ATOMS.atoms[i].display()) for i in self.atoms()}

        def conv(p):
            out = sympy.Integer(0)
            for mon, c in p.items():
                t = QQ.to_sympy(c)
                for i, e in enumerate(mon):
                    if e:
                        t *= syms[i] ** e
                out += t
            return out

        return conv(self.num) / conv(self.den)

    def pretty(self) -> str:
        import sympy

        return str(sympy.factor(self.to_sympy()))


def _is_single_factor(p) -> bool:
    if len(p) != 1:
        return False
    ((mon, c),) = p.items()
    return c == 1 and sum(1 for e in mon if e) == 1 and max(mon) == 1


def _poly_str(p) -> str:
    if not p:
        return "0"
    parts = []
    for mon, c in sorted(p.items(), reverse=True):
        factors = []
        for i, e in enumerate(mon):
            if e:
                name = ATOMS.atoms[i].display()
                factors.append(name if e == 1 else f"{name}^{e}")
        cs = str(QQ.to_sympy(c))
        neg = cs.startswith("-")
        mag = cs[1:] if neg else cs
        if factors:
            body = "*".join(factors)
            if mag != "1":
                body = f"{mag}*{body}"
        else:
            body = mag
        parts.append((neg, body))
    out = ("-" if parts[0][0] else "") + parts[0][1]
    for neg, body in parts[1:]:
        out += (" - " if neg else " + ") + body
    return out


def zero() -> ScalarExpr:
    return ScalarExpr.const(0)


def one() -> ScalarExpr:
    return ScalarExpr.const(1)


def as_expr(v) -> ScalarExpr:
    return v if isinstance(v, ScalarExpr) else ScalarExpr.const(v)


# atom constructors ------------------------------------------------------

def coordinate(name: str) -> ScalarExpr:
    return ScalarExpr.atom(ATOMS.intern(Atom("coord", name)))


def coordinate_index(name: str) -> int:
    return ATOMS.intern(Atom("coord", name))


def constant(name: str) -> ScalarExpr:
    return ScalarExpr.atom(ATOMS.intern(Atom("const", name)))


def fderiv(name: str, order: int, arg: ScalarExpr) -> ScalarExpr:
    return ScalarExpr.atom(ATOMS.intern(Atom("fn", name, order, as_expr(arg))))


def _is_integer(q) -> bool:
    return QQ.to_sympy(q).q == 1


def exp(arg) -> ScalarExpr:
    """``exp`` with integer multiples of polynomial monomials split off.

    ``exp(-2*x)`` becomes ``exp(x)^-2`` so products of exponentials cancel.
    """
    arg = as_expr(arg)
    if arg.is_zero():
        return one()
    if not arg.is_polynomial():
        return ScalarExpr.atom(ATOMS.intern(Atom("exp", arg=arg)))
    ring = arg.num.ring
    out = one()
    rest = ring.zero
    for mon, c in arg.num.items():
        if _is_integer(c) and any(mon):
            base = ScalarExpr(ring.from_dict({mon: QQ(1)}), ring.one, _canonical=True)
            out = out * ScalarExpr.atom(ATOMS.intern(Atom("exp", arg=base))) ** int(QQ.to_sympy(c))
        else:
            rest += ring.from_dict({mon: c})
    if rest:
        out = out * ScalarExpr.atom(ATOMS.intern(Atom("exp", arg=ScalarExpr(rest, ring.one))))
    return out


def log(arg) -> ScalarExpr:
    arg = as_expr(arg)
    if arg == 1:
        return zero()
    return ScalarExpr.atom(ATOMS.intern(Atom("log", arg=arg)))


def atom_of(index: int) -> Atom:
    return ATOMS.atoms[index]


def find_atom(kind: str, name: str) -> int | None:
    return ATOMS.index.get((kind, name, 0, None))


# dependency and differentiation ------------------------------------------

_support_cache: dict[int, frozenset[int]] = {}


def _atom_support(i: int) -> frozenset[int]:
    s = _support_cache.get(i)
    if s is None:
        a = ATOMS.atoms[i]
        if a.kind == "coord":
            s = frozenset((i,))
        elif a.kind == "const":
            s = frozenset()
        else:
            s = coordinate_support(a.arg)
        _support_cache[i] = s
    return s


def coordinate_support(e: ScalarExpr) -> frozenset[int]:
    """Coordinate atoms that ``e`` depends on, looking through function arguments."""
    out: set[int] = set()
    for i in e.atoms():
        out |= _atom_support(i)
    return frozenset(out)


_dcache: dict[tuple[int, int], ScalarExpr] = {}


def _atom_derivative(i: int, x: int) -> ScalarExpr:
    k = (i, x)
    r = _dcache.get(k)
    if r is not None:
        return r
    a = ATOMS.atoms[i]
    if a.kind == "coord":
        r = one() if i == x else zero()
    elif a.kind == "const":
        r = zero()
    elif a.kind == "fn":
        r = fderiv(a.name, a.order + 1, a.arg) * diff(a.arg, x)
    elif a.kind == "exp":
        r = ScalarExpr.atom(i) * diff(a.arg, x)
    else:
        r = diff(a.arg, x) / a.arg
    _dcache[k] = r
    return r


def diff(e: ScalarExpr, x: int | str) -> ScalarExpr:
    """Partial derivative of ``e`` by the coordinate atom ``x``."""
    if isinstance(x, str):
        x = coordinate_index(x)
    total = zero()
    if x not in coordinate_support(e):
        return total
    n = max(e.num.ring.ngens, len(ATOMS.atoms))
    num, den = _lift(e.num, n), _lift(e.den, n)
    gens = ATOMS.ring(n).gens
    # polynomial chain factors share the denominator den^2, so they are
    # summed first and cancelled once
    acc = ATOMS.ring(n).zero
    for i in sorted(e.atoms()):
        if x not in _atom_support(i):
            continue
        da = _atom_derivative(i, x)
        if da.is_zero():
            continue
        g = gens[i]
        top = num.diff(g) * den - num * den.diff(g)
        if not top:
            continue
        if da.den.is_ground and da.den.LC == 1:
            m = max(n, da.num.ring.ngens)
            acc = _lift(acc, m) + _lift(top, m) * _lift(da.num, m)
        else:
            total = total + ScalarExpr(top, den * den) * da
    if acc:
        total = total + ScalarExpr(acc, den * den)
    return total


# substitution and evaluation ---------------------------------------------

def eval_poly(p, value_of: Callable[[int], object], coerce: Callable = lambda c: c):
    """Evaluate polynomial ``p`` given values for atoms and a coefficient map."""
    acc = None
    powers: dict[tuple[int, int], object] = {}
    for mon, c in p.items():
        t = coerce(c)
        for i, e in enumerate(mon):
            if e:
                pk = powers.get((i, e))
                if pk is None:
                    pk = value_of(i) ** e
                    powers[(i, e)] = pk
                t = t * pk
        acc = t if acc is None else acc + t
    return acc if acc is not None else coerce(QQ(0))


def _qq_to_fraction(c) -> Fraction:
    c = QQ.to_sympy(c)
    return Fraction(int(c.p), int(c.q))


def subs(e: ScalarExpr, mapping: Mapping[int, ScalarExpr]) -> ScalarExpr:
    """Replace atoms by expressions, recursing into function arguments."""
    if not mapping:
        return e
    memo: dict[int, ScalarExpr] = {}
    keys = set(mapping)

    def value_of(i: int) -> ScalarExpr:
        v = memo.get(i)
        if v is not None:
            return v
        if i in mapping:
            v = as_expr(mapping[i])
        else:
            a = ATOMS.atoms[i]
            if a.arg is not None and (_all_atoms_deep(a.arg) & keys):
                new = subs(a.arg, mapping)
                if a.kind == "fn":
                    v = fderiv(a.name, a.order, new)
                elif a.kind == "exp":
                    v = exp(new)
                else:
                    v = log(new)
            else:
                v = ScalarExpr.atom(i)
        memo[i] = v
        return v

    def conv(c):
        return ScalarExpr.const(_qq_to_fraction(c))

    return eval_poly(e.num, value_of, conv) / eval_poly(e.den, value_of, conv)


def specialize_function(e: ScalarExpr, name: str, coeffs: Iterable) -> ScalarExpr:
    """Replace formal function ``name`` by the polynomial ``sum c_j t^j``."""
    coeffs = [as_expr(c) for c in coeffs]
    mapping: dict[int, ScalarExpr] = {}

    def poly_derivative(order: int, arg: ScalarExpr) -> ScalarExpr:
        out = zero()
        for j, c in enumerate(coeffs):
            if j < order:
                continue
            fall = 1
            for t in range(order):
                fall *= j - t
            out = out + c * fall * arg ** (j - order)
        return out

    for i, a in enumerate(list(ATOMS.atoms)):
        if a.kind == "fn" and a.name == name and i in _all_atoms_deep(e):
            mapping[i] = poly_derivative(a.order, specialize_function(a.arg, name, coeffs))
    return subs(e, mapping)


def _all_atoms_deep(e: ScalarExpr) -> set[int]:
    out = set()
    for i in e.atoms():
        out.add(i)
        a = ATOMS.atoms[i]
        if a.arg is not None:
            out |= _all_atoms_deep(a.arg)
    return out


def function_atoms(e: ScalarExpr) -> set[int]:
    """Formal-function atoms occurring anywhere in ``e``."""
    return {i for i in _all_atoms_deep(e) if ATOMS.atoms[i].kind == "fn"}


def polynomial_factors(p) -> list[tuple[object, int]]:
    """Irreducible factors of a polynomial over the rationals."""
    _, facs = p.factor_list()
    return facs


def expr_from_poly(p) -> ScalarExpr:
    return ScalarExpr(p, p.ring.one)


def numerator_factors(e: ScalarExpr) -> list[tuple[ScalarExpr, int]]:
    """Irreducible factors of the numerator, constants dropped."""
    if e.is_zero():
        return []
    return [(expr_from_poly(f), k) for f, k in polynomial_factors(e.num) if not f.is_ground]


def degree_in(e: ScalarExpr, var: int) -> int:
    """Degree of the numerator in atom ``var`` (0 if absent)."""
    if var >= e.num.ring.ngens:
        return 0
    return max(0, e.num.degree(e.num.ring.gens[var]))


def pseudo_remainder(e: ScalarExpr, rel: ScalarExpr, var: int) -> ScalarExpr:
    """Numerator of ``e`` pseudo-reduced by the numerator of ``rel`` in atom ``var``."""
    n = max(e.num.ring.ngens, rel.num.ring.ngens, var + 1)
    a, b = _lift(e.num, n), _lift(rel.num, n)
    return expr_from_poly(a.prem(b, ATOMS.ring(n).gens[var]))
