"""Recursive-descent parser for scalar and 1-/2-form expressions.

Grammar (whitespace insensitive)::

    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/' | '/\\' | '∧') unary | juxtaposed unary)*
    unary   := ('+' | '-') unary | power
    power   := atom ('^' | '**') unary
    atom    := number | '(' sum ')' | name
             | fname "'"* '(' sum ')' | 'D' '(' fname ',' int ')' '(' sum ')'
             | ('exp' | 'log' | 'd') '(' sum ')'

Names resolve to coordinates, declared constants, basis 1-forms, or ``d<coord>``
differentials, in that order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .expr import (
    NonIntegerExponent,
    ScalarExpr,
    SymbolicError,
    constant,
    coordinate,
    coordinate_index,
    diff,
    exp,
    fderiv,
    log,
    coordinate_support,
)


class UndeclaredIdentifier(SymbolicError):
    def __init__(self, name: str, pos: int) -> None:
        super().__init__(f"undeclared identifier {name!r} at offset {pos}")
        self.name = name
        self.pos = pos


class ExprSyntaxError(SymbolicError):
    def __init__(self, msg: str, pos: int) -> None:
        super().__init__(f"{msg} at offset {pos}")
        self.pos = pos


class DegreeMismatch(SymbolicError):
    pass


@dataclass
class ParseContext:
    coordinates: tuple[str, ...] = ()
    functions: dict[str, str] = field(default_factory=dict)
    constants: tuple[str, ...] = ()
    basis: dict[str, int] | None = None
    differentials: bool = False


class Graded:
    """Element of an exterior algebra over an ordered, named basis."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[tuple[int, ...], ScalarExpr] | None = None) -> None:
        self.terms = {k: v for k, v in (terms or {}).items() if not v.is_zero()}

    @staticmethod
    def scalar(e: ScalarExpr) -> "Graded":
        return Graded({(): e})

    def degree(self) -> int | None:
        degs = {len(k) for k in self.terms}
        if not degs:
            return None
        if len(degs) > 1:
            raise DegreeMismatch("mixed-degree form")
        return degs.pop()

    def __add__(self, other: "Graded") -> "Graded":
        a, b = self.degree(), other.degree()
        if a is not None and b is not None and a != b:
            raise DegreeMismatch(f"cannot add forms of degree {a} and {b}")
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return Graded(out)

    def __neg__(self) -> "Graded":
        return Graded({k: -v for k, v in self.terms.items()})

    def scale(self, c: ScalarExpr) -> "Graded":
        return Graded({k: v * c for k, v in self.terms.items()})

    def wedge(self, other: "Graded") -> "Graded":
        out: dict[tuple[int, ...], ScalarExpr] = {}
        for ka, va in self.terms.items():
            for kb, vb in other.terms.items():
                merged = sort_with_sign(ka + kb)
                if merged is None:
                    continue
                key, sgn = merged
                v = va * vb if sgn > 0 else -(va * vb)
                out[key] = out[key] + v if key in out else v
        return Graded(out)


def sort_with_sign(idx: tuple[int, ...]) -> tuple[tuple[int, ...], int] | None:
    """Sort a multi-index, returning the permutation sign, or None on repeats."""
    if len(set(idx)) != len(idx):
        return None
    arr = list(idx)
    sgn = 1
    for i in range(len(arr)):
        for j in range(len(arr) - 1 - i):
            if arr[j] > arr[j + 1]:
                arr[j], arr[j + 1] = arr[j + 1], arr[j]
                sgn = -sgn
    return tuple(arr), sgn


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>\*\*|/\\|∧|[-+*/^(),']))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            bad = len(text[pos:]) - len(text[pos:].lstrip()) + pos
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        val = m.group(kind)
        if val == "**":
            val = "^"
        if val == "∧":
            val = "/\\"
        toks.append((kind, val, start))
        pos = m.end()
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str, ctx: ParseContext) -> None:
        self.text = text
        self.ctx = ctx
        self.toks = _tokenize(text)
        self.i = 0
        self.coords = set(ctx.coordinates)

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def take(self) -> tuple[str, str, int]:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, val: str) -> None:
        kind, v, pos = self.take()
        if v != val or kind == "name":
            raise ExprSyntaxError(f"expected {val!r}, found {v or 'end of input'!r}", pos)

    def parse(self) -> Graded:
        g = self.sum()
        kind, v, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {v!r}", pos)
        return g

    def sum(self) -> Graded:
        acc = self.product()
        while True:
            _, v, _ = self.peek()
            if v == "+":
                self.take()
                acc = acc + self.product()
            elif v == "-":
                self.take()
                acc = acc + (-self.product())
            else:
                return acc

    def _starts_atom(self) -> bool:
        kind, v, _ = self.peek()
        return kind in ("num", "name") or v == "("

    def product(self) -> Graded:
        acc = self.unary()
        while True:
            kind, v, pos = self.peek()
            if v == "*":
                self.take()
                acc = _mul(acc, self.unary(), pos)
            elif v == "/\\":
                self.take()
                acc = acc.wedge(self.unary())
            elif v == "/":
                self.take()
                rhs = self.unary()
                if rhs.degree() not in (0, None):
                    raise DegreeMismatch("cannot divide by a form of positive degree")
                den = rhs.terms.get((), None)
                if den is None:
                    raise ExprSyntaxError("division by zero", pos)
                acc = acc.scale(1 / den)
            elif self._starts_atom():
                acc = _mul(acc, self.unary(), pos)
            else:
                return acc

    def unary(self) -> Graded:
        _, v, _ = self.peek()
        if v == "-":
            self.take()
            return -self.unary()
        if v == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Graded:
        base = self.atom()
        _, v, pos = self.peek()
        if v != "^":
            return base
        self.take()
        ex = self.unary()
        e = _as_scalar(ex, pos)
        if not e.is_constant() or e.constant_value().denominator != 1:
            raise NonIntegerExponent(f"exponent must be an integer constant at offset {pos}")
        b = _as_scalar(base, pos)
        return Graded.scalar(b ** int(e.constant_value()))

    def atom(self) -> Graded:
        kind, v, pos = self.take()
        if kind == "num":
            return Graded.scalar(ScalarExpr.const(Fraction(v)))
        if v == "(":
            g = self.sum()
            self.expect(")")
            return g
        if kind != "name":
            raise ExprSyntaxError(f"unexpected token {v or 'end of input'!r}", pos)
        return self.name(v, pos)

    def _call_arg(self) -> ScalarExpr:
        self.expect("(")
        _, _, pos = self.peek()
        g = self.sum()
        self.expect(")")
        return _as_scalar(g, pos)

    def name(self, v: str, pos: int) -> Graded:
        ctx = self.ctx
        nxt = self.peek()[1]
        if v in self.coords:
            return Graded.scalar(coordinate(v))
        if v in ctx.constants:
            return Graded.scalar(constant(v))
        if ctx.basis is not None and v in ctx.basis:
            return Graded({(ctx.basis[v],): ScalarExpr.const(1)})
        if ctx.differentials and v.startswith("d") and v[1:] in self.coords:
            return Graded({(coordinate_index(v[1:]),): ScalarExpr.const(1)})
        if v in ("exp", "log") and nxt == "(":
            arg = self._call_arg()
            return Graded.scalar(exp(arg) if v == "exp" else log(arg))
        if v == "d" and nxt == "(" and ctx.differentials:
            arg = self._call_arg()
            terms = {}
            for x in coordinate_support(arg):
                dx = diff(arg, x)
                if not dx.is_zero():
                    terms[(x,)] = dx
            return Graded(terms)
        if v == "D" and nxt == "(":
            self.take()
            _, fname, fpos = self.take()
            if fname not in ctx.functions:
                raise UndeclaredIdentifier(fname, fpos)
            self.expect(",")
            k, kv, kpos = self.take()
            if k != "num" or not kv.isdigit():
                raise ExprSyntaxError("derivative order must be an integer", kpos)
            self.expect(")")
            arg = self._call_arg()
            return Graded.scalar(fderiv(fname, int(kv), arg))
        if v in ctx.functions and nxt in ("(", "'"):
            order = 0
            while self.peek()[1] == "'":
                self.take()
                order += 1
            arg = self._call_arg()
            return Graded.scalar(fderiv(v, order, arg))
        raise UndeclaredIdentifier(v, pos)


def _as_scalar(g: Graded, pos: int) -> ScalarExpr:
    d = g.degree()
    if d not in (0, None):
        raise DegreeMismatch(f"expected a scalar at offset {pos}")
    return g.terms.get((), ScalarExpr.const(0))


def _mul(a: Graded, b: Graded, pos: int) -> Graded:
    da, db = a.degree(), b.degree()
    if da in (0, None):
        return b.scale(a.terms.get((), ScalarExpr.const(0)))
    if db in (0, None):
        return a.scale(b.terms.get((), ScalarExpr.const(0)))
    raise DegreeMismatch(f"product of two forms at offset {pos}; use /\\ for the wedge")


def parse_graded(text: str, ctx: ParseContext) -> Graded:
    return _Parser(text, ctx).parse()


def parse_scalar(text: str, ctx: ParseContext | None = None) -> ScalarExpr:
    ctx = ctx or ParseContext()
    g = parse_graded(text, ParseContext(ctx.coordinates, ctx.functions, ctx.constants))
    return _as_scalar(g, 0)
