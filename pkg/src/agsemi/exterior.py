"""Differential forms in a coordinate basis and frame expansions."""

from __future__ import annotations

from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .symcore import (
    ATOMS,
    Graded,
    ParseContext,
    ScalarExpr,
    as_expr,
    coordinate_index,
    coordinate_support,
    diff,
    inverse,
    parse_graded,
    solve_linear,
    sort_with_sign,
    zero,
)


class NotSolvable(Exception):
    """The system cannot be solved for the requested differentials."""


class FrameError(Exception):
    pass


class DiffForm:
    """A homogeneous k-form ``sum c_I dx_I`` keyed by sorted coordinate atom indices."""

    __slots__ = ("degree", "terms")

    def __init__(self, degree: int, terms: Mapping[tuple[int, ...], ScalarExpr] | None = None) -> None:
        self.degree = degree
        clean = {}
        for k, v in (terms or {}).items():
            v = as_expr(v)
            if len(k) != degree:
                raise ValueError(f"term {k} does not have degree {degree}")
            if not v.is_zero():
                clean[k] = v
        self.terms = clean

    @staticmethod
    def d(name: str) -> "DiffForm":
        return DiffForm(1, {(coordinate_index(name),): as_expr(1)})

    @staticmethod
    def scalar(e) -> "DiffForm":
        return DiffForm(0, {(): as_expr(e)})

    @staticmethod
    def from_graded(g: Graded, degree: int | None = None) -> "DiffForm":
        deg = g.degree()
        if deg is None:
            deg = degree if degree is not None else 0
        return DiffForm(deg, g.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "DiffForm") -> "DiffForm":
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return DiffForm(self.degree, out)

    def __neg__(self) -> "DiffForm":
        return DiffForm(self.degree, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other: "DiffForm") -> "DiffForm":
        return self + (-other)

    def scale(self, c) -> "DiffForm":
        c = as_expr(c)
        return DiffForm(self.degree, {k: v * c for k, v in self.terms.items()})

    __rmul__ = scale

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiffForm):
            return NotImplemented
        return (self - other).is_zero() if self.degree == other.degree else False

    def coeff(self, *names: str) -> ScalarExpr:
        """Coefficient on ``d names[0] ^ d names[1] ^ ...`` with sign."""
        idx = tuple(coordinate_index(n) for n in names)
        res = sort_with_sign(idx)
        if res is None:
            return zero()
        key, sgn = res
        v = self.terms.get(key, zero())
        return v if sgn > 0 else -v

    def map_coeffs(self, fn) -> "DiffForm":
        return DiffForm(self.degree, {k: fn(v) for k, v in self.terms.items()})

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for k in sorted(self.terms):
            basis = "^".join("d" + ATOMS.atoms[i].name for i in k)
            parts.append(f"({self.terms[k]})*{basis}" if basis else f"({self.terms[k]})")
        return " + ".join(parts)

    __repr__ = __str__


def wedge(a: DiffForm, b: DiffForm) -> DiffForm:
    out: dict[tuple[int, ...], ScalarExpr] = {}
    for ka, va in a.terms.items():
        for kb, vb in b.terms.items():
            res = sort_with_sign(ka + kb)
            if res is None:
                continue
            key, sgn = res
            v = va * vb
            if sgn < 0:
                v = -v
            out[key] = out[key] + v if key in out else v
    return DiffForm(a.degree + b.degree, out)


def wedge_all(forms: Sequence[DiffForm]) -> DiffForm:
    acc = DiffForm.scalar(1)
    for f in forms:
        acc = wedge(acc, f)
    return acc


def ext_d(a: DiffForm) -> DiffForm:
    out: dict[tuple[int, ...], ScalarExpr] = {}
    for k, v in a.terms.items():
        for x in coordinate_support(v):
            dv = diff(v, x)
            if dv.is_zero():
                continue
            res = sort_with_sign((x,) + k)
            if res is None:
                continue
            key, sgn = res
            t = dv if sgn > 0 else -dv
            out[key] = out[key] + t if key in out else t
    return DiffForm(a.degree + 1, out)


def parse_form(text: str, coordinates: Sequence[str], functions: Mapping[str, str] | None = None,
               constants: Sequence[str] = ()) -> DiffForm:
    """Parse a form written in coordinate differentials, e.g. ``x*dy + f(u)*dv``."""
    ctx = ParseContext(tuple(coordinates), dict(functions or {}), tuple(constants), differentials=True)
    return DiffForm.from_graded(parse_graded(text, ctx), degree=1)


class Frame:
    """A coframe ``theta_A = sum_m E[A][m] dx_m`` on an ordered coordinate list."""

    def __init__(self, forms: Sequence[DiffForm], coordinates: Sequence[str]) -> None:
        self.forms = list(forms)
        self.coords = [coordinate_index(c) for c in coordinates]
        n = len(self.coords)
        if len(self.forms) != n:
            raise FrameError(f"{len(self.forms)} forms for {n} coordinates")
        for f in self.forms:
            if f.degree != 1:
                raise FrameError("coframe entries must be 1-forms")
            stray = {k[0] for k in f.terms} - set(self.coords)
            if stray:
                raise FrameError("coframe uses differentials of undeclared coordinates")
        self.E = [[f.terms.get((x,), zero()) for x in self.coords] for f in self.forms]
        self._inv = None
        self._dtheta = None

    @property
    def n(self) -> int:
        return len(self.forms)

    @property
    def Einv(self) -> list[list[ScalarExpr]]:
        if self._inv is None:
            try:
                self._inv = inverse(self.E)
            except ZeroDivisionError as exc:
                raise FrameError("coframe is degenerate") from exc
        return self._inv

    def components(self, a: DiffForm) -> list[ScalarExpr]:
        """Coefficients of a 1-form on the coframe."""
        inv = self.Einv
        pos = {x: m for m, x in enumerate(self.coords)}
        out = [zero()] * self.n
        for (x,), c in a.terms.items():
            m = pos[x]
            for A in range(self.n):
                if not inv[m][A].is_zero():
                    out[A] = out[A] + c * inv[m][A]
        return out

    def expand_2form(self, a: DiffForm, convention: str = "full") -> dict[tuple[int, int], ScalarExpr]:
        """Full coframe coefficients ``G[A, B]`` with ``a = sum_{A<B} G[A,B] theta_A^theta_B``.

        Both orders are returned, with ``G[B, A] = -G[A, B]``.  With
        ``convention="half"`` the values are halved, so that
        ``a = sum_{A,B} G[A,B] theta_A^theta_B`` over all ordered pairs.
        """
        if convention not in ("full", "half"):
            raise ValueError(f"unknown convention {convention!r}")
        inv = self.Einv
        pos = {x: m for m, x in enumerate(self.coords)}
        G: dict[tuple[int, int], ScalarExpr] = {}
        for (x, y), c in a.terms.items():
            m, k = pos[x], pos[y]
            for A, B in combinations(range(self.n), 2):
                w = inv[m][A] * inv[k][B] - inv[m][B] * inv[k][A]
                if w.is_zero():
                    continue
                G[(A, B)] = G[(A, B)] + c * w if (A, B) in G else c * w
        out: dict[tuple[int, int], ScalarExpr] = {}
        for A, B in combinations(range(self.n), 2):
            v = G.get((A, B), zero())
            if convention == "half":
                v = v / 2
            out[(A, B)] = v
            out[(B, A)] = -v
        return out

    def to_form(self, comps: Sequence[ScalarExpr]) -> DiffForm:
        acc = DiffForm(1)
        for c, f in zip(comps, self.forms):
            if not as_expr(c).is_zero():
                acc = acc + f.scale(c)
        return acc

    def d_scalar(self, c: ScalarExpr) -> list[ScalarExpr]:
        """Coframe components of ``dc``."""
        inv = self.Einv
        out = [zero()] * self.n
        for m, x in enumerate(self.coords):
            dc = diff(c, x)
            if dc.is_zero():
                continue
            for A in range(self.n):
                if not inv[m][A].is_zero():
                    out[A] = out[A] + dc * inv[m][A]
        return out

    @property
    def structure(self) -> list[dict[tuple[int, int], ScalarExpr]]:
        """``dtheta_A`` expanded on the coframe."""
        if self._dtheta is None:
            self._dtheta = [self.expand_2form(ext_d(f)) for f in self.forms]
        return self._dtheta


def expand_2form(a: DiffForm, frame: Frame | Sequence[DiffForm], coordinates: Sequence[str] | None = None,
                 convention: str = "full"):
    if not isinstance(frame, Frame):
        frame = Frame(frame, coordinates)
    return frame.expand_2form(a, convention)


def substitute_differentials(a: DiffForm, images: Mapping[int, DiffForm]) -> DiffForm:
    """Replace ``dx`` by ``images[x]`` for the listed coordinates."""
    out = DiffForm(a.degree)
    for k, v in a.terms.items():
        acc = DiffForm.scalar(v)
        for x in k:
            acc = wedge(acc, images.get(x) or DiffForm(1, {(x,): as_expr(1)}))
        out = out + acc
    return out


def solve_for_differentials(system: Sequence[DiffForm], solved: Sequence[int]) -> dict[int, DiffForm]:
    """Solve ``system = 0`` for the differentials of ``solved`` coordinates.

    Returns, for each solved coordinate, its differential as a combination of
    the remaining differentials.
    """
    system = [s for s in system if not s.is_zero()]
    if len(system) != len(solved):
        raise NotSolvable(f"{len(system)} forms for {len(solved)} differentials")
    others = sorted({k[0] for s in system for k in s.terms} - set(solved))
    M = [[s.terms.get((x,), zero()) for x in solved] for s in system]
    images: dict[int, DiffForm] = {}
    for col, y in enumerate(others):
        rhs = [-s.terms.get((y,), zero()) for s in system]
        sol = solve_linear(M, rhs, len(solved))
        if len(sol.pivots) < len(solved):
            raise NotSolvable("system is singular in the requested differentials")
        for j, x in enumerate(solved):
            images.setdefault(x, DiffForm(1))
            images[x] = images[x] + DiffForm(1, {(y,): sol.values[j]})
    if not others:
        sol = solve_linear(M, [zero()] * len(system), len(solved))
        if len(sol.pivots) < len(solved):
            raise NotSolvable("system is singular in the requested differentials")
    for x in solved:
        images.setdefault(x, DiffForm(1))
    return images


def reduce_mod(a: DiffForm, system: Sequence[DiffForm], solved: Sequence[int | str]) -> DiffForm:
    """Reduce ``a`` modulo the algebraic ideal of ``system``."""
    solved_idx = [coordinate_index(s) if isinstance(s, str) else s for s in solved]
    images = solve_for_differentials(system, solved_idx)
    return substitute_differentials(a, images)


def coordinate_form_keys(forms: Iterable[DiffForm]) -> set[int]:
    return {i for f in forms for k in f.terms for i in k}
