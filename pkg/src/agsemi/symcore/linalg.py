"""Gauss-Jordan elimination over exact scalars."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .expr import ScalarExpr, as_expr


def _is_zero(v) -> bool:
    if isinstance(v, ScalarExpr):
        return v.is_zero()
    return v == 0


def _weight(v) -> int:
    if not isinstance(v, ScalarExpr):
        return 0
    if v.is_constant():
        return 1
    return 2 + len(v.num) + len(v.den)


@dataclass
class LinearSolution:
    values: list
    pivots: list[int]
    free: list[int]
    residuals: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.residuals


def solve_linear(matrix: list[list], rhs: list, ncols: int | None = None) -> LinearSolution:
    """Solve ``matrix @ x = rhs``.

    Entries may be ints, Fractions or ScalarExprs.  Free variables are set to
    zero and listed; nonzero leftovers of rows without pivots go to
    ``residuals``.
    """
    rows = [list(r) for r in matrix]
    b = [as_expr(v) for v in rhs]
    m = len(rows)
    n = ncols if ncols is not None else (len(rows[0]) if rows else 0)
    pivots: list[int] = []
    r = 0
    for c in range(n):
        best = None
        for i in range(r, m):
            if not _is_zero(rows[i][c]):
                if best is None or _weight(rows[i][c]) < _weight(rows[best][c]):
                    best = i
        if best is None:
            continue
        rows[r], rows[best] = rows[best], rows[r]
        b[r], b[best] = b[best], b[r]
        piv = rows[r][c]
        inv = (1 / piv) if isinstance(piv, ScalarExpr) else Fraction(1) / Fraction(piv)
        rows[r] = [x * inv if not _is_zero(x) else x for x in rows[r]]
        b[r] = b[r] * inv
        for i in range(m):
            if i == r or _is_zero(rows[i][c]):
                continue
            f = rows[i][c]
            rows[i] = [x - f * y if not _is_zero(y) else x for x, y in zip(rows[i], rows[r])]
            b[i] = b[i] - b[r] * f
        pivots.append(c)
        r += 1
        if r == m:
            break
    values: list = [as_expr(0)] * n
    for i, c in enumerate(pivots):
        values[c] = b[i]
    residuals = [b[i] for i in range(len(pivots), m) if not b[i].is_zero()]
    free = [c for c in range(n) if c not in pivots]
    return LinearSolution(values, pivots, free, residuals)


def inverse(matrix: list[list]) -> list[list[ScalarExpr]]:
    """Inverse of a square matrix, raising ``ZeroDivisionError`` if singular."""
    n = len(matrix)
    cols = []
    for j in range(n):
        e = [1 if i == j else 0 for i in range(n)]
        sol = solve_linear(matrix, e, n)
        if len(sol.pivots) < n:
            raise ZeroDivisionError("singular matrix")
        cols.append(sol.values)
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def determinant(matrix: list[list]) -> ScalarExpr:
    rows = [[as_expr(x) for x in r] for r in matrix]
    n = len(rows)
    det = as_expr(1)
    for c in range(n):
        p = next((i for i in range(c, n) if not rows[i][c].is_zero()), None)
        if p is None:
            return as_expr(0)
        if p != c:
            rows[c], rows[p] = rows[p], rows[c]
            det = -det
        piv = rows[c][c]
        det = det * piv
        for i in range(c + 1, n):
            if rows[i][c].is_zero():
                continue
            f = rows[i][c] / piv
            rows[i] = [x - f * y for x, y in zip(rows[i], rows[c])]
    return det
