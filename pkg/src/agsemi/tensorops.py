"""Tensors with Greek (1..p) and Latin (p+1..p+q) indices.

Alternation and symmetrization act on *vertical pairs*: an upper Greek slot
glued to a lower Latin slot, permuted together.  Data live in numpy object
arrays so the same code handles Fractions and exact symbolic scalars.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations, product
from typing import Sequence

import numpy as np

from .symcore import ScalarExpr, as_expr


class SymmetryViolation(ValueError):
    pass


def _perm_sign(perm: Sequence[int]) -> int:
    sgn = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sgn = -sgn
    return sgn


def _is_zero(v) -> bool:
    return v.is_zero() if isinstance(v, ScalarExpr) else v == 0


@dataclass
class VPTensor:
    """``data`` axes follow ``slots``; each slot is ``(kind, position)``.

    ``kind`` is ``'G'`` (range 1..p) or ``'L'`` (range p+1..p+q); ``position``
    is ``'up'`` or ``'down'``.
    """

    data: np.ndarray
    slots: tuple[tuple[str, str], ...]
    p: int
    q: int

    @staticmethod
    def zeros(slots, p: int, q: int, fill=0) -> "VPTensor":
        shape = tuple(p if k == "G" else q for k, _ in slots)
        data = np.empty(shape, dtype=object)
        for idx in np.ndindex(*shape):
            data[idx] = fill
        return VPTensor(data, tuple(slots), p, q)

    def _axis_index(self, slot: int, value: int) -> int:
        kind = self.slots[slot][0]
        off = value - 1 if kind == "G" else value - self.p - 1
        size = self.p if kind == "G" else self.q
        if not 0 <= off < size:
            raise IndexError(f"index {value} out of range for a {kind} slot")
        return off

    def get(self, *values: int):
        return self.data[tuple(self._axis_index(s, v) for s, v in enumerate(values))]

    def set(self, values: Sequence[int], val) -> None:
        self.data[tuple(self._axis_index(s, v) for s, v in enumerate(values))] = val

    def ranges(self):
        return [range(1, self.p + 1) if k == "G" else range(self.p + 1, self.p + self.q + 1)
                for k, _ in self.slots]

    def items(self):
        for vals in product(*self.ranges()):
            yield vals, self.get(*vals)

    def is_zero(self) -> bool:
        return all(_is_zero(v) for v in self.data.flat)

    def map(self, fn) -> "VPTensor":
        out = np.empty(self.data.shape, dtype=object)
        for idx in np.ndindex(*self.data.shape):
            out[idx] = fn(self.data[idx])
        return VPTensor(out, self.slots, self.p, self.q)

    def __sub__(self, other: "VPTensor") -> "VPTensor":
        return VPTensor(self.data - other.data, self.slots, self.p, self.q)

    def __add__(self, other: "VPTensor") -> "VPTensor":
        return VPTensor(self.data + other.data, self.slots, self.p, self.q)


def _permute_groups(T: VPTensor, groups: Sequence[Sequence[int]], sign: bool) -> VPTensor:
    """Average of ``T`` over permutations of slot groups, signed if ``sign``."""
    k = len(groups)
    width = {len(g) for g in groups}
    if len(width) != 1:
        raise ValueError("slot groups must have equal size")
    kinds = [tuple(T.slots[s] for s in g) for g in groups]
    if len(set(kinds)) != 1:
        raise ValueError("slot groups must have matching index kinds")
    acc = None
    for perm in permutations(range(k)):
        axes = list(range(T.data.ndim))
        for src, dst in enumerate(perm):
            for a, b in zip(groups[src], groups[dst]):
                axes[b] = a
        term = np.transpose(T.data, axes)
        if sign and _perm_sign(perm) < 0:
            term = -term
        acc = term if acc is None else acc + term
    scale = Fraction(1, math.factorial(k))
    out = np.empty(acc.shape, dtype=object)
    for idx in np.ndindex(*acc.shape):
        out[idx] = acc[idx] * scale
    return VPTensor(out, T.slots, T.p, T.q)


def vp_alternate(T: VPTensor, groups: Sequence[Sequence[int]]) -> VPTensor:
    """Alternate over the given slot groups (single slots or vertical pairs)."""
    return _permute_groups(T, [tuple(g) if not isinstance(g, int) else (g,) for g in groups], True)


def vp_symmetrize(T: VPTensor, groups: Sequence[Sequence[int]]) -> VPTensor:
    return _permute_groups(T, [tuple(g) if not isinstance(g, int) else (g,) for g in groups], False)


# torsion ------------------------------------------------------------------
# a^{i beta gamma}_{alpha j k}: slots i, beta, gamma, alpha, j, k
TORSION_SLOTS = (("L", "up"), ("G", "up"), ("G", "up"), ("G", "down"), ("L", "down"), ("L", "down"))
# b^{i gamma delta}_{j k l}
B1_SLOTS = (("L", "up"), ("G", "up"), ("G", "up"), ("L", "down"), ("L", "down"), ("L", "down"))
# b^{beta gamma delta}_{alpha k l}
B2_SLOTS = (("G", "up"), ("G", "up"), ("G", "up"), ("G", "down"), ("L", "down"), ("L", "down"))


def pair_skew_residual(T: VPTensor, pair_a=(1, 4), pair_b=(2, 5)) -> VPTensor:
    return T + T.__class__(np.transpose(T.data, _swap_axes(T.data.ndim, pair_a, pair_b)), T.slots, T.p, T.q)


def _swap_axes(n: int, pa, pb) -> list[int]:
    axes = list(range(n))
    for a, b in zip(pa, pb):
        axes[a], axes[b] = b, a
    return axes


def torsion_trace_residuals(a: VPTensor) -> list:
    """Nonzero traces ``a^{i alpha gamma}_{alpha j k}`` and ``a^{i beta gamma}_{alpha i k}``."""
    p, q = a.p, a.q
    greek = range(1, p + 1)
    latin = range(p + 1, p + q + 1)
    out = []
    for i, g, j, k in product(latin, greek, latin, latin):
        s = sum((a.get(i, al, g, al, j, k) for al in greek), 0)
        if not _is_zero(s):
            out.append(("alpha-trace", (i, g, j, k), s))
    for b, g, al, k in product(greek, greek, greek, latin):
        s = sum((a.get(i, b, g, al, i, k) for i in latin), 0)
        if not _is_zero(s):
            out.append(("latin-trace", (b, g, al, k), s))
    return out


@dataclass
class TorsionParts:
    a_alpha: VPTensor
    a_beta: VPTensor


def decompose_torsion(a: VPTensor) -> TorsionParts:
    """Split torsion into the parts symmetric and skew in the lower Latin indices."""
    if not pair_skew_residual(a).is_zero():
        raise SymmetryViolation("torsion is not skew under the vertical pair swap")
    if torsion_trace_residuals(a):
        raise SymmetryViolation("torsion traces do not vanish")
    return TorsionParts(vp_symmetrize(a, [4, 5]), vp_alternate(a, [4, 5]))


# curvature ------------------------------------------------------------------

@dataclass
class SymmetryReport:
    skew: list
    traces: list
    mixed: list

    @property
    def ok(self) -> bool:
        return not (self.skew or self.traces or self.mixed)


def check_b_symmetries(b1: VPTensor, b2: VPTensor) -> SymmetryReport:
    """Pair skew-symmetry, trace conditions and the mixed b1/b2 relation."""
    p, q = b1.p, b1.q
    greek = range(1, p + 1)
    latin = range(p + 1, p + q + 1)
    skew, traces, mixed = [], [], []
    for name, T in (("b1", b1), ("b2", b2)):
        res = pair_skew_residual(T)
        for vals, v in res.items():
            if not _is_zero(v):
                skew.append((name, vals, v))
    for g, d, k, l in product(greek, greek, latin, latin):
        s = sum((b2.get(al, g, d, al, k, l) for al in greek), 0)
        if not _is_zero(s):
            traces.append(("b2", (g, d, k, l), s))
        t = sum((b1.get(i, g, d, i, k, l) for i in latin), 0)
        if not _is_zero(t):
            traces.append(("b1", (g, d, k, l), t))
        m = mixed_relation(b1, b2, g, d, k, l)
        if not _is_zero(m):
            mixed.append(((g, d, k, l), m))
    return SymmetryReport(skew, traces, mixed)


def mixed_relation(b1: VPTensor, b2: VPTensor, g: int, d: int, k: int, l: int):
    greek = range(1, b1.p + 1)
    latin = range(b1.p + 1, b1.p + b1.q + 1)
    s = 0
    for al in greek:
        s = s + b2.get(g, al, d, al, k, l) + b2.get(d, al, g, al, l, k)
    for i in latin:
        s = s - b1.get(i, g, d, k, i, l) - b1.get(i, d, g, l, i, k)
    return s


def bianchi_residual(b1: VPTensor, b2: VPTensor) -> VPTensor:
    """Torsion-free Bianchi combination, alternated over the three vertical pairs.

    ``T^{i beta gamma delta}_{alpha j k l} = delta^i_j b^{beta gamma delta}_{alpha k l}
    - delta^beta_alpha b^{i gamma delta}_{j k l}``.
    """
    p, q = b1.p, b1.q
    slots = (("L", "up"), ("G", "up"), ("G", "up"), ("G", "up"),
             ("G", "down"), ("L", "down"), ("L", "down"), ("L", "down"))
    T = VPTensor.zeros(slots, p, q, as_expr(0))
    for i, be, ga, de, al, j, k, l in product(*T.ranges()):
        v = as_expr(0)
        if i == j:
            v = v + b2.get(be, ga, de, al, k, l)
        if be == al:
            v = v - b1.get(i, ga, de, j, k, l)
        T.set((i, be, ga, de, al, j, k, l), v)
    return vp_alternate(T, [(1, 5), (2, 6), (3, 7)])


# labelled components (p = q = 2) ---------------------------------------------

_LABEL = re.compile(r"^\s*(?:b_?\{?)?(\d)(\d)(\d)\}?\^\{?(\d)(\d)(\d)\}?\s*$")


def parse_label(label: str) -> tuple[str, tuple[int, ...]]:
    """``'344^321'`` -> ``('b1', (3, 2, 1, 3, 4, 4))`` in slot order."""
    m = _LABEL.match(label)
    if not m:
        raise ValueError(f"bad component label {label!r}")
    lo = tuple(int(c) for c in m.group(1, 2, 3))
    up = tuple(int(c) for c in m.group(4, 5, 6))
    which = "b2" if lo[0] <= 2 else "b1"
    return which, up + lo


def component(b1: VPTensor, b2: VPTensor, label: str):
    which, vals = parse_label(label)
    return (b1 if which == "b1" else b2).get(*vals)


def format_label(which: str, vals: Sequence[int]) -> str:
    up, lo = vals[:3], vals[3:]
    return f"b[{lo[0]};{lo[1]},{lo[2]}]^[{up[0]};{up[1]},{up[2]}]"


# Each relation is a list of (coefficient, label); the sum must vanish.
def _eq(*labels: str) -> list[list[tuple[int, str]]]:
    """Chain of equalities ``l0 = l1 = ...`` as pairwise differences."""
    return [[(1, labels[0]), (-1, x)] for x in labels[1:]]


def _zero(*labels: str) -> list[list[tuple[int, str]]]:
    return [[(1, x)] for x in labels]


PQ2_LINEAR = {
    "mixed": [
        [(1, "233^121"), (-1, "343^411")], [(1, "133^212"), (-1, "343^422")],
        [(1, "244^121"), (-1, "434^311")], [(1, "144^212"), (-1, "434^322")],
        [(2, "133^112"), (-1, "343^412"), (-1, "343^421")],
        [(2, "144^112"), (-1, "434^312"), (-1, "434^321")],
        [(2, "443^411"), (-1, "234^121"), (-1, "243^121")],
        [(2, "334^322"), (-1, "143^212"), (-1, "134^212")],
        [(2, "134^112"), (1, "234^122"), (-2, "334^312"), (-1, "344^412"), (1, "143^211"), (-1, "433^321")],
        [(1, "134^211"), (2, "234^221"), (-2, "334^321"), (-1, "344^421"), (1, "243^122"), (-1, "433^312")],
    ],
    "bianchi": [
        [(1, "233^121"), (-1, "334^411")], [(1, "133^212"), (-1, "334^422")],
        [(1, "244^121"), (-1, "443^311")], [(1, "144^212"), (-1, "443^322")],
        [(1, "133^121"), (-1, "343^412"), (-1, "433^421")],
        [(1, "233^212"), (-1, "343^421"), (-1, "433^412")],
        [(1, "144^121"), (-1, "434^312"), (-1, "344^321")],
        [(1, "244^212"), (-1, "344^312"), (-1, "434^321")],
        [(1, "334^311"), (-1, "234^211"), (-1, "243^112")],
        [(1, "443^411"), (-1, "234^112"), (-1, "243^211")],
        [(1, "334^322"), (-1, "134^122"), (-1, "143^221")],
        [(1, "443^422"), (-1, "143^122"), (-1, "134^221")],
        [(1, "334^312"), (1, "433^321"), (-1, "234^212"), (-1, "243^122")],
        [(1, "143^211"), (1, "134^112"), (-1, "344^421"), (-1, "434^412")],
        [(1, "334^321"), (1, "433^312"), (-1, "134^121"), (-1, "143^211")],
        [(1, "234^221"), (1, "243^122"), (-1, "344^412"), (-1, "434^421")],
    ],
    "reduced": (
        _zero("233^121", "334^411", "133^212", "334^422", "244^121", "443^311", "144^212", "443^322")
        + _zero("133^112", "144^112", "443^411", "334^322")
        + _eq("343^412", "433^412", "334^412")
        + _eq("443^321", "344^321", "434^321")
        + _eq("243^211", "243^112", "243^121")
        + _eq("134^122", "134^221", "134^212")
        + _eq("134^112", "134^211", "134^121", "243^122")
        + _eq("433^321", "334^321", "343^321", "344^412")
    ),
}


def check_pq2_relations(b1: VPTensor, b2: VPTensor, groups: Sequence[str] = ("mixed", "bianchi", "reduced")):
    """Evaluate the tabulated p = q = 2 relations; return the violated ones."""
    if (b1.p, b1.q) != (2, 2):
        raise ValueError("relations are tabulated for p = q = 2 only")
    bad = []
    for g in groups:
        for n, rel in enumerate(PQ2_LINEAR[g]):
            s = sum((c * component(b1, b2, lab) for c, lab in rel), 0)
            if not _is_zero(s):
                bad.append((g, n, rel, s))
    return bad


CONFORMAL_MAP = {
    "a0": ["333^412"],
    "a1": ["433^412", "334^412", "343^412"],
    "a2": ["433^321", "334^321", "343^321", "344^412"],
    "a3": ["344^321", "434^321", "443^321"],
    "a4": ["444^321"],
    "b0": ["243^111"],
    "b1": ["243^211", "243^112", "243^121"],
    "b2": ["134^112", "134^211", "134^121", "243^122"],
    "b3": ["134^122", "134^212", "134^221"],
    "b4": ["134^222"],
}


@dataclass
class ConformalMismatch:
    """Two components that one conformal group equates but which differ."""

    name: str
    first: str
    other: str
    first_value: object
    other_value: object

    def __str__(self) -> str:
        return (f"{self.name}: {self.first} = {self.first_value} but "
                f"{self.other} = {self.other_value}")


@dataclass
class ConformalCurvature:
    a: list
    b: list
    warnings: list = field(default_factory=list)

    def c_alpha(self) -> list:
        """Coefficients of ``C_alpha`` from the constant term up."""
        a0, a1, a2, a3, a4 = self.a
        return [a4, -4 * a3, 6 * a2, -4 * a1, a0]

    def c_beta(self) -> list:
        b0, b1, b2, b3, b4 = self.b
        return [b4, -4 * b3, 6 * b2, -4 * b1, b0]

    def named(self) -> dict:
        out = {f"a{k}": v for k, v in enumerate(self.a)}
        out.update({f"b{k}": v for k, v in enumerate(self.b)})
        return out


def conformal_curvature(b1: VPTensor, b2: VPTensor) -> ConformalCurvature:
    """Read the ten conformal components; the first label of each group is used.

    Disagreements inside a group are returned as warnings.
    """
    vals, warns = {}, []
    for name, labels in CONFORMAL_MAP.items():
        first = component(b1, b2, labels[0])
        for lab in labels[1:]:
            other = component(b1, b2, lab)
            if not _is_zero(first - other):
                warns.append(ConformalMismatch(name, labels[0], lab, first, other))
        vals[name] = first
    return ConformalCurvature([vals[f"a{k}"] for k in range(5)], [vals[f"b{k}"] for k in range(5)], warns)


# three vertical pairs -------------------------------------------------------
# T^{alpha beta gamma}_{i j k}: pairs (0, 3), (1, 4), (2, 5)
TRIPLE_SLOTS = (("G", "up"), ("G", "up"), ("G", "up"), ("L", "down"), ("L", "down"), ("L", "down"))


def triple_pair_alternation(T: VPTensor) -> VPTensor:
    """Alternation over the three vertical pairs moved in lockstep."""
    return vp_alternate(T, [(0, 3), (1, 4), (2, 5)])


def check_lemma22(T: VPTensor) -> bool:
    """Whether alternating the upper triple and symmetrizing the lower triple gives zero."""
    return vp_symmetrize(vp_alternate(T, [0, 1, 2]), [3, 4, 5]).is_zero()
