"""Almost Grassmann structures given by an explicit coframe.

Fixture files are INI-like::

    [structure]
    p = 2
    q = 2
    coordinates = x, y, u, v
    functions = f(u)

    [coframe]
    w_1_3 = "dx + f(u)*dy"
    ...

    [domain]
    nonzero = u - x

Keys may repeat inside a section; every entry keeps its line number so
validation errors point at the offending line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exterior import DiffForm, Frame, parse_form
from .oracle import DomainViolation, OracleConfig, instantiate, numeric_matrix
from .symcore import ParseContext, ScalarExpr, SymbolicError, coordinate_index, parse_scalar, zero


class ValidationError(ValueError):
    def __init__(self, msg: str, line: int | None = None, source: str | None = None) -> None:
        where = ""
        if source or line:
            where = f"{source or '<fixture>'}:{line if line else '?'}: "
        super().__init__(where + msg)
        self.line = line


class DimensionMismatch(ValidationError):
    pass


class SingularCoframe(ValidationError):
    pass


@dataclass
class Entry:
    key: str
    value: str
    line: int


def read_sections(text: str, source: str | None = None) -> dict[str, list[Entry]]:
    sections: dict[str, list[Entry]] = {}
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[([A-Za-z0-9_.\-]+)\]", line)
        if m:
            current = m.group(1)
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ValidationError("entry outside of any section", n, source)
        if "=" not in line:
            raise ValidationError(f"expected 'key = value', got {line!r}", n, source)
        k, v = line.split("=", 1)
        v = v.strip()
        if len(v) >= 2 and v[0] == v[-1] == '"':
            v = v[1:-1]
        sections[current].append(Entry(k.strip(), v, n))
    return sections


def _one(sec: list[Entry], key: str, source, required=True) -> Entry | None:
    hits = [e for e in sec if e.key == key]
    if len(hits) > 1:
        raise ValidationError(f"duplicate key {key!r}", hits[1].line, source)
    if not hits:
        if required:
            raise ValidationError(f"missing key {key!r}", None, source)
        return None
    return hits[0]


def _split_list(s: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


@dataclass
class AGStructure:
    name: str
    p: int
    q: int
    coordinates: list[str]
    functions: dict[str, str]
    constants: list[str]
    coframe: dict[tuple[int, int], DiffForm]
    constraints: list[ScalarExpr] = field(default_factory=list)
    sections: dict[str, list[Entry]] = field(default_factory=dict)
    source: str | None = None
    _frame: Frame | None = None

    @property
    def index(self) -> list[tuple[int, int]]:
        return [(a, i) for i in range(self.p + 1, self.p + self.q + 1) for a in range(1, self.p + 1)]

    @property
    def frame(self) -> Frame:
        if self._frame is None:
            self._frame = Frame([self.coframe[k] for k in self.index], self.coordinates)
        return self._frame

    def parse_context(self, **kw) -> ParseContext:
        return ParseContext(tuple(self.coordinates), dict(self.functions), tuple(self.constants), **kw)

    def scalar(self, text: str) -> ScalarExpr:
        return parse_scalar(text, self.parse_context())

    def form(self, text: str) -> DiffForm:
        return parse_form(text, self.coordinates, self.functions, self.constants)

    def w(self, alpha: int, i: int) -> DiffForm:
        return self.coframe[(alpha, i)]

    def expected(self, section: str) -> list[Entry]:
        return self.sections.get(section, [])

    def map_coefficients(self, fn, name: str | None = None) -> "AGStructure":
        """New structure with ``fn`` applied to every coframe coefficient."""
        cof = {k: v.map_coeffs(fn) for k, v in self.coframe.items()}
        return AGStructure(name or self.name, self.p, self.q, list(self.coordinates), dict(self.functions),
                           list(self.constants), cof, [fn(c) for c in self.constraints], self.sections,
                           self.source)


def parse_structure(text: str, source: str | None = None, check: bool = True,
                    config: OracleConfig | None = None) -> AGStructure:
    secs = read_sections(text, source)
    if "structure" not in secs:
        raise ValidationError("missing [structure] section", None, source)
    st = secs["structure"]
    try:
        p = int(_one(st, "p", source).value)
        q = int(_one(st, "q", source).value)
    except ValueError as exc:
        raise ValidationError(f"p and q must be integers ({exc})", None, source) from None
    if p < 2 or q < 2:
        raise ValidationError("p and q must be at least 2", _one(st, "p", source).line, source)
    ce = _one(st, "coordinates", source)
    coords = _split_list(ce.value)
    if len(set(coords)) != len(coords):
        raise ValidationError("coordinate names must be distinct", ce.line, source)
    for c in coords:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", c):
            raise ValidationError(f"bad coordinate name {c!r}", ce.line, source)
    if len(coords) != p * q:
        raise DimensionMismatch(f"{len(coords)} coordinates but p*q = {p * q}", ce.line, source)
    functions: dict[str, str] = {}
    fe = _one(st, "functions", source, required=False)
    if fe and fe.value:
        for item in _split_list(fe.value):
            m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\s*\(\s*([A-Za-z_][A-Za-z0-9_]*)\s*\)", item)
            if not m:
                raise ValidationError(f"bad function declaration {item!r}", fe.line, source)
            functions[m.group(1)] = m.group(2)
    constants = []
    ke = _one(st, "constants", source, required=False)
    if ke and ke.value:
        constants = _split_list(ke.value)
    name_e = _one(st, "name", source, required=False)
    name = name_e.value if name_e else (Path(source).stem if source else "structure")
    for c in coords:
        coordinate_index(c)

    cof_sec = secs.get("coframe")
    if cof_sec is None:
        raise ValidationError("missing [coframe] section", None, source)
    coframe: dict[tuple[int, int], DiffForm] = {}
    for e in cof_sec:
        m = re.fullmatch(r"w_(\d+)_(\d+)", e.key)
        if not m:
            raise ValidationError(f"bad coframe key {e.key!r}", e.line, source)
        al, i = int(m.group(1)), int(m.group(2))
        if not (1 <= al <= p and p + 1 <= i <= p + q):
            raise ValidationError(f"coframe index {e.key!r} out of range", e.line, source)
        if (al, i) in coframe:
            raise ValidationError(f"duplicate coframe entry {e.key!r}", e.line, source)
        try:
            f = parse_form(e.value, coords, functions, constants)
        except SymbolicError as exc:
            raise ValidationError(str(exc), e.line, source) from None
        if f.degree != 1:
            raise ValidationError(f"{e.key} is not a 1-form", e.line, source)
        coframe[(al, i)] = f
    missing = [(a, i) for i in range(p + 1, p + q + 1) for a in range(1, p + 1) if (a, i) not in coframe]
    if missing:
        raise DimensionMismatch(f"missing coframe entries {missing}", None, source)

    constraints = []
    for e in secs.get("domain", []):
        if e.key != "nonzero":
            raise ValidationError(f"unknown domain key {e.key!r}", e.line, source)
        for item in _split_list(e.value):
            try:
                constraints.append(parse_scalar(item, ParseContext(tuple(coords), functions, tuple(constants))))
            except SymbolicError as exc:
                raise ValidationError(str(exc), e.line, source) from None

    s = AGStructure(name, p, q, coords, functions, constants, coframe, constraints, secs, source)
    if check:
        check_coframe(s, config)
    return s


def load_structure(path: str | Path, check: bool = True) -> AGStructure:
    path = Path(path)
    return parse_structure(path.read_text(), str(path), check)


def serialize_structure(s: AGStructure) -> str:
    """Fixture text for ``s`` (structure, coframe and domain only)."""
    lines = ["[structure]", f"name = {s.name}", f"p = {s.p}", f"q = {s.q}",
             "coordinates = " + ", ".join(s.coordinates)]
    if s.functions:
        lines.append("functions = " + ", ".join(f"{f}({a})" for f, a in s.functions.items()))
    if s.constants:
        lines.append("constants = " + ", ".join(s.constants))
    lines += ["", "[coframe]"]
    lines += [f'w_{a}_{i} = "{s.coframe[(a, i)]}"' for (a, i) in s.index]
    if s.constraints:
        lines += ["", "[domain]", "nonzero = " + ", ".join(str(c) for c in s.constraints)]
    return "\n".join(lines) + "\n"


def check_coframe(s: AGStructure, config: OracleConfig | None = None) -> None:
    """Reject coframes whose scaled determinant vanishes at a sample point."""
    cfg = config or OracleConfig()
    E = Frame([s.coframe[k] for k in s.index], s.coordinates).E
    for k in range(cfg.n_points):
        try:
            inst = instantiate(s.coordinates, s.constraints, seed=cfg.seed + k, config=cfg,
                               constants=s.constants)
            M = numeric_matrix(E, inst)
        except DomainViolation as exc:
            raise ValidationError(str(exc), None, s.source) from None
        norms = np.linalg.norm(M, axis=1)
        if np.any(norms == 0):
            raise SingularCoframe("coframe has a vanishing row", None, s.source)
        det = abs(np.linalg.det(M / norms[:, None]))
        if det <= 1e-9:
            raise SingularCoframe(f"coframe degenerate at sample {k} (scaled det {det:.3g})", None, s.source)


# metric ----------------------------------------------------------------------

@dataclass
class QuadraticForm:
    """Symmetric 2-tensor ``sum_{m <= n} g[m, n] dx_m dx_n`` in monomial form."""

    coords: list[str]
    terms: dict[tuple[int, int], ScalarExpr]

    def coefficient(self, a: str, b: str) -> ScalarExpr:
        i, j = coordinate_index(a), coordinate_index(b)
        return self.terms.get((min(i, j), max(i, j)), zero())

    def matrix(self) -> list[list[ScalarExpr]]:
        idx = [coordinate_index(c) for c in self.coords]
        out = []
        for i in idx:
            row = []
            for j in idx:
                c = self.terms.get((min(i, j), max(i, j)), zero())
                row.append(c if i == j else c / 2)
            out.append(row)
        return out

    def __str__(self) -> str:
        from .symcore import ATOMS

        parts = []
        for (i, j), c in sorted(self.terms.items()):
            parts.append(f"({c}) d{ATOMS.atoms[i].name} d{ATOMS.atoms[j].name}")
        return " + ".join(parts) if parts else "0"


def sym_product(a: DiffForm, b: DiffForm) -> dict[tuple[int, int], ScalarExpr]:
    out: dict[tuple[int, int], ScalarExpr] = {}
    for (i,), ca in a.terms.items():
        for (j,), cb in b.terms.items():
            k = (min(i, j), max(i, j))
            out[k] = out[k] + ca * cb if k in out else ca * cb
    return out


def segre_metric(s: AGStructure) -> QuadraticForm:
    """``w_1^3 w_2^4 - w_1^4 w_2^3`` for p = q = 2."""
    if (s.p, s.q) != (2, 2):
        raise ValueError("the conformal metric is defined here for p = q = 2")
    t1 = sym_product(s.w(1, 3), s.w(2, 4))
    t2 = sym_product(s.w(1, 4), s.w(2, 3))
    terms = dict(t1)
    for k, v in t2.items():
        terms[k] = terms[k] - v if k in terms else -v
    return QuadraticForm(list(s.coordinates), {k: v for k, v in terms.items() if not v.is_zero()})


def decomposable_vector(s: AGStructure, t: Sequence, sv: Sequence) -> list[ScalarExpr]:
    """Coordinate components of the vector with coframe values ``t_alpha s^i``."""
    from .symcore import as_expr

    frame = s.frame
    z = [as_expr(t[a - 1]) * as_expr(sv[i - s.p - 1]) for (a, i) in s.index]
    inv = frame.Einv
    return [sum((inv[m][A] * z[A] for A in range(frame.n)), zero()) for m in range(frame.n)]
