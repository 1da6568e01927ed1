"""Command line front end: ``agsemi report|frobenius|verify``.

Reports are JSON documents with a fixed key order; the human rendering is
produced from the same dictionary so both views carry identical data.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .agstruct import AGStructure, ValidationError, load_structure, segre_metric
from .oracle import DomainViolation, OracleConfig
from .symcore import ATOMS, ParseContext, ScalarExpr, SymbolicError, parse_graded, parse_scalar, zero

EXIT_OK, EXIT_VALIDATION, EXIT_INVARIANT = 0, 2, 3

CONNECTION_KEYS = [(1, 2), (2, 1), (3, 4), (4, 3), (1, 1), (3, 3)]
CURVATURE_KEYS = [(1, 1), (1, 2), (2, 1), (2, 2), (3, 3), (3, 4), (4, 3), (4, 4)]
CONFORMAL_KEYS = [f"a{k}" for k in range(5)] + [f"b{k}" for k in range(5)]
SECOND_ORDER_KEYS = ["A1", "A2", "A3", "A4", "B2", "B3", "B4", "C3", "C4", "E4"]


class InvariantFailure(RuntimeError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    tol: float = 1e-9
    fd_step: float = 1e-4
    max_prolong: int = 3
    n_points: int = 8

    def oracle(self) -> OracleConfig:
        return OracleConfig(seed=self.seed, n_points=self.n_points, fd_step=self.fd_step, zero_tol=self.tol)


# formatting ------------------------------------------------------------------------

def basis_names(s: AGStructure) -> list[str]:
    return [f"w_{a}_{i}" for a, i in s.index]


def fmt_coeff(c: ScalarExpr) -> str:
    t = str(c)
    return t if all(ch not in t for ch in "+- /") or t.lstrip("-").replace("/", "").isalnum() else f"({t})"


def fmt_basis_form(comps, names) -> str:
    parts = [f"{fmt_coeff(c)}*{n}" for c, n in zip(comps, names) if not c.is_zero()]
    return " + ".join(parts) if parts else "0"


def fmt_basis_2form(terms: dict, names) -> str:
    parts = [f"{fmt_coeff(c)}*{names[A]}/\\{names[B]}" for (A, B), c in sorted(terms.items())
             if A < B and not c.is_zero()]
    return " + ".join(parts) if parts else "0"


def fmt_num(z: complex) -> str:
    if abs(z.imag) < 1e-12:
        return f"{z.real:.10g}"
    return f"{z.real:.10g}{z.imag:+.10g}j"


def fmt_verdict(v) -> dict:
    out = {
        "kind": v.kind,
        "pivot": v.system.pivot,
        "parameters": list(v.system.params),
        "forms": [str(f) for f in v.system.forms],
        "independence": str(v.system.independence),
        "obstruction": None if v.obstruction is None else str(v.obstruction),
        "conditions": [str(c) for c in v.conditions],
        "locus": [str(c) for c in v.locus],
        "solved": {f"d{k}": str(f) for k, f in v.solved.items()},
        "residual": None if v.residual is None else str(v.residual),
        "rounds": v.rounds,
        "warnings": list(v.warnings),
    }
    return out


# expected data -------------------------------------------------------------------------

def _unquote(k: str) -> str:
    return k[1:-1] if len(k) >= 2 and k[0] == k[-1] == '"' else k


def _same(a: ScalarExpr, b: ScalarExpr) -> bool:
    return (a - b).is_zero()


def same_zero_set(a: ScalarExpr | None, b: ScalarExpr | None) -> bool:
    """Equal up to a nonzero constant factor."""
    if a is None or b is None:
        return a is None and b is None
    if a.is_zero() or b.is_zero():
        return a.is_zero() and b.is_zero()
    return not (a / b).atoms()


@dataclass
class Comparison:
    mismatches: dict[str, tuple[str, str]] = field(default_factory=dict)
    registered: dict[str, str] = field(default_factory=dict)
    checked: int = 0

    @property
    def unregistered(self) -> list[str]:
        return [k for k in self.mismatches if k not in self.registered]

    @property
    def stale(self) -> list[str]:
        """Registered warnings that do not correspond to a real mismatch."""
        return [k for k in self.registered if k not in self.mismatches]

    @property
    def ok(self) -> bool:
        return not self.unregistered and not self.stale


def root_claims(text: str) -> dict[str, bool]:
    """Parse ``"0:integrable, finite:not integrable"`` into label flags."""
    out = {}
    for item in text.split(","):
        label, claim = (x.strip() for x in item.rsplit(":", 1))
        if claim not in ("integrable", "not integrable"):
            raise ValueError(f"bad root claim {item.strip()!r}")
        out[label] = claim == "integrable"
    return out


def compare_expected(s: AGStructure, result: "PipelineResult") -> Comparison:
    """Compare computed data with the fixture's ``[expected.*]`` sections."""
    cmp = Comparison()
    cmp.registered = {e.key: e.value for e in s.expected("expected.warnings")}
    names = basis_names(s)
    bctx = s.parse_context(basis={n: k for k, n in enumerate(names)})

    def note(key, exp, got, equal):
        cmp.checked += 1
        if not equal:
            cmp.mismatches[key] = (str(exp), str(got))

    top = {e.key: e.value for e in s.expected("expected")}
    cls = result.classification
    if "classification" in top:
        note("classification", top["classification"], cls.kind if cls else None,
             cls is not None and cls.kind == top["classification"])
    if "flat_condition" in top and cls is not None:
        exp = s.scalar(top["flat_condition"])
        note("flat_condition", exp, cls.flat_condition, same_zero_set(exp, cls.flat_condition))
    for side in ("alpha", "beta"):
        v = result.verdicts.get(side)
        if side in top:
            note(side, top[side], v.kind if v else None, v is not None and v.kind == top[side])
        if f"{side}_condition" in top and v is not None:
            exp = s.scalar(top[f"{side}_condition"])
            got = v.obstruction if v.kind == "Conditional" else None
            note(f"{side}_condition", exp, got, same_zero_set(exp, got))
        if v is not None and (f"{side}_obstruction" in top or f"{side}_locus" in top):
            pctx = s.parse_context()
            pctx = type(pctx)(pctx.coordinates + tuple(v.system.params), pctx.functions, pctx.constants)
            if f"{side}_obstruction" in top:
                exp = parse_scalar(top[f"{side}_obstruction"], pctx)
                got = v.obstruction if v.kind == "Obstructed" else None
                note(f"{side}_obstruction", exp, got, same_zero_set(exp, got))
            if f"{side}_locus" in top:
                exp = parse_scalar(top[f"{side}_locus"], pctx)
                got = None
                for g in v.locus:
                    got = g if got is None else got * g
                note(f"{side}_locus", exp, got, same_zero_set(exp, got))
        if f"root_claims_{side}" in top and side in result.roots:
            for label, claim in root_claims(top[f"root_claims_{side}"]).items():
                hits = [r for r in result.roots[side].roots
                        if r.label() == label or (label == "finite" and r.value not in ("0", "inf"))]
                got = hits[0].frobenius if hits else None
                want = "Integrable" if claim else "not Integrable"
                note(f"root_claims_{side}.{label}", want, got,
                     got is not None and (got == "Integrable") == claim)
        if f"roots_{side}" in top and side in result.roots:
            want = sorted(tuple(x.strip().rsplit(":", 1)) for x in top[f"roots_{side}"].split(","))
            got_r = result.roots[side]
            got = []
            for r in got_r.roots:
                if r.value in ("0", "inf"):
                    got.append((r.value, str(r.multiplicity)))
                else:
                    got.append(("finite", str(r.multiplicity)))
            exp_norm = sorted((v if v in ("0", "inf") else "finite", m) for v, m in want)
            ok = exp_norm == sorted(got)
            for v, m in want:
                if v not in ("0", "inf"):
                    val = s.scalar(v)
                    ok = ok and any(r.exact and r.value not in ("0", "inf") and _same(r.value, val)
                                    for r in got_r.roots)
            note(f"roots_{side}", top[f"roots_{side}"], got_r.pattern(), ok)

    cd, conn = result.curvature, result.connection
    if conn is not None and "expected.connection" in s.sections:
        listed = {}
        for e in s.expected("expected.connection"):
            lo, up = (int(t) for t in _unquote(e.key)[2:].split("_"))
            listed[(lo, up)] = e.value
        for key in CONNECTION_KEYS:
            exp = parse_graded(listed.get(key, "0"), bctx)
            exp_c = [exp.terms.get((A,), zero()) for A in range(len(names))]
            got = conn.forms[key]
            note(f"connection.w_{key[0]}_{key[1]}", fmt_basis_form(exp_c, names), fmt_basis_form(got, names),
                 all(_same(a, b) for a, b in zip(exp_c, got)))
    if conn is not None and "expected.second_order" in s.sections:
        listed = {_unquote(e.key): s.scalar(e.value) for e in s.expected("expected.second_order")}
        named = conn.second_order_named()
        for k in SECOND_ORDER_KEYS:
            exp = listed.get(k, zero())
            note(f"second_order.{k}", exp, named[k], _same(exp, named[k]))
    if cd is not None:
        from .tensorops import component

        for e in s.expected("expected.b"):
            lab = _unquote(e.key)
            exp, got = s.scalar(e.value), component(cd.b1, cd.b2, lab)
            note(f"b.{lab}", exp, got, _same(exp, got))
        for e in s.expected("expected.nonzero_b"):
            for lab in (t.strip() for t in e.value.split(",")):
                got = component(cd.b1, cd.b2, lab)
                note(f"nonzero_b.{lab}", "nonzero", got, not got.is_zero())
        if "expected.curvature" in s.sections:
            listed = {}
            for e in s.expected("expected.curvature"):
                lo, up = (int(t) for t in _unquote(e.key)[2:].split("_"))
                listed[(lo, up)] = e.value
            for key in CURVATURE_KEYS:
                exp = parse_graded(listed.get(key, "0"), bctx).terms
                got = cd.omega[key]
                pairs = set(exp) | {k for k, v in got.items() if not v.is_zero()}
                note(f"curvature.W_{key[0]}_{key[1]}", fmt_basis_2form(exp, names),
                     fmt_basis_2form(got, names),
                     all(_same(exp.get(k, zero()), got.get(k, zero())) for k in pairs))
        if "expected.conformal" in s.sections:
            listed = {_unquote(e.key): s.scalar(e.value) for e in s.expected("expected.conformal")}
            named = result.conformal.named()
            for k in CONFORMAL_KEYS:
                exp = listed.get(k, zero())
                note(f"conformal.{k}", exp, named[k], _same(exp, named[k]))
    if result.metric is not None and "expected.metric" in s.sections:
        from .symcore import coordinate_index

        exp_terms = {}
        for e in s.expected("expected.metric"):
            a, b = _unquote(e.key).split()
            i, j = coordinate_index(a[1:]), coordinate_index(b[1:])
            exp_terms[(min(i, j), max(i, j))] = s.scalar(e.value)
        got = result.metric.terms
        for k in sorted(set(exp_terms) | set(got)):
            label = f"d{ATOMS.atoms[k[0]].name} d{ATOMS.atoms[k[1]].name}"
            ev, gv = exp_terms.get(k, zero()), got.get(k, zero())
            note(f"metric.{label}", ev, gv, _same(ev, gv))
    return cmp


# pipeline -----------------------------------------------------------------------------

@dataclass
class PipelineResult:
    structure: AGStructure
    config: RunConfig
    connection: object = None
    curvature: object = None
    conformal: object = None
    classification: object = None
    metric: object = None
    roots: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def run_pipeline(s: AGStructure, cfg: RunConfig | None = None, sides=("alpha", "beta")) -> PipelineResult:
    from .connection import UnsupportedSignature, classify, conformal, curvature, root_analysis
    from .frobenius import build_system, prolong_and_test

    cfg = cfg or RunConfig()
    res = PipelineResult(s, cfg)
    if (s.p, s.q) == (2, 2):
        cd = curvature(s)
        res.curvature, res.connection = cd, cd.connection
        res.conformal = conformal(cd)
        res.classification = classify(res.conformal)
        res.metric = segre_metric(s)
        res.warnings += [f"conformal group {w}" for w in res.conformal.warnings]
        for side in ("alpha", "beta"):
            if res.classification.side_status(side) != "Integrable":
                top = {e.key: e.value for e in s.expected("expected")}
                claims = root_claims(top[f"root_claims_{side}"]) if f"root_claims_{side}" in top else None
                res.roots[side] = root_analysis(res.conformal, side, s, seed=cfg.seed, max_rounds=cfg.max_prolong,
                                                overrides=claims)
    else:
        res.notes.append(str(UnsupportedSignature(f"connection pipeline needs p = q = 2, got p = {s.p}, q = {s.q}")))
    for side in sides:
        res.verdicts[side] = prolong_and_test(build_system(s, side), cfg.max_prolong)
    res.checks = oracle_checks(res)
    return res


def oracle_checks(res: PipelineResult) -> dict:
    from .oracle import fd_ext_d_check, instantiate

    s, cfg = res.structure, res.config
    out: dict = {}
    worst = 0.0
    for k in range(3):
        inst = instantiate(s.coordinates, s.constraints, seed=cfg.seed + k, constants=s.constants)
        for f in s.coframe.values():
            worst = max(worst, fd_ext_d_check(f, inst, s.coordinates, cfg.fd_step))
    out["fd_ext_d"] = {"max_residual": float(f"{worst:.3e}"), "ok": worst < 1e-6}
    if res.curvature is not None:
        from .tensorops import check_pq2_relations

        sym = res.curvature.residuals["symmetries"]
        rel = check_pq2_relations(res.curvature.b1, res.curvature.b2)
        out["b_symmetries"] = {"violations": len(sym.skew) + len(sym.traces) + len(sym.mixed), "ok": sym.ok}
        out["pq2_relations"] = {"violations": len(rel), "ok": not rel}
        out["segre_null"] = segre_null_check(s, cfg)
        agree = True
        for side in ("alpha", "beta"):
            v = res.verdicts.get(side)
            if v is None:
                continue
            want = res.classification.side_status(side)
            ok = v.kind == want
            if ok and want == "Conditional":
                cond = res.classification.alpha_condition if side == "alpha" else res.classification.beta_condition
                ok = same_zero_set(cond, v.obstruction)
            agree = agree and ok
        out["cross_pipeline"] = {"ok": agree}
    return out


def segre_null_check(s: AGStructure, cfg: RunConfig, n_vectors: int = 20) -> dict:
    """Largest ``|g(z, z)|`` over rank-one vectors ``z = t (x) s``."""
    import random

    from .agstruct import decomposable_vector
    from .oracle import instantiate

    g = segre_metric(s)
    rng = random.Random(cfg.seed)
    inst = instantiate(s.coordinates, s.constraints, seed=cfg.seed, constants=s.constants)
    gm = [[float(inst.evaluate(c)) for c in row] for row in g.matrix()]
    worst = 0.0
    for _ in range(n_vectors):
        t = [rng.uniform(-1, 1) for _ in range(s.p)]
        sv = [rng.uniform(-1, 1) for _ in range(s.q)]
        z = [float(inst.evaluate(c)) for c in decomposable_vector(s, t, sv)]
        val = sum(gm[m][n] * z[m] * z[n] for m in range(len(z)) for n in range(len(z)))
        worst = max(worst, abs(val))
    return {"max_abs": float(f"{worst:.3e}"), "ok": worst < 1e-9}


def build_report(res: PipelineResult, cmp: Comparison | None = None) -> dict:
    s, cfg = res.structure, res.config
    names = basis_names(s)
    rep: dict = {
        "fixture": s.name,
        "structure": {"p": s.p, "q": s.q, "coordinates": list(s.coordinates),
                      "functions": [f"{k}({v})" for k, v in s.functions.items()]},
        "seed": cfg.seed,
        "tolerances": {"tol": cfg.tol, "fd_step": cfg.fd_step, "max_prolong": cfg.max_prolong},
        "notes": list(res.notes),
    }
    if res.metric is not None:
        rep["metric"] = {f"d{ATOMS.atoms[i].name} d{ATOMS.atoms[j].name}": str(c)
                         for (i, j), c in sorted(res.metric.terms.items())}
    if res.connection is not None:
        from .tensorops import format_label

        conn, cd = res.connection, res.curvature
        rep["connection"] = {f"w_{lo}_{up}": fmt_basis_form(conn.forms[(lo, up)], names)
                             for lo, up in CONNECTION_KEYS}
        rep["second_order"] = {k: str(v) for k, v in conn.second_order_named().items() if not v.is_zero()}
        bcomp = {}
        for T, which in ((cd.b1, "b1"), (cd.b2, "b2")):
            for vals, v in T.items():
                if not v.is_zero():
                    bcomp[format_label(which, vals)] = str(v)
        rep["b"] = bcomp
        rep["curvature"] = {f"W_{lo}_{up}": fmt_basis_2form(cd.omega[(lo, up)], names)
                            for lo, up in CURVATURE_KEYS}
        rep["conformal"] = {k: str(v) for k, v in res.conformal.named().items()}
        c = res.classification
        rep["classification"] = {
            "kind": c.kind,
            "description": c.describe(),
            "alpha_condition": None if c.alpha_condition is None else str(c.alpha_condition),
            "beta_condition": None if c.beta_condition is None else str(c.beta_condition),
            "flat_condition": None if c.flat_condition is None else str(c.flat_condition),
        }
        rep["roots"] = {
            side: {
                "degree": r.degree,
                "roots": [{"value": r0.label(), "multiplicity": r0.multiplicity, "exact": r0.exact,
                           "flagged_integrable": r0.flagged, "frobenius": r0.frobenius,
                           "samples": [fmt_num(z) for z in r0.samples]} for r0 in r.roots],
                "warnings": list(r.warnings),
            } for side, r in res.roots.items()
        }
    rep["frobenius"] = {side: fmt_verdict(v) for side, v in res.verdicts.items()}
    rep["checks"] = res.checks
    if cmp is not None:
        rep["expected"] = {
            "checked": cmp.checked,
            "mismatches": {k: {"expected": e, "computed": g, "registered": k in cmp.registered}
                           for k, (e, g) in cmp.mismatches.items()},
            "unregistered": cmp.unregistered,
            "stale": cmp.stale,
        }
    rep["warnings"] = list(res.warnings) + [f"{k}: {v}" for k, v in (cmp.registered.items() if cmp else [])]
    return rep


def render_text(rep: dict, indent: int = 0) -> str:
    """Indented plain-text rendering carrying the same data as the JSON report."""
    lines = []
    pad = "  " * indent
    for k, v in rep.items():
        if isinstance(v, dict):
            if not v:
                lines.append(f"{pad}{k}: -")
                continue
            lines.append(f"{pad}{k}:")
            lines.append(render_text(v, indent + 1))
        elif isinstance(v, list):
            if not v:
                lines.append(f"{pad}{k}: -")
            elif all(not isinstance(item, (dict, list)) for item in v):
                lines.append(f"{pad}{k}: " + ", ".join(str(item) for item in v))
            else:
                lines.append(f"{pad}{k}:")
                for n, item in enumerate(v):
                    if isinstance(item, dict):
                        lines.append(f"{pad}  [{n}]")
                        lines.append(render_text(item, indent + 2))
                    else:
                        lines.append(f"{pad}  [{n}] {item}")
        else:
            lines.append(f"{pad}{k}: {v}")
    return "\n".join(x for x in lines if x)


# commands -------------------------------------------------------------------------------

def _emit(rep: dict, args) -> None:
    text = json.dumps(rep, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    if not args.quiet:
        print(render_text(rep) if args.format == "text" else text)


def _config(args) -> RunConfig:
    return RunConfig(seed=args.seed, tol=args.tol, fd_step=args.fd_step, max_prolong=args.max_prolong)


def _invariants_hold(res: PipelineResult) -> bool:
    return all(c.get("ok", True) for c in res.checks.values())


def cmd_report(args) -> int:
    s = load_structure(args.fixture)
    res = run_pipeline(s, _config(args))
    cmp = compare_expected(s, res)
    _emit(build_report(res, cmp), args)
    return EXIT_OK if _invariants_hold(res) else EXIT_INVARIANT


def cmd_frobenius(args) -> int:
    from .frobenius import build_system, prolong_and_test

    s = load_structure(args.fixture)
    sides = ["alpha", "beta"] if args.side == "both" else [args.side]
    rep = {"fixture": s.name, "seed": args.seed, "max_prolong": args.max_prolong, "verdicts": {}}
    for side in sides:
        v = prolong_and_test(build_system(s, side, args.pivot), args.max_prolong)
        rep["verdicts"][side] = fmt_verdict(v)
    _emit(rep, args)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .frobenius import load_family, verify_solution

    s = load_structure(args.fixture)
    fam = load_family(args.family, s)
    r = verify_solution(s, fam)
    rep = {"fixture": s.name, "family": fam.name, "side": fam.side, "result": "PASS" if r.ok else "FAIL",
           "solved_for": r.solved_for,
           "residuals": [{"form": n, "residual": str(c)} for n, c in r.residuals],
           "closure": [{"relation": n, "residual": str(c)} for n, c in r.closure]}
    _emit(rep, args)
    return EXIT_OK if r.ok else 1


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for sample points")
    common.add_argument("--tol", type=float, default=1e-9, help="numeric zero tolerance")
    common.add_argument("--fd-step", type=float, default=1e-4, help="finite difference step")
    common.add_argument("--max-prolong", type=int, default=3, help="prolongation rounds")
    common.add_argument("--out", help="write the JSON report to this path")
    common.add_argument("--quiet", action="store_true", help="suppress stdout")
    common.add_argument("--format", choices=["json", "text"], default="json")

    p = argparse.ArgumentParser(prog="agsemi", description="Curvature and semiintegrability of almost Grassmann structures")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("report", parents=[common], help="full report for a fixture")
    r.add_argument("fixture")
    r.set_defaults(func=cmd_report)
    f = sub.add_parser("frobenius", parents=[common], help="integrability verdicts")
    f.add_argument("fixture")
    f.add_argument("--side", choices=["alpha", "beta", "both"], default="both")
    f.add_argument("--pivot", type=int, default=None)
    f.set_defaults(func=cmd_frobenius)
    v = sub.add_parser("verify", parents=[common], help="check a solution family")
    v.add_argument("fixture")
    v.add_argument("family")
    v.set_defaults(func=cmd_verify)
    sub.add_parser("list", help="list bundled fixtures").set_defaults(func=cmd_list)
    return p


def fixtures_dir() -> Path:
    return Path(__file__).parent / "fixtures"


def cmd_list(args) -> int:
    for p in sorted(fixtures_dir().glob("*.ag")):
        print(p.stem)
    for p in sorted((fixtures_dir() / "families").glob("*.fam")):
        print(f"families/{p.stem}")
    return EXIT_OK


def resolve(path: str) -> str:
    """Accept bundled fixture names as well as paths."""
    if Path(path).exists():
        return path
    for cand in (fixtures_dir() / f"{path}.ag", fixtures_dir() / f"{path}.fam",
                 fixtures_dir() / "families" / f"{path}.fam"):
        if cand.exists():
            return str(cand)
    return path


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    for attr in ("fixture", "family"):
        if getattr(args, attr, None):
            setattr(args, attr, resolve(getattr(args, attr)))
    try:
        return args.func(args)
    except (ValidationError, SymbolicError, FileNotFoundError, DomainViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # internal invariant failures
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
