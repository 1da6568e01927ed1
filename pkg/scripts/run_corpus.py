"""Run the full pipeline on every bundled fixture and print a summary table."""

import argparse

from agsemi.agstruct import load_structure
from agsemi.cli import RunConfig, compare_expected, fixtures_dir, run_pipeline


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    bad = 0
    print(f"{'fixture':32} {'class':20} {'alpha':12} {'beta':12} checks  expected")
    for path in sorted(fixtures_dir().glob("*.ag")):
        s = load_structure(path)
        res = run_pipeline(s, RunConfig(seed=args.seed))
        cmp = compare_expected(s, res)
        kind = res.classification.kind if res.classification else "-"
        verdicts = {side: v.kind for side, v in res.verdicts.items()}
        checks = all(c["ok"] for c in res.checks.values())
        bad += (not checks) + (not cmp.ok)
        print(f"{s.name:32} {kind:20} {verdicts.get('alpha', '-'):12} {verdicts.get('beta', '-'):12} "
              f"{'ok' if checks else 'FAIL':7} {cmp.checked} checked, {len(cmp.registered)} registered"
              + ("" if cmp.ok else f", unregistered {cmp.unregistered}, stale {cmp.stale}"))
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
