"""Check every bundled solution family against its structure."""

from agsemi.agstruct import load_structure
from agsemi.cli import fixtures_dir
from agsemi.frobenius import load_family, verify_solution

for path in sorted((fixtures_dir() / "families").glob("*.fam")):
    s = load_structure(fixtures_dir() / f"{path.name.split('.')[0]}.ag")
    res = verify_solution(s, load_family(path, s))
    why = ""
    if not res.ok:
        why = f"  residuals={len(res.residuals)} closure={len(res.closure)}"
    print(f"{'PASS' if res.ok else 'FAIL'}  {path.stem}{why}")
