from __future__ import annotations

import random
from fractions import Fraction
from functools import lru_cache
from itertools import product
from pathlib import Path

import numpy as np
import pytest

from agsemi.agstruct import load_structure
from agsemi.cli import RunConfig, compare_expected, run_pipeline
from agsemi.tensorops import TORSION_SLOTS, VPTensor, pair_skew_residual, torsion_trace_residuals

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "agsemi" / "fixtures"
FAMILIES = FIXTURES / "families"

FIXTURE_NAMES = sorted(p.stem for p in FIXTURES.glob("*.ag"))

# criterion number -> PASS/FAIL line, filled by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


@lru_cache(maxsize=None)
def structure(name: str):
    return load_structure(FIXTURES / f"{name}.ag")


@lru_cache(maxsize=None)
def pipeline(name: str):
    return run_pipeline(structure(name), RunConfig())


@lru_cache(maxsize=None)
def comparison(name: str):
    return compare_expected(structure(name), pipeline(name))


def pq22(name: str) -> bool:
    s = structure(name)
    return (s.p, s.q) == (2, 2)


# random tensors -----------------------------------------------------------------

def random_tensor(slots, p: int, q: int, rng: random.Random) -> VPTensor:
    T = VPTensor.zeros(slots, p, q, Fraction(0))
    for idx in np.ndindex(*T.data.shape):
        T.data[idx] = Fraction(rng.randint(-9, 9), rng.randint(1, 5))
    return T


def pair_skew(T: VPTensor, pa=(1, 4), pb=(2, 5)) -> VPTensor:
    """Project onto tensors skew under the vertical pair swap."""
    r = pair_skew_residual(T, pa, pb)
    return T - r.map(lambda v: v / 2)


def random_torsion(p: int, q: int, rng: random.Random) -> VPTensor:
    """Random torsion-type tensor, pair skew with vanishing traces.

    The constraints are linear, so the random vector is projected onto their
    null space with a float eigen-solve.
    """
    T = pair_skew(random_tensor(TORSION_SLOTS, p, q, rng))
    shape = T.data.shape
    n = int(np.prod(shape))
    rows = []
    greek = range(p)
    latin = range(q)

    def flat(idx):
        return int(np.ravel_multi_index(idx, shape))

    # pair skew: T[i,b,g,a,j,k] + T[i,g,b,a,k,j] = 0
    for i, b, g, a, j, k in product(latin, greek, greek, greek, latin, latin):
        r = np.zeros(n)
        r[flat((i, b, g, a, j, k))] += 1
        r[flat((i, g, b, a, k, j))] += 1
        rows.append(r)
    for i, g, j, k in product(latin, greek, latin, latin):
        r = np.zeros(n)
        for al in greek:
            r[flat((i, al, g, al, j, k))] += 1
        rows.append(r)
    for b, g, al, k in product(greek, greek, greek, latin):
        r = np.zeros(n)
        for i in latin:
            r[flat((i, b, g, al, i, k))] += 1
        rows.append(r)
    A = np.array(rows)
    x = np.array([float(v) for v in T.data.flat])
    # null space of A from the small eigenvalues of the Gram matrix
    ev, vecs = np.linalg.eigh(A.T @ A)
    null = vecs[:, ev < 1e-9].T
    y = null.T @ (null @ x)
    out = VPTensor.zeros(TORSION_SLOTS, p, q, 0.0)
    for m, idx in enumerate(np.ndindex(*shape)):
        out.data[idx] = float(y[m])
    return out


def close_to_zero(T: VPTensor, tol: float = 1e-9) -> bool:
    return all(abs(float(v)) < tol for v in T.data.flat)


@pytest.fixture
def rng():
    return random.Random(1234)


__all__ = ["ACCEPTANCE", "FIXTURES", "FAMILIES", "FIXTURE_NAMES", "structure", "pipeline", "comparison", "pq22",
           "random_tensor", "pair_skew", "random_torsion", "close_to_zero", "torsion_trace_residuals"]
