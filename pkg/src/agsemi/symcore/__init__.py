from .expr import (
    ATOMS,
    Atom,
    NonIntegerExponent,
    ScalarExpr,
    SymbolicError,
    as_expr,
    atom_of,
    constant,
    coordinate,
    coordinate_index,
    coordinate_support,
    diff,
    eval_poly,
    exp,
    fderiv,
    function_atoms,
    degree_in,
    numerator_factors,
    pseudo_remainder,
    log,
    one,
    specialize_function,
    subs,
    zero,
)
from .linalg import LinearSolution, determinant, inverse, solve_linear
from .parse import (
    DegreeMismatch,
    ExprSyntaxError,
    Graded,
    ParseContext,
    UndeclaredIdentifier,
    parse_graded,
    parse_scalar,
    sort_with_sign,
)


def is_zero(e: ScalarExpr) -> bool:
    """Exact zero test; canonical form makes this structural."""
    return as_expr(e).is_zero()


def to_string(e: ScalarExpr) -> str:
    return str(e)
