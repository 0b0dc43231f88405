"""
Divided-difference operators D_x and S_x on polynomials.

Tables hold the exact images of the monomials z^0..z^N, built column by column
from the product rules

    D_x(fg) = D_x f * S_x g + S_x f * D_x g
    S_x(fg) = U_2 * D_x f * D_x g + S_x f * S_x g

with D_x z = 1 and S_x z = alpha z + beta. The pointwise oracle evaluates the
defining difference quotients directly on lattice nodes and never touches
the tables.
"""

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal

from dotenv import load_dotenv

from cache_utils import cached, table_cache
from exact_core import (
    ONE_POLY,
    ZERO,
    ZERO_POLY,
    DegenerateStepError,
    DegreeBoundError,
    ParameterError,
    Poly,
    RegularityError,
    Scalar,
)
from lattice import Lattice, QQuadraticLattice, gamma_factorial
from logging_config import get_logger

load_dotenv()

logger = get_logger(__name__)

MAX_DEGREE = int(os.getenv("LATOPS_MAX_DEGREE", "100"))

Which = Literal["dx", "sx"]


@dataclass(frozen=True)
class OperatorTables:
    """Monomial images: D[n] = D_x z^n, S[n] = S_x z^n for 0 <= n <= N."""

    lattice: Lattice
    N: int
    D: tuple
    S: tuple

    def column(self, which: Which, n: int) -> Poly:
        return _columns(self, which)[n]

    def matrix(self, which: Which) -> list[list[Scalar]]:
        """Dense (N+1) x (N+1) matrix; entry [i][n] is the z^i coefficient of the image of z^n."""
        cols = _columns(self, which)
        return [[cols[n].coeff(i) for n in range(self.N + 1)] for i in range(self.N + 1)]


def _columns(T: OperatorTables, which: str) -> tuple:
    if which == "dx":
        return T.D
    if which == "sx":
        return T.S
    raise ParameterError(f"Unknown operator '{which}' (expected dx or sx)")


def check_degree(N: int) -> None:
    if N < 0:
        raise ParameterError("Degree bound must be nonnegative")
    if N > MAX_DEGREE:
        raise DegreeBoundError(f"Degree {N} exceeds LATOPS_MAX_DEGREE={MAX_DEGREE}")


@cached(table_cache)
def build_tables(L: Lattice, N: int) -> OperatorTables:
    """
    Build exact operator tables on the monomial basis.

    Args:
        L: Lattice
        N: Highest monomial degree

    Returns:
        OperatorTables with N+1 columns per operator

    Raises:
        DegreeBoundError: If N exceeds LATOPS_MAX_DEGREE
    """
    check_degree(N)
    _, u2 = L.structural_polys()
    sz = Poly([L.beta, L.alpha])

    D = [ZERO_POLY]
    S = [ONE_POLY]
    for n in range(N):
        D.append(S[n] + sz * D[n])
        S.append(u2 * D[n] + sz * S[n])

    logger.debug(f"Built operator tables for {L.kind} lattice up to degree {N}")
    return OperatorTables(lattice=L, N=N, D=tuple(D), S=tuple(S))


def apply(which: Which, T: OperatorTables, p: Poly) -> Poly:
    """
    Apply D_x or S_x to a polynomial through the tables.

    Raises:
        DegreeBoundError: If deg p exceeds the table bound
    """
    if p.degree > T.N:
        raise DegreeBoundError(f"deg p = {p.degree} exceeds table bound {T.N}")
    cols = _columns(T, which)
    acc = ZERO_POLY
    for k, c in enumerate(p.coeffs):
        if c:
            acc = acc + cols[k].scale(c)
    return acc


def apply_power(which: Which, T: OperatorTables, p: Poly, k: int) -> Poly:
    """k-fold application of an operator; k = 0 returns p."""
    if k < 0:
        raise ParameterError("Operator power must be nonnegative")
    out = p
    for _ in range(k):
        if out.is_zero:
            break
        out = apply(which, T, out)
    return out


def pointwise_oracle(which: Which, L: Lattice, p: Poly, s) -> Scalar:
    """
    Evaluate D_x p or S_x p at the node x(s) from the defining quotients.

    Args:
        which: "dx" or "sx"
        L: Lattice
        p: Polynomial
        s: Rational lattice parameter

    Returns:
        Exact value at x(s)

    Raises:
        DegenerateStepError: If x(s+1/2) = x(s-1/2) for dx
    """
    s = Fraction(s)
    half = Fraction(1, 2)
    up = p(L.x(s + half))
    down = p(L.x(s - half))
    if which == "sx":
        return (up + down) / 2
    if which != "dx":
        raise ParameterError(f"Unknown operator '{which}' (expected dx or sx)")
    step = L.x(s + half) - L.x(s - half)
    if step.is_zero:
        raise DegenerateStepError(f"Degenerate step at s = {s}: x(s+1/2) = x(s-1/2)")
    return (up - down) / step


def sample_points(L: Lattice, count: int, max_tries: int = 10_000) -> list[Fraction]:
    """
    Lattice parameters s = 1/2, 1, 3/2, ... with a nondegenerate step and
    pairwise distinct nodes x(s).
    """
    half = Fraction(1, 2)
    points, nodes = [], set()
    s = half
    for _ in range(max_tries):
        if len(points) >= count:
            break
        node = L.x(s)
        if node not in nodes and L.x(s + half) != L.x(s - half):
            points.append(s)
            nodes.add(node)
        s += half
    if len(points) < count:
        raise DegenerateStepError(f"Only {len(points)} usable lattice points found")
    return points


def derived_sequence(T: OperatorTables, P: list, k: int) -> list[Poly]:
    """
    Normalized k-th derivative sequence P_n^{[k]} = (gamma_n!/gamma_{n+k}!) D_x^k P_{n+k}.

    Args:
        T: Operator tables covering deg P_{n+k}
        P: Simple set P_0, P_1, ...
        k: Derivative order

    Returns:
        P_0^{[k]} .. P_{len(P)-1-k}^{[k]}, each monic of degree n
    """
    if k < 0:
        raise ParameterError("Derivative order must be nonnegative")
    if k == 0:
        return list(P)
    L = T.lattice
    out = []
    for n in range(len(P) - k):
        denom = gamma_factorial(L, n + k)
        if denom.is_zero:
            raise RegularityError(f"gamma_{n + k}! vanishes", index=n + k, detail="gamma factorial")
        factor = gamma_factorial(L, n) / denom
        out.append(apply_power("dx", T, P[n + k], k).scale(factor))
    return out


def characterization_constant(L: Lattice, n: int) -> Scalar:
    """k_n = gamma_{n+1} / alpha_n, the constant in D_x P_{n+1} = k_n S_x P_n."""
    return L.gamma_n(n + 1) / L.alpha_n(n)


def identify_constant(T: OperatorTables, P: list, n: int) -> Scalar:
    """Ratio of leading coefficients of D_x P_{n+1} and S_x P_n."""
    lhs = apply("dx", T, P[n + 1])
    rhs = apply("sx", T, P[n])
    return lhs.leading / rhs.leading


def expected_subleading(L: Lattice, n: int) -> tuple[Scalar, Scalar]:
    """
    Second coefficients of D_x z^n (of z^{n-2}) and S_x z^n (of z^{n-1}).

    Returns:
        (u_n, uhat_n) on q-lattices, (v_n, vhat_n) on quadratic lattices
    """
    if isinstance(L, QQuadraticLattice):
        if n < 1:
            return ZERO, ZERO
        u = (n * L.gamma_n(n - 1) - (n - 1) * L.gamma_n(n)) * L.c3
        uhat = n * (L.alpha_n(n - 1) - L.alpha_n(n)) * L.c3
        return u, uhat
    v = L.beta * Fraction(n * (n - 1) * (2 * n - 1), 3)
    vhat = L.beta * (n * (2 * n - 1))
    return v, vhat


def monomials(N: int) -> Iterable[Poly]:
    for n in range(N + 1):
        yield Poly.monomial(n)
