"""
Truncated moment functionals and the dual operator calculus.

A functional u is stored through its moments m_k = <u, z^k>. Only the first
``valid_len`` moments are trustworthy; every operation that loses moments
records the shrinkage in the result's ``valid_len``.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ddops import OperatorTables, apply
from exact_core import (
    ONE,
    ONE_POLY,
    ZERO,
    DegreeBoundError,
    ParameterError,
    Poly,
    RecurrencePair,
    RegularityError,
    Scalar,
    Z,
)
from logging_config import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class MomentFunctional:
    moments: tuple = field(default_factory=tuple)
    valid_len: Optional[int] = None

    def __post_init__(self):
        moments = tuple(Scalar.coerce(m) for m in self.moments)
        object.__setattr__(self, "moments", moments)
        valid_len = len(moments) if self.valid_len is None else self.valid_len
        if valid_len < 0 or valid_len > len(moments):
            raise ParameterError(f"valid_len {valid_len} outside 0..{len(moments)}")
        object.__setattr__(self, "valid_len", valid_len)

    def moment(self, k: int) -> Scalar:
        if k >= self.valid_len:
            raise DegreeBoundError(f"Moment m_{k} is beyond the valid length {self.valid_len}")
        return self.moments[k]

    @property
    def valid(self) -> tuple:
        return self.moments[:self.valid_len]

    def add(self, other: "MomentFunctional") -> "MomentFunctional":
        n = min(self.valid_len, other.valid_len)
        return MomentFunctional(tuple(a + b for a, b in zip(self.valid[:n], other.valid[:n])), n)

    def sub(self, other: "MomentFunctional") -> "MomentFunctional":
        return self.add(other.scale(-1))

    def scale(self, factor) -> "MomentFunctional":
        factor = Scalar.coerce(factor)
        return MomentFunctional(tuple(m * factor for m in self.valid), self.valid_len)

    def __add__(self, other):
        return self.add(other)

    def __sub__(self, other):
        return self.sub(other)

    def to_dict(self) -> dict:
        return {"moments": [str(m) for m in self.valid], "valid_len": self.valid_len}


@dataclass(frozen=True)
class Comparison:
    """Outcome of comparing two functionals on their common valid range."""

    compared: tuple
    first_mismatch: Optional[int] = None
    lhs: Optional[Scalar] = None
    rhs: Optional[Scalar] = None

    @property
    def ok(self) -> bool:
        return self.first_mismatch is None


def compare_functionals(u: MomentFunctional, v: MomentFunctional) -> Comparison:
    """Compare moments on [0, min(valid_len) - 1] and report the first mismatch."""
    n = min(u.valid_len, v.valid_len)
    for k in range(n):
        if u.moments[k] != v.moments[k]:
            return Comparison((0, n - 1), k, u.moments[k], v.moments[k])
    return Comparison((0, n - 1))


@dataclass(frozen=True)
class PearsonData:
    """phi(z) = a z^2 + b z + c and psi(z) = d z + e in D_x(phi u) = S_x(psi u)."""

    phi: Poly
    psi: Poly

    def __post_init__(self):
        if self.phi.degree > 2:
            raise ParameterError(f"deg phi must be at most 2, got {self.phi.degree}")
        if self.psi.degree != 1:
            raise ParameterError(f"deg psi must be exactly 1, got {self.psi.degree}")

    @classmethod
    def from_descending(cls, phi: Sequence, psi: Sequence) -> "PearsonData":
        """Build from descending coefficient lists (a, b, c) and (d, e)."""
        return cls(Poly(list(reversed(list(phi)))), Poly(list(reversed(list(psi)))))

    @property
    def a(self) -> Scalar:
        return self.phi.coeff(2)

    @property
    def b(self) -> Scalar:
        return self.phi.coeff(1)

    @property
    def c(self) -> Scalar:
        return self.phi.coeff(0)

    @property
    def d(self) -> Scalar:
        return self.psi.coeff(1)

    @property
    def e(self) -> Scalar:
        return self.psi.coeff(0)

    def to_dict(self) -> dict:
        return {"phi": [str(x) for x in self.phi.coeffs], "psi": [str(x) for x in self.psi.coeffs]}


def act(u: MomentFunctional, p: Poly) -> Scalar:
    """
    <u, p> as an exact dot product of coefficients and moments.

    Raises:
        DegreeBoundError: If deg p is not below u.valid_len
    """
    if p.degree >= u.valid_len:
        raise DegreeBoundError(f"deg p = {p.degree} needs more than {u.valid_len} valid moments")
    acc = ZERO
    for c, m in zip(p.coeffs, u.moments):
        acc = acc + c * m
    return acc


def left_multiply(f: Poly, u: MomentFunctional) -> MomentFunctional:
    """(f u)_k = <u, f z^k>; valid_len shrinks by deg f."""
    shrink = max(f.degree, 0)
    new_len = max(u.valid_len - shrink, 0)
    moments = []
    for k in range(new_len):
        moments.append(act(u, f * Poly.monomial(k)))
    return MomentFunctional(tuple(moments), new_len)


def transform(which: str, T: OperatorTables, u: MomentFunctional) -> MomentFunctional:
    """
    Dual action: <D_x u, z^k> = -<u, D_x z^k> and <S_x u, z^k> = <u, S_x z^k>.

    The valid length is preserved.

    Raises:
        DegreeBoundError: If the tables do not reach degree valid_len - 1
    """
    if u.valid_len - 1 > T.N:
        raise DegreeBoundError(f"Tables of degree {T.N} cannot transform {u.valid_len} moments")
    sign = -1 if which == "dx" else 1
    moments = [act(u, apply(which, T, Poly.monomial(k))) * sign for k in range(u.valid_len)]
    return MomentFunctional(tuple(moments), u.valid_len)


def dual_basis(P: Sequence[Poly], n: int, M: int) -> MomentFunctional:
    """
    Truncated dual functional a_n with <a_n, P_m> = delta_{nm} for 0 <= m <= M.

    Args:
        P: Simple set covering degrees 0..M
        n: Index of the dual element
        M: Highest degree matched

    Returns:
        MomentFunctional with M+1 moments

    Raises:
        ParameterError: If P is not a simple set up to degree M
    """
    if len(P) < M + 1:
        raise ParameterError(f"Need P_0..P_{M}, got {len(P)} polynomials")
    a = []
    for m in range(M + 1):
        p = P[m]
        if p.degree != m:
            raise ParameterError(f"P is not a simple set: deg P_{m} = {p.degree}")
        rhs = ONE if m == n else ZERO
        for j in range(m):
            rhs = rhs - p.coeffs[j] * a[j]
        a.append(rhs / p.coeffs[m])
    return MomentFunctional(tuple(a), M + 1)


def pearson_relation(pd: PearsonData, T: OperatorTables, n: int) -> Poly:
    """phi D_x z^n + psi S_x z^n, of degree n + 1 with leading coefficient d_n."""
    zn = Poly.monomial(n)
    return pd.phi * apply("dx", T, zn) + pd.psi * apply("sx", T, zn)


def pearson_moments(pd: PearsonData, T: OperatorTables, N: int) -> MomentFunctional:
    """
    Solve D_x(phi u) = S_x(psi u) for the moments m_0..m_N with m_0 = 1.

    Args:
        pd: Pearson data
        T: Tables of degree at least N - 1
        N: Highest moment index

    Returns:
        MomentFunctional with N+1 moments

    Raises:
        RegularityError: If some d_n vanishes (index n reported)
    """
    if N < 0:
        raise ParameterError("N must be nonnegative")
    if N - 1 > T.N:
        raise DegreeBoundError(f"Tables of degree {T.N} cannot produce {N + 1} moments")
    moments = [ONE]
    for n in range(N):
        rel = pearson_relation(pd, T, n)
        lead = rel.coeff(n + 1)
        if lead.is_zero:
            raise RegularityError(f"d_{n} vanishes; the Pearson equation does not fix m_{n + 1}", index=n, detail="d_n")
        acc = ZERO
        for j in range(n + 1):
            acc = acc + rel.coeff(j) * moments[j]
        moments.append(-acc / lead)
    logger.debug(f"Solved Pearson moments m_0..m_{N}")
    return MomentFunctional(tuple(moments), N + 1)


def _gram_schmidt(u: MomentFunctional, N: int):
    if N < 0:
        raise ParameterError("N must be nonnegative")
    if u.valid_len < 2 * N + 1:
        raise DegreeBoundError(f"Recovering {N} recurrence steps needs {2 * N + 1} moments, have {u.valid_len}")
    polys = [ONE_POLY]
    norms = []
    B, C = [], []
    for n in range(N + 1):
        kappa = act(u, polys[n] * polys[n])
        if kappa.is_zero:
            raise RegularityError(f"<u, P_{n}^2> vanishes; u is not regular", index=n, detail="gram")
        norms.append(kappa)
        if n >= 1:
            C.append(kappa / norms[n - 1])
        if n == N:
            break
        b_n = act(u, Z * polys[n] * polys[n]) / kappa
        B.append(b_n)
        nxt = (Z - b_n) * polys[n]
        if n >= 1:
            nxt = nxt - polys[n - 1].scale(C[n - 1])
        polys.append(nxt)
        logger.debug(f"Gram-Schmidt step {n}: B_{n} = {b_n}")
    return RecurrencePair(tuple(B), tuple(C)), polys, norms


def recurrence_from_moments(u: MomentFunctional, N: int) -> RecurrencePair:
    """
    Recover B_0..B_{N-1} and C_1..C_N from 2N+1 moments.

    Raises:
        RegularityError: If <u, P_n^2> = 0 for some n <= N
    """
    rec, _, _ = _gram_schmidt(u, N)
    return rec


def gram_norms(u: MomentFunctional, N: int) -> list[Scalar]:
    """kappa_n = <u, P_n^2> for 0 <= n <= N."""
    _, _, norms = _gram_schmidt(u, N)
    return norms


def pearson_residual(pd: PearsonData, T: OperatorTables, u: MomentFunctional, k: int) -> Scalar:
    """<D_x(phi u) - S_x(psi u), z^k>; zero iff the k-th Pearson relation holds."""
    if k + 2 > u.valid_len:
        raise DegreeBoundError(f"Residual at k = {k} needs {k + 2} moments, have {u.valid_len}")
    return -act(u, pearson_relation(pd, T, k))
