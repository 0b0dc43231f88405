"""
Closed-form recurrence coefficients.

Covers the monic Askey-Wilson and Meixner (second kind) recurrences, the
classical-functional engine that turns Pearson data (phi, psi) into B_n and
C_{n+1} on either lattice kind, its regularity scan, and the two solution
families of the characterization D_x P_{n+1} = (gamma_{n+1}/alpha_n) S_x P_n.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Union

from exact_core import (
    I,
    ZERO,
    ParameterError,
    Poly,
    RecurrencePair,
    RegularityError,
    Scalar,
    Z,
    poly_affine_map,
    ttrr_build,
)
from functionals import PearsonData
from lattice import Lattice, QQuadraticLattice, QuadraticLattice
from logging_config import get_logger

logger = get_logger(__name__)


class Coefficients(NamedTuple):
    B: Scalar
    C: Scalar


class FamilyTerm(NamedTuple):
    B: Scalar
    C: Scalar
    pd: PearsonData


@dataclass(frozen=True)
class Violation:
    """A regularity failure found by regularity_scan."""

    n: int
    kind: str
    detail: str

    def to_dict(self) -> dict:
        return {"n": self.n, "kind": self.kind, "detail": self.detail}


# ---------------------------------------------------------------------------
# Askey-Wilson
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AWParams:
    a1: Scalar
    a2: Scalar
    a3: Scalar
    a4: Scalar
    Q: Fraction

    def __post_init__(self):
        for name in ("a1", "a2", "a3", "a4"):
            object.__setattr__(self, name, Scalar.coerce(getattr(self, name)))
        Q = Fraction(self.Q)
        if Q <= 0 or Q == 1:
            raise ParameterError("Q must be positive and different from 1")
        object.__setattr__(self, "Q", Q)
        if self.a1.is_zero:
            raise ParameterError("a1 must be nonzero")

    @property
    def q(self) -> Fraction:
        return self.Q * self.Q

    @property
    def abcd(self) -> Scalar:
        return self.a1 * self.a2 * self.a3 * self.a4

    def restriction_factors(self, k: int) -> dict:
        """The seven factors that must stay nonzero at index k."""
        qk = self.q ** k
        a = (self.a1, self.a2, self.a3, self.a4)
        factors = {"1-a1a2a3a4q^k": 1 - self.abcd * qk}
        for i in range(4):
            for j in range(i + 1, 4):
                factors[f"1-a{i + 1}a{j + 1}q^k"] = 1 - a[i] * a[j] * qk
        return factors


def _aw_check(p: AWParams, n: int) -> None:
    for k in range(n + 1):
        for label, value in p.restriction_factors(k).items():
            if value.is_zero:
                raise RegularityError(f"Askey-Wilson restriction {label} vanishes at k = {k}", index=k, detail=label)


def _aw_A(p: AWParams, n: int) -> Scalar:
    q = p.q
    abcd = p.abcd
    num = (1 - p.a1 * p.a2 * q ** n) * (1 - p.a1 * p.a3 * q ** n) * (1 - p.a1 * p.a4 * q ** n) * (1 - abcd * q ** (n - 1))
    den = p.a1 * (1 - abcd * q ** (2 * n - 1)) * (1 - abcd * q ** (2 * n))
    if den.is_zero:
        raise RegularityError(f"Askey-Wilson A_{n} has a vanishing denominator", index=n, detail="A_n")
    return num / den


def _aw_C(p: AWParams, n: int) -> Scalar:
    if n == 0:
        return ZERO
    q = p.q
    abcd = p.abcd
    num = p.a1 * (1 - q ** n) * (1 - p.a2 * p.a3 * q ** (n - 1)) * (1 - p.a2 * p.a4 * q ** (n - 1)) * (1 - p.a3 * p.a4 * q ** (n - 1))
    den = (1 - abcd * q ** (2 * n - 2)) * (1 - abcd * q ** (2 * n - 1))
    if den.is_zero:
        raise RegularityError(f"Askey-Wilson C_{n} has a vanishing denominator", index=n, detail="C_n")
    return num / den


def aw_coeffs(p: AWParams, n: int) -> Coefficients:
    """
    Monic Askey-Wilson recurrence coefficients in the variable x = cos(theta).

    B_n = (a1 + 1/a1 - A_n - C_n)/2 and C_{n+1} = A_n C_{n+1}/4.

    Raises:
        RegularityError: If a restriction factor vanishes through index n
    """
    _aw_check(p, n)
    A_n = _aw_A(p, n)
    b = (p.a1 + p.a1.inverse() - A_n - _aw_C(p, n)) / 2
    c = A_n * _aw_C(p, n + 1) / 4
    return Coefficients(b, c)


def aw_recurrence(p: AWParams, N: int) -> RecurrencePair:
    """B_0..B_{N-1} and C_1..C_N."""
    rows = [aw_coeffs(p, n) for n in range(N)]
    return RecurrencePair(tuple(r.B for r in rows), tuple(r.C for r in rows))


# ---------------------------------------------------------------------------
# Meixner polynomials of the second kind
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeixnerParams:
    b1: Scalar
    b2: Scalar

    def __post_init__(self):
        object.__setattr__(self, "b1", Scalar.coerce(self.b1))
        object.__setattr__(self, "b2", Scalar.coerce(self.b2))
        if self.b1 * self.b1 == -1:
            raise ParameterError("b1^2 must not equal -1")
        if (-self.b2).is_natural():
            raise ParameterError("b2 must not be a nonpositive integer")


def meixner2_coeffs(p: MeixnerParams, n: int) -> Coefficients:
    """B_n = -b1(2n + b2), C_{n+1} = (b1^2 + 1)(n + 1)(n + b2)."""
    b = -p.b1 * (2 * n + p.b2)
    c = (p.b1 * p.b1 + 1) * (n + 1) * (n + p.b2)
    return Coefficients(b, c)


def meixner2_recurrence(p: MeixnerParams, N: int) -> RecurrencePair:
    rows = [meixner2_coeffs(p, n) for n in range(N)]
    return RecurrencePair(tuple(r.B for r in rows), tuple(r.C for r in rows))


# ---------------------------------------------------------------------------
# Classical functionals: Pearson data -> recurrence
# ---------------------------------------------------------------------------

def d_seq(pd: PearsonData, L: Lattice, k: int) -> Scalar:
    """d_k = a gamma_k + d alpha_k (q-lattice) or a k + d (quadratic lattice)."""
    if isinstance(L, QQuadraticLattice):
        return pd.a * L.gamma_n(k) + pd.d * L.alpha_n(k)
    return pd.a * k + pd.d


def e_seq(pd: PearsonData, L: Lattice, k: int) -> Scalar:
    if isinstance(L, QQuadraticLattice):
        return pd.phi.derivative()(L.c3) * L.gamma_n(k) + pd.psi(L.c3) * L.alpha_n(k)
    return pd.b * k + pd.e + 2 * L.beta * pd.d * (k * k)


def phi_bracket(pd: PearsonData, L: Lattice, n: int) -> Poly:
    """The quadratic phi^{[n]} whose value at the regularity node enters C_{n+1}."""
    if isinstance(L, QQuadraticLattice):
        alpha2m1 = L.alpha * L.alpha - 1
        c1c2 = L.c1 * L.c2
        shifted = Z - L.c3
        lead = pd.d * alpha2m1 * L.gamma_n(2 * n) + pd.a * L.alpha_n(2 * n)
        lin = pd.phi.derivative()(L.c3) * L.alpha_n(n) + pd.psi(L.c3) * alpha2m1 * L.gamma_n(n)
        return (
            (shifted * shifted - 2 * c1c2).scale(lead)
            + shifted.scale(lin)
            + pd.phi(L.c3)
            + 2 * pd.a * c1c2
        )
    beta = L.beta
    bn2 = beta * (n * n)
    d_n = d_seq(pd, L, n)
    const = (
        pd.phi(bn2)
        + 2 * beta * n * pd.psi(bn2)
        - Fraction(n, 4) * (16 * beta * L.c6 - L.c5 * L.c5) * d_n
    )
    return Poly([const, pd.b + 6 * beta * n * d_n, pd.a])


def regularity_node(pd: PearsonData, L: Lattice, n: int) -> Scalar:
    """c3 - e_n/d_{2n} (q-lattice) or -beta n^2 - e_n/d_{2n} (quadratic lattice)."""
    d2n = d_seq(pd, L, 2 * n)
    if d2n.is_zero:
        raise RegularityError(f"d_{2 * n} vanishes", index=2 * n, detail="d_n")
    shift = e_seq(pd, L, n) / d2n
    if isinstance(L, QQuadraticLattice):
        return L.c3 - shift
    return -L.beta * (n * n) - shift


def _require_d(pd: PearsonData, L: Lattice, upto: int) -> None:
    for k in range(upto + 1):
        if d_seq(pd, L, k).is_zero:
            raise RegularityError(f"d_{k} vanishes; the functional is not regular", index=k, detail="d_n")


def classical_coeffs(pd: PearsonData, L: Lattice, n: int) -> Coefficients:
    """
    Recurrence coefficients of the classical functional D_x(phi u) = S_x(psi u).

    Args:
        pd: Pearson data with d != 0
        L: Lattice
        n: Index

    Returns:
        (B_n, C_{n+1})

    Raises:
        RegularityError: If d_k = 0 for some k <= 2n+1
    """
    if n < 0:
        raise ParameterError("n must be nonnegative")
    _require_d(pd, L, 2 * n + 1)
    gn = L.gamma_n(n)
    gn1 = L.gamma_n(n + 1)
    d = lambda k: d_seq(pd, L, k)
    e = lambda k: e_seq(pd, L, k)

    b = -gn1 * e(n) / d(2 * n)
    if not gn.is_zero:
        b = b + gn * e(n - 1) / d(2 * n - 2)
    if isinstance(L, QQuadraticLattice):
        b = b + L.c3
    else:
        b = b - 2 * L.beta * (n * (n - 1))

    value = phi_bracket(pd, L, n)(regularity_node(pd, L, n))
    if n == 0:
        c = -gn1 / d(1) * value
    else:
        c = -gn1 * d(n - 1) / (d(2 * n - 1) * d(2 * n + 1)) * value
    return Coefficients(b, c)


def classical_recurrence(pd: PearsonData, L: Lattice, N: int) -> RecurrencePair:
    """B_0..B_{N-1} and C_1..C_N from the engine."""
    rows = [classical_coeffs(pd, L, n) for n in range(N)]
    return RecurrencePair(tuple(r.B for r in rows), tuple(r.C for r in rows))


def regularity_scan(pd: PearsonData, L: Lattice, N: int) -> list[Violation]:
    """
    Every n <= N where d_n or phi^{[n]} at the regularity node vanishes.

    Never raises; a node that cannot be formed is itself reported.
    """
    found = []
    for n in range(N + 1):
        if d_seq(pd, L, n).is_zero:
            found.append(Violation(n, "d_n", f"d_{n} = 0"))
        if d_seq(pd, L, 2 * n).is_zero:
            found.append(Violation(n, "node", f"d_{2 * n} = 0, regularity node undefined"))
            continue
        value = phi_bracket(pd, L, n)(regularity_node(pd, L, n))
        if value.is_zero:
            found.append(Violation(n, "phi_n", f"phi^[{n}] vanishes at the regularity node"))
    if found:
        logger.warning(f"Regularity scan found {len(found)} violation(s) up to n = {N}")
    return found


# ---------------------------------------------------------------------------
# Solution on q-quadratic lattices (Askey-Wilson subfamily)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Thm1Params:
    """q-lattice solution seeded by a with r = a^2."""

    L: QQuadraticLattice
    a: Scalar

    def __post_init__(self):
        if not isinstance(self.L, QQuadraticLattice):
            raise ParameterError("The Askey-Wilson solution lives on a q-quadratic lattice")
        if (self.L.c1 * self.L.c2).is_zero:
            raise ParameterError("c1*c2 must be nonzero")
        object.__setattr__(self, "a", Scalar.coerce(self.a))
        if self.a.is_zero:
            raise ParameterError("a must be nonzero")

    @property
    def r(self) -> Scalar:
        return self.a * self.a

    def excluded_index(self, depth: int) -> Optional[int]:
        """First k <= depth with r = q^{k-1} or r = -q^{-k}."""
        L, r = self.L, self.r
        for k in range(depth + 1):
            if r == L.q_pow(k - 1) or r == -L.q_pow(-k):
                return k
        return None

    def validate(self, depth: int) -> None:
        k = self.excluded_index(depth)
        if k is not None:
            raise RegularityError(
                f"r = {self.r} lies in the excluded set at k = {k} (C_{k + 1} vanishes)",
                index=k + 1,
                detail="r",
            )


def thm1_c1(p: Thm1Params) -> Scalar:
    """C_1 = (1 - q^{-1})(1 + r^{-1})(1 - r q) c1 c2 / 2."""
    L, r = p.L, p.r
    q = L.q
    return (1 - 1 / q) * (1 + r.inverse()) * (1 - r * q) * L.c1 * L.c2 / 2


def thm1_pearson_data(p: Thm1Params) -> PearsonData:
    """psi = z - c3, phi = -(alpha - 1/alpha)(z - c3)^2 - C_1/alpha."""
    return characterization_pearson_data(p.L, p.L.c3, thm1_c1(p))


def thm1_c(p: Thm1Params, n: int) -> Scalar:
    """Closed product form of C_{n+1}."""
    return thm1_c_for_r(p.L, p.r, n)


def thm1_c_for_r(L: QQuadraticLattice, r, n: int) -> Scalar:
    r = Scalar.coerce(r)
    qp = L.q_pow
    num = (1 + qp(n - 2)) * (1 - qp(n + 1)) * (1 + r * qp(n)) * (1 - r.inverse() * qp(n - 1))
    den = (1 + qp(2 * n - 2)) * (1 + qp(2 * n))
    return L.c1 * L.c2 * num / den


def thm1_family(p: Thm1Params, n: int) -> FamilyTerm:
    """
    B_n, C_{n+1} and the Pearson data of the q-lattice solution.

    Raises:
        RegularityError: If r is excluded through index n
    """
    p.validate(n)
    return FamilyTerm(p.L.c3, thm1_c(p, n), thm1_pearson_data(p))


def thm1_recurrence(p: Thm1Params, N: int) -> RecurrencePair:
    p.validate(N)
    return RecurrencePair(tuple(p.L.c3 for _ in range(N)), tuple(thm1_c(p, n) for n in range(N)))


def thm1_regularity_value(p: Thm1Params, n: int) -> Scalar:
    """phi^{[n]} at c3 for the family: -c1c2(1-q)/(2 alpha) (1 + r q^n)(1 - q^{n-1}/r) q^{-n}."""
    L, r = p.L, p.r
    qp = L.q_pow
    return -L.c1 * L.c2 * (1 - L.q) / (2 * L.alpha) * (1 + r * qp(n)) * (1 - r.inverse() * qp(n - 1)) * qp(-n)


def thm1_aw_params(p: Thm1Params) -> AWParams:
    """The quadruple (a, -a, i/(aQ), -i/(aQ))."""
    a, Q = p.a, p.L.Q
    third = I / (a * Q)
    return AWParams(a, -a, third, -third, Q)


def thm1_affine_scale(p: Thm1Params) -> Optional[Scalar]:
    """2 sqrt(c1 c2) when the root lies in Q(i), else None."""
    root = (p.L.c1 * p.L.c2).sqrt_exact()
    return None if root is None else 2 * root


def thm1_aw_polys(p: Thm1Params, N: int) -> Optional[list[Poly]]:
    """
    P_n(z) = lam^n Q_n((z - c3)/lam) with Q_n monic Askey-Wilson, lam = 2 sqrt(c1 c2).

    Returns None when sqrt(c1 c2) leaves Q(i).
    """
    lam = thm1_affine_scale(p)
    if lam is None:
        return None
    aw = ttrr_build(aw_recurrence(thm1_aw_params(p), N), N)
    inv = lam.inverse()
    return [poly_affine_map(qn, inv, -p.L.c3 * inv).scale(lam ** n) for n, qn in enumerate(aw)]


class RRoots(NamedTuple):
    r_plus: Scalar
    r_minus: Scalar


@dataclass(frozen=True)
class NotRepresentable:
    """Both r-roots exist but leave Q(i)."""

    discriminant: Scalar


def r_quadratic(L: QQuadraticLattice, C1) -> tuple[Scalar, Scalar, Scalar]:
    """(q-1)c1c2 r^2 + 2(C1 + 2(alpha^2-1)c1c2) r - (1 - 1/q)c1c2 = 0."""
    c1c2 = L.c1 * L.c2
    q = L.q
    A = (q - 1) * c1c2
    B = 2 * (Scalar.coerce(C1) + 2 * (L.alpha * L.alpha - 1) * c1c2)
    C = -(1 - 1 / q) * c1c2
    return A, B, C


def r_roots_from_c1(L: QQuadraticLattice, C1) -> Union[RRoots, NotRepresentable]:
    """
    Parameters r realising a prescribed C_1 on a q-lattice.

    Returns:
        RRoots when the discriminant is a square in Q(i), else NotRepresentable
    """
    if not isinstance(L, QQuadraticLattice):
        raise ParameterError("r-roots are defined on q-quadratic lattices")
    if (L.c1 * L.c2).is_zero:
        raise ParameterError("c1*c2 must be nonzero")
    A, B, C = r_quadratic(L, C1)
    disc = B * B - 4 * A * C
    root = disc.sqrt_exact()
    if root is None:
        return NotRepresentable(disc)
    return RRoots((-B + root) / (2 * A), (-B - root) / (2 * A))


def conjugate_r(L: QQuadraticLattice, r) -> Scalar:
    """The involution r -> -1/(q r) exchanging the two roots."""
    return -(Scalar.coerce(r) * L.q).inverse()


def thm1_from_r(L: QQuadraticLattice, r) -> Optional[Thm1Params]:
    """Seed a with a^2 = r, or None if sqrt(r) leaves Q(i)."""
    a = Scalar.coerce(r).sqrt_exact()
    if a is None or a.is_zero:
        return None
    return Thm1Params(L, a)


# ---------------------------------------------------------------------------
# Solution on linear lattices (Meixner second kind, b1 = 0)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Thm2Params:
    L: QuadraticLattice
    B0: Scalar
    C1: Scalar

    def __post_init__(self):
        if not isinstance(self.L, QuadraticLattice) or not self.L.beta.is_zero:
            raise ParameterError("The Meixner solution needs a linear lattice (beta = 0)")
        object.__setattr__(self, "B0", Scalar.coerce(self.B0))
        object.__setattr__(self, "C1", Scalar.coerce(self.C1))

    @property
    def ratio(self) -> Scalar:
        """4 C1 / c5^2."""
        return 4 * self.C1 / (self.L.c5 * self.L.c5)

    def validate(self) -> None:
        if self.ratio.is_natural():
            k = int(self.ratio.re)
            raise RegularityError(f"4C1/c5^2 = {self.ratio} is a natural number; C_{k + 1} vanishes", index=k + 1, detail="C1")


def thm2_c(p: Thm2Params, n: int) -> Scalar:
    """C_{n+1} = -(c5^2/4)(n + 1)(n - 4C1/c5^2)."""
    return -(p.L.c5 * p.L.c5) / 4 * (n + 1) * (n - p.ratio)


def thm2_pearson_data(p: Thm2Params) -> PearsonData:
    """psi = z - B0, phi = -C1 (beta = 0)."""
    return characterization_pearson_data(p.L, p.B0, p.C1)


def thm2_family(p: Thm2Params, n: int) -> FamilyTerm:
    """
    Raises:
        RegularityError: If 4C1/c5^2 is a natural number
    """
    p.validate()
    return FamilyTerm(p.B0, thm2_c(p, n), thm2_pearson_data(p))


def thm2_recurrence(p: Thm2Params, N: int) -> RecurrencePair:
    p.validate()
    return RecurrencePair(tuple(p.B0 for _ in range(N)), tuple(thm2_c(p, n) for n in range(N)))


def thm2_meixner_params(p: Thm2Params) -> MeixnerParams:
    return MeixnerParams(ZERO, -p.ratio)


def thm2_meixner_polys(p: Thm2Params, N: int) -> list[Poly]:
    """P_n(z) = (i c5/2)^n M_n(2i(B0 - z)/c5; 0, -4C1/c5^2)."""
    lam = I * p.L.c5 / 2
    meixner = ttrr_build(meixner2_recurrence(thm2_meixner_params(p), N), N)
    slope = -2 * I / p.L.c5
    offset = 2 * I * p.B0 / p.L.c5
    return [poly_affine_map(m, slope, offset).scale(lam ** n) for n, m in enumerate(meixner)]


def thm2_scaling(p: Thm2Params) -> Scalar:
    """(i c5/2)^2, the factor between family and Meixner C_n."""
    lam = I * p.L.c5 / 2
    return lam * lam


def characterization_pearson_data(L: Lattice, B0, C1) -> PearsonData:
    """
    Pearson data forced on any solution of the characterization with given B0, C1.

    psi = z - B0, and phi = -(alpha - 1/alpha)(z - c3)(z - B0) - C1/alpha on
    q-lattices or phi = -2 beta (z - B0) - C1 on quadratic lattices.
    """
    B0, C1 = Scalar.coerce(B0), Scalar.coerce(C1)
    shifted = Z - B0
    if isinstance(L, QQuadraticLattice):
        phi = ((Z - L.c3) * shifted).scale(-(L.alpha - L.alpha.inverse())) - C1 / L.alpha
        return PearsonData(phi, shifted)
    return PearsonData(shifted.scale(-2 * L.beta) - C1, shifted)
