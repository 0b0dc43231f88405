"""
Lattice definitions and their structure sequences.

Two lattice families are supported:

* q-quadratic: x(s) = c1 q^{-s} + c2 q^{s} + c3, with q = Q^2 and Q > 0, Q != 1
* quadratic:   x(s) = 4 beta s^2 + c5 s + c6 (linear when beta = 0)

Each lattice owns alpha, beta, the sequences alpha_n, beta_n, gamma_n and the
structural polynomials U1, U2 that enter the product rules of D_x and S_x.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import ClassVar, Union

from exact_core import ONE, ZERO, ParameterError, Poly, Scalar, Z


@dataclass(frozen=True)
class LatticeSeq:
    n: int
    alpha_n: Scalar
    beta_n: Scalar
    gamma_n: Scalar


@dataclass(frozen=True)
class QQuadraticLattice:
    """x(s) = c1 q^{-s} + c2 q^{s} + c3 with q = Q^2."""

    Q: Fraction
    c1: Scalar
    c2: Scalar
    c3: Scalar = ZERO

    kind: ClassVar[str] = "q"

    def __post_init__(self):
        Q = self.Q
        if isinstance(Q, Scalar):
            Q = Q.as_fraction()
        Q = Fraction(Q)
        if Q <= 0:
            raise ParameterError("Q must be positive (q > 0)")
        if Q == 1:
            raise ParameterError("Q = 1 is the quadratic case; use QuadraticLattice")
        object.__setattr__(self, "Q", Q)
        for name in ("c1", "c2", "c3"):
            object.__setattr__(self, name, Scalar.coerce(getattr(self, name)))
        if self.c1.is_zero and self.c2.is_zero:
            raise ParameterError("(c1, c2) must not both vanish")

    @property
    def q(self) -> Fraction:
        return self.Q * self.Q

    def q_pow(self, k: int) -> Fraction:
        """q^k for integer k."""
        return self.Q ** (2 * k)

    @property
    def alpha(self) -> Scalar:
        return Scalar((self.Q + 1 / self.Q) / 2)

    @property
    def beta(self) -> Scalar:
        return (1 - self.alpha) * self.c3

    def alpha_n(self, n: int) -> Scalar:
        return Scalar((self.Q ** n + self.Q ** (-n)) / 2)

    def gamma_n(self, n: int) -> Scalar:
        return Scalar((self.Q ** n - self.Q ** (-n)) / (self.Q - 1 / self.Q))

    def beta_n(self, n: int) -> Scalar:
        return (1 - self.alpha_n(n)) * self.c3

    def x(self, s) -> Scalar:
        s = _as_rational(s)
        twice = 2 * s
        if twice.denominator != 1:
            raise ParameterError(f"x(s) on a q-lattice needs 2s integral, got s = {s}")
        k = int(twice)
        return self.c1 * (self.Q ** (-k)) + self.c2 * (self.Q ** k) + self.c3

    def structural_polys(self) -> tuple[Poly, Poly]:
        factor = self.alpha * self.alpha - 1
        shifted = Z - self.c3
        u1 = shifted.scale(factor)
        u2 = (shifted * shifted - 4 * self.c1 * self.c2).scale(factor)
        return u1, u2

    def to_dict(self) -> dict:
        return {"kind": self.kind, "Q": str(self.Q), "c1": str(self.c1), "c2": str(self.c2), "c3": str(self.c3)}


@dataclass(frozen=True)
class QuadraticLattice:
    """x(s) = 4 beta s^2 + c5 s + c6 (the c4 = 4 beta convention)."""

    beta: Scalar
    c5: Scalar
    c6: Scalar = ZERO

    kind: ClassVar[str] = "quadratic"

    def __post_init__(self):
        for name in ("beta", "c5", "c6"):
            object.__setattr__(self, name, Scalar.coerce(getattr(self, name)))
        if self.beta.is_zero and self.c5.is_zero:
            raise ParameterError("(beta, c5) must not both vanish")

    @property
    def is_linear(self) -> bool:
        return self.beta.is_zero

    @property
    def alpha(self) -> Scalar:
        return ONE

    def alpha_n(self, n: int) -> Scalar:
        return ONE

    def gamma_n(self, n: int) -> Scalar:
        return Scalar(n)

    def beta_n(self, n: int) -> Scalar:
        return self.beta * (n * n)

    def x(self, s) -> Scalar:
        s = _as_rational(s)
        return self.beta * (4 * s * s) + self.c5 * s + self.c6

    def structural_polys(self) -> tuple[Poly, Poly]:
        u1 = Poly.constant(2 * self.beta)
        u2 = (Z - self.c6).scale(4 * self.beta) + self.c5 * self.c5 / 4
        return u1, u2

    def to_dict(self) -> dict:
        return {"kind": self.kind, "beta": str(self.beta), "c5": str(self.c5), "c6": str(self.c6)}


Lattice = Union[QQuadraticLattice, QuadraticLattice]


def _as_rational(s) -> Fraction:
    if isinstance(s, Scalar):
        return s.as_fraction()
    return Fraction(s)


def lattice_seq(L: Lattice, n: int) -> LatticeSeq:
    """
    Structure sequences at index n (negative n allowed).

    Args:
        L: Lattice
        n: Any integer

    Returns:
        LatticeSeq with alpha_n, beta_n, gamma_n
    """
    return LatticeSeq(n=n, alpha_n=L.alpha_n(n), beta_n=L.beta_n(n), gamma_n=L.gamma_n(n))


def structural_polys(L: Lattice) -> tuple[Poly, Poly]:
    """The polynomials U1, U2 of the S_x product rule."""
    return L.structural_polys()


def x_eval(L: Lattice, s) -> Scalar:
    """Exact lattice node x(s)."""
    return L.x(s)


def gamma_factorial(L: Lattice, m: int) -> Scalar:
    """gamma_1 * ... * gamma_m, with gamma_0! = 1."""
    if m < 0:
        raise ParameterError("gamma factorial needs m >= 0")
    acc = ONE
    for j in range(1, m + 1):
        acc = acc * L.gamma_n(j)
    return acc
