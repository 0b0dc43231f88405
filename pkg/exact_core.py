"""
Exact arithmetic core for lattice calculus.
Provides the Gaussian rational scalar field, dense polynomials in the lattice
variable z, and the monic three-term recurrence builder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Union

from logging_config import get_logger

logger = get_logger(__name__)


class LatopsError(ValueError):
    """Base class for every error raised by the library."""


class ParameterError(LatopsError):
    """A parameter lies outside the admissible set of an operation."""


class DegreeBoundError(LatopsError):
    """A degree or moment count exceeds what the inputs can support."""


class DegenerateStepError(LatopsError):
    """The lattice step x(s+1/2) - x(s-1/2) vanishes at the requested node."""


class RegularityError(LatopsError):
    """
    A regularity condition fails at a definite index.

    Args:
        message: Human-readable description
        index: The n at which the vanishing quantity was met
        detail: Optional short tag naming the quantity (e.g. "C_n", "d_n")
    """

    def __init__(self, message: str, index: Optional[int] = None, detail: Optional[str] = None):
        super().__init__(message)
        self.index = index
        self.detail = detail


Number = Union[int, Fraction, "Scalar"]


class Scalar:
    """
    Exact Gaussian rational re + im*i with Fraction parts.

    Instances are immutable and canonical, so structural equality is
    semantic equality.
    """

    __slots__ = ("re", "im")

    def __init__(self, re: Union[int, Fraction, "Scalar"] = 0, im: Union[int, Fraction] = 0):
        if isinstance(re, Scalar):
            re, im = re.re, re.im + Fraction(im)
        object.__setattr__(self, "re", re if type(re) is Fraction else Fraction(re))
        object.__setattr__(self, "im", im if type(im) is Fraction else Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("Scalar is immutable")

    @classmethod
    def _raw(cls, re: Fraction, im: Fraction) -> "Scalar":
        obj = object.__new__(cls)
        object.__setattr__(obj, "re", re)
        object.__setattr__(obj, "im", im)
        return obj

    @staticmethod
    def coerce(value: Number) -> "Scalar":
        """Convert int, Fraction or Scalar to a Scalar."""
        if isinstance(value, Scalar):
            return value
        if isinstance(value, (int, Fraction)):
            return Scalar._raw(Fraction(value), Fraction(0))
        raise TypeError(f"Cannot interpret {value!r} as an exact scalar")

    @property
    def is_zero(self) -> bool:
        return not self.re and not self.im

    @property
    def is_real(self) -> bool:
        return not self.im

    def is_natural(self) -> bool:
        """True for 0, 1, 2, ... (real nonnegative integers)."""
        return not self.im and self.re.denominator == 1 and self.re >= 0

    def as_fraction(self) -> Fraction:
        if self.im:
            raise ParameterError(f"{self} is not real")
        return self.re

    def conjugate(self) -> "Scalar":
        return Scalar._raw(self.re, -self.im)

    def norm(self) -> Fraction:
        """Squared modulus re^2 + im^2."""
        return self.re * self.re + self.im * self.im

    def __bool__(self) -> bool:
        return not self.is_zero

    def __eq__(self, other) -> bool:
        if isinstance(other, Scalar):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return not self.im and self.re == other
        return NotImplemented

    def __hash__(self) -> int:
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def __neg__(self) -> "Scalar":
        return Scalar._raw(-self.re, -self.im)

    def __pos__(self) -> "Scalar":
        return self

    def __add__(self, other) -> "Scalar":
        if not isinstance(other, Scalar):
            if not isinstance(other, (int, Fraction)):
                return NotImplemented
            return Scalar._raw(self.re + other, self.im)
        return Scalar._raw(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other) -> "Scalar":
        if not isinstance(other, Scalar):
            if not isinstance(other, (int, Fraction)):
                return NotImplemented
            return Scalar._raw(self.re - other, self.im)
        return Scalar._raw(self.re - other.re, self.im - other.im)

    def __rsub__(self, other) -> "Scalar":
        if not isinstance(other, (int, Fraction)):
            return NotImplemented
        return Scalar._raw(other - self.re, -self.im)

    def __mul__(self, other) -> "Scalar":
        if not isinstance(other, Scalar):
            if not isinstance(other, (int, Fraction)):
                return NotImplemented
            return Scalar._raw(self.re * other, self.im * other)
        a, b, c, d = self.re, self.im, other.re, other.im
        if not b and not d:
            return Scalar._raw(a * c, b)
        return Scalar._raw(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def inverse(self) -> "Scalar":
        if self.is_zero:
            raise ZeroDivisionError("Scalar division by zero")
        if not self.im:
            return Scalar._raw(1 / self.re, self.im)
        n = self.norm()
        return Scalar._raw(self.re / n, -self.im / n)

    def __truediv__(self, other) -> "Scalar":
        if not isinstance(other, Scalar):
            if not isinstance(other, (int, Fraction)):
                return NotImplemented
            if not other:
                raise ZeroDivisionError("Scalar division by zero")
            return Scalar._raw(self.re / other, self.im / other)
        return self * other.inverse()

    def __rtruediv__(self, other) -> "Scalar":
        if not isinstance(other, (int, Fraction)):
            return NotImplemented
        return self.inverse() * other

    def __pow__(self, exponent: int) -> "Scalar":
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = ONE
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def sqrt_exact(self) -> Optional["Scalar"]:
        """
        Square root inside Q(i), or None when the root leaves the field.

        The returned root has nonnegative real part (and nonnegative
        imaginary part when the real part is zero).
        """
        if self.is_zero:
            return ZERO
        modulus = _rational_sqrt(self.norm())
        if modulus is None:
            return None
        a = _rational_sqrt((modulus + self.re) / 2)
        b = _rational_sqrt((modulus - self.re) / 2)
        if a is None or b is None:
            return None
        if self.im < 0:
            b = -b
        return Scalar._raw(a, b)

    def __str__(self) -> str:
        if not self.im:
            return str(self.re)
        imag = f"{self.im}*i"
        if not self.re:
            return imag
        if self.im < 0:
            return f"{self.re}-{-self.im}*i"
        return f"{self.re}+{imag}"

    def __repr__(self) -> str:
        return f"Scalar('{self}')"


def _rational_sqrt(value: Fraction) -> Optional[Fraction]:
    if value < 0:
        return None
    num, den = value.numerator, value.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn != num or rd * rd != den:
        return None
    return Fraction(rn, rd)


ZERO = Scalar._raw(Fraction(0), Fraction(0))
ONE = Scalar._raw(Fraction(1), Fraction(0))
I = Scalar._raw(Fraction(0), Fraction(1))


class Poly:
    """
    Dense polynomial in z with Scalar coefficients in ascending degree.

    Trailing zeros are stripped on construction; the zero polynomial has an
    empty coefficient tuple and degree -1.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Number] = ()):
        cs = [Scalar.coerce(c) for c in coeffs]
        while cs and cs[-1].is_zero:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    @classmethod
    def _trusted(cls, coeffs: list) -> "Poly":
        while coeffs and coeffs[-1].is_zero:
            coeffs.pop()
        obj = object.__new__(cls)
        object.__setattr__(obj, "coeffs", tuple(coeffs))
        return obj

    @classmethod
    def constant(cls, value: Number) -> "Poly":
        return cls([value])

    @classmethod
    def monomial(cls, n: int, coeff: Number = 1) -> "Poly":
        return cls([ZERO] * n + [Scalar.coerce(coeff)])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self) -> Scalar:
        return self.coeffs[-1] if self.coeffs else ZERO

    def coeff(self, k: int) -> Scalar:
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return ZERO

    def is_monic(self) -> bool:
        return bool(self.coeffs) and self.coeffs[-1] == ONE

    def __len__(self) -> int:
        return len(self.coeffs)

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction, Scalar)):
            return self.coeffs == Poly.constant(other).coeffs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __neg__(self) -> "Poly":
        return Poly._trusted([-c for c in self.coeffs])

    def __add__(self, other) -> "Poly":
        other = _as_poly(other)
        if other is NotImplemented:
            return other
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for k, c in enumerate(b):
            out[k] = out[k] + c
        return Poly._trusted(out)

    __radd__ = __add__

    def __sub__(self, other) -> "Poly":
        other = _as_poly(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "Poly":
        other = _as_poly(other)
        if other is NotImplemented:
            return other
        return other - self

    def scale(self, factor: Number) -> "Poly":
        factor = Scalar.coerce(factor)
        if factor.is_zero:
            return ZERO_POLY
        return Poly._trusted([c * factor for c in self.coeffs])

    def __mul__(self, other) -> "Poly":
        if isinstance(other, (int, Fraction, Scalar)):
            return self.scale(other)
        if not isinstance(other, Poly):
            return NotImplemented
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return ZERO_POLY
        out = [ZERO] * (len(a) + len(b) - 1)
        for i, ca in enumerate(a):
            if ca.is_zero:
                continue
            for j, cb in enumerate(b):
                out[i + j] = out[i + j] + ca * cb
        return Poly._trusted(out)

    __rmul__ = __mul__

    def __call__(self, x: Number) -> Scalar:
        return poly_eval(self, x)

    def derivative(self) -> "Poly":
        """Ordinary derivative d/dz."""
        return Poly._trusted([c * k for k, c in enumerate(self.coeffs)][1:])

    def __str__(self) -> str:
        return "[" + ", ".join(str(c) for c in self.coeffs) + "]"

    def __repr__(self) -> str:
        return f"Poly({self})"


def _as_poly(value):
    if isinstance(value, Poly):
        return value
    if isinstance(value, (int, Fraction, Scalar)):
        return Poly.constant(value)
    return NotImplemented


ZERO_POLY = Poly()
ONE_POLY = Poly([1])
Z = Poly([0, 1])


def poly_arith(op: str, p: Poly, q: Union[Poly, Number]) -> Poly:
    """
    Exact ring arithmetic on polynomials.

    Args:
        op: One of "add", "sub", "mul", "scale"
        p: Left operand
        q: Right operand (polynomial, or scalar for "scale")

    Returns:
        Canonical polynomial result
    """
    if op == "add":
        return p + _as_poly(q)
    if op == "sub":
        return p - _as_poly(q)
    if op == "mul":
        return p * _as_poly(q)
    if op == "scale":
        if isinstance(q, Poly):
            raise ParameterError("scale expects a scalar factor")
        return p.scale(q)
    raise ParameterError(f"Unknown polynomial operation '{op}'")


def poly_eval(p: Poly, x: Number) -> Scalar:
    """Horner evaluation of p at x."""
    x = Scalar.coerce(x)
    acc = ZERO
    for c in reversed(p.coeffs):
        acc = acc * x + c
    return acc


def poly_affine_map(p: Poly, lam: Number, mu: Number) -> Poly:
    """
    Substitute an affine change of variable.

    Args:
        p: Polynomial to transform
        lam: Nonzero slope
        mu: Offset

    Returns:
        q with q(z) = p(lam*z + mu)

    Raises:
        ParameterError: If lam is zero
    """
    lam, mu = Scalar.coerce(lam), Scalar.coerce(mu)
    if lam.is_zero:
        raise ParameterError("Affine map needs a nonzero slope")
    inner = Poly([mu, lam])
    acc = ZERO_POLY
    for c in reversed(p.coeffs):
        acc = acc * inner + c
    return acc


@dataclass(frozen=True)
class RecurrencePair:
    """
    Coefficients of a monic three-term recurrence.

    B holds B_0, B_1, ... and C holds C_1, C_2, ... (C[k] is C_{k+1}).
    """

    B: tuple = field(default_factory=tuple)
    C: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "B", tuple(Scalar.coerce(b) for b in self.B))
        object.__setattr__(self, "C", tuple(Scalar.coerce(c) for c in self.C))

    def b(self, n: int) -> Scalar:
        return self.B[n]

    def c(self, n: int) -> Scalar:
        """C_n for n >= 1."""
        if n < 1:
            raise ParameterError("C_n is indexed from n = 1")
        return self.C[n - 1]

    def first_singular_index(self) -> Optional[int]:
        for k, c in enumerate(self.C, start=1):
            if c.is_zero:
                return k
        return None

    def with_c(self, n: int, value: Number) -> "RecurrencePair":
        """Copy with C_n replaced (used for sensitivity checks)."""
        cs = list(self.C)
        cs[n - 1] = Scalar.coerce(value)
        return RecurrencePair(self.B, tuple(cs))

    def rows(self) -> list[dict]:
        """One row per n with B_n and C_{n+1} where available."""
        out = []
        for n in range(max(len(self.B), len(self.C))):
            out.append({
                "n": n,
                "B_n": self.B[n] if n < len(self.B) else None,
                "C_n+1": self.C[n] if n < len(self.C) else None,
            })
        return out


def ttrr_build(rec: RecurrencePair, N: int) -> list[Poly]:
    """
    Build P_0..P_N from P_{n+1} = (z - B_n)P_n - C_n P_{n-1}.

    Args:
        rec: Recurrence coefficients; needs B_0..B_{N-1} and C_1..C_{N-1}
        N: Highest degree to build

    Returns:
        List of monic polynomials with deg P_n = n

    Raises:
        ParameterError: If coefficients are missing or N < 0
        RegularityError: If some C_n vanishes (index n reported)
    """
    if N < 0:
        raise ParameterError("N must be nonnegative")
    if len(rec.B) < N or len(rec.C) < max(N - 1, 0):
        raise ParameterError(
            f"Recurrence supplies {len(rec.B)} B and {len(rec.C)} C values; "
            f"degree {N} needs {N} and {max(N - 1, 0)}"
        )
    polys = [ONE_POLY]
    for n in range(N):
        nxt = (Z - rec.B[n]) * polys[n]
        if n >= 1:
            c_n = rec.C[n - 1]
            if c_n.is_zero:
                raise RegularityError(f"C_{n} vanishes; recurrence is not regular", index=n, detail="C_n")
            nxt = nxt - polys[n - 1].scale(c_n)
        polys.append(nxt)
    logger.debug(f"Built recurrence polynomials P_0..P_{N}")
    return polys
