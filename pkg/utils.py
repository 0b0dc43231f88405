"""
Utility functions for the exact scalar text grammar.
Provides parsing and rendering of Gaussian rationals and polynomials in the
formats shared by the CLI and the JSON reports.
"""

import json
import re
from fractions import Fraction
from typing import Iterable, Union

from exact_core import ParameterError, Poly, Scalar

_RATIONAL_RE = re.compile(r"^[+-]?\d+(?:/\d+)?$")


def _parse_rational(text: str) -> Fraction:
    if not _RATIONAL_RE.match(text):
        raise ParameterError(f"Malformed rational '{text}'")
    if "/" in text and int(text.split("/", 1)[1]) == 0:
        raise ParameterError(f"Zero denominator in '{text}'")
    return Fraction(text)


def parse_scalar(text: str) -> Scalar:
    """
    Parse a Gaussian rational.

    Accepted forms: "p", "p/q", "p/q+r/s*i", "p/q-r/s*i", "r/s*i", "i", "-i".

    Args:
        text: Scalar text

    Returns:
        The exact Scalar

    Raises:
        ParameterError: If the text does not follow the grammar
    """
    s = str(text).strip().replace(" ", "")
    if not s:
        raise ParameterError("Empty scalar")
    if not s.endswith("i"):
        return Scalar(_parse_rational(s))

    body = s[:-1]
    starred = body.endswith("*")
    if starred:
        body = body[:-1]
    split = max(body.rfind("+"), body.rfind("-"))
    if split > 0:
        real_text, imag_text = body[:split], body[split:]
    else:
        real_text, imag_text = "", body

    if starred and imag_text in ("", "+", "-"):
        raise ParameterError(f"Missing coefficient before '*i' in '{text}'")
    if imag_text in ("", "+"):
        imag = Fraction(1)
    elif imag_text == "-":
        imag = Fraction(-1)
    else:
        imag = _parse_rational(imag_text)
    real = _parse_rational(real_text) if real_text else Fraction(0)
    return Scalar(real, imag)


def parse_scalar_list(text: Union[str, Iterable[str]]) -> list[Scalar]:
    """
    Parse a list of scalars.

    Args:
        text: Comma-separated scalars ("1,0,-1/2"), a JSON array of scalar
              strings, or an iterable of scalar strings

    Returns:
        List of Scalars in the given order
    """
    if isinstance(text, str):
        stripped = text.strip()
        if stripped.startswith("["):
            try:
                items = json.loads(stripped)
            except json.JSONDecodeError as e:
                raise ParameterError(f"Malformed scalar array: {e}")
        else:
            items = [part for part in stripped.split(",") if part.strip()]
    else:
        items = list(text)
    return [parse_scalar(item) for item in items]


def parse_poly(text: Union[str, Iterable[str]]) -> Poly:
    """Parse ascending-degree coefficients into a Poly."""
    return Poly(parse_scalar_list(text))


def render_poly(p: Poly) -> list[str]:
    """Ascending coefficient strings, [] for the zero polynomial."""
    return [str(c) for c in p.coeffs]


def render_poly_text(p: Poly) -> str:
    return json.dumps(render_poly(p))


def approx(value) -> str:
    """
    Decimal rendering for human reading only (6 significant digits).
    """
    value = Scalar.coerce(value)
    real = f"{float(value.re):.6g}"
    if not value.im:
        return real
    imag = float(value.im)
    if not value.re:
        return f"{imag:.6g}i"
    sign = "+" if imag >= 0 else "-"
    return f"{real}{sign}{abs(imag):.6g}i"
