"""
Verification suites.

Every decision is an exact equality between Scalars or Polys. Mathematical
failures never raise here; they become ``fail`` checks carrying a witness
(n, lhs, rhs). Reports are sorted by check name and index range before they
are emitted.
"""

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Literal, Optional, Sequence, Union

from pydantic import BaseModel, Field, model_validator

from ddops import (
    OperatorTables,
    apply,
    build_tables,
    characterization_constant,
    derived_sequence,
    expected_subleading,
    pointwise_oracle,
    sample_points,
)
from exact_core import (
    I,
    DegreeBoundError,
    LatopsError,
    ParameterError,
    Poly,
    RecurrencePair,
    RegularityError,
    Scalar,
    ttrr_build,
)
from families import (
    NotRepresentable,
    Thm1Params,
    Thm2Params,
    characterization_pearson_data,
    classical_coeffs,
    classical_recurrence,
    conjugate_r,
    d_seq,
    meixner2_recurrence,
    MeixnerParams,
    phi_bracket,
    r_roots_from_c1,
    regularity_node,
    regularity_scan,
    thm1_aw_params,
    thm1_aw_polys,
    thm1_c,
    thm1_c1,
    thm1_c_for_r,
    thm1_pearson_data,
    thm1_recurrence,
    thm1_regularity_value,
    thm2_meixner_params,
    thm2_meixner_polys,
    thm2_pearson_data,
    thm2_recurrence,
    thm2_scaling,
    aw_recurrence,
)
from functionals import (
    MomentFunctional,
    PearsonData,
    act,
    compare_functionals,
    dual_basis,
    left_multiply,
    pearson_moments,
    recurrence_from_moments,
    transform,
)
from lattice import Lattice, QQuadraticLattice, QuadraticLattice
from logging_config import get_logger
from utils import render_poly_text

logger = get_logger(__name__)


class Witness(BaseModel):
    n: int
    lhs: str
    rhs: str


class Check(BaseModel):
    name: str
    range: list[int] = Field(..., min_length=2, max_length=2)
    status: Literal["pass", "fail"]
    witness: Optional[Witness] = None
    compared: Optional[list[int]] = None
    note: Optional[str] = None

    @model_validator(mode="after")
    def _fail_has_witness(self):
        if self.status == "fail" and self.witness is None:
            raise ValueError(f"Failing check '{self.name}' must carry a witness")
        return self


class Report(BaseModel):
    subject: str
    checks: list[Check] = Field(default_factory=list)
    summary: dict[str, str] = Field(default_factory=dict)

    def add(self, check: Check) -> Check:
        if check.status == "fail":
            logger.warning(f"[{self.subject}] {check.name} failed at n = {check.witness.n}")
        self.checks.append(check)
        return check

    def merge(self, other: "Report", prefix: str = "") -> None:
        for check in other.checks:
            self.checks.append(check.model_copy(update={"name": prefix + check.name}))

    @property
    def passed(self) -> bool:
        return all(c.status == "pass" for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.status == "fail"]

    def sorted(self) -> "Report":
        ordered = sorted(self.checks, key=lambda c: (c.name, c.range[0], c.range[1]))
        return Report(subject=self.subject, checks=ordered, summary=dict(self.summary))

    def to_payload(self) -> dict:
        return self.sorted().model_dump(exclude_none=True)


def _text(value) -> str:
    if isinstance(value, Poly):
        return render_poly_text(value)
    if isinstance(value, MomentFunctional):
        return "[" + ", ".join(str(m) for m in value.valid) + "]"
    return str(value)


def _witness(n: int, lhs, rhs) -> Witness:
    return Witness(n=n, lhs=_text(lhs), rhs=_text(rhs))


def compare_sequences(name: str, lhs: Sequence, rhs: Sequence, start: int = 0, note: Optional[str] = None) -> Check:
    """Index-by-index comparison; the first mismatch becomes the witness."""
    count = min(len(lhs), len(rhs))
    hi = start + count - 1
    for k in range(count):
        if lhs[k] != rhs[k]:
            return Check(name=name, range=[start, hi], status="fail", witness=_witness(start + k, lhs[k], rhs[k]), note=note)
    return Check(name=name, range=[start, hi], status="pass", note=note)


def compare_moments(name: str, n: int, lhs: MomentFunctional, rhs: MomentFunctional) -> Check:
    """Single-index functional comparison recording the compared moment range."""
    result = compare_functionals(lhs, rhs)
    compared = list(result.compared)
    if result.ok:
        return Check(name=name, range=[n, n], status="pass", compared=compared)
    k = result.first_mismatch
    return Check(
        name=name,
        range=[n, n],
        status="fail",
        witness=Witness(n=n, lhs=str(result.lhs), rhs=str(result.rhs)),
        compared=compared,
        note=f"first differing moment m_{k}",
    )


def _error_check(name: str, err: LatopsError) -> Check:
    index = getattr(err, "index", None) or 0
    return Check(name=name, range=[index, index], status="fail", witness=Witness(n=index, lhs=type(err).__name__, rhs=str(err)))


def _merge_index_checks(name: str, checks: list[Check], lo: int, hi: int) -> Check:
    """Collapse per-index checks into one range check (first failure wins)."""
    compared = None
    for check in checks:
        if check.compared is not None:
            compared = check.compared if compared is None else [0, min(compared[1], check.compared[1])]
        if check.status == "fail":
            return check.model_copy(update={"name": name, "range": [lo, hi]})
    return Check(name=name, range=[lo, hi], status="pass", compared=compared)


# ---------------------------------------------------------------------------
# Characterization
# ---------------------------------------------------------------------------

def check_characterization(rec: RecurrencePair, T: OperatorTables, N: int) -> Report:
    """
    Assert D_x P_{n+1} = (gamma_{n+1}/alpha_n) S_x P_n for 0 <= n <= N.

    Args:
        rec: Needs B_0..B_N and C_1..C_N
        T: Tables of degree at least N + 1
        N: Highest index checked

    Returns:
        Report with a single "characterization" check
    """
    if T.N < N + 1:
        raise DegreeBoundError(f"Characterization through n = {N} needs tables of degree {N + 1}")
    report = Report(subject="characterization")
    try:
        P = ttrr_build(rec, N + 1)
    except RegularityError as e:
        report.add(_error_check("characterization", e))
        return report

    L = T.lattice
    for n in range(N + 1):
        lhs = apply("dx", T, P[n + 1])
        rhs = apply("sx", T, P[n]).scale(characterization_constant(L, n))
        if lhs != rhs:
            report.add(Check(name="characterization", range=[0, N], status="fail", witness=_witness(n, lhs, rhs)))
            return report
    report.add(Check(name="characterization", range=[0, N], status="pass"))
    return report


@dataclass(frozen=True)
class CharacterizationSolution:
    """
    Recurrence coefficients forced by the characterization itself.

    B holds B_0..B_m and C holds C_1..C_m for the last consistent step m.
    breaks_at is the first step with no admissible (B_n, C_n); residual is
    what is left of D_x P_{n+1} - k_n S_x P_n there (None when C_n vanished).
    """

    B: tuple
    C: tuple
    breaks_at: Optional[int] = None
    residual: Optional[Poly] = None

    @property
    def recurrence(self) -> RecurrencePair:
        return RecurrencePair(self.B, self.C)


def solve_characterization(T: OperatorTables, B0, C1, N: int) -> CharacterizationSolution:
    """
    Solve D_x P_{n+1} = k_n S_x P_n step by step for n = 1..N.

    With P_{n+1} = (z - B_n) P_n - C_n P_{n-1} the relation is linear in the
    unknowns: the z^{n-1} coefficient fixes B_n, the z^{n-2} coefficient fixes
    C_n (n >= 2; C_1 is free) and every lower coefficient must vanish.

    Args:
        T: Tables of degree at least N + 1
        B0: Free parameter B_0
        C1: Free parameter C_1
        N: Last step

    Returns:
        CharacterizationSolution
    """
    if T.N < N + 1:
        raise DegreeBoundError(f"Solving through n = {N} needs tables of degree {N + 1}")
    L = T.lattice
    B = [Scalar.coerce(B0)]
    C = [Scalar.coerce(C1)]
    prev, cur = Poly([1]), Poly([-B[0], 1])
    for n in range(1, N + 1):
        k = characterization_constant(L, n)
        rest = apply("dx", T, Poly([0, 1]) * cur) - apply("sx", T, cur).scale(k)
        b = rest.coeff(n - 1) / L.gamma_n(n)
        rest = rest - apply("dx", T, cur).scale(b)
        if n >= 2:
            c = rest.coeff(n - 2) / L.gamma_n(n - 1)
            rest = rest - apply("dx", T, prev).scale(c)
            if c.is_zero:
                logger.debug(f"Characterization forces C_{n} = 0")
                return CharacterizationSolution(tuple(B), tuple(C), breaks_at=n)
        else:
            c = C[0]
        if not rest.is_zero:
            logger.debug(f"Characterization has no solution at n = {n}")
            return CharacterizationSolution(tuple(B), tuple(C), breaks_at=n, residual=rest)
        B.append(b)
        if n >= 2:
            C.append(c)
        prev, cur = cur, (Poly([-b, 1]) * cur) - prev.scale(c)
    return CharacterizationSolution(tuple(B), tuple(C))


def _solved_checks(report: Report, T: OperatorTables, closed: RecurrencePair, N: int) -> None:
    """Compare a closed family with the coefficients the characterization forces."""
    solved = solve_characterization(T, closed.b(0), closed.c(1), N)
    report.add(compare_sequences("B:closed~solved", closed.B, solved.B, start=0))
    report.add(compare_sequences("C:closed~solved", closed.C, solved.C, start=1))
    if solved.breaks_at is None:
        report.add(Check(name="solved:consistency", range=[1, N], status="pass"))
        return
    n = solved.breaks_at
    report.summary["solved_breaks_at"] = str(n)
    lhs = "C_n = 0" if solved.residual is None else solved.residual
    report.add(Check(name="solved:consistency", range=[1, N], status="fail", witness=_witness(n, lhs, "0"),
                     note="no (B_n, C_n) satisfies the characterization at this step"))


# ---------------------------------------------------------------------------
# Cross-validation of the two solution families
# ---------------------------------------------------------------------------

def _moment_depth(N: int) -> int:
    return 2 * (N + 1)


def _routes(report: Report, label: str, builder: Callable[[], RecurrencePair]) -> Optional[RecurrencePair]:
    try:
        return builder()
    except LatopsError as e:
        report.add(_error_check(f"route:{label}", e))
        return None


def _compare_routes(report: Report, left: str, rec_l: RecurrencePair, right: str, rec_r: RecurrencePair) -> None:
    report.add(compare_sequences(f"B:{left}~{right}", rec_l.B, rec_r.B, start=0))
    report.add(compare_sequences(f"C:{left}~{right}", rec_l.C, rec_r.C, start=1))


def _pearson_functional(pd, L: Lattice, M: int) -> MomentFunctional:
    return pearson_moments(pd, build_tables(L, max(M - 1, 1)), M)


def cross_validate_thm1(p: Thm1Params, N: int) -> Report:
    """
    Four-way agreement for the q-lattice solution through index N.

    Routes: closed forms, the classical engine on the Pearson data, Gram-Schmidt
    on the Pearson moments, and the Askey-Wilson quadruple under the
    radical-free scaling (B^{AW} = 0, C = 4 c1 c2 C^{AW}).

    The first three routes all start from the n = 0 Pearson equation, so their
    agreement does not show that the family satisfies the characterization.
    That is decided separately: by check_characterization on the closed forms
    and by solve_characterization, which derives (B_n, C_n) from the relation
    itself. For Q = 1/2, c1 = c2 = 1, c3 = 0, a = 3 both report a break: the
    family leaves the relation at n = 3 (forced C_3 = 6125/884, closed form
    12250/4369) and the relation has no solution at all at n = 4.
    """
    L = p.L
    report = Report(subject="thm1")
    report.summary.update({"r": str(p.r), "Q": str(L.Q)})
    try:
        p.validate(N + 1)
    except RegularityError as e:
        report.add(_error_check("admissibility", e))
        report.summary["error"] = str(e)
        return report

    report.add(Check(name="admissibility", range=[0, N + 1], status="pass"))
    pd = thm1_pearson_data(p)
    c1 = thm1_c1(p)
    report.summary["C1"] = str(c1)
    if N >= 1:
        report.summary["C2"] = str(thm1_c(p, 1))
    report.summary["phi"] = render_poly_text(pd.phi)
    report.summary["psi"] = render_poly_text(pd.psi)

    closed = thm1_recurrence(p, N + 1)
    engine = _routes(report, "engine", lambda: classical_recurrence(pd, L, N + 1))
    M = _moment_depth(N + 1)
    moments = _routes(report, "moments", lambda: recurrence_from_moments(_pearson_functional(pd, L, M), N + 1))
    report.summary["moments"] = f"[0, {M}]"
    aw = _routes(report, "aw", lambda: aw_recurrence(thm1_aw_params(p), N + 1))

    if engine is not None:
        _compare_routes(report, "closed", closed, "engine", engine)
    if moments is not None:
        _compare_routes(report, "closed", closed, "moments", moments)
    if aw is not None:
        scale = 4 * L.c1 * L.c2
        report.add(compare_sequences("B:closed~aw", [b - L.c3 for b in closed.B], list(aw.B), start=0,
                                     note="B_n - c3 against B_n of the quadruple"))
        report.add(compare_sequences("C:closed~aw", list(closed.C), [c * scale for c in aw.C], start=1,
                                     note="C_n against 4 c1 c2 C_n of the quadruple"))

    report.add(Check(
        name="c1:formula~product",
        range=[1, 1],
        status="pass" if c1 == thm1_c(p, 0) else "fail",
        witness=None if c1 == thm1_c(p, 0) else _witness(1, c1, thm1_c(p, 0)),
    ))

    alpha = L.alpha
    report.add(compare_sequences(
        "d_n:closed~engine",
        [alpha.inverse() * L.alpha_n(k - 1) for k in range(2 * N + 2)],
        [d_seq(pd, L, k) for k in range(2 * N + 2)],
    ))
    report.add(compare_sequences(
        "regularity:closed~engine",
        [thm1_regularity_value(p, n) for n in range(N + 1)],
        [phi_bracket(pd, L, n)(regularity_node(pd, L, n)) for n in range(N + 1)],
    ))

    violations = regularity_scan(pd, L, N)
    if violations:
        v = violations[0]
        report.add(Check(name="regularity-scan", range=[0, N], status="fail", witness=Witness(n=v.n, lhs=v.kind, rhs="0")))
    else:
        report.add(Check(name="regularity-scan", range=[0, N], status="pass"))

    _r_root_checks(report, p, N)

    polys = thm1_aw_polys(p, N + 1)
    P = ttrr_build(closed, N + 1)
    if polys is None:
        report.summary["aw-polys"] = "skipped: sqrt(c1 c2) is not in Q(i)"
    else:
        report.add(compare_sequences("aw-polys", P, polys, note="P_n(z) = lam^n Q_n((z - c3)/lam)"))

    T = build_tables(L, N + 2)
    _solved_checks(report, T, closed, N + 1)
    characterization = check_characterization(closed, T, N)
    for check in characterization.failures():
        report.summary["characterization_breaks_at"] = str(check.witness.n)
    report.merge(characterization)
    logger.info(f"thm1 cross-validation through n = {N}: {'pass' if report.passed else 'fail'}")
    return report


def _r_root_checks(report: Report, p: Thm1Params, N: int) -> None:
    L = p.L
    roots = r_roots_from_c1(L, thm1_c1(p))
    if isinstance(roots, NotRepresentable):
        report.summary["r-roots"] = f"not representable (discriminant {roots.discriminant})"
        return
    report.summary["r-roots"] = f"{roots.r_plus}, {roots.r_minus}"
    product = roots.r_plus * roots.r_minus
    expected = Scalar(-1 / L.q)
    report.add(Check(
        name="r-roots:vieta",
        range=[0, 0],
        status="pass" if product == expected else "fail",
        witness=None if product == expected else _witness(0, product, expected),
    ))
    contains = p.r in (roots.r_plus, roots.r_minus)
    report.add(Check(
        name="r-roots:contains-r",
        range=[0, 0],
        status="pass" if contains else "fail",
        witness=None if contains else _witness(0, p.r, report.summary["r-roots"]),
    ))
    other = conjugate_r(L, p.r)
    report.add(compare_sequences(
        "r-roots:involution",
        [thm1_c(p, n) for n in range(N + 1)],
        [thm1_c_for_r(L, other, n) for n in range(N + 1)],
        start=1,
        note="C_{n+1} is invariant under r -> -1/(q r)",
    ))


def cross_validate_thm2(p: Thm2Params, N: int) -> Report:
    """
    Four-way agreement for the linear-lattice solution through index N,
    with the Meixner (second kind, b1 = 0) affine map as the fourth route.
    """
    L = p.L
    report = Report(subject="thm2")
    report.summary.update({"B0": str(p.B0), "C1": str(p.C1), "ratio": str(p.ratio)})
    try:
        p.validate()
    except RegularityError as e:
        report.add(_error_check("admissibility", e))
        report.summary["error"] = str(e)
        violations = regularity_scan(thm2_pearson_data(p), L, N + 1)
        if violations:
            report.summary["predicted_index"] = str(violations[0].n + 1)
        return report

    report.add(Check(name="admissibility", range=[0, N + 1], status="pass"))
    pd = thm2_pearson_data(p)
    report.summary["phi"] = render_poly_text(pd.phi)
    report.summary["psi"] = render_poly_text(pd.psi)

    closed = thm2_recurrence(p, N + 1)
    engine = _routes(report, "engine", lambda: classical_recurrence(pd, L, N + 1))
    M = _moment_depth(N + 1)
    u = None
    try:
        u = _pearson_functional(pd, L, M)
        report.summary["moments"] = f"[0, {M}]"
        report.summary["moments_prefix"] = "[" + ", ".join(str(m) for m in u.valid[:5]) + "]"
    except LatopsError as e:
        report.add(_error_check("route:moments", e))
    moments = None if u is None else _routes(report, "moments", lambda: recurrence_from_moments(u, N + 1))
    meixner = _routes(report, "meixner", lambda: meixner2_recurrence(thm2_meixner_params(p), N + 1))

    if engine is not None:
        _compare_routes(report, "closed", closed, "engine", engine)
    if moments is not None:
        _compare_routes(report, "closed", closed, "moments", moments)
    if meixner is not None:
        lam2 = thm2_scaling(p)
        lam = I * L.c5 / 2
        report.add(compare_sequences("B:closed~meixner", list(closed.B), [lam * b + p.B0 for b in meixner.B], start=0,
                                     note="B_n = (i c5/2) B_n^M + B0"))
        report.add(compare_sequences("C:closed~meixner", list(closed.C), [lam2 * c for c in meixner.C], start=1,
                                     note="C_n = (i c5/2)^2 C_n^M"))

    P = ttrr_build(closed, N + 1)
    report.add(compare_sequences("meixner-polys", P, thm2_meixner_polys(p, N + 1),
                                 note="P_n(z) = (i c5/2)^n M_n(2i(B0 - z)/c5)"))

    violations = regularity_scan(pd, L, N)
    if violations:
        v = violations[0]
        report.add(Check(name="regularity-scan", range=[0, N], status="fail", witness=Witness(n=v.n, lhs=v.kind, rhs="0")))
    else:
        report.add(Check(name="regularity-scan", range=[0, N], status="pass"))

    T = build_tables(L, N + 2)
    _solved_checks(report, T, closed, N + 1)
    report.merge(check_characterization(closed, T, N))
    logger.info(f"thm2 cross-validation through n = {N}: {'pass' if report.passed else 'fail'}")
    return report


# ---------------------------------------------------------------------------
# Second-coefficient consistency and the exclusion witnesses
# ---------------------------------------------------------------------------

def telescopic_b(T: OperatorTables, B0, N: int) -> list[Scalar]:
    """
    B_0..B_N forced by comparing second coefficients in the characterization.

    With P_n = z^n + f_n z^{n-1} + ..., f_1 = -B0 and for n >= 1
    alpha_n (u_{n+1} + gamma_n f_{n+1}) = gamma_{n+1} (uhat_n + alpha_{n-1} f_n),
    where u_{n+1}, uhat_n are read from the operator tables; B_n = f_n - f_{n+1}.
    """
    if T.N < N + 1:
        raise DegreeBoundError(f"Telescopic B_n through n = {N} needs tables of degree {N + 1}")
    L = T.lattice
    f = [Scalar(0), -Scalar.coerce(B0)]
    for n in range(1, N + 1):
        u_next = T.D[n + 1].coeff(n - 1)
        uhat = T.S[n].coeff(n - 1)
        rhs = L.gamma_n(n + 1) * (uhat + L.alpha_n(n - 1) * f[n]) / L.alpha_n(n)
        f.append((rhs - u_next) / L.gamma_n(n))
    return [f[n] - f[n + 1] for n in range(N + 1)]


def quadratic_b_closed(L: QuadraticLattice, B0, n: int) -> tuple[Scalar, Scalar]:
    """(B0 - 2 beta n(n-1), B0 - 8 beta n(n-1)): telescopic and Pearson closed forms."""
    B0 = Scalar.coerce(B0)
    k = n * (n - 1)
    return B0 - 2 * L.beta * k, B0 - 8 * L.beta * k


def q_b_closed(L: QQuadraticLattice, B0, n: int) -> tuple[Scalar, Scalar]:
    """Telescopic and Pearson closed forms of B_n on a q-lattice."""
    B0 = Scalar.coerce(B0)
    shift = B0 - L.c3
    telescopic = L.c3 + L.alpha * shift / (L.alpha_n(n - 1) * L.alpha_n(n))
    q, qp = L.q, L.q_pow
    frac = ((q - 1) * (1 - qp(2 * n - 2)) + (1 + q) * qp(n - 1)) / ((1 + qp(2 * n - 3)) * (1 + qp(2 * n - 1)))
    pearson = L.c3 + shift * ((1 + q) * qp(n - 2) * frac)
    return telescopic, pearson


def _b_consistency(report: Report, L: Lattice, B0, C1, N: int, closed: Callable[[int], tuple]) -> Optional[int]:
    T = build_tables(L, N + 1)
    tele_closed = [closed(n)[0] for n in range(N + 1)]
    pear_closed = [closed(n)[1] for n in range(N + 1)]
    report.add(compare_sequences("telescopic:closed~tables", tele_closed, telescopic_b(T, B0, N)))
    pd = characterization_pearson_data(L, B0, C1)
    try:
        engine = [classical_coeffs(pd, L, n).B for n in range(N + 1)]
        report.add(compare_sequences("pearson:closed~engine", pear_closed, engine))
    except RegularityError as e:
        report.add(_error_check("pearson:closed~engine", e))

    for n in range(N + 1):
        if tele_closed[n] != pear_closed[n]:
            report.summary["first_mismatch"] = str(n)
            report.summary["consistent"] = "false"
            report.add(Check(
                name="mismatch-witness",
                range=[0, N],
                status="pass",
                witness=_witness(n, tele_closed[n], pear_closed[n]),
                note="telescopic B_n against Pearson B_n",
            ))
            return n
    report.summary["consistent"] = "true"
    return None


def nonexistence_quadratic(L: QuadraticLattice, B0, C1=1, N: int = 10) -> Report:
    """
    Compare the two B_n routes on a quadratic lattice.

    With beta != 0 the routes split at n = 2, so no solution exists; with
    beta = 0 they agree everywhere and the report says so.
    """
    report = Report(subject="nonexistence")
    report.summary["beta"] = str(L.beta)
    mismatch = _b_consistency(report, L, B0, C1, N, lambda n: quadratic_b_closed(L, B0, n))
    if mismatch is None:
        if L.beta.is_zero:
            report.add(Check(name="mismatch-witness", range=[0, N], status="pass", note="beta = 0: routes agree"))
        else:
            report.add(Check(name="mismatch-witness", range=[0, N], status="fail",
                             witness=_witness(N, "no mismatch", "expected one for beta != 0")))
    return report


def bzero_forcing_qlattice(L: QQuadraticLattice, B0, C1=1, N: int = 10) -> Report:
    """
    Compare the two B_n routes on a q-lattice; they agree iff B0 = c3.

    The first mismatch index is reported as found.
    """
    report = Report(subject="bzero")
    report.summary["c3"] = str(L.c3)
    mismatch = _b_consistency(report, L, B0, C1, N, lambda n: q_b_closed(L, B0, n))
    if mismatch is None:
        note = "B0 = c3: routes agree" if Scalar.coerce(B0) == L.c3 else None
        if note:
            report.add(Check(name="mismatch-witness", range=[0, N], status="pass", note=note))
        else:
            report.add(Check(name="mismatch-witness", range=[0, N], status="fail",
                             witness=_witness(N, "no mismatch", "expected one for B0 != c3")))
    return report


# ---------------------------------------------------------------------------
# Functional identities
# ---------------------------------------------------------------------------

Family = Union[Thm1Params, Thm2Params]


def _family_data(family: Family, N: int):
    if isinstance(family, Thm1Params):
        family.validate(N)
        return thm1_recurrence(family, N), thm1_pearson_data(family), family.L
    family.validate()
    return thm2_recurrence(family, N), thm2_pearson_data(family), family.L


def _random_poly(rng: random.Random, degree: int) -> Poly:
    coeffs = [Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(degree)]
    coeffs.append(Fraction(rng.choice([-3, -2, -1, 1, 2, 3]), rng.randint(1, 3)))
    return Poly(coeffs)


def product_rule_checks(T: OperatorTables, f: Poly, g: Poly) -> tuple[bool, bool]:
    """D_x(fg) and S_x(fg) against the product rules."""
    _, u2 = T.lattice.structural_polys()
    dfg = apply("dx", T, f * g)
    sfg = apply("sx", T, f * g)
    df, sf = apply("dx", T, f), apply("sx", T, f)
    dg, sg = apply("dx", T, g), apply("sx", T, g)
    return dfg == df * sg + sf * dg, sfg == df * dg * u2 + sf * sg


def identity_33(T: OperatorTables, f: Poly, u: MomentFunctional) -> tuple[MomentFunctional, MomentFunctional]:
    """f D_x u against D_x(S_x f u) - S_x(D_x f u)."""
    lhs = left_multiply(f, transform("dx", T, u))
    rhs = transform("dx", T, left_multiply(apply("sx", T, f), u)).sub(
        transform("sx", T, left_multiply(apply("dx", T, f), u))
    )
    return lhs, rhs


def _dx_power(T: OperatorTables, u: MomentFunctional, n: int) -> MomentFunctional:
    for _ in range(n):
        u = transform("dx", T, u)
    return u


def identity_34(T: OperatorTables, u: MomentFunctional, n: int) -> tuple[MomentFunctional, MomentFunctional]:
    """alpha D_x^n S_x u against alpha_{n+1} S_x D_x^n u + gamma_n U_1 D_x^{n+1} u."""
    L = T.lattice
    u1, _ = L.structural_polys()
    lhs = _dx_power(T, transform("sx", T, u), n).scale(L.alpha)
    first = transform("sx", T, _dx_power(T, u, n)).scale(L.alpha_n(n + 1))
    second = left_multiply(u1, _dx_power(T, u, n + 1)).scale(L.gamma_n(n))
    return lhs, first.add(second)


def functional_identity_suite(T: OperatorTables, family: Family, N: int, seed: int = 0, samples: int = 5) -> Report:
    """
    Dual-calculus identities on the truncated moments of the family's functional.

    (a) S_x a_n^{[1]} = alpha_n a_n
    (b) D_x((gamma_{n+1} U_1 P_{n+1} + alpha_n C_{n+1} P_n) u) = -alpha gamma_{n+1} S_x(P_{n+1} u)
    (c) D_x^k a_n^{[k]} = (-1)^k (gamma_{n+k}!/gamma_n!) a_{n+k}, k = 1, 2
    (d) the f D_x u expansion for random f and the D_x^n S_x commutation, n <= 2
    """
    L = family.L
    if T.lattice != L:
        raise ParameterError("Tables and family live on different lattices")
    report = Report(subject="identities")
    try:
        rec_depth = 2 * N + 8
        rec, pd, _ = _family_data(family, rec_depth)
    except RegularityError as e:
        report.add(_error_check("admissibility", e))
        return report

    M = 2 * N + 6
    dual_deg = N + 4
    needed = max(M, dual_deg + 2)
    if T.N < needed:
        logger.debug(f"Extending tables from degree {T.N} to {needed} for the identity suite")
        T = build_tables(L, needed)

    u = pearson_moments(pd, T, M)
    P = ttrr_build(rec, dual_deg + 2)
    report.summary["moments"] = f"[0, {M}]"

    # (a)
    P1 = derived_sequence(T, P, 1)
    checks = []
    for n in range(N + 1):
        lhs = transform("sx", T, dual_basis(P1, n, dual_deg))
        rhs = dual_basis(P, n, dual_deg).scale(L.alpha_n(n))
        checks.append(compare_moments("sx-dual-derived", n, lhs, rhs))
    report.add(_merge_index_checks("sx-dual-derived", checks, 0, N))

    # (b)
    u1, _ = L.structural_polys()
    checks = []
    for n in range(N + 1):
        inner = (u1 * P[n + 1]).scale(L.gamma_n(n + 1)) + P[n].scale(L.alpha_n(n) * rec.c(n + 1))
        lhs = transform("dx", T, left_multiply(inner, u))
        rhs = transform("sx", T, left_multiply(P[n + 1], u)).scale(-L.alpha * L.gamma_n(n + 1))
        checks.append(compare_moments("dx-weighted-pair", n, lhs, rhs))
    report.add(_merge_index_checks("dx-weighted-pair", checks, 0, N))

    # (c)
    for k in (1, 2):
        Pk = derived_sequence(T, P, k)
        checks = []
        for n in range(N + 1):
            if n + k > dual_deg:
                break
            lhs = dual_basis(Pk, n, dual_deg)
            for _ in range(k):
                lhs = transform("dx", T, lhs)
            factor = (-1) ** k * _gamma_quotient(L, n, k)
            rhs = dual_basis(P, n + k, dual_deg).scale(factor)
            checks.append(compare_moments(f"dual-derivative-k{k}", n, lhs, rhs))
        report.add(_merge_index_checks(f"dual-derivative-k{k}", checks, 0, N))

    # (d)
    rng = random.Random(seed)
    checks = [compare_moments("f-dx-expansion", 0, *identity_33(T, Poly([1]), u))]
    for i in range(samples):
        f = _random_poly(rng, rng.randint(0, 2))
        checks.append(compare_moments("f-dx-expansion", i + 1, *identity_33(T, f, u)))
    report.add(_merge_index_checks("f-dx-expansion", checks, 0, samples))

    checks = [compare_moments("dxn-sx-commutation", n, *identity_34(T, u, n)) for n in range(3)]
    report.add(_merge_index_checks("dxn-sx-commutation", checks, 0, 2))
    logger.info(f"Identity suite through n = {N}: {'pass' if report.passed else 'fail'}")
    return report


def _gamma_quotient(L: Lattice, n: int, k: int) -> Scalar:
    acc = Scalar(1)
    for j in range(n + 1, n + k + 1):
        acc = acc * L.gamma_n(j)
    return acc


# ---------------------------------------------------------------------------
# Self test
# ---------------------------------------------------------------------------

def sample_lattices() -> dict[str, Lattice]:
    return {
        "q-half": QQuadraticLattice(Fraction(1, 2), 1, 1, 0),
        "quadratic": QuadraticLattice(1, 0, 0),
        "linear": QuadraticLattice(0, 2, 0),
    }


def oracle_check(L: Lattice, N: int, name: str) -> Check:
    """Tables against the pointwise oracle for every monomial up to degree N."""
    T = build_tables(L, N)
    points = sample_points(L, N + 1)
    for n in range(N + 1):
        zn = Poly.monomial(n)
        for which in ("dx", "sx"):
            image = apply(which, T, zn)
            for s in points[: n + 1]:
                lhs = image(L.x(s))
                rhs = pointwise_oracle(which, L, zn, s)
                if lhs != rhs:
                    return Check(name=name, range=[0, N], status="fail", witness=_witness(n, lhs, rhs),
                                 note=f"{which} at s = {s}")
    return Check(name=name, range=[0, N], status="pass")


def structure_check(L: Lattice, N: int, name: str) -> Check:
    """Leading and subleading table coefficients against their closed forms."""
    T = build_tables(L, N)
    for n in range(1, N + 1):
        sub, subhat = expected_subleading(L, n)
        got = (T.D[n].coeff(n - 1), T.S[n].coeff(n), T.D[n].coeff(n - 2) if n >= 2 else sub, T.S[n].coeff(n - 1))
        want = (L.gamma_n(n), L.alpha_n(n), sub, subhat)
        if got != want:
            return Check(name=name, range=[1, N], status="fail", witness=_witness(n, list(map(str, got)), list(map(str, want))))
    return Check(name=name, range=[1, N], status="pass")


def suite_table_degree(suite: str, N: int) -> int:
    """Highest operator-table degree a suite builds at depth N."""
    if suite in ("thm1", "thm2"):
        # Pearson moments m_0..m_{2N+4}
        return 2 * N + 3
    if suite == "identities":
        return 2 * N + 6
    if suite in ("nonexistence", "bzero"):
        return N + 1
    if suite == "selftest":
        return max(2 * N + 3, 18)
    raise ParameterError(f"Unknown suite '{suite}'")


# Where the reference q-lattice family (Q = 1/2, c1 = c2 = 1, c3 = 0, a = 3)
# leaves the characterization, by check name.
REFERENCE_THM1_BREAKS = {"characterization": 3, "C:closed~solved": 3, "solved:consistency": 4}
REFERENCE_THM1_IDENTITY_BREAKS = {"sx-dual-derived": 1, "dx-weighted-pair": 1}


def expect_break(check: Check, index: int) -> Check:
    """
    Turn a known break into a regression check.

    Passes when the check fails exactly at index, or holds over a range that
    stops short of index; anything else fails.
    """
    if check.range[1] < index:
        ok = check.status == "pass"
    else:
        ok = check.status == "fail" and check.witness.n == index
    note = f"documented break at n = {index}"
    if ok:
        return check.model_copy(update={"status": "pass", "note": note if check.status == "fail" else check.note})
    witness = check.witness or Witness(n=index, lhs="holds", rhs=f"break expected at n = {index}")
    return check.model_copy(update={"status": "fail", "witness": witness, "note": note})


def with_documented_breaks(report: Report, breaks: dict[str, int]) -> Report:
    checks = [expect_break(c, breaks[c.name]) if c.name in breaks else c for c in report.checks]
    return Report(subject=report.subject, checks=checks, summary=dict(report.summary))


def run_selftest(n: int = 20, seed: int = 0, instances: int = 200) -> Report:
    """
    Run every invariant suite at depth n with a seeded generator.

    Args:
        n: Depth for operator and family checks
        seed: Seed for randomized instances
        instances: Random instances per lattice for the product and duality identities

    Returns:
        Combined report
    """
    rng = random.Random(seed)
    report = Report(subject="selftest")
    report.summary.update({"n": str(n), "seed": str(seed)})
    lattices = sample_lattices()

    for label, L in lattices.items():
        report.add(oracle_check(L, n, f"oracle:{label}"))
        report.add(structure_check(L, n, f"structure:{label}"))

        T = build_tables(L, 12)
        status, witness = "pass", None
        for i in range(instances):
            f = _random_poly(rng, rng.randint(0, 5))
            g = _random_poly(rng, rng.randint(0, 12 - f.degree))
            ok_d, ok_s = product_rule_checks(T, f, g)
            if not (ok_d and ok_s):
                status, witness = "fail", _witness(i, f, g)
                break
        report.add(Check(name=f"product-rules:{label}", range=[0, instances - 1], status=status, witness=witness))

        status, witness = "pass", None
        for i in range(instances):
            u = MomentFunctional(tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(10)))
            p = _random_poly(rng, rng.randint(0, 9))
            for which, sign in (("dx", -1), ("sx", 1)):
                lhs = act(transform(which, T, u), p)
                rhs = act(u, apply(which, T, p)) * sign
                if lhs != rhs:
                    status, witness = "fail", _witness(i, lhs, rhs)
                    break
            if status == "fail":
                break
        report.add(Check(name=f"duality:{label}", range=[0, instances - 1], status=status, witness=witness))

        checks = []
        for i in range(instances):
            u = MomentFunctional(tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(10)))
            f = _random_poly(rng, rng.randint(0, 2)) if i else Poly([1])
            checks.append(compare_moments("f-dx-expansion", i, *identity_33(T, f, u)))
            checks.append(compare_moments("dxn-sx-commutation", i, *identity_34(T, u, i % 3)))
        report.add(_merge_index_checks(f"f-dx-expansion:{label}", [c for c in checks if c.name == "f-dx-expansion"], 0, instances - 1))
        report.add(_merge_index_checks(f"dxn-sx-commutation:{label}", [c for c in checks if c.name == "dxn-sx-commutation"], 0, instances - 1))

    linear = lattices["linear"]
    pd = PearsonData(Poly([Fraction(-1, 2)]), Poly([0, 1]))
    engine = classical_recurrence(pd, linear, n)
    expected = RecurrencePair(tuple(0 for _ in range(n)), tuple(-(k + 1) * (k - Fraction(1, 2)) for k in range(n)))
    moments = recurrence_from_moments(_pearson_functional(pd, linear, 2 * n), n)
    report.add(compare_sequences("engine:linear-closed", list(engine.C), list(expected.C), start=1))
    report.add(compare_sequences("engine:linear-moments", list(engine.C), list(moments.C), start=1))

    thm1 = Thm1Params(lattices["q-half"], 3)
    thm2 = Thm2Params(linear, 0, Fraction(1, 2))
    report.merge(with_documented_breaks(cross_validate_thm1(thm1, n), REFERENCE_THM1_BREAKS), prefix="thm1:")
    report.merge(cross_validate_thm2(thm2, n), prefix="thm2:")

    report.merge(nonexistence_quadratic(QuadraticLattice(1, 1, 0), 0), prefix="nonexistence:")
    report.merge(bzero_forcing_qlattice(lattices["q-half"], 1), prefix="bzero:")

    depth = min(n, 6)
    identities = functional_identity_suite(build_tables(lattices["q-half"], 2 * depth + 6), thm1, depth, seed=seed)
    report.merge(with_documented_breaks(identities, REFERENCE_THM1_IDENTITY_BREAKS), prefix="identities-thm1:")
    report.merge(functional_identity_suite(build_tables(linear, 2 * depth + 6), thm2, depth, seed=seed),
                 prefix="identities-thm2:")

    for label, fam, rec in (
        ("thm1", thm1, thm1_recurrence(thm1, 4)),
        ("thm2", thm2, thm2_recurrence(thm2, 4)),
    ):
        perturbed = rec.with_c(1, rec.c(1) + 1)
        result = check_characterization(perturbed, build_tables(fam.L, 4), 2)
        caught = result.failures()
        report.add(Check(
            name=f"sensitivity:{label}-c1-plus-one",
            range=[0, 2],
            status="pass" if caught else "fail",
            witness=caught[0].witness if caught else Witness(n=2, lhs="characterization passed", rhs="expected a failure"),
        ))

    meixner = meixner2_recurrence(MeixnerParams(1, 1), 4)
    result = check_characterization(meixner, build_tables(linear, 4), 2)
    caught = result.failures()
    report.add(Check(
        name="sensitivity:meixner-b1-nonzero",
        range=[0, 2],
        status="pass" if caught else "fail",
        witness=caught[0].witness if caught else Witness(n=2, lhs="characterization passed", rhs="expected a failure"),
    ))

    logger.info(f"Selftest n = {n}, seed = {seed}: {len(report.failures())} failure(s)")
    return report
