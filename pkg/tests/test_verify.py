"""
Tests for the verification suites and report plumbing.
"""

from fractions import Fraction

import pytest
from pydantic import ValidationError

from ddops import build_tables
from exact_core import DegreeBoundError, ParameterError, RecurrencePair
from families import MeixnerParams, Thm1Params, Thm2Params, meixner2_recurrence, thm1_recurrence, thm2_recurrence
from lattice import QQuadraticLattice, QuadraticLattice
from verify import (
    Check,
    Report,
    bzero_forcing_qlattice,
    check_characterization,
    cross_validate_thm1,
    cross_validate_thm2,
    expect_break,
    functional_identity_suite,
    nonexistence_quadratic,
    q_b_closed,
    quadratic_b_closed,
    run_selftest,
    solve_characterization,
    telescopic_b,
)

HALF = Fraction(1, 2)
Q_HALF = QQuadraticLattice(HALF, 1, 1, 0)
LINEAR = QuadraticLattice(0, 2, 0)


def _check(report: Report, name: str) -> Check:
    matches = [c for c in report.checks if c.name == name]
    assert matches, f"no check named {name}"
    return matches[0]


class TestReport:
    """Test report models."""

    def test_fail_needs_witness(self):
        """Test a failing check without a witness is invalid."""
        with pytest.raises(ValidationError):
            Check(name="x", range=[0, 1], status="fail")

    def test_range_has_two_ends(self):
        """Test index ranges are pairs."""
        with pytest.raises(ValidationError):
            Check(name="x", range=[0], status="pass")

    def test_sorted_payload(self):
        """Test checks are emitted by name then range and None fields dropped."""
        report = Report(subject="s")
        report.add(Check(name="b", range=[0, 1], status="pass"))
        report.add(Check(name="a", range=[2, 3], status="pass"))
        report.add(Check(name="a", range=[0, 3], status="pass"))
        payload = report.to_payload()
        assert [(c["name"], c["range"]) for c in payload["checks"]] == [("a", [0, 3]), ("a", [2, 3]), ("b", [0, 1])]
        assert "witness" not in payload["checks"][0]


class TestCharacterization:
    """Test the characterization check."""

    def test_meixner_family_passes(self):
        """Test the linear-lattice family through n = 6."""
        rec = thm2_recurrence(Thm2Params(LINEAR, 0, HALF), 7)
        report = check_characterization(rec, build_tables(LINEAR, 7), 6)
        assert report.passed

    def test_degree_zero(self):
        """Test n = 0 holds for any monic start."""
        report = check_characterization(RecurrencePair((5,), ()), build_tables(Q_HALF, 1), 0)
        assert report.passed

    def test_meixner_b1_nonzero_fails(self):
        """Test b1 = 1, b2 = 1 fails with a witness at n = 1."""
        rec = meixner2_recurrence(MeixnerParams(1, 1), 4)
        report = check_characterization(rec, build_tables(LINEAR, 4), 2)
        failure = report.failures()[0]
        assert failure.witness.n == 1

    def test_perturbed_c1_fails(self):
        """Test C_1 + 1 is caught by n = 2 in both families."""
        for L, rec in (
            (Q_HALF, thm1_recurrence(Thm1Params(Q_HALF, 3), 4)),
            (LINEAR, thm2_recurrence(Thm2Params(LINEAR, 0, HALF), 4)),
        ):
            perturbed = rec.with_c(1, rec.c(1) + 1)
            report = check_characterization(perturbed, build_tables(L, 4), 2)
            assert not report.passed
            assert report.failures()[0].witness.n <= 2

    def test_table_bound(self):
        """Test tables must reach degree N + 1."""
        with pytest.raises(DegreeBoundError):
            check_characterization(RecurrencePair((0, 0), (1,)), build_tables(LINEAR, 1), 1)


class TestCrossValidation:
    """Test the four-route agreement for both families."""

    def test_thm1(self):
        """Test Q = 1/2, a = 3: the routes agree and the characterization breaks at n = 3."""
        report = cross_validate_thm1(Thm1Params(Q_HALF, 3), 12)
        assert report.summary["C1"] == "25/12"
        assert report.summary["C2"] == "325/51"
        for name in ("B:closed~engine", "C:closed~engine", "C:closed~moments", "C:closed~aw", "aw-polys",
                     "B:closed~solved"):
            assert _check(report, name).status == "pass", name
        assert {c.name for c in report.failures()} == {"characterization", "C:closed~solved", "solved:consistency"}
        assert _check(report, "characterization").witness.n == 3
        assert _check(report, "C:closed~solved").witness.n == 3
        assert _check(report, "solved:consistency").witness.n == 4
        assert report.summary["characterization_breaks_at"] == "3"
        assert report.summary["solved_breaks_at"] == "4"

    def test_thm1_holds_below_break(self):
        """Test every check passes through n = 1, before the break."""
        report = cross_validate_thm1(Thm1Params(Q_HALF, 3), 1)
        assert report.passed, report.failures()

    def test_thm1_excluded(self):
        """Test an excluded r surfaces as an admissibility failure."""
        report = cross_validate_thm1(Thm1Params(Q_HALF, 2), 5)
        check = _check(report, "admissibility")
        assert check.status == "fail"
        assert check.witness.n == 1

    def test_thm1_r_roots(self):
        """Test the r-root checks on the reference family."""
        report = cross_validate_thm1(Thm1Params(Q_HALF, 3), 4)
        for name in ("r-roots:vieta", "r-roots:contains-r", "r-roots:involution"):
            assert _check(report, name).status == "pass"

    def test_thm2(self):
        """Test c5 = 2, B0 = 0, C1 = 1/2 through n = 12."""
        report = cross_validate_thm2(Thm2Params(LINEAR, 0, HALF), 12)
        assert report.passed, report.failures()
        assert report.summary["moments_prefix"] == "[1, 0, 1/2, 0, -1/4]"
        assert _check(report, "C:closed~meixner").status == "pass"

    def test_thm2_shifted(self):
        """Test B0 = 7 still passes."""
        assert cross_validate_thm2(Thm2Params(LINEAR, 7, HALF), 8).passed

    def test_thm2_natural_ratio(self):
        """Test 4 C1/c5^2 = 2 fails at the predicted index."""
        report = cross_validate_thm2(Thm2Params(LINEAR, 0, 2), 6)
        assert _check(report, "admissibility").witness.n == 3
        assert report.summary["predicted_index"] == "3"

    @pytest.mark.slow
    def test_thm1_depth_twenty(self):
        """Test the reference q-lattice family through n = 20 keeps the same break."""
        report = cross_validate_thm1(Thm1Params(Q_HALF, 3), 20)
        assert {c.name for c in report.failures()} == {"characterization", "C:closed~solved", "solved:consistency"}
        assert _check(report, "characterization").witness.n == 3

    @pytest.mark.slow
    def test_thm2_depth_twenty(self):
        """Test the reference linear family through n = 20."""
        assert cross_validate_thm2(Thm2Params(LINEAR, 0, HALF), 20).passed


class TestExclusionWitnesses:
    """Test the B_n consistency suites."""

    def test_quadratic_closed_forms(self):
        """Test beta = 1: -4 against -16 at n = 2, agreement at n = 1."""
        L = QuadraticLattice(1, 1, 0)
        assert quadratic_b_closed(L, 0, 1) == (0, 0)
        assert quadratic_b_closed(L, 0, 2) == (-4, -16)
        assert quadratic_b_closed(QuadraticLattice(-2, 1, 0), 5, 2) == (13, 37)

    def test_telescopic_matches_tables(self):
        """Test the telescopic closed form against the table recursion."""
        L = QuadraticLattice(1, 1, 0)
        tele = telescopic_b(build_tables(L, 6), 0, 5)
        assert tele == [quadratic_b_closed(L, 0, n)[0] for n in range(6)]

    def test_nonexistence(self):
        """Test beta = 1, c5 = 1, B0 = 0 splits at n = 2."""
        report = nonexistence_quadratic(QuadraticLattice(1, 1, 0), 0)
        assert report.passed
        assert report.summary["first_mismatch"] == "2"
        witness = _check(report, "mismatch-witness").witness
        assert (witness.n, witness.lhs, witness.rhs) == (2, "-4", "-16")

    def test_nonexistence_negative_beta(self):
        """Test beta = -2, B0 = 5 gives 13 against 37."""
        report = nonexistence_quadratic(QuadraticLattice(-2, 1, 0), 5)
        witness = _check(report, "mismatch-witness").witness
        assert (witness.n, witness.lhs, witness.rhs) == (2, "13", "37")

    def test_nonexistence_linear_boundary(self):
        """Test beta = 0 is consistent."""
        report = nonexistence_quadratic(LINEAR, 0)
        assert report.passed
        assert report.summary["consistent"] == "true"

    def test_bzero(self):
        """Test Q = 1/2, c3 = 0, B0 = 1 splits at n = 2 with 8/17 against -5/13."""
        assert q_b_closed(Q_HALF, 1, 0) == (1, 1)
        assert q_b_closed(Q_HALF, 1, 1) == (1, 1)
        report = bzero_forcing_qlattice(Q_HALF, 1)
        assert report.passed
        witness = _check(report, "mismatch-witness").witness
        assert (witness.n, witness.lhs, witness.rhs) == (2, "8/17", "-5/13")

    def test_bzero_at_c3(self):
        """Test B0 = c3 agrees everywhere."""
        L = QQuadraticLattice(Fraction(1, 3), 2, 1, 4)
        report = bzero_forcing_qlattice(L, 4)
        assert report.passed
        assert report.summary["consistent"] == "true"


class TestIdentitySuite:
    """Test the dual-calculus identities."""

    def test_thm2(self):
        """Test the linear-lattice family through n = 4."""
        report = functional_identity_suite(build_tables(LINEAR, 14), Thm2Params(LINEAR, 0, HALF), 4)
        assert report.passed, report.failures()
        assert _check(report, "dx-weighted-pair").compared is not None

    def test_thm1(self):
        """Test the q-lattice family: (c) and (d) hold, (a) and (b) fail at n = 1."""
        report = functional_identity_suite(build_tables(Q_HALF, 12), Thm1Params(Q_HALF, 3), 3)
        failed = {c.name: c.witness.n for c in report.failures()}
        assert failed == {"sx-dual-derived": 1, "dx-weighted-pair": 1}

    def test_extends_small_tables(self):
        """Test tables below the needed degree are rebuilt."""
        report = functional_identity_suite(build_tables(LINEAR, 2), Thm2Params(LINEAR, 0, HALF), 2)
        assert report.passed

    def test_lattice_mismatch(self):
        """Test tables and family must share a lattice."""
        with pytest.raises(ParameterError):
            functional_identity_suite(build_tables(Q_HALF, 4), Thm2Params(LINEAR, 0, HALF), 2)

    @pytest.mark.slow
    def test_depth_ten(self):
        """Test both families through n = 10."""
        report = functional_identity_suite(build_tables(LINEAR, 26), Thm2Params(LINEAR, 0, HALF), 10)
        assert report.passed, report.failures()
        report = functional_identity_suite(build_tables(Q_HALF, 26), Thm1Params(Q_HALF, 3), 10)
        assert {c.name: c.witness.n for c in report.failures()} == {"sx-dual-derived": 1, "dx-weighted-pair": 1}


class TestSelftest:
    """Test the combined self test."""

    def test_small_depth(self):
        """Test a shallow self test passes."""
        report = run_selftest(n=6, seed=0, instances=10)
        assert report.passed, report.failures()
        names = {c.name for c in report.checks}
        assert "sensitivity:meixner-b1-nonzero" in names
        assert "thm1:characterization" in names
        note = [c for c in report.checks if c.name == "thm1:characterization"][0].note
        assert note == "documented break at n = 3"

    @pytest.mark.slow
    def test_default_depth(self):
        """Test the default self test at n = 20."""
        assert run_selftest(n=20, seed=0).passed

    @pytest.mark.slow
    def test_default_instances(self):
        """Test the default of 200 random instances per lattice."""
        report = run_selftest(n=6, seed=0)
        assert report.passed, report.failures()
        assert [c.range for c in report.checks if c.name == "product-rules:linear"] == [[0, 199]]


class TestSolveCharacterization:
    """Test the step-by-step solver for the characterization."""

    def test_linear_family(self):
        """Test the linear family is exactly what the characterization forces."""
        solved = solve_characterization(build_tables(LINEAR, 8), 0, HALF, 7)
        assert solved.breaks_at is None
        closed = thm2_recurrence(Thm2Params(LINEAR, 0, HALF), 8)
        assert list(solved.B) == list(closed.B)
        assert list(solved.C) == list(closed.C[:7])

    def test_q_half_forced_values(self):
        """Test the forced C_2, C_3 on Q = 1/2 and the break at n = 4."""
        solved = solve_characterization(build_tables(Q_HALF, 6), 0, Fraction(25, 12), 5)
        assert solved.C[1] == Fraction(325, 51)
        assert solved.C[2] == Fraction(6125, 884)
        assert all(b == 0 for b in solved.B)
        assert solved.breaks_at == 4
        assert solved.residual is not None and not solved.residual.is_zero

    def test_table_bound(self):
        """Test the tables must reach degree N + 1."""
        with pytest.raises(DegreeBoundError):
            solve_characterization(build_tables(LINEAR, 3), 0, HALF, 3)


class TestExpectBreak:
    """Test known breaks turned into regression checks."""

    def test_break_at_index(self):
        """Test a failure at the expected index passes with a note."""
        check = Check(name="x", range=[0, 5], status="fail", witness={"n": 3, "lhs": "1", "rhs": "2"})
        result = expect_break(check, 3)
        assert result.status == "pass"
        assert result.note == "documented break at n = 3"

    def test_break_elsewhere(self):
        """Test a failure at another index stays a failure."""
        check = Check(name="x", range=[0, 5], status="fail", witness={"n": 2, "lhs": "1", "rhs": "2"})
        assert expect_break(check, 3).status == "fail"

    def test_missing_break(self):
        """Test a pass over a range covering the index fails."""
        result = expect_break(Check(name="x", range=[0, 5], status="pass"), 3)
        assert result.status == "fail"
        assert result.witness.n == 3

    def test_range_short_of_index(self):
        """Test a pass over a range ending before the index still passes."""
        assert expect_break(Check(name="x", range=[0, 2], status="pass"), 3).status == "pass"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
