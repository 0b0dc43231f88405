"""
Tests for truncated moment functionals and the Pearson solver.
"""

import random
from fractions import Fraction

import pytest

from ddops import apply, build_tables
from exact_core import DegreeBoundError, ParameterError, Poly, RecurrencePair, RegularityError, ttrr_build
from families import MeixnerParams, characterization_pearson_data, meixner2_recurrence
from functionals import (
    MomentFunctional,
    PearsonData,
    act,
    compare_functionals,
    dual_basis,
    gram_norms,
    left_multiply,
    pearson_moments,
    pearson_residual,
    recurrence_from_moments,
    transform,
)
from lattice import QQuadraticLattice, QuadraticLattice

HALF = Fraction(1, 2)
LINEAR = QuadraticLattice(0, 2, 0)
Q_HALF = QQuadraticLattice(HALF, 1, 1, 0)

# phi = -1/2, psi = z on x = 2s
LINEAR_PD = PearsonData(Poly([-HALF]), Poly([0, 1]))


def _moments_of(rec: RecurrencePair, M: int) -> MomentFunctional:
    """Moments m_0..m_M of the functional whose OPS has recurrence rec (m_0 = 1)."""
    P = ttrr_build(rec, M)
    moments = []
    for k in range(M + 1):
        # <u, z^k> from z^k = sum c_j P_j and <u, P_j> = delta_{j0}
        residual = Poly.monomial(k)
        for j in range(k, 0, -1):
            residual = residual - P[j].scale(residual.coeff(j))
        moments.append(residual.coeff(0))
    return MomentFunctional(tuple(moments))


class TestMomentFunctional:
    """Test the functional container."""

    def test_act(self):
        """Test the dot product of moments and coefficients."""
        u = MomentFunctional((1, 0, HALF))
        assert act(u, Poly.monomial(2)) == HALF
        assert act(u, Poly()) == 0
        assert act(MomentFunctional((1, 0)), Poly([1])) == 1

    def test_act_degree_bound(self):
        """Test acting beyond the valid length raises."""
        with pytest.raises(DegreeBoundError):
            act(MomentFunctional((1, 0)), Poly.monomial(2))

    def test_valid_len_bounds(self):
        """Test an impossible valid length is rejected."""
        with pytest.raises(ParameterError):
            MomentFunctional((1, 2), valid_len=3)

    def test_moment_access(self):
        """Test untrusted moments are not readable."""
        u = MomentFunctional((1, 2, 3), valid_len=2)
        assert u.moment(1) == 2
        with pytest.raises(DegreeBoundError):
            u.moment(2)

    def test_linear_combination_truncates(self):
        """Test sums keep the shorter valid range."""
        u = MomentFunctional((1, 2, 3))
        v = MomentFunctional((1, 1))
        assert (u + v).valid == (2, 3)
        assert (u - v).valid_len == 2

    def test_compare(self):
        """Test the first differing moment is reported."""
        result = compare_functionals(MomentFunctional((1, 2, 3)), MomentFunctional((1, 2, 4, 5)))
        assert result.compared == (0, 2)
        assert result.first_mismatch == 2
        assert not result.ok


class TestDualOperations:
    """Test left multiplication and the dual operator actions."""

    def test_left_multiply_identity(self):
        """Test f = 1 leaves u unchanged."""
        u = MomentFunctional((1, 0, HALF, 0))
        assert left_multiply(Poly([1]), u) == u

    def test_left_multiply_shift(self):
        """Test z u shifts moments and shrinks the valid range."""
        zu = left_multiply(Poly([0, 1]), MomentFunctional((1, 0, HALF, 0)))
        assert zu.valid == (0, HALF, 0)
        assert zu.valid_len == 3

    def test_left_multiply_by_p1(self):
        """Test (z - m_1/m_0) u has vanishing m_0."""
        u = MomentFunctional((2, 3, 7))
        assert left_multiply(Poly([-Fraction(3, 2), 1]), u).moment(0) == 0

    def test_transform_examples(self):
        """Test S_x and D_x on u = [1, 0, 1/2] over x = 2s."""
        T = build_tables(LINEAR, 3)
        u = MomentFunctional((1, 0, HALF))
        assert transform("sx", T, u).moment(2) == Fraction(3, 2)
        assert transform("dx", T, u).moment(2) == 0
        assert transform("dx", T, MomentFunctional((1, 0))).moment(0) == 0

    def test_transform_duality(self):
        """Test <D_x u, p> = -<u, D_x p> and <S_x u, p> = <u, S_x p>."""
        rng = random.Random(4)
        T = build_tables(Q_HALF, 9)
        for _ in range(20):
            u = MomentFunctional(tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(10)))
            p = Poly([Fraction(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(rng.randint(1, 10))])
            assert act(transform("dx", T, u), p) == -act(u, apply("dx", T, p))
            assert act(transform("sx", T, u), p) == act(u, apply("sx", T, p))

    def test_transform_table_bound(self):
        """Test transforming needs tables reaching valid_len - 1."""
        with pytest.raises(DegreeBoundError):
            transform("dx", build_tables(LINEAR, 1), MomentFunctional((1, 0, 1)))


class TestDualBasis:
    """Test the triangular dual basis solve."""

    def test_monomial_basis(self):
        """Test monomials have Kronecker duals."""
        P = [Poly.monomial(m) for m in range(4)]
        assert dual_basis(P, 2, 3).valid == (0, 0, 1, 0)

    def test_first_element_is_functional(self):
        """Test a_0 = u for a normalized OPS functional."""
        rec = RecurrencePair((0, 0, 0, 0), (HALF, -1, Fraction(-9, 2)))
        P = ttrr_build(rec, 4)
        u = _moments_of(rec, 4)
        assert dual_basis(P, 0, 4).valid == u.valid

    def test_linear_family_second_element(self):
        """Test a_1 = P_1 u / <u, P_1^2> for the linear-lattice family."""
        P = ttrr_build(RecurrencePair((0, 0), (HALF,)), 2)
        assert dual_basis(P, 1, 2).valid == (0, 1, 0)

    def test_not_simple(self):
        """Test a non-simple set is rejected."""
        with pytest.raises(ParameterError):
            dual_basis([Poly([1]), Poly([1])], 0, 1)

    def test_delta_property(self):
        """Test <a_n, P_m> = delta_{nm}."""
        rec = RecurrencePair((1, 2, 3, 4), (5, 6, 7))
        P = ttrr_build(rec, 4)
        for n in range(5):
            a = dual_basis(P, n, 4)
            for m in range(5):
                assert act(a, P[m]) == (1 if m == n else 0)


class TestPearson:
    """Test the Pearson moment solver and moment inversion."""

    def test_linear_moments(self):
        """Test m = [1, 0, 1/2, 0, -1/4] for phi = -1/2, psi = z on x = 2s."""
        u = pearson_moments(LINEAR_PD, build_tables(LINEAR, 3), 4)
        assert u.valid == (1, 0, HALF, 0, Fraction(-1, 4))

    def test_normalization_only(self):
        """Test N = 0 gives [1]."""
        assert pearson_moments(LINEAR_PD, build_tables(LINEAR, 0), 0).valid == (1,)

    def test_q_lattice_c1(self):
        """Test m_2 = C_1 = 25/12 for the symmetric q-lattice family."""
        pd = characterization_pearson_data(Q_HALF, 0, Fraction(25, 12))
        u = pearson_moments(pd, build_tables(Q_HALF, 3), 4)
        assert u.moment(1) == 0
        assert u.moment(2) == Fraction(25, 12)

    def test_vanishing_d_n(self):
        """Test d_n = 0 is reported with its index."""
        pd = PearsonData(Poly([0, 0, -1]), Poly([0, 1]))
        with pytest.raises(RegularityError) as exc:
            pearson_moments(pd, build_tables(LINEAR, 3), 4)
        assert exc.value.index == 1

    def test_recurrence_from_moments(self):
        """Test B_0 = B_1 = 0, C_1 = 1/2, C_2 = -1."""
        rec = recurrence_from_moments(MomentFunctional((1, 0, HALF, 0, Fraction(-1, 4))), 2)
        assert rec.B == (0, 0)
        assert rec.C == (HALF, -1)

    def test_gram_norms(self):
        """Test <u, P_2^2> = -1/2."""
        norms = gram_norms(MomentFunctional((1, 0, HALF, 0, Fraction(-1, 4))), 2)
        assert norms == [1, HALF, -HALF]

    def test_non_regular(self):
        """Test a Dirac-like functional fails at n = 1."""
        with pytest.raises(RegularityError) as exc:
            recurrence_from_moments(MomentFunctional((1, 0, 0, 0, 0)), 2)
        assert exc.value.index == 1

    def test_too_few_moments(self):
        """Test 2N + 1 moments are required."""
        with pytest.raises(DegreeBoundError):
            recurrence_from_moments(MomentFunctional((1, 0, 1)), 2)

    def test_meixner_moment_inversion(self):
        """Test forward moments of a Meixner recurrence invert to the same recurrence."""
        params = MeixnerParams(0, HALF)
        u = _moments_of(meixner2_recurrence(params, 12), 12)
        assert recurrence_from_moments(u, 6) == meixner2_recurrence(params, 6)

    def test_residual(self):
        """Test residuals vanish on solved moments and detect a perturbation."""
        T = build_tables(LINEAR, 6)
        u = pearson_moments(LINEAR_PD, T, 6)
        for k in range(5):
            assert pearson_residual(LINEAR_PD, T, u, k) == 0
        bumped = MomentFunctional(u.valid[:2] + (u.valid[2] + 1,) + u.valid[3:])
        assert pearson_residual(LINEAR_PD, T, bumped, 1) != 0

    def test_residual_gaussian_like(self):
        """Test u = [1, 0, 1, 0, 3] misses the k = 1 relation by 1/2."""
        T = build_tables(LINEAR, 4)
        residual = pearson_residual(LINEAR_PD, T, MomentFunctional((1, 0, 1, 0, 3)), 1)
        assert residual == -HALF


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
