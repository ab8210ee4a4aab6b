import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings as hyp_settings, strategies as st

from core.errors import NoConvergence
from core.linalg import (
    ScaledScalar,
    ScaledVector,
    a_product_mass,
    a_product_row,
    collatz_wielandt_bounds,
    collatz_wielandt_upper,
    entrance_vector,
    lower_ones,
    matrix_A,
    matrix_M,
    ordered_product,
    perron_pair,
    phi,
    phi_from,
    phi_right_to_left,
    phi_trajectory,
    phi_window,
    spectral_radius,
    window_values,
)
from tests.conftest import make_model, random_models
from tests.fixtures import reference_values as ref


@pytest.mark.unit
class TestScaledScalar:

    def test_normalized_mantissa(self):
        x = ScaledScalar.from_float(12.0)
        assert 1.0 <= x.mantissa < 2.0
        assert float(x) == 12.0

    def test_far_outside_double_range(self):
        tiny = ScaledScalar.from_parts(1.5, -5000)
        huge = ScaledScalar.from_parts(1.5, 5000)
        assert float(tiny) == 0.0
        assert float(huge) == math.inf
        assert (tiny * huge).ratio(ScaledScalar.from_float(2.25)) == pytest.approx(1.0)

    def test_addition_aligns_exponents(self):
        a = ScaledScalar.from_parts(1.0, 100)
        b = ScaledScalar.from_parts(1.0, 99)
        assert (a + b).ratio(ScaledScalar.from_parts(1.5, 100)) == pytest.approx(1.0, rel=1e-15)

    def test_zero(self):
        z = ScaledScalar.zero()
        assert z.is_zero
        assert z.log2() == -math.inf
        assert (z + ScaledScalar.one()) == ScaledScalar.one()

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ScaledScalar.from_float(-1.0)

    def test_division_by_zero(self):
        with pytest.raises(ZeroDivisionError):
            ScaledScalar.one() / ScaledScalar.zero()


@pytest.mark.unit
class TestScaledVector:

    def test_direction_is_normalized(self):
        v = ScaledVector.from_array([3.0, 1.0])
        assert 0.5 <= v.direction.max() < 1.0
        np.testing.assert_allclose(v.to_array(), [3.0, 1.0])

    def test_row_step_matches_plain_product(self):
        m = np.array(ref.R2_M)
        v = ScaledVector.from_array([1.0, 0.0])
        for _ in range(5):
            v = v.row_step(m)
        np.testing.assert_allclose(v.to_array(), np.array([1.0, 0.0]) @ np.linalg.matrix_power(m, 5))


@pytest.mark.unit
class TestSiteMatrices:

    def test_matrix_M_r2(self, r2_model):
        np.testing.assert_allclose(matrix_M(r2_model, 1), ref.R2_M)

    def test_matrix_M_r1(self, mm1_model):
        np.testing.assert_allclose(matrix_M(mm1_model, 3), [[0.5]])

    def test_matrix_M_zero_lambdas(self):
        model = make_model(3, [[0, 1, 0, 0], [1, 0, 0, 0]])
        np.testing.assert_allclose(matrix_M(model, 1), [[0, 0, 0], [1, 0, 0], [0, 1, 0]])

    def test_matrix_A_r2(self, r2_model):
        np.testing.assert_allclose(matrix_A(r2_model, 1), ref.R2_A)

    def test_matrix_A_equals_M_for_r1(self, mm1_model):
        np.testing.assert_allclose(matrix_A(mm1_model, 2), matrix_M(mm1_model, 2))

    def test_matrix_A_r3(self):
        model = make_model(3, [[0, 1, 0, 0], [1, 1, 2, 3]])
        expected = np.array([[1, 2, 3], [2, 2, 3], [1, 3, 3]], dtype=float)
        np.testing.assert_allclose(matrix_A(model, 1), expected)

    def test_site_zero_has_no_matrix(self, r2_model):
        with pytest.raises(ValueError):
            matrix_M(r2_model, 0)

    def test_returned_matrices_are_copies(self, r2_model):
        m = matrix_M(r2_model, 1)
        m[0, 0] = 99.0
        assert matrix_M(r2_model, 1)[0, 0] == 0.5

    def test_ordered_product(self, r2_model):
        m = np.array(ref.R2_M)
        np.testing.assert_allclose(ordered_product(r2_model, 1, 3), m @ m @ m)
        np.testing.assert_allclose(ordered_product(r2_model, 3, 2), np.eye(2))


@pytest.mark.unit
class TestPhi:

    def test_phi_zero_is_one(self, periodic_model):
        assert float(phi(periodic_model, 0)) == 1.0

    def test_phi_r2(self, r2_model):
        assert [float(phi(r2_model, n)) for n in range(3)] == pytest.approx(ref.R2_PHI)

    def test_phi_mm1_is_geometric(self, mm1_model):
        assert float(phi(mm1_model, 10)) == pytest.approx(0.5 ** 10, rel=1e-15)

    def test_phi_underflow_is_carried(self, mm1_model):
        """0.5**3000 is far below the smallest double."""
        assert phi(mm1_model, 3000).log2() == pytest.approx(-3000.0)

    def test_trajectory_is_cached_and_extended(self, mm1_model):
        short = phi_trajectory(mm1_model, 5)
        longer = phi_trajectory(mm1_model, 10)
        assert len(short) == 6 and len(longer) == 11
        assert short == longer[:6]

    def test_entrance_vector(self, r2_model, r2_unit_entry_model):
        np.testing.assert_allclose(entrance_vector(r2_model), ref.R2_ENTRANCE)
        np.testing.assert_allclose(entrance_vector(r2_unit_entry_model), [1.0, 0.0])

    def test_phi_from_entrance(self, r2_model):
        s = entrance_vector(r2_model)
        assert float(phi_from(r2_model, s, 2)) == pytest.approx(0.75)

    def test_window_empty_product(self, r2_model):
        assert float(phi_window(r2_model, 4, 4)) == 1.0

    def test_window_mm1(self, mm1_model):
        assert float(phi_window(mm1_model, 2, 5)) == pytest.approx(0.125)

    def test_window_r2(self, r2_model):
        assert float(phi_window(r2_model, 1, 3)) == pytest.approx(0.5)

    def test_window_values_share_suffixes(self, periodic_model):
        values = window_values(periodic_model, 1, 6)
        for j, v in enumerate(values, start=1):
            assert v.ratio(phi_window(periodic_model, j, 6)) == pytest.approx(1.0, rel=1e-14)

    def test_bad_window(self, r2_model):
        with pytest.raises(ValueError):
            phi_window(r2_model, 3, 2)


@pytest.mark.unit
class TestProductIdentity:

    def test_a_mass_first_site(self, periodic_model):
        assert float(a_product_mass(periodic_model, 1)) == 1.0

    def test_a_mass_mm1(self, mm1_model):
        assert float(a_product_mass(mm1_model, 4)) == pytest.approx(0.125)

    def test_a_mass_r2(self, r2_model):
        assert float(a_product_mass(r2_model, 3)) == pytest.approx(0.5)

    def test_intertwining(self, periodic_model):
        L = lower_ones(2)
        for i in range(1, 6):
            np.testing.assert_allclose(matrix_A(periodic_model, i) @ L, L @ matrix_M(periodic_model, i), atol=1e-15)

    def test_row_identity_for_any_start(self, r2_model):
        """v A_1 ... A_(n-1) 1 = v L M_1 ... M_(n-1) e_1^T."""
        v = np.array([0.3, 0.7])
        lhs = a_product_row(r2_model, 6, v).dot(np.ones(2))
        rhs = phi_from(r2_model, v @ lower_ones(2), 5)
        assert lhs.ratio(rhs) == pytest.approx(1.0, rel=1e-13)

    @hyp_settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(model=random_models(), n=st.integers(min_value=1, max_value=50))
    def test_product_identity_randomized(self, model, n):
        lhs = a_product_mass(model, n)
        rhs = phi(model, n - 1)
        assert lhs.ratio(rhs) == pytest.approx(1.0, rel=1e-12)

    @hyp_settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(model=random_models(), n=st.integers(min_value=0, max_value=40))
    def test_associativity(self, model, n):
        assert phi(model, n).ratio(phi_right_to_left(model, n)) == pytest.approx(1.0, rel=1e-12)

    @hyp_settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(
        rows=st.lists(
            st.tuples(st.floats(min_value=0.1, max_value=10.0), st.floats(min_value=0.1, max_value=10.0)),
            min_size=2, max_size=6,
        ),
        data=st.data(),
    )
    def test_phi_grows_with_each_birth_rate_r1(self, rows, data):
        prefix = [[0.0, rows[0][1]]] + [list(r) for r in rows[1:]]
        site = data.draw(st.integers(min_value=0, max_value=len(prefix) - 1))
        factor = data.draw(st.floats(min_value=1.0, max_value=4.0))
        bumped = [row[:] for row in prefix]
        bumped[site][1] *= factor
        base, more = make_model(1, prefix), make_model(1, bumped)
        for n in range(0, 25):
            assert phi(more, n).ratio(phi(base, n)) >= 1.0 - 1e-12


@pytest.mark.unit
class TestPerron:

    def test_scalar(self):
        assert spectral_radius(np.array([[0.5]])) == pytest.approx(0.5)

    def test_companion(self):
        assert spectral_radius(np.array(ref.R2_M)) == pytest.approx(ref.R2_RHO, rel=1e-9)

    def test_identity(self):
        assert spectral_radius(np.eye(2)) == pytest.approx(1.0)

    def test_periodic_matrix(self):
        """[[0, 2], [1/2, 0]] has eigenvalues +-1; the one-step quotient oscillates."""
        m = np.array([[0.0, 2.0], [0.5, 0.0]])
        rho, h = perron_pair(m)
        assert rho == pytest.approx(1.0, rel=1e-9)
        np.testing.assert_allclose(m @ h, rho * h, rtol=1e-8)

    def test_nilpotent(self):
        rho, _ = perron_pair(np.array([[0.0, 0.0], [1.0, 0.0]]))
        assert rho == 0.0

    def test_eigenvector(self):
        m = np.array(ref.R2_M)
        rho, h = perron_pair(m)
        np.testing.assert_allclose(m @ h, rho * h, rtol=1e-8)
        assert h.min() > 0

    def test_no_convergence(self):
        m = np.array([[1.0, 1.0], [0.0, 1.0]])  # Jordan block: quotient creeps towards 1
        with pytest.raises(NoConvergence):
            perron_pair(m, tol=1e-15, max_iter=20)

    def test_collatz_wielandt_bounds_the_root(self):
        m = np.array(ref.R2_M)
        _, h = perron_pair(m)
        assert collatz_wielandt_upper(m, h) >= ref.R2_RHO - 1e-15
        assert collatz_wielandt_upper(m, np.ones(2)) >= ref.R2_RHO

    def test_estimate_stays_inside_the_sandwich(self):
        m = np.array(ref.R2_M)
        rho, h = perron_pair(m)
        low, high = collatz_wielandt_bounds(m, h)
        assert low <= rho <= high
        assert low <= ref.R2_RHO + 1e-15
        assert high >= ref.R2_RHO - 1e-15
        assert rho == pytest.approx(ref.R2_RHO, abs=1e-11)

    def test_reducible_estimate_is_not_averaged_away(self):
        """The sandwich is wide for a triangular matrix; the estimate stays at the dominant root."""
        m = np.array([[0.5, 1.0], [0.0, 0.3]])
        assert perron_pair(m)[0] == pytest.approx(0.5, rel=1e-8)

    def test_collatz_wielandt_needs_positive_vector(self):
        with pytest.raises(ValueError):
            collatz_wielandt_upper(np.eye(2), np.array([1.0, 0.0]))
