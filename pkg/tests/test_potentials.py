import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcchain import (
    HomogeneousState,
    PairPotential,
    RegimeError,
    critical_strain_atomistic,
    critical_strain_gfc,
    lennard_jones,
    moduli,
)

# frozen values from an independent bisection run on the closed-form moduli
LJ_F_STAR = 1.10586723526774
LJ_F_GFC_AT_LIMIT = 1.1054078272488534


def quadratic_well(curv_const=2.7, slope=1.0):
    """Synthetic potential with phi''(r) = curv_const - slope*r, so the
    elastic modulus A_F = 5*curv_const - 9*slope*F is linear in F."""
    return PairPotential(
        phi=lambda r: 0.5 * curv_const * r * r - slope * r ** 3 / 6.0,
        phi_prime=lambda r: curv_const * r - 0.5 * slope * r * r,
        phi_double_prime=lambda r: curv_const - slope * r,
    )


class TestLennardJones:
    def test_ground_state(self, lj):
        assert lj.phi(1.0) == pytest.approx(-1.0)
        assert lj.phi_prime(1.0) == 0.0

    def test_second_derivative_values(self, lj):
        assert lj.phi_double_prime(1.0) == pytest.approx(72.0)
        assert lj.phi_double_prime(2.0) == pytest.approx(-0.318603515625, abs=1e-15)

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_rejects_nonpositive_separation(self, lj, r):
        for f in (lj.phi, lj.phi_prime, lj.phi_double_prime):
            with pytest.raises(ValueError):
                f(r)

    @given(r=st.floats(min_value=0.8, max_value=2.5))
    def test_derivatives_match_central_differences(self, lj, r):
        h = 1e-5 * r
        fd1 = (lj.phi(r + h) - lj.phi(r - h)) / (2 * h)
        fd2 = (lj.phi(r + h) - 2 * lj.phi(r) + lj.phi(r - h)) / (h * h)
        # absolute floor covers the truncation noise at the zero of phi' (r = 1)
        assert lj.phi_prime(r) == pytest.approx(fd1, rel=1e-6, abs=1e-6)
        assert lj.phi_double_prime(r) == pytest.approx(fd2, rel=1e-6, abs=1e-6)


class TestHomogeneousState:
    def test_moduli_at_ground_state(self, lj):
        s = moduli(lj, 1.0)
        assert s.a_f == pytest.approx(70.7255859375, abs=1e-12)
        assert s.phi1_2f == pytest.approx(lj.phi_prime(2.0))
        assert s.a_f == s.phi2_f + 4.0 * s.phi2_2f  # stored exactly

    def test_rejects_nonpositive_strain(self, lj):
        with pytest.raises(ValueError):
            moduli(lj, 0.0)

    def test_zero_next_nearest_coupling(self):
        s = HomogeneousState(strain=1.0, phi2_f=3.0, phi2_2f=0.0)
        assert s.a_f == 3.0

    def test_from_modulus_ratio(self):
        s = HomogeneousState.from_modulus_ratio(phi2_f=1.0, a_f=0.4)
        assert s.phi2_2f == pytest.approx(-0.15)
        assert math.isnan(s.strain)

    def test_sign_regime_check(self):
        HomogeneousState.from_modulus_ratio(1.0, 0.4).require_sign_regime()
        with pytest.raises(RegimeError):
            HomogeneousState(strain=1.0, phi2_f=1.0, phi2_2f=0.2).require_sign_regime()
        with pytest.raises(RegimeError):
            HomogeneousState(strain=1.0, phi2_f=-1.0, phi2_2f=-0.1).require_sign_regime()


class TestCriticalStrains:
    def test_lj_atomistic(self, lj):
        f_star = critical_strain_atomistic(lj)
        assert f_star == pytest.approx(LJ_F_STAR, abs=1e-9)
        assert abs(moduli(lj, f_star).a_f) <= 1e-12

    def test_synthetic_linear_modulus(self):
        pot = quadratic_well()  # A_F = 13.5 - 9 F, root at 1.5
        assert critical_strain_atomistic(pot) == pytest.approx(1.5, abs=1e-12)

    def test_bracketing(self, lj):
        f_star = critical_strain_atomistic(lj)
        assert moduli(lj, f_star - 0.01).a_f > 0 > moduli(lj, f_star + 0.01).a_f

    def test_modulus_decreasing_justifies_bisection(self, lj):
        f_star = critical_strain_atomistic(lj)
        grid = np.linspace(1.0, f_star + 0.1, 60)
        vals = [moduli(lj, f).a_f for f in grid]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_gfc_at_zero_reduces_to_atomistic(self, lj):
        assert critical_strain_gfc(lj, 0.0) == pytest.approx(critical_strain_atomistic(lj), abs=1e-13)

    def test_gfc_at_interface_limit(self, lj):
        f_gfc = critical_strain_gfc(lj, 0.6595)
        assert f_gfc == pytest.approx(LJ_F_GFC_AT_LIMIT, abs=1e-9)
        assert f_gfc < critical_strain_atomistic(lj)
        s = moduli(lj, f_gfc)
        assert abs(s.a_f + 0.6595 * s.phi2_2f) <= 1e-12

    def test_gfc_ordering_over_lambda_range(self, lj):
        f_star = critical_strain_atomistic(lj)
        for lam in np.linspace(0.5, 1.0, 6):
            assert critical_strain_gfc(lj, lam) < f_star

    def test_gfc_monotone_in_lambda(self, lj):
        vals = [critical_strain_gfc(lj, lam) for lam in np.linspace(0.5, 1.0, 6)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_gfc_rejects_bad_lambda(self, lj):
        with pytest.raises(ValueError):
            critical_strain_gfc(lj, 1.5)

    def test_no_sign_change_reported(self):
        stiff = PairPotential(
            phi=lambda r: 0.5 * r * r,
            phi_prime=lambda r: r,
            phi_double_prime=lambda r: 1.0,
        )  # A_F = 5 everywhere
        with pytest.raises(ValueError, match="no sign change"):
            critical_strain_atomistic(stiff)
