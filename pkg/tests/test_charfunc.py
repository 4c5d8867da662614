import numpy as np
import pytest

from weylfit import charfunc as cf
from weylfit import fockspace as fs
from weylfit.errors import InvalidTimeError, TruncationWarning, UnsupportedOrderError

OMEGA_ETA = 2 * np.pi * 4.7e3


class TestCircleFunction:
    def test_resonant_limit(self):
        # the function tends to i*t, keeping |C| = t on resonance
        val = cf.circle_function(0.0, 1.0)
        assert val == pytest.approx(1j, abs=1e-12)
        assert abs(val) == pytest.approx(1.0, abs=1e-12)

    def test_periodic_zero(self):
        val = cf.circle_function(1.0, 2 * np.pi)
        assert abs(val) <= 1e-12

    def test_direct_arithmetic(self):
        # (e^{i pi} - 1) / 1 = -2
        assert cf.circle_function(1.0, np.pi) == pytest.approx(-2.0 + 0.0j, abs=1e-12)

    def test_continuity_near_resonance(self):
        t = 3.0
        for delta in (1e-10, 1e-7, 1e-5):
            gap = abs(cf.circle_function(delta, t) - 1j * t)
            assert gap <= abs(delta) * t**2 / 2 + delta**2 * t**3 / 6 + 1e-15


class TestXiOfTime:
    def test_zero_at_start(self):
        src = cf.SourceSpec.resonant(OMEGA_ETA, t0=1e-5)
        assert cf.xi_of_time(src, 1e-5).xi == 0

    def test_resonant_magnitude_matches_linear_law(self):
        src = cf.SourceSpec.resonant(OMEGA_ETA, dphi=0.0)
        point = cf.xi_of_time(src, 33.86e-6)
        assert abs(point.xi) == pytest.approx(1.0, abs=2e-4)

    def test_detuned_source_closes_circle(self):
        # quadrature oracle of the integrated source response
        delta = 2 * np.pi * 3e3
        t = 2 * np.pi / delta
        src = cf.SourceSpec(J0=-1j * OMEGA_ETA, delta=delta)
        xi = cf.xi_of_time(src, t).xi
        ts = np.linspace(0.0, t, 20001)
        oracle = 1j * src.J0 * np.trapezoid(np.exp(1j * delta * ts), ts)
        assert abs(xi) <= 1e-9 * OMEGA_ETA * t
        assert abs(xi - oracle) <= 1e-6 * OMEGA_ETA * t

    def test_detuned_reduces_to_resonant(self):
        t = 40e-6
        res = cf.xi_of_time(cf.SourceSpec.resonant(OMEGA_ETA, dphi=0.3), t).xi
        detuned = cf.xi_of_time(cf.SourceSpec(J0=-1j * OMEGA_ETA * np.exp(0.3j), delta=1e-4), t).xi
        assert abs(res - detuned) <= 1e-8

    def test_rejects_time_before_start(self):
        src = cf.SourceSpec.resonant(OMEGA_ETA, t0=1.0)
        with pytest.raises(InvalidTimeError):
            cf.xi_of_time(src, 0.5)


class TestClosedForms:
    def test_vacuum_values(self):
        assert cf.chi_vacuum(0.0) == pytest.approx(1.0)
        assert cf.chi_vacuum(1.0) == pytest.approx(np.exp(-0.5))
        assert cf.chi_vacuum(1.0 + 1.0j) == pytest.approx(np.exp(-1.0))

    def test_squeezed_reduces_to_vacuum_at_zero_r(self):
        spec = cf.SqueezeSpec(2, 0.0)
        xis = np.array([0.3, 0.5 + 0.2j, 1.0j])
        np.testing.assert_allclose(cf.chi_squeezed_exact(xis, spec),
                                   cf.chi_vacuum(xis), atol=1e-14)

    def test_squeezed_axis_values(self):
        r = 0.25
        spec = cf.SqueezeSpec(2, r, 0.0)
        # real axis contracts with e^{2r}, imaginary axis with e^{-2r}
        assert cf.chi_squeezed_exact(1.0, spec) == pytest.approx(np.exp(-np.exp(2 * r) / 2), rel=1e-12)
        assert cf.chi_squeezed_exact(1.0j, spec) == pytest.approx(np.exp(-np.exp(-2 * r) / 2), rel=1e-12)

    def test_squeezed_real_and_bounded(self):
        rng = np.random.default_rng(3)
        spec = cf.SqueezeSpec(2, 0.4, 1.1)
        xis = rng.normal(size=40) + 1j * rng.normal(size=40)
        vals = cf.chi_squeezed_exact(xis, spec)
        assert np.all(vals > 0) and np.all(vals <= 1.0 + 1e-12)

    def test_thermal_power_law(self):
        spec = cf.SqueezeSpec(2, 0.25, 0.0)
        xi = 0.5
        base = cf.chi_squeezed_exact(xi, spec)
        assert cf.chi_thermal_squeezed_exact(xi, spec, 0.1) == pytest.approx(base**1.2, rel=1e-12)

    def test_thermal_reduces_to_vacuum_form_at_zero_r(self):
        spec = cf.SqueezeSpec(2, 0.0)
        xi = 0.7 + 0.1j
        n_bar = 0.3
        expected = np.exp(-0.5 * (1 + 2 * n_bar) * abs(xi) ** 2)
        assert cf.chi_thermal_squeezed_exact(xi, spec, n_bar) == pytest.approx(expected, rel=1e-12)

    def test_closed_forms_reject_other_orders(self):
        spec = cf.SqueezeSpec(3, 0.2)
        with pytest.raises(UnsupportedOrderError):
            cf.chi_squeezed_exact(0.5, spec)
        with pytest.raises(UnsupportedOrderError):
            cf.chi_thermal_squeezed_exact(0.5, spec, 0.1)


class TestChiNumeric:
    def test_vacuum_matches_gaussian(self):
        rho = fs.vacuum_state(60).to_density()
        spec = cf.SqueezeSpec(2, 0.0)
        val = cf.chi_numeric(rho, spec, 0.8)
        assert val.real == pytest.approx(np.exp(-0.32), abs=1e-10)
        assert abs(val.imag) <= 1e-12

    def test_matches_exact_on_grid(self):
        # exact closed form is the oracle on a 10x10 grid with |xi| <= 2
        spec = cf.SqueezeSpec(2, 0.25, 0.0)
        rho = fs.vacuum_state(100).to_density()
        axis = np.linspace(-1.4, 1.4, 10)
        re, im = np.meshgrid(axis, axis)
        xis = re + 1j * im
        num = cf.chi_numeric_grid(rho, spec, xis)
        exact = cf.chi_squeezed_exact(xis, spec)
        assert np.max(np.abs(num - exact)) <= 1e-8

    def test_thermal_squeezed_matches_exact(self):
        spec = cf.SqueezeSpec(2, 0.25, 0.0)
        rho = fs.thermal_state(0.1, 100)
        val = cf.chi_numeric(rho, spec, 0.5)
        expected = cf.chi_thermal_squeezed_exact(0.5, spec, 0.1)
        assert val.real == pytest.approx(expected, abs=1e-8)
        assert abs(val.imag) <= 1e-10

    def test_trisqueezed_parity(self):
        spec = cf.SqueezeSpec(3, 0.25, 0.0)
        rho = fs.vacuum_state(100).to_density()
        rng = np.random.default_rng(11)
        xis = rng.uniform(-1.2, 1.2, 12) + 1j * rng.uniform(-1.2, 1.2, 12)
        plus = cf.chi_numeric_grid(rho, spec, xis)
        minus = cf.chi_numeric_grid(rho, spec, -xis)
        np.testing.assert_allclose(np.real(minus), np.real(plus), atol=1e-10)
        np.testing.assert_allclose(np.imag(minus), -np.imag(plus), atol=1e-10)
        assert np.max(np.abs(np.imag(plus))) > 1e-3  # genuinely non-Gaussian

    def test_hermiticity_for_random_state(self):
        rng = np.random.default_rng(5)
        d = 40
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho_m = g @ g.conj().T
        rho = fs.DensityOperator(d, rho_m / np.trace(rho_m))
        spec = cf.SqueezeSpec(2, 0.15, 0.7)
        xis = rng.uniform(-0.8, 0.8, 10) + 1j * rng.uniform(-0.8, 0.8, 10)
        plus = cf.chi_numeric_grid(rho, spec, xis)
        minus = cf.chi_numeric_grid(rho, spec, -xis)
        np.testing.assert_allclose(minus, np.conj(plus), atol=1e-10)
        assert np.max(np.abs(plus)) <= 1.0 + 1e-8

    def test_truncation_warning_propagates(self):
        rho = fs.vacuum_state(20).to_density()
        spec = cf.SqueezeSpec(2, 0.0)
        with pytest.warns(TruncationWarning):
            cf.chi_numeric(rho, spec, 2.5)


class TestHeating:
    def test_zero_heating_identity(self):
        assert cf.xi_heated(0.7 + 0.2j, 0.0).xi == 0.7 + 0.2j

    def test_quadratic_substitution(self):
        assert cf.xi_heated(1.0, 0.1).xi == pytest.approx(1.1)

    def test_heating_parameter_from_rate(self):
        # kappa t / 4 expressed through xi: c_h = kappa / (4 omega_eta) when
        # xi = omega_eta * t, so 300 quanta/s at the reference drive is tiny
        kappa = 300.0
        c_h = kappa / (4 * OMEGA_ETA)
        assert c_h == pytest.approx(0.00254, abs=2e-4)

    def test_guard_flags_large_distortion(self):
        assert cf.xi_heated(2.0, 0.3).flagged
        assert not cf.xi_heated(1.0, 0.1).flagged
