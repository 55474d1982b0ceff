"""Circle-rotation systems, trigonometric observables, and analytic limits."""

import math
from fractions import Fraction
from random import Random

import numpy as np
import pytest

from ergocubes.core import DimensionError, PreconditionError
from ergocubes.torus import (
    TORUS_KINDS,
    TorusSystem,
    TrigPoly,
    fourier_cubic_limit,
    fourier_host_integral,
    sqrt23_system,
    sqrt_fraction,
    torus_average,
    torus_average_naive,
    torus_report,
)

F = Fraction


def random_poly(rng, max_freq=3, scale=1.0):
    coeffs = TrigPoly.constant(rng.uniform(-scale, scale))
    for n in range(1, max_freq + 1):
        coeffs = coeffs + TrigPoly.cosine(n, rng.uniform(-scale, scale))
        coeffs = coeffs + TrigPoly.sine(n, rng.uniform(-scale, scale))
    return coeffs


class TestSqrtFraction:
    def test_precision_bracket(self):
        a = sqrt_fraction(2)
        assert a * a <= 2
        assert (a + F(1, 2**128)) ** 2 > 2
        assert 2 - a * a < F(1, 2**126)
        b = sqrt_fraction(3)
        assert b * b <= 3 < (b + F(1, 2**128)) ** 2

    def test_exact_squares(self):
        assert sqrt_fraction(0) == 0
        assert sqrt_fraction(4) == 2
        assert sqrt_fraction(9, bits=16) == 3

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="square root of negative"):
            sqrt_fraction(-1)


class TestTorusSystem:
    def test_stock_system(self):
        sys = sqrt23_system()
        assert sys.generic
        assert F(41, 100) < sys.alpha < F(42, 100)
        assert F(73, 100) < sys.beta < F(74, 100)

    def test_rotation_amounts_reduced_mod_one(self):
        sys = TorusSystem(F(5, 4), F(-1, 3))
        assert sys.alpha == F(1, 4)
        assert sys.beta == F(2, 3)
        assert not sys.generic


class TestTrigPoly:
    def test_requires_conjugate_symmetry(self):
        with pytest.raises(ValueError, match="not conjugate-symmetric at frequency 1"):
            TrigPoly({1: 0.5})
        with pytest.raises(ValueError, match="not conjugate-symmetric"):
            TrigPoly({1: 0.5, -1: 0.5j})

    def test_point_values(self):
        cos1 = TrigPoly.cosine(1)
        assert abs(cos1.value(0.0) - 1.0) < 1e-12
        assert abs(cos1.value(0.5) + 1.0) < 1e-12
        assert abs(cos1.value(0.25)) < 1e-12
        sin1 = TrigPoly.sine(1)
        assert abs(sin1.value(0.25) - 1.0) < 1e-12
        assert TrigPoly.sine(0).value(0.3) == 0.0
        assert TrigPoly.constant(2.5).value(0.9) == 2.5

    def test_values_matches_value(self):
        rng = Random(401)
        poly = random_poly(rng)
        xs = np.array([rng.random() for _ in range(50)])
        vec = poly.values(xs)
        for x, v in zip(xs, vec):
            assert abs(poly.value(x) - v) < 1e-10

    def test_algebra(self):
        cos1, sin1 = TrigPoly.cosine(1), TrigPoly.sine(1)
        both = cos1 + sin1
        assert abs(both.value(0.1) - (cos1.value(0.1) + sin1.value(0.1))) < 1e-12
        scaled = cos1 * 3.0
        assert abs(scaled.value(0.2) - 3.0 * cos1.value(0.2)) < 1e-12
        assert abs((2.0 * sin1).value(0.2) - 2.0 * sin1.value(0.2)) < 1e-12
        # cos^2 = 1/2 + cos(2x)/2
        square = cos1 * cos1
        assert square.coeff(0) == 0.5
        assert square.coeff(2) == 0.25
        assert square.coeff(-2) == 0.25
        assert square.degree == 2

    def test_degree_and_sup_bound(self):
        poly = TrigPoly.cosine(3, 2.0) + TrigPoly.sine(1, 1.0)
        assert poly.degree == 3
        assert abs(poly.sup_bound - 3.0) < 1e-12
        assert TrigPoly.constant(-4.0).sup_bound == 4.0

    def test_zero_coefficients_dropped(self):
        poly = TrigPoly.cosine(1) + TrigPoly.cosine(1, -1.0)
        assert poly.coeffs == {}
        assert poly.degree == 0


class TestAnalyticOracles:
    def test_cosine_host_integral(self):
        sys = sqrt23_system()
        cos1 = TrigPoly.cosine(1)
        assert abs(fourier_host_integral(sys, cos1, cos1, cos1, cos1) - 0.125) < 1e-12

    def test_sine_host_integral(self):
        sys = sqrt23_system()
        sin1 = TrigPoly.sine(1)
        assert abs(fourier_host_integral(sys, sin1, sin1, sin1, sin1) - 0.125) < 1e-12

    def test_cosine_cubic_limit(self):
        sys = sqrt23_system()
        cos1 = TrigPoly.cosine(1)
        assert abs(fourier_cubic_limit(sys, cos1, cos1, cos1, 0) - 0.25) < 1e-12
        assert abs(fourier_cubic_limit(sys, cos1, cos1, cos1, F(1, 2)) + 0.25) < 1e-12

    def test_sine_cubic_limit_is_quarter_sine(self):
        sys = sqrt23_system()
        sin1 = TrigPoly.sine(1)
        for x in (0.0, 0.1, 0.3, 0.7):
            expected = math.sin(2 * math.pi * x) / 4
            assert abs(fourier_cubic_limit(sys, sin1, sin1, sin1, F(x).limit_denominator(10**6)) - expected) < 1e-9

    def test_oracles_require_generic_declaration(self):
        rational = TorusSystem(F(1, 3), F(1, 5))
        cos1 = TrigPoly.cosine(1)
        with pytest.raises(PreconditionError, match="generic rotation pair"):
            fourier_host_integral(rational, cos1, cos1, cos1, cos1)
        with pytest.raises(PreconditionError, match="generic rotation pair"):
            fourier_cubic_limit(rational, cos1, cos1, cos1, 0)


class TestTorusAverages:
    def test_fast_matches_naive_for_all_kinds(self):
        rng = Random(409)
        systems = [sqrt23_system(), TorusSystem(F(1, 3), F(2, 7))]
        for sys in systems:
            for kind, arity in TORUS_KINDS.items():
                obs = [random_poly(rng, max_freq=2) for _ in range(arity)]
                for N in (1, 2, 4, 5):
                    x = F(rng.randint(0, 9), 10)
                    fast = torus_average(sys, kind, obs, x, N)
                    slow = torus_average_naive(sys, kind, obs, x, N)
                    assert math.isclose(fast, slow, rel_tol=1e-9, abs_tol=1e-9)

    def test_block_size_never_changes_the_result(self):
        sys = sqrt23_system()
        rng = Random(419)
        obs3 = [random_poly(rng, max_freq=2) for _ in range(3)]
        one = [random_poly(rng, max_freq=3)]
        for kind, observables in (("cubic", obs3), ("windowed_sn", one), ("birkhoff_2d", one)):
            baseline = torus_average(sys, kind, observables, F(1, 7), 300, block_size=256)
            for block in (1, 7, 64, 1024):
                again = torus_average(sys, kind, observables, F(1, 7), 300, block_size=block)
                assert again == baseline  # bitwise, not just close

    def test_cubic_approaches_analytic_limit(self):
        sys = sqrt23_system()
        cos1 = TrigPoly.cosine(1)
        limit = fourier_cubic_limit(sys, cos1, cos1, cos1, 0)
        value = torus_average(sys, "cubic", [cos1, cos1, cos1], 0, 4096)
        assert abs(value - limit) < 2e-2

    def test_fourfold_approaches_host_integral(self):
        sys = sqrt23_system()
        sin1 = TrigPoly.sine(1)
        target = fourier_host_integral(sys, sin1, sin1, sin1, sin1)
        value = torus_average(sys, "fourfold", [sin1] * 4, F(1, 3), 2048)
        assert abs(value - target) < 2e-2

    def test_birkhoff_approaches_mean(self):
        sys = sqrt23_system()
        poly = TrigPoly.constant(0.75) + TrigPoly.cosine(2, 0.5)
        for kind in ("birkhoff_1d", "birkhoff_2d"):
            value = torus_average(sys, kind, [poly], F(2, 5), 1024)
            assert abs(value - 0.75) < 1e-2

    def test_rational_rotations_average_over_finite_orbit(self):
        # alpha = 1/4: the 1d averages hit the four quarter points exactly
        sys = TorusSystem(F(1, 4), F(1, 3))
        cos1 = TrigPoly.cosine(1)
        assert abs(torus_average(sys, "birkhoff_1d", [cos1], 0, 4)) < 1e-12
        assert abs(torus_average(sys, "birkhoff_1d", [cos1], 0, 8)) < 1e-12

    def test_argument_validation(self):
        sys = sqrt23_system()
        cos1 = TrigPoly.cosine(1)
        with pytest.raises(ValueError, match="unknown average kind"):
            torus_average(sys, "quintic", [cos1], 0, 4)
        with pytest.raises(DimensionError, match="needs 3 observables"):
            torus_average(sys, "cubic", [cos1], 0, 4)
        with pytest.raises(ValueError, match="window size must be positive"):
            torus_average(sys, "birkhoff_1d", [cos1], 0, 0)
        with pytest.raises(ValueError, match="block size must be positive"):
            torus_average(sys, "birkhoff_1d", [cos1], 0, 4, block_size=0)


class TestTorusReport:
    def test_generic_report_carries_analytic_reference(self):
        sys = sqrt23_system()
        cos1 = TrigPoly.cosine(1)
        report = torus_report(sys, "cubic", [cos1, cos1, cos1], 0, [16, 64, 256])
        assert [row.N for row in report.rows] == [16, 64, 256]
        assert all(abs(row.reference - 0.25) < 1e-12 for row in report.rows)
        assert all(row.abs_error == abs(row.value - row.reference) for row in report.rows)
        assert report.metadata["kind"] == "cubic"

    def test_non_generic_report_has_no_reference(self):
        sys = TorusSystem(F(1, 5), F(1, 7))
        cos1 = TrigPoly.cosine(1)
        report = torus_report(sys, "cubic", [cos1, cos1, cos1], 0, [4, 8])
        assert all(row.reference is None and row.abs_error is None for row in report.rows)

    def test_windowed_reference_is_absolute_host_integral(self):
        sys = sqrt23_system()
        sin2 = TrigPoly.sine(2)
        report = torus_report(sys, "windowed_sn", [sin2], F(1, 9), [32])
        assert abs(report.rows[0].reference - 0.125) < 1e-12

    def test_schedule_validation(self):
        sys = sqrt23_system()
        cos1 = TrigPoly.cosine(1)
        with pytest.raises(ValueError, match="positive window sizes"):
            torus_report(sys, "cubic", [cos1] * 3, 0, [])
        with pytest.raises(ValueError, match="strictly increasing"):
            torus_report(sys, "cubic", [cos1] * 3, 0, [8, 8])
