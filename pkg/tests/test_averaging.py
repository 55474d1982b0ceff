"""Window averages, the window bound, decomposition, and the report driver."""

import math
from fractions import Fraction
from random import Random

import pytest

from ergocubes.averaging import (
    AVERAGE_KINDS,
    AverageSpec,
    birkhoff_average,
    check_bound_average,
    check_telescoping,
    cubic_average,
    decompose_and_converge,
    fourfold_average,
    fourfold_average_naive,
    run_average,
    window_counts,
    windowed_sn,
    windowed_sn_naive,
)
from ergocubes.core import DimensionError, Observable, PreconditionError, integrate
from ergocubes.finite import (
    S_GEN,
    T_GEN,
    product_grid,
    random_ergodic_system,
    random_system,
    translation_system,
    z4_diagonal,
)
from ergocubes.joinings import host_measure, host_seminorm
from ergocubes.verify import exhaustive_bound_sweep, find_bound_constant

F = Fraction


def z4_observable():
    return Observable((F(1), F(0), F(-1), F(0)))


def random_observable(rng, n, lo=-2, hi=2):
    return Observable(tuple(F(rng.randint(lo, hi)) for _ in range(n)))


class TestWindowCounts:
    def test_matches_literal_count(self):
        for N in range(1, 20):
            for period in range(1, 9):
                counts = window_counts(N, period)
                assert counts == [
                    sum(1 for i in range(N) if i % period == r) for r in range(period)
                ]
                assert sum(counts) == N


class TestCubicAverage:
    def test_z4_hand_values(self):
        sys = z4_diagonal()
        f = z4_observable()
        assert cubic_average(sys, f, f, f, 0, 1) == 1
        assert cubic_average(sys, f, f, f, 0, 2) == F(1, 4)
        assert cubic_average(sys, f, f, f, 0, 4) == F(1, 4)
        # the pointwise average genuinely depends on the start
        assert cubic_average(sys, f, f, f, 1, 4) == 0

    def test_matches_literal_double_loop(self):
        rng = Random(311)
        for _ in range(25):
            sys = random_system(rng)
            f1, f2, f3 = (random_observable(rng, sys.n) for _ in range(3))
            x = rng.randrange(sys.n)
            N = rng.randint(1, 7)
            total = F(0)
            si = x
            for _ in range(N):
                tj = x
                stij = si
                for _ in range(N):
                    total += f1.values[si] * f2.values[tj] * f3.values[stij]
                    tj = sys.T[tj]
                    stij = sys.T[stij]
                si = sys.S[si]
            assert cubic_average(sys, f1, f2, f3, x, N) == total / N**2

    def test_rejects_bad_arguments(self):
        sys = z4_diagonal()
        f = z4_observable()
        with pytest.raises(DimensionError, match="start point 7 outside"):
            cubic_average(sys, f, f, f, 7, 2)
        with pytest.raises(ValueError, match="window size must be positive"):
            cubic_average(sys, f, f, f, 0, 0)
        with pytest.raises(DimensionError, match="observable on 3 points vs system on 4"):
            cubic_average(sys, f, f, Observable((F(1), F(0), F(0))), 0, 2)


class TestFourfoldAverage:
    def test_z4_equals_seminorm_at_full_periods(self):
        sys = z4_diagonal()
        f = z4_observable()
        oracle = host_seminorm(host_measure(sys), f).fourth_power
        assert oracle == F(1, 8)
        for x in range(4):
            for N in (4, 8, 12):
                assert fourfold_average(sys, f, f, f, f, x, N) == oracle
        assert fourfold_average(sys, f, f, f, f, 0, 1) == 1

    def test_matches_naive(self):
        rng = Random(313)
        for _ in range(15):
            sys = random_system(rng, max_order=3)
            obs = [random_observable(rng, sys.n) for _ in range(4)]
            x = rng.randrange(sys.n)
            N = rng.randint(1, 4)
            assert fourfold_average(sys, *obs, x, N) == fourfold_average_naive(
                sys, *obs, x, N
            )

    def test_stabilizes_at_joining_integral_on_ergodic_systems(self):
        rng = Random(317)
        for _ in range(10):
            sys = random_ergodic_system(rng, max_order=3)
            obs = [random_observable(rng, sys.n, -1, 1) for _ in range(4)]
            oracle = integrate(host_measure(sys).mu_st, obs)
            x = rng.randrange(sys.n)
            a = sys.cycle_length(S_GEN, x)
            b = sys.cycle_length(T_GEN, x)
            period = math.lcm(a, b)
            assert fourfold_average(sys, *obs, x, period) == oracle
            assert fourfold_average(sys, *obs, x, 2 * period) == oracle


class TestWindowedSn:
    def test_z4_hand_values(self):
        sys = z4_diagonal()
        f = z4_observable()
        assert windowed_sn(sys, f, 0, 1) == 1
        assert windowed_sn(sys, f, 0, 2) == F(1, 8)
        assert windowed_sn(sys, f, 0, 4) == F(1, 8)

    def test_equals_seminorm_at_full_periods(self):
        rng = Random(331)
        for _ in range(12):
            sys = random_ergodic_system(rng, max_order=3)
            f = random_observable(rng, sys.n, -1, 1)
            oracle = host_seminorm(host_measure(sys), f).fourth_power
            x = rng.randrange(sys.n)
            a = sys.cycle_length(S_GEN, x)
            b = sys.cycle_length(T_GEN, x)
            period = math.lcm(a, b)
            assert windowed_sn(sys, f, x, period) == oracle

    def test_matches_naive(self):
        rng = Random(337)
        for _ in range(15):
            sys = random_system(rng, max_order=3)
            f = random_observable(rng, sys.n)
            x = rng.randrange(sys.n)
            N = rng.randint(1, 4)
            assert windowed_sn(sys, f, x, N) == windowed_sn_naive(sys, f, x, N)

    def test_nonnegative(self):
        rng = Random(347)
        for _ in range(30):
            sys = random_system(rng)
            f = random_observable(rng, sys.n)
            assert windowed_sn(sys, f, rng.randrange(sys.n), rng.randint(1, 6)) >= 0


class TestBirkhoffAverage:
    def test_one_dimensional_hand_values(self):
        sys = z4_diagonal()
        f = z4_observable()
        assert birkhoff_average(sys, f, 0, [S_GEN], 2) == F(1, 2)
        assert birkhoff_average(sys, f, 0, [S_GEN], 3) == 0
        assert birkhoff_average(sys, f, 0, [S_GEN], 4) == 0

    def test_two_dimensional_full_period_recovers_measure(self):
        sys = product_grid(2, 3)
        f = Observable.indicator(6, 0)
        assert birkhoff_average(sys, f, 0, [S_GEN, T_GEN], 6) == F(1, 6)

    def test_matches_literal_box(self):
        rng = Random(349)
        for _ in range(20):
            sys = random_system(rng)
            f = random_observable(rng, sys.n)
            x = rng.randrange(sys.n)
            N = rng.randint(1, 6)
            total = F(0)
            p = x
            for _ in range(N):
                q = p
                for _ in range(N):
                    total += f.values[q]
                    q = sys.T[q]
                p = sys.S[p]
            assert birkhoff_average(sys, f, x, [S_GEN, T_GEN], N) == total / N**2

    def test_requires_generators(self):
        with pytest.raises(ValueError, match="at least one generator"):
            birkhoff_average(z4_diagonal(), z4_observable(), 0, [], 2)


class TestWindowBound:
    def test_holds_across_seeded_sup_norm_one_triples(self):
        rng = Random(353)
        for _ in range(60):
            sys = random_system(rng)
            obs = [random_observable(rng, sys.n, -1, 1) for _ in range(3)]
            x = rng.randrange(sys.n)
            N = rng.randint(1, 8)
            check = check_bound_average(sys, *obs, x, N)
            assert check.holds
            assert check.lhs <= check.rhs

    def test_tight_at_constants(self):
        sys = product_grid(2, 3)
        one = Observable.constant(6, 1)
        check = check_bound_average(sys, one, one, one, 0, 5)
        assert check.lhs == check.rhs == 1

    def test_rejects_large_observables(self):
        sys = z4_diagonal()
        big = Observable((F(2), F(0), F(0), F(0)))
        ok = z4_observable()
        with pytest.raises(PreconditionError, match="f1 has sup norm 2 > 1"):
            check_bound_average(sys, big, ok, ok, 0, 2)
        with pytest.raises(PreconditionError, match="f3 has sup norm 2 > 1"):
            check_bound_average(sys, ok, ok, big, 0, 2)


class TestTelescoping:
    def test_identity_on_seeded_sequences(self):
        rng = Random(359)
        for _ in range(40):
            k = rng.randint(1, 6)
            a = [F(rng.randint(-8, 8), rng.randint(1, 5)) for _ in range(k)]
            b = [F(rng.randint(-8, 8), rng.randint(1, 5)) for _ in range(k)]
            check = check_telescoping(a, b)
            assert check.identity

    def test_bound_flag_only_for_contractions(self):
        inside = check_telescoping([F(1, 2), F(-1, 3)], [F(1), F(0)])
        assert inside.identity and inside.bound
        outside = check_telescoping([F(2)], [F(1)])
        assert outside.identity and outside.bound is None

    def test_rejects_length_mismatch(self):
        with pytest.raises(DimensionError, match="lengths differ"):
            check_telescoping([F(1)], [F(1), F(0)])


class TestDecomposition:
    def test_product_grid_limit_formula(self):
        sys = product_grid(2, 3)
        f1 = Observable((F(1), F(0), F(-1), F(1), F(2), F(0)))
        f2 = Observable((F(0), F(1), F(1), F(-1), F(0), F(2)))
        f3 = Observable((F(1), F(-1), F(0), F(2), F(1), F(-2)))
        result = decompose_and_converge(sys, f1, f2, f3, 0, [1, 2, 3, 6, 12])
        # on this product the joint invariant partition is discrete, so the
        # limit is the factored full-window average, computable directly
        expected = (
            sum(
                (
                    f1.values[3 * u] * f2.values[v] * f3.values[3 * u + v]
                    for u in range(2)
                    for v in range(3)
                ),
                F(0),
            )
            / 6
        )
        assert result.limit == expected
        assert result.exact_sum
        for row in result.rows:
            # mean-zero part vanishes when the invariant partition is discrete
            assert row.track_b == 0
            assert row.sn_bound == 0
            assert row.track_a == row.direct
            assert row.track_b**4 <= row.sn_bound
        by_n = {row.N: row for row in result.rows}
        assert by_n[6].direct == result.limit
        assert by_n[12].direct == result.limit

    def test_minus_one_sixth_case(self):
        sys = product_grid(2, 3)
        f1 = Observable((F(1), F(0), F(0), F(-1), F(0), F(0)))
        f2 = Observable((F(1), F(1), F(1), F(0), F(0), F(0)))
        f3 = Observable((F(0), F(1), F(0), F(0), F(1), F(0)))
        result = decompose_and_converge(sys, f1, f2, f3, 3, [6])
        # start 3 = (1, 0): the S-window sees f1(3) = -1 paired with the
        # T-window mass of f2 f3 along the matching rows
        assert result.rows[0].direct == result.limit

    def test_exact_sum_and_squeeze_seeded(self):
        rng = Random(367)
        count = 0
        while count < 10:
            a, b = rng.randint(2, 4), rng.randint(2, 4)
            sys = product_grid(a, b)
            f1, f2, f3 = (random_observable(rng, sys.n, -1, 1) for _ in range(3))
            x = rng.randrange(sys.n)
            lcm = math.lcm(a, b)
            result = decompose_and_converge(sys, f1, f2, f3, x, [1, 2, lcm, 2 * lcm])
            assert result.exact_sum
            for row in result.rows:
                assert row.track_a + row.track_b == row.direct
                assert row.track_b**4 <= row.sn_bound
            assert result.rows[-1].direct == result.limit
            assert result.rows[-2].direct == result.limit
            count += 1

    def test_rejects_non_magic_system(self):
        f = z4_observable()
        with pytest.raises(PreconditionError, match="not magic"):
            decompose_and_converge(z4_diagonal(), f, f, f, 0, [4])

    def test_rejects_bad_schedule(self):
        sys = product_grid(2, 3)
        one = Observable.constant(6, 1)
        with pytest.raises(ValueError, match="positive window sizes"):
            decompose_and_converge(sys, one, one, one, 0, [])


class TestExhaustiveSweep:
    def test_product_grid_sweep_is_tight_and_clean(self):
        sys = product_grid(2, 3)
        ns = [1, 2, 3, 4]
        sweep = exhaustive_bound_sweep(sys, ns, F(1), 0)
        assert sweep.violations == ()
        assert sweep.max_ratio == 1
        # every one of the 2^(3n) observable triples is logically covered per N
        assert sweep.checks == 2 ** (3 * sys.n) * len(ns)
        # the evaluated classes are the sign patterns visible to the averages:
        # S-cycle (2) + T-cycle (3) + orbit grid (6) coordinates
        assert sweep.evaluations == 2 ** (2 + 3 + 6) * len(ns)

    def test_small_constant_is_refuted(self):
        sweep = exhaustive_bound_sweep(product_grid(2, 3), [2], F(1, 4), 0)
        assert len(sweep.violations) > 0
        assert sweep.max_ratio > F(1, 4)

    def test_find_bound_constant_returns_one(self):
        c, sweep = find_bound_constant(product_grid(2, 2), [1, 2, 3])
        assert c == 1
        assert sweep.max_ratio == 1
        assert sweep.violations == ()

    def test_agrees_with_direct_checks_on_decoded_patterns(self):
        # cross-validate the integer fast path against the Fraction-based
        # check on a sample of full +-1 observables
        sys = product_grid(2, 2)
        rng = Random(373)
        worst = F(0)
        for _ in range(200):
            obs = [
                Observable(tuple(F(rng.choice((-1, 1))) for _ in range(sys.n)))
                for _ in range(3)
            ]
            N = rng.randint(1, 4)
            check = check_bound_average(sys, *obs, 0, N)
            assert check.holds
            if check.rhs:
                worst = max(worst, check.lhs / check.rhs)
        sweep = exhaustive_bound_sweep(sys, [1, 2, 3, 4], F(1), 0)
        assert worst <= sweep.max_ratio == 1

    def test_rejects_bad_windows(self):
        with pytest.raises(ValueError, match="window sizes must be positive"):
            exhaustive_bound_sweep(product_grid(2, 2), [], F(1), 0)


class TestAverageSpecAndDriver:
    def test_spec_validation(self):
        one = Observable.constant(4, 1)
        with pytest.raises(ValueError, match="unknown average kind"):
            AverageSpec("quintic", (one,), 0, (1, 2))
        with pytest.raises(DimensionError, match="needs 3 observables, got 1"):
            AverageSpec("cubic", (one,), 0, (1, 2))
        with pytest.raises(ValueError, match="strictly increasing"):
            AverageSpec("windowed_sn", (one,), 0, (4, 4))
        assert set(AVERAGE_KINDS) == {
            "cubic",
            "fourfold",
            "windowed_sn",
            "birkhoff_1d",
            "birkhoff_2d",
        }

    def test_fourfold_driver_reference_and_errors(self):
        sys = z4_diagonal()
        f = z4_observable()
        spec = AverageSpec("fourfold", (f, f, f, f), 0, (1, 2, 4, 8))
        report = run_average(sys, spec)
        assert [row.N for row in report.rows] == [1, 2, 4, 8]
        assert all(row.reference == F(1, 8) for row in report.rows)
        by_n = {row.N: row for row in report.rows}
        assert by_n[4].abs_error == 0
        assert by_n[8].abs_error == 0
        assert by_n[1].abs_error == abs(by_n[1].value - F(1, 8))
        assert report.metadata["kind"] == "fourfold"

    def test_windowed_driver_reference(self):
        sys = z4_diagonal()
        f = z4_observable()
        report = run_average(sys, AverageSpec("windowed_sn", (f,), 0, (4,)))
        assert report.rows[0].value == F(1, 8)
        assert report.rows[0].reference == F(1, 8)
        assert report.rows[0].abs_error == 0

    def test_birkhoff_driver_reference_is_full_period_value(self):
        sys = product_grid(2, 3)
        f = Observable.indicator(6, 0)
        report = run_average(sys, AverageSpec("birkhoff_2d", (f,), 0, (6, 12)))
        assert all(row.reference == F(1, 6) for row in report.rows)
        assert all(row.abs_error == 0 for row in report.rows)

    def test_cubic_driver_has_no_reference(self):
        sys = z4_diagonal()
        f = z4_observable()
        report = run_average(sys, AverageSpec("cubic", (f, f, f), 0, (1, 2)))
        assert all(row.reference is None for row in report.rows)
        assert all(row.abs_error is None for row in report.rows)

    def test_report_serialization_golden(self):
        sys = z4_diagonal()
        f = z4_observable()
        report = run_average(sys, AverageSpec("windowed_sn", (f,), 0, (4,)))
        assert report.to_csv().splitlines() == [
            "N,value,reference,abs_error",
            "4,1/8,1/8,0/1",
        ]
        text = report.to_text()
        assert "# kind: windowed_sn" in text
        assert "4  1/8  1/8  0/1" in text
