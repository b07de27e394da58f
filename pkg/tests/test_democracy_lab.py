import math

import numpy as np
import pytest
from conftest import reference_norm, reference_wavelets

from vlgreedy import (
    CapacityError,
    CubeFamily,
    DyadicCube,
    FitError,
    InvalidParameterError,
    ResolutionError,
    construct_gamma1,
    construct_gamma2,
    constant_exponent,
    democracy_norm,
    estimate_democracy,
    fit_exponent,
    gamma1_lower_check,
    gamma2_upper_check,
    indicator_sum_norm,
    linearized_norm,
    sandwich_battery,
    square_sum_norm,
    step_exponent,
)
from vlgreedy.democracy_lab import (
    STRATEGIES,
    generate_families,
    pointwise_ratio_range,
    random_family_battery,
    stratified_random_family,
    uniform_random_family,
)


def cubes(*texts):
    return CubeFamily(DyadicCube.parse(t) for t in texts)


def reference_democracy(family, p):
    """Sum of brentq-normalized explicit Haar profiles (n = 1, type 1)."""
    J = p.depth
    total = np.zeros(p.values.shape)
    for q in family:
        (psi,) = reference_wavelets(q.scale, q.index, J)
        total += psi / reference_norm(psi, p.values)
    return reference_norm(total, p.values)


TOWER = ("0:0", "1:0", "2:0")


class TestDemocracyNorm:
    def test_empty(self, step24):
        assert democracy_norm(CubeFamily([]), step24) == 0

    @pytest.mark.parametrize("N", [1, 3, 8, 20])
    def test_hilbert_any_family(self, N, const2):
        fam = uniform_random_family(const2, N, np.random.default_rng(N))
        assert democracy_norm(fam, const2) == pytest.approx(math.sqrt(N), abs=1e-9)

    def test_cube_exponent_disjoint(self, const3):
        fam = CubeFamily(DyadicCube(4, (k,)) for k in range(0, 16, 2))
        assert democracy_norm(fam, const3) == pytest.approx(2, abs=1e-9)

    def test_split_family_against_square_sum(self, step24):
        fam = CubeFamily([DyadicCube(4, (k,)) for k in range(4)] + [DyadicCube(4, (k,)) for k in range(8, 12)])
        a, b = democracy_norm(fam, step24), square_sum_norm(fam, step24)
        assert 1 / 4 <= a / b <= 4

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_explicit_synthesis(self, seed, step24):
        fam = uniform_random_family(step24, 6, np.random.default_rng(seed))
        assert democracy_norm(fam, step24) == pytest.approx(reference_democracy(fam, step24), rel=1e-10)

    def test_finest_scale_has_no_wavelet(self, step24):
        with pytest.raises(ResolutionError):
            democracy_norm(cubes("6:0"), step24)

    def test_two_dim_types(self):
        p = step_exponent(2, 4, J=3, n=2)
        fam = cubes("1:0,0", "2:3,3")
        values = {l: democracy_norm(fam, p, l) for l in (1, 2, 3)}
        assert all(v > 0 for v in values.values())
        with pytest.raises(InvalidParameterError):
            democracy_norm(fam, p, 4)


class TestSquareSum:
    def test_singleton(self, step24):
        assert square_sum_norm(cubes("3:5"), step24) == pytest.approx(1, abs=1e-9)

    def test_tower_hilbert(self):
        p = constant_exponent(2, 1, 4)
        assert square_sum_norm(cubes(*TOWER), p) == pytest.approx(math.sqrt(3), abs=1e-9)

    @pytest.mark.parametrize("q", [1.5, 3, 5])
    def test_disjoint_power_law(self, q):
        p = constant_exponent(q, 1, 6)
        fam = cubes("2:0", "3:2", "4:12", "5:30", "6:63")
        assert square_sum_norm(fam, p) == pytest.approx(5 ** (1 / q), abs=1e-9)

    def test_indicator_sum_equals_on_disjoint(self, step24):
        fam = cubes("2:0", "3:2", "2:3")
        assert indicator_sum_norm(fam, step24) == pytest.approx(square_sum_norm(fam, step24), rel=1e-12)


class TestLinearized:
    def test_disjoint_equals_square_sum(self, step24):
        fam = cubes("2:0", "3:2", "2:3")
        assert linearized_norm(fam, step24) == pytest.approx(square_sum_norm(fam, step24), rel=1e-12)

    def test_tower_hilbert(self):
        p = constant_exponent(2, 1, 4)
        assert linearized_norm(cubes(*TOWER), p) == pytest.approx(math.sqrt(2), abs=1e-9)

    def test_singleton(self, step24):
        assert linearized_norm(cubes("1:1"), step24) == pytest.approx(1, abs=1e-9)

    def test_pointwise_lower_bound(self, step24):
        rng = np.random.default_rng(2)
        for _ in range(30):
            fam = uniform_random_family(step24, 12, rng)
            lo, hi = pointwise_ratio_range(fam, step24)
            assert lo >= 1 - 1e-9 and hi >= lo


class TestGamma:
    def test_gamma1_step(self):
        p = step_exponent(2, 4, J=5)
        fam = construct_gamma1(p, 0.5, 4)
        assert fam.is_disjoint() and len(fam) == 4
        assert all(DyadicCube(1, (0,)).contains(q) for q in fam)

    def test_gamma1_constant_takes_cells(self):
        p = constant_exponent(3, 1, 4)
        assert len(construct_gamma1(p, 0.1, 16)) == 16

    def test_gamma1_pigeonhole(self):
        p = constant_exponent(3, 1, 4)
        with pytest.raises(CapacityError) as err:
            construct_gamma1(p, 0.1, 17)
        assert err.value.max_feasible == 16

    def test_gamma2_step(self):
        p = step_exponent(2, 4, J=5)
        fam = construct_gamma2(p, 0.5, 2)
        assert fam.is_disjoint() and len(fam) == 2
        assert all(DyadicCube(1, (1,)).contains(q) for q in fam)

    def test_gamma2_constant(self):
        p = constant_exponent(4, 1, 4)
        assert len(construct_gamma2(p, 1.0, 8)) == 8

    def test_gamma2_huge(self):
        with pytest.raises(CapacityError):
            construct_gamma2(step_exponent(2, 4, J=4), 0.5, 10**6)

    @pytest.mark.parametrize("eps", [0, 3, -1])
    def test_gamma2_epsilon_range(self, eps):
        with pytest.raises(InvalidParameterError):
            construct_gamma2(step_exponent(2, 4, J=4), eps, 2)

    @pytest.mark.parametrize("N", [2, 8, 32])
    def test_bounds_hold(self, N):
        p = step_exponent(2, 4, J=8)
        for eps in (0.25, 0.5):
            assert gamma1_lower_check(p, construct_gamma1(p, eps, N), eps).ok
            assert gamma2_upper_check(p, construct_gamma2(p, eps, N), eps).ok


class TestGenerators:
    def test_uniform_scales_and_size(self, step24):
        fam = uniform_random_family(step24, 10, np.random.default_rng(0))
        assert len(fam) == 10 and all(3 <= q.scale <= 5 for q in fam)

    def test_stratified_is_disjoint_same_scale(self, step24):
        rng = np.random.default_rng(1)
        for N in (1, 2, 5, 16):
            fam = stratified_random_family(step24, N, rng)
            assert len(fam) == N and fam.is_disjoint() and len({q.scale for q in fam}) == 1

    def test_unknown_strategy(self, step24):
        with pytest.raises(InvalidParameterError):
            generate_families("annealed", step24, 2, np.random.default_rng(0))

    def test_capacity_failures_are_collected(self):
        p = step_exponent(2, 4, J=3)
        made, failed = generate_families("disjoint-in-G", p, 64, np.random.default_rng(0))
        assert not made and len(failed) == 2

    def test_battery_is_seeded(self, step24):
        a = random_family_battery(step24, 4, 10, seed=3)
        b = random_family_battery(step24, 4, 10, seed=3)
        assert [str(f) for f in a] == [str(f) for f in b]


class TestEstimate:
    def test_hilbert_all_equal(self):
        p = constant_exponent(2, 1, 6)
        rec = estimate_democracy(p, [1, 2, 4, 8], seed=0, random_families=4)
        for N in (1, 2, 4, 8):
            assert rec.h_l[N] == pytest.approx(math.sqrt(N), abs=1e-9)
            assert rec.h_r[N] == pytest.approx(math.sqrt(N), abs=1e-9)

    def test_singletons_normalized(self, step24):
        rec = estimate_democracy(step24, [1], seed=0, random_families=4)
        assert rec.h_l[1] == pytest.approx(1, abs=1e-9) and rec.h_r[1] == pytest.approx(1, abs=1e-9)

    def test_thread_count_does_not_change_rows(self, step24):
        a = estimate_democracy(step24, [2, 4, 8], seed=5, random_families=3)
        b = estimate_democracy(step24, [2, 4, 8], seed=5, random_families=3, threads=4)
        assert a.csv_rows() == b.csv_rows()

    def test_summary_and_rows(self, step24):
        rec = estimate_democracy(step24, [2, 4, 8], STRATEGIES, seed=1, random_families=2)
        s = rec.summary()
        assert s["slope_r"] == rec.slope_r and set(s["per_N"]) == {"2", "4", "8"}
        assert all(len(r) == 6 for r in rec.csv_rows())
        assert all(rec.h_l[N] <= rec.h_r[N] for N in rec.h_r)

    def test_unknown_strategy(self, step24):
        with pytest.raises(InvalidParameterError):
            estimate_democracy(step24, [2], ["best"])


class TestFit:
    def test_square_root(self):
        fit = fit_exponent((N, N**0.5) for N in (1, 2, 4, 8, 16))
        assert fit.slope == pytest.approx(0.5, abs=1e-12) and fit.r_squared == pytest.approx(1)

    def test_intercept(self):
        fit = fit_exponent((N, 3 * N**0.25) for N in (2, 4, 8, 16))
        assert fit.slope == pytest.approx(0.25, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)

    def test_noisy(self):
        rng = np.random.default_rng(0)
        Ns = [2**k for k in range(1, 11)]
        fit = fit_exponent((N, N**0.4 * rng.uniform(0.95, 1.05)) for N in Ns)
        assert abs(fit.slope - 0.4) <= 0.02

    @pytest.mark.parametrize("pairs", [[(1, 1), (2, 2)], [(2, 1), (2, 2), (4, 3)], [(1, 1), (2, -1), (4, 2)]])
    def test_degenerate(self, pairs):
        with pytest.raises(FitError):
            fit_exponent(pairs)


class TestSandwich:
    def test_constants_bracket(self):
        p = step_exponent(2, 4, J=8)
        res = sandwich_battery(p, [2, 4, 8, 16], families_per_N=40, seed=0)
        assert len(res.lower_constants) == 4
        assert all(c > 0 for c in res.lower_constants + res.upper_constants)
