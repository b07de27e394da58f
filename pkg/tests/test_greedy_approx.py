import itertools
import math

import numpy as np
import pytest
from conftest import reference_norm

from vlgreedy import (
    ExponentField,
    HaarCoefficients,
    MonotonicityWarning,
    SubsetOracle,
    basis_labels,
    best_subset_residual,
    constant_exponent,
    greedy_approximant,
    greedy_order,
    greedy_residual,
    lebesgue_profile,
    luxemburg_norm,
    step_exponent,
    synthesize,
    wavelet,
)
from vlgreedy.greedy_approx import random_expansion, sparse_expansion


def expansion(flat, n=1, J=2):
    return synthesize(HaarCoefficients.from_flat(np.asarray(flat, dtype=float), n, J))


def exhaustive_oracle(flat, p, N, n=1, J=2):
    """Smallest residual norm over every N-subset of the nonzero terms, built from scratch."""
    flat = np.asarray(flat, dtype=float)
    labels = basis_labels(n, J)
    terms = {i: flat[i] * wavelet(labels[i], n, J).values for i in np.flatnonzero(flat)}
    f = sum(terms.values())
    best = math.inf
    for subset in itertools.combinations(sorted(terms), N):
        r = f - sum((terms[i] for i in subset), np.zeros_like(f))
        best = min(best, reference_norm(r, p.values))
    return best


def independent_greedy(flat, p, N, n=1, J=2):
    """Rank by |coefficient| times the brentq norm of the wavelet, stable ties."""
    flat = np.asarray(flat, dtype=float)
    labels = basis_labels(n, J)
    weights = [abs(c) * reference_norm(wavelet(lab, n, J).values, p.values) for c, lab in zip(flat, labels)]
    order = sorted(np.flatnonzero(flat), key=lambda i: -weights[i])
    f = expansion(flat, n, J).values
    kept = sum((flat[i] * wavelet(labels[i], n, J).values for i in order[:N]), np.zeros_like(f))
    return reference_norm(f - kept, p.values)


class TestOrder:
    def test_hilbert_by_magnitude(self):
        c = HaarCoefficients.from_flat([1.0, 0.5, 0.25, 0.0], 1, 2)
        assert greedy_order(c, constant_exponent(2, 1, 2)).positions.tolist() == [0, 1, 2]

    def test_tie_goes_to_canonical_order(self):
        c = HaarCoefficients.from_flat([0, 0, 0.3, 0.3], 1, 2)
        assert greedy_order(c, constant_exponent(2, 1, 2)).positions.tolist() == [2, 3]

    def test_variable_exponent_breaks_tie(self):
        c = HaarCoefficients.from_flat([0, 0, 0.3, 0.3], 1, 2)
        order = greedy_order(c, step_exponent(2, 4, J=2))
        assert order.positions.tolist() == [3, 2]
        assert order.weights[0] / 0.3 == pytest.approx(2**0.25, rel=1e-12)
        assert order.weights[1] / 0.3 == pytest.approx(1.0, rel=1e-12)

    def test_roundoff_coefficients_dropped(self):
        c = HaarCoefficients.from_flat([1.0, 1e-15, 0.5, 0.0], 1, 2)
        assert len(greedy_order(c, constant_exponent(2, 1, 2))) == 2


class TestGreedyResidual:
    def test_zero_terms_is_norm(self, step24):
        f = random_expansion(1, 6, np.random.default_rng(0))
        assert greedy_residual(f, step24, 0) == pytest.approx(luxemburg_norm(f, step24), rel=1e-12)

    def test_all_terms_is_zero(self, step24):
        f = sparse_expansion(1, 6, np.random.default_rng(1), 5)
        assert greedy_residual(f, step24, 5) <= 1e-12

    def test_hilbert_tail(self):
        f = expansion([1.0, 0.5, 0.25, 0.0])
        assert greedy_residual(f, constant_exponent(2, 1, 2), 1) == pytest.approx(math.sqrt(0.25 + 0.0625), rel=1e-12)

    def test_negative_n(self, step24):
        with pytest.raises(ValueError):
            greedy_approximant(HaarCoefficients.zeros(1, 6), step24, -1)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_independent_greedy(self, seed):
        rng = np.random.default_rng(seed)
        flat = np.round(rng.standard_normal(8), 2)
        p = step_exponent(2, 4, J=3)
        for N in range(5):
            assert greedy_residual(expansion(flat, J=3), p, N) == pytest.approx(
                independent_greedy(flat, p, N, J=3), rel=1e-10
            )


class TestBestSubset:
    @pytest.mark.parametrize("seed", range(5))
    def test_hilbert_greedy_is_optimal(self, seed):
        f = sparse_expansion(1, 5, np.random.default_rng(seed), 7)
        p = constant_exponent(2, 1, 5)
        for N in range(8):
            assert best_subset_residual(f, p, N) == pytest.approx(greedy_residual(f, p, N), abs=1e-10)

    def test_all_terms(self, step24):
        f = sparse_expansion(1, 6, np.random.default_rng(2), 4)
        assert best_subset_residual(f, step24, 4) == 0 and best_subset_residual(f, step24, 9) == 0

    def test_tie_instance_matches_enumeration(self):
        p = step_exponent(2, 4, J=2)
        flat = [0, 0, 0.3, 0.3]
        assert best_subset_residual(expansion(flat), p, 1) == pytest.approx(exhaustive_oracle(flat, p, 1), rel=1e-10)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_enumeration_variable_exponent(self, seed):
        rng = np.random.default_rng([seed, 1])
        flat = np.round(rng.standard_normal(8), 2)
        p = step_exponent(2, 4, J=3)
        f = expansion(flat, J=3)
        for N in range(1, 5):
            assert best_subset_residual(f, p, N) == pytest.approx(exhaustive_oracle(flat, p, N, J=3), rel=1e-10)

    def test_greedy_can_lose_at_constant_three(self):
        """Fixed-coefficient greedy is not optimal in L^3: a pinned four-term counterexample."""
        flat = [-0.7, 0.5, -1.0, 0.7]
        p = constant_exponent(3, 1, 2)
        f = expansion(flat)
        greedy, best = greedy_residual(f, p, 1), best_subset_residual(f, p, 1)
        assert greedy == pytest.approx(1.380687188379948, rel=1e-10)
        assert best == pytest.approx(1.3319624253518136, rel=1e-10)
        assert greedy == pytest.approx(independent_greedy(flat, p, 1), rel=1e-10)
        assert best == pytest.approx(exhaustive_oracle(flat, p, 1), rel=1e-10)

    def test_local_search_never_worse_than_greedy(self, step24):
        f = random_expansion(1, 6, np.random.default_rng(4))
        oracle = SubsetOracle(f, step24)
        for N in (4, 16, 30):
            res = oracle.best(N, exhaustive_limit=1, swap_budget=500)
            assert res.method == "local-search"
            assert res.value <= oracle.greedy(N) + 1e-12

    def test_refinement_only_improves(self, step24):
        f = sparse_expansion(1, 6, np.random.default_rng(6), 6)
        oracle = SubsetOracle(f, step24)
        for N in (1, 2, 3):
            plain, refined = oracle.best(N).value, oracle.best(N, refine=True).value
            assert refined <= plain + 1e-12


class TestProfile:
    def test_constant_exponent_ratio_one(self):
        p = constant_exponent(2, 1, 5)
        f = random_expansion(1, 5, np.random.default_rng(0))
        prof = lebesgue_profile(f, p, [1, 2, 4, 8])
        assert all(r.ratio == pytest.approx(1, abs=1e-9) for r in prof.rows)

    def test_ratio_at_least_one(self):
        p = step_exponent(2, 4, J=4)
        f = random_expansion(1, 4, np.random.default_rng(3))
        prof = lebesgue_profile(f, p, [1, 2, 3, 4, 6, 8])
        assert all(r.ratio >= 1 - 1e-9 for r in prof.rows)
        assert [r.N for r in prof.rows] == [1, 2, 3, 4, 6, 8]

    def test_csv_columns(self):
        p = step_exponent(2, 4, J=3)
        prof = lebesgue_profile(random_expansion(1, 3, np.random.default_rng(1)), p, [1, 2, 4])
        assert [len(r) for r in prof.csv_rows()] == [4, 4, 4]

    def test_unsorted_sizes_rejected(self, step24):
        with pytest.raises(ValueError):
            lebesgue_profile(np.ones(64), step24, [4, 2])

    def test_slope_within_penalty(self):
        p = step_exponent(2, 4, J=6)
        f = random_expansion(1, 6, np.random.default_rng([0, 3, 0]))
        prof = lebesgue_profile(f, p, [1, 2, 4, 8, 16, 32], exhaustive_limit=10**4, swap_budget=2000)
        assert prof.slope().slope <= 0.5 - 0.25 + 0.05


class TestMonotonicity:
    """Dropping a weighted-largest term can enlarge the residual in a non-Hilbert norm."""

    P = [1.5, 3, 3, 3, 3, 3, 3, 3]

    def test_error_rises_between_three_and_four_terms(self):
        p = ExponentField(np.array(self.P))
        flat = np.ones(8)
        f = expansion(flat, J=3)
        g3, g4 = greedy_residual(f, p, 3), greedy_residual(f, p, 4)
        assert g3 == pytest.approx(independent_greedy(flat, p, 3, J=3), rel=1e-10)
        assert g4 == pytest.approx(independent_greedy(flat, p, 4, J=3), rel=1e-10)
        assert g4 > g3 * 1.1

    def test_profile_warns(self):
        p = ExponentField(np.array(self.P))
        with pytest.warns(MonotonicityWarning):
            lebesgue_profile(expansion(np.ones(8), J=3), p, [3, 4])
