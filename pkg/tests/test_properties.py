"""Invariants checked over generated inputs."""

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vlgreedy import (
    CubeFamily,
    DyadicCube,
    ExponentField,
    HaarCoefficients,
    analyze,
    best_subset_residual,
    char_norm,
    democracy_norm,
    greedy_residual,
    light_shade,
    linearized_norm,
    luxemburg_norm,
    modular,
    square_function,
    square_sum_norm,
    synthesize,
)
from vlgreedy.democracy_lab import pointwise_ratio_range

J = 4
SIZE = 2**J

exponents = arrays(np.float64, SIZE, elements=st.floats(1.05, 8.0)).map(ExponentField)
functions = arrays(np.float64, SIZE, elements=st.floats(-1e3, 1e3, allow_subnormal=False))
nonzero = functions.filter(lambda v: np.abs(v).max() > 1e-6)


@st.composite
def cubes(draw, max_scale=J - 1):
    j = draw(st.integers(0, max_scale))
    return DyadicCube(j, (draw(st.integers(0, 2**j - 1)),))


families = st.lists(cubes(), min_size=1, max_size=10, unique=True).map(CubeFamily)

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@SETTINGS
@given(f=nonzero, p=exponents)
def test_norm_solves_modular(f, p):
    lam = luxemburg_norm(f, p)
    assert abs(modular(f, p, lam) - 1) <= 1e-9


@SETTINGS
@given(f=functions, p=exponents, c=st.floats(1e-3, 1e3))
def test_norm_homogeneous(f, p, c):
    assert np.isclose(luxemburg_norm(c * f, p), c * luxemburg_norm(f, p), rtol=1e-10, atol=1e-300)


@SETTINGS
@given(f=functions, g=functions, p=exponents)
def test_norm_triangle(f, g, p):
    assert luxemburg_norm(f + g, p) <= (luxemburg_norm(f, p) + luxemburg_norm(g, p)) * (1 + 1e-10) + 1e-300


@SETTINGS
@given(f=functions, t=arrays(np.float64, SIZE, elements=st.floats(0, 1)), p=exponents)
def test_norm_lattice_monotone(f, t, p):
    assert luxemburg_norm(t * f, p) <= luxemburg_norm(f, p) * (1 + 1e-10)


@SETTINGS
@given(a=st.lists(st.booleans(), min_size=SIZE, max_size=SIZE), b=st.lists(st.booleans(), min_size=SIZE, max_size=SIZE), p=exponents)
def test_char_norm_monotone_in_set(a, b, p):
    small = np.array(a) & np.array(b)
    big = np.array(a)
    assume(small.any())
    assert char_norm(p, small) <= char_norm(p, big) * (1 + 1e-10)


@SETTINGS
@given(f=functions)
def test_haar_round_trip_and_parseval(f):
    c = analyze(f)
    scale = max(1.0, float(np.abs(f).max()))
    assert np.max(np.abs(synthesize(c).values - f)) <= 1e-12 * scale
    assert np.isclose(np.sum(c.to_flat() ** 2), np.mean(f**2), rtol=1e-10, atol=1e-12 * scale**2)


@SETTINGS
@given(f=functions, signs=arrays(np.float64, SIZE, elements=st.sampled_from([-1.0, 1.0])))
def test_square_function_ignores_signs(f, signs):
    c = analyze(f)
    flipped = HaarCoefficients.from_flat(c.to_flat() * signs, 1, J)
    assert np.array_equal(square_function(c).values, square_function(flipped).values)


@SETTINGS
@given(a=cubes(J), b=cubes(J))
def test_nested_or_disjoint(a, b):
    meet = (a.mask(J) & b.mask(J)).any()
    assert meet == (a.contains(b) or b.contains(a))


@SETTINGS
@given(fam=families)
def test_light_sets_partition_union(fam):
    dec = light_shade(fam, J)
    union = np.zeros(SIZE, dtype=bool)
    for q in fam:
        union |= q.mask(J)
    lights = [dec.light(q) for q in dec.gamma_min]
    assert np.array_equal(np.logical_or.reduce(lights), union)
    assert np.sum(lights, axis=0).max() == 1
    lower, lit, minimal, total = dec.cardinality_chain()
    assert lower <= lit <= minimal <= total


@SETTINGS
@given(fam=families, p=exponents)
def test_pointwise_lower_bound(fam, p):
    lo, hi = pointwise_ratio_range(fam, p)
    assert lo >= 1 - 1e-9


@SETTINGS
@given(fam=families, p=exponents)
def test_linearized_below_square_sum(fam, p):
    assert linearized_norm(fam, p) <= square_sum_norm(fam, p) * (1 + 1e-10)


@SETTINGS
@given(fam=families)
def test_hilbert_democracy(fam):
    p = ExponentField(np.full(SIZE, 2.0))
    assert abs(democracy_norm(fam, p) - len(fam) ** 0.5) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(
    flat=arrays(np.float64, 8, elements=st.floats(-5, 5, allow_subnormal=False)),
    p=arrays(np.float64, 8, elements=st.floats(1.2, 5.0)).map(ExponentField),
    N=st.integers(0, 8),
)
def test_oracle_never_above_greedy(flat, p, N):
    f = synthesize(HaarCoefficients.from_flat(flat, 1, 3))
    g = greedy_residual(f, p, N)
    b = best_subset_residual(f, p, N)
    assert 0 <= b <= g * (1 + 1e-9) + 1e-12


@settings(max_examples=25, deadline=None)
@given(flat=arrays(np.float64, 8, elements=st.floats(-5, 5, allow_subnormal=False)))
def test_hilbert_greedy_error_non_increasing(flat):
    """Monotone in N only under orthogonality; see the pinned counterexample for p != 2."""
    p = ExponentField(np.full(8, 2.0))
    f = synthesize(HaarCoefficients.from_flat(flat, 1, 3))
    errs = [greedy_residual(f, p, N) for N in range(9)]
    scale = max(errs[0], 1e-300)
    assert all(b <= a + 1e-9 * scale for a, b in zip(errs, errs[1:]))
