"""Greedy N-term approximation in the Haar system and a best-subset oracle.

The oracle restricts the best N-term error to subsets of the expansion
with the expansion's own coefficients,

    sigma~_N(f) = min_{|S| = N} || f - sum_{i in S} lambda_i b_i ||,

which upper-bounds the true sigma_N and is itself bounded by the greedy
error because the greedy subset is a candidate.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .dyadic_grid import GridFunction, _values, grid_shape
from .exponent_field import ExponentField
from .fitting import FitResult, loglog_fit
from .haar_system import BasisLabel, HaarCoefficients, analyze, basis_labels, basis_norms, synthesize
from .variable_norm import luxemburg_norm, unit_modular_roots

EXHAUSTIVE_LIMIT = 10**6
SWAPS_PER_TERM = 200
# coefficients below this fraction of the largest are transform roundoff
ZERO_TOL = 1e-12
REFINE_SWEEPS = 50


class MonotonicityWarning(UserWarning):
    """The greedy error increased with N by more than the tolerance."""


@dataclass(frozen=True)
class GreedyOrdering:
    """Nonzero coefficients (above roundoff) ranked by |lambda_i| * ||b_i||, ties in canonical order."""

    dimension: int
    depth: int
    positions: np.ndarray  # canonical flat positions, ranked
    weights: np.ndarray  # weights of the ranked positions
    coefficients: np.ndarray  # coefficients of the ranked positions

    @property
    def labels(self) -> list[BasisLabel]:
        all_labels = basis_labels(self.dimension, self.depth)
        return [all_labels[i] for i in self.positions]

    def __len__(self) -> int:
        return len(self.positions)


def greedy_order(c: HaarCoefficients, p: ExponentField) -> GreedyOrdering:
    flat = c.to_flat()
    weights = np.abs(flat) * basis_norms(p)
    scale = np.abs(flat).max(initial=0.0)
    nz = np.flatnonzero(np.abs(flat) > ZERO_TOL * scale)
    ranked = nz[np.argsort(-weights[nz], kind="stable")]
    return GreedyOrdering(c.dimension, c.depth, ranked, weights[ranked], flat[ranked])


def greedy_approximant(c: HaarCoefficients, p: ExponentField, N: int) -> HaarCoefficients:
    """G_N: keep the N largest weighted terms."""
    if N < 0:
        raise ValueError(f"N must be non-negative, got {N}")
    order = greedy_order(c, p)
    keep = np.zeros(2 ** (c.dimension * c.depth))
    top = order.positions[:N]
    keep[top] = c.to_flat()[top]
    return HaarCoefficients.from_flat(keep, c.dimension, c.depth)


def greedy_residual(f, p: ExponentField, N: int) -> float:
    """||f - G_N f||_{p(.)}."""
    v = _values(f)
    approx = synthesize(greedy_approximant(analyze(v), p, N))
    return luxemburg_norm(v - approx.values, p)


class _AtomEvaluator:
    """Batched norms of f - sum_{i in S} T_i on the coarsest common partition.

    Cells that agree on f, on p and on every term T_i behave identically in
    every modular, so they are merged into weighted atoms once up front.
    """

    def __init__(self, f: np.ndarray, p: np.ndarray, terms: np.ndarray):
        m = terms.shape[0]
        cols = np.column_stack([terms.T, f.ravel(), p.ravel()])
        uniq, counts = np.unique(cols, axis=0, return_counts=True)
        self.terms = np.ascontiguousarray(uniq[:, :m].T)
        self.f = uniq[:, m]
        self.p = uniq[:, m + 1]
        self.w = counts / f.size

    def norms(self, residuals: np.ndarray) -> np.ndarray:
        return unit_modular_roots(np.abs(residuals), self.p, self.w)

    def residual(self, subset) -> np.ndarray:
        return self.f - self.terms[list(subset)].sum(axis=0)

    def norm(self, subset) -> float:
        return float(self.norms(self.residual(subset)[None, :])[0])


@dataclass(frozen=True)
class SubsetResult:
    value: float
    subset: tuple[int, ...]  # canonical flat positions
    method: str  # "exhaustive", "local-search" or "trivial"
    evaluations: int
    refined: bool = False


class SubsetOracle:
    """Greedy and best-subset residuals for one function, sharing all set-up."""

    def __init__(self, f, p: ExponentField):
        self.f = np.array(_values(f), dtype=float)
        self.p = p
        self.coefficients = analyze(self.f)
        self.order = greedy_order(self.coefficients, p)
        self.support = self.order.positions  # ranked: greedy subset of size N is the first N
        n, J = p.dimension, p.depth
        terms = np.empty((len(self.support), self.f.size))
        flat = self.coefficients.to_flat()
        for row, pos in enumerate(self.support):
            unit = np.zeros(flat.size)
            unit[pos] = flat[pos]
            terms[row] = synthesize(HaarCoefficients.from_flat(unit, n, J)).values.ravel()
        self.m = len(self.support)
        self._eval = _AtomEvaluator(self.f, p.values, terms)

    def greedy(self, N: int) -> float:
        return greedy_residual(self.f, self.p, N)

    def best(
        self,
        N: int,
        exhaustive_limit: int = EXHAUSTIVE_LIMIT,
        swap_budget: int | None = None,
        refine: bool = False,
    ) -> SubsetResult:
        m = self.m
        if N < 0:
            raise ValueError(f"N must be non-negative, got {N}")
        if N >= m:
            return SubsetResult(0.0, tuple(int(i) for i in self.support), "trivial", 0)
        greedy_value = self.greedy(N)
        if math.comb(m, N) <= exhaustive_limit:
            local, evals, method = self._exhaustive(N), math.comb(m, N), "exhaustive"
            value, subset = local
        else:
            budget = SWAPS_PER_TERM * m if swap_budget is None else swap_budget
            (value, subset), evals = self._local_search(N, budget)
            method = "local-search"
        refined = False
        if refine and N > 0:
            r_value = self._refine(subset)
            if r_value < value:
                value, refined = r_value, True
        value = min(value, greedy_value)
        positions = tuple(sorted(int(self.support[i]) for i in subset))
        return SubsetResult(value, positions, method, evals, refined)

    def _exhaustive(self, N: int):
        ev = self._eval
        best_val, best_set = math.inf, ()
        combos = itertools.combinations(range(self.m), N)
        chunk = max(1, 2_000_000 // max(1, (N + 1) * len(ev.f)))
        while True:
            block = list(itertools.islice(combos, chunk))
            if not block:
                break
            idx = np.array(block, dtype=np.int64).reshape(len(block), N)
            residuals = ev.f[None, :] - ev.terms[idx].sum(axis=1)
            vals = ev.norms(residuals)
            k = int(np.argmin(vals))
            if vals[k] < best_val:
                best_val, best_set = float(vals[k]), tuple(int(i) for i in idx[k])
        return best_val, best_set

    def _local_search(self, N: int, budget: int):
        """Single-swap descent from the greedy subset, scanning slots and candidates in order."""
        ev = self._eval
        subset = list(range(N))
        inside = np.zeros(self.m, dtype=bool)
        inside[subset] = True
        res = ev.residual(subset)
        cur = float(ev.norms(res[None, :])[0])
        evals, improved = 0, True
        while improved and evals < budget:
            improved = False
            for slot in range(N):
                cand = np.flatnonzero(~inside)[: budget - evals]
                if cand.size == 0:
                    break
                i = subset[slot]
                trial = res[None, :] + ev.terms[i][None, :] - ev.terms[cand]
                vals = ev.norms(trial)
                evals += cand.size
                k = int(np.argmin(vals))
                # margin keeps bisection noise from cycling swaps
                if vals[k] < cur * (1 - 1e-10):
                    j = int(cand[k])
                    inside[i], inside[j] = False, True
                    subset[slot] = j
                    res, cur = trial[k], float(vals[k])
                    improved = True
        return (cur, tuple(sorted(subset))), evals

    def _refine(self, subset) -> float:
        """Coordinate descent on the retained coefficients, golden-section per coordinate."""
        ev = self._eval
        scales = np.ones(len(subset))
        terms = ev.terms[list(subset)]
        term_norms = ev.norms(terms)

        def norm_at(r):
            return float(ev.norms(r[None, :])[0])

        res = ev.f - terms.sum(axis=0)
        cur = norm_at(res)
        for _ in range(REFINE_SWEEPS):
            before = cur
            for i in range(len(subset)):
                if cur == 0 or term_norms[i] == 0:
                    continue
                t0, T = scales[i], terms[i]
                R = 3.0 * cur / term_norms[i]
                opt = minimize_scalar(
                    lambda t: norm_at(res + (t0 - t) * T),
                    bracket=(t0 - R, t0, t0 + R),
                    method="golden",
                    options={"xtol": 1e-10},
                )
                if opt.fun < cur:
                    res = res + (t0 - opt.x) * T
                    scales[i], cur = opt.x, float(opt.fun)
            if before - cur <= 1e-12 * before:
                break
        return cur


def best_subset_residual(
    f,
    p: ExponentField,
    N: int,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
    swap_budget: int | None = None,
    refine: bool = False,
) -> float:
    """sigma~_N: exhaustive when C(m, N) <= ``exhaustive_limit``, else greedy-start swap search."""
    return SubsetOracle(f, p).best(N, exhaustive_limit, swap_budget, refine).value


@dataclass(frozen=True)
class ProfileRow:
    N: int
    greedy_error: float
    oracle_error: float
    ratio: float


@dataclass
class ApproximationProfile:
    rows: list[ProfileRow] = field(default_factory=list)
    methods: dict[int, str] = field(default_factory=dict)

    def slope(self) -> FitResult:
        """Power-law fit of the Lebesgue ratio against N over rows with finite ratio."""
        pts = [(r.N, r.ratio) for r in self.rows if r.N >= 1 and np.isfinite(r.ratio) and r.ratio > 0]
        return loglog_fit([n for n, _ in pts], [v for _, v in pts])

    def csv_rows(self) -> list[list]:
        return [[r.N, r.greedy_error, r.oracle_error, r.ratio] for r in self.rows]


def lebesgue_profile(
    f,
    p: ExponentField,
    Ns,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
    swap_budget: int | None = None,
    refine: bool = False,
) -> ApproximationProfile:
    Ns = list(Ns)
    if not Ns or Ns != sorted(Ns):
        raise ValueError("Ns must be a non-empty ascending list")
    oracle = SubsetOracle(f, p)
    profile = ApproximationProfile()
    previous = math.inf
    for N in Ns:
        g = oracle.greedy(N)
        best = oracle.best(N, exhaustive_limit, swap_budget, refine)
        ratio = g / best.value if best.value > 0 else math.nan
        profile.rows.append(ProfileRow(N, g, best.value, ratio))
        profile.methods[N] = best.method
        if g > previous + 1e-9:
            warnings.warn(f"greedy error rose from {previous:.6g} to {g:.6g} at N={N}", MonotonicityWarning)
        previous = g
    return profile


def random_expansion(
    n: int,
    J: int,
    rng: np.random.Generator,
    density: float = 1.0,
    decay: float = 0.5,
) -> GridFunction:
    """Seeded "mixed-mass" test function built from random Haar coefficients.

    Every cube in both halves of the domain draws a Gaussian coefficient with
    probability ``density``, damped by 2^{-decay * n * j} at scale j, so the
    mass is spread over all scales and over every region of the exponent.
    """
    c = HaarCoefficients.zeros(n, J)
    c.scaling = float(rng.standard_normal())
    for j in range(J):
        shape = c.details[j].shape
        keep = rng.random(shape) < density
        c.details[j] = rng.standard_normal(shape) * keep * 2.0 ** (-decay * n * j)
    return synthesize(c)


def sparse_expansion(n: int, J: int, rng: np.random.Generator, terms: int) -> GridFunction:
    """Function with exactly ``terms`` nonzero Haar coefficients at random positions."""
    size = 2 ** (n * J)
    flat = np.zeros(size)
    pos = rng.choice(size, size=min(terms, size), replace=False)
    flat[pos] = rng.standard_normal(pos.size) + np.sign(rng.standard_normal(pos.size)) * 0.1
    return synthesize(HaarCoefficients.from_flat(flat, n, J))
