"""Democracy sums over cube families and estimates of h_r(N), h_l(N).

Families are sets of dyadic cubes; the Haar sum of a family uses the
mother wavelet of a single type (l = 1 by default) at every cube, each
normalized in L^{p(.)}. True democracy functions are a sup/inf over all
families of size N, which is out of reach; the estimator evaluates
structured near-extremal families plus seeded random ones, so

    h_r_est(N) <= h_r(N)    and    h_l_est(N) >= h_l(N).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dyadic_grid import CubeFamily, DyadicCube, GridFunction, blocks, grid_shape, light_shade, upsample
from .errors import CapacityError, FitError, InvalidParameterError, ResolutionError
from .exponent_field import ExponentField, harmonic_mean_exponents, level_sets
from .fitting import FitResult, loglog_fit
from .haar_system import HaarCoefficients, basis_norm, synthesize
from .variable_norm import char_norm, cube_char_norms, cube_norm, luxemburg_norm

STRATEGIES = ("disjoint-in-G", "gamma1", "gamma2", "nested-tower", "uniform-random", "stratified-random")
DEFAULT_EPSILONS = (0.25, 0.5)


def _as_family(family) -> CubeFamily:
    return family if isinstance(family, CubeFamily) else CubeFamily(family)


def democracy_norm(family, p: ExponentField, l: int = 1) -> float:
    """|| sum_{Q in family} psi^l_Q / ||psi^l_Q|| ||, synthesized and normed directly."""
    family = _as_family(family)
    if not family:
        return 0.0
    if family.max_scale >= p.depth:
        raise ResolutionError(f"no wavelet at scale {family.max_scale} for depth {p.depth}")
    basis_norm(family[0], l, p)  # validates the type
    c = HaarCoefficients.zeros(p.dimension, p.depth)
    for j, idx in _indices_by_scale(family).items():
        # ||psi^l_Q|| = |Q|^{-1/2} ||chi_Q||, applied to all cubes of one scale at once
        c.details[j][idx + (l - 1,)] = 2.0 ** (-p.dimension * j / 2) / cube_char_norms(p, j)[idx]
    return luxemburg_norm(synthesize(c), p)


def _indices_by_scale(family: CubeFamily) -> dict[int, tuple[np.ndarray, ...]]:
    by: dict[int, list] = {}
    for Q in family:
        by.setdefault(Q.scale, []).append(Q.index)
    return {j: tuple(np.array(ks).T) for j, ks in by.items()}


def _inverse_norm_sum(family: CubeFamily, p: ExponentField, power: float) -> np.ndarray:
    """sum_Q chi_Q / ||chi_Q||^power on the grid."""
    J = p.depth
    out = np.zeros(p.values.shape)
    if not family:
        return out
    if family.max_scale > J:
        raise ResolutionError(f"scale {family.max_scale} is finer than depth {J}")
    for j, idx in _indices_by_scale(family).items():
        coarse = np.zeros(grid_shape(p.dimension, j))
        coarse[idx] = cube_char_norms(p, j)[idx] ** -power
        out += upsample(coarse, J)
    return out


def square_sum_function(family, p: ExponentField) -> GridFunction:
    """S_Gamma = (sum_Q chi_Q / ||chi_Q||^2)^{1/2}."""
    return GridFunction(np.sqrt(_inverse_norm_sum(_as_family(family), p, 2.0)))


def square_sum_norm(family, p: ExponentField) -> float:
    return luxemburg_norm(square_sum_function(family, p), p)


def indicator_sum_norm(family, p: ExponentField) -> float:
    """|| sum_Q chi_Q / ||chi_Q|| ||; equals square_sum_norm on disjoint families."""
    return luxemburg_norm(_inverse_norm_sum(_as_family(family), p, 1.0), p)


def linearized_function(family, p: ExponentField) -> GridFunction:
    """sum over Gamma_min of chi_{light(Q)} / ||chi_Q||; one nonzero term per cell."""
    family = _as_family(family)
    dec = light_shade(family, p.depth)
    inv = np.array([1.0 / cube_norm(p, Q) for Q in family] + [0.0])
    return GridFunction(inv[dec.labels])  # label -1 picks the trailing 0


def linearized_norm(family, p: ExponentField) -> float:
    return luxemburg_norm(linearized_function(family, p), p)


def pointwise_ratio_range(family, p: ExponentField) -> tuple[float, float]:
    """min and max over cells of Omega of S_Gamma(x) * ||chi_{Q_x}||."""
    family = _as_family(family)
    S = square_sum_function(family, p).values
    lin = linearized_function(family, p).values
    inside = lin > 0
    r = S[inside] / lin[inside]
    return float(r.min()), float(r.max())


# --- extremal constructions -------------------------------------------------


def _first_cubes(qualifying: np.ndarray, j: int, N: int) -> CubeFamily:
    idx = np.argwhere(qualifying)[:N]  # argwhere walks C order, i.e. k lexicographic
    return CubeFamily(DyadicCube(j, tuple(int(t) for t in k)) for k in idx)


def _scan_scales(p: ExponentField, N: int, max_scale: int | None, qualify, what: str) -> CubeFamily:
    if N < 1:
        raise InvalidParameterError(f"N must be >= 1, got {N}")
    top = p.depth if max_scale is None else max_scale
    if not 0 <= top <= p.depth:
        raise InvalidParameterError(f"max_scale {top} outside [0, {p.depth}]")
    best = 0
    for j in range(top + 1):
        q = qualify(j)
        count = int(q.sum())
        if count >= N:
            return _first_cubes(q, j, N)
        best = max(best, count)
    raise CapacityError(f"{what}: only {best} qualifying disjoint cubes up to scale {top}, need {N}", best)


def construct_gamma1(p: ExponentField, epsilon: float, N: int, max_scale: int | None = None) -> CubeFamily:
    """N disjoint same-scale cubes with |G_eps cap Q| / |Q| >= 1/2.

    Uses the coarsest scale that offers N qualifying cubes, taking the first
    N in canonical order.
    """
    G = level_sets(p, epsilon).g_cells.astype(float)
    return _scan_scales(p, N, max_scale, lambda j: blocks(G, j).mean(axis=-1) >= 0.5, "gamma1")


def construct_gamma2(p: ExponentField, epsilon: float, N: int, max_scale: int | None = None) -> CubeFamily:
    """N disjoint same-scale cubes with |H_eps cap Q|/|Q| > 1 - 1/(2N) and p_Q > p_+ - eps."""
    if not 0 < epsilon < p.p_plus - 1:
        raise InvalidParameterError(f"epsilon must lie in (0, p_+ - 1) = (0, {p.p_plus - 1}), got {epsilon}")
    H = level_sets(p, epsilon).h_cells.astype(float)
    threshold = p.p_plus - epsilon

    def qualify(j):
        frac = blocks(H, j).mean(axis=-1)
        return (frac > 1 - 1 / (2 * N)) & (harmonic_mean_exponents(p, j) > threshold)

    return _scan_scales(p, N, max_scale, qualify, "gamma2")


@dataclass(frozen=True)
class BoundCheck:
    value: float
    bound: float
    ok: bool
    r_min: float | None = None


def gamma1_lower_check(p: ExponentField, family, epsilon: float, rtol: float = 1e-9) -> BoundCheck:
    """|| sum chi_Q/||chi_Q|| || >= r_min N^{1/(p_- + eps)}, r_min = min_Q ||chi_{G cap Q}|| / ||chi_Q||."""
    family = _as_family(family)
    G = level_sets(p, epsilon).g_cells
    r_min = min(char_norm(p, G & Q.mask(p.depth)) / cube_norm(p, Q) for Q in family)
    value = indicator_sum_norm(family, p)
    bound = r_min * len(family) ** (1.0 / (p.p_minus + epsilon))
    return BoundCheck(value, bound, value >= bound * (1 - rtol), r_min)


def gamma2_constant(p: ExponentField, epsilon: float) -> float:
    """2^{p_+/p_- + 1/(p_+ - eps)}, i.e. (2 C0)^{1/(p_+ - eps)} with 2^{p_+} = C0^{p_-/(p_+ - eps)}."""
    return 2.0 ** (p.p_plus / p.p_minus + 1.0 / (p.p_plus - epsilon))


def gamma2_upper_check(p: ExponentField, family, epsilon: float, rtol: float = 1e-9) -> BoundCheck:
    family = _as_family(family)
    value = square_sum_norm(family, p)
    bound = gamma2_constant(p, epsilon) * len(family) ** (1.0 / (p.p_plus - epsilon))
    return BoundCheck(value, bound, value <= bound * (1 + rtol))


# --- family generators ------------------------------------------------------


def _descendants(anchor: DyadicCube, max_scale: int) -> list[DyadicCube]:
    out, level = [], [anchor]
    while level and level[0].scale <= max_scale:
        out.extend(sorted(level))
        level = [c for q in level for c in q.children()]
    return out


def _coarsest_inside(mask: np.ndarray, max_scale: int) -> DyadicCube | None:
    for j in range(max_scale + 1):
        full = blocks(mask.astype(float), j).min(axis=-1) == 1.0
        if full.any():
            return DyadicCube(j, tuple(int(t) for t in np.argwhere(full)[0]))
    return None


def uniform_random_family(p: ExponentField, N: int, rng: np.random.Generator) -> CubeFamily:
    """N distinct cubes drawn uniformly from all cubes with scale in [J//2, J-1]."""
    n, J = p.dimension, p.depth
    lo = min(J // 2, J - 1)
    sizes = [2 ** (n * j) for j in range(lo, J)]
    total = sum(sizes)
    if N > total:
        raise CapacityError(f"uniform-random: {total} cubes available, need {N}", total)
    picks = rng.choice(total, size=N, replace=False)
    offsets = np.cumsum([0] + sizes)
    cubes = []
    for t in picks:
        s = int(np.searchsorted(offsets, t, side="right")) - 1
        k = np.unravel_index(int(t - offsets[s]), grid_shape(n, lo + s))
        cubes.append(DyadicCube(lo + s, tuple(int(i) for i in k)))
    return CubeFamily(cubes)


def stratified_random_family(p: ExponentField, N: int, rng: np.random.Generator) -> CubeFamily:
    """N distinct same-scale cubes inside one random dyadic stratum.

    The stratum has scale >= 1 whenever capacity allows, so every family is
    localized in one part of the domain and sees a narrow range of p.
    """
    n, J = p.dimension, p.depth
    need = math.ceil(math.log2(N) / n) if N > 1 else 0
    if need > J - 1:
        raise CapacityError(f"stratified-random: at most {2 ** (n * (J - 1))} cubes, need {N}", 2 ** (n * (J - 1)))
    s_max = J - 1 - need
    s = int(rng.integers(1, s_max + 1)) if s_max >= 1 else 0
    stratum = DyadicCube(s, tuple(int(k) for k in rng.integers(0, 2**s, size=n)))
    t = int(rng.integers(s + need, J))
    side = 2 ** (t - s)
    picks = rng.choice(side**n, size=N, replace=False)
    base = [k * side for k in stratum.index]
    return CubeFamily(
        DyadicCube(t, tuple(b + int(o) for b, o in zip(base, np.unravel_index(int(q), (side,) * n))))
        for q in picks
    )


def _disjoint_in_g(p: ExponentField, epsilon: float, N: int) -> CubeFamily:
    j = p.depth - 1
    G = level_sets(p, epsilon).g_cells.astype(float)
    inside = blocks(G, j).min(axis=-1) == 1.0
    count = int(inside.sum())
    if count < N:
        raise CapacityError(f"disjoint-in-G: {count} cubes at scale {j} inside G_eps, need {N}", count)
    return _first_cubes(inside, j, N)


def _nested_tower(p: ExponentField, anchor: DyadicCube, N: int) -> CubeFamily:
    cubes = _descendants(anchor, p.depth - 1)
    if len(cubes) < N:
        raise CapacityError(f"nested-tower at {anchor}: {len(cubes)} cubes, need {N}", len(cubes))
    return CubeFamily(cubes[:N])


def generate_families(
    strategy: str,
    p: ExponentField,
    N: int,
    rng: np.random.Generator,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    random_families: int = 16,
) -> tuple[list[tuple[str, CubeFamily]], list[tuple[str, CapacityError]]]:
    """Candidate families for one strategy; capacity failures are returned, not raised."""
    made, failed = [], []

    def attempt(label, build):
        try:
            made.append((label, build()))
        except CapacityError as exc:
            failed.append((label, exc))

    J = p.depth
    if strategy == "disjoint-in-G":
        for eps in epsilons:
            attempt(f"eps={eps}", lambda: _disjoint_in_g(p, eps, N))
    elif strategy == "gamma1":
        for eps in epsilons:
            attempt(f"eps={eps}", lambda: construct_gamma1(p, eps, N, max_scale=J - 1))
    elif strategy == "gamma2":
        for eps in epsilons:
            if 0 < eps < p.p_plus - 1:
                attempt(f"eps={eps}", lambda: construct_gamma2(p, eps, N, max_scale=J - 1))
    elif strategy == "nested-tower":
        eps = epsilons[0]
        ls = level_sets(p, eps)
        anchors = {"root": DyadicCube(0, (0,) * p.dimension)}
        for name, mask in (("G", ls.g_cells), ("H", ls.h_cells)):
            a = _coarsest_inside(mask, J - 1)
            if a is not None:
                anchors[name] = a
        for name, a in anchors.items():
            attempt(f"anchor={name}:{a}", lambda: _nested_tower(p, a, N))
    elif strategy == "uniform-random":
        for i in range(random_families):
            attempt(f"#{i}", lambda: uniform_random_family(p, N, rng))
    elif strategy == "stratified-random":
        for i in range(random_families):
            attempt(f"#{i}", lambda: stratified_random_family(p, N, rng))
    else:
        raise InvalidParameterError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    return made, failed


# --- estimation -------------------------------------------------------------


def fit_exponent(pairs: Iterable[tuple[float, float]]) -> FitResult:
    """Least-squares slope of log(value) against log(N)."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise FitError(f"need at least 3 (N, value) pairs, got {len(pairs)}")
    Ns = [float(n) for n, _ in pairs]
    if len(set(Ns)) != len(Ns) or min(Ns) < 1:
        raise FitError("N values must be distinct and >= 1")
    return loglog_fit(Ns, [v for _, v in pairs])


@dataclass(frozen=True)
class DemocracyRow:
    N: int
    strategy: str
    family_id: str
    family: CubeFamily
    value: float
    gamma1_lower_ok: bool | None = None
    gamma2_upper_ok: bool | None = None


@dataclass
class DemocracyRecord:
    rows: list[DemocracyRow] = field(default_factory=list)
    h_l: dict[int, float] = field(default_factory=dict)
    h_r: dict[int, float] = field(default_factory=dict)
    argmin: dict[int, DemocracyRow] = field(default_factory=dict)
    argmax: dict[int, DemocracyRow] = field(default_factory=dict)
    fit_r: FitResult | None = None
    fit_l: FitResult | None = None
    failures: list[dict] = field(default_factory=list)

    @property
    def slope_r(self) -> float | None:
        return None if self.fit_r is None else self.fit_r.slope

    @property
    def slope_l(self) -> float | None:
        return None if self.fit_l is None else self.fit_l.slope

    def csv_rows(self) -> list[list]:
        def flag(x):
            return "" if x is None else str(x).lower()

        return [
            [r.N, r.strategy, f"{r.family_id}|{r.family}", r.value, flag(r.gamma1_lower_ok), flag(r.gamma2_upper_ok)]
            for r in self.rows
        ]

    def summary(self) -> dict:
        def fit(f):
            return None if f is None else {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared}

        return {
            "slope_r": self.slope_r,
            "slope_l": self.slope_l,
            "fit_r": fit(self.fit_r),
            "fit_l": fit(self.fit_l),
            "per_N": {
                str(N): {
                    "h_l_est": self.h_l[N],
                    "h_r_est": self.h_r[N],
                    "argmin": f"{self.argmin[N].strategy}/{self.argmin[N].family_id}",
                    "argmax": f"{self.argmax[N].strategy}/{self.argmax[N].family_id}",
                    "families": sum(1 for r in self.rows if r.N == N),
                }
                for N in sorted(self.h_l)
            },
            "families_evaluated": len(self.rows),
            "gamma1_violations": sum(1 for r in self.rows if r.gamma1_lower_ok is False),
            "gamma2_violations": sum(1 for r in self.rows if r.gamma2_upper_ok is False),
            "capacity_failures": self.failures,
        }


def _evaluate(task, p: ExponentField, l: int) -> DemocracyRow:
    N, strategy, label, family = task
    g1 = g2 = None
    if strategy in ("gamma1", "gamma2"):
        eps = float(label.split("=", 1)[1])
        if strategy == "gamma1":
            g1 = gamma1_lower_check(p, family, eps).ok
        else:
            g2 = gamma2_upper_check(p, family, eps).ok
    return DemocracyRow(N, strategy, label, family, democracy_norm(family, p, l), g1, g2)


def estimate_democracy(
    p: ExponentField,
    Ns: Sequence[int],
    strategies: Sequence[str] = STRATEGIES,
    seed: int = 0,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    random_families: int = 16,
    l: int = 1,
    threads: int = 1,
) -> DemocracyRecord:
    """Evaluate candidate families for every N and strategy; max/min give h_r_est/h_l_est.

    Each (strategy, N) pair draws from its own generator seeded by
    (seed, strategy index, N), and rows are assembled in task order, so the
    record does not depend on ``threads`` or on scheduling.
    """
    for s in strategies:
        if s not in STRATEGIES:
            raise InvalidParameterError(f"unknown strategy {s!r}")
    record = DemocracyRecord()
    tasks = []
    for N in Ns:
        for s in strategies:
            rng = np.random.default_rng([seed, STRATEGIES.index(s), N])
            made, failed = generate_families(s, p, N, rng, epsilons, random_families)
            tasks.extend((N, s, label, fam) for label, fam in made)
            record.failures.extend(
                {"N": N, "strategy": s, "family_id": label, "message": str(e), "max_feasible": e.max_feasible}
                for label, e in failed
            )
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            record.rows = list(pool.map(lambda t: _evaluate(t, p, l), tasks))
    else:
        record.rows = [_evaluate(t, p, l) for t in tasks]
    for N in Ns:
        rows = [r for r in record.rows if r.N == N]
        if not rows:
            continue
        lo = min(rows, key=lambda r: r.value)
        hi = max(rows, key=lambda r: r.value)
        record.h_l[N], record.h_r[N] = lo.value, hi.value
        record.argmin[N], record.argmax[N] = lo, hi
    pts = sorted(record.h_r)
    if len(pts) >= 3:
        record.fit_r = fit_exponent((N, record.h_r[N]) for N in pts)
        record.fit_l = fit_exponent((N, record.h_l[N]) for N in pts)
    return record


@dataclass
class SandwichResult:
    """Per-N extremes of ||S_Gamma|| / N^{1/p_+} (min) and ||S_Gamma|| / N^{1/p_-} (max)."""

    Ns: list[int]
    lower_constants: list[float]
    upper_constants: list[float]
    families_per_N: int
    fit_lower: FitResult
    fit_upper: FitResult


def random_family_battery(p: ExponentField, N: int, count: int, seed: int) -> list[CubeFamily]:
    """``count`` seeded random families of size N, alternating uniform and stratified draws."""
    rng = np.random.default_rng([seed, 1000, N])
    out = []
    for i in range(count):
        make = uniform_random_family if i % 2 == 0 else stratified_random_family
        out.append(make(p, N, rng))
    return out


def sandwich_battery(p: ExponentField, Ns: Sequence[int], families_per_N: int = 200, seed: int = 0) -> SandwichResult:
    lower, upper = [], []
    for N in Ns:
        vals = np.array([square_sum_norm(fam, p) for fam in random_family_battery(p, N, families_per_N, seed)])
        lower.append(float((vals / N ** (1 / p.p_plus)).min()))
        upper.append(float((vals / N ** (1 / p.p_minus)).max()))
    return SandwichResult(
        list(Ns),
        lower,
        upper,
        families_per_N,
        loglog_fit(Ns, lower),
        loglog_fit(Ns, upper),
    )
