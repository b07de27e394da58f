"""Check batteries shared by ``vlgreedy verify`` and the acceptance tests.

Every battery appends :class:`Check` records to a :class:`CheckLog`. A check
compares one measured number against a bound with a tolerance; the relation
is ``<=`` (pass iff measured <= bound + tol) or ``>=`` (measured >= bound - tol).
Tolerances can be overridden per check name, which is how the harness
self-test forces a failure.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import democracy_lab as dl
from .dyadic_grid import CubeFamily, DyadicCube, enumerate_cubes, light_shade
from .errors import CapacityError
from .exponent_field import ExponentField, build_exponent, constant_exponent, harmonic_mean_exponents, step_exponent
from .fitting import loglog_fit
from .greedy_approx import EXHAUSTIVE_LIMIT, SubsetOracle, lebesgue_profile, random_expansion, sparse_expansion
from .haar_system import BasisLabel, analyze, basis_norm, equivalence_ratio, square_function, synthesize, wavelet
from .variable_norm import cube_char_norms, embedding_checks, holder_defect, luxemburg_norm, norm_decay_exponent


@dataclass
class Check:
    check: str
    measured: float
    bound: float
    tolerance: float
    relation: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


@dataclass
class CheckLog:
    tolerances: Mapping[str, float] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    def _add(self, name, measured, bound, tol, relation, detail) -> Check:
        tol = float(self.tolerances.get(name, tol))
        measured, bound = float(measured), float(bound)
        if relation == "<=":
            ok = measured <= bound + tol
        elif relation == ">=":
            ok = measured >= bound - tol
        else:
            raise ValueError(f"unknown relation {relation!r}")
        ok = ok and math.isfinite(measured)
        c = Check(name, measured, bound, tol, relation, bool(ok), dict(detail or {}))
        self.checks.append(c)
        return c

    def le(self, name: str, measured, bound, tol: float = 0.0, detail=None) -> Check:
        return self._add(name, measured, bound, tol, "<=", detail)

    def ge(self, name: str, measured, bound, tol: float = 0.0, detail=None) -> Check:
        return self._add(name, measured, bound, tol, ">=", detail)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.check for c in self.checks if not c.passed]

    def get(self, name: str) -> Check:
        for c in self.checks:
            if c.check == name:
                return c
        raise KeyError(name)


def powers_of_two(lo: int, hi: int) -> list[int]:
    return [2**k for k in range(lo, hi + 1)]


# --- constant exponent ------------------------------------------------------


def constant_exactness(
    log: CheckLog,
    q: float = 2.0,
    n: int = 1,
    J: int = 10,
    Ns: Sequence[int] = tuple(powers_of_two(0, 8)),
    families_per_N: int = 500,
    greedy_instances: int = 100,
    terms: int = 8,
    seed: int = 0,
) -> None:
    """Exact identities for a constant exponent q.

    Democracy sums equal N^{1/q} for every family when q = 2 (orthonormality)
    and for disjoint families otherwise. Greedy equals the subset oracle only
    when q = 2: for other q the greedy choice can lose to another subset, so
    only ratio >= 1 is checked there.
    """
    p = constant_exponent(q, n, J)
    hilbert = q == 2.0
    worst = disjoint_worst = 0.0
    count = 0
    for N in Ns:
        for fam in dl.random_family_battery(p, N, families_per_N, seed):
            target = N ** (1 / q)
            if fam.is_disjoint():
                disjoint_worst = max(disjoint_worst, abs(dl.square_sum_norm(fam, p) - target))
            if hilbert or fam.is_disjoint():
                worst = max(worst, abs(dl.democracy_norm(fam, p) - target))
                count += 1
    log.le("constant-democracy-exact", worst, 0.0, 1e-6, {"families": count, "q": q, "any_family": hilbert})
    log.le("constant-square-sum-disjoint", disjoint_worst, 0.0, 1e-9, {"q": q})

    rng = np.random.default_rng([seed, 2])
    gap, low = 0.0, math.inf
    for _ in range(greedy_instances):
        oracle = SubsetOracle(sparse_expansion(n, J, rng, terms), p)
        for N in range(terms + 1):
            g, b = oracle.greedy(N), oracle.best(N).value
            gap = max(gap, abs(g - b))
            if b > 0:
                low = min(low, g / b)
    detail = {"instances": greedy_instances, "terms": terms}
    if hilbert:
        log.le("constant-greedy-oracle", gap, 0.0, 1e-9, detail)
    elif greedy_instances:
        log.ge("constant-greedy-ratio", low, 1.0, 1e-9, {**detail, "max_gap": gap})


# --- democracy scaling ------------------------------------------------------


def scaling_law(
    log: CheckLog,
    p: ExponentField,
    Ns: Sequence[int],
    seed: int = 0,
    strategies: Sequence[str] = dl.STRATEGIES,
    random_families: int = 16,
    threads: int = 1,
    slope_tol: float = 0.05,
    min_r2: float = 0.98,
) -> dl.DemocracyRecord:
    """Fitted slopes of h_r_est and h_l_est against the targets 1/p_- and 1/p_+."""
    rec = dl.estimate_democracy(p, Ns, strategies, seed, random_families=random_families, threads=threads)
    if rec.fit_r is None:
        log.ge("democracy-fit-points", len(rec.h_r), 3)
        return rec
    log.le("slope-r", abs(rec.fit_r.slope - 1 / p.p_minus), 0.0, slope_tol, {"slope": rec.fit_r.slope, "target": 1 / p.p_minus})
    log.le("slope-l", abs(rec.fit_l.slope - 1 / p.p_plus), 0.0, slope_tol, {"slope": rec.fit_l.slope, "target": 1 / p.p_plus})
    log.ge("slope-r-r2", rec.fit_r.r_squared, min_r2)
    log.ge("slope-l-r2", rec.fit_l.r_squared, min_r2)
    order = min(rec.h_r[N] - rec.h_l[N] for N in rec.h_r)
    log.ge("h-l-below-h-r", order, 0.0, 1e-12)
    return rec


def gamma_bounds(log: CheckLog, p: ExponentField, epsilons: Sequence[float], Ns: Sequence[int]) -> None:
    """Literal Gamma_1 lower and Gamma_2 upper bounds for every feasible (eps, N)."""
    g1_worst, g2_worst = math.inf, 0.0
    g1_n = g2_n = g1_bad = g2_bad = 0
    skipped = []
    for eps in epsilons:
        for N in Ns:
            try:
                c = dl.gamma1_lower_check(p, dl.construct_gamma1(p, eps, N), eps)
                g1_worst = min(g1_worst, c.value / c.bound)
                g1_n += 1
                g1_bad += not c.ok
            except CapacityError:
                skipped.append(("gamma1", eps, N))
            if not 0 < eps < p.p_plus - 1:
                continue
            try:
                c = dl.gamma2_upper_check(p, dl.construct_gamma2(p, eps, N), eps)
                g2_worst = max(g2_worst, c.value / c.bound)
                g2_n += 1
                g2_bad += not c.ok
            except CapacityError:
                skipped.append(("gamma2", eps, N))
    detail = {"skipped_infeasible": [f"{k} eps={e} N={n}" for k, e, n in skipped]}
    log.ge("gamma1-lower-ratio", g1_worst if g1_n else math.nan, 1.0, 1e-9, {**detail, "families": g1_n, "violations": g1_bad})
    log.le("gamma2-upper-ratio", g2_worst if g2_n else math.nan, 1.0, 1e-9, {**detail, "families": g2_n, "violations": g2_bad})


def sandwich(
    log: CheckLog,
    p: ExponentField,
    Ns: Sequence[int],
    families_per_N: int = 200,
    seed: int = 0,
    slope_tol: float = 0.03,
) -> dl.SandwichResult:
    res = dl.sandwich_battery(p, Ns, families_per_N, seed)
    log.le("sandwich-lower-trend", abs(res.fit_lower.slope), 0.0, slope_tol, {"constants": res.lower_constants})
    log.le("sandwich-upper-trend", abs(res.fit_upper.slope), 0.0, slope_tol, {"constants": res.upper_constants})
    return res


# --- greedy -----------------------------------------------------------------


def lebesgue(
    log: CheckLog,
    p: ExponentField,
    functions: int = 20,
    Ns: Sequence[int] = tuple(powers_of_two(0, 6)),
    seed: int = 0,
    slope_margin: float = 0.05,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
    swap_budget: int | None = None,
) -> list:
    """Greedy/oracle ratio >= 1 at every N and bounded log-log slope per function."""
    n, J = p.dimension, p.depth
    profiles = []
    for i in range(functions):
        f = random_expansion(n, J, np.random.default_rng([seed, 3, i]))
        profiles.append(lebesgue_profile(f, p, Ns, exhaustive_limit, swap_budget))
    ratios = [r.ratio for prof in profiles for r in prof.rows if np.isfinite(r.ratio)]
    slopes = [prof.slope().slope for prof in profiles]
    log.ge("lebesgue-ratio-min", min(ratios), 1.0, 1e-9, {"functions": functions})
    log.le("lebesgue-slope-max", max(slopes), 1 / p.p_minus - 1 / p.p_plus + slope_margin, 0.0, {"slopes": slopes})
    return profiles


# --- lemmas -----------------------------------------------------------------


def default_recipes(n: int = 1) -> list[dict]:
    """Step {2, 4} across x_0 = 1/2, a smooth 1.5 -> 3 ramp, and constant 3."""
    rest = [[0, 1]] * (n - 1)
    return [
        {
            "kind": "piecewise",
            "pieces": [{"region": [[0, 0.5]] + rest, "value": 2}, {"region": [[0.5, 1]] + rest, "value": 4}],
        },
        {"kind": "smoothstep", "p_left": 1.5, "p_right": 3.0, "start": 0.25, "end": 0.75, "axis": 0},
        {"kind": "constant", "value": 3.0},
    ]


def _random_pair(p: ExponentField, rng: np.random.Generator) -> tuple[np.ndarray, DyadicCube]:
    n, J = p.dimension, p.depth
    j = int(rng.integers(0, J))
    Q = DyadicCube(j, tuple(int(k) for k in rng.integers(0, 2**j, size=n)))
    E = np.zeros(p.values.shape, dtype=bool)
    sub = rng.random(E[Q.slices(J)].shape) < rng.uniform(0.02, 1.0)
    if not sub.any():
        sub.flat[int(rng.integers(sub.size))] = True
    E[Q.slices(J)] = sub
    return E, Q


def lemma_suite(
    log: CheckLog,
    recipes: Sequence[dict] | None = None,
    n: int = 1,
    J: int = 10,
    pairs: int = 1000,
    seed: int = 0,
    min_decay: float = 0.05,
) -> None:
    fields = [build_exponent(r, n, J) for r in (recipes or default_recipes(n))]

    worst = 0.0
    for p in fields:
        for j in range(J + 1):
            lhs = 2.0 ** (-n * j / harmonic_mean_exponents(p, j))
            worst = max(worst, float((lhs / (2 * cube_char_norms(p, j))).max()))
    log.le("jensen-bound", worst, 1.0, 1e-12, {"recipes": len(fields)})

    rng = np.random.default_rng([seed, 4])
    weak, defect = 0.0, math.inf
    for i in range(pairs):
        p = fields[i % len(fields)]
        E, Q = _random_pair(p, rng)
        r = embedding_checks(p, E, Q)
        weak = max(weak, r.weak_lhs / r.maximal_norm)
        f = rng.standard_normal(p.values.shape) * (rng.random(p.values.shape) < rng.uniform(0.05, 1))
        g = rng.standard_normal(p.values.shape) ** 3
        if not f.any():
            f.flat[0] = 1.0
        defect = min(defect, holder_defect(f, g, p))
    log.le("maximal-weak-type", weak, 1.0, 1e-12, {"pairs": pairs})
    log.ge("holder-defect", defect, 0.0, 1e-9, {"pairs": pairs})

    deltas = [norm_decay_exponent(p, DyadicCube(0, (0,) * n)).slope for p in fields]
    log.ge("norm-decay-delta", min(deltas), min_decay, 0.0, {"deltas": deltas})


# --- linearization ----------------------------------------------------------


def _independent_light(family: CubeFamily, J: int) -> list[np.ndarray]:
    """light(Q) = Q minus every strictly smaller family member inside it, by direct masks."""
    masks = [Q.mask(J) for Q in family]
    out = []
    for Q, m in zip(family, masks):
        shade = np.zeros_like(m)
        for R, r in zip(family, masks):
            if R.scale > Q.scale and Q.contains(R):
                shade |= r
        out.append(m & ~shade)
    return out


def linearization(
    log: CheckLog,
    p: ExponentField,
    families: int = 1000,
    Ns: Sequence[int] = tuple(powers_of_two(1, 6)),
    seed: int = 0,
) -> None:
    J = p.depth
    rng = np.random.default_rng([seed, 5])
    union_bad = overlap_bad = light_bad = chain_bad = 0
    pointwise_min, equiv = math.inf, []
    upper_by_N: dict[int, float] = {}
    for i in range(families):
        N = Ns[i % len(Ns)]
        fam = dl.uniform_random_family(p, N, rng) if i % 2 == 0 else dl.stratified_random_family(p, N, rng)
        dec = light_shade(fam, J)
        lights = _independent_light(fam, J)
        stack = np.sum(lights, axis=0)
        omega = np.any([Q.mask(J) for Q in fam], axis=0)
        union_bad += int(np.any((stack > 0) != omega))
        overlap_bad += int(np.any(stack > 1))
        light_bad += sum(int(np.any(dec.light(Q) != m)) for Q, m in zip(fam, lights))
        lo_card, c_l, c_min, c_all = dec.cardinality_chain()
        chain_bad += int(not (lo_card <= c_l <= c_min <= c_all))
        lo, hi = dl.pointwise_ratio_range(fam, p)
        pointwise_min = min(pointwise_min, lo)
        upper_by_N[N] = max(upper_by_N.get(N, 0.0), hi)
        equiv.append(dl.linearized_norm(fam, p) / dl.square_sum_norm(fam, p))
    log.le("light-union-mismatch", union_bad, 0, 0, {"families": families})
    log.le("light-overlap", overlap_bad, 0, 0)
    log.le("light-decomposition-mismatch", light_bad, 0, 0)
    log.le("cardinality-chain-violations", chain_bad, 0, 0)
    log.ge("pointwise-lower", pointwise_min, 1.0, 1e-9)
    log.le(
        "pointwise-upper-constant",
        max(upper_by_N.values()),
        math.inf,
        0.0,
        {"per_N_max": {str(k): v for k, v in sorted(upper_by_N.items())}},
    )
    log.ge("linearized-equivalence-min", min(equiv), 0.0, 0.0, {"max": max(equiv), "min": min(equiv)})

    p2 = constant_exponent(2.0, 1, max(J, 3))
    tower = CubeFamily(DyadicCube(j, (0,)) for j in range(3))
    log.le("tower-square-sum", abs(dl.square_sum_norm(tower, p2) - math.sqrt(3)), 0.0, 1e-9)
    log.le("tower-linearized", abs(dl.linearized_norm(tower, p2) - math.sqrt(2)), 0.0, 1e-9)


# --- wavelets ---------------------------------------------------------------


def wavelet_layer(
    log: CheckLog,
    n: int = 1,
    J: int = 8,
    functions: int = 100,
    seed: int = 0,
    ratio_bounds: tuple[float, float] = (1 / 20, 20),
    fields: Mapping[str, ExponentField] | None = None,
) -> None:
    rng = np.random.default_rng([seed, 6])
    recon, parseval, flip = 0.0, 0.0, 0.0
    for _ in range(functions):
        f = rng.standard_normal((2**J,) * n) * (rng.random((2**J,) * n) < rng.uniform(0.1, 1))
        c = analyze(f)
        scale = max(np.abs(f).max(), 1.0)
        recon = max(recon, float(np.abs(synthesize(c).values - f).max()) / scale)
        energy = float((f**2).mean())
        parseval = max(parseval, abs(float((c.to_flat() ** 2).sum()) - energy) / max(energy, 1e-300))
        signs = c.copy()
        signs.scaling *= -1.0
        signs.details = [d * rng.choice([-1.0, 1.0], size=d.shape) for d in c.details]
        flip = max(flip, float(np.abs(square_function(signs).values - square_function(c).values).max()))
    log.le("haar-reconstruction", recon, 0.0, 1e-12)
    log.le("haar-parseval", parseval, 0.0, 1e-10)
    log.le("square-function-sign-flip", flip, 0.0, 0.0)

    p = step_exponent(2, 4, J=J, n=n)
    worst = 0.0
    for Q in enumerate_cubes(n, J, 0, min(J - 1, 3)):
        v = luxemburg_norm(np.abs(wavelet(BasisLabel(Q, 1), n, J).values), p)
        worst = max(worst, abs(v - basis_norm(Q, 1, p)) / v)
    log.le("basis-norm-consistency", worst, 0.0, 1e-10)

    if fields is None:
        fields = {
            "constant-1.5": constant_exponent(1.5, n, J),
            "constant-3": constant_exponent(3.0, n, J),
            "piecewise-2-4": p,
        }
    lo, hi = math.inf, 0.0
    per = {}
    for name, pf in fields.items():
        rs = []
        for _ in range(functions):
            f = random_expansion(n, J, rng, density=rng.uniform(0.1, 1.0), decay=rng.uniform(0.0, 1.0))
            rs.append(equivalence_ratio(f, pf))
        per[name] = [min(rs), max(rs)]
        lo, hi = min(lo, min(rs)), max(hi, max(rs))
    log.ge("equivalence-ratio-min", lo, ratio_bounds[0], 0.0, per)
    log.le("equivalence-ratio-max", hi, ratio_bounds[1], 0.0, per)

