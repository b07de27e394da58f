"""Modular, Luxemburg norm, dyadic maximal operator and the embedding lemmas.

All integrals are exact cell sums on the depth-J grid, so for a grid
function f the modular

    rho(f / lam) = sum_cells |Q_cell| * (|f| / lam) ** p

is a strictly decreasing continuous function of lam on (0, inf) whenever
f is not identically zero, and the Luxemburg norm is its unique unit level.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

import numpy as np

from .dyadic_grid import DyadicCube, GridFunction, _values, as_mask, blocks, integrate, upsample
from .errors import (
    AlignmentError,
    ContainmentError,
    EmptyRegionError,
    InvalidInputError,
    InvalidParameterError,
    ResolutionError,
)
from .exponent_field import ExponentField, conjugate, harmonic_mean_exponent
from .fitting import FitResult, loglog_fit

RTOL = 1e-12
MAX_BISECTIONS = 100
# the modular is summed per exponent value when p takes at most this many values
GROUPED_EXPONENTS = 64


def _aligned_values(f, p: ExponentField) -> np.ndarray:
    v = _values(f)
    if v.shape != p.values.shape:
        raise AlignmentError(f"function shape {v.shape} does not match exponent grid {p.values.shape}")
    return v


def unit_modular_roots(a: np.ndarray, p: np.ndarray, weights, rtol: float = RTOL, max_iter: int = MAX_BISECTIONS) -> np.ndarray:
    """Row-wise lam solving sum(weights * (a / lam) ** p) = 1.

    ``a`` is a non-negative (rows, m) array, ``p`` broadcasts against it and
    ``weights`` (scalar or length m) are cell measures summing to at most 1.
    Rows that vanish identically get 0.

    Each row is scaled by its maximum, so the modular at lam = 1 is at most
    1. When p takes few distinct values the scaled masses are summed per
    exponent value first, which leaves the modular unchanged but makes each
    bisection step cost O(#values) instead of O(m). lam_lo is halved until
    the modular exceeds 1, then bisection runs until the relative width
    drops below ``rtol`` or ``max_iter`` steps have been taken.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    p_in = np.asarray(p, dtype=float)
    out = np.zeros(a.shape[0])
    top = a.max(axis=1)
    live = top > 0
    if not live.any():
        return out
    shared = p_in.ndim <= 1 or p_in.shape[0] == 1  # one exponent row serves every row
    p_b = np.broadcast_to(p_in, a.shape)
    a, top = a[live], top[live]
    p_b = p_b[:1] if shared else p_b[live]
    scaled = np.power(a / top[:, None], p_b) * np.asarray(weights, dtype=float)
    exps, inverse = np.unique(p_b, return_inverse=True)
    k = exps.size
    if k <= GROUPED_EXPONENTS:
        if shared:
            onehot = np.zeros((a.shape[1], k))
            onehot[np.arange(a.shape[1]), inverse.ravel()] = 1.0
            mass = scaled @ onehot
        else:
            flat = (np.arange(a.shape[0])[:, None] * k + inverse.reshape(a.shape)).ravel()
            mass = np.bincount(flat, weights=scaled.ravel(), minlength=a.shape[0] * k).reshape(-1, k)

        def rho(lam):
            return (mass * np.power(lam[:, None], -exps[None, :])).sum(axis=1)

    else:

        def rho(lam):
            return (scaled * np.power(lam[:, None], -p_b)).sum(axis=1)

    if a.shape[0] == 1 and k <= GROUPED_EXPONENTS:
        out[live] = _scalar_root(mass[0].tolist(), exps.tolist(), rtol, max_iter) * top[0]
        return out
    hi = np.ones(a.shape[0])
    lo = hi / 2
    low_ok = rho(lo) > 1
    while not low_ok.all():
        hi = np.where(low_ok, hi, lo)
        lo = np.where(low_ok, lo, lo / 2)
        low_ok = rho(lo) > 1
    for _ in range(max_iter):
        if np.all(hi - lo <= rtol * hi):
            break
        mid = 0.5 * (lo + hi)
        above = rho(mid) > 1
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    out[live] = 0.5 * (lo + hi) * top
    return out


def _scalar_root(mass: list[float], exps: list[float], rtol: float, max_iter: int) -> float:
    """The same bracket and bisection on one row, in plain floats."""

    def rho(lam):
        return sum(m * lam**-q for m, q in zip(mass, exps))

    hi, lo = 1.0, 0.5
    while not rho(lo) > 1:
        hi, lo = lo, lo / 2
    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            break
        mid = 0.5 * (lo + hi)
        if rho(mid) > 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def modular(f, p: ExponentField, lam: float) -> float:
    """Integral of (|f| / lam) ** p over the unit cube."""
    if not lam > 0:
        raise InvalidParameterError(f"lambda must be positive, got {lam}")
    v = _aligned_values(f, p)
    return float(np.sum(np.power(np.abs(v) / lam, p.values))) / v.size


def luxemburg_norm(f, p: ExponentField, rtol: float = RTOL) -> float:
    v = _aligned_values(f, p)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("function has non-finite values")
    root = unit_modular_roots(np.abs(v).reshape(1, -1), p.values.reshape(1, -1), 1.0 / v.size, rtol=rtol)
    return float(root[0])


# Indicator norms are recomputed thousands of times by the democracy and
# greedy experiments; both caches are keyed by exponent content hash.
_cache_lock = threading.Lock()
_cube_norms: dict[tuple[str, int], np.ndarray] = {}
_set_norms: dict[tuple[str, str], float] = {}


def clear_norm_cache() -> None:
    with _cache_lock:
        _cube_norms.clear()
        _set_norms.clear()


def cube_char_norms(p: ExponentField, j: int) -> np.ndarray:
    """||chi_Q||_{p(.)} for every cube of scale j, shape (2**j,)*n."""
    if not 0 <= j <= p.depth:
        raise ResolutionError(f"scale {j} outside [0, {p.depth}]")
    key = (p.key, j)
    with _cache_lock:
        hit = _cube_norms.get(key)
    if hit is not None:
        return hit
    pb = blocks(p.values, j)
    rows = pb.reshape(-1, pb.shape[-1])
    norms = unit_modular_roots(np.ones_like(rows), rows, 1.0 / p.values.size).reshape(pb.shape[:-1])
    norms.setflags(write=False)
    with _cache_lock:
        _cube_norms.setdefault(key, norms)
    return norms


def cube_norm(p: ExponentField, Q: DyadicCube) -> float:
    if Q.scale > p.depth:
        raise ResolutionError(f"cube {Q} is finer than depth {p.depth}")
    return float(cube_char_norms(p, Q.scale)[Q.index])


def char_norm(p: ExponentField, cells) -> float:
    """||chi_E||_{p(.)} for a cell set E (mask, cube or cube iterable)."""
    if isinstance(cells, DyadicCube):
        return cube_norm(p, cells)
    mask = as_mask(cells, p.dimension, p.depth)
    if not mask.any():
        return 0.0
    key = (p.key, hashlib.sha1(np.packbits(mask).tobytes()).hexdigest())
    with _cache_lock:
        hit = _set_norms.get(key)
    if hit is not None:
        return hit
    value = float(unit_modular_roots(np.ones((1, int(mask.sum()))), p.values[mask][None, :], 1.0 / mask.size)[0])
    with _cache_lock:
        _set_norms.setdefault(key, value)
    return value


def dyadic_maximal(f) -> GridFunction:
    """Mf(x) = max over dyadic cubes Q containing x of the mean of |f| on Q."""
    a = np.abs(_values(f))
    J = GridFunction(a).depth
    out = a.copy()
    for j in range(J):
        np.maximum(out, upsample(blocks(a, j).mean(axis=-1), J), out=out)
    return GridFunction(out)


def holder_defect(f, g, p: ExponentField) -> float:
    """2 ||f||_{p(.)} ||g||_{p'(.)} - integral |f g|, which Holder's inequality keeps >= 0."""
    fv, gv = _aligned_values(f, p), _aligned_values(g, p)
    lhs = integrate(np.abs(fv * gv))
    return 2.0 * luxemburg_norm(fv, p) * luxemburg_norm(gv, conjugate(p)) - lhs


@dataclass(frozen=True)
class EmbeddingReport:
    ratio_measure: float  # |E| / |Q|
    ratio_norm: float  # ||chi_E|| / ||chi_Q||
    diening_lhs: float  # |Q|^{1/p_Q}
    diening_rhs: float  # 2 ||chi_Q||
    maximal_lower: float  # ||M chi_E|| / ||chi_E||
    weak_lhs: float  # (|E|/|Q|) ||chi_Q||
    maximal_norm: float  # ||M chi_E||

    @property
    def jensen_holds(self) -> bool:
        return self.diening_lhs <= self.diening_rhs * (1 + 1e-12)

    @property
    def weak_type_holds(self) -> bool:
        return self.weak_lhs <= self.maximal_norm * (1 + 1e-12)


def embedding_checks(p: ExponentField, E, Q: DyadicCube) -> EmbeddingReport:
    n, J = p.dimension, p.depth
    e = as_mask(E, n, J)
    if not e.any():
        raise EmptyRegionError("E must be non-empty")
    q = as_mask(Q, n, J)
    if np.any(e & ~q):
        raise ContainmentError(f"E is not contained in {Q}")
    nq, ne = cube_norm(p, Q), char_norm(p, e)
    m_norm = luxemburg_norm(dyadic_maximal(e.astype(float)), p)
    ratio_measure = float(e.sum()) / float(q.sum())
    return EmbeddingReport(
        ratio_measure=ratio_measure,
        ratio_norm=ne / nq,
        diening_lhs=Q.measure ** (1.0 / harmonic_mean_exponent(p, Q)),
        diening_rhs=2.0 * nq,
        maximal_lower=m_norm / ne,
        weak_lhs=ratio_measure * nq,
        maximal_norm=m_norm,
    )


def norm_decay_exponent(p: ExponentField, Q: DyadicCube, cell: DyadicCube | None = None) -> FitResult:
    """Fit ||chi_E||/||chi_Q|| ~ (|E|/|Q|)^delta along a geometric chain E shrinking to ``cell``.

    The chain is every dyadic cube between Q and the depth-J cell; the cell
    defaults to the first (lexicographically smallest) one in Q.
    """
    J = p.depth
    if J - Q.scale < 2:
        raise ResolutionError(f"need at least three nested scales below {Q}")
    if cell is None:
        cell = DyadicCube(J, tuple(k * 2 ** (J - Q.scale) for k in Q.index))
    if not Q.contains(cell):
        raise ContainmentError(f"{cell} is not inside {Q}")
    nq = cube_norm(p, Q)
    chain = [cell.ancestor(s) for s in range(Q.scale, J + 1)]
    return loglog_fit([e.measure / Q.measure for e in chain], [cube_norm(p, e) / nq for e in chain])


def empirical_maximal_ratio(p: ExponentField, count: int = 64, seed: int = 0) -> float:
    """Lower bound for the operator norm of the dyadic maximal operator.

    sup ||Mf|| / ||f|| over ``count`` seeded random functions mixing smooth
    noise with sparse spikes.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    shape = p.values.shape
    for i in range(count):
        if i % 2:
            f = np.zeros(shape)
            hits = rng.integers(0, f.size, size=rng.integers(1, 9))
            f.flat[hits] = rng.exponential(size=hits.size)
        else:
            f = np.abs(rng.standard_normal(shape)) ** rng.uniform(0.5, 3.0)
        best = max(best, luxemburg_norm(dyadic_maximal(f), p) / luxemburg_norm(f, p))
    return best
