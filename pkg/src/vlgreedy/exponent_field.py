"""Exponent functions p(.) sampled piecewise-constant on the depth-J grid."""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping

import numpy as np

from .dyadic_grid import (
    DyadicCube,
    as_mask,
    blocks,
    grid_shape,
    shape_depth,
)
from .errors import (
    AlignmentError,
    EmptyRegionError,
    InvalidExponentError,
    InvalidParameterError,
    OutOfDomainError,
    ResolutionError,
)

RECIPE_KINDS = ("constant", "piecewise", "smoothstep", "samples")


@dataclass(frozen=True, eq=False)
class ExponentField:
    """Cell values of p(.) on [0,1)^n, each in (1, inf).

    ``recipe`` is the JSON-serializable constructor description when the
    field came from :func:`build_exponent`; derived fields carry a
    ``samples`` recipe.
    """

    values: np.ndarray
    recipe: Mapping[str, Any] | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        shape_depth(v.shape)
        if not np.all(np.isfinite(v)) or np.any(v <= 1.0):
            bad = v[~(np.isfinite(v) & (v > 1.0))]
            raise InvalidExponentError(f"exponent values must lie in (1, inf); got {bad.ravel()[:4]}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        digest = hashlib.sha1(repr(v.shape).encode() + v.tobytes()).hexdigest()
        object.__setattr__(self, "_key", digest)

    @property
    def key(self) -> str:
        """Content hash; equal fields share cache entries."""
        return self._key

    def __eq__(self, other) -> bool:
        return isinstance(other, ExponentField) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    @property
    def dimension(self) -> int:
        return self.values.ndim

    @property
    def depth(self) -> int:
        return shape_depth(self.values.shape)[1]

    @property
    def p_minus(self) -> float:
        return float(self.values.min())

    @property
    def p_plus(self) -> float:
        return float(self.values.max())

    @property
    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus

    def to_recipe(self) -> dict:
        if self.recipe is not None:
            return dict(self.recipe)
        return {"kind": "samples", "values": self.values.ravel().tolist()}


def _fraction(x) -> Fraction:
    return Fraction(x) if not isinstance(x, str) else Fraction(x.strip())


def _aligned(x, J: int, what: str) -> int:
    scaled = _fraction(x) * 2**J
    if scaled.denominator != 1:
        raise AlignmentError(f"{what} = {x} is not a multiple of 2^-{J}")
    return int(scaled)


def _region_slices(region, n: int, J: int) -> tuple[slice, ...]:
    if isinstance(region, str):
        cube = DyadicCube.parse(region)
        if cube.dimension != n:
            raise AlignmentError(f"region {region} has dimension {cube.dimension}, expected {n}")
        if cube.scale > J:
            raise AlignmentError(f"region {region} is finer than depth {J}")
        return cube.slices(J)
    box = list(region)
    if n == 1 and len(box) == 2 and not isinstance(box[0], (list, tuple)):
        box = [box]
    if len(box) != n:
        raise AlignmentError(f"box region {region!r} needs {n} [lo, hi] intervals")
    out = []
    for lo, hi in box:
        a, b = _aligned(lo, J, "region bound"), _aligned(hi, J, "region bound")
        if not 0 <= a < b <= 2**J:
            raise AlignmentError(f"interval [{lo}, {hi}) is empty or outside [0, 1)")
        out.append(slice(a, b))
    return tuple(out)


def build_exponent(recipe: Mapping[str, Any], n: int, J: int) -> ExponentField:
    """Build an exponent field from one of the four recipe kinds.

    constant   {"kind": "constant", "value": p}
    piecewise  {"kind": "piecewise", "pieces": [{"region": R, "value": p}, ...]}
               R is a cube string "j:k0,..." or a box [[lo, hi], ...] (one
               interval per axis); later pieces override earlier ones and
               every cell must be covered.
    smoothstep {"kind": "smoothstep", "p_left": a, "p_right": b,
                "start": s, "end": e, "axis": 0}
               cubic smoothstep from a to b across [s, e], sampled at cell
               centres along ``axis``.
    samples    {"kind": "samples", "values": [...]}  (flat or nested, C order)
    """
    if n < 1 or J < 0:
        raise InvalidParameterError(f"need n >= 1 and J >= 0, got n={n}, J={J}")
    kind = recipe.get("kind")
    shape = grid_shape(n, J)
    if kind == "constant":
        values = np.full(shape, float(recipe["value"]))
    elif kind == "piecewise":
        values = np.full(shape, np.nan)
        for piece in recipe["pieces"]:
            values[_region_slices(piece["region"], n, J)] = float(piece["value"])
        if np.isnan(values).any():
            raise AlignmentError("piecewise regions do not cover every cell")
    elif kind == "smoothstep":
        start, end = float(recipe["start"]), float(recipe["end"])
        axis = int(recipe.get("axis", 0))
        if not start < end:
            raise InvalidParameterError("smoothstep needs start < end")
        if not 0 <= axis < n:
            raise InvalidParameterError(f"axis {axis} out of range for n={n}")
        centres = (np.arange(2**J) + 0.5) / 2**J
        t = np.clip((centres - start) / (end - start), 0.0, 1.0)
        profile = float(recipe["p_left"]) + (float(recipe["p_right"]) - float(recipe["p_left"])) * t * t * (3 - 2 * t)
        bshape = [1] * n
        bshape[axis] = -1
        values = np.broadcast_to(profile.reshape(bshape), shape).copy()
    elif kind == "samples":
        raw = np.asarray(recipe["values"], dtype=float)
        if raw.size != 2 ** (n * J):
            raise AlignmentError(f"{raw.size} samples given, grid needs {2 ** (n * J)}")
        values = raw.reshape(shape)
    else:
        raise InvalidExponentError(f"unknown recipe kind {kind!r}; expected one of {RECIPE_KINDS}")
    return ExponentField(values, recipe=dict(recipe))


def constant_exponent(p: float, n: int, J: int) -> ExponentField:
    return build_exponent({"kind": "constant", "value": p}, n, J)


def step_exponent(p_left: float, p_right: float, J: int, n: int = 1) -> ExponentField:
    """p = p_left on {x_0 < 1/2}, p_right on {x_0 >= 1/2}."""
    rest = [[0, 1]] * (n - 1)
    return build_exponent(
        {
            "kind": "piecewise",
            "pieces": [
                {"region": [[0, "1/2"]] + rest, "value": p_left},
                {"region": [["1/2", 1]] + rest, "value": p_right},
            ],
        },
        n,
        J,
    )


def exponent_range(p: ExponentField, region=None) -> tuple[float, float]:
    """(p_-(E), p_+(E)) over a cell set; the whole domain by default."""
    m = as_mask(region, p.dimension, p.depth)
    if not m.any():
        raise EmptyRegionError("exponent range over an empty region")
    vals = p.values[m]
    return float(vals.min()), float(vals.max())


def conjugate(p: ExponentField) -> ExponentField:
    v = p.values
    return ExponentField(v / (v - 1.0))


def harmonic_mean_exponent(p: ExponentField, Q: DyadicCube) -> float:
    """p_Q with 1/p_Q the average of 1/p over Q."""
    if Q.dimension != p.dimension:
        raise OutOfDomainError(f"cube {Q} does not live in dimension {p.dimension}")
    if Q.scale > p.depth:
        raise ResolutionError(f"cube {Q} is finer than depth {p.depth}")
    return 1.0 / float(np.mean(1.0 / p.values[Q.slices(p.depth)]))


def harmonic_mean_exponents(p: ExponentField, j: int) -> np.ndarray:
    """p_Q for every cube of scale j at once, shape (2**j,)*n."""
    return 1.0 / blocks(1.0 / p.values, j).mean(axis=-1)


@dataclass(frozen=True)
class LevelSets:
    """Near-extremal cells: g_cells has p <= p_- + eps, h_cells has p >= p_+ - eps."""

    epsilon: float
    g_cells: np.ndarray
    h_cells: np.ndarray


def level_sets(p: ExponentField, epsilon: float) -> LevelSets:
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    g = p.values <= p.p_minus + epsilon
    h = p.values >= p.p_plus - epsilon
    g.setflags(write=False)
    h.setflags(write=False)
    return LevelSets(float(epsilon), g, h)


def _offsets_by_distance(n: int, J: int):
    """Lexicographically positive integer offsets with |d| * 2^-J < 1/2, nearest first."""
    h = 2.0**-J
    radius = 2 ** (J - 1)
    out = []
    for d in itertools.product(range(-radius, radius + 1), repeat=n):
        first = next((c for c in d if c), 0)
        if first <= 0:
            continue
        dist = math.sqrt(sum(c * c for c in d)) * h
        if dist < 0.5:
            out.append((dist, d))
    out.sort()
    return out


def log_holder_constant(p: ExponentField) -> float:
    """Smallest C0 with |p(x)-p(y)| <= C0 / (-log|x-y|) over cell-centre pairs, |x-y| < 1/2.

    Offsets are scanned nearest first and the scan stops once even the full
    oscillation p_+ - p_- could not raise the running maximum.
    """
    n, J = p.dimension, p.depth
    if J < 1:
        raise ResolutionError("log-Holder diagnostic needs depth >= 1")
    osc = p.p_plus - p.p_minus
    if osc == 0:
        return 0.0
    v = p.values
    side = 2**J
    best = 0.0
    for dist, d in _offsets_by_distance(n, J):
        weight = -math.log(dist)
        if osc * weight <= best:
            break
        a = tuple(slice(max(0, -c), side - max(0, c)) for c in d)
        b = tuple(slice(max(0, c), side + min(0, c)) for c in d)
        diff = np.abs(v[b] - v[a])
        if diff.size:
            best = max(best, float(diff.max()) * weight)
    return best
