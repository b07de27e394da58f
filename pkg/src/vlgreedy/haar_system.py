"""Tensor-product Haar system on [0,1)^n.

The system is nonhomogeneous: the scaling function phi = chi_[0,1)^n plus
the mother wavelets psi^l_Q for every dyadic cube Q of scale 0 <= j < J and
every type l = 1 .. 2^n - 1. The bits of l (axis 0 in the most significant
position) say which axes carry the oscillating factor
h_1 = chi_[0,1/2) - chi_[1/2,1); the remaining axes carry h_0 = chi_[0,1).

Detail coefficients at scale j are stored as an array of shape
``(2**j,)*n + (2**n - 1,)``, so C-order flattening walks k
lexicographically and then the type, which is the canonical basis order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, NamedTuple

import numpy as np

from .dyadic_grid import DyadicCube, GridFunction, _values, grid_shape, shape_depth, upsample
from .errors import InvalidParameterError, ResolutionError, UndefinedRatioError
from .exponent_field import ExponentField
from .variable_norm import cube_char_norms, cube_norm, luxemburg_norm


@lru_cache(maxsize=None)
def _hadamard(n: int) -> np.ndarray:
    h1 = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    h = np.ones((1, 1))
    for _ in range(n):
        h = np.kron(h, h1)
    return h


def _to_children(s: np.ndarray, n: int) -> np.ndarray:
    """(2**(j+1),)*n  ->  (2**j,)*n + (2**n,) grouping the 2^n children of each cube."""
    side = s.shape[0] // 2
    split = s.reshape(sum(([side, 2] for _ in range(n)), []))
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return split.transpose(order).reshape((side,) * n + (2**n,))


def _from_children(c: np.ndarray, n: int) -> np.ndarray:
    side = c.shape[0]
    split = c.reshape((side,) * n + (2,) * n)
    order = [ax for i in range(n) for ax in (i, n + i)]
    return split.transpose(order).reshape((2 * side,) * n)


class BasisLabel(NamedTuple):
    """A basis element: ``cube is None`` means the scaling function (l = 0)."""

    cube: DyadicCube | None
    l: int

    def __str__(self) -> str:
        return "phi" if self.cube is None else f"{self.l}:{self.cube}"


@dataclass
class HaarCoefficients:
    dimension: int
    depth: int
    scaling: float
    details: list[np.ndarray]

    @property
    def types(self) -> int:
        return 2**self.dimension - 1

    @classmethod
    def zeros(cls, n: int, J: int) -> HaarCoefficients:
        L = 2**n - 1
        return cls(n, J, 0.0, [np.zeros(grid_shape(n, j) + (L,)) for j in range(J)])

    def copy(self) -> HaarCoefficients:
        return HaarCoefficients(self.dimension, self.depth, self.scaling, [d.copy() for d in self.details])

    def _check(self, l: int, cube: DyadicCube) -> None:
        if not 1 <= l <= self.types:
            raise InvalidParameterError(f"type {l} outside 1..{self.types}")
        if cube.scale >= self.depth:
            raise ResolutionError(f"no wavelet at scale {cube.scale} for depth {self.depth}")

    def detail(self, l: int, cube: DyadicCube) -> float:
        self._check(l, cube)
        return float(self.details[cube.scale][cube.index + (l - 1,)])

    def set_detail(self, l: int, cube: DyadicCube, value: float) -> None:
        self._check(l, cube)
        self.details[cube.scale][cube.index + (l - 1,)] = value

    def to_flat(self) -> np.ndarray:
        """All coefficients in canonical basis order (see :func:`basis_labels`)."""
        return np.concatenate([[self.scaling]] + [d.ravel() for d in self.details])

    @classmethod
    def from_flat(cls, flat, n: int, J: int) -> HaarCoefficients:
        flat = np.asarray(flat, dtype=float)
        if flat.size != 2 ** (n * J):
            raise InvalidParameterError(f"{flat.size} coefficients, expected {2 ** (n * J)}")
        L, pos, details = 2**n - 1, 1, []
        for j in range(J):
            size = 2 ** (n * j) * L
            details.append(flat[pos : pos + size].reshape(grid_shape(n, j) + (L,)).copy())
            pos += size
        return cls(n, J, float(flat[0]), details)

    def items(self) -> Iterator[tuple[BasisLabel, float]]:
        for label, value in zip(basis_labels(self.dimension, self.depth), self.to_flat()):
            yield label, float(value)


@lru_cache(maxsize=32)
def basis_labels(n: int, J: int) -> tuple[BasisLabel, ...]:
    """Canonical order: phi, then scale ascending, k lexicographic, type ascending."""
    out = [BasisLabel(None, 0)]
    L = 2**n - 1
    for j in range(J):
        for k in np.ndindex(*grid_shape(n, j)):
            cube = DyadicCube(j, k)
            out.extend(BasisLabel(cube, l) for l in range(1, L + 1))
    return tuple(out)


def analyze(f) -> HaarCoefficients:
    """Exact inner products of f with phi and every psi^l_Q, 0 <= scale < J."""
    v = _values(f)
    n, J = shape_depth(v.shape)
    H = _hadamard(n)
    # normalized scaling coefficients <f, 2^{jn/2} chi_Q>, starting at the cells
    s = v * 2.0 ** (-n * J / 2)
    details = [None] * J
    for j in range(J - 1, -1, -1):
        out = _to_children(s, n) @ H.T
        s = out[..., 0]
        details[j] = np.ascontiguousarray(out[..., 1:])
    return HaarCoefficients(n, J, float(s.reshape(-1)[0]), details)


def synthesize(c: HaarCoefficients) -> GridFunction:
    n, J = c.dimension, c.depth
    H = _hadamard(n)
    s = np.full((1,) * n, c.scaling)
    for j in range(J):
        both = np.concatenate([s[..., None], c.details[j]], axis=-1)
        s = _from_children(both @ H, n)
    return GridFunction(s * 2.0 ** (n * J / 2))


def square_function(c: HaarCoefficients) -> GridFunction:
    """(sum |<f,psi^l_Q>|^2 |Q|^{-1} chi_Q)^{1/2}, with phi counted as a cube of measure 1."""
    n, J = c.dimension, c.depth
    sq = np.full(grid_shape(n, J), c.scaling**2)
    for j in range(J):
        sq += upsample((c.details[j] ** 2).sum(axis=-1) * 2.0 ** (n * j), J)
    return GridFunction(np.sqrt(sq))


def basis_norm(Q: DyadicCube, l: int, p: ExponentField) -> float:
    """||psi^l_Q||_{p(.)} = |Q|^{-1/2} ||chi_Q||_{p(.)}, exact for Haar since |psi^l_Q| = |Q|^{-1/2} chi_Q."""
    if Q.scale >= p.depth:
        raise ResolutionError(f"no wavelet at scale {Q.scale} for depth {p.depth}")
    if not 1 <= l <= 2**p.dimension - 1:
        raise InvalidParameterError(f"type {l} outside 1..{2 ** p.dimension - 1}")
    return Q.measure**-0.5 * cube_norm(p, Q)


def basis_norms(p: ExponentField) -> np.ndarray:
    """Norms of every basis element in canonical order; ||phi|| = ||chi_[0,1)^n|| comes first."""
    n, J = p.dimension, p.depth
    L = 2**n - 1
    parts = [cube_char_norms(p, 0).reshape(1)]
    for j in range(J):
        per_cube = cube_char_norms(p, j) * 2.0 ** (n * j / 2)
        parts.append(np.repeat(per_cube[..., None], L, axis=-1).ravel())
    return np.concatenate(parts)


def wavelet(label: BasisLabel, n: int, J: int) -> GridFunction:
    c = HaarCoefficients.zeros(n, J)
    if label.cube is None:
        c.scaling = 1.0
    else:
        c.set_detail(label.l, label.cube, 1.0)
    return synthesize(c)


def equivalence_ratio(f, p: ExponentField) -> float:
    """||W f||_{p(.)} / ||f||_{p(.)}."""
    v = _values(f)
    if not np.any(v):
        raise UndefinedRatioError("equivalence ratio of the zero function")
    return luxemburg_norm(square_function(analyze(v)), p) / luxemburg_norm(v, p)
