"""Dyadic cubes on [0,1)^n, grid functions and the light/shade decomposition.

Every object lives on a fixed depth-J grid: the unit cube is cut into
``2**(n*J)`` congruent cells, stored as an n-dimensional numpy array whose
C-order flattening is the lexicographic enumeration of the cell index k.
A dyadic cube of scale j <= J is then a block of ``2**(n*(J-j))`` cells,
so measures and integrals are exact finite sums.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, InvalidParameterError, InvalidRangeError, OutOfDomainError


def grid_shape(n: int, J: int) -> tuple[int, ...]:
    return (2**J,) * n


def shape_depth(shape: Sequence[int]) -> tuple[int, int]:
    """Recover ``(n, J)`` from a grid array shape, or raise AlignmentError."""
    if len(shape) == 0:
        raise AlignmentError("grid arrays need at least one axis")
    side = shape[0]
    if any(s != side for s in shape) or side < 1 or side & (side - 1):
        raise AlignmentError(f"shape {tuple(shape)} is not a dyadic grid (2**J,)*n")
    return len(shape), side.bit_length() - 1


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Q_{j,k} = 2^{-j}([0,1)^n + k); ordering is the canonical (scale, k) order."""

    scale: int
    index: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(k) for k in self.index))
        if self.scale < 0:
            raise OutOfDomainError(f"negative scale {self.scale}")
        if not self.index:
            raise OutOfDomainError("cube index must have at least one coordinate")
        side = 2**self.scale
        if any(k < 0 or k >= side for k in self.index):
            raise OutOfDomainError(f"cube {self} is not inside the unit cube")

    @property
    def dimension(self) -> int:
        return len(self.index)

    @property
    def measure(self) -> float:
        return 2.0 ** (-self.scale * self.dimension)

    @property
    def side(self) -> float:
        return 2.0 ** (-self.scale)

    def slices(self, J: int) -> tuple[slice, ...]:
        """Cell slices covering the cube on the depth-J grid."""
        if self.scale > J:
            raise AlignmentError(f"cube {self} is finer than depth {J}")
        w = 2 ** (J - self.scale)
        return tuple(slice(k * w, (k + 1) * w) for k in self.index)

    def cell_count(self, J: int) -> int:
        return 2 ** (self.dimension * (J - self.scale))

    def mask(self, J: int) -> np.ndarray:
        m = np.zeros(grid_shape(self.dimension, J), dtype=bool)
        m[self.slices(J)] = True
        return m

    def contains(self, other: DyadicCube) -> bool:
        """True if ``other`` is a (not necessarily strict) subcube."""
        if other.scale < self.scale or other.dimension != self.dimension:
            return False
        shift = other.scale - self.scale
        return all((k >> shift) == q for k, q in zip(other.index, self.index))

    def disjoint(self, other: DyadicCube) -> bool:
        return not (self.contains(other) or other.contains(self))

    def parent(self) -> DyadicCube:
        if self.scale == 0:
            raise OutOfDomainError("the unit cube has no dyadic parent inside [0,1)^n")
        return DyadicCube(self.scale - 1, tuple(k >> 1 for k in self.index))

    def ancestor(self, scale: int) -> DyadicCube:
        if not 0 <= scale <= self.scale:
            raise InvalidParameterError(f"no ancestor of {self} at scale {scale}")
        shift = self.scale - scale
        return DyadicCube(scale, tuple(k >> shift for k in self.index))

    def children(self) -> list[DyadicCube]:
        base = [2 * k for k in self.index]
        return [
            DyadicCube(self.scale + 1, tuple(b + o for b, o in zip(base, offs)))
            for offs in itertools.product((0, 1), repeat=self.dimension)
        ]

    def __str__(self) -> str:
        return f"{self.scale}:" + ",".join(str(k) for k in self.index)

    @classmethod
    def parse(cls, text: str) -> DyadicCube:
        try:
            j, ks = text.strip().split(":")
            return cls(int(j), tuple(int(k) for k in ks.split(",")))
        except ValueError as exc:
            raise InvalidParameterError(f"cannot parse cube {text!r}; expected 'j:k0[,k1,...]'") from exc


def unit_cube(n: int) -> DyadicCube:
    return DyadicCube(0, (0,) * n)


def cell_cube(flat_or_index, n: int, J: int) -> DyadicCube:
    """The depth-J cell with the given flat (C-order) or multi-index."""
    if np.isscalar(flat_or_index):
        idx = np.unravel_index(int(flat_or_index), grid_shape(n, J))
    else:
        idx = flat_or_index
    return DyadicCube(J, tuple(int(i) for i in idx))


@dataclass(frozen=True)
class GridFunction:
    """A real function that is constant on every depth-J cell."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        shape_depth(v.shape)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dimension(self) -> int:
        return self.values.ndim

    @property
    def depth(self) -> int:
        return shape_depth(self.values.shape)[1]

    @classmethod
    def constant(cls, c: float, n: int, J: int) -> GridFunction:
        return cls(np.full(grid_shape(n, J), float(c)))

    @classmethod
    def indicator(cls, region, n: int, J: int) -> GridFunction:
        return cls(as_mask(region, n, J).astype(float))

    @classmethod
    def from_cells(cls, cells: Sequence[float], n: int = 1) -> GridFunction:
        """Build from a flat, lexicographically ordered list of cell values."""
        arr = np.asarray(cells, dtype=float).ravel()
        J, rem = divmod((arr.size.bit_length() - 1), n)
        if rem or arr.size != 2 ** (n * J):
            raise AlignmentError(f"{arr.size} cell values is not 2**(n*J) for n={n}")
        return cls(arr.reshape(grid_shape(n, J)))

    def __add__(self, other: GridFunction) -> GridFunction:
        return GridFunction(self.values + _values(other))

    def __sub__(self, other: GridFunction) -> GridFunction:
        return GridFunction(self.values - _values(other))

    def __mul__(self, c: float) -> GridFunction:
        return GridFunction(self.values * c)

    __rmul__ = __mul__

    def __abs__(self) -> GridFunction:
        return GridFunction(np.abs(self.values))


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


def as_mask(region, n: int, J: int) -> np.ndarray:
    """Normalize a cell-set description to a boolean grid mask.

    Accepts None (the whole domain), a boolean array, a DyadicCube or an
    iterable of DyadicCubes.
    """
    shape = grid_shape(n, J)
    if region is None:
        return np.ones(shape, dtype=bool)
    if isinstance(region, DyadicCube):
        if region.dimension != n:
            raise AlignmentError(f"cube {region} has dimension {region.dimension}, grid has {n}")
        return region.mask(J)
    if isinstance(region, np.ndarray):
        if region.shape != shape:
            raise AlignmentError(f"mask shape {region.shape} does not match grid {shape}")
        return region.astype(bool, copy=False)
    m = np.zeros(shape, dtype=bool)
    for q in region:
        m[q.slices(J)] = True
    return m


def blocks(values: np.ndarray, j: int) -> np.ndarray:
    """View a depth-J array as ``(2**j,)*n + (2**(n*(J-j)),)`` scale-j blocks."""
    n, J = shape_depth(values.shape)
    if not 0 <= j <= J:
        raise InvalidRangeError(f"scale {j} outside [0, {J}]")
    side, w = 2**j, 2 ** (J - j)
    split = values.reshape(sum(([side, w] for _ in range(n)), []))
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return split.transpose(order).reshape((side,) * n + (w**n,))


def upsample(coarse: np.ndarray, J: int) -> np.ndarray:
    """Broadcast a scale-j array (one value per cube) back to depth-J cells."""
    n, j = shape_depth(coarse.shape)
    out = coarse
    for axis in range(n):
        out = np.repeat(out, 2 ** (J - j), axis=axis)
    return out


def block_sums(values: np.ndarray, j: int) -> np.ndarray:
    return blocks(values, j).sum(axis=-1)


def enumerate_cubes(n: int, J: int, j_min: int = 0, j_max: int | None = None) -> list[DyadicCube]:
    """All cubes with scale in [j_min, j_max], scale ascending then k lexicographic."""
    if j_max is None:
        j_max = J
    if not 0 <= j_min <= j_max <= J:
        raise InvalidRangeError(f"scale range [{j_min}, {j_max}] not inside [0, {J}]")
    return [
        DyadicCube(j, k)
        for j in range(j_min, j_max + 1)
        for k in itertools.product(range(2**j), repeat=n)
    ]


def integrate(f, region=None) -> float:
    v = _values(f)
    n, J = shape_depth(v.shape)
    m = as_mask(region, n, J)
    return float(v[m].sum()) * 2.0 ** (-n * J)


def measure(region, n: int, J: int) -> float:
    return float(as_mask(region, n, J).sum()) * 2.0 ** (-n * J)


class CubeFamily(Sequence):
    """A finite set of distinct dyadic cubes, kept in canonical order."""

    def __init__(self, cubes: Iterable[DyadicCube]):
        cubes = list(cubes)
        if len(set(cubes)) != len(cubes):
            raise InvalidParameterError("cube family contains duplicates")
        dims = {q.dimension for q in cubes}
        if len(dims) > 1:
            raise AlignmentError(f"cubes of mixed dimension {sorted(dims)}")
        self.cubes: tuple[DyadicCube, ...] = tuple(sorted(cubes))

    def __getitem__(self, i):
        return self.cubes[i]

    def __len__(self) -> int:
        return len(self.cubes)

    def __eq__(self, other) -> bool:
        return isinstance(other, CubeFamily) and self.cubes == other.cubes

    def __hash__(self) -> int:
        return hash(self.cubes)

    def __repr__(self) -> str:
        return f"CubeFamily([{self}])"

    def __str__(self) -> str:
        return ";".join(str(q) for q in self.cubes)

    @property
    def dimension(self) -> int:
        if not self.cubes:
            raise InvalidParameterError("empty family has no dimension")
        return self.cubes[0].dimension

    @property
    def max_scale(self) -> int:
        return max(q.scale for q in self.cubes)

    def is_disjoint(self) -> bool:
        # distinct dyadic cubes meet only when one contains the other
        members = {(q.scale, q.index) for q in self.cubes}
        for q in self.cubes:
            for s in range(q.scale):
                shift = q.scale - s
                if (s, tuple(k >> shift for k in q.index)) in members:
                    return False
        return True

    @classmethod
    def parse(cls, text: str) -> CubeFamily:
        return cls(DyadicCube.parse(t) for t in text.split(";") if t.strip())


def _check_family(family, J: int) -> CubeFamily:
    if not isinstance(family, CubeFamily):
        family = CubeFamily(family)
    if len(family) and family.max_scale > J:
        raise AlignmentError(f"family has a cube finer than depth {J}")
    return family


def minimal_cube_map(family, J: int) -> np.ndarray:
    """Per depth-J cell, the position in ``family`` of the smallest member containing it.

    Cells outside the union of the family get -1. Painting coarse-to-fine
    leaves the finest, hence smallest, containing cube on every cell.
    """
    family = _check_family(family, J)
    labels = np.full(grid_shape(family.dimension, J), -1, dtype=np.int64)
    for pos in sorted(range(len(family)), key=lambda i: family[i].scale):
        labels[family[pos].slices(J)] = pos
    return labels


@dataclass(frozen=True)
class LightShadeDecomposition:
    """Lighted/shaded split of a cube family on the depth-J grid.

    ``labels`` holds the minimal-cube map; light(Q) is exactly the set of
    cells whose minimal cube is Q.
    """

    family: CubeFamily
    depth: int
    labels: np.ndarray
    light_counts: np.ndarray
    gamma_min: tuple[DyadicCube, ...] = field(default=())
    gamma_L: tuple[DyadicCube, ...] = field(default=())

    def _pos(self, cube: DyadicCube) -> int:
        try:
            return self.family.cubes.index(cube)
        except ValueError:
            raise InvalidParameterError(f"{cube} is not in the family") from None

    def light(self, cube: DyadicCube) -> np.ndarray:
        return self.labels == self._pos(cube)

    def shade(self, cube: DyadicCube) -> np.ndarray:
        return cube.mask(self.depth) & ~self.light(cube)

    @property
    def omega(self) -> np.ndarray:
        return self.labels >= 0

    def cardinality_chain(self) -> tuple[float, int, int, int]:
        """(((2^n-1)/2^n) card(Gamma), card(Gamma_L), card(Gamma_min), card(Gamma))."""
        n = self.family.dimension
        N = len(self.family)
        return ((2**n - 1) / 2**n * N, len(self.gamma_L), len(self.gamma_min), N)


def light_shade(family, J: int) -> LightShadeDecomposition:
    family = _check_family(family, J)
    n = family.dimension
    labels = minimal_cube_map(family, J)
    counts = np.bincount(labels[labels >= 0].ravel(), minlength=len(family))
    gamma_min = tuple(q for q, c in zip(family, counts) if c > 0)
    # lighted: |light(Q)| >= |Q| / 2^n, compared in cell counts
    gamma_L = tuple(q for q, c in zip(family, counts) if c > 0 and c * 2**n >= q.cell_count(J))
    labels.setflags(write=False)
    return LightShadeDecomposition(family, J, labels, counts, gamma_min, gamma_L)
