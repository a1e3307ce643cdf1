"""Tensor-product grids on axis-aligned boxes.

Node fields are flat arrays over *all* nodes (C order over ``shape``).
Operators act on the interior nodes only (homogeneous Dirichlet data on the
boundary shell); :meth:`Grid.restrict` and :meth:`Grid.extend` convert.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ptwell.errors import GridNotInvariant


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``nodes_per_axis[k]`` nodes spanning ``extents[k]``.

    Coordinates are laid out symmetrically about the box center,
    ``c + (i - (n-1)/2) * spacing``, so that reflections through the center
    map nodes onto nodes in exact floating-point arithmetic.
    """

    extents: tuple[tuple[float, float], ...]
    nodes_per_axis: tuple[int, ...]

    def __post_init__(self):
        extents = tuple((float(lo), float(hi)) for lo, hi in self.extents)
        nodes = tuple(int(n) for n in self.nodes_per_axis)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "nodes_per_axis", nodes)
        if len(extents) != len(nodes) or len(nodes) not in (1, 2):
            raise ValueError("grid must be 1D or 2D with one extent per axis")
        for (lo, hi), n in zip(extents, nodes):
            if not hi > lo:
                raise ValueError(f"empty extent [{lo}, {hi}]")
            if n < 3:
                raise ValueError("need at least 3 nodes per axis")

    @property
    def dimension(self) -> int:
        return len(self.nodes_per_axis)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes_per_axis

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.extents, self.nodes_per_axis))

    @property
    def centers(self) -> tuple[float, ...]:
        return tuple(0.5 * (lo + hi) for lo, hi in self.extents)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def key(self) -> str:
        """Short identifier used to tag fields computed on this grid."""
        text = repr((self.extents, self.nodes_per_axis))
        return hashlib.sha1(text.encode()).hexdigest()[:12]

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        out = []
        for c, d, n in zip(self.centers, self.spacing, self.nodes_per_axis):
            out.append(c + (np.arange(n) - (n - 1) / 2.0) * d)
        return tuple(out)

    @cached_property
    def points(self) -> np.ndarray:
        """(size, dimension) array of node coordinates."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.dimension):
            index = [slice(None)] * self.dimension
            index[k] = 0
            mask[tuple(index)] = True
            index[k] = -1
            mask[tuple(index)] = True
        return mask.ravel()

    @cached_property
    def interior_index(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return tuple(n - 2 for n in self.shape)

    @property
    def interior_size(self) -> int:
        return int(np.prod(self.interior_shape))

    @cached_property
    def interior_points(self) -> np.ndarray:
        return self.points[self.interior_index]

    def restrict(self, field: np.ndarray) -> np.ndarray:
        """Full node field -> interior vector."""
        field = np.asarray(field)
        if field.shape[0] != self.size:
            raise ValueError(f"expected a field of length {self.size}, got {field.shape[0]}")
        return field[self.interior_index]

    def extend(self, vector: np.ndarray) -> np.ndarray:
        """Interior vector -> full node field, zero on the boundary shell."""
        vector = np.asarray(vector)
        if vector.shape[0] == self.size:
            return vector
        if vector.shape[0] != self.interior_size:
            raise ValueError(f"expected {self.interior_size} interior values, got {vector.shape[0]}")
        out = np.zeros((self.size,) + vector.shape[1:], dtype=vector.dtype)
        out[self.interior_index] = vector
        return out

    def node_index(self, point) -> int:
        """Flat index of the node nearest to ``point``."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        multi = []
        for k, (ax, d) in enumerate(zip(self.axes, self.spacing)):
            i = int(np.clip(np.rint((point[k] - ax[0]) / d), 0, len(ax) - 1))
            multi.append(i)
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    def map_points(self, images: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Permutation sending node ``i`` to the node at ``images[i]``.

        Raises GridNotInvariant when an image misses the node set by more
        than ``tol`` cell widths on any axis.
        """
        images = np.asarray(images, dtype=float).reshape(self.size, self.dimension)
        multi = []
        for k, (ax, d) in enumerate(zip(self.axes, self.spacing)):
            frac = (images[:, k] - ax[0]) / d
            idx = np.rint(frac)
            off = np.abs(frac - idx)
            if np.any(off > tol) or idx.min() < 0 or idx.max() > len(ax) - 1:
                raise GridNotInvariant(
                    f"involution maps nodes off the grid along axis {k} "
                    f"(max offset {off.max():.3e} cells)"
                )
            multi.append(idx.astype(np.intp))
        return np.ravel_multi_index(tuple(multi), self.shape)

    def interior_permutation(self, full_perm: np.ndarray) -> np.ndarray:
        """Restrict a node permutation that preserves the interior."""
        position = np.full(self.size, -1, dtype=np.intp)
        position[self.interior_index] = np.arange(self.interior_size)
        perm = position[full_perm[self.interior_index]]
        if np.any(perm < 0):
            raise GridNotInvariant("permutation does not preserve the interior nodes")
        return perm

    def neighbor_offsets(self, diagonal: bool = True) -> list[tuple[int, ...]]:
        """Half of the neighbor stencil (each undirected edge listed once)."""
        offsets = []
        for off in itertools.product((-1, 0, 1), repeat=self.dimension):
            if not any(off):
                continue
            if not diagonal and sum(abs(o) for o in off) != 1:
                continue
            # keep the lexicographically positive half
            first = next(o for o in off if o != 0)
            if first > 0:
                offsets.append(off)
        return offsets

    def edges(self, diagonal: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Undirected edges ``(i, j, euclidean_length)`` of the neighbor graph."""
        idx = np.arange(self.size).reshape(self.shape)
        rows, cols, lengths = [], [], []
        for off in self.neighbor_offsets(diagonal):
            src = [slice(None)] * self.dimension
            dst = [slice(None)] * self.dimension
            for k, o in enumerate(off):
                if o > 0:
                    src[k], dst[k] = slice(0, -o), slice(o, None)
                elif o < 0:
                    src[k], dst[k] = slice(-o, None), slice(0, o)
            length = float(np.sqrt(sum((o * d) ** 2 for o, d in zip(off, self.spacing))))
            a = idx[tuple(src)].ravel()
            b = idx[tuple(dst)].ravel()
            rows.append(a)
            cols.append(b)
            lengths.append(np.full(a.size, length))
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(lengths)
