"""Double-well potentials, the parity map, well geometry and well filling."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from ptwell.errors import (
    BallsOverlap,
    FillInsufficient,
    WellCountMismatch,
    WellsNotExchanged,
    WellTouchesBoundary,
)
from ptwell.grid import Grid

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Reflection:
    """Coordinate reflection ``x[axis] -> 2*center - x[axis]``."""

    axis: int = 0
    center: float = 0.0

    def __call__(self, points: np.ndarray) -> np.ndarray:
        out = np.array(points, dtype=float, copy=True)
        out[..., self.axis] = 2.0 * self.center - out[..., self.axis]
        return out


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Real potential ``v0``, antisymmetric perturbation ``w`` and the parity map.

    ``v0`` and ``w`` take an ``(n, dimension)`` array of points and return
    ``n`` values.
    """

    dimension: int
    v0: Field
    w: Field
    involution: Reflection
    domain_box: tuple[tuple[float, float], ...]
    energy_level: float = 0.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def v0_on(self, grid: Grid) -> np.ndarray:
        return np.asarray(self.v0(grid.points), dtype=float)

    def w_on(self, grid: Grid) -> np.ndarray:
        values = np.asarray(self.w(grid.points), dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("W is not bounded on the domain box")
        return values


def quartic_1d(well=1.0, offset=0.0, coupling=1.0, extent=3.0) -> PotentialSpec:
    """``V0 = (x^2 - well^2)^2 - offset`` with ``W = coupling * x``."""

    def v0(p):
        x = p[:, 0]
        return (x * x - well * well) ** 2 - offset

    def w(p):
        return coupling * p[:, 0]

    return PotentialSpec(
        dimension=1,
        v0=v0,
        w=w,
        involution=Reflection(0, 0.0),
        domain_box=((-extent, extent),),
        name="quartic_1d",
        params=dict(well=well, offset=offset, coupling=coupling, extent=extent),
    )


def quartic_2d(well=1.0, transverse=1.0, offset=0.0, coupling=1.0,
               extent=(3.0, 2.0)) -> PotentialSpec:
    """``V0 = (x^2 - well^2)^2 + transverse*y^2 - offset``, ``W = coupling * x * exp(-y^2)``."""

    def v0(p):
        x, y = p[:, 0], p[:, 1]
        return (x * x - well * well) ** 2 + transverse * y * y - offset

    def w(p):
        x, y = p[:, 0], p[:, 1]
        return coupling * x * np.exp(-y * y)

    ex, ey = extent
    return PotentialSpec(
        dimension=2,
        v0=v0,
        w=w,
        involution=Reflection(0, 0.0),
        domain_box=((-ex, ex), (-ey, ey)),
        name="quartic_2d",
        params=dict(well=well, transverse=transverse, offset=offset,
                    coupling=coupling, extent=list(extent)),
    )


def tabulated(path, axis: int = 0) -> PotentialSpec:
    """Load ``V0`` and ``W`` samples from a CSV file on a regular grid.

    The header names the columns: ``x,v0,w`` in 1D or ``x,y,v0,w`` in 2D.
    Values between samples are linearly interpolated. The parity map is the
    reflection along ``axis`` through the center of the sampled box.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no samples")
    coords = [c for c in ("x", "y") if c in rows[0]]
    data = {k: np.array([float(r[k]) for r in rows]) for k in coords + ["v0", "w"]}
    axes = [np.unique(data[c]) for c in coords]
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != len(rows):
        raise ValueError(f"{path}: samples do not form a regular grid")
    order = np.lexsort(tuple(data[c] for c in reversed(coords)))
    v0_table = data["v0"][order].reshape(shape)
    w_table = data["w"][order].reshape(shape)
    box = tuple((float(a[0]), float(a[-1])) for a in axes)

    if len(coords) == 1:
        def v0(p):
            return np.interp(p[:, 0], axes[0], v0_table)

        def w(p):
            return np.interp(p[:, 0], axes[0], w_table)
    else:
        v0_i = RegularGridInterpolator(axes, v0_table)
        w_i = RegularGridInterpolator(axes, w_table)

        def v0(p):
            return v0_i(p)

        def w(p):
            return w_i(p)

    center = 0.5 * (box[axis][0] + box[axis][1])
    return PotentialSpec(
        dimension=len(coords),
        v0=v0,
        w=w,
        involution=Reflection(axis, center),
        domain_box=box,
        name="tabulated",
        params=dict(path=str(path)),
    )


FAMILIES = {"quartic_1d": quartic_1d, "quartic_2d": quartic_2d, "tabulated": tabulated}


# -- symmetry ---------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryReport:
    involution_residual: float
    v0_residual: float
    w_residual: float
    v0_scale: float
    w_scale: float
    tolerance: float = 1e-12

    @property
    def v0_relative(self) -> float:
        return self.v0_residual / self.v0_scale if self.v0_scale > 0 else self.v0_residual

    @property
    def w_relative(self) -> float:
        return self.w_residual / self.w_scale if self.w_scale > 0 else self.w_residual

    @property
    def passed(self) -> bool:
        return max(self.involution_residual, self.v0_relative, self.w_relative) <= self.tolerance


def parity_permutation(spec: PotentialSpec, grid: Grid) -> np.ndarray:
    """Node permutation induced by the involution (raises GridNotInvariant)."""
    return grid.map_points(spec.involution(grid.points))


def validate_symmetry(spec: PotentialSpec, grid: Grid) -> SymmetryReport:
    pts = grid.points
    images = spec.involution(pts)
    grid.map_points(images)
    back = spec.involution(images)
    cell = min(grid.spacing)
    inv_res = float(np.max(np.abs(back - pts))) / cell
    v0 = spec.v0(pts)
    w = spec.w(pts)
    v0_res = float(np.max(np.abs(spec.v0(images) - v0)))
    w_res = float(np.max(np.abs(spec.w(images) + w)))
    return SymmetryReport(
        involution_residual=inv_res,
        v0_residual=v0_res,
        w_residual=w_res,
        v0_scale=float(np.max(np.abs(v0))),
        w_scale=float(np.max(np.abs(w))),
    )


# -- wells ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WellSet:
    label: int
    cells: np.ndarray
    representative: int

    def __len__(self):
        return len(self.cells)


class Wells(NamedTuple):
    plus: WellSet
    minus: WellSet

    def by_label(self, j: int) -> WellSet:
        return self.plus if j == 1 else self.minus


def _face_neighbor_values(values: np.ndarray, shape) -> list[np.ndarray]:
    """Values at each face neighbor, ``+inf`` past the edge of the grid."""
    arr = values.reshape(shape)
    out = []
    for k in range(len(shape)):
        for step in (1, -1):
            shifted = np.full(shape, np.inf)
            src = [slice(None)] * len(shape)
            dst = [slice(None)] * len(shape)
            if step == 1:
                src[k], dst[k] = slice(1, None), slice(0, -1)
            else:
                src[k], dst[k] = slice(0, -1), slice(1, None)
            shifted[tuple(dst)] = arr[tuple(src)]
            out.append(shifted.ravel())
    return out


def sublevel_mask(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Grid cells belonging to ``{V <= 0}``.

    Besides nodes where the samples are non-positive, a sampled local
    minimum counts when its value is below half the largest rise to a face
    neighbor: a non-negative potential that touches zero inside the cell
    (a point well between nodes) always satisfies this, while a minimum
    bounded away from zero does not once the grid resolves it.
    """
    values = np.asarray(values, dtype=float)
    neighbors = _face_neighbor_values(values, grid.shape)
    stacked = np.vstack(neighbors)
    finite = np.where(np.isfinite(stacked), stacked, -np.inf)
    local_min = np.all(stacked >= values, axis=0)
    rise = np.max(finite, axis=0) - values
    touching = local_min & (values <= 0.5 * rise)
    return (values <= 0.0) | touching


def locate_wells(spec: PotentialSpec, grid: Grid, v0: np.ndarray | None = None) -> Wells:
    """The two connected components of ``{V0 <= 0}``, labeled by parity side."""
    v0 = spec.v0_on(grid) if v0 is None else v0
    mask = sublevel_mask(v0, grid)
    labels, count = ndimage.label(mask.reshape(grid.shape))
    labels = labels.ravel()
    if count != 2:
        raise WellCountMismatch(f"expected 2 wells in {{V0 <= 0}}, found {count}")
    if np.any(mask & grid.boundary_mask):
        raise WellTouchesBoundary("a well reaches the boundary of the domain box")
    axis = spec.involution.axis
    center = spec.involution.center
    wells = []
    for lab in (1, 2):
        cells = np.flatnonzero(labels == lab)
        rep = int(cells[np.argmin(v0[cells])])
        side = 1 if grid.points[rep, axis] > center else -1
        wells.append(WellSet(side, cells, rep))
    if wells[0].label == wells[1].label:
        raise WellsNotExchanged("both wells lie on the same side of the involution")
    plus, minus = sorted(wells, key=lambda ws: -ws.label)
    perm = parity_permutation(spec, grid)
    if not np.array_equal(np.sort(perm[minus.cells]), plus.cells):
        raise WellsNotExchanged("the involution does not map U_-1 onto U_1")
    return Wells(plus, minus)


# -- filling ----------------------------------------------------------------

def smooth_step(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)

    def bump(s):
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = np.exp(-1.0 / s[pos])
        return out

    a = bump(u)
    b = bump(1.0 - u)
    return a / (a + b)


def plateau(distance: np.ndarray, delta: float) -> np.ndarray:
    """1 for ``distance < delta/3``, 0 for ``distance > delta``, smooth between."""
    return 1.0 - smooth_step((np.asarray(distance) - delta / 3.0) / (2.0 * delta / 3.0))


@dataclass(frozen=True, eq=False)
class FillSpec:
    cutoff_radius: float
    fill_strength: float
    chi: dict

    def filled_potential(self, v0: np.ndarray, j: int) -> np.ndarray:
        """``V0 + lambda*chi_{-j}``: the potential of the reference operator for well ``j``."""
        return v0 + self.fill_strength * self.chi[-j]


def build_fill(spec: PotentialSpec, grid: Grid, wells: Wells, fields, delta: float,
               v0: np.ndarray | None = None) -> FillSpec:
    """Cutoffs ``chi_j`` and a fill strength that removes the opposite well.

    ``fields`` maps a well label to its Agmon distance field (anything with a
    ``values`` array over the grid nodes).
    """
    v0 = spec.v0_on(grid) if v0 is None else v0
    d = {j: np.asarray(fields[j].values) for j in (1, -1)}
    separation = float(np.min(d[1][wells.minus.cells]))
    if delta <= 0:
        raise ValueError("cutoff radius must be positive")
    if 2.0 * delta >= separation or np.any((d[1] < delta) & (d[-1] < delta)):
        raise BallsOverlap(
            f"Agmon balls of radius {delta:g} around the wells intersect (S0 = {separation:.6g})"
        )
    chi = {j: plateau(d[j], delta) for j in (1, -1)}
    ball_max = max(float(np.max(np.abs(v0[d[j] < delta]))) for j in (1, -1))
    strength = 2.0 * max(0.0, -float(v0.min())) + ball_max + 1.0
    fill = FillSpec(delta, strength, chi)
    for j in (1, -1):
        mask = sublevel_mask(fill.filled_potential(v0, j), grid)
        if not np.array_equal(np.flatnonzero(mask), wells.by_label(j).cells):
            raise FillInsufficient(f"V0 + lambda*chi_{-j} <= 0 is not the well U_{j}")
    return fill
