"""Lithner-Agmon distance on a grid graph.

The metric ``V0_+ dx^2`` is approximated by shortest paths on the grid graph
whose edges join axis and diagonal neighbors.  An edge costs its Euclidean
length times the endpoint average of ``sqrt(V0_+)``.  Edges inside
``{V0 <= 0}`` cost nothing, so the distance is genuinely degenerate there.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from ptwell.errors import EmptySource, GridMismatch
from ptwell.grid import Grid
from ptwell.potentials import WellSet, Wells


class WellDiameterWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class AgmonField:
    source_label: int
    values: np.ndarray
    grid_ref: str


def agmon_graph(grid: Grid, v0: np.ndarray) -> sp.csr_matrix:
    """Symmetric weighted adjacency matrix; zero-weight edges are kept."""
    root = np.sqrt(np.maximum(np.asarray(v0, dtype=float), 0.0))
    i, j, length = grid.edges(diagonal=True)
    weight = length * 0.5 * (root[i] + root[j])
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    data = np.concatenate([weight, weight])
    # built directly in CSR form so explicit zeros survive as edges
    return sp.csr_matrix((data, (rows, cols)), shape=(grid.size, grid.size))


def shortest_distances(graph: sp.csr_matrix, sources) -> np.ndarray:
    """Distance from the nearest of ``sources`` to every node."""
    sources = np.atleast_1d(np.asarray(sources, dtype=np.intp))
    if sources.size == 0:
        raise EmptySource("distance field requested from an empty source set")
    out = dijkstra(graph, directed=False, indices=sources, min_only=True)
    return np.asarray(out, dtype=float)


def agmon_distance_field(grid: Grid, v0: np.ndarray, source: WellSet,
                         graph: sp.csr_matrix | None = None) -> AgmonField:
    if source is None or len(source.cells) == 0:
        raise EmptySource("well has no cells")
    graph = agmon_graph(grid, v0) if graph is None else graph
    values = shortest_distances(graph, source.cells)
    values[source.cells] = 0.0
    return AgmonField(source.label, values, grid.key)


def well_separation(field: AgmonField, wells: Wells, target: int | None = None) -> float:
    """``S0``: the distance from the field's source well to the other well."""
    target = -field.source_label if target is None else target
    cells = wells.by_label(target).cells
    if cells.max() >= field.values.size:
        raise GridMismatch("well cells do not index the field's grid")
    return float(np.min(field.values[cells]))


def well_diameter(grid: Grid, v0: np.ndarray, well: WellSet,
                  graph: sp.csr_matrix | None = None, warn: bool = True) -> float:
    """Largest pairwise Agmon distance between cells of ``well``.

    One shortest-path run per well cell; wells are a handful of cells.
    A warning is issued when the diameter exceeds the one-cell quadrature
    slack ``max(spacing) * max sqrt(V0_+)`` over the well and its neighbors.
    """
    graph = agmon_graph(grid, v0) if graph is None else graph
    cells = np.asarray(well.cells)
    if cells.size <= 1:
        return 0.0
    dist = dijkstra(graph, directed=False, indices=cells)
    diameter = float(np.max(dist[:, cells]))
    if warn:
        closure = np.unique(np.concatenate([cells, graph[cells].indices]))
        slack = max(grid.spacing) * float(np.sqrt(np.maximum(v0[closure], 0.0)).max())
        if diameter > slack:
            warnings.warn(
                f"well U_{well.label} has Agmon diameter {diameter:.3e} > one-cell slack {slack:.3e}",
                WellDiameterWarning,
                stacklevel=2,
            )
    return diameter


@dataclass(frozen=True)
class EnvelopeReport:
    statistic: float
    argmax: int
    slack: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.slack


def decay_envelope_check(u: np.ndarray, field: AgmonField, h: float, delta: float,
                         grid: Grid | None = None, slack: float | None = None) -> EnvelopeReport:
    """Exponential decay test ``max(log|u| + (1-delta) d(U, x) / h) <= slack``.

    ``u`` is rescaled to unit Euclidean norm first; it may be given on the
    interior nodes (``grid`` required) or on all nodes.  The default slack
    is ``log(number of nodes) + 5``.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    u = np.asarray(u)
    if grid is not None:
        u = grid.extend(u)
    if u.shape[0] != field.values.shape[0]:
        raise GridMismatch("field and vector live on different grids")
    mag = np.abs(u)
    mag = mag / np.linalg.norm(mag)
    slack = float(np.log(u.shape[0]) + 5.0) if slack is None else float(slack)
    support = mag > 0
    stat = np.full(mag.shape, -np.inf)
    stat[support] = np.log(mag[support]) + (1.0 - delta) * field.values[support] / h
    k = int(np.argmax(stat))
    return EnvelopeReport(float(stat[k]), k, slack)
