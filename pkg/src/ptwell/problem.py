"""One double-well scenario at one value of h, assembled end to end."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ptwell.agmon import (
    AgmonField,
    agmon_distance_field,
    agmon_graph,
    well_diameter,
    well_separation,
)
from ptwell.errors import GridNotInvariant
from ptwell.grid import Grid
from ptwell.operator import (
    OperatorMatrix,
    assemble,
    assemble_reference,
    essential_threshold,
)
from ptwell.potentials import (
    FillSpec,
    PotentialSpec,
    SymmetryReport,
    Wells,
    build_fill,
    locate_wells,
    validate_symmetry,
)
from ptwell.reduction import (
    ReducedModel,
    ReferenceSolution,
    UnperturbedBasis,
    interaction_matrix,
    reference_mode,
    unperturbed_basis,
    weight_integral,
)
from ptwell.spectra import (
    ConjugatedProjector,
    EigenPair,
    RieszProjector,
    SpectralWindow,
    eigs_window,
)

log = logging.getLogger(__name__)


class BoxTooSmallWarning(UserWarning):
    pass


@dataclass(eq=False)
class DoubleWellProblem:
    spec: PotentialSpec
    grid: Grid
    h: float
    delta: float
    v0: np.ndarray
    w: np.ndarray
    symmetry: SymmetryReport
    wells: Wells
    fields: dict
    separation: float
    diameters: dict
    fill: FillSpec
    threshold: float
    P0: OperatorMatrix
    reference_op: OperatorMatrix
    reference: ReferenceSolution
    window: SpectralWindow
    basis: UnperturbedBasis
    weight: float
    max_epsilon_ratio: float = 0.1
    workers: int = 1
    seed: int = 20240229
    _models: dict = field(default_factory=dict, repr=False)
    _projectors: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, spec: PotentialSpec, grid: Grid, h: float, delta: float, *,
              window_center="auto", window_radius="auto", contour_nodes: int = 32,
              reference_index: int = 0, max_epsilon_ratio: float = 0.1,
              workers: int = 1, seed: int = 20240229) -> "DoubleWellProblem":
        v0 = spec.v0_on(grid)
        w = spec.w_on(grid)
        symmetry = validate_symmetry(spec, grid)
        if not symmetry.passed:
            raise GridNotInvariant(
                f"symmetry residuals too large: involution {symmetry.involution_residual:.2e}, "
                f"V0 {symmetry.v0_relative:.2e}, W {symmetry.w_relative:.2e}"
            )
        wells = locate_wells(spec, grid, v0)
        graph = agmon_graph(grid, v0)
        fields = {j: agmon_distance_field(grid, v0, wells.by_label(j), graph) for j in (1, -1)}
        separation = well_separation(fields[1], wells)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            diameters = {j: well_diameter(grid, v0, wells.by_label(j), graph, warn=False)
                         for j in (1, -1)}
        to_boundary = float(fields[1].values[grid.boundary_mask].min())
        if to_boundary < 2 * separation:
            warnings.warn(
                f"Agmon distance from the wells to the box boundary ({to_boundary:.3g}) "
                f"is below 2*S0 ({2 * separation:.3g})",
                BoxTooSmallWarning,
                stacklevel=2,
            )
        fill = build_fill(spec, grid, wells, fields, delta, v0)
        threshold = essential_threshold(spec, grid)
        P0 = assemble(grid, spec, h, 0.0, v0)
        ref_op = assemble_reference(grid, spec, fill, h, 1, v0)
        anchor = int(np.searchsorted(grid.interior_index, wells.plus.representative))
        reference = reference_mode(ref_op, anchor=anchor, index=reference_index)
        center = reference.mu_tilde if window_center == "auto" else complex(window_center)
        radius = reference.gap / 2 if window_radius == "auto" else float(window_radius)
        window = SpectralWindow(center, radius, contour_nodes)
        window.validate(threshold)
        basis = unperturbed_basis(P0, window, reference, RieszProjector(P0, window, workers))
        weight = weight_integral(basis.e[0], w, grid, wells.plus)
        log.info("h=%g S0=%.6g mu~=%.10g t=%.6g I_W=%.6g", h, separation,
                 reference.mu_tilde, abs(basis.t), weight)
        return cls(spec, grid, h, delta, v0, w, symmetry, wells, fields, separation,
                   diameters, fill, threshold, P0, ref_op, reference, window, basis,
                   weight, max_epsilon_ratio, workers, seed)

    @property
    def t(self) -> complex:
        return self.basis.t

    @property
    def mu(self) -> float:
        return self.basis.mu

    @property
    def max_epsilon(self) -> float:
        return self.max_epsilon_ratio * self.window.radius

    @property
    def scale(self) -> float:
        return self.window.scale

    @property
    def epsilon_predicted(self) -> float:
        from ptwell.bifurcation import predict_threshold

        return predict_threshold(self.t, self.weight)

    def operator(self, epsilon: float) -> OperatorMatrix:
        return self.P0.with_epsilon(epsilon)

    def projector(self, epsilon: float):
        """Riesz projector of ``P_eps``; ``-eps`` shares the factorizations of ``+eps``."""
        key = abs(float(epsilon))
        if key not in self._projectors:
            # factorizations are large in 2D: keep only the latest strength
            self._projectors.clear()
            self._projectors[key] = RieszProjector(self.operator(key), self.window, self.workers)
        base = self._projectors[key]
        return base if epsilon >= 0 else ConjugatedProjector(base)

    def model(self, epsilon: float) -> ReducedModel:
        key = float(epsilon)
        if key not in self._models:
            self._models[key] = interaction_matrix(
                self.operator(key), None, self.window, self.basis,
                projector=self.projector(key),
                max_ratio=self.max_epsilon_ratio, workers=self.workers,
            )
        return self._models[key]

    def clear_cache(self) -> None:
        self._models.clear()
        self._projectors.clear()

    def direct(self, epsilon: float, structured: bool = True) -> list[EigenPair]:
        return eigs_window(self.operator(epsilon), self.window, structured=structured,
                           seed=self.seed)

    def anchor_field(self, label: int = 1) -> AgmonField:
        return self.fields[label]

    def summary(self) -> dict:
        return {
            "h": self.h,
            "S0": self.separation,
            "mu_tilde": self.reference.mu_tilde,
            "gap": self.reference.gap,
            "mu": self.mu,
            "t_re": self.t.real,
            "t_im": self.t.imag,
            "abs_t": abs(self.t),
            "I_W": self.weight,
            "fill_strength": self.fill.fill_strength,
            "delta": self.delta,
            "window_center": float(np.real(self.window.center)),
            "window_radius": self.window.radius,
            "contour_nodes": self.window.contour_nodes,
            "essential_threshold": self.threshold,
            "epsilon_plus_predicted": self.epsilon_predicted,
            "max_epsilon": self.max_epsilon,
            "diameter_plus": self.diameters[1],
            "diameter_minus": self.diameters[-1],
        }
