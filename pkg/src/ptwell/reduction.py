"""Reduction of the tunneling doublet to a 2x2 interaction matrix.

Index 0 of every pair and of the 2x2 matrices refers to the well ``U_1``,
index 1 to ``U_-1``.  Inner products are the grid sums scaled by the cell
volume, ``(u|v) = sum(u * conj(v)) * dV``, so they approximate L^2 integrals.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from ptwell.errors import (
    DualIllConditioned,
    EpsilonTooLarge,
    GramIllConditioned,
    NonPositiveWeight,
    NotSimple,
    SymmetryViolation,
    WindowInvalid,
)
from ptwell.grid import Grid
from ptwell.operator import OperatorMatrix
from ptwell.spectra import RieszProjector, SpectralWindow, eigs_window


class WeightWarning(UserWarning):
    pass


def inner(u: np.ndarray, v: np.ndarray, grid: Grid) -> complex:
    return complex(np.vdot(v, u) * grid.cell_volume)


def norm(u: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(np.vdot(u, u).real * grid.cell_volume))


def gram(vectors, grid: Grid) -> np.ndarray:
    """``G[j, k] = (v_j | v_k)``."""
    V = np.column_stack(vectors)
    return (V.T @ V.conj()) * grid.cell_volume


def sqrtm_2x2(G: np.ndarray) -> np.ndarray:
    """Principal square root of a 2x2 Hermitian positive definite matrix."""
    s = np.sqrt(np.linalg.det(G).real)
    t = np.sqrt(np.trace(G).real + 2.0 * s)
    return (G + s * np.eye(2)) / t


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    mu_tilde: float
    e_tilde: tuple[np.ndarray, np.ndarray]
    gap: float
    residual: float
    eigenvalues: np.ndarray


def reference_mode(ref_op: OperatorMatrix, window: SpectralWindow | None = None, *,
                   anchor: int, index: int = 0, count: int = 6) -> ReferenceSolution:
    """Simple eigenvalue of the single-well reference operator ``P~_1``.

    Without a window the ``index``-th lowest eigenvalue is taken; with one,
    the ``index``-th eigenvalue inside it.  ``anchor`` is the interior index
    of the representative node of ``U_1`` where the mode is made positive.
    The partner mode for ``U_-1`` is the parity image, not a second solve.
    """
    grid = ref_op.grid
    A = ref_op.base
    vmin = float(A.diagonal().min() - 2 * ref_op.h**2 * sum(1 / d**2 for d in grid.spacing))
    sigma = vmin - 1.0
    k = min(max(count, index + 3), ref_op.size - 2)
    vals, vecs = spla.eigsh(A.tocsc(), k=k, sigma=sigma, which="LM",
                            v0=np.ones(ref_op.size), tol=0)
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    candidates = np.arange(vals.size)
    if window is not None:
        candidates = np.flatnonzero(window.contains(vals))
    if index >= candidates.size:
        raise WindowInvalid("reference eigenvalue index not available in the window")
    sel = candidates[index]
    mu = float(vals[sel])
    pool = vals[candidates] if window is not None else vals
    close = np.abs(pool - mu) <= 1e-10
    if np.count_nonzero(close) > 1:
        raise NotSimple(f"reference eigenvalue {mu:.12g} is not simple")
    gap = float(np.min(np.abs(np.delete(vals, sel) - mu)))
    e1 = vecs[:, sel].real.copy()
    e1 /= norm(e1, grid)
    if e1[anchor] < 0:
        e1 = -e1
    residual = float(np.linalg.norm(A @ e1 - mu * e1) * np.sqrt(grid.cell_volume))
    e_minus = e1[ref_op.parity]
    return ReferenceSolution(mu, (e1, e_minus), gap, residual, vals)


@dataclass(frozen=True, eq=False)
class UnperturbedBasis:
    e: tuple[np.ndarray, np.ndarray]
    mu: float
    t: complex
    matrix: np.ndarray
    gram: np.ndarray
    window_eigenvalues: np.ndarray

    def __iter__(self):
        yield from (self.e[0], self.e[1], self.mu, self.t)


def unperturbed_basis(P0: OperatorMatrix, window: SpectralWindow, ref: ReferenceSolution,
                      projector: RieszProjector | None = None,
                      max_condition: float = 10.0) -> UnperturbedBasis:
    """Orthonormal doublet basis of ``P0`` close to the reference modes."""
    grid = P0.grid
    pairs = eigs_window(P0, window, max_count=2)
    if len(pairs) != 2:
        raise WindowInvalid(f"window holds {len(pairs)} eigenvalues of P0, expected 2")
    projector = RieszProjector(P0, window) if projector is None else projector
    g = projector.apply(np.column_stack(ref.e_tilde))
    # Pi_0 is real for real symmetric P0; drop the quadrature's roundoff
    g = g.real
    G = gram([g[:, 0], g[:, 1]], grid).real
    cond = np.linalg.cond(G)
    if cond > max_condition:
        raise GramIllConditioned(f"Gram matrix condition number {cond:.3g} > {max_condition:g}")
    Ginv_half = np.linalg.inv(sqrtm_2x2(G))
    E = g @ Ginv_half
    e = (E[:, 0], E[:, 1])
    PE = P0.base @ E
    M0 = np.array([[inner(PE[:, k], e[j], grid) for k in range(2)] for j in range(2)])
    return UnperturbedBasis(
        e=e,
        mu=float(M0[0, 0].real),
        t=complex(M0[0, 1]),
        matrix=M0,
        gram=gram(e, grid),
        window_eigenvalues=np.array([p.value for p in pairs]),
    )


def reduced_eigenvalues(a: complex, b: complex) -> tuple[complex, complex]:
    """``Re a +- sqrt(|b|^2 - (Im a)^2)``, imaginary root when negative."""
    disc = abs(b) ** 2 - np.imag(a) ** 2
    root = np.sqrt(disc) if disc >= 0 else 1j * np.sqrt(-disc)
    return complex(np.real(a) + root), complex(np.real(a) - root)


@dataclass(frozen=True, eq=False)
class ReducedModel:
    epsilon: float
    basis_e: tuple[np.ndarray, np.ndarray]
    dual_f: tuple[np.ndarray, np.ndarray]
    matrix: np.ndarray
    symmetry_residual: float
    biorthogonality_residual: float
    dual_condition: float

    @property
    def a(self) -> complex:
        return complex(self.matrix[0, 0])

    @property
    def b(self) -> complex:
        return complex(self.matrix[0, 1])

    @property
    def eigenvalues(self) -> tuple[complex, complex]:
        return reduced_eigenvalues(self.a, self.b)

    @property
    def matrix_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)


def interaction_matrix(P_eps: OperatorMatrix, P_minus: OperatorMatrix | None,
                       window: SpectralWindow, basis: UnperturbedBasis, *,
                       projector: RieszProjector | None = None,
                       max_ratio: float = 0.1, max_condition: float = 10.0,
                       symmetry_tol: float = 1e-6, workers: int = 1) -> ReducedModel:
    """Matrix of ``P_eps`` on its doublet subspace in a biorthogonal basis.

    ``e_j = Pi_eps e_j^0`` spans the subspace.  Dual candidates
    ``g_j = Pi_{-eps} e_j^0`` span the adjoint subspace and are recombined
    with the inverse of ``B[j, k] = (g_j | e_k)`` into ``f_j`` with
    ``(f_j | e_k) = delta_jk``.  When ``P_minus`` is None the projector of
    ``P_{-eps} = conj(P_eps)`` reuses the factorizations of ``Pi_eps``.
    """
    grid = P_eps.grid
    eps = P_eps.epsilon
    if abs(eps) > max_ratio * window.radius * (1 + 1e-12):
        raise EpsilonTooLarge(
            f"|epsilon| = {abs(eps):.4g} exceeds {max_ratio:g} x window radius {window.radius:.4g}"
        )
    E0 = np.column_stack(basis.e).astype(complex)
    projector = RieszProjector(P_eps, window, workers=workers) if projector is None else projector
    E = projector.apply(E0)
    if P_minus is None:
        Gd = projector.apply_conjugate(E0)
    else:
        Gd = RieszProjector(P_minus, window, workers=workers).apply(E0)
    B = np.array([[inner(E[:, k], Gd[:, j], grid).conjugate() for k in range(2)] for j in range(2)])
    # B[j, k] = (g_j | e_k)
    cond = float(np.linalg.cond(B))
    if cond > max_condition:
        raise DualIllConditioned(f"dual Gram matrix condition number {cond:.3g} > {max_condition:g}")
    C = np.linalg.inv(B)
    F = Gd @ C.T
    PE = P_eps.matvec(E)
    M = np.array([[inner(PE[:, k], F[:, j], grid) for k in range(2)] for j in range(2)])
    biorth = np.array([[inner(F[:, j], E[:, k], grid) for k in range(2)] for j in range(2)])
    sym = max(abs(M[0, 0] - np.conj(M[1, 1])), abs(M[0, 1] - np.conj(M[1, 0])))
    scale = window.scale
    if sym > symmetry_tol * scale:
        raise SymmetryViolation(f"PT structure residual {sym:.3e} of the interaction matrix")
    return ReducedModel(
        epsilon=float(eps),
        basis_e=(E[:, 0], E[:, 1]),
        dual_f=(F[:, 0], F[:, 1]),
        matrix=M,
        symmetry_residual=float(sym),
        biorthogonality_residual=float(np.max(np.abs(biorth - np.eye(2)))),
        dual_condition=cond,
    )


def weight_integral(e1: np.ndarray, w: np.ndarray, grid: Grid, well=None) -> float:
    """``int W |e_1^0|^2 dx`` by the grid sum.

    ``w`` may be given on the interior or on all nodes.  When ``well`` is
    supplied, a warning is issued if ``W > 0`` fails somewhere on it.
    """
    w = np.asarray(w, dtype=float)
    if w.shape[0] == grid.size:
        w_full = w
        w = grid.restrict(w)
    else:
        w_full = grid.extend(w)
    value = float(np.sum(w * np.abs(e1) ** 2) * grid.cell_volume)
    if well is not None and np.any(w_full[well.cells] <= 0):
        warnings.warn(
            f"W > 0 fails on U_{well.label}; weight integral {value:.3e} comes from the tails",
            WeightWarning,
            stacklevel=2,
        )
    if value <= 0:
        raise NonPositiveWeight(f"weight integral {value:.3e} is not positive")
    return value
