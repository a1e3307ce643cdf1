"""Finite-difference assembly of ``P_eps`` and the reference operators."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ptwell.errors import WindowInvalid
from ptwell.grid import Grid
from ptwell.potentials import FillSpec, PotentialSpec, parity_permutation


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Sparse complex matrix on the interior nodes.

    ``base`` is the real symmetric part (kinetic term plus real potential);
    the full matrix is ``base + 1j*epsilon*diag(w)``.  ``parity`` is the
    interior node permutation of the involution.
    """

    base: sp.csr_matrix
    w: np.ndarray
    epsilon: float
    kind: str
    grid: Grid
    parity: np.ndarray
    h: float
    label: int = 0

    @property
    def size(self) -> int:
        return self.base.shape[0]

    @property
    def entries(self) -> sp.csr_matrix:
        if self.epsilon == 0.0:
            return self.base.astype(complex)
        return (self.base + sp.diags(1j * self.epsilon * self.w)).tocsr()

    @property
    def scale(self) -> float:
        """Largest absolute entry."""
        return float(max(abs(self.base).max(), abs(self.epsilon) * np.abs(self.w).max()))

    def with_epsilon(self, epsilon: float) -> "OperatorMatrix":
        """Same operator with another perturbation strength (``base`` is reused)."""
        return replace(self, epsilon=float(epsilon))

    def conjugate(self) -> "OperatorMatrix":
        """``P_{-eps}``, which is also the adjoint of ``P_eps``."""
        return self.with_epsilon(-self.epsilon)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.base @ v
        if self.epsilon != 0.0:
            w = self.w if v.ndim == 1 else self.w[:, None]
            out = out + 1j * self.epsilon * w * v
        return out


def laplacian_1d(n: int, spacing: float) -> sp.csr_matrix:
    """Dirichlet ``-d^2/dx^2`` on ``n`` interior nodes."""
    main = np.full(n, 2.0 / spacing**2)
    off = np.full(n - 1, -1.0 / spacing**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def kinetic(grid: Grid, h: float) -> sp.csr_matrix:
    """``-h^2 Laplacian`` as a Kronecker sum of 1D stencils."""
    shape = grid.interior_shape
    mats = [laplacian_1d(n, d) for n, d in zip(shape, grid.spacing)]
    if len(mats) == 1:
        lap = mats[0]
    else:
        lap = sp.kron(mats[0], sp.identity(shape[1])) + sp.kron(sp.identity(shape[0]), mats[1])
    return (h * h * lap).tocsr()


def _assemble(grid, spec, h, potential, kind, label, v0=None):
    if h <= 0:
        raise ValueError("h must be positive")
    base = (kinetic(grid, h) + sp.diags(grid.restrict(potential))).tocsr()
    w = grid.restrict(spec.w_on(grid))
    parity = grid.interior_permutation(parity_permutation(spec, grid))
    return OperatorMatrix(base, w, 0.0, kind, grid, parity, float(h), label)


def assemble(grid: Grid, spec: PotentialSpec, h: float, epsilon: float = 0.0,
             v0: np.ndarray | None = None) -> OperatorMatrix:
    """``P_eps = -h^2 Laplacian + V0 + i*eps*W`` with Dirichlet truncation."""
    v0 = spec.v0_on(grid) if v0 is None else v0
    op = _assemble(grid, spec, h, v0, "full", 0)
    return op.with_epsilon(epsilon)


def assemble_reference(grid: Grid, spec: PotentialSpec, fill: FillSpec, h: float, j: int,
                       v0: np.ndarray | None = None) -> OperatorMatrix:
    """Reference operator ``P0 + lambda*chi_{-j}`` (real symmetric)."""
    v0 = spec.v0_on(grid) if v0 is None else v0
    return _assemble(grid, spec, h, fill.filled_potential(v0, j), "reference", j)


def essential_threshold(spec: PotentialSpec, grid: Grid) -> float:
    """Minimum of ``V0`` over the boundary shell, standing in for ``liminf V0``."""
    v0 = spec.v0_on(grid)
    return float(v0[grid.boundary_mask].min())


def check_window(center: complex, radius: float, threshold: float) -> None:
    """Reject windows reaching the essential-spectrum proxy."""
    if not np.real(center) + radius < threshold:
        raise WindowInvalid(
            f"window Re(center) + radius = {np.real(center) + radius:.6g} is not below "
            f"the essential threshold {threshold:.6g}"
        )


def permutation_matrix(perm: np.ndarray) -> sp.csr_matrix:
    n = perm.size
    return sp.csr_matrix((np.ones(n), (np.arange(n), perm)), shape=(n, n))


def pt_residual(op: OperatorMatrix) -> float:
    """``max|S conj(P) S - P|`` with ``S`` the parity permutation matrix."""
    S = permutation_matrix(op.parity)
    A = op.entries
    diff = S @ A.conjugate() @ S - A
    return float(abs(diff).max()) if diff.nnz else 0.0


def export_coo(op: OperatorMatrix, path) -> Path:
    """Write the matrix as ``row col re im`` lines (0-based indices)."""
    path = Path(path)
    A = op.entries.tocoo()
    order = np.lexsort((A.col, A.row))
    with path.open("w", newline="\n") as fh:
        fh.write(f"# n={op.size} kind={op.kind} h={op.h!r} epsilon={op.epsilon!r}\n")
        fh.write("row col re im\n")
        for r, c, v in zip(A.row[order], A.col[order], A.data[order]):
            fh.write(f"{r} {c} {float(v.real)!r} {float(v.imag)!r}\n")
    return path


def load_coo(path) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    n = None
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                n = int(line.split()[1].split("=")[1])
                continue
            if line.startswith("row"):
                continue
            r, c, re, im = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(complex(float(re), float(im)))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
