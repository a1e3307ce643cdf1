"""Eigenvalues in a disc and contour-integral spectral projectors."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ptwell.errors import (
    ConvergenceFailure,
    NonIdempotent,
    SolveFailure,
    WindowBoundaryHit,
    WindowInvalid,
)
from ptwell.operator import OperatorMatrix, check_window

DENSE_LIMIT = 2000
RESIDUAL_TOL = 1e-8
COALESCED_RESIDUAL_TOL = 1e-5


@dataclass(frozen=True)
class SpectralWindow:
    """Disc ``|z - center| < radius`` with an equispaced trapezoid contour."""

    center: complex
    radius: float
    contour_nodes: int = 32

    def __post_init__(self):
        if not self.radius > 0:
            raise WindowInvalid("window radius must be positive")
        if self.contour_nodes < 4:
            raise WindowInvalid("need at least 4 contour nodes")

    @property
    def scale(self) -> float:
        return abs(self.center) + self.radius

    def contains(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius

    def nodes(self, count: int | None = None) -> np.ndarray:
        # half-step offset keeps the node set closed under conjugation when
        # the center is real, and keeps nodes off the real axis
        n = self.contour_nodes if count is None else count
        theta = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        return self.center + self.radius * np.exp(1j * theta)

    def validate(self, threshold: float) -> None:
        check_window(self.center, self.radius, threshold)

    def with_nodes(self, count: int) -> "SpectralWindow":
        return SpectralWindow(self.center, self.radius, count)


@dataclass(frozen=True, eq=False)
class EigenPair:
    value: complex
    vector: np.ndarray
    residual: float
    coalesced: bool = False


# -- real form of a PT-symmetric matrix --------------------------------------

@dataclass(frozen=True, eq=False)
class RealForm:
    """``A = U R U^{-1}`` with ``R`` real, built from the parity permutation.

    Columns of ``U`` are ``e_i + e_p(i)`` and ``1j*(e_i - e_p(i))`` for each
    exchanged pair and ``e_i`` for fixed nodes; all are invariant under
    ``v -> conj(v[p])``, which commutes with a PT-symmetric ``A``.
    """

    matrix: sp.csr_matrix
    U: sp.csr_matrix

    def lift(self, vectors: np.ndarray) -> np.ndarray:
        return self.U @ vectors


def real_form(A: sp.spmatrix, parity: np.ndarray, tol: float = 1e-13) -> RealForm | None:
    """Return the real similar matrix, or None when ``A`` is not PT-symmetric."""
    n = parity.size
    idx = np.arange(n)
    if not np.array_equal(parity[parity], idx):
        return None
    lo = idx[idx < parity]
    fixed = idx[idx == parity]
    hi = parity[lo]
    m = lo.size
    cols_s = np.arange(m)
    cols_a = m + np.arange(m)
    cols_f = 2 * m + np.arange(fixed.size)
    U = sp.csr_matrix(
        (
            np.concatenate([np.ones(2 * m), 1j * np.ones(m), -1j * np.ones(m), np.ones(fixed.size)]),
            (
                np.concatenate([lo, hi, lo, hi, fixed]),
                np.concatenate([cols_s, cols_s, cols_a, cols_a, cols_f]),
            ),
        ),
        shape=(n, n),
    )
    Uinv = sp.csr_matrix(
        (
            np.concatenate([0.5 * np.ones(2 * m), -0.5j * np.ones(m), 0.5j * np.ones(m), np.ones(fixed.size)]),
            (
                np.concatenate([cols_s, cols_s, cols_a, cols_a, cols_f]),
                np.concatenate([lo, hi, lo, hi, fixed]),
            ),
        ),
        shape=(n, n),
    )
    R = (Uinv @ A @ U).tocsr()
    scale = abs(A).max() if A.nnz else 1.0
    if R.nnz and np.abs(R.data.imag).max() > tol * scale:
        return None
    R = sp.csr_matrix((R.data.real, R.indices, R.indptr), shape=R.shape)
    return RealForm(R, U)


# -- eigenvalues in a window --------------------------------------------------

def _as_matrix(A):
    if isinstance(A, OperatorMatrix):
        return A.entries, A.parity, A.scale
    if sp.issparse(A):
        A = A.tocsr()
        return A, None, float(abs(A).max()) if A.nnz else 1.0
    A = sp.csr_matrix(np.asarray(A))
    return A, None, float(abs(A).max()) if A.nnz else 1.0


def _is_pt_symmetric(M, parity, tol: float = 1e-13) -> bool:
    diff = M[parity][:, parity].conjugate() - M
    scale = abs(M).max() if M.nnz else 1.0
    return not diff.nnz or abs(diff).max() <= tol * scale


def _dense_eig(M):
    vals, vecs = sla.eig(M.toarray())
    return vals, vecs


def _start_vector(n, seed, real):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    return v if real else v + 1j * rng.standard_normal(n)


def eigs_window(A, window: SpectralWindow, max_count: int | None = None, *,
                structured: bool = True, seed: int = 20240229) -> list[EigenPair]:
    """All eigenvalues of ``A`` inside ``window`` with eigenvectors.

    Shift-invert Arnoldi about the window center (ARPACK), asking for more
    eigenvalues until one outside the window turns up.  When ``A`` carries a
    parity permutation and is PT-symmetric the iteration runs on the real
    similar matrix, so computed eigenvalues come in exact conjugate pairs.
    Dense LAPACK is used for small matrices and as a fallback below
    ``DENSE_LIMIT`` unknowns.
    """
    M, parity, scale = _as_matrix(A)
    n = M.shape[0]
    form = real_form(M, parity) if (structured and parity is not None) else None
    work = form.matrix if form is not None else M
    real = form is not None
    sigma = float(np.real(window.center)) if real else complex(window.center)

    if n <= 64:
        vals, vecs = _dense_eig(work)
    else:
        limit = n - 2
        if max_count is not None:
            limit = min(limit, max_count + 2)
        k = min(4, limit)
        v0 = _start_vector(n, seed, real)
        while True:
            try:
                vals, vecs = spla.eigs(work.tocsc(), k=k, sigma=sigma, which="LM", v0=v0, tol=0)
            except (spla.ArpackNoConvergence, spla.ArpackError) as exc:
                if n > DENSE_LIMIT:
                    raise ConvergenceFailure(f"shift-invert Arnoldi failed: {exc}") from exc
                vals, vecs = _dense_eig(work)
                break
            if not np.all(window.contains(vals)) or k >= limit:
                break
            k = min(2 * k, limit)

    margin = np.abs(np.abs(vals - window.center) - window.radius)
    if np.any(margin <= 10 * np.finfo(float).eps * window.scale):
        raise WindowBoundaryHit("an eigenvalue lies on the window contour")
    inside = np.flatnonzero(window.contains(vals))
    vals = vals[inside]
    vecs = vecs[:, inside]
    if form is not None:
        vecs = form.lift(vecs)

    order = np.lexsort((vals.imag, vals.real))
    pairs = []
    for i in order:
        v = vecs[:, i] / np.linalg.norm(vecs[:, i])
        lam = complex(vals[i])
        res = float(np.linalg.norm(M @ v - lam * v))
        others = np.delete(vals, i)
        coalesced = bool(others.size and np.min(np.abs(others - lam)) <= 1e-6 * window.scale)
        tol = (COALESCED_RESIDUAL_TOL if coalesced else RESIDUAL_TOL) * scale
        if res > tol:
            raise ConvergenceFailure(f"eigenpair residual {res:.3e} exceeds {tol:.3e}")
        pairs.append(EigenPair(lam, v, res, coalesced))
    if max_count is not None and len(pairs) > max_count:
        raise WindowInvalid(f"window holds {len(pairs)} eigenvalues, more than {max_count}")
    return pairs


# -- Riesz projection ---------------------------------------------------------

class RieszProjector:
    """Trapezoid discretization of ``(2 pi i)^{-1} \\oint (z - A)^{-1} dz``.

    One sparse LU per contour node, computed on first use and cached so that
    later vector batches cost only triangular solves.  For a PT-symmetric
    operator and a real center only the upper half of the contour is
    factored: ``(conj(z) - A)^{-1} v = conj(S (z - A)^{-1} S conj(v))``.
    """

    def __init__(self, A, window: SpectralWindow, workers: int = 1, cache: bool = True,
                 use_symmetry: bool = True):
        M, parity, _ = _as_matrix(A)
        self.matrix = M.tocsc()
        self.window = window
        self.workers = max(1, int(workers))
        self.cache = cache
        self._factors = None
        self.parity = None
        if (use_symmetry and parity is not None and np.imag(window.center) == 0
                and window.contour_nodes % 2 == 0 and _is_pt_symmetric(M, parity)):
            self.parity = parity

    @cached_property
    def _shifted_identity(self):
        return sp.identity(self.matrix.shape[0], dtype=complex, format="csc")

    @property
    def _factored_nodes(self) -> np.ndarray:
        nodes = self.window.nodes()
        return nodes[: nodes.size // 2] if self.parity is not None else nodes

    def _factor(self, z):
        try:
            return spla.splu((z * self._shifted_identity - self.matrix).tocsc(),
                             permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SolveFailure(f"resolvent factorization failed at z = {z:.6g}: {exc}") from exc

    def _solve(self, k, z, V):
        lu = self._factors[k] if self._factors is not None else self._factor(z)
        x = lu.solve(V)
        if not np.all(np.isfinite(x)):
            raise SolveFailure(f"non-finite resolvent solve at z = {z:.6g}")
        return x

    def _node_term(self, k, z, V):
        c = self.window.center
        x = self._solve(k, z, V)
        term = (z - c) * x
        if self.parity is not None:
            p = self.parity
            y = np.conj(self._solve(k, z, np.conj(V[p]))[p])
            term = term + (np.conj(z) - c) * y
        return term

    def _ensure_factors(self):
        if self._factors is None and self.cache:
            nodes = self._factored_nodes
            if self.workers > 1:
                with ThreadPoolExecutor(self.workers) as ex:
                    self._factors = list(ex.map(self._factor, nodes))
            else:
                self._factors = [self._factor(z) for z in nodes]

    def apply(self, V: np.ndarray) -> np.ndarray:
        V = np.asarray(V, dtype=complex)
        self._ensure_factors()
        nodes = self._factored_nodes
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as ex:
                terms = list(ex.map(lambda kz: self._node_term(kz[0], kz[1], V), enumerate(nodes)))
        else:
            terms = [self._node_term(k, z, V) for k, z in enumerate(nodes)]
        out = np.zeros_like(V)
        for term in terms:
            out += term
        return out / self.window.contour_nodes

    def apply_conjugate(self, V: np.ndarray) -> np.ndarray:
        """Projector of ``conj(A)`` (for our operators, of ``P_{-eps}``).

        Reuses the factorizations: with a real center the contour nodes are
        closed under conjugation, so this is ``conj(Pi conj(V))``.
        """
        if np.imag(self.window.center) != 0:
            other = RieszProjector(self.matrix.conjugate(), self.window, self.workers, self.cache)
            return other.apply(V)
        return np.conj(self.apply(np.conj(V)))

    def idempotency_residual(self, seed: int = 7) -> float:
        """``|Pi(Pi r) - Pi r|`` for a unit random probe ``r``."""
        n = self.matrix.shape[0]
        r = _start_vector(n, seed, real=False)
        r /= np.linalg.norm(r)
        p = self.apply(r)
        return float(np.linalg.norm(self.apply(p) - p))

    def check_idempotent(self, tol: float = 1e-8, seed: int = 7) -> float:
        res = self.idempotency_residual(seed)
        if res > tol:
            raise NonIdempotent(f"projector idempotency residual {res:.3e} > {tol:.1e}")
        return res


class ConjugatedProjector:
    """Projector of ``conj(A)`` sharing the factorizations of ``A``'s."""

    def __init__(self, base: RieszProjector):
        self.base = base
        self.window = base.window

    def apply(self, V):
        return self.base.apply_conjugate(V)

    def apply_conjugate(self, V):
        return self.base.apply(V)


def riesz_project(A, window: SpectralWindow, vectors, *, check: bool = True,
                  workers: int = 1) -> list[np.ndarray]:
    """Apply the spectral projector of ``A`` for ``window`` to each vector."""
    proj = RieszProjector(A, window, workers=workers)
    V = np.column_stack([np.asarray(v) for v in vectors])
    out = proj.apply(V)
    if check:
        proj.check_idempotent()
    return [out[:, k] for k in range(out.shape[1])]


def projector_rank(A, window: SpectralWindow, probes: int = 8, seed: int = 11,
                   threshold: float = 1e-6) -> int:
    """Numerical rank of the projector on random probes."""
    if probes < 4:
        raise ValueError("use at least 4 probes")
    M, _, _ = _as_matrix(A)
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((M.shape[0], probes)) + 1j * rng.standard_normal((M.shape[0], probes))
    PR = RieszProjector(M, window).apply(R)
    s = np.linalg.svd(PR, compute_uv=False)
    ref = np.linalg.svd(R, compute_uv=False)[0]
    return int(np.sum(s > threshold * ref))


def dense_spectral_projector(A, window: SpectralWindow) -> np.ndarray:
    """Projector from a full eigendecomposition (test oracle, small matrices)."""
    M, _, _ = _as_matrix(A)
    vals, vecs = sla.eig(M.toarray())
    inside = window.contains(vals).astype(float)
    return vecs @ np.diag(inside) @ np.linalg.inv(vecs)
