"""Sparse systems on the mesh adjacency pattern, verified linear solves, the
zero-mean Neumann Poisson solve, and the smallest nonzero eigenvalue of the
finite-volume Laplacian."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .mesh import DiscreteField, Mesh

__all__ = [
    "SparseSystem",
    "SolverError",
    "assemble_edge_system",
    "stiffness_matrix",
    "solve",
    "ZeroMeanPoisson",
    "poisson_solver",
    "solve_zero_mean_poisson",
    "smallest_nonzero_eigenvalue",
    "dump_coordinate",
]


class SolverError(RuntimeError):
    """Linear solve failed to meet its residual contract."""


class _Pattern:
    """Fixed CSR sparsity (diagonal + mesh adjacency) with per-entry slots so
    repeated assemblies only rewrite the data array."""

    def __init__(self, mesh: Mesh):
        n = mesh.n_cells
        mi = len(mesh.int_K)
        rows = np.concatenate([np.arange(n), mesh.int_K, mesh.int_L])
        cols = np.concatenate([np.arange(n), mesh.int_L, mesh.int_K])
        order = np.lexsort((cols, rows))
        self.indices = cols[order]
        self.indptr = np.searchsorted(rows[order], np.arange(n + 1))
        slots = np.empty(len(order), dtype=np.int64)
        slots[order] = np.arange(len(order))
        self.slot_diag = slots[:n]
        self.slot_KL = slots[n : n + mi]
        self.slot_LK = slots[n + mi :]
        self.n = n
        self.tridiagonal = bool(np.all(np.abs(rows - cols) <= 1))


def _pattern(mesh: Mesh) -> _Pattern:
    pat = mesh._caches.get("pattern")
    if pat is None:
        pat = _Pattern(mesh)
        mesh._caches["pattern"] = pat
    return pat


@dataclass(eq=False)
class SparseSystem:
    """Square sparse matrix over cells, structurally symmetric by construction."""

    matrix: sparse.csr_matrix
    tridiagonal: bool = False

    def __post_init__(self):
        self._lu = None
        self._banded = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def offdiagonal_max(self) -> float:
        off = self.matrix - sparse.diags(self.diagonal())
        return float(off.data.max()) if off.nnz else 0.0

    def sign_pattern(self) -> tuple[float, float]:
        """(min diagonal, max off-diagonal) summary for M-matrix certificates."""
        return float(self.diagonal().min()), self.offdiagonal_max()

    def is_structurally_symmetric(self) -> bool:
        pattern = self.matrix.copy()
        pattern.data = np.ones_like(pattern.data)
        return (pattern != pattern.T).nnz == 0

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def _solve_once(self, b: np.ndarray) -> np.ndarray:
        if self.tridiagonal:
            if self._banded is None:
                n = self.n
                a = self.matrix
                ab = np.zeros((3, n))
                ab[1] = a.diagonal()
                ab[0, 1:] = a.diagonal(1)
                ab[2, :-1] = a.diagonal(-1)
                self._banded = ab
            return solve_banded((1, 1), self._banded, b, check_finite=False)
        if self._lu is None:
            try:
                self._lu = splu(self.matrix.tocsc())
            except RuntimeError as exc:
                raise SolverError(f"factorization failed: {exc}") from None
        return self._lu.solve(b)


def assemble_edge_system(
    mesh: Mesh, diag_base: np.ndarray, coeff_K: np.ndarray, coeff_L: np.ndarray
) -> SparseSystem:
    """System with entries A[K,K] = base_K + sum coeff_K over interior edges of K,
    A[K,L] = -coeff_L and A[L,K] = -coeff_K per interior edge K|L."""
    pat = _pattern(mesh)
    n = pat.n
    data = np.zeros(len(pat.indices))
    diag = diag_base + np.bincount(mesh.int_K, weights=coeff_K, minlength=n)
    diag += np.bincount(mesh.int_L, weights=coeff_L, minlength=n)
    data[pat.slot_diag] = diag
    data[pat.slot_KL] = -coeff_L
    data[pat.slot_LK] = -coeff_K
    mat = sparse.csr_matrix((data, pat.indices, pat.indptr), shape=(pat.n, pat.n))
    return SparseSystem(mat, tridiagonal=pat.tridiagonal)


def stiffness_matrix(mesh: Mesh) -> SparseSystem:
    """Singular Neumann stiffness: diag sum of tau, off-diagonal -tau."""
    tau = mesh.int_tau
    return assemble_edge_system(mesh, np.zeros(mesh.n_cells), tau, tau)


def solve(A: SparseSystem, b: np.ndarray, tol_rel: float = 1e-10) -> np.ndarray:
    """Solve A x = b and verify the residual ||Ax-b|| <= tol_rel ||b||.

    Direct factorization (banded for 1D meshes) plus iterative refinement;
    the residual contract is checked before returning.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (A.n,):
        raise ValueError(f"right-hand side length {b.shape} does not match dimension {A.n}")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side contains non-finite values")
    if tol_rel <= 0:
        raise ValueError("tol_rel must be positive")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    x = A._solve_once(b)
    r = b - A.matvec(x)
    for _ in range(3):
        rnorm = np.linalg.norm(r)
        if not np.isfinite(rnorm):
            raise SolverError("solver produced non-finite values (singular system?)")
        if rnorm <= 0.5 * tol_rel * bnorm:
            break
        x = x + A._solve_once(r)
        r = b - A.matvec(x)
    rnorm = np.linalg.norm(r)
    if not rnorm <= tol_rel * bnorm:
        raise SolverError(
            f"residual {rnorm:.3e} above {tol_rel:.1e} * ||b|| = {tol_rel * bnorm:.3e}"
        )
    return x


class ZeroMeanPoisson:
    """Prefactorized solver for the discrete Neumann Poisson problem on the
    zero-volume-weighted-mean subspace.

    The mean-zero constraint is built into an augmented saddle-point system
    (constants deflated by a Lagrange multiplier), not applied as an
    after-the-fact shift.
    """

    def __init__(self, mesh: Mesh):
        if not mesh.is_connected():
            raise SolverError("mesh is disconnected; Poisson problem is singular")
        self.mesh = mesh
        self.S = stiffness_matrix(mesh)
        n = mesh.n_cells
        vol = mesh.cell_volumes
        aug = sparse.bmat(
            [
                [self.S.matrix, vol.reshape(-1, 1)],
                [vol.reshape(1, -1), None],
            ],
            format="csc",
        )
        try:
            self._lu = splu(aug)
        except RuntimeError as exc:
            raise SolverError(f"Poisson factorization failed: {exc}") from None
        self._aug = aug
        self.n = n

    def solve_values(self, w: np.ndarray, tol_rel: float = 1e-10) -> np.ndarray:
        """z with sum m(K) z_K = 0 and -sum_sigma tau D z = m(K) w_K per cell."""
        mesh = self.mesh
        w = np.asarray(w, dtype=float)
        vol = mesh.cell_volumes
        rms = float(np.sqrt(np.dot(vol, w ** 2) / mesh.domain_measure))
        if rms == 0.0:
            return np.zeros(self.n)
        mean = float(np.dot(vol, w) / mesh.domain_measure)
        if abs(mean) > 1e-10 * rms:
            raise ValueError(f"right-hand side has nonzero mean {mean:.3e} (rms {rms:.3e})")
        b = vol * w
        bnorm = np.linalg.norm(b)
        rhs = np.concatenate([b, [0.0]])
        sol = self._lu.solve(rhs)
        flux_res = np.linalg.norm(self.S.matvec(sol[:-1]) - b)
        for _ in range(2):
            if flux_res <= 0.5 * tol_rel * bnorm:
                break
            sol = sol + self._lu.solve(rhs - self._aug @ sol)
            flux_res = np.linalg.norm(self.S.matvec(sol[:-1]) - b)
        if not flux_res <= tol_rel * bnorm:
            raise SolverError(f"Poisson residual {flux_res:.3e} above tolerance")
        return sol[:-1]

    def solve(self, rhs: DiscreteField, tol_rel: float = 1e-10) -> DiscreteField:
        return DiscreteField(self.solve_values(rhs.values, tol_rel), self.mesh)


def poisson_solver(mesh: Mesh) -> ZeroMeanPoisson:
    """Per-mesh cached ZeroMeanPoisson (factorized once)."""
    ps = mesh._caches.get("poisson")
    if ps is None:
        ps = ZeroMeanPoisson(mesh)
        mesh._caches["poisson"] = ps
    return ps


def solve_zero_mean_poisson(mesh: Mesh, rhs: DiscreteField) -> DiscreteField:
    if rhs.mesh is not mesh:
        raise ValueError("rhs lives on a different mesh")
    return poisson_solver(mesh).solve(rhs)


def smallest_nonzero_eigenvalue(mesh: Mesh, tol: float = 1e-10, max_iter: int = 200) -> float:
    """First nonzero eigenvalue of the FV Laplacian L = M^-1 S (row-scaled by
    1/m(K)), computed on the symmetrized generalized problem S x = lambda M x
    by block inverse iteration with constant-vector deflation.

    A small block with a Rayleigh-Ritz step per iteration keeps convergence
    fast even when the first eigenvalue is (nearly) degenerate, as on a disk.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ps = poisson_solver(mesh)
    vol = mesh.cell_volumes
    m_omega = mesh.domain_measure
    n = mesh.n_cells
    p = min(4, n - 1)
    rng = np.random.default_rng(1234)
    X = rng.standard_normal((n, p))

    def deflate_orthonormalize(Y):
        Y = Y - vol @ Y / m_omega  # project out constants (M-orthogonal)
        for i in range(Y.shape[1]):
            for j in range(i):
                Y[:, i] -= np.dot(vol * Y[:, j], Y[:, i]) * Y[:, j]
            norm = np.sqrt(np.dot(vol, Y[:, i] ** 2))
            if norm == 0:
                raise SolverError("eigenvalue block lost rank")
            Y[:, i] /= norm
        return Y

    X = deflate_orthonormalize(X)
    lam = float("inf")
    for _ in range(max_iter):
        Y = np.column_stack([ps.solve_values(X[:, i]) for i in range(p)])
        Y = deflate_orthonormalize(Y)
        T = Y.T @ (ps.S.matvec(Y))  # p x p Rayleigh-Ritz matrix (M-orthonormal basis)
        theta, W = np.linalg.eigh((T + T.T) / 2)
        X = Y @ W
        lam = float(theta[0])
        y1 = X[:, 0]
        res = np.linalg.norm(ps.S.matvec(y1) / vol - lam * y1)
        if res <= tol * lam * np.linalg.norm(y1):
            return lam
    raise SolverError(f"eigenvalue iteration stagnated after {max_iter} iterations (lam={lam})")


def dump_coordinate(system: SparseSystem, path) -> None:
    """Matrix dump in coordinate text format (row col value per line)."""
    coo = system.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {float(v)!r}\n")
