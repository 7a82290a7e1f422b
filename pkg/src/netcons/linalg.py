"""Tolerance-aware dense linear algebra.

Kernels, images and intersections are returned as :class:`SubspaceBasis`
objects holding an orthonormal basis. Rank decisions keep singular values
``s > max(tol * s_max, ABS_FLOOR)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from .exceptions import AmbientMismatch, DimensionMismatch, NotSPD, NotSymmetric

ABS_FLOOR = 1e-12
RANK_TOL = 1e-9
CLUSTER_TOL = 1e-7
HAUTUS_THRESHOLD = 30


@dataclass(frozen=True)
class SubspaceBasis:
    basis: np.ndarray
    ambient_dim: int
    tol: float = RANK_TOL

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_trivial(self) -> bool:
        return self.dim == 0

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.T @ x)

    def distance(self, x: np.ndarray) -> np.ndarray:
        """Euclidean distance of ``x`` (vector or column stack) to the subspace."""
        return np.linalg.norm(x - self.project(x), axis=0)

    def contains(self, x: np.ndarray, tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.distance(x) <= tol * np.maximum(np.linalg.norm(x, axis=0), 1.0)))

    @classmethod
    def empty(cls, ambient_dim: int, tol: float = RANK_TOL) -> SubspaceBasis:
        return cls(np.zeros((ambient_dim, 0)), ambient_dim, tol)

    @classmethod
    def full(cls, ambient_dim: int, tol: float = RANK_TOL) -> SubspaceBasis:
        return cls(np.eye(ambient_dim), ambient_dim, tol)


def _threshold(s: np.ndarray, tol: float) -> float:
    return max(tol * (s[0] if s.size else 0.0), ABS_FLOOR)


def _as_2d(A) -> np.ndarray:
    A = np.asarray(A)
    if not np.iscomplexobj(A):
        A = A.astype(float)
    if A.ndim == 1:
        A = A[None, :]
    return A


def kernel(A, tol: float = RANK_TOL) -> SubspaceBasis:
    A = _as_2d(A)
    d = A.shape[1]
    if A.shape[0] == 0 or d == 0:
        return SubspaceBasis.full(d, tol)
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > _threshold(s, tol)))
    return SubspaceBasis(vh[rank:].conj().T, d, tol)


def image(A, tol: float = RANK_TOL) -> SubspaceBasis:
    A = _as_2d(A)
    d = A.shape[0]
    if A.shape[1] == 0 or d == 0:
        return SubspaceBasis.empty(d, tol)
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > _threshold(s, tol)))
    return SubspaceBasis(u[:, :rank], d, tol)


def rank(A, tol: float = RANK_TOL) -> int:
    A = _as_2d(A)
    return A.shape[1] - kernel(A, tol).dim


def span(vectors, tol: float = RANK_TOL) -> SubspaceBasis:
    """Orthonormal basis spanned by ``vectors``: a list of vectors or a matrix of columns."""
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        return image(vectors, tol)
    return image(np.column_stack(vectors), tol)


def intersect(*spaces: SubspaceBasis, tol: float | None = None) -> SubspaceBasis:
    """Intersection of subspaces as the kernel of stacked complement projectors."""
    if not spaces:
        raise ValueError("intersect needs at least one subspace")
    d = spaces[0].ambient_dim
    if any(S.ambient_dim != d for S in spaces):
        raise AmbientMismatch("subspaces live in different ambient spaces")
    tol = max(S.tol for S in spaces) if tol is None else tol
    if any(S.is_trivial for S in spaces):
        return SubspaceBasis.empty(d, tol)
    # absolute scale: complement projectors have unit norm
    stacked = np.vstack([np.eye(d) - S.projector() for S in spaces])
    _, s, vh = np.linalg.svd(stacked, full_matrices=True)
    k = int(np.sum(s > max(tol, ABS_FLOOR)))
    basis = vh[k:].T
    return SubspaceBasis(basis, d, tol)


def pseudoinverse(A, tol: float = RANK_TOL) -> np.ndarray:
    A = _as_2d(A)
    u, s, vh = np.linalg.svd(A, full_matrices=False)
    keep = s > _threshold(s, tol)
    return (vh[keep].T / s[keep]) @ u[:, keep].T


@dataclass(frozen=True)
class EigenPair:
    eigenvalue: float
    eigenvectors: SubspaceBasis

    @property
    def multiplicity(self) -> int:
        return self.eigenvectors.dim


def cluster_values(values: np.ndarray, tol: float = CLUSTER_TOL) -> list[np.ndarray]:
    """Group sorted real values whose neighbours differ by at most ``tol * max(1, |v|)``."""
    order = np.argsort(values)
    groups: list[list[int]] = []
    for i in order:
        if groups and abs(values[i] - values[groups[-1][-1]]) <= tol * max(1.0, abs(values[i])):
            groups[-1].append(int(i))
        else:
            groups.append([int(i)])
    return [np.array(g) for g in groups]


def _sym_sqrt_inv(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam, V = np.linalg.eigh(M)
    if lam[0] <= 0:
        raise NotSPD("mass matrix is not positive definite")
    return (V / np.sqrt(lam)) @ V.T, (V * np.sqrt(lam)) @ V.T


def generalized_eigs(L, M, tol: float = CLUSTER_TOL) -> list[EigenPair]:
    """Eigenspaces of ``M^{-1} L`` for symmetric PSD ``L`` and SPD ``M``.

    Solved through the symmetric matrix ``M^{-1/2} L M^{-1/2}``; eigenvectors
    are mapped back to the original coordinates and orthonormalised per
    eigenspace.
    """
    L = np.asarray(L, dtype=float)
    M = np.asarray(M, dtype=float)
    if L.shape != M.shape or L.shape[0] != L.shape[1]:
        raise DimensionMismatch("L and M must be square and of equal size")
    for X, name in ((L, "L"), (M, "M")):
        if np.linalg.norm(X - X.T) > tol * max(1.0, float(np.linalg.norm(X))):
            raise NotSymmetric(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NotSPD("M is not symmetric positive definite") from None
    Mih, _ = _sym_sqrt_inv((M + M.T) / 2)
    S = Mih @ L @ Mih
    lam, U = np.linalg.eigh((S + S.T) / 2)
    scale = max(1.0, float(np.abs(lam).max())) if lam.size else 1.0
    pairs = []
    for g in cluster_values(lam, tol):
        mu = float(np.mean(lam[g]))
        if abs(mu) <= tol * scale:
            mu = 0.0
        X = Mih @ U[:, g]
        q, _ = np.linalg.qr(X)
        pairs.append(EigenPair(mu, SubspaceBasis(q, L.shape[0], tol)))
    return pairs


def eigenspaces_general(X, tol: float = CLUSTER_TOL, rank_tol: float = RANK_TOL) -> list[EigenPair]:
    """Eigenspaces of a real diagonalizable matrix with real spectrum.

    Uses the unsymmetric eigensolver for the eigenvalues and an SVD kernel of
    ``X - mu I`` for each cluster, so it shares no factorisation with
    :func:`generalized_eigs`.
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[0]
    lam = np.linalg.eigvals(X).real
    pairs = []
    for g in cluster_values(lam, tol):
        mu = float(np.mean(lam[g]))
        # diagonalizable: the eigenspace has the cluster size as dimension
        _, _, vh = np.linalg.svd(X - mu * np.eye(d))
        pairs.append(EigenPair(mu, SubspaceBasis(vh[d - len(g):].T, d, rank_tol)))
    return pairs


def observability_matrix(C, A) -> np.ndarray:
    C = _as_2d(C)
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if A.shape != (d, d) or C.shape[1] != d:
        raise DimensionMismatch(f"C is {C.shape}, A is {A.shape}")
    blocks = [C]
    for _ in range(d - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def _observability_kernel_stacked(C: np.ndarray, A: np.ndarray, tol: float) -> SubspaceBasis:
    """Orthogonal complement of the row space of ``[C; CA; CA^2; ...]``.

    The row space is grown one block at a time by applying ``A^T`` to the
    newest orthonormal directions and re-orthogonalising, which never forms
    explicit powers of ``A``.
    """
    d = A.shape[0]
    a = np.linalg.norm(A, 2)
    At = A.T / a if a > 0 else A.T
    Q = image(C.T, tol).basis
    new = Q
    while new.shape[1] and Q.shape[1] < d:
        X = At @ new
        for _ in range(2):
            X = X - Q @ (Q.T @ X)
        if X.shape[1] == 0:
            break
        u, s, _ = np.linalg.svd(X, full_matrices=False)
        new = u[:, s > max(tol, ABS_FLOOR)]
        Q = np.hstack([Q, new])
    if Q.shape[1] == 0:
        return SubspaceBasis.full(d, tol)
    return kernel(Q.T, tol)


def _observability_kernel_hautus(C: np.ndarray, A: np.ndarray, tol: float,
                                 cluster_tol: float = 1e-6) -> SubspaceBasis:
    """Unobservable subspace assembled eigenvalue by eigenvalue.

    For each distinct eigenvalue ``lam`` with index ``nu`` the piece is
    ``{x in ker (A - lam)^nu : C (A - lam)^j x = 0, j < nu}``; for a
    semisimple eigenvalue this is the Hautus kernel ``ker [A - lam I; C]``.
    """
    d = A.shape[0]
    ev = np.linalg.eigvals(A)
    scale = max(1.0, float(np.abs(ev).max()))
    remaining = list(range(d))
    clusters: list[list[int]] = []
    while remaining:
        i = remaining.pop(0)
        grp = [i] + [j for j in remaining if abs(ev[j] - ev[i]) <= cluster_tol * scale]
        remaining = [j for j in remaining if j not in grp]
        clusters.append(grp)
    vectors = []
    done: list[complex] = []
    for grp in clusters:
        lam = complex(np.mean(ev[grp]))
        if any(abs(lam.conjugate() - mu) <= cluster_tol * scale for mu in done):
            continue
        done.append(lam)
        if abs(lam.imag) <= cluster_tol * scale:
            lam = lam.real
        N = A - lam * np.eye(d)
        # algebraic multiplicity bounds the index of lam
        nu = len(grp)
        rows = [np.linalg.matrix_power(N, nu)] + [C @ np.linalg.matrix_power(N, j) for j in range(nu)]
        K = kernel(np.vstack(rows), tol).basis
        if K.shape[1]:
            vectors += [K.real, K.imag]
    if not vectors:
        return SubspaceBasis.empty(d, tol)
    return image(np.hstack(vectors), 1e-8)


def observability_kernel(C, A, tol: float = RANK_TOL, method: str = "auto") -> SubspaceBasis:
    """Unobservable subspace of the pair ``(C, A)``.

    ``method`` is ``"stacked"`` (kernel of ``[C; CA; ...]``), ``"hautus"``
    (eigenvalue-wise rank test) or ``"auto"`` (stacked up to dimension 30).
    """
    C = _as_2d(C)
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if A.shape != (d, d) or C.shape[1] != d:
        raise DimensionMismatch(f"C is {C.shape}, A is {A.shape}")
    if method == "auto":
        method = "stacked" if d <= HAUTUS_THRESHOLD else "hautus"
    if method == "stacked":
        return _observability_kernel_stacked(C, A, tol)
    if method == "hautus":
        return _observability_kernel_hautus(C, A, tol)
    raise ValueError(f"unknown method {method!r}")
