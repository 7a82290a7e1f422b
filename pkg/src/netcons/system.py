"""Closed-loop matrices, equilibrium, shifted model and Kron reduction.

State ordering everywhere is ``z = (p, q)`` with ``p`` stacked per node in
the user's node order (``r`` entries per node) and ``q`` stacked per edge.
The damped-first permutation needed for the block decomposition of the
Laplacian is internal; :attr:`SystemMatrices.perm` records it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import NoDampedNode, SingularDampedBlock
from .graph import (
    DEFAULT_TOL,
    EdgePartition,
    NetworkSpec,
    NodeClass,
    classify_nodes,
    fundamental_cycle_matrix,
    incidence_matrix,
    kron_lift,
    partition_edges,
)


def _lifted(idx, r: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=int)
    return (idx[:, None] * r + np.arange(r)[None, :]).ravel()


@dataclass(frozen=True)
class SystemMatrices:
    spec: NetworkSpec
    classes: tuple[NodeClass, ...]
    partition: EdgePartition
    B: np.ndarray
    C: np.ndarray
    B_lift: np.ndarray
    C_lift: np.ndarray
    M: np.ndarray
    R: np.ndarray
    W: np.ndarray
    v: np.ndarray
    L_total: np.ndarray
    A_closed: np.ndarray
    G: np.ndarray
    damped: np.ndarray
    undamped: np.ndarray
    blocks: dict[str, np.ndarray]

    @property
    def r(self) -> int:
        return self.spec.dimension

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def state_dim(self) -> int:
        return self.r * (self.n + self.m)

    @property
    def perm(self) -> np.ndarray:
        """Node indices in damped-first order."""
        return np.concatenate([self.damped, self.undamped])

    @property
    def d_rows(self) -> np.ndarray:
        return _lifted(self.damped, self.r)

    @property
    def u_rows(self) -> np.ndarray:
        return _lifted(self.undamped, self.r)

    @property
    def ones(self) -> np.ndarray:
        """``1 (x) I_r``, shape (r*n, r)."""
        return kron_lift(np.ones((self.n, 1)), self.r)

    @property
    def M_inv(self) -> np.ndarray:
        return np.linalg.inv(self.M)

    def sub(self, X: np.ndarray, rows: str, cols: str) -> np.ndarray:
        sel = {"d": self.d_rows, "u": self.u_rows}
        return X[np.ix_(sel[rows], sel[cols])]

    @property
    def M_u(self) -> np.ndarray:
        return self.sub(self.M, "u", "u")

    @property
    def R_u(self) -> np.ndarray:
        return self.sub(self.R, "u", "u")

    @property
    def L_ii(self) -> np.ndarray:
        """Damped-by-undamped block of the Laplacian (interconnecting edges only)."""
        return self.blocks["L_ii"]

    def energy_matrix(self) -> np.ndarray:
        """``diag(M^-1, W)``; the Lyapunov function is ``z^T E z / 2``."""
        return scipy.linalg.block_diag(self.M_inv, self.W)

    def lyapunov(self, z: np.ndarray) -> np.ndarray:
        """Stored energy of (shifted) states; ``z`` is a vector or an (N, dim) stack."""
        z = np.atleast_2d(z)
        k = self.r * self.n
        p, q = z[:, :k], z[:, k:]
        U = 0.5 * np.einsum("ij,ij->i", p @ self.M_inv, p) + 0.5 * np.einsum("ij,ij->i", q @ self.W, q)
        return U

    def dissipation(self, z: np.ndarray) -> np.ndarray:
        """Analytic ``dU/dt = -p^T M^-1 R M^-1 p`` along the homogeneous flow."""
        z = np.atleast_2d(z)
        y = z[:, : self.r * self.n] @ self.M_inv
        return -np.einsum("ij,ij->i", y @ self.R, y)


def assemble(spec: NetworkSpec, tol: float = DEFAULT_TOL, signs=None) -> SystemMatrices:
    r, n, m = spec.dimension, spec.n, spec.m
    classes = tuple(classify_nodes(spec, tol))
    partition = partition_edges(spec, classes)
    B = incidence_matrix(spec, signs)
    C = fundamental_cycle_matrix(spec, B)
    Bl, Cl = kron_lift(B, r), kron_lift(C, r)
    M = scipy.linalg.block_diag(*[nd.mass for nd in spec.nodes])
    R = scipy.linalg.block_diag(*[nd.damping for nd in spec.nodes])
    W = scipy.linalg.block_diag(*[e.weight for e in spec.edges]) if m else np.zeros((0, 0))
    v = np.concatenate([nd.external_input for nd in spec.nodes])
    L = Bl @ W @ Bl.T
    Minv = np.linalg.inv(M)
    A = np.block([[-R @ Minv, -Bl @ W], [Bl.T @ Minv, np.zeros((r * m, r * m))]])
    G = np.vstack([np.eye(r * n), np.zeros((r * m, r * n))])

    damped = np.array([i for i, c in enumerate(classes) if c.is_damped], dtype=int)
    undamped = np.array([i for i, c in enumerate(classes) if not c.is_damped], dtype=int)
    dr, ur = _lifted(damped, r), _lifted(undamped, r)

    def part_laplacian(edge_idx, rows, cols):
        cols_e = _lifted(edge_idx, r)
        Bp = Bl[:, cols_e]
        Wp = W[np.ix_(cols_e, cols_e)]
        return Bp[rows] @ Wp @ Bp[cols].T

    blocks = {
        "L_dd": part_laplacian(partition.damped, dr, dr),
        "L_di": part_laplacian(partition.interconnecting, dr, dr),
        "L_ii": part_laplacian(partition.interconnecting, dr, ur),
        "L_ui": part_laplacian(partition.interconnecting, ur, ur),
        "L_uu": part_laplacian(partition.undamped, ur, ur),
    }
    return SystemMatrices(
        spec=spec, classes=classes, partition=partition, B=B, C=C, B_lift=Bl, C_lift=Cl,
        M=M, R=R, W=W, v=v, L_total=L, A_closed=A, G=G,
        damped=damped, undamped=undamped, blocks=blocks,
    )


@dataclass(frozen=True)
class Equilibrium:
    beta: np.ndarray
    p_bar: np.ndarray
    q_bar: np.ndarray

    @property
    def z_bar(self) -> np.ndarray:
        return np.concatenate([self.p_bar, self.q_bar])


def equilibrium(sys: SystemMatrices, v: np.ndarray | None = None) -> Equilibrium:
    """Unique equilibrium with edge state in ``im(B^T)``.

    ``beta = (1^T R 1)^-1 1^T v``; ``q_bar`` solves ``B W q = v - R 1 beta``
    together with ``C^T q = 0`` in one least-squares system.
    """
    v = sys.v if v is None else np.asarray(v, dtype=float)
    one = sys.ones
    S = one.T @ sys.R @ one
    try:
        beta = np.linalg.solve(S, one.T @ v)
    except np.linalg.LinAlgError:
        raise NoDampedNode("total damping is singular; no damped node") from None
    if np.linalg.cond(S) > 1e12:
        raise NoDampedNode("total damping is singular; no damped node")
    p_bar = sys.M @ one @ beta
    rhs = v - sys.R @ one @ beta
    K = np.vstack([sys.B_lift @ sys.W, sys.C_lift.T])
    q_bar = np.linalg.lstsq(K, np.concatenate([rhs, np.zeros(sys.C_lift.shape[1])]), rcond=None)[0]
    return Equilibrium(beta=beta, p_bar=p_bar, q_bar=q_bar)


def decompose_edge_state(sys: SystemMatrices, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split ``q = B^T s0 + W^-1 C gamma``; returns ``(s0, gamma)``.

    ``gamma`` is unique; ``s0`` is unique up to ``im(1 (x) I_r)`` and the
    minimum-norm representative is returned.
    """
    rn = sys.r * sys.n
    Winv_C = np.linalg.solve(sys.W, sys.C_lift) if sys.m else np.zeros((0, 0))
    K = np.hstack([sys.B_lift.T, Winv_C])
    sol = np.linalg.lstsq(K, q, rcond=None)[0]
    return sol[:rn], sol[rn:]


def cycle_shift(sys: SystemMatrices, gamma: np.ndarray) -> np.ndarray:
    """Edge-state offset ``W^-1 C gamma``."""
    return np.linalg.solve(sys.W, sys.C_lift @ gamma)


def shift_to_origin(sys: SystemMatrices, eq: Equilibrium, z0: np.ndarray) -> np.ndarray:
    """Shifted state ``z0 - z_bar`` after removing the cycle-space part of ``q(0)``."""
    z0 = np.asarray(z0, dtype=float)
    rn = sys.r * sys.n
    p0, q0 = z0[:rn], z0[rn:]
    _, gamma = decompose_edge_state(sys, q0)
    q_star = q0 - cycle_shift(sys, gamma) if gamma.size else q0
    return np.concatenate([p0 - eq.p_bar, q_star - eq.q_bar])


@dataclass(frozen=True)
class ReducedSystem:
    """Undamped-node pairs obtained by eliminating the damped nodes.

    ``A_hat``/``C_hat``/``C_hat_ext`` act on ``(y_u, s_u)``; ``Q_hat`` maps
    that pair to the full shifted state ``(p, q)`` in user node order.
    ``A_breve``/``C_breve`` act on ``(p_u, q)``; ``Q_breve`` embeds that pair.
    """

    sys: SystemMatrices
    L_tilde_u: np.ndarray
    A_hat: np.ndarray
    C_hat: np.ndarray
    C_hat_ext: np.ndarray
    Q_hat: np.ndarray
    A_breve: np.ndarray
    C_breve: np.ndarray
    Q_breve: np.ndarray
    B_breve: np.ndarray
    W_breve: np.ndarray

    @property
    def r(self) -> int:
        return self.sys.r

    @property
    def M_u(self) -> np.ndarray:
        return self.sys.M_u

    @property
    def R_u(self) -> np.ndarray:
        return self.sys.R_u

    @property
    def L_ii(self) -> np.ndarray:
        return self.sys.L_ii

    @property
    def undamped_ids(self) -> list[str]:
        ids = self.sys.spec.node_ids
        return [ids[i] for i in self.sys.undamped]

    @property
    def ones_u(self) -> np.ndarray:
        return kron_lift(np.ones((len(self.sys.undamped), 1)), self.r)


def kron_reduce(sys: SystemMatrices) -> ReducedSystem:
    r = sys.r
    L = sys.L_total
    Ldd = sys.sub(L, "d", "d")
    Lii = sys.L_ii
    Luu = sys.sub(L, "u", "u")
    try:
        factor = scipy.linalg.cho_factor(Ldd)
    except np.linalg.LinAlgError:
        raise SingularDampedBlock("damped Laplacian block is singular") from None
    X = scipy.linalg.cho_solve(factor, Lii)
    Lt = Luu - Lii.T @ X
    Lt = (Lt + Lt.T) / 2

    nu = len(sys.undamped) * r
    Mu, Ru = sys.M_u, sys.R_u
    Mu_inv = np.linalg.inv(Mu)
    I, Z = np.eye(nu), np.zeros((nu, nu))
    A_hat = np.block([[Z, -Mu_inv @ Lt], [I, Z]])
    C_hat = np.block([[Lii, np.zeros_like(Lii)], [Ru, Z]])
    ones_u = kron_lift(np.ones((len(sys.undamped), 1)), r)
    C_hat_ext = np.vstack([C_hat, np.hstack([np.zeros((r, nu)), ones_u.T @ Mu])])

    Bd, Bu = sys.B_lift[sys.d_rows], sys.B_lift[sys.u_rows]
    rn, rm = r * sys.n, r * sys.m
    Q_hat = np.zeros((rn + rm, 2 * nu))
    Q_hat[sys.u_rows, :nu] = Mu
    Q_hat[rn:, nu:] = Bu.T - Bd.T @ X

    A_breve = np.block([[np.zeros((nu, nu)), -Bu @ sys.W], [Bu.T @ Mu_inv, np.zeros((rm, rm))]])
    C_breve = np.vstack([
        np.hstack([np.zeros((Bd.shape[0], nu)), Bd @ sys.W]),
        np.hstack([Ru @ Mu_inv, np.zeros((nu, rm))]),
        np.hstack([np.zeros((sys.C_lift.shape[1], nu)), sys.C_lift.T]),
    ])
    Q_breve = np.zeros((rn + rm, nu + rm))
    Q_breve[sys.u_rows, :nu] = np.eye(nu)
    Q_breve[rn:, nu:] = np.eye(rm)
    B_breve = np.block([[np.zeros((nu, nu)), -Bu], [Bu.T, np.zeros((rm, rm))]])
    W_breve = scipy.linalg.block_diag(Mu_inv, sys.W)
    return ReducedSystem(
        sys=sys, L_tilde_u=Lt, A_hat=A_hat, C_hat=C_hat, C_hat_ext=C_hat_ext, Q_hat=Q_hat,
        A_breve=A_breve, C_breve=C_breve, Q_breve=Q_breve, B_breve=B_breve, W_breve=W_breve,
    )
