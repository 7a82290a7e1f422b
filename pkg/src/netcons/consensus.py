"""Output-consensus verdicts, steady-state subspace and oscillation modes.

Five verdicts are computed along independent numerical routes:

* ``obs``  - triviality of the unobservable subspace of the reduced pair
  extended with the undamped total momentum output;
* ``ii``   - eigenspaces of ``M_u^-1 L~_u`` against ``ker [L_ii; R_u]``;
* ``iii``  - eigenspaces of ``M^-1 L`` against ``ker R`` restricted to
  vectors vanishing on the damped nodes;
* ``iv``/``v`` - the same tests in the transposed coordinates
  ``L~_u M_u^-1`` and ``L M^-1``, solved with an unsymmetric eigensolver.

They must coincide; a disagreement is a numerical defect, not an outcome.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .graph import DEFAULT_TOL, NetworkSpec
from .linalg import (
    CLUSTER_TOL,
    RANK_TOL,
    SubspaceBasis,
    eigenspaces_general,
    generalized_eigs,
    image,
    intersect,
    kernel,
    observability_kernel,
)
from .system import ReducedSystem, SystemMatrices, assemble, equilibrium, kron_reduce

log = logging.getLogger(__name__)

ANGLE_TOL = 1e-6
PARTICIPATION_TOL = 1e-8


@dataclass(frozen=True)
class OscillationMode:
    frequency: float
    shape_real: np.ndarray
    shape_imag: np.ndarray
    participating_nodes: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "frequency": self.frequency,
            "shape": self.shape_real.tolist(),
            "shape_imag": self.shape_imag.tolist(),
            "nodes": list(self.participating_nodes),
        }


@dataclass(frozen=True)
class ConsensusReport:
    verdict_obs: bool
    verdict_ii: bool
    verdict_iii: bool
    verdict_iv: bool
    verdict_v: bool
    beta: np.ndarray
    oscillation_dim: int
    modes: tuple[OscillationMode, ...]
    lasalle: SubspaceBasis = field(repr=False)
    verdict_breve: bool | None = None

    @property
    def verdicts(self) -> dict[str, bool]:
        return {"obs": self.verdict_obs, "ii": self.verdict_ii, "iii": self.verdict_iii,
                "iv": self.verdict_iv, "v": self.verdict_v}

    @property
    def agreement(self) -> bool:
        return len(set(self.verdicts.values())) == 1

    @property
    def consensus(self) -> bool:
        return self.verdict_obs

    def to_dict(self) -> dict[str, Any]:
        verdicts: dict[str, Any] = dict(self.verdicts)
        verdicts["agreement"] = self.agreement
        if self.verdict_breve is not None:
            verdicts["breve"] = self.verdict_breve
        return {
            "consensus": self.consensus,
            "beta": self.beta.tolist(),
            "verdicts": verdicts,
            "oscillation_dim": self.oscillation_dim,
            "modes": [mode.to_dict() for mode in self.modes],
        }


def lasalle_subspace(red: ReducedSystem, tol: float = RANK_TOL) -> SubspaceBasis:
    """Largest invariant set where the dissipation vanishes, in ``(p, q)`` coordinates."""
    K = observability_kernel(red.C_hat_ext, red.A_hat, tol)
    dim = red.Q_hat.shape[0]
    if K.is_trivial:
        return SubspaceBasis.empty(dim, tol)
    return image(red.Q_hat @ K.basis, tol)


def verdict_observability(red: ReducedSystem, tol: float = RANK_TOL) -> bool:
    return observability_kernel(red.C_hat_ext, red.A_hat, tol).is_trivial


def _no_eigenvector_in(pairs, target: list[SubspaceBasis], angle_tol: float) -> bool:
    for pair in pairs:
        if not intersect(pair.eigenvectors, *target, tol=angle_tol).is_trivial:
            return False
    return True


def _coordinate_subspace(rows: np.ndarray, dim: int) -> SubspaceBasis:
    basis = np.zeros((dim, len(rows)))
    basis[rows, np.arange(len(rows))] = 1.0
    return SubspaceBasis(basis, dim)


def verdict_condition_ii(red: ReducedSystem, tol: float = ANGLE_TOL,
                         rank_tol: float = RANK_TOL, cluster_tol: float = CLUSTER_TOL) -> bool:
    pairs = generalized_eigs(red.L_tilde_u, red.M_u, cluster_tol)
    K = kernel(np.vstack([red.L_ii, red.R_u]), rank_tol)
    return _no_eigenvector_in(pairs, [K], tol)


def verdict_condition_iii(sys: SystemMatrices, tol: float = ANGLE_TOL,
                          rank_tol: float = RANK_TOL, cluster_tol: float = CLUSTER_TOL) -> bool:
    pairs = generalized_eigs(sys.L_total, sys.M, cluster_tol)
    KR = kernel(sys.R, rank_tol)
    U = _coordinate_subspace(sys.u_rows, sys.r * sys.n)
    return _no_eigenvector_in(pairs, [KR, U], tol)


def verdict_conditions_iv_v(sys: SystemMatrices, red: ReducedSystem, tol: float = ANGLE_TOL,
                            rank_tol: float = RANK_TOL,
                            cluster_tol: float = CLUSTER_TOL) -> tuple[bool, bool]:
    Mu_inv = np.linalg.inv(red.M_u)
    pairs_u = eigenspaces_general(red.L_tilde_u @ Mu_inv, cluster_tol, rank_tol)
    K_u = kernel(np.vstack([red.L_ii @ Mu_inv, red.R_u @ Mu_inv]), rank_tol)
    iv = _no_eigenvector_in(pairs_u, [K_u], tol)

    M_inv = sys.M_inv
    pairs = eigenspaces_general(sys.L_total @ M_inv, cluster_tol, rank_tol)
    KR = kernel(sys.R @ M_inv, rank_tol)
    U = _coordinate_subspace(sys.u_rows, sys.r * sys.n)
    v = _no_eigenvector_in(pairs, [KR, U], tol)
    return iv, v


def verdict_breve(red: ReducedSystem, tol: float = RANK_TOL) -> tuple[bool, int]:
    """Consensus verdict and steady-state dimension from the ``(p_u, q)`` pair."""
    K = observability_kernel(red.C_breve, red.A_breve, tol)
    return K.is_trivial, K.dim


def _normalise(x: np.ndarray) -> np.ndarray:
    # sign: first entry that is not roundoff is positive
    x = x / np.linalg.norm(x)
    k = int(np.flatnonzero(np.abs(x) > 1e-6)[0])
    return (x if x[k] >= 0 else -x) + 0.0


def oscillation_modes(red: ReducedSystem, tol: float = ANGLE_TOL, rank_tol: float = RANK_TOL,
                      cluster_tol: float = CLUSTER_TOL) -> list[OscillationMode]:
    """Undamped eigenvectors that never load the damped nodes.

    Each mode oscillates at ``sqrt(mu)``; shapes are over the undamped nodes
    (``r`` entries per node, in user node order) and carry zero total momentum.
    """
    r = red.r
    pairs = generalized_eigs(red.L_tilde_u, red.M_u, cluster_tol)
    K = kernel(np.vstack([red.L_ii, red.R_u]), rank_tol)
    momentum = kernel((red.ones_u.T @ red.M_u), rank_tol)
    ids = red.undamped_ids
    modes = []
    for pair in pairs:
        if pair.eigenvalue <= 0:
            continue
        S = intersect(pair.eigenvectors, K, momentum, tol=tol)
        for j in range(S.dim):
            x = _normalise(S.basis[:, j])
            per_node = np.abs(x).reshape(-1, r).max(axis=1)
            nodes = tuple(ids[i] for i in np.flatnonzero(per_node > PARTICIPATION_TOL * per_node.max()))
            modes.append(OscillationMode(float(np.sqrt(pair.eigenvalue)), x, np.zeros_like(x), nodes))
    return modes


def momentum_check(sys: SystemMatrices, states: np.ndarray, tol: float = 1e-8) -> bool:
    """``1^T p_u(t) ~ 0`` on every sampled (shifted) state; ``states`` is (N, dim)."""
    return bool(np.all(undamped_momentum(sys, states) < tol))


def undamped_momentum(sys: SystemMatrices, states: np.ndarray) -> np.ndarray:
    states = np.atleast_2d(states)
    pu = states[:, sys.u_rows].reshape(states.shape[0], -1, sys.r)
    return np.abs(pu.sum(axis=1)).max(axis=1)


def analyze(network: NetworkSpec | SystemMatrices, tol: float = RANK_TOL,
            angle_tol: float = ANGLE_TOL, cluster_tol: float = CLUSTER_TOL,
            spec_tol: float = DEFAULT_TOL) -> ConsensusReport:
    sys = network if isinstance(network, SystemMatrices) else assemble(network, spec_tol)
    red = kron_reduce(sys)
    obs = verdict_observability(red, tol)
    ii = verdict_condition_ii(red, angle_tol, tol, cluster_tol)
    iii = verdict_condition_iii(sys, angle_tol, tol, cluster_tol)
    iv, v = verdict_conditions_iv_v(sys, red, angle_tol, tol, cluster_tol)
    basis = lasalle_subspace(red, tol)
    breve, breve_dim = verdict_breve(red, tol)
    if breve != obs or breve_dim != basis.dim:
        log.warning("(p_u, q) pair disagrees: consensus %s vs %s, dim %d vs %d",
                    breve, obs, breve_dim, basis.dim)
    report = ConsensusReport(
        verdict_obs=obs, verdict_ii=ii, verdict_iii=iii, verdict_iv=iv, verdict_v=v,
        beta=equilibrium(sys).beta, oscillation_dim=basis.dim,
        modes=tuple(oscillation_modes(red, angle_tol, tol, cluster_tol)),
        lasalle=basis, verdict_breve=breve,
    )
    if not report.agreement:
        log.error("verdicts disagree: %s", report.verdicts)
    return report
