"""Estimator-style wrappers around the analysis and simulation functions.

``fit`` takes a network (a :class:`NetworkSpec`, its JSON dict, or a path to
the JSON file); ``transform``/``predict`` take a stack of initial states
``Z0`` with one state ``(p, q)`` per row.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .consensus import ANGLE_TOL, analyze
from .exceptions import DimensionMismatch
from .graph import DEFAULT_TOL, NetworkSpec, load_spec, spec_from_dict
from .linalg import CLUSTER_TOL, RANK_TOL, SubspaceBasis
from .simulate import SimConfig, Trajectory, simulate
from .system import SystemMatrices, assemble, equilibrium, kron_reduce, shift_to_origin


def as_network(network, tol: float = DEFAULT_TOL) -> NetworkSpec:
    if isinstance(network, NetworkSpec):
        return network.validate(tol)
    if isinstance(network, dict):
        return spec_from_dict(network, tol)
    if isinstance(network, (str, Path)):
        return load_spec(network, tol)
    raise TypeError(f"cannot build a network from {type(network).__name__}")


def check_states(Z, sys: SystemMatrices) -> np.ndarray:
    """Validate a state or a stack of states against the system dimension."""
    Z = check_array(Z, ensure_2d=False, dtype=float)
    Z = np.atleast_2d(Z)
    if Z.shape[1] != sys.state_dim:
        raise DimensionMismatch(f"states have {Z.shape[1]} entries, the network needs {sys.state_dim}")
    return Z


class ConsensusAnalyzer(TransformerMixin, BaseEstimator):
    """Decide output consensus and map initial states to their steady oscillation.

    After ``fit``, ``transform(Z0)`` returns the energy-orthogonal projection
    of each shifted initial state onto the steady-state subspace. This
    subspace is invariant and energy is conserved on it, so the projection is
    the initial condition of the oscillation the trajectory settles into.
    ``predict`` labels each state "consensus" when that projection vanishes.
    """

    def __init__(self, tol=RANK_TOL, angle_tol=ANGLE_TOL, cluster_tol=CLUSTER_TOL,
                 spec_tol=DEFAULT_TOL):
        self.tol = tol
        self.angle_tol = angle_tol
        self.cluster_tol = cluster_tol
        self.spec_tol = spec_tol

    def fit(self, network, y=None):
        spec = as_network(network, self.spec_tol)
        self.system_ = assemble(spec, self.spec_tol)
        self.reduced_ = kron_reduce(self.system_)
        self.report_ = analyze(self.system_, self.tol, self.angle_tol, self.cluster_tol)
        self.equilibrium_ = equilibrium(self.system_)
        self.lasalle_basis_ = self.report_.lasalle
        self.modes_ = list(self.report_.modes)
        self.consensus_ = self.report_.consensus
        self.beta_ = self.report_.beta
        self._projector = self._energy_projector(self.lasalle_basis_)
        return self

    def _energy_projector(self, basis: SubspaceBasis) -> np.ndarray:
        d = self.system_.state_dim
        if basis.dim == 0:
            return np.zeros((d, d))
        V, E = basis.basis, self.system_.energy_matrix()
        return V @ np.linalg.solve(V.T @ E @ V, V.T @ E)

    def transform(self, Z0):
        check_is_fitted(self, "report_")
        Z0 = check_states(Z0, self.system_)
        shifted = np.array([shift_to_origin(self.system_, self.equilibrium_, z) for z in Z0])
        return shifted @ self._projector.T

    def predict(self, Z0):
        check_is_fitted(self, "report_")
        Z0 = check_states(Z0, self.system_)
        steady = np.linalg.norm(self.transform(Z0), axis=1)
        scale = 1.0 + np.linalg.norm(Z0, axis=1)
        return np.where(steady <= 1e-9 * scale, "consensus", "oscillatory")

    def steady_energy(self, Z0) -> np.ndarray:
        """Energy left in the oscillation each initial state settles into."""
        return self.system_.lyapunov(self.transform(Z0))


class NetworkSimulator(BaseEstimator):
    """RK4 simulation of the closed loop; ``predict`` returns the simulated classification."""

    def __init__(self, dt=None, t_end=None, convergence_tol=1e-6, horizon_scale=1.0,
                 retry=True, spec_tol=DEFAULT_TOL):
        self.dt = dt
        self.t_end = t_end
        self.convergence_tol = convergence_tol
        self.horizon_scale = horizon_scale
        self.retry = retry
        self.spec_tol = spec_tol

    def fit(self, network, y=None):
        spec = as_network(network, self.spec_tol)
        self.system_ = assemble(spec, self.spec_tol)
        auto = SimConfig.auto(self.system_, self.horizon_scale)
        dt = auto.dt if self.dt is None else self.dt
        t_end = auto.t_end if self.t_end is None else self.t_end
        self.config_ = SimConfig(dt=dt, t_end=t_end, convergence_tol=self.convergence_tol)
        return self

    def simulate(self, z0) -> Trajectory:
        check_is_fitted(self, "config_")
        z0 = check_states(z0, self.system_)[0]
        return simulate(self.system_, z0, self.config_, retry=self.retry)

    def predict(self, Z0):
        check_is_fitted(self, "config_")
        Z0 = check_states(Z0, self.system_)
        return np.array([self.simulate(z).classification.kind for z in Z0])
