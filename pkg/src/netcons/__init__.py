"""Output consensus in mass-spring-damper networks with damped and undamped nodes."""

from .consensus import ConsensusReport, OscillationMode, analyze, lasalle_subspace, oscillation_modes
from .estimators import ConsensusAnalyzer, NetworkSimulator
from .exceptions import (
    AmbientMismatch,
    DimensionMismatch,
    DisconnectedGraph,
    NetconsError,
    NoDampedNode,
    NoUndampedNode,
    NotPSD,
    NotSPD,
    NotSymmetric,
    SingularDampedBlock,
    SpecError,
    StepTooLarge,
)
from .graph import NetworkSpec, NodeClass, classify_nodes, load_spec, make_spec, spec_from_dict
from .linalg import SubspaceBasis, kernel, observability_kernel
from .simulate import SimConfig, Trajectory, integrate, simulate
from .system import Equilibrium, ReducedSystem, SystemMatrices, assemble, equilibrium, kron_reduce

__all__ = [
    "AmbientMismatch", "ConsensusAnalyzer", "ConsensusReport", "DimensionMismatch",
    "DisconnectedGraph", "Equilibrium", "NetconsError", "NetworkSimulator", "NetworkSpec",
    "NoDampedNode", "NoUndampedNode", "NodeClass", "NotPSD", "NotSPD", "NotSymmetric",
    "OscillationMode", "ReducedSystem", "SimConfig", "SingularDampedBlock", "SpecError",
    "StepTooLarge", "SubspaceBasis", "SystemMatrices", "Trajectory", "analyze", "assemble",
    "classify_nodes", "equilibrium", "integrate", "kernel", "kron_reduce", "lasalle_subspace",
    "load_spec", "make_spec", "observability_kernel", "oscillation_modes", "simulate",
    "spec_from_dict",
]
