"""Network description, node classification and graph matrices.

A network is an undirected connected graph. Every node carries an r x r
inertia block ``M_i`` (SPD), a damping block ``R_i`` (PSD) and a constant
external input ``v_i``; every edge carries an SPD weight block ``W_k``.
"""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .exceptions import (
    DisconnectedGraph,
    NoDampedNode,
    NotPSD,
    NotSPD,
    NotSymmetric,
    NoUndampedNode,
    SpecError,
)

DEFAULT_TOL = 1e-9

MIXED_DAMPING_MESSAGE = (
    "at least one damped and at least one (partially) undamped node is required"
)


class NodeClass(enum.Enum):
    DAMPED = "Damped"
    UNDAMPED = "Undamped"
    PARTIALLY_UNDAMPED = "PartiallyUndamped"

    @property
    def is_damped(self) -> bool:
        return self is NodeClass.DAMPED


def _frozen(a: Any, shape: tuple[int, ...], what: str) -> np.ndarray:
    try:
        arr = np.array(a, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{what}: not a numeric array") from exc
    if arr.shape != shape:
        raise SpecError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SpecError(f"{what}: non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Node:
    id: str
    mass: np.ndarray
    damping: np.ndarray
    external_input: np.ndarray


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    weight: np.ndarray


def _check_symmetric(X: np.ndarray, tol: float, what: str) -> None:
    scale = max(1.0, float(np.linalg.norm(X)))
    if np.linalg.norm(X - X.T) > tol * scale:
        raise NotSymmetric(f"{what} is not symmetric")


def _check_spd(X: np.ndarray, tol: float, what: str) -> None:
    _check_symmetric(X, tol, what)
    try:
        np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        raise NotSPD(f"{what} is not symmetric positive definite") from None


def _check_psd(X: np.ndarray, tol: float, what: str) -> None:
    _check_symmetric(X, tol, what)
    lam = np.linalg.eigvalsh((X + X.T) / 2)
    if lam.size and lam[0] < -tol * max(1.0, float(np.abs(lam).max())):
        raise NotPSD(f"{what} is not positive semi-definite")


@dataclass(frozen=True)
class NetworkSpec:
    """Validated network description.

    Construction validates everything except the damped/undamped mix, which
    is checked by :meth:`validate` (and by :func:`spec_from_dict` unless
    ``require_mixed=False``).
    """

    dimension: int
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        r = self.dimension
        if not isinstance(r, (int, np.integer)) or isinstance(r, bool) or r < 1:
            raise SpecError("dimension must be a positive integer")
        if not self.nodes:
            raise SpecError("network has no nodes")
        index: dict[str, int] = {}
        for i, node in enumerate(self.nodes):
            if node.id in index:
                raise SpecError(f"duplicate node id {node.id!r}")
            index[node.id] = i
        object.__setattr__(self, "_index", index)
        seen: set[frozenset[str]] = set()
        for k, e in enumerate(self.edges):
            if e.source not in index or e.target not in index:
                raise SpecError(f"edge {k} references an unknown node")
            if e.source == e.target:
                raise SpecError(f"edge {k} is a self-loop on {e.source!r}")
            key = frozenset((e.source, e.target))
            if key in seen:
                raise SpecError(f"edge {k} duplicates an existing edge (multigraphs unsupported)")
            seen.add(key)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def node_ids(self) -> list[str]:
        return [node.id for node in self.nodes]

    def index_of(self, node_id: str) -> int:
        return self._index[node_id]

    def edge_endpoints(self) -> list[tuple[int, int]]:
        return [(self._index[e.source], self._index[e.target]) for e in self.edges]

    def validate(self, tol: float = DEFAULT_TOL, require_mixed: bool = True) -> NetworkSpec:
        """Check the numeric invariants; return ``self`` for chaining."""
        for node in self.nodes:
            _check_spd(node.mass, tol, f"mass of node {node.id!r}")
            _check_psd(node.damping, tol, f"damping of node {node.id!r}")
        for k, e in enumerate(self.edges):
            _check_spd(e.weight, tol, f"weight of edge {k} ({e.source}-{e.target})")
        if not is_connected(self):
            raise DisconnectedGraph("graph is not connected")
        if require_mixed:
            classes = classify_nodes(self, tol)
            if not any(c.is_damped for c in classes):
                raise NoDampedNode(f"no damped node: {MIXED_DAMPING_MESSAGE}")
            if all(c.is_damped for c in classes):
                raise NoUndampedNode(f"no (partially) undamped node: {MIXED_DAMPING_MESSAGE}")
        return self

    def to_dict(self) -> dict[str, Any]:
        return {
            "dimension": int(self.dimension),
            "nodes": [
                {
                    "id": nd.id,
                    "mass": nd.mass.tolist(),
                    "damping": nd.damping.tolist(),
                    "external_input": nd.external_input.tolist(),
                }
                for nd in self.nodes
            ],
            "edges": [
                {"from": e.source, "to": e.target, "weight": e.weight.tolist()}
                for e in self.edges
            ],
        }

    def with_external_input(self, v: Sequence[float] | np.ndarray) -> NetworkSpec:
        """Copy of the network with the stacked input vector ``v`` (length r*n)."""
        r = self.dimension
        v = np.asarray(v, dtype=float).reshape(self.n, r)
        nodes = tuple(
            Node(nd.id, nd.mass, nd.damping, _frozen(v[i], (r,), "external_input"))
            for i, nd in enumerate(self.nodes)
        )
        return NetworkSpec(r, nodes, self.edges)


def spec_from_dict(doc: dict[str, Any], tol: float = DEFAULT_TOL,
                   require_mixed: bool = True) -> NetworkSpec:
    """Parse and validate the network JSON document."""
    if not isinstance(doc, dict):
        raise SpecError("network document must be a JSON object")
    for key in ("dimension", "nodes", "edges"):
        if key not in doc:
            raise SpecError(f"missing top-level key {key!r}")
    r = doc["dimension"]
    if not isinstance(r, int) or isinstance(r, bool) or r < 1:
        raise SpecError("dimension must be a positive integer")
    nodes = []
    for i, raw in enumerate(doc["nodes"]):
        try:
            nid = raw["id"]
            if not isinstance(nid, str):
                raise SpecError(f"node {i}: id must be a string")
            nodes.append(Node(
                nid,
                _frozen(raw["mass"], (r, r), f"node {nid!r} mass"),
                _frozen(raw["damping"], (r, r), f"node {nid!r} damping"),
                _frozen(raw["external_input"], (r,), f"node {nid!r} external_input"),
            ))
        except (KeyError, TypeError) as exc:
            raise SpecError(f"node {i}: malformed entry ({exc})") from None
    edges = []
    for k, raw in enumerate(doc["edges"]):
        try:
            edges.append(Edge(str(raw["from"]), str(raw["to"]),
                              _frozen(raw["weight"], (r, r), f"edge {k} weight")))
        except (KeyError, TypeError) as exc:
            raise SpecError(f"edge {k}: malformed entry ({exc})") from None
    return NetworkSpec(r, tuple(nodes), tuple(edges)).validate(tol, require_mixed)


def load_spec(path: str | Path, tol: float = DEFAULT_TOL, require_mixed: bool = True) -> NetworkSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc}") from None
    return spec_from_dict(doc, tol, require_mixed)


def make_spec(
    n: int,
    edges: Sequence[tuple[int, int]],
    damping: Sequence[Any],
    masses: Sequence[Any] | None = None,
    weights: Sequence[Any] | None = None,
    inputs: Sequence[Any] | None = None,
    r: int = 1,
    ids: Sequence[str] | None = None,
    require_mixed: bool = True,
) -> NetworkSpec:
    """Convenience constructor from 0-based index lists.

    Scalars are accepted wherever an r x r block is expected and are read as
    ``scalar * I_r``.
    """

    def block(x: Any) -> np.ndarray:
        a = np.asarray(x, dtype=float)
        return a * np.eye(r) if a.ndim == 0 else a

    ids = list(ids) if ids is not None else [str(i + 1) for i in range(n)]
    masses = masses if masses is not None else [1.0] * n
    weights = weights if weights is not None else [1.0] * len(edges)
    inputs = inputs if inputs is not None else [np.zeros(r)] * n
    nodes = tuple(
        Node(ids[i],
             _frozen(block(masses[i]), (r, r), "mass"),
             _frozen(block(damping[i]), (r, r), "damping"),
             _frozen(np.broadcast_to(np.asarray(inputs[i], dtype=float), (r,)), (r,), "external_input"))
        for i in range(n)
    )
    es = tuple(Edge(ids[a], ids[b], _frozen(block(w), (r, r), "weight"))
               for (a, b), w in zip(edges, weights))
    return NetworkSpec(r, nodes, es).validate(require_mixed=require_mixed)


def is_connected(spec: NetworkSpec) -> bool:
    adj = _adjacency(spec)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w, _ in adj[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == spec.n


def _adjacency(spec: NetworkSpec) -> list[list[tuple[int, int]]]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(spec.n)]
    for k, (a, b) in enumerate(spec.edge_endpoints()):
        adj[a].append((b, k))
        adj[b].append((a, k))
    for nbrs in adj:
        nbrs.sort()
    return adj


def classify_nodes(spec: NetworkSpec, tol: float = DEFAULT_TOL) -> list[NodeClass]:
    classes = []
    for node in spec.nodes:
        R = (node.damping + node.damping.T) / 2
        norm = float(np.linalg.norm(R, 2))
        if norm <= tol:
            classes.append(NodeClass.UNDAMPED)
        elif np.linalg.eigvalsh(R)[0] > tol * norm:
            classes.append(NodeClass.DAMPED)
        else:
            classes.append(NodeClass.PARTIALLY_UNDAMPED)
    return classes


@dataclass(frozen=True)
class EdgePartition:
    damped: tuple[int, ...]
    interconnecting: tuple[int, ...]
    undamped: tuple[int, ...]


def partition_edges(spec: NetworkSpec, classes: Sequence[NodeClass]) -> EdgePartition:
    groups: dict[int, list[int]] = {0: [], 1: [], 2: []}
    for k, (a, b) in enumerate(spec.edge_endpoints()):
        groups[int(classes[a].is_damped) + int(classes[b].is_damped)].append(k)
    return EdgePartition(damped=tuple(groups[2]), interconnecting=tuple(groups[1]),
                         undamped=tuple(groups[0]))


def incidence_matrix(spec: NetworkSpec, signs: Sequence[int] | None = None) -> np.ndarray:
    """Node-by-edge incidence matrix.

    Each edge is oriented from its lower-index endpoint (+1) to its
    higher-index endpoint (-1). ``signs`` optionally flips individual columns.
    """
    B = np.zeros((spec.n, spec.m))
    for k, (a, b) in enumerate(spec.edge_endpoints()):
        lo, hi = min(a, b), max(a, b)
        B[lo, k] = 1.0
        B[hi, k] = -1.0
    if signs is not None:
        B = B * np.asarray(signs, dtype=float)[None, :]
    if spec.n > 1 and np.linalg.matrix_rank(B) < spec.n - 1:
        raise DisconnectedGraph("incidence matrix has rank < n-1")
    return B


def fundamental_cycle_matrix(spec: NetworkSpec, B: np.ndarray | None = None) -> np.ndarray:
    """Edge-by-cycle matrix with one column per chord of a BFS spanning tree.

    The tree is grown from node 0 visiting neighbours in index order. Column
    signs follow the orientation encoded in ``B`` so that ``B @ C == 0``.
    """
    if B is None:
        B = incidence_matrix(spec)
    n, m = B.shape
    adj = _adjacency(spec)
    parent = [-1] * n
    parent_edge = [-1] * n
    depth = [0] * n
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    tree_edges = set()
    while queue:
        u = queue.popleft()
        for w, k in adj[u]:
            if not seen[w]:
                seen[w] = True
                parent[w], parent_edge[w], depth[w] = u, k, depth[u] + 1
                tree_edges.add(k)
                queue.append(w)
    tail = {k: int(np.flatnonzero(B[:, k] > 0)[0]) for k in range(m)}
    head = {k: int(np.flatnonzero(B[:, k] < 0)[0]) for k in range(m)}

    def walk(c: np.ndarray, u: int, k: int) -> None:
        # traversing edge k away from u: +1 along its orientation, -1 against
        c[k] += 1.0 if tail[k] == u else -1.0

    chords = [k for k in range(m) if k not in tree_edges]
    C = np.zeros((m, len(chords)))
    for j, k in enumerate(chords):
        c = C[:, j]
        c[k] = 1.0
        # close the cycle: head(k) -> LCA -> tail(k)
        u, w = head[k], tail[k]
        up_u, up_w = [], []
        while u != w:
            if depth[u] >= depth[w]:
                up_u.append(u)
                u = parent[u]
            else:
                up_w.append(w)
                w = parent[w]
        for x in up_u:
            walk(c, x, parent_edge[x])
        for x in reversed(up_w):
            walk(c, parent[x], parent_edge[x])
    return C


def kron_lift(X: np.ndarray, r: int) -> np.ndarray:
    """Return ``X (x) I_r``."""
    return np.kron(np.asarray(X, dtype=float), np.eye(r))
