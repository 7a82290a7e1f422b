"""Random connected networks for property tests and the ``verify`` command."""

from __future__ import annotations

import numpy as np

from .graph import NetworkSpec, make_spec
from .simulate import decay_rate
from .system import assemble

PARAMETER_MODES = ("unit", "integer", "random")
MIN_DECAY = 2e-3


def random_spd(rng: np.random.Generator, r: int, low: float = 0.5, high: float = 2.0) -> np.ndarray:
    """SPD matrix with eigenvalues drawn uniformly from ``[low, high]``."""
    Q, _ = np.linalg.qr(rng.standard_normal((r, r)))
    X = (Q * rng.uniform(low, high, r)) @ Q.T
    return (X + X.T) / 2


def random_edges(rng: np.random.Generator, n: int, m_max: int = 10) -> list[tuple[int, int]]:
    """Random spanning tree plus extra chords; at most ``m_max`` edges."""
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    candidates = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in edges]
    room = min(m_max, n * (n - 1) // 2) - len(edges)
    extra = int(rng.integers(0, room + 1)) if room > 0 else 0
    for idx in rng.permutation(len(candidates))[:extra]:
        edges.add(candidates[idx])
    return sorted(edges)


def random_spec(
    rng: np.random.Generator,
    n: int | None = None,
    r: int | None = None,
    mode: str | None = None,
    n_max: int = 6,
    m_max: int = 10,
    partial_prob: float = 0.5,
) -> NetworkSpec:
    """Draw a random valid network.

    ``mode`` selects the parameters: ``"unit"`` (identity blocks, the most
    symmetric and most often oscillatory), ``"integer"`` (scalar multiples of
    the identity from {1, 2}) or ``"random"`` (random SPD blocks).
    """
    n = int(rng.integers(2, n_max + 1)) if n is None else n
    r = int(rng.integers(1, 3)) if r is None else r
    mode = PARAMETER_MODES[rng.integers(len(PARAMETER_MODES))] if mode is None else mode
    edges = random_edges(rng, n, m_max)
    n_damped = int(rng.integers(1, n))
    damped = set(rng.permutation(n)[:n_damped].tolist())

    def block(kind: str) -> np.ndarray:
        if mode == "unit":
            return np.eye(r)
        if mode == "integer":
            return float(rng.integers(1, 3)) * np.eye(r)
        return random_spd(rng, r)

    masses = [block("mass") for _ in range(n)]
    weights = [block("weight") for _ in edges]
    damping = []
    for i in range(n):
        if i in damped:
            damping.append(block("damping"))
        elif r > 1 and rng.random() < partial_prob:
            u = np.eye(r)[0] if mode != "random" else rng.standard_normal(r)
            u = u / np.linalg.norm(u)
            damping.append(np.outer(u, u) * (1.0 if mode != "random" else rng.uniform(0.5, 2.0)))
        else:
            damping.append(np.zeros((r, r)))
    inputs = [rng.standard_normal(r) for _ in range(n)]
    return make_spec(n, edges, damping, masses, weights, inputs, r=r)


def random_suite(rng: np.random.Generator, count: int, min_decay: float = MIN_DECAY,
                 **kw) -> list[NetworkSpec]:
    """``count`` random networks whose transients die out at rate ``>= min_decay``.

    Networks sitting next to the consensus boundary (an eigenvector nearly,
    but not exactly, inside the damped-node kernel) decay so slowly that no
    finite simulation can confirm the verdict; they are redrawn.
    """
    specs = []
    while len(specs) < count:
        spec = random_spec(rng, **kw)
        if decay_rate(assemble(spec)) >= min_decay:
            specs.append(spec)
    return specs
