"""Command-line front end: ``netcons {analyze,reduce,modes,simulate,verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys as _sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .consensus import analyze
from .exceptions import NetconsError, SpecError
from .graph import load_spec
from .linalg import RANK_TOL
from .simulate import SimConfig, integrate, random_initial_state, simulate
from .system import assemble, kron_reduce

EXIT_OK = 0
EXIT_DISAGREE = 1
EXIT_INPUT = 2
EXIT_OSCILLATORY = 3
TOL_ENV = "NETCONS_TOL"


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, bool, np.number, np.bool_)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [inner + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def default_tol() -> float:
    raw = os.environ.get(TOL_ENV)
    return float(raw) if raw else RANK_TOL


def reduction_document(path: str | Path, tol: float = RANK_TOL) -> dict[str, Any]:
    """Kron-reduced network over the undamped nodes.

    Edge weights are the negated off-diagonal ``r x r`` blocks of ``L~_u``
    (block ``(i, j)`` with ``i`` before ``j`` in the listed order); blocks
    below ``tol`` relative to the largest entry are dropped.
    """
    sysm = assemble(load_spec(path))
    red = kron_reduce(sysm)
    r, L = sysm.r, red.L_tilde_u
    ids = red.undamped_ids
    Mu = red.M_u
    scale = max(float(np.abs(L).max()), 1e-300)
    edges = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            block = L[i * r:(i + 1) * r, j * r:(j + 1) * r]
            if np.abs(block).max() > tol * scale:
                edges.append({"from": ids[i], "to": ids[j], "weight": (-block).tolist()})
    return {
        "dimension": r,
        "undamped_nodes": ids,
        "masses": [Mu[i * r:(i + 1) * r, i * r:(i + 1) * r].tolist() for i in range(len(ids))],
        "L_tilde_u": L.tolist(),
        "edges": edges,
    }


def laplacian_from_reduction(doc: dict[str, Any]) -> tuple[np.ndarray, np.ndarray]:
    """Rebuild ``(L~_u, M_u)`` from a ``reduce`` document's edge list and masses.

    Off-diagonal blocks are ``-W`` (and ``-W^T`` below the diagonal); each
    diagonal block is minus the sum of the other blocks in its block row.
    """
    r = int(doc["dimension"])
    ids = list(doc["undamped_nodes"])
    k = len(ids)
    pos = {nid: i for i, nid in enumerate(ids)}
    L = np.zeros((k * r, k * r))
    for e in doc["edges"]:
        i, j = pos[e["from"]], pos[e["to"]]
        W = np.asarray(e["weight"], dtype=float)
        L[i * r:(i + 1) * r, j * r:(j + 1) * r] = -W
        L[j * r:(j + 1) * r, i * r:(i + 1) * r] = -W.T
    for i in range(k):
        rows = slice(i * r, (i + 1) * r)
        L[rows, rows] = -L[rows].reshape(r, k, r).sum(axis=1)
    M = np.zeros_like(L)
    for i, Mi in enumerate(doc["masses"]):
        M[i * r:(i + 1) * r, i * r:(i + 1) * r] = Mi
    return L, M


def _read_state(path: str, dim: int) -> np.ndarray:
    z0 = np.asarray(json.loads(Path(path).read_text()), dtype=float).ravel()
    if z0.shape != (dim,):
        raise SpecError(f"initial state must have {dim} entries, got {z0.size}")
    return z0


def cmd_analyze(args) -> int:
    report = analyze(load_spec(args.file), tol=args.tol)
    print(dumps(report.to_dict()))
    return EXIT_OK if report.consensus else EXIT_OSCILLATORY


def cmd_reduce(args) -> int:
    print(dumps(reduction_document(args.file, args.tol)))
    return EXIT_OK


def cmd_modes(args) -> int:
    report = analyze(load_spec(args.file), tol=args.tol)
    print(dumps([m.to_dict() for m in report.modes]))
    return EXIT_OK


def cmd_simulate(args) -> int:
    sysm = assemble(load_spec(args.file))
    if args.init:
        z0 = _read_state(args.init, sysm.state_dim)
    else:
        z0 = random_initial_state(sysm, np.random.default_rng(args.seed))
    cfg = SimConfig(dt=args.dt, t_end=args.t_end, seed=args.seed)
    traj = integrate(sysm, None, z0, cfg)
    traj.to_csv(args.out)
    out = traj.classification.to_dict()
    out["max_lyapunov_increase"] = traj.max_lyapunov_increase
    print(dumps(out))
    return EXIT_OK


def cmd_verify(args) -> int:
    sysm = assemble(load_spec(args.file))
    report = analyze(sysm, tol=args.tol)
    rng = np.random.default_rng(args.seed)
    cfg = SimConfig.auto(sysm)
    runs = []
    for k in range(args.runs):
        traj = simulate(sysm, random_initial_state(sysm, rng), cfg)
        kind = traj.classification.kind
        agrees = kind != "Undecided" and (kind == "Consensus") == report.consensus
        runs.append({"run": k, "classification": kind, "residual_norm": traj.classification.residual_norm,
                     "agrees": agrees})
    ok = report.agreement and all(run["agrees"] for run in runs)
    print(dumps({"consensus": report.consensus, "verdicts": report.to_dict()["verdicts"],
                 "simulations": runs, "all_agree": ok}))
    return EXIT_OK if ok else EXIT_DISAGREE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netcons", description=(
        "Consensus analysis of mass-spring-damper networks with damped and undamped nodes."))
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("file", help="network JSON")
        p.add_argument("--tol", type=float, default=default_tol(),
                       help=f"rank tolerance (default from ${TOL_ENV} or {RANK_TOL:g})")
        p.set_defaults(func=func)
        return p

    add("analyze", cmd_analyze, "decide output consensus (exit 0 consensus, 3 oscillatory)")
    add("reduce", cmd_reduce, "print the Kron-reduced network over the undamped nodes")
    add("modes", cmd_modes, "print the oscillation modes")
    p = add("simulate", cmd_simulate, "integrate with RK4 and write a CSV trace")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    init = p.add_mutually_exclusive_group()
    init.add_argument("--init", help="JSON array with the initial state (p, q)")
    init.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV trace path")
    p = add("verify", cmd_verify, "cross-check the verdicts against random simulations")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NetconsError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return EXIT_INPUT


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
