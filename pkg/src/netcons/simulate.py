"""Fixed-step RK4 simulation of the closed loop with energy monitoring."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .exceptions import StepTooLarge
from .linalg import SubspaceBasis
from .system import (
    Equilibrium,
    SystemMatrices,
    cycle_shift,
    decompose_edge_state,
    equilibrium,
)

STEP_FACTOR = 0.1
MAX_HORIZON = 5e4
CHUNK = 2048


def max_frequency(sys: SystemMatrices) -> float:
    """Largest natural frequency ``sqrt(lambda_max(M^-1 L))``."""
    lam = scipy.linalg.eigvalsh(sys.L_total, sys.M)
    return float(np.sqrt(max(lam[-1], 0.0)))


def max_step(sys: SystemMatrices) -> float:
    w = max_frequency(sys)
    return math.inf if w == 0 else STEP_FACTOR / w


def decay_rate(sys: SystemMatrices, axis_tol: float = 1e-8) -> float:
    """Slowest decay rate among the eigenvalues of ``A`` off the imaginary axis."""
    ev = np.linalg.eigvals(sys.A_closed)
    scale = max(1.0, float(np.abs(ev).max()))
    off = -ev.real[ev.real < -axis_tol * scale]
    return float(off.min()) if off.size else math.inf


def energy_condition(sys: SystemMatrices) -> float:
    """``sqrt(lambda_max / lambda_min)`` of ``diag(M^-1, W)``."""
    lam = np.linalg.eigvalsh(sys.energy_matrix())
    return float(np.sqrt(lam[-1] / lam[0]))


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_end: float
    convergence_window: float | None = None
    convergence_tol: float = 1e-6
    seed: int = 0
    max_samples: int = 20000

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.convergence_window is None:
            object.__setattr__(self, "convergence_window", 0.2 * self.t_end)
        if not self.t_end >= self.convergence_window > 0:
            raise ValueError("need t_end >= convergence_window > 0")

    @classmethod
    def auto(cls, sys: SystemMatrices, scale: float = 1.0, **kw) -> SimConfig:
        """Step from the fastest natural frequency, horizon from the slowest decay.

        The horizon is the larger of ``100 / (smallest positive damping
        eigenvalue)`` and the time the slowest decaying mode needs to shrink
        by 1e-10 relative to the energy-norm bound, times ``scale``.
        """
        w = max_frequency(sys)
        damp = np.linalg.eigvalsh(sys.R)
        rate = float(np.max(np.abs(np.linalg.eigvals(sys.R @ sys.M_inv))))
        dt = STEP_FACTOR / max(w, rate, 1e-12)
        pos = damp[damp > 1e-9 * max(1.0, float(damp.max()))]
        t_end = 100.0 / float(pos.min())
        alpha = decay_rate(sys)
        if math.isfinite(alpha):
            t_end = max(t_end, 1.25 * math.log(1e10 * energy_condition(sys)) / alpha)
        t_end = min(t_end * scale, MAX_HORIZON)
        kw.setdefault("dt", dt)
        return cls(t_end=t_end, **kw)


@dataclass(frozen=True)
class Classification:
    kind: str  # "Consensus" | "Oscillatory" | "Undecided"
    beta_hat: np.ndarray | None
    residual_norm: float

    def to_dict(self) -> dict:
        out = {"classification": self.kind, "residual_norm": self.residual_norm}
        if self.beta_hat is not None:
            out["beta_hat"] = self.beta_hat.tolist()
        return out


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    shifted: np.ndarray
    outputs: np.ndarray
    positions: np.ndarray
    lyapunov: np.ndarray
    max_lyapunov_increase: float
    classification: Classification
    dt: float
    equilibrium: Equilibrium = field(repr=False)

    def window(self, length: float) -> np.ndarray:
        return self.times >= self.times[-1] - length - 1e-12

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        k = self.outputs.shape[1]
        w.writerow(["t"] + [f"y_{i + 1}" for i in range(k)] + ["U"])
        for t, y, u in zip(self.times, self.outputs, self.lyapunov):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in y] + [repr(float(u))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def rk4_step(f, z: np.ndarray, h: float) -> np.ndarray:
    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    return z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_propagator(A: np.ndarray, h: float, b: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One RK4 step of ``z' = A z + b`` written as ``z -> Phi z + psi``.

    The stages are linear in ``z``, so applying them to the identity gives
    ``Phi`` and applying them to the zero state gives ``psi``.
    """
    d = A.shape[0]
    b = np.zeros(d) if b is None else b
    Phi = rk4_step(lambda Z: A @ Z, np.eye(d), h)
    psi = rk4_step(lambda z: A @ z + b, np.zeros(d), h)
    return Phi, psi


def integrate(sys: SystemMatrices, eq: Equilibrium | None, z0: np.ndarray, cfg: SimConfig) -> Trajectory:
    eq = equilibrium(sys) if eq is None else eq
    bound = max_step(sys)
    if cfg.dt > bound * (1 + 1e-12):
        raise StepTooLarge(f"dt={cfg.dt:g} exceeds 0.1/omega_max={bound:g}")
    z0 = np.asarray(z0, dtype=float)
    dim, rn = sys.state_dim, sys.r * sys.n
    if z0.shape != (dim,):
        raise ValueError(f"initial state must have length {dim}")
    # shrink the step slightly so the grid ends exactly at t_end
    n_steps = max(1, int(math.ceil(cfg.t_end / cfg.dt * (1 - 1e-12))))
    dt = cfg.t_end / n_steps
    Phi, psi = rk4_propagator(sys.A_closed, dt, sys.G @ sys.v)
    PhiT = Phi.T

    s0, gamma = decompose_edge_state(sys, z0[rn:])
    offset = eq.z_bar.copy()
    if gamma.size:
        offset[rn:] += cycle_shift(sys, gamma)
    M_inv = sys.M_inv

    every = max(1, int(math.ceil(n_steps / cfg.max_samples)))
    keep_idx = list(range(0, n_steps + 1, every))
    if keep_idx[-1] != n_steps:
        keep_idx.append(n_steps)
    keep = np.zeros(n_steps + 1, dtype=bool)
    keep[keep_idx] = True

    states = np.empty((len(keep_idx), dim))
    positions = np.empty((len(keep_idx), rn))
    buf = np.empty((CHUNK + 1, dim))
    buf[0] = z0
    s_cur = s0.copy()
    U_prev = float(sys.lyapunov(z0 - offset)[0])
    U0 = U_prev
    worst = -math.inf
    step = 0
    states[0], positions[0] = z0, s0
    out = 1
    while step < n_steps:
        k = min(CHUNK, n_steps - step)
        for j in range(k):
            buf[j + 1] = buf[j] @ PhiT + psi
        chunk = buf[: k + 1]
        U = sys.lyapunov(chunk - offset)
        inc = np.diff(np.concatenate([[U_prev], U[1:]]))
        worst = max(worst, float(inc.max()) / (1.0 + U0))
        y = chunk[:, :rn] @ M_inv
        s_steps = s_cur + np.concatenate([[np.zeros(rn)], np.cumsum(0.5 * dt * (y[1:] + y[:-1]), axis=0)])
        sel = np.flatnonzero(keep[step + 1: step + k + 1]) + 1
        states[out: out + sel.size] = chunk[sel]
        positions[out: out + sel.size] = s_steps[sel]
        out += sel.size
        s_cur = s_steps[-1]
        U_prev = float(U[-1])
        buf[0] = buf[k]
        step += k

    times = np.asarray(keep_idx, dtype=float) * dt
    shifted = states - offset
    outputs = states[:, :rn] @ M_inv
    lyap = sys.lyapunov(shifted)
    traj = Trajectory(times=times, states=states, shifted=shifted, outputs=outputs, positions=positions,
                      lyapunov=lyap, max_lyapunov_increase=worst,
                      classification=Classification("Undecided", None, math.nan), dt=dt,
                      equilibrium=eq)
    return _with_classification(traj, sys, cfg)


def _with_classification(traj: Trajectory, sys: SystemMatrices, cfg: SimConfig) -> Trajectory:
    win = traj.window(cfg.convergence_window)
    y = traj.outputs[win]
    target = sys.ones @ traj.equilibrium.beta
    residual = float(np.abs(y - target).max())
    if residual < cfg.convergence_tol:
        beta_hat = y[-1].reshape(sys.n, sys.r).mean(axis=0)
        cls = Classification("Consensus", beta_hat, residual)
    else:
        U = traj.lyapunov[win]
        plateau = U[-1] > cfg.convergence_tol ** 2 and (U[0] - U[-1]) <= 1e-2 * U[0]
        moving = float(y.std(axis=0).max()) > 10 * cfg.convergence_tol
        cls = Classification("Oscillatory" if plateau and moving else "Undecided", None, residual)
    return Trajectory(**{**traj.__dict__, "classification": cls})


def simulate(sys: SystemMatrices, z0: np.ndarray, cfg: SimConfig | None = None,
             retry: bool = True) -> Trajectory:
    """Integrate with an automatic configuration, doubling the horizon once if undecided."""
    cfg = SimConfig.auto(sys) if cfg is None else cfg
    traj = integrate(sys, None, z0, cfg)
    if retry and traj.classification.kind == "Undecided":
        cfg2 = SimConfig(dt=cfg.dt, t_end=2 * cfg.t_end, convergence_window=cfg.convergence_window,
                         convergence_tol=cfg.convergence_tol, seed=cfg.seed, max_samples=cfg.max_samples)
        traj = integrate(sys, None, z0, cfg2)
    return traj


def random_initial_state(sys: SystemMatrices, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(sys.state_dim)


def project_onto_lasalle(traj: Trajectory, basis: SubspaceBasis, window: float | None = None) -> float:
    """Largest distance of the shifted state to ``span(basis)`` over the final window."""
    window = 0.2 * traj.times[-1] if window is None else window
    Z = traj.shifted[traj.window(window)].T
    return float(basis.distance(Z).max()) if basis.dim else float(np.linalg.norm(Z, axis=0).max())


def shift_invariance_check(sys: SystemMatrices, eq: Equilibrium | None, z0: np.ndarray,
                           gamma: np.ndarray, cfg: SimConfig) -> float:
    """Max deviation of ``z*(t) - z(t)`` from its initial value, ``q*(0) = q(0) - W^-1 C gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.size == 0:
        return 0.0
    rn = sys.r * sys.n
    z_star0 = np.asarray(z0, dtype=float).copy()
    z_star0[rn:] -= cycle_shift(sys, gamma)
    a = integrate(sys, eq, z0, cfg).states
    b = integrate(sys, eq, z_star0, cfg).states
    diff = b - a
    return float(np.abs(diff - diff[0]).max())


def dominant_frequency(times: np.ndarray, signal: np.ndarray, pad: int = 16) -> float:
    """Peak angular frequency of a uniformly sampled real signal (Hann window, padded FFT)."""
    x = np.asarray(signal, dtype=float)
    x = (x - x.mean()) * np.hanning(x.size)
    dt = float(times[1] - times[0])
    n = pad * x.size
    spec = np.abs(np.fft.rfft(x, n))
    k = int(np.argmax(spec[1:])) + 1
    if 0 < k < spec.size - 1:
        a, b, c = np.log(spec[k - 1: k + 2] + 1e-300)
        k = k + 0.5 * (a - c) / (a - 2 * b + c)
    return 2 * np.pi * k / (n * dt)
