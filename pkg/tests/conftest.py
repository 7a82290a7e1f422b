import json

import numpy as np
import pytest

from netcons.graph import make_spec

PATH3 = [(0, 1), (1, 2)]
TRIANGLE = [(0, 1), (1, 2), (0, 2)]


def p3_mid(**kw):
    return make_spec(3, PATH3, [0, 1, 0], **kw)


def p3_end(**kw):
    kw.setdefault("inputs", [3, 0, 0])
    return make_spec(3, PATH3, [1, 0, 0], **kw)


def triangle_one_damped(**kw):
    return make_spec(3, TRIANGLE, [1, 0, 0], **kw)


def path5_mid():
    return make_spec(5, [(0, 1), (1, 2), (2, 3), (3, 4)], [0, 0, 1, 0, 0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_spec(tmp_path):
    def write(spec, name="net.json"):
        path = tmp_path / name
        path.write_text(json.dumps(spec.to_dict()))
        return path
    return write


def lyapunov_rate_error(sysm, shifted):
    """Relative gap between a central difference of U along the flow and -p^T M^-1 R M^-1 p.

    U is quadratic, so the central difference is exact up to roundoff; the
    floor keeps states with no dissipation from dividing by zero.
    """
    Z = np.atleast_2d(shifted)
    AZ = Z @ sysm.A_closed.T
    norm_a = np.linalg.norm(sysm.A_closed, 2)
    eps = 1.0 / norm_a
    fd = (sysm.lyapunov(Z + eps * AZ) - sysm.lyapunov(Z - eps * AZ)) / (2 * eps)
    exact = sysm.dissipation(Z)
    floor = 1e-9 * norm_a * sysm.lyapunov(Z) + 1e-300
    return np.abs(fd - exact) / (np.abs(exact) + floor)


def stability_excess(sysm, traj):
    """Largest ``|z~(t)| - kappa |z~(0)|`` over the samples; must stay below 1e-9."""
    lam = np.linalg.eigvalsh(sysm.energy_matrix())
    kappa = np.sqrt(lam[-1] / lam[0])
    norms = np.linalg.norm(traj.shifted, axis=1)
    return float((norms - kappa * norms[0]).max())
