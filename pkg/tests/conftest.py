import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


# ---------------------------------------------------------------------------
# Finite-difference oracles (independent of the jet engine)
# ---------------------------------------------------------------------------


def fd_gradient(f, x, h=1e-3):
    """5-point central first derivatives of a scalar function of R^3."""
    g = np.zeros(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        g[k] = (
            -f(x + 2 * h * e) + 8 * f(x + h * e) - 8 * f(x - h * e) + f(x - 2 * h * e)
        ) / (12 * h)
    return g


def fd_hessian(f, x, h=1e-4):
    """Second derivatives from function values only (5-point diagonal,
    4-point cross)."""
    H = np.zeros((3, 3))
    f0 = f(x)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        H[k, k] = (
            -f(x + 2 * h * e)
            + 16 * f(x + h * e)
            - 30 * f0
            + 16 * f(x - h * e)
            - f(x + (-2 * h) * e)
        ) / (12 * h * h)
    for k in range(3):
        for m in range(k + 1, 3):
            ek = np.zeros(3)
            ek[k] = 1.0
            em = np.zeros(3)
            em[m] = 1.0
            v = (
                f(x + h * ek + h * em)
                - f(x + h * ek - h * em)
                - f(x - h * ek + h * em)
                + f(x - h * ek - h * em)
            ) / (4 * h * h)
            H[k, m] = H[m, k] = v
    return H


def fd_jacobian(F, x, h=1e-3):
    """5-point central Jacobian of a vector function (column k = dF/dx_k)."""
    J = np.zeros((3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        J[:, k] = (
            -F(x + 2 * h * e) + 8 * F(x + h * e) - 8 * F(x - h * e) + F(x - 2 * h * e)
        ) / (12 * h)
    return J


def fd_param_gradient(loss_of_params, params, step=1e-5):
    """Central finite differences over the whole parameter vector."""
    g = np.zeros_like(params)
    for j in range(params.size):
        p = params.copy()
        p[j] += step
        up = loss_of_params(p)
        p = params.copy()
        p[j] -= step
        um = loss_of_params(p)
        g[j] = (up - um) / (2 * step)
    return g


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.linalg.norm(b.ravel())
    return float(np.linalg.norm((a - b).ravel()) / max(denom, 1e-300))
