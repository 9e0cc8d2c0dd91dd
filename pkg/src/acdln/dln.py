"""Coefficient algebra of the variable-step DLN one-leg family.

For steps ``k_n = t_{n+1} - t_n`` and ``k_{n-1}`` the method reads

    sum_l alpha_l y_{n-1+l} = k_hat * g(sum_l beta_l t_{n-1+l}, sum_l beta_l y_{n-1+l})

with a single parameter ``theta`` in [0, 1].  ``theta = 1`` is the midpoint
rule on [t_n, t_{n+1}]; ``theta = 0`` with equal steps is the midpoint rule
on [t_{n-1}, t_{n+1}].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DlnCoeffs:
    theta: float
    eps: float
    alpha: tuple[float, float, float]  # (alpha_0, alpha_1, alpha_2)
    beta: tuple[float, float, float]
    k_hat: float
    a: tuple[float, float, float]  # numerical-dissipation weights of the G-stability identity
    k_n: float
    k_prev: float


def step_variability(k_n: float, k_prev: float) -> float:
    return (k_n - k_prev) / (k_n + k_prev)


def compute_coeffs(theta: float, k_n: float, k_prev: float) -> DlnCoeffs:
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if not (k_n > 0 and k_prev > 0):
        raise ValueError(f"time steps must be positive, got k_n={k_n}, k_prev={k_prev}")
    eps = step_variability(k_n, k_prev)
    t = theta
    alpha = (0.5 * (t - 1.0), -t, 0.5 * (t + 1.0))
    d = (1.0 + eps * t) ** 2
    r = (1.0 - t * t) / d
    s = eps * eps * t * (1.0 - t * t) / d
    beta2 = 0.25 * (1.0 + r + s + t)
    beta1 = 0.5 * (1.0 - r)
    beta0 = 0.25 * (1.0 + r - s - t)
    k_hat = alpha[2] * k_n - alpha[0] * k_prev
    a1 = -math.sqrt(t * (1.0 - t * t)) / (math.sqrt(2.0) * (1.0 + eps * t))
    a = (-0.5 * (1.0 + eps) * a1, a1, -0.5 * (1.0 - eps) * a1)
    return DlnCoeffs(t, eps, alpha, (beta0, beta1, beta2), k_hat, a, float(k_n), float(k_prev))


def _check(*zs):
    n = np.shape(zs[0])
    for z in zs[1:]:
        if np.shape(z) != n:
            raise ValueError(f"length mismatch: {n} vs {np.shape(z)}")


def combine_alpha(z_prev, z_curr, z_next, coeffs: DlnCoeffs):
    _check(z_prev, z_curr, z_next)
    a0, a1, a2 = coeffs.alpha
    return a0 * np.asarray(z_prev) + a1 * np.asarray(z_curr) + a2 * np.asarray(z_next)


def combine_beta(z_prev, z_curr, z_next, coeffs: DlnCoeffs):
    _check(z_prev, z_curr, z_next)
    b0, b1, b2 = coeffs.beta
    return b0 * np.asarray(z_prev) + b1 * np.asarray(z_curr) + b2 * np.asarray(z_next)


def combine_theta(z_prev, z_curr, theta: float):
    """``(1+theta)/2 z_curr + (1-theta)/2 z_prev``."""
    _check(z_prev, z_curr)
    return 0.5 * (1.0 + theta) * np.asarray(z_curr) + 0.5 * (1.0 - theta) * np.asarray(z_prev)


def combine_a(z_prev, z_curr, z_next, coeffs: DlnCoeffs):
    _check(z_prev, z_curr, z_next)
    a0, a1, a2 = coeffs.a
    return a0 * np.asarray(z_prev) + a1 * np.asarray(z_curr) + a2 * np.asarray(z_next)


def _inner(x, y, mass):
    if mass is None:
        return float(np.dot(x, y))
    return float(np.dot(mass @ x, y))


def g_norm_pair(x, y, theta: float, mass=None) -> float:
    """Squared G(theta) norm of the pair (x, y): (1+theta)/4 |x|^2 + (1-theta)/4 |y|^2."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return 0.25 * (1.0 + theta) * _inner(x, x, mass) + 0.25 * (1.0 - theta) * _inner(y, y, mass)


def g_stability_residual(v_prev, v_curr, v_next, coeffs: DlnCoeffs, mass=None) -> float:
    """Absolute defect of the G-stability identity

    (v_alpha, v_beta) = |(v_{n+1}, v_n)|_G^2 - |(v_n, v_{n-1})|_G^2 + |sum a_l v_{n-1+l}|^2.
    """
    va = combine_alpha(v_prev, v_curr, v_next, coeffs)
    vb = combine_beta(v_prev, v_curr, v_next, coeffs)
    lhs = _inner(va, vb, mass)
    num = combine_a(v_prev, v_curr, v_next, coeffs)
    rhs = (
        g_norm_pair(v_next, v_curr, coeffs.theta, mass)
        - g_norm_pair(v_curr, v_prev, coeffs.theta, mass)
        + _inner(num, num, mass)
    )
    return abs(lhs - rhs)


def linear_step(A, y_prev, y_curr, k_n: float, k_prev: float, theta: float, mass=None, g=None):
    """One DLN step for the linear system ``M y' = A y + g(t_beta)``.

    Solves ``M sum_l alpha_l y_{n-1+l} = k_hat (A y_beta + g)`` for y_{n+1}
    with dense linear algebra; ``g`` is a constant vector or ``None``.
    Used as a reference integrator in tests and small experiments.
    """
    c = compute_coeffs(theta, k_n, k_prev)
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    M = np.eye(n) if mass is None else np.asarray(mass, dtype=float)
    a0, a1, a2 = c.alpha
    b0, b1, b2 = c.beta
    y_prev = np.asarray(y_prev, dtype=float)
    y_curr = np.asarray(y_curr, dtype=float)
    lhs = a2 * M - c.k_hat * b2 * A
    rhs = -M @ (a0 * y_prev + a1 * y_curr) + c.k_hat * A @ (b0 * y_prev + b1 * y_curr)
    if g is not None:
        rhs = rhs + c.k_hat * np.asarray(g, dtype=float)
    return np.linalg.solve(lhs, rhs)
