"""Closed-form manufactured solution on the unit square.

All six fields are smooth; the velocity-like fields ``u`` and ``w`` are
solenoidal and ``xi`` is harmonic, so ``w = -Lap u - grad xi`` holds
exactly.  The momentum and phase-field equations get the source terms
returned by :meth:`Manufactured.forcing`; the chemical potential is defined
from ``phi`` so that its equation needs no source.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fem.projection import ExactField
from ..solver import PhysParams, df_of_phi, f_of_phi

PI = np.pi
K_P = 3.0 * PI ** 2  # spatial frequency of the pressure


def _u(x, y, t):
    e = np.exp(2 * t)
    s2x, c2x = np.sin(2 * PI * x), np.cos(2 * PI * x)
    s2y, c2y = np.sin(2 * PI * y), np.cos(2 * PI * y)
    val = ((c2x - 1) * s2y * e, -s2x * c2y * e)
    grad = (
        (-2 * PI * s2x * s2y * e, 2 * PI * (c2x - 1) * c2y * e),
        (-2 * PI * c2x * c2y * e, 2 * PI * s2x * s2y * e),
    )
    lap = ((-8 * PI ** 2 * c2x * s2y + 4 * PI ** 2 * s2y) * e, 8 * PI ** 2 * s2x * c2y * e)
    return val, grad, lap


def _w(x, y, t):
    e = np.exp(2 * t)
    s2x, c2x = np.sin(2 * PI * x), np.cos(2 * PI * x)
    s2y, c2y = np.sin(2 * PI * y), np.cos(2 * PI * y)
    p2, p3, p4 = PI ** 2, PI ** 3, PI ** 4
    val = (
        (-3 * x ** 2 + 3 * y ** 2 + 8 * p2 * s2y * c2x - 4 * p2 * s2y) * e,
        (6 * x * y - 8 * p2 * s2x * c2y) * e,
    )
    grad = (
        ((-6 * x - 16 * p3 * s2x * s2y) * e, (6 * y + 16 * p3 * c2x * c2y - 8 * p3 * c2y) * e),
        ((6 * y - 16 * p3 * c2x * c2y) * e, (6 * x + 16 * p3 * s2x * s2y) * e),
    )
    lap = ((-64 * p4 * s2y * c2x + 16 * p4 * s2y) * e, 64 * p4 * s2x * c2y * e)
    return val, grad, lap


def _xi(x, y, t):
    return (x ** 3 - 3 * x * y ** 2) * np.exp(2 * t)


def _p(x, y, t):
    e = np.exp(-t)
    val = np.sin(K_P * x) * np.cos(K_P * y) * e
    grad = (K_P * np.cos(K_P * x) * np.cos(K_P * y) * e, -K_P * np.sin(K_P * x) * np.sin(K_P * y) * e)
    return val, grad


def _phi(x, y, t):
    """Value, gradient, Laplacian and gradient of the Laplacian of phi."""
    e = np.exp(-t)
    c4x, s4x, c4y, s4y = np.cos(4 * PI * x), np.sin(4 * PI * x), np.cos(4 * PI * y), np.sin(4 * PI * y)
    c3x, s3x, c3y, s3y = np.cos(3 * PI * x), np.sin(3 * PI * x), np.cos(3 * PI * y), np.sin(3 * PI * y)
    val = (c4x * c4y + c3x * c3y) * e
    gx = (-4 * PI * s4x * c4y - 3 * PI * s3x * c3y) * e
    gy = (-4 * PI * c4x * s4y - 3 * PI * c3x * s3y) * e
    lap = (-32 * PI ** 2 * c4x * c4y - 18 * PI ** 2 * c3x * c3y) * e
    glap = (
        (128 * PI ** 3 * s4x * c4y + 54 * PI ** 3 * s3x * c3y) * e,
        (128 * PI ** 3 * c4x * s4y + 54 * PI ** 3 * c3x * s3y) * e,
    )
    return val, (gx, gy), lap, glap


@dataclass(frozen=True)
class Manufactured:
    """The manufactured solution for one parameter set."""

    params: PhysParams = PhysParams()

    # -- pointwise fields ----------------------------------------------------

    def u(self, x, y, t):
        return _u(x, y, t)[0]

    def w(self, x, y, t):
        return _w(x, y, t)[0]

    def xi(self, x, y, t):
        return _xi(x, y, t)

    def p(self, x, y, t):
        return _p(x, y, t)[0]

    def phi(self, x, y, t):
        return _phi(x, y, t)[0]

    def m(self, x, y, t):
        P = self.params
        phi, _, lap, _ = _phi(x, y, t)
        return P.kappa * (-lap + f_of_phi(phi, P.eta))

    def grad_m(self, x, y, t):
        P = self.params
        phi, g, _, glap = _phi(x, y, t)
        d = df_of_phi(phi, P.eta)
        return (P.kappa * (-glap[0] + d * g[0]), P.kappa * (-glap[1] + d * g[1]))

    def at(self, t: float) -> dict:
        """Fields at time ``t`` in the form expected by the projections."""
        return {
            "u": ExactField(lambda x, y: _u(x, y, t)[0], lambda x, y: _u(x, y, t)[1]),
            "w": ExactField(lambda x, y: _w(x, y, t)[0], lambda x, y: _w(x, y, t)[1]),
            "xi": lambda x, y: _xi(x, y, t),
            "p": lambda x, y: _p(x, y, t)[0],
            "phi": ExactField(lambda x, y: _phi(x, y, t)[0], lambda x, y: _phi(x, y, t)[1]),
            "m": ExactField(lambda x, y: self.m(x, y, t), lambda x, y: self.grad_m(x, y, t)),
        }

    # -- source terms --------------------------------------------------------

    def momentum_source(self, x, y, t):
        """u_t - mu Lap u - gamma Lap w + nu (u.grad)u + rho u + lam |u|^2 u + grad p - m grad phi."""
        P = self.params
        (u1, u2), ((u1x, u1y), (u2x, u2y)), (lu1, lu2) = _u(x, y, t)
        _, _, (lw1, lw2) = _w(x, y, t)
        _, (px, py) = _p(x, y, t)
        _, (fx, fy), _, _ = _phi(x, y, t)
        m = self.m(x, y, t)
        uu = u1 * u1 + u2 * u2
        g1 = 2 * u1 - P.mu * lu1 - P.gamma * lw1 + P.nu * (u1 * u1x + u2 * u1y) + P.rho * u1 \
            + P.lam * uu * u1 + px - m * fx
        g2 = 2 * u2 - P.mu * lu2 - P.gamma * lw2 + P.nu * (u1 * u2x + u2 * u2y) + P.rho * u2 \
            + P.lam * uu * u2 + py - m * fy
        return g1, g2

    def phase_source(self, x, y, t):
        """phi_t + u.grad phi + sigma m."""
        P = self.params
        u1, u2 = self.u(x, y, t)
        phi, (fx, fy), _, _ = _phi(x, y, t)
        return -phi + u1 * fx + u2 * fy + P.sigma * self.m(x, y, t)

    def forcing(self, xq: np.ndarray):
        """Callable ``t -> (g_u (ne,nq,2), g_phi (ne,nq))`` on fixed quadrature points."""
        x, y = xq[..., 0], xq[..., 1]

        def at(t):
            g1, g2 = self.momentum_source(x, y, t)
            return np.stack([g1, g2], axis=-1), self.phase_source(x, y, t)

        return at

    def boundary(self, vel):
        """Callable ``t -> (u_b, w_b)``: nodal values on the boundary dofs of ``vel``."""
        n = vel.n_scalar
        bnd = vel.boundary_dofs
        nodes = vel.nodes[bnd % n]
        comp = bnd // n
        x, y = nodes[:, 0], nodes[:, 1]

        def at(t):
            u = np.where(comp == 0, *self.u(x, y, t))
            w = np.where(comp == 0, *self.w(x, y, t))
            return u, w

        return at
