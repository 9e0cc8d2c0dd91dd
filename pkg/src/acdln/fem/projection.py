"""Elliptic projections used to initialise manufactured-solution runs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..mesh import DofMap
from .assembly import (
    assemble_divergence,
    assemble_mass,
    assemble_stiffness,
    build_dof_map_cached,
    geometry,
    load_vector,
)


@dataclass(frozen=True)
class ExactField:
    """A smooth function given by value and gradient callables of (x, y).

    Vector fields return pairs from ``value`` and a 2x2 nested tuple
    ``((du1/dx, du1/dy), (du2/dx, du2/dy))`` from ``grad``.
    """

    value: Callable
    grad: Callable | None = None


def _qp(space: DofMap):
    xq = geometry(space.mesh).xq
    return xq[..., 0], xq[..., 1]


def _as_qp_vector(pair, shape):
    return np.stack([np.broadcast_to(pair[0], shape), np.broadcast_to(pair[1], shape)], axis=-1)


def _as_qp_tensor(nested, shape):
    return np.stack([_as_qp_vector(row, shape) for row in nested], axis=-2)


def integral_weights(space: DofMap) -> np.ndarray:
    """The vector c with c . coef = integral of the field."""
    return load_vector(space, f0=np.ones(geometry(space.mesh).wdet.shape))


# Zero-mean constraints are imposed by pinning one dof and shifting afterwards
# rather than by a bordered multiplier row, which would be dense.
PIN = 0


def solve_fixed(A, rhs: np.ndarray, fixed: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Solve ``A x = rhs`` with ``x[fixed] = values``, dropping the fixed rows."""
    A = sp.csr_matrix(A)
    x = np.zeros(A.shape[0])
    x[fixed] = values
    free = np.ones(A.shape[0], dtype=bool)
    free[fixed] = False
    r = rhs - A @ x
    x[free] = spla.spsolve(A[free][:, free].tocsc(), r[free])
    return x


def zero_mean(q: np.ndarray, c: np.ndarray) -> np.ndarray:
    return q - np.dot(c, q) / c.sum()


def flux_rhs(B, c: np.ndarray, v_fixed: np.ndarray) -> np.ndarray:
    """Right-hand side of the divergence rows against zero-mean tests.

    With boundary data ``v_fixed`` the discrete divergence can only vanish
    against zero-mean tests; eliminating the mean multiplier leaves this
    known constant load, proportional to the net boundary flux.
    """
    return c * ((B @ v_fixed).sum() / c.sum())


def ritz_project(phi: ExactField | Callable, space: DofMap, grad: Callable | None = None) -> np.ndarray:
    """Elliptic projection: matches gradients against P2 and the mean value."""
    if not isinstance(phi, ExactField):
        phi = ExactField(phi, grad)
    x, y = _qp(space)
    shape = x.shape
    val = np.broadcast_to(phi.value(x, y), shape)
    if phi.grad is None:
        raise ValueError("ritz_project needs the gradient of the projected function")
    g = _as_qp_vector(phi.grad(x, y), shape)
    rhs = load_vector(space, f1=g)
    c = integral_weights(space)
    mean = float(np.sum(val * geometry(space.mesh).wdet))
    sol = solve_fixed(assemble_stiffness(space), rhs, np.array([PIN]), np.zeros(1))
    return sol + (mean - np.dot(c, sol)) / c.sum()


def stokes_project(u: ExactField, w: ExactField, p: Callable, xi: Callable, vel: DofMap, pres: DofMap,
                   mu: float = 1.0, gamma: float = 1.0):
    """Coupled projection of (u, w, p, xi) onto P2v x P2v x P1 x P1.

    Both velocity-like fields take their nodal boundary values from the
    exact data and are discretely divergence free; ``p`` and ``xi`` are
    returned with zero mean.  Returns ``(Su, Sw, Sp, Sxi)``.
    """
    x, y = _qp(vel)
    shape = x.shape
    gu = _as_qp_tensor(u.grad(x, y), shape)
    gw = _as_qp_tensor(w.grad(x, y), shape)
    wv = _as_qp_vector(w.value(x, y), shape)
    pv = np.broadcast_to(p(x, y), shape)
    xv = np.broadcast_to(xi(x, y), shape)
    eye = np.eye(2)
    rhs_u = load_vector(vel, f1=mu * gu + gamma * gw - pv[..., None, None] * eye)
    rhs_w = load_vector(vel, f0=wv, f1=-xv[..., None, None] * eye - gu)

    Mv = assemble_mass(vel)
    Kv = assemble_stiffness(vel)
    B = assemble_divergence(vel, pres)
    c = integral_weights(pres)
    nv, nq = vel.n_dofs, pres.n_dofs
    A = sp.bmat(
        [
            [mu * Kv, gamma * Kv, -B.T, None],
            [-Kv, Mv, None, -B.T],
            [B, None, None, None],
            [None, B, None, None],
        ],
        format="csr",
    )
    bd = vel.boundary_dofs
    ub = np.zeros(nv)
    wb = np.zeros(nv)
    ub[bd] = vel.interpolate(u.value)[bd]
    wb[bd] = vel.interpolate(w.value)[bd]
    rhs = np.concatenate([rhs_u, rhs_w, flux_rhs(B, c, ub), flux_rhs(B, c, wb)])
    fixed = np.concatenate([bd, nv + bd, [2 * nv + PIN, 2 * nv + nq + PIN]])
    values = np.concatenate([ub[bd], wb[bd], [0.0, 0.0]])
    sol = solve_fixed(A, rhs, fixed, values)
    Su = sol[:nv]
    Sw = sol[nv:2 * nv]
    Sp = zero_mean(sol[2 * nv:2 * nv + nq], c)
    Sxi = zero_mean(sol[2 * nv + nq:], c)
    return Su, Sw, Sp, Sxi


def leray_project(u0: np.ndarray, vel: DofMap, pres: DofMap) -> np.ndarray:
    """Discretely divergence-free L2 projection with homogeneous boundary values."""
    Mv = assemble_mass(vel)
    B = assemble_divergence(vel, pres)
    A = sp.bmat([[Mv, -B.T], [B, None]], format="csr")
    rhs = np.concatenate([Mv @ u0, np.zeros(pres.n_dofs)])
    bd = vel.boundary_dofs
    fixed = np.concatenate([bd, [vel.n_dofs + PIN]])
    sol = solve_fixed(A, rhs, fixed, np.zeros(len(fixed)))
    return sol[: vel.n_dofs]


def spaces(mesh):
    """(P2 vector, P2 scalar, P1) dof maps of a mesh."""
    return (
        build_dof_map_cached(mesh, "P2v"),
        build_dof_map_cached(mesh, "P2"),
        build_dof_map_cached(mesh, "P1"),
    )
