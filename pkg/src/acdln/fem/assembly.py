"""Global assembly of the forms used by the mixed Allen-Cahn/active fluid system.

All integrals use one fixed quadrature rule per element (degree 8), so the
quartic velocity term and the double-well nonlinearity are integrated
without truncation error for P2 data.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .. import kernels
from ..mesh import DofMap, Mesh
from . import basis
from .quadrature import DEFAULT_RULE, QuadratureRule


@dataclass(frozen=True, eq=False)
class Geometry:
    """Per-element quadrature data shared by every form on one mesh."""

    mesh: Mesh
    rule: QuadratureRule
    xq: np.ndarray  # (ne, nq, 2) physical quadrature points
    wdet: np.ndarray  # (ne, nq)
    detj: np.ndarray  # (ne,)
    psi1: np.ndarray  # (nq, 3)
    dpsi1: np.ndarray  # (ne, nq, 3, 2)
    psi2: np.ndarray  # (nq, 6)
    dpsi2: np.ndarray  # (ne, nq, 6, 2)

    def tables(self, kind: str):
        if kind == "P1":
            return self.psi1, self.dpsi1
        return self.psi2, self.dpsi2


@lru_cache(maxsize=16)
def geometry(mesh: Mesh, rule: QuadratureRule = DEFAULT_RULE) -> Geometry:
    p = mesh.vertices[mesh.triangles]  # (ne, 3, 2)
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns
    detj = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / detj
    inv[:, 1, 1] = jac[:, 0, 0] / detj
    inv[:, 0, 1] = -jac[:, 0, 1] / detj
    inv[:, 1, 0] = -jac[:, 1, 0] / detj
    xy = rule.xy
    xq = p[:, None, 0, :] + np.einsum("edk,qk->eqd", jac, xy)
    wdet = np.abs(detj)[:, None] * rule.weights[None, :]

    def phys(ref):
        return np.ascontiguousarray(np.einsum("qik,ekd->eqid", ref, inv))

    return Geometry(
        mesh=mesh,
        rule=rule,
        xq=xq,
        wdet=np.ascontiguousarray(wdet),
        detj=detj,
        psi1=np.ascontiguousarray(basis.p1_values(xy)),
        dpsi1=phys(basis.p1_gradients(xy)),
        psi2=np.ascontiguousarray(basis.p2_values(xy)),
        dpsi2=phys(basis.p2_gradients(xy)),
    )


@dataclass
class Field:
    """A discrete function: a dof map plus its coefficient vector."""

    space: DofMap
    coef: np.ndarray

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=float)
        if self.coef.shape != (self.space.n_dofs,):
            raise ValueError(f"expected {self.space.n_dofs} coefficients, got {self.coef.shape}")

    def at_quadrature(self):
        """(values, gradients) at the quadrature points; vector fields return lists."""
        return evaluate(self.space, self.coef)


def _scalar_dofs(space: DofMap) -> np.ndarray:
    nb = 3 if space.kind == "P1" else 6
    return np.ascontiguousarray(space.cell_dofs[:, :nb], dtype=np.int64)


def evaluate(space: DofMap, coef: np.ndarray):
    """Quadrature-point values and gradients of a discrete field.

    Scalar spaces give ``(val (ne,nq), grad (ne,nq,2))``; ``P2v`` gives
    ``(val (ne,nq,2), grad (ne,nq,2,2))`` with ``grad[..., a, d] = d u_a / d x_d``.
    """
    geo = geometry(space.mesh)
    psi, dpsi = geo.tables(space.kind)
    dofs = _scalar_dofs(space)
    if space.kind != "P2v":
        return kernels.evaluate(coef, dofs, psi, dpsi)
    n = space.n_scalar
    vx, gx = kernels.evaluate(coef[:n], dofs, psi, dpsi)
    vy, gy = kernels.evaluate(coef[n:], dofs, psi, dpsi)
    return np.stack([vx, vy], axis=-1), np.stack([gx, gy], axis=-2)


def _coo(space_test: DofMap, space_trial: DofMap, local: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(space_test.cell_dofs, space_trial.cell_dofs.shape[1], axis=1)
    cols = np.tile(space_trial.cell_dofs, (1, space_test.cell_dofs.shape[1]))
    return sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())), shape=(space_test.n_dofs, space_trial.n_dofs)
    ).tocsr()


def _blockdiag(local: np.ndarray) -> np.ndarray:
    ne, nb, _ = local.shape
    out = np.zeros((ne, 2 * nb, 2 * nb))
    out[:, :nb, :nb] = local
    out[:, nb:, nb:] = local
    return out


def local_mass(space: DofMap) -> np.ndarray:
    geo = geometry(space.mesh)
    psi, _ = geo.tables(space.kind)
    return np.einsum("eq,qi,qj->eij", geo.wdet, psi, psi, optimize=True)


def local_stiffness(space: DofMap) -> np.ndarray:
    geo = geometry(space.mesh)
    _, dpsi = geo.tables(space.kind)
    return np.einsum("eq,eqid,eqjd->eij", geo.wdet, dpsi, dpsi, optimize=True)


def assemble_mass(space: DofMap) -> sp.csr_matrix:
    loc = local_mass(space)
    if space.kind == "P2v":
        loc = _blockdiag(loc)
    return _coo(space, space, loc)


def assemble_stiffness(space: DofMap) -> sp.csr_matrix:
    loc = local_stiffness(space)
    if space.kind == "P2v":
        loc = _blockdiag(loc)
    return _coo(space, space, loc)


def local_divergence(vel_space: DofMap, pres_space: DofMap) -> np.ndarray:
    """Element matrices of (q, div v): shape (ne, n_pres_local, 12)."""
    geo = geometry(vel_space.mesh)
    psi_q, _ = geo.tables(pres_space.kind)
    _, dpsi_v = geo.tables("P2")
    dx = np.einsum("eq,qi,eqj->eij", geo.wdet, psi_q, dpsi_v[..., 0], optimize=True)
    dy = np.einsum("eq,qi,eqj->eij", geo.wdet, psi_q, dpsi_v[..., 1], optimize=True)
    return np.concatenate([dx, dy], axis=2)


def assemble_divergence(vel_space: DofMap, pres_space: DofMap) -> sp.csr_matrix:
    """B with (B v)_q = integral of psi_q div v."""
    if vel_space.kind != "P2v" or pres_space.kind not in ("P1", "P2"):
        raise ValueError(f"divergence needs P2v x scalar spaces, got {vel_space.kind} x {pres_space.kind}")
    if vel_space.mesh is not pres_space.mesh:
        raise ValueError("velocity and pressure spaces live on different meshes")
    return _coo(pres_space, vel_space, local_divergence(vel_space, pres_space))


def assemble_convection(u_coef: np.ndarray | Field, trial: DofMap, test: DofMap | None = None) -> sp.csr_matrix:
    """Matrix of the skew-symmetric trilinear form, N[i, j] = b(u, psi_j, psi_i).

    ``b(u, v, w) = (u.grad v, w)/2 - (u.grad w, v)/2``; ``u`` is a P2 vector
    field and ``trial``/``test`` are the same P2 or P2v space.
    """
    test = trial if test is None else test
    if test is not trial and (test.kind != trial.kind or test.mesh is not trial.mesh):
        raise ValueError("convection operator needs identical trial and test spaces")
    if isinstance(u_coef, Field):
        u_coef = u_coef.coef
    geo = geometry(trial.mesh)
    vel = build_dof_map_cached(trial.mesh, "P2v")
    u, _ = evaluate(vel, u_coef)
    loc = kernels.local_bilinear(geo.psi2, geo.dpsi2, geo.wdet, c1=0.5 * u, c2=-0.5 * u)
    if trial.kind == "P2v":
        loc = _blockdiag(loc)
    return _coo(test, trial, loc)


def load_vector(space: DofMap, f0=None, f1=None) -> np.ndarray:
    """Integrals of f0 psi_i + f1 . grad psi_i for quadrature-point data.

    For ``P2v`` the component axis is the last axis of ``f0`` (and the
    second to last of ``f1``).
    """
    geo = geometry(space.mesh)
    psi, dpsi = geo.tables(space.kind)
    dofs = _scalar_dofs(space)
    if space.kind != "P2v":
        return kernels.assemble_load(np.zeros(space.n_dofs), dofs, psi, dpsi, geo.wdet, f0, f1)
    n = space.n_scalar
    out = np.zeros(space.n_dofs)
    for a in range(2):
        g0 = None if f0 is None else np.ascontiguousarray(f0[..., a])
        g1 = None if f1 is None else np.ascontiguousarray(f1[..., a, :])
        out[a * n:(a + 1) * n] = kernels.assemble_load(np.zeros(n), dofs, psi, dpsi, geo.wdet, g0, g1)
    return out


def assemble_cubic_velocity(u_coef, test: DofMap) -> np.ndarray:
    """Load vector of (|u|^2 u, v)."""
    if isinstance(u_coef, Field):
        u_coef = u_coef.coef
    u, _ = evaluate(test, u_coef)
    return load_vector(test, f0=np.sum(u * u, axis=-1, keepdims=True) * u)


def assemble_ac_coupling(m_coef, phi_coef, test: DofMap) -> np.ndarray:
    """Load vector of the capillary force (m grad phi, v) on a P2v test space."""
    if isinstance(m_coef, Field):
        m_coef = m_coef.coef
    if isinstance(phi_coef, Field):
        phi_coef = phi_coef.coef
    scalar = build_dof_map_cached(test.mesh, "P2")
    m, _ = evaluate(scalar, m_coef)
    _, gphi = evaluate(scalar, phi_coef)
    return load_vector(test, f0=m[..., None] * gphi)


def assemble_phase_advection(u_coef, phi_coef, test: DofMap) -> np.ndarray:
    """Load vector of (u . grad phi, theta) on a scalar P2 test space."""
    vel = build_dof_map_cached(test.mesh, "P2v")
    u, _ = evaluate(vel, u_coef)
    _, gphi = evaluate(test, phi_coef)
    return load_vector(test, f0=np.sum(u * gphi, axis=-1))


@lru_cache(maxsize=32)
def build_dof_map_cached(mesh: Mesh, kind: str) -> DofMap:
    from ..mesh import build_dof_map

    return build_dof_map(mesh, kind)
