"""Fully discrete DLN step for the mixed Allen-Cahn active fluid system.

Unknowns per step are the level n+1 coefficients of

    u, w   P2 vector (Dirichlet on the whole boundary)
    xi, p  P1, zero mean
    phi, m P2 scalar (natural boundary conditions)

and all six fields are solved together by Newton's method on the monolithic
system.  The zero-mean constraints are not carried as Lagrange multipliers:
their dense border rows ruin sparse LU fill.  Instead one dof of xi and of p
is pinned during the solve and both fields are shifted to zero mean after
it.  A constant shift is invisible to every equation, because the divergence
of a velocity that vanishes on the boundary has zero mean.

The Jacobian lives in a fixed CSC sparsity pattern computed once per
mesh; constant blocks are cached per coefficient set and the nonlinear blocks
are scattered into it by the element kernels.
"""
from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .dln import DlnCoeffs, compute_coeffs
from .fem.assembly import evaluate, geometry, local_divergence, local_mass, local_stiffness, load_vector
from .fem.projection import integral_weights, leray_project, ritz_project, solve_fixed, spaces, stokes_project
from .mesh import Mesh

log = logging.getLogger(__name__)


class StepFailure(RuntimeError):
    """Newton did not converge; the caller may retry with a smaller step."""

    def __init__(self, message, residual=math.nan, iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigurationError(RuntimeError):
    """Singular or otherwise unusable linear system."""


# ---------------------------------------------------------------------------
# parameters and state


@dataclass(frozen=True)
class PhysParams:
    mu: float = 1.0
    gamma: float = 1.0
    nu: float = 1.0
    rho: float = 1.0
    lam: float = 1.0
    sigma: float = 1.0
    kappa: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        for name in ("mu", "gamma", "nu", "lam", "sigma", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    newton_rtol: float = 1e-12
    newton_max_iter: int = 25
    linear_solver: str = "direct"  # or "gmres"
    linear_tol: float = 1e-12
    picard_warmup_iters: int = 0
    # chord iterations: keep an LU factorisation while it contracts well enough
    reuse_jacobian: bool = False
    reuse_contraction: float = 0.25
    lu_cache: int = 4  # factorisations kept for reuse, one per set of step coefficients
    predictor: str = "extrapolate"

    def __post_init__(self):
        if self.newton_tol <= 0 or self.newton_rtol < 0 or self.linear_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.lu_cache < 1:
            raise ValueError("lu_cache must be at least 1")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")
        if self.linear_solver not in ("direct", "gmres"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")
        if self.predictor not in ("extrapolate", "previous"):
            raise ValueError(f"unknown predictor {self.predictor!r}")


FIELD_NAMES = ("u", "w", "xi", "p", "phi", "m")

# P1 dof of xi and p held at zero during the Newton solve (a domain corner)
PIN_DOF = 0


@dataclass(frozen=True)
class Fields:
    """Coefficient vectors of the six unknowns at one time level."""

    u: np.ndarray
    w: np.ndarray
    xi: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    m: np.ndarray

    def items(self):
        return ((n, getattr(self, n)) for n in FIELD_NAMES)


@dataclass(frozen=True)
class FieldState:
    """Two consecutive time levels, (t_{n-1}, prev) and (t_n, curr)."""

    t_prev: float
    t_curr: float
    prev: Fields
    curr: Fields

    @property
    def k_prev(self) -> float:
        return self.t_curr - self.t_prev

    def advance(self, t_next: float, nxt: Fields) -> "FieldState":
        return FieldState(self.t_curr, t_next, self.curr, nxt)


# ---------------------------------------------------------------------------
# double-well potential


def F_of_phi(phi, eta: float = 1.0):
    return (phi * phi - 1.0) ** 2 / (4.0 * eta * eta)


def f_of_phi(phi, eta: float = 1.0):
    return (phi ** 3 - phi) / (eta * eta)


def df_of_phi(phi, eta: float = 1.0):
    return (3.0 * phi * phi - 1.0) / (eta * eta)


def f_tilde(a, b, eta: float = 1.0):
    """Secant slope (F(a) - F(b)) / (a - b), equal to f(a) when a == b.

    The difference quotient of the quartic factors exactly, so the
    polynomial form below has no cancellation as a -> b.
    """
    return (a + b) * (a * a + b * b - 2.0) / (4.0 * eta * eta)


def df_tilde_da(a, b, eta: float = 1.0):
    return (3.0 * a * a + 2.0 * a * b + b * b - 2.0) / (4.0 * eta * eta)


# ---------------------------------------------------------------------------
# discretisation: spaces, constant matrices and the Jacobian pattern


class Discretization:
    """Spaces, constant operators and the monolithic sparsity pattern of one mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.vel, self.scal, self.pres = spaces(mesh)
        self.geo = geometry(mesh)
        n2, n1 = self.scal.n_dofs, self.pres.n_dofs
        self.n2, self.n1 = n2, n1
        self.off = {
            "u": 0,
            "w": 2 * n2,
            "xi": 4 * n2,
            "p": 4 * n2 + n1,
            "phi": 4 * n2 + 2 * n1,
            "m": 5 * n2 + 2 * n1,
            "end": 6 * n2 + 2 * n1,
        }
        self.size = 6 * n2 + 2 * n1
        self.sizes = {"u": 2 * n2, "w": 2 * n2, "xi": n1, "p": n1, "phi": n2, "m": n2}

        self.m2_loc = local_mass(self.scal)
        self.k2_loc = local_stiffness(self.scal)
        self.b_loc = local_divergence(self.vel, self.pres)  # (ne, 3, 12)

        def glob(test, trial, loc):
            rows = np.repeat(test.cell_dofs, trial.cell_dofs.shape[1], axis=1)
            cols = np.tile(trial.cell_dofs, (1, test.cell_dofs.shape[1]))
            return sp.coo_matrix((loc.ravel(), (rows.ravel(), cols.ravel())),
                                 shape=(test.n_dofs, trial.n_dofs)).tocsr()

        self.M2 = glob(self.scal, self.scal, self.m2_loc)
        self.K2 = glob(self.scal, self.scal, self.k2_loc)
        self.Mv = sp.block_diag([self.M2, self.M2], format="csr")
        self.Kv = sp.block_diag([self.K2, self.K2], format="csr")
        self.B = glob(self.pres, self.vel, self.b_loc)
        self.BT = self.B.T.tocsr()
        self.c1 = integral_weights(self.pres)
        self.c2 = integral_weights(self.scal)

        self._dofs2 = np.ascontiguousarray(self.scal.cell_dofs, dtype=np.int64)
        self._build_pattern()
        self._const_cache: dict = {}

    # -- pattern ----------------------------------------------------------

    def _build_pattern(self):
        n = self.size
        off = self.off
        d2 = self._dofs2
        d1 = self.pres.cell_dofs
        dv = self.vel.cell_dofs
        n2 = self.n2
        rows, cols, names = [], [], []

        def add(name, rdofs, cdofs):
            r = np.broadcast_to(rdofs[:, :, None], rdofs.shape + (cdofs.shape[1],))
            c = np.broadcast_to(cdofs[:, None, :], r.shape)
            rows.append(r.ravel())
            cols.append(c.ravel())
            names.append((name, r.shape))

        comp = [d2, d2 + n2]
        for a in range(2):
            for c in range(2):
                add(("uu", a, c), off["u"] + comp[a], off["u"] + comp[c])
            add(("uw", a), off["u"] + comp[a], off["w"] + comp[a])
            add(("uphi", a), off["u"] + comp[a], off["phi"] + d2)
            add(("um", a), off["u"] + comp[a], off["m"] + d2)
            add(("wu", a), off["w"] + comp[a], off["u"] + comp[a])
            add(("ww", a), off["w"] + comp[a], off["w"] + comp[a])
            add(("phiu", a), off["phi"] + d2, off["u"] + comp[a])
        add("up", off["u"] + dv, off["p"] + d1)
        add("wxi", off["w"] + dv, off["xi"] + d1)
        add("xiw", off["xi"] + d1, off["w"] + dv)
        add("pu", off["p"] + d1, off["u"] + dv)
        add("phiphi", off["phi"] + d2, off["phi"] + d2)
        add("phim", off["phi"] + d2, off["m"] + d2)
        add("mphi", off["m"] + d2, off["phi"] + d2)
        add("mm", off["m"] + d2, off["m"] + d2)
        pins = np.array([[off["xi"] + PIN_DOF], [off["p"] + PIN_DOF]])
        add("pin", pins, pins[:, :1])

        r = np.concatenate(rows)
        c = np.concatenate(cols)
        keys = c.astype(np.int64) * n + r
        uniq, inv = np.unique(keys, return_inverse=True)
        self.indices = (uniq % n).astype(np.int32)
        colidx = uniq // n
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(colidx, minlength=n))]).astype(np.int32)
        self.nnz = len(uniq)
        self.pos = {}
        start = 0
        for name, shape in names:
            size = int(np.prod(shape))
            self.pos[name] = np.ascontiguousarray(inv[start:start + size].reshape(shape), dtype=np.int64)
            start += size

        # Dirichlet rows and columns of u and w, plus one pinned dof each of xi and p
        bnd = self.vel.boundary_dofs
        self.pinned = np.array([off["xi"] + PIN_DOF, off["p"] + PIN_DOF])
        self.bc_dofs = np.concatenate([off["u"] + bnd, off["w"] + bnd, self.pinned])
        is_bc = np.zeros(n, dtype=bool)
        is_bc[self.bc_dofs] = True
        self.is_bc = is_bc
        self._bc_entries = np.flatnonzero(is_bc[self.indices] | is_bc[colidx])
        diag_keys = self.bc_dofs.astype(np.int64) * n + self.bc_dofs
        self._bc_diag = np.searchsorted(uniq, diag_keys)
        assert np.all(uniq[self._bc_diag] == diag_keys)

    # -- constant part of the Jacobian ---------------------------------------

    def _scatter_local(self, data, name, loc, scale=1.0):
        if scale == 0.0:
            return
        pos = self.pos[name]
        data += scale * np.bincount(pos.ravel(), weights=np.broadcast_to(loc, pos.shape).ravel(),
                                    minlength=self.nnz)

    def constant_jacobian(self, c_mass: float, beta2: float, params: PhysParams) -> np.ndarray:
        """Data of all linear blocks for time-derivative weight ``c_mass = alpha_2 / k_hat``."""
        key = (c_mass, beta2, params)
        hit = self._const_cache.get(key)
        if hit is not None:
            return hit
        data = np.zeros(self.nnz)
        M, K, Bl = self.m2_loc, self.k2_loc, self.b_loc
        for a in range(2):
            self._scatter_local(data, ("uu", a, a), M, c_mass + beta2 * params.rho)
            self._scatter_local(data, ("uu", a, a), K, beta2 * params.mu)
            self._scatter_local(data, ("uw", a), K, beta2 * params.gamma)
            self._scatter_local(data, ("wu", a), K, -1.0)
            self._scatter_local(data, ("ww", a), M, 1.0)
        BT = np.ascontiguousarray(np.transpose(Bl, (0, 2, 1)))
        self._scatter_local(data, "up", BT, -beta2)
        self._scatter_local(data, "wxi", BT, -1.0)
        self._scatter_local(data, "xiw", Bl, 1.0)
        self._scatter_local(data, "pu", Bl, 1.0)
        self._scatter_local(data, "phiphi", M, c_mass)
        self._scatter_local(data, "phim", M, params.sigma * beta2)
        self._scatter_local(data, "mm", M, beta2)
        self._scatter_local(data, "mphi", K, -params.kappa * beta2)
        if len(self._const_cache) > 8:
            self._const_cache.clear()
        self._const_cache[key] = data
        return data

    def mean_free_divergence(self, v: np.ndarray) -> np.ndarray:
        """B v with its component along the P1 integral weights removed.

        This is (div v, q) against zero-mean tests q.  The removed part only
        depends on boundary values of v (the net boundary flux), so it is a
        constant during a Newton solve and does not enter the Jacobian.
        """
        r = self.B @ v
        return r - self.c1 * (r.sum() / self.c1.sum())

    def zero_mean(self, q: np.ndarray) -> np.ndarray:
        return q - np.dot(self.c1, q) / self.c1.sum()

    def apply_bc(self, data):
        data[self._bc_entries] = 0.0
        data[self._bc_diag] = 1.0
        return data

    def csc(self, data) -> sp.csc_matrix:
        return sp.csc_matrix((data, self.indices, self.indptr), shape=(self.size, self.size))

    # -- packing ------------------------------------------------------------

    def pack(self, f: Fields) -> np.ndarray:
        return np.concatenate([f.u, f.w, f.xi, f.p, f.phi, f.m])

    def unpack(self, x: np.ndarray) -> Fields:
        o = self.off
        return Fields(
            u=x[o["u"]:o["w"]].copy(),
            w=x[o["w"]:o["xi"]].copy(),
            xi=x[o["xi"]:o["p"]].copy(),
            p=x[o["p"]:o["phi"]].copy(),
            phi=x[o["phi"]:o["m"]].copy(),
            m=x[o["m"]:o["end"]].copy(),
        )

    def zero_fields(self) -> Fields:
        z2 = np.zeros(2 * self.n2)
        return Fields(z2, z2.copy(), np.zeros(self.n1), np.zeros(self.n1), np.zeros(self.n2), np.zeros(self.n2))

    # -- diagnostics ----------------------------------------------------------

    def divergence_norms(self, f: Fields) -> tuple[float, float]:
        """Euclidean norms of B u and B w against zero-mean P1 tests.

        The zero-mean test space is the orthogonal complement of the
        integral-weight vector, so that direction is projected out first
        (for inhomogeneous boundary data it carries the boundary flux).
        """
        c = self.c1
        out = []
        for v in (f.u, f.w):
            r = self.B @ v
            r = r - c * (np.dot(c, r) / np.dot(c, c))
            out.append(float(np.linalg.norm(r)))
        return out[0], out[1]


# ---------------------------------------------------------------------------
# the step problem


@dataclass
class Problem:
    """A discretised initial-boundary value problem.

    ``boundary(t)`` returns the nodal Dirichlet values of (u, w) on the
    boundary dofs of the vector space (``None`` means homogeneous).
    ``forcing(t)`` returns quadrature-point right-hand sides ``(g_u, g_phi)``
    for manufactured solutions.
    """

    disc: Discretization
    params: PhysParams
    boundary: Callable | None = None
    forcing: Callable | None = None


@dataclass
class NewtonInfo:
    iterations: int
    residual: float
    residual0: float
    factorizations: int = 0
    history: list = field(default_factory=list)


class StepSystem:
    """Residual and Jacobian of one DLN step in the level n+1 unknowns."""

    def __init__(self, problem: Problem, state: FieldState, coeffs: DlnCoeffs, t_next: float):
        self.problem = problem
        self.disc = problem.disc
        self.params = problem.params
        self.state = state
        self.coeffs = coeffs
        self.t_next = t_next
        d = self.disc
        a0, a1, _ = coeffs.alpha
        b0, b1, _ = coeffs.beta
        prev, curr = state.prev, state.curr
        # known parts of the alpha- and beta-combinations
        self.known_a = {n: a0 * getattr(prev, n) + a1 * getattr(curr, n) for n in FIELD_NAMES}
        self.known_b = {n: b0 * getattr(prev, n) + b1 * getattr(curr, n) for n in FIELD_NAMES}
        th = coeffs.theta
        self.phi_theta_n = 0.5 * (1 + th) * curr.phi + 0.5 * (1 - th) * prev.phi
        t_beta = b0 * state.t_prev + b1 * state.t_curr + coeffs.beta[2] * t_next
        self.t_beta = t_beta
        shape = d.geo.wdet.shape
        if problem.forcing is not None:
            gu, gphi = problem.forcing(t_beta)
            self.g_u = np.broadcast_to(gu, shape + (2,))
            self.g_phi = np.broadcast_to(gphi, shape)
        else:
            self.g_u = None
            self.g_phi = None
        if problem.boundary is not None:
            self.bc_values = problem.boundary(t_next)
        else:
            self.bc_values = None
        self.c_mass = coeffs.alpha[2] / coeffs.k_hat

    def impose_bc(self, x: np.ndarray) -> np.ndarray:
        d = self.disc
        bnd = d.vel.boundary_dofs
        if self.bc_values is None:
            x[d.off["u"] + bnd] = 0.0
            x[d.off["w"] + bnd] = 0.0
        else:
            ub, wb = self.bc_values
            x[d.off["u"] + bnd] = ub
            x[d.off["w"] + bnd] = wb
        x[d.pinned] = 0.0
        return x

    def _combos(self, x):
        d = self.disc
        o = d.off
        a2 = self.coeffs.alpha[2]
        b2 = self.coeffs.beta[2]
        new = {n: x[o[n]:o[n] + d.sizes[n]] for n in FIELD_NAMES}
        za = {n: self.known_a[n] + a2 * new[n] for n in ("u", "phi")}
        zb = {n: self.known_b[n] + b2 * new[n] for n in FIELD_NAMES}
        return new, za, zb

    def _quad(self, x):
        d = self.disc
        new, za, zb = self._combos(x)
        u, gu = evaluate(d.vel, zb["u"])
        phi, gphi = evaluate(d.scal, zb["phi"])
        m, _ = evaluate(d.scal, zb["m"])
        th = self.coeffs.theta
        phi_theta_next = 0.5 * (1 + th) * new["phi"] + 0.5 * (1 - th) * self.state.curr.phi
        a, _ = evaluate(d.scal, phi_theta_next)
        b, _ = evaluate(d.scal, self.phi_theta_n)
        return new, za, zb, (u, gu, phi, gphi, m, a, b)

    def residual(self, x: np.ndarray) -> np.ndarray:
        d = self.disc
        P = self.params
        o = d.off
        new, za, zb, (u, gu, phi, gphi, m, a, b) = self._quad(x)
        cm = 1.0 / self.coeffs.k_hat
        r = np.empty(d.size)

        # momentum
        adv = np.einsum("eqd,eqad->eqa", u, gu)  # (u . grad) u
        f0 = 0.5 * P.nu * adv + P.lam * np.sum(u * u, axis=-1, keepdims=True) * u - m[..., None] * gphi
        if self.g_u is not None:
            f0 = f0 - self.g_u
        f1 = -0.5 * P.nu * u[..., :, None] * u[..., None, :]
        ru = load_vector(d.vel, f0=f0, f1=f1 if P.nu != 0.0 else None)
        ru += cm * (d.Mv @ za["u"]) + d.Kv @ (P.mu * zb["u"] + P.gamma * zb["w"])
        ru += P.rho * (d.Mv @ zb["u"]) - d.BT @ zb["p"]
        r[o["u"]:o["w"]] = ru
        # w = -Lap u - grad xi, weakly
        r[o["w"]:o["xi"]] = d.Mv @ new["w"] - d.BT @ new["xi"] - d.Kv @ new["u"]
        r[o["xi"]:o["p"]] = d.mean_free_divergence(new["w"])
        r[o["p"]:o["phi"]] = d.mean_free_divergence(new["u"])
        # phase field
        g0 = np.sum(u * gphi, axis=-1)
        if self.g_phi is not None:
            g0 = g0 - self.g_phi
        rphi = load_vector(d.scal, f0=g0)
        rphi += cm * (d.M2 @ za["phi"]) + P.sigma * (d.M2 @ zb["m"])
        r[o["phi"]:o["m"]] = rphi
        rm = d.M2 @ zb["m"] - P.kappa * (d.K2 @ zb["phi"])
        rm -= P.kappa * load_vector(d.scal, f0=f_tilde(a, b, P.eta))
        r[o["m"]:o["end"]] = rm
        r[d.bc_dofs] = 0.0
        return r

    def jacobian_data(self, x: np.ndarray, picard: bool = False) -> np.ndarray:
        """Exact Jacobian, or with ``picard`` the lagged-velocity linearisation
        that drops the derivatives with respect to the advecting velocity and
        the cross terms of the cubic damping."""
        d = self.disc
        P = self.params
        b2 = self.coeffs.beta[2]
        th = self.coeffs.theta
        data = d.constant_jacobian(self.c_mass, b2, P).copy()
        _, _, _, (u, gu, phi, gphi, m, a, b) = self._quad(x)
        geo = d.geo
        psi, dpsi, wdet = geo.psi2, geo.dpsi2, geo.wdet
        sb = kernels.scatter_bilinear
        uu = np.sum(u * u, axis=-1)
        for ia in range(2):
            for ic in range(2):
                if picard:
                    c0 = np.zeros_like(uu)
                else:
                    c0 = P.lam * 2.0 * u[..., ia] * u[..., ic] + 0.5 * P.nu * gu[..., ia, ic]
                if ia == ic:
                    c0 = c0 + P.lam * uu
                c1 = 0.5 * P.nu * u if ia == ic else None
                c2 = np.zeros_like(u)
                if not picard:
                    c2[..., ic] -= 0.5 * P.nu * u[..., ia]
                if ia == ic:
                    c2 -= 0.5 * P.nu * u
                sb(data, d.pos[("uu", ia, ic)], psi, dpsi, wdet, c0=c0, c1=c1,
                   c2=c2 if P.nu != 0.0 else None, scale=b2)
            ea = np.zeros_like(u)
            ea[..., ia] = -m
            sb(data, d.pos[("uphi", ia)], psi, dpsi, wdet, c1=ea, scale=b2)
            sb(data, d.pos[("um", ia)], psi, dpsi, wdet, c0=-gphi[..., ia], scale=b2)
            sb(data, d.pos[("phiu", ia)], psi, dpsi, wdet, c0=gphi[..., ia], scale=b2)
        sb(data, d.pos["phiphi"], psi, dpsi, wdet, c1=u, scale=b2)
        sb(data, d.pos["mphi"], psi, dpsi, wdet, c0=df_tilde_da(a, b, P.eta),
           scale=-P.kappa * 0.5 * (1 + th))
        return d.apply_bc(data)

    def jacobian(self, x: np.ndarray) -> sp.csc_matrix:
        return self.disc.csc(self.jacobian_data(x))

    def picard_jacobian(self, x: np.ndarray) -> sp.csc_matrix:
        return self.disc.csc(self.jacobian_data(x, picard=True))


# ---------------------------------------------------------------------------
# Newton


class LinearSolver:
    """Factorises a Jacobian and applies its inverse."""

    def __init__(self, A: sp.csc_matrix, cfg: SolverConfig):
        self.cfg = cfg
        self.A = A
        try:
            self.lu = spla.splu(A, permc_spec="COLAMD")
        except RuntimeError as exc:  # "Factor is exactly singular"
            raise ConfigurationError(f"singular Jacobian: {exc}") from exc

    def solve(self, rhs):
        if self.cfg.linear_solver == "direct":
            return self.lu.solve(rhs)
        M = spla.LinearOperator(self.A.shape, matvec=self.lu.solve)
        sol, info = spla.gmres(self.A, rhs, M=M, rtol=self.cfg.linear_tol, atol=0.0)
        if info != 0:
            raise StepFailure(f"GMRES did not converge (info={info})")
        return sol


class NewtonSolver:
    """Newton iteration with optional reuse of factorised Jacobians.

    With ``reuse_jacobian`` factorisations are kept across iterations and
    across steps, keyed by the DLN coefficients of the step (at most
    ``lu_cache`` of them, least recently used first out).  An entry is
    dropped as soon as one iteration with it reduces the residual by less
    than ``reuse_contraction``.
    """

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self._cache: OrderedDict = OrderedDict()
        self.total_factorizations = 0

    def _lookup(self, key):
        if not self.cfg.reuse_jacobian or key not in self._cache:
            return None
        self._cache.move_to_end(key)
        return self._cache[key]

    def _store(self, key, solver):
        if not self.cfg.reuse_jacobian:
            return
        self._cache[key] = solver
        self._cache.move_to_end(key)
        while len(self._cache) > self.cfg.lu_cache:
            self._cache.popitem(last=False)

    def solve(self, residual, jacobian, x0, key=None, picard=None):
        """Iterate from ``x0``; the first ``picard_warmup_iters`` iterations use
        ``picard(x)`` instead of ``jacobian(x)`` when it is given."""
        cfg = self.cfg
        x = x0.copy()
        r = residual(x)
        r0 = float(np.linalg.norm(r))
        rn = r0
        info = NewtonInfo(0, r0, r0, history=[r0])
        tol = cfg.newton_tol + cfg.newton_rtol * r0
        if not np.isfinite(rn):
            raise StepFailure("non-finite initial residual", rn, 0)
        current = self._lookup(key)
        it = 0
        while rn > tol:
            if it >= cfg.newton_max_iter:
                raise StepFailure(
                    f"Newton failed to converge in {it} iterations (residual {rn:.3e})", rn, it
                )
            warm = picard is not None and it < cfg.picard_warmup_iters
            if warm or current is None:
                solver = LinearSolver(picard(x) if warm else jacobian(x), cfg)
                info.factorizations += 1
                self.total_factorizations += 1
                # a lagged factorisation is never kept for later iterations
                if not warm:
                    current = solver
                    self._store(key, solver)
            else:
                solver = current
            dx = solver.solve(-r)
            x += dx
            r = residual(x)
            rnew = float(np.linalg.norm(r))
            it += 1
            info.history.append(rnew)
            if not np.isfinite(rnew):
                raise StepFailure("Newton produced a non-finite residual", rnew, it)
            if not cfg.reuse_jacobian or rnew > cfg.reuse_contraction * rn:
                current = None
                self._cache.pop(key, None)
            rn = rnew
        info.iterations = it
        info.residual = rn
        return x, info


def solve_nonlinear(residual, jacobian, x0, cfg: SolverConfig):
    """Plain Newton solve of residual(x) = 0; returns (x, NewtonInfo)."""
    return NewtonSolver(replace(cfg, reuse_jacobian=False)).solve(residual, jacobian, x0)


# ---------------------------------------------------------------------------
# time steps


def _predict(state: FieldState, disc: Discretization, k_n: float, mode: str) -> np.ndarray:
    cur = disc.pack(state.curr)
    if mode == "previous" or state.k_prev <= 0:
        return cur
    prev = disc.pack(state.prev)
    return cur + (k_n / state.k_prev) * (cur - prev)


def dln_step(problem: Problem, state: FieldState, k_n: float, theta: float, cfg: SolverConfig,
             k_prev: float | None = None, newton: NewtonSolver | None = None):
    """Advance ``state`` by one DLN step of size ``k_n``.

    Returns ``(new_state, coeffs, info)``.  Raises :class:`StepFailure` when
    Newton does not converge.
    """
    k_prev = state.k_prev if k_prev is None else k_prev
    coeffs = compute_coeffs(theta, k_n, k_prev)
    t_next = state.t_curr + k_n
    system = StepSystem(problem, state, coeffs, t_next)
    x0 = system.impose_bc(_predict(state, problem.disc, k_n, cfg.predictor))
    newton = newton or NewtonSolver(cfg)
    # coefficients agree to rounding when steps are equal up to time-sum drift
    key = tuple(float(f"{v:.9e}") for v in (*coeffs.alpha, *coeffs.beta, coeffs.k_hat))
    x, info = newton.solve(system.residual, system.jacobian, x0, key=key, picard=system.picard_jacobian)
    d = problem.disc
    new = d.unpack(x)
    new = replace(new, xi=d.zero_mean(new.xi), p=d.zero_mean(new.p))
    return state.advance(t_next, new), coeffs, info


def cn_bootstrap(problem: Problem, state0: FieldState, k0: float, cfg: SolverConfig,
                 newton: NewtonSolver | None = None):
    """First step by the Crank-Nicolson (theta = 1) member of the family.

    ``state0`` only needs its current level; the previous level gets
    coefficient zero.
    """
    st = FieldState(state0.t_curr - k0, state0.t_curr, state0.curr, state0.curr)
    cfg = replace(cfg, predictor="previous")
    return dln_step(problem, st, k0, 1.0, cfg, k_prev=k0, newton=newton)


# ---------------------------------------------------------------------------
# initial data


def initial_from_exact(problem: Problem, exact, t0: float = 0.0) -> FieldState:
    """Projected initial data: Stokes-type projection for (u, w, p, xi), Ritz for phi and m."""
    d = problem.disc
    P = problem.params
    e = exact.at(t0)
    su, sw, sp_, sxi = stokes_project(e["u"], e["w"], e["p"], e["xi"], d.vel, d.pres, P.mu, P.gamma)
    phi = ritz_project(e["phi"], d.scal)
    m = ritz_project(e["m"], d.scal)
    f = Fields(su, sw, sxi, sp_, phi, m)
    return FieldState(t0, t0, f, f)


def initial_from_nodal(problem: Problem, u0: np.ndarray, phi0: np.ndarray, t0: float = 0.0) -> FieldState:
    """Initial data from nodal values.

    ``u0`` is projected onto discretely divergence-free fields with zero
    boundary values; w, xi follow from the mixed Laplacian equations and m
    from the chemical potential equation at t0.  The initial pressure is zero.
    """
    d = problem.disc
    P = problem.params
    u = leray_project(np.asarray(u0, dtype=float), d.vel, d.pres)
    # (w, psi) - (xi, div psi) = (grad u, grad psi), (div w, zeta) = 0, mean(xi) = 0
    A = sp.bmat([[d.Mv, -d.BT], [d.B, None]], format="csr")
    rhs = np.concatenate([d.Kv @ u, np.zeros(d.n1)])
    fixed = np.concatenate([d.vel.boundary_dofs, [2 * d.n2 + PIN_DOF]])
    sol = solve_fixed(A, rhs, fixed, np.zeros(len(fixed)))
    w = sol[:2 * d.n2]
    xi = d.zero_mean(sol[2 * d.n2:])
    phi = np.asarray(phi0, dtype=float)
    fq, _ = evaluate(d.scal, phi)
    rhs_m = P.kappa * (d.K2 @ phi + load_vector(d.scal, f0=f_of_phi(fq, P.eta)))
    m = spla.spsolve(d.M2.tocsc(), rhs_m)
    f = Fields(u, w, xi, np.zeros(d.n1), phi, m)
    return FieldState(t0, t0, f, f)


def init_state(problem: Problem, initializer, t0: float = 0.0) -> FieldState:
    """Dispatch on the initialiser: an exact solution (has ``at``) or nodal data."""
    if hasattr(initializer, "at"):
        return initial_from_exact(problem, initializer, t0)
    u0, phi0 = initializer
    return initial_from_nodal(problem, u0, phi0, t0)
