"""Discrete model energy, the dissipation monitor and the ND/VD/PD indicators."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dln import DlnCoeffs, combine_theta, g_norm_pair
from .fem.assembly import evaluate
from .solver import Discretization, Fields, PhysParams, F_of_phi

log = logging.getLogger(__name__)

# relative floor for the dissipation denominators in chi
CHI_FLOOR = 1e-14

CSV_FIELDS = ("step", "t", "k", "E", "eps_ND_u", "eps_ND_phi", "eps_VD_u", "eps_PD_phi",
              "chi_u", "chi_phi", "newton_iters")


@dataclass(frozen=True)
class EnergyRecord:
    step: int
    t: float
    k: float
    E: float
    eps_ND_u: float = 0.0
    eps_ND_phi: float = 0.0
    eps_VD_u: float = 0.0
    eps_PD_phi: float = 0.0
    chi_u: float = 0.0
    chi_phi: float = 0.0
    newton_iters: int = 0

    def row(self) -> list:
        d = asdict(self)
        return [d[name] for name in CSV_FIELDS]


def discrete_energy(disc: Discretization, curr: Fields, prev: Fields, theta: float, params: PhysParams) -> float:
    """Energy of the level pair (curr, prev).

    |(u_c, u_p)|_G^2 + kappa (|(grad phi_c, grad phi_p)|_G^2 + integral of F(phi_theta)).
    """
    kin = g_norm_pair(curr.u, prev.u, theta, disc.Mv)
    grad = g_norm_pair(curr.phi, prev.phi, theta, disc.K2)
    phi_theta = combine_theta(prev.phi, curr.phi, theta)
    val, _ = evaluate(disc.scal, phi_theta)
    pot = float(np.sum(F_of_phi(val, params.eta) * disc.geo.wdet))
    return kin + params.kappa * (grad + pot)


@dataclass(frozen=True)
class DissipationCheck:
    passed: bool
    gap: float  # E_next - E_curr
    advisory: bool  # energy decay is not guaranteed when rho < 0


def check_dissipation(E_next: float, E_curr: float, tol: float, params: PhysParams | None = None) -> DissipationCheck:
    """E_next <= E_curr + tol.  With rho < 0 the result is only advisory."""
    gap = E_next - E_curr
    advisory = params is not None and params.rho < 0
    return DissipationCheck(bool(gap <= tol), gap, advisory)


def _ratio(nd: float, d: float) -> float:
    if nd == 0.0 and d == 0.0:
        return 0.0
    return nd / max(d, CHI_FLOOR * (nd + d))


def dissipation_indicators(disc: Discretization, prev: Fields, curr: Fields, nxt: Fields,
                           coeffs: DlnCoeffs, params: PhysParams) -> dict:
    """Numerical, viscous and phase dissipation rates of a completed step, and their ratios."""
    a0, a1, a2 = coeffs.alpha
    b0, b1, b2 = coeffs.beta
    ua = a0 * prev.u + a1 * curr.u + a2 * nxt.u
    pa = a0 * prev.phi + a1 * curr.phi + a2 * nxt.phi
    ub = b0 * prev.u + b1 * curr.u + b2 * nxt.u
    pb = b0 * prev.phi + b1 * curr.phi + b2 * nxt.phi
    nd_u = float(ua @ (disc.Mv @ ua)) / coeffs.k_hat
    nd_phi = float(pa @ (disc.M2 @ pa)) / coeffs.k_hat
    vd = params.mu * float(ub @ (disc.Kv @ ub))
    pd = params.kappa * float(pb @ (disc.K2 @ pb))
    # the quadratic forms are nonnegative up to rounding
    nd_u, nd_phi, vd, pd = (max(v, 0.0) for v in (nd_u, nd_phi, vd, pd))
    return {
        "eps_ND_u": nd_u,
        "eps_ND_phi": nd_phi,
        "eps_VD_u": vd,
        "eps_PD_phi": pd,
        "chi_u": _ratio(nd_u, vd),
        "chi_phi": _ratio(nd_phi, pd),
    }


class EnergyMonitor:
    """Collects records and checks consecutive energies against ``tol``.

    Violations are logged; in strict mode they raise.  Negative rho turns
    the check into an advisory one that never raises.
    """

    def __init__(self, params: PhysParams, tol: float, strict: bool = False):
        self.params = params
        self.tol = tol
        self.strict = strict
        self.records: list[EnergyRecord] = []
        self.violations: list[tuple[int, float]] = []

    def add(self, record: EnergyRecord) -> None:
        if not math.isfinite(record.E):
            raise FloatingPointError(f"non-finite energy at step {record.step}")
        if self.records:
            chk = check_dissipation(record.E, self.records[-1].E, self.tol, self.params)
            if not chk.passed:
                self.violations.append((record.step, chk.gap))
                level = logging.INFO if chk.advisory else logging.WARNING
                log.log(level, "energy increased by %.3e at step %d (t=%.6g)", chk.gap, record.step, record.t)
                if self.strict and not chk.advisory:
                    raise RuntimeError(f"energy increased by {chk.gap:.3e} at step {record.step}")
        self.records.append(record)
