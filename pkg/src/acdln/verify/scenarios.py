"""Two-dimensional test scenarios: spinodal decomposition, bubble merging and bubble shrinking.

Every scenario uses homogeneous Dirichlet data for the velocity and natural
boundary conditions for the phase field.  Random initial data are drawn per
nodal dof from a seeded generator, so a seed fixes the run bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..mesh import build_rectangle_mesh
from ..solver import Discretization, PhysParams, Problem, initial_from_nodal

SCENARIOS = ("spinodal", "bubble_merge", "bubble_shrink")


@dataclass(frozen=True)
class Bubbles:
    """phi_0 = 1 + sum_i tanh((r_i - |x - c_i|) / width)."""

    centers: tuple[tuple[float, float], ...]
    radii: tuple[float, ...]
    width: float

    def __call__(self, x, y):
        out = np.ones(np.broadcast(x, y).shape)
        for (cx, cy), r in zip(self.centers, self.radii):
            out = out + np.tanh((r - np.hypot(x - cx, y - cy)) / self.width)
        return out


@dataclass(frozen=True)
class UniformNoise:
    """Independent uniform values on [low, high] at every nodal dof."""

    low: float
    high: float


@dataclass(frozen=True)
class Scenario:
    name: str
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    params: PhysParams
    T: float
    k: float  # constant step (also the initial step of adaptive runs unless overridden)
    h: float  # target mesh size
    phi0: object  # Bubbles or UniformNoise
    u0: UniformNoise = UniformNoise(-1.0, 1.0)
    snapshot_times: tuple[float, ...] = ()
    seed: int = 0
    theta: float = 0.3

    def __post_init__(self):
        if self.T <= 0 or self.k <= 0 or self.h <= 0:
            raise ValueError("horizon, step and mesh size must be positive")

    @property
    def cells(self) -> tuple[int, int]:
        lx = self.x_range[1] - self.x_range[0]
        ly = self.y_range[1] - self.y_range[0]
        return max(1, round(lx / self.h)), max(1, round(ly / self.h))

    def mesh(self):
        nx, ny = self.cells
        return build_rectangle_mesh(self.x_range, self.y_range, nx, ny)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def initial_data(self, disc: Discretization):
        """Nodal (u0, phi0) coefficient vectors before any projection."""
        rng = np.random.default_rng(self.seed)
        n = disc.scal.n_dofs
        if isinstance(self.phi0, UniformNoise):
            phi = rng.uniform(self.phi0.low, self.phi0.high, size=n)
        else:
            phi = disc.scal.interpolate(self.phi0)
        u = rng.uniform(self.u0.low, self.u0.high, size=2 * n)
        u[disc.vel.boundary_dofs] = 0.0
        return u, phi

    def setup(self, disc: Discretization | None = None):
        """Discretisation, problem and initial state of this scenario."""
        disc = disc or Discretization(self.mesh())
        problem = Problem(disc, self.params)
        u, phi = self.initial_data(disc)
        state = initial_from_nodal(problem, u, phi, 0.0)
        return disc, problem, state


def scenario_library(name: str, **overrides) -> Scenario:
    """Scenario by name; keyword arguments override fields (``params`` included)."""
    base = {
        "spinodal": dict(
            x_range=(0.0, 1.5), y_range=(0.0, 1.5),
            params=PhysParams(sigma=100.0, kappa=0.01),
            T=2.0, k=0.01, h=1.0 / 64,
            phi0=UniformNoise(-0.001, 0.001),
            snapshot_times=(0.0, 0.3, 1.0, 2.0),
        ),
        "bubble_merge": dict(
            x_range=(0.0, 1.5), y_range=(0.0, 1.5),
            params=PhysParams(sigma=10.0, kappa=0.01),
            T=0.4, k=0.01, h=1.0 / 64,
            phi0=Bubbles(((0.5, 0.75), (1.0, 0.75)), (0.25, 0.25), 0.02),
            snapshot_times=(0.0, 0.1, 0.2, 0.4),
        ),
        "bubble_shrink": dict(
            x_range=(0.0, 2 * math.pi), y_range=(0.0, 2 * math.pi),
            params=PhysParams(sigma=10.0, kappa=0.01),
            T=1.2, k=0.01, h=1.0 / 64,
            phi0=Bubbles(((math.pi - 0.8, math.pi), (math.pi + 1.7, math.pi)), (1.4, 0.5), 0.06),
            snapshot_times=(0.0, 0.5, 0.8, 1.2),
        ),
    }
    if name not in base:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    fields = base[name]
    fields.update(overrides)
    return Scenario(name=name, **fields)
