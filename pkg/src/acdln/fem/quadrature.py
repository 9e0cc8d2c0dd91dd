"""Symmetric quadrature on the reference triangle (0,0), (1,0), (0,1)."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

# Dunavant's 16-point rule, exact for polynomials of total degree 8.
# (weight, orbit) with weights normalised to sum to one.
_DUNAVANT8 = (
    (0.144315607677787, (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)),
    (0.095091634267285, (0.459292588292723, 0.459292588292723, 0.081414823414554)),
    (0.103217370534718, (0.170569307751760, 0.170569307751760, 0.658861384496480)),
    (0.032458497623198, (0.050547228317031, 0.050547228317031, 0.898905543365938)),
    (0.027230314174435, (0.008394777409958, 0.263112829634638, 0.728492392955404)),
)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # barycentric, (nq, 3)
    weights: np.ndarray  # sum to 1/2, the reference area
    degree: int

    @property
    def xy(self) -> np.ndarray:
        """Reference coordinates (second and third barycentric)."""
        return self.points[:, 1:]

    def __len__(self) -> int:
        return len(self.weights)


def dunavant8() -> QuadratureRule:
    pts, wts = [], []
    for w, orbit in _DUNAVANT8:
        for p in sorted(set(permutations(orbit))):
            pts.append(p)
            wts.append(w)
    points = np.array(pts)
    points[:, 0] = 1.0 - points[:, 1] - points[:, 2]
    return QuadratureRule(points=points, weights=0.5 * np.array(wts), degree=8)


DEFAULT_RULE = dunavant8()
