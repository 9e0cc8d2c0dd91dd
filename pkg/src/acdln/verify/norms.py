"""Quadrature error norms and least-squares rate fitting."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..fem.assembly import evaluate, geometry
from ..mesh import DofMap


def _exact_at(func, xq, vector):
    x, y = xq[..., 0], xq[..., 1]
    v = func(x, y)
    if vector:
        return np.stack([np.broadcast_to(v[0], x.shape), np.broadcast_to(v[1], x.shape)], axis=-1)
    return np.broadcast_to(v, x.shape)


def _exact_grad_at(grad, xq, vector):
    x, y = xq[..., 0], xq[..., 1]
    g = grad(x, y)
    if vector:
        return np.stack(
            [np.stack([np.broadcast_to(c, x.shape) for c in row], axis=-1) for row in g], axis=-2
        )
    return np.stack([np.broadcast_to(c, x.shape) for c in g], axis=-1)


def error_norms(space: DofMap, coef: np.ndarray, exact: Callable, grad: Callable | None = None,
                norm: str = "L2", remove_mean: bool = False) -> float:
    """Quadrature value of the L2 norm or H1 seminorm of ``exact - numeric``.

    ``norm`` is ``"L2"`` or ``"H1"``; the H1 value is the gradient seminorm,
    which is what the spatial rate tables report.  With ``remove_mean`` both
    functions are compared after subtracting their averages (used for the
    pressure-like fields, which are only defined up to a constant).
    """
    if norm not in ("L2", "H1"):
        raise ValueError(f"unknown norm {norm!r}")
    geo = geometry(space.mesh)
    vector = space.kind == "P2v"
    val, gval = evaluate(space, np.asarray(coef, dtype=float))
    if norm == "L2":
        diff = _exact_at(exact, geo.xq, vector) - val
        if remove_mean:
            area = geo.wdet.sum()
            diff = diff - np.einsum("eq,eq...->...", geo.wdet, diff) / area
    else:
        if grad is None:
            raise ValueError("the H1 seminorm needs the exact gradient")
        diff = _exact_grad_at(grad, geo.xq, vector) - gval
    sq = diff * diff
    while sq.ndim > 2:
        sq = sq.sum(axis=-1)
    return float(np.sqrt(np.sum(sq * geo.wdet)))


def fit_rate(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Slope of the least-squares line through (log step, log error)."""
    steps = np.asarray(steps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if steps.shape != errors.shape or steps.ndim != 1:
        raise ValueError("steps and errors must be 1-D sequences of equal length")
    if len(steps) < 2:
        raise ValueError("at least two samples are needed to fit a rate")
    if np.any(steps <= 0) or np.any(errors <= 0):
        raise ValueError("steps and errors must be positive")
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    return float(slope)
