"""Element kernels, compiled when the extension is built.

Set ``ACDLN_PURE_PYTHON=1`` to force the numpy implementation.
"""
import os

import numpy as np

from . import _kernels_py

_ext = None
if os.environ.get("ACDLN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _ext
    except ImportError:  # extension not built
        _ext = None

BACKEND = "cython" if _ext is not None else "numpy"

_EMPTY2 = np.zeros((1, 1))
_EMPTY3 = np.zeros((1, 1, 2))


def _c(a, ndim):
    if a is None:
        return (_EMPTY2 if ndim == 2 else _EMPTY3), False
    return np.ascontiguousarray(a, dtype=float), True


if _ext is not None:

    def evaluate(coef, dofs, psi, dpsi):
        return _ext.evaluate(np.ascontiguousarray(coef, dtype=float), dofs, psi, dpsi)

    def assemble_load(out, dofs, psi, dpsi, wdet, f0=None, f1=None):
        f0, h0 = _c(f0, 2)
        f1, h1 = _c(f1, 3)
        _ext._load(out, dofs, psi, dpsi, wdet, f0, f1, h0, h1)
        return out

    def scatter_bilinear(data, pos, psi, dpsi, wdet, c0=None, c1=None, c2=None, scale=1.0):
        c0, h0 = _c(c0, 2)
        c1, h1 = _c(c1, 3)
        c2, h2 = _c(c2, 3)
        _ext._bilinear(data, pos, psi, dpsi, wdet, c0, c1, c2, h0, h1, h2, float(scale))
        return data

else:
    evaluate = _kernels_py.evaluate
    assemble_load = _kernels_py.assemble_load
    scatter_bilinear = _kernels_py.scatter_bilinear

local_bilinear = _kernels_py.local_bilinear

__all__ = ["BACKEND", "evaluate", "assemble_load", "scatter_bilinear", "local_bilinear"]
