"""Compiled vs numpy element kernels on a P2 mesh.

    python benchmarks/bench_kernels.py [--cells 64] [--repeat 5]

Times field evaluation, load assembly and bilinear scatter with both
backends, checks that they agree, and prints the speed-up.
"""
import argparse
import time

import numpy as np

from acdln import _kernels_py
from acdln.fem.assembly import _scalar_dofs, geometry
from acdln.mesh import build_rectangle_mesh
from acdln.solver import Discretization

try:
    from acdln import _kernels as _ext
except ImportError:
    _ext = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(disc, rng):
    geo = geometry(disc.mesh)
    psi, dpsi, wdet = geo.psi2, geo.dpsi2, geo.wdet
    dofs = _scalar_dofs(disc.scal)
    coef = rng.standard_normal(disc.scal.n_dofs)
    c0 = rng.standard_normal(wdet.shape)
    c1 = rng.standard_normal(wdet.shape + (2,))
    pos = disc.pos["phiphi"]
    nnz = len(disc.indices)
    n = disc.scal.n_dofs
    empty3 = np.zeros((1, 1, 2))

    def ext_load():
        out = np.zeros(n)
        _ext._load(out, dofs, psi, dpsi, wdet, c0, c1, True, True)
        return out

    def ext_bilinear():
        data = np.zeros(nnz)
        _ext._bilinear(data, pos, psi, dpsi, wdet, c0, c1, empty3, True, True, False, 1.0)
        return data

    return {
        "evaluate": (
            lambda: _kernels_py.evaluate(coef, dofs, psi, dpsi),
            lambda: _ext.evaluate(coef, dofs, psi, dpsi),
        ),
        "load": (
            lambda: _kernels_py.assemble_load(np.zeros(n), dofs, psi, dpsi, wdet, c0, c1),
            ext_load,
        ),
        "bilinear": (
            lambda: _kernels_py.scatter_bilinear(np.zeros(nnz), pos, psi, dpsi, wdet, c0, c1),
            ext_bilinear,
        ),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=64, help="cells per side of the unit square")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ext is None:
        raise SystemExit("compiled kernels are not built; reinstall with Cython available")

    disc = Discretization(build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), args.cells, args.cells))
    rng = np.random.default_rng(0)
    print(f"{disc.mesh.n_triangles} triangles, {disc.scal.n_dofs} P2 dofs")
    print(f"{'kernel':<10}{'numpy [ms]':>12}{'cython [ms]':>13}{'speed-up':>10}{'max diff':>12}")
    for name, (py_fn, ext_fn) in cases(disc, rng).items():
        t_py, r_py = best_of(py_fn, args.repeat)
        t_ext, r_ext = best_of(ext_fn, args.repeat)
        r_py = r_py if isinstance(r_py, tuple) else (r_py,)
        r_ext = r_ext if isinstance(r_ext, tuple) else (r_ext,)
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(r_py, r_ext))
        print(f"{name:<10}{1e3 * t_py:>12.2f}{1e3 * t_ext:>13.2f}{t_py / t_ext:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
