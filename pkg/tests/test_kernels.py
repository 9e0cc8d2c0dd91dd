"""The compiled kernels agree with the numpy reference implementation."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from acdln import _kernels_py, kernels
from acdln.fem.assembly import _scalar_dofs, geometry

ext = pytest.importorskip("acdln._kernels")


@pytest.fixture(scope="module")
def setup(disc4):
    geo = geometry(disc4.mesh)
    return disc4, geo, _scalar_dofs(disc4.scal)


@given(seed=st.integers(0, 2 ** 31))
def test_evaluate(setup, seed):
    disc, geo, dofs = setup
    coef = np.random.default_rng(seed).standard_normal(disc.scal.n_dofs)
    v0, g0 = _kernels_py.evaluate(coef, dofs, geo.psi2, geo.dpsi2)
    v1, g1 = ext.evaluate(coef, dofs, geo.psi2, geo.dpsi2)
    assert np.allclose(v0, v1, rtol=0, atol=1e-13)
    assert np.allclose(g0, g1, rtol=0, atol=1e-12)


@given(seed=st.integers(0, 2 ** 31), use0=st.booleans(), use1=st.booleans())
def test_load(setup, seed, use0, use1):
    disc, geo, dofs = setup
    rng = np.random.default_rng(seed)
    f0 = rng.standard_normal(geo.wdet.shape) if use0 else None
    f1 = rng.standard_normal(geo.wdet.shape + (2,)) if use1 else None
    n = disc.scal.n_dofs
    ref = _kernels_py.assemble_load(np.zeros(n), dofs, geo.psi2, geo.dpsi2, geo.wdet, f0, f1)
    got = kernels.assemble_load(np.zeros(n), dofs, geo.psi2, geo.dpsi2, geo.wdet, f0, f1)
    assert np.allclose(ref, got, rtol=0, atol=1e-13)


@given(seed=st.integers(0, 2 ** 31), flags=st.tuples(st.booleans(), st.booleans(), st.booleans()),
       scale=st.floats(-3, 3))
def test_bilinear(setup, seed, flags, scale):
    disc, geo, dofs = setup
    rng = np.random.default_rng(seed)
    c0 = rng.standard_normal(geo.wdet.shape) if flags[0] else None
    c1 = rng.standard_normal(geo.wdet.shape + (2,)) if flags[1] else None
    c2 = rng.standard_normal(geo.wdet.shape + (2,)) if flags[2] else None
    pos = disc.pos["phiphi"]
    nnz = len(disc.indices)
    ref = _kernels_py.scatter_bilinear(np.zeros(nnz), pos, geo.psi2, geo.dpsi2, geo.wdet, c0, c1, c2, scale)
    got = kernels.scatter_bilinear(np.zeros(nnz), pos, geo.psi2, geo.dpsi2, geo.wdet, c0, c1, c2, scale)
    assert np.allclose(ref, got, rtol=0, atol=1e-13)


def test_backend_selection_respects_environment():
    env = dict(os.environ, ACDLN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import acdln.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    assert kernels.BACKEND == "cython"
