"""Pure numpy versions of the element kernels in ``_kernels.pyx``.

Array conventions shared by both implementations:

psi   (nq, nb)        basis values at the quadrature points
dpsi  (ne, nq, nb, 2) physical basis gradients
wdet  (ne, nq)        quadrature weight times |det J|
dofs  (ne, nb)        global indices of the local basis functions
pos   (ne, nb, nb)    slot of entry (test i, trial j) in a sparse data array
"""
import numpy as np


def evaluate(coef, dofs, psi, dpsi):
    """Values and gradients of a scalar field at every quadrature point."""
    local = coef[dofs]
    val = local @ psi.T
    grad = np.einsum("ei,eqid->eqd", local, dpsi)
    return val, grad


def assemble_load(out, dofs, psi, dpsi, wdet, f0=None, f1=None):
    """out[dofs[e, i]] += sum_q wdet (f0 psi_i + f1 . grad psi_i)."""
    loc = np.zeros(dofs.shape)
    if f0 is not None:
        loc += (f0 * wdet) @ psi
    if f1 is not None:
        loc += np.einsum("eqd,eqid->ei", f1 * wdet[..., None], dpsi)
    out += np.bincount(dofs.ravel(), weights=loc.ravel(), minlength=len(out))
    return out


def local_bilinear(psi, dpsi, wdet, c0=None, c1=None, c2=None):
    """Element matrices (test i, trial j) of
    c0 psi_i psi_j + c1 . grad(psi_j) psi_i + c2 . grad(psi_i) psi_j."""
    ne, nq, nb, _ = dpsi.shape
    loc = np.zeros((ne, nb, nb))
    if c0 is not None:
        loc += np.einsum("eq,qi,qj->eij", c0 * wdet, psi, psi, optimize=True)
    if c1 is not None:
        adv = np.einsum("eqd,eqjd->eqj", c1 * wdet[..., None], dpsi)
        loc += np.einsum("qi,eqj->eij", psi, adv, optimize=True)
    if c2 is not None:
        adv = np.einsum("eqd,eqid->eqi", c2 * wdet[..., None], dpsi)
        loc += np.einsum("eqi,qj->eij", adv, psi, optimize=True)
    return loc


def scatter_bilinear(data, pos, psi, dpsi, wdet, c0=None, c1=None, c2=None, scale=1.0):
    loc = local_bilinear(psi, dpsi, wdet, c0, c1, c2)
    data += scale * np.bincount(pos.ravel(), weights=loc.ravel(), minlength=len(data))
    return data
