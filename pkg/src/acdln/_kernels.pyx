# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels; same contracts as ``_kernels_py``."""
import numpy as np

cimport cython


def evaluate(const double[::1] coef, const long[:, ::1] dofs, const double[:, ::1] psi,
             const double[:, :, :, ::1] dpsi):
    cdef Py_ssize_t ne = dofs.shape[0], nb = dofs.shape[1], nq = psi.shape[0]
    cdef Py_ssize_t e, q, i
    cdef double c, v, gx, gy
    val_arr = np.empty((ne, nq))
    grad_arr = np.empty((ne, nq, 2))
    cdef double[:, ::1] val = val_arr
    cdef double[:, :, ::1] grad = grad_arr
    cdef double loc[16]
    for e in range(ne):
        for i in range(nb):
            loc[i] = coef[dofs[e, i]]
        for q in range(nq):
            v = 0.0
            gx = 0.0
            gy = 0.0
            for i in range(nb):
                c = loc[i]
                v += c * psi[q, i]
                gx += c * dpsi[e, q, i, 0]
                gy += c * dpsi[e, q, i, 1]
            val[e, q] = v
            grad[e, q, 0] = gx
            grad[e, q, 1] = gy
    return val_arr, grad_arr


def _load(double[::1] out, const long[:, ::1] dofs, const double[:, ::1] psi,
          const double[:, :, :, ::1] dpsi, const double[:, ::1] wdet,
          const double[:, ::1] f0, const double[:, :, ::1] f1, bint has0, bint has1):
    cdef Py_ssize_t ne = dofs.shape[0], nb = dofs.shape[1], nq = psi.shape[0]
    cdef Py_ssize_t e, q, i
    cdef double a, bx, by, s
    for e in range(ne):
        for i in range(nb):
            s = 0.0
            for q in range(nq):
                a = 0.0
                if has0:
                    a = f0[e, q] * psi[q, i]
                if has1:
                    a = a + f1[e, q, 0] * dpsi[e, q, i, 0] + f1[e, q, 1] * dpsi[e, q, i, 1]
                s += wdet[e, q] * a
            out[dofs[e, i]] += s


def _bilinear(double[::1] data, const long[:, :, ::1] pos, const double[:, ::1] psi,
              const double[:, :, :, ::1] dpsi, const double[:, ::1] wdet,
              const double[:, ::1] c0, const double[:, :, ::1] c1, const double[:, :, ::1] c2,
              bint has0, bint has1, bint has2, double scale):
    cdef Py_ssize_t ne = dpsi.shape[0], nq = dpsi.shape[1], nb = dpsi.shape[2]
    cdef Py_ssize_t e, q, i, j
    cdef double w, a0, pi_, t1, t2
    cdef double loc[16][16]
    cdef double adv1[16]
    cdef double adv2[16]
    for e in range(ne):
        for i in range(nb):
            for j in range(nb):
                loc[i][j] = 0.0
        for q in range(nq):
            w = wdet[e, q]
            a0 = c0[e, q] * w if has0 else 0.0
            for j in range(nb):
                adv1[j] = 0.0
                adv2[j] = 0.0
                if has1:
                    adv1[j] = w * (c1[e, q, 0] * dpsi[e, q, j, 0] + c1[e, q, 1] * dpsi[e, q, j, 1])
                if has2:
                    adv2[j] = w * (c2[e, q, 0] * dpsi[e, q, j, 0] + c2[e, q, 1] * dpsi[e, q, j, 1])
            for i in range(nb):
                pi_ = psi[q, i]
                t2 = adv2[i]
                for j in range(nb):
                    loc[i][j] += pi_ * (a0 * psi[q, j] + adv1[j]) + t2 * psi[q, j]
        for i in range(nb):
            for j in range(nb):
                data[pos[e, i, j]] += scale * loc[i][j]
