# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled layer kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, tanh

cnp.import_array()

ACT_HOMOG1 = 0
ACT_TANH = 1


cdef inline void _act(double z, int code, double ap, double am, double* s, double* ds) noexcept nogil:
    cdef double t
    if code == 0:
        if z >= 0:
            s[0] = ap * z
            ds[0] = ap
        else:
            s[0] = am * z
            ds[0] = am
    else:
        t = tanh(z)
        s[0] = t
        ds[0] = 1.0 - t * t


def activate(z, int code, double a_plus, double a_minus):
    cdef double[::1] zf = np.ascontiguousarray(z, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t n = zf.shape[0], i
    s = np.empty(n)
    ds = np.empty(n)
    cdef double[::1] sv = s, dv = ds
    with nogil:
        for i in range(n):
            _act(zf[i], code, a_plus, a_minus, &sv[i], &dv[i])
    shape = np.shape(z)
    return s.reshape(shape), ds.reshape(shape)


cdef inline void _chol(double* G, double* L, int k) noexcept nogil:
    # lower factor of a k x k PSD matrix, zero column on a non-positive pivot
    cdef int i, j, p
    cdef double d, acc, ljj
    for i in range(k * k):
        L[i] = 0.0
    for j in range(k):
        d = G[j * k + j]
        for p in range(j):
            d -= L[j * k + p] * L[j * k + p]
        if d > 0:
            ljj = sqrt(d)
            L[j * k + j] = ljj
            for i in range(j + 1, k):
                acc = G[i * k + j]
                for p in range(j):
                    acc -= L[i * k + p] * L[j * k + p]
                L[i * k + j] = acc / ljj


def chol3(G):
    cdef double[:, :, ::1] g = np.ascontiguousarray(G, dtype=np.float64)
    cdef Py_ssize_t m = g.shape[0], r
    cdef int k = <int>g.shape[1]
    out = np.zeros((m, k, k))
    cdef double[:, :, ::1] o = out
    with nogil:
        for r in range(m):
            _chol(&g[r, 0, 0], &o[r, 0, 0], k)
    return out


def jet_forward(S, xi, bias, double c, int code, double a_plus, double a_minus):
    cdef double[:, :, ::1] s = np.ascontiguousarray(S, dtype=np.float64)
    cdef double[:, :, ::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(bias, dtype=np.float64)
    cdef Py_ssize_t m = s.shape[0], n = s.shape[1], n2 = x.shape[1], r, i
    cdef int k = <int>s.shape[2], p, q
    out = np.empty((m, n2, k))
    z0 = np.empty((m, n2))
    cdef double[:, :, ::1] o = out
    cdef double[:, ::1] zz = z0
    cdef double G[9]
    cdef double L[9]
    cdef double Z[3]
    cdef double acc, sv, dv
    with nogil:
        for r in range(m):
            for p in range(k):
                for q in range(p + 1):
                    acc = 0.0
                    for i in range(n):
                        acc = acc + s[r, i, p] * s[r, i, q]
                    G[p * k + q] = c * acc
                    G[q * k + p] = c * acc
            _chol(G, L, k)
            for i in range(n2):
                for p in range(k):
                    acc = 0.0
                    for q in range(p + 1):
                        acc = acc + x[r, i, q] * L[p * k + q]
                    Z[p] = acc
                Z[0] = Z[0] + b[r, i]
                _act(Z[0], code, a_plus, a_minus, &sv, &dv)
                zz[r, i] = Z[0]
                o[r, i, 0] = sv
                for p in range(1, k):
                    o[r, i, p] = dv * Z[p]
    return out, z0


def backward_step(v, u, s, xi, double c):
    cdef double[:, ::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef double[:, ::1] xv = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t m = sv.shape[0], n = sv.shape[1], n2 = vv.shape[1], r, i
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    cdef double ss, uv, vn, sg, scale, coef
    with nogil:
        for r in range(m):
            ss = 0.0
            sg = 0.0
            uv = 0.0
            vn = 0.0
            for i in range(n2):
                uv = uv + uu[r, i] * vv[r, i]
                vn = vn + vv[r, i] * vv[r, i]
            scale = sqrt(c * vn)
            for i in range(n):
                ss = ss + sv[r, i] * sv[r, i]
                sg = sg + sv[r, i] * xv[r, i] * scale
            coef = (uv - sg) / ss if ss > 0 else 0.0
            for i in range(n):
                o[r, i] = scale * xv[r, i] + coef * sv[r, i]
    return out
