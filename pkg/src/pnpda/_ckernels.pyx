# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``.

Signatures and operation order match the numpy versions exactly.
"""

import numpy as np
from libc.math cimport exp, log, INFINITY

BACKEND = "cython"


cdef inline void _l63_f(double x, double y, double z, double s, double r,
                        double b, double* o) noexcept nogil:
    o[0] = -s * (x - y)
    o[1] = r * x - y - x * z
    o[2] = x * y - b * z


def l63_run(x0, double sigma, double rho, double beta, double dt, noise):
    cdef double[:, ::1] x_in = np.ascontiguousarray(x0, dtype=np.float64).reshape(-1, 3)
    cdef double[:, :, ::1] nz = np.ascontiguousarray(noise, dtype=np.float64).reshape(
        noise.shape[0], x_in.shape[0], 3)
    cdef Py_ssize_t n = nz.shape[0], M = x_in.shape[0], k, m, i
    out_arr = np.empty((n, M, 3))
    cdef double[:, :, ::1] out = out_arr
    cdef double h = 0.5 * dt, dt6 = dt / 6.0
    cdef double x[3]
    cdef double t[3]
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    with nogil:
        for m in range(M):
            for i in range(3):
                x[i] = x_in[m, i]
            for k in range(n):
                _l63_f(x[0], x[1], x[2], sigma, rho, beta, k1)
                for i in range(3):
                    t[i] = x[i] + h * k1[i]
                _l63_f(t[0], t[1], t[2], sigma, rho, beta, k2)
                for i in range(3):
                    t[i] = x[i] + h * k2[i]
                _l63_f(t[0], t[1], t[2], sigma, rho, beta, k3)
                for i in range(3):
                    t[i] = x[i] + dt * k3[i]
                _l63_f(t[0], t[1], t[2], sigma, rho, beta, k4)
                for i in range(3):
                    x[i] = x[i] + dt6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) + nz[k, m, i]
                    out[k, m, i] = x[i]
    return out_arr.reshape((n,) + np.shape(x0))


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    if i < 0:
        return i + n
    if i >= n:
        return i - n
    return i


cdef void _l96_f(double* x, Py_ssize_t K, double F, double* o) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(K):
        o[k] = -x[_wrap(k - 1, K)] * (x[_wrap(k - 2, K)] - x[_wrap(k + 1, K)]) - x[k] + F


def l96_run(x0, double F, double dt, noise):
    cdef double[:, ::1] x_in = np.ascontiguousarray(np.atleast_2d(x0), dtype=np.float64)
    cdef double[:, :, ::1] nz = np.ascontiguousarray(noise, dtype=np.float64).reshape(
        noise.shape[0], x_in.shape[0], x_in.shape[1])
    cdef Py_ssize_t n = nz.shape[0], M = x_in.shape[0], K = x_in.shape[1], k, m, i
    out_arr = np.empty((n, M, K))
    cdef double[:, :, ::1] out = out_arr
    cdef double h = 0.5 * dt, dt6 = dt / 6.0
    cdef double[:, ::1] w = np.empty((6, K))
    cdef double* x = &w[0, 0]
    cdef double* t = &w[1, 0]
    cdef double* k1 = &w[2, 0]
    cdef double* k2 = &w[3, 0]
    cdef double* k3 = &w[4, 0]
    cdef double* k4 = &w[5, 0]
    with nogil:
        for m in range(M):
            for i in range(K):
                x[i] = x_in[m, i]
            for k in range(n):
                _l96_f(x, K, F, k1)
                for i in range(K):
                    t[i] = x[i] + h * k1[i]
                _l96_f(t, K, F, k2)
                for i in range(K):
                    t[i] = x[i] + h * k2[i]
                _l96_f(t, K, F, k3)
                for i in range(K):
                    t[i] = x[i] + dt * k3[i]
                _l96_f(t, K, F, k4)
                for i in range(K):
                    x[i] = x[i] + dt6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) + nz[k, m, i]
                    out[k, m, i] = x[i]
    return out_arr.reshape((n,) + np.shape(x0))


cdef void _l96_two_f(double* s, Py_ssize_t K, Py_ssize_t J, double F, double h,
                     double b, double c, double sx, double* o) noexcept nogil:
    cdef Py_ssize_t k, j, JK = J * K
    cdef double hcb = h * c / b
    cdef double acc
    cdef double* Y = s + K
    for k in range(K):
        acc = 0.0
        for j in range(J):
            acc = acc + Y[k * J + j]
        o[k] = -s[_wrap(k - 1, K)] * (s[_wrap(k - 2, K)] - s[_wrap(k + 1, K)]) - s[k] + F + sx * hcb * acc
    for j in range(JK):
        o[K + j] = (-c * b * Y[_wrap(j + 1, JK)] * (Y[_wrap(j + 2, JK)] - Y[_wrap(j - 1, JK)])
                    - c * Y[j] + hcb * s[j // J])


def l96_two_scale_run(s0, Py_ssize_t K, Py_ssize_t J, double F, double h, double b,
                      double c, double dt, Py_ssize_t n_steps, double sx=1.0):
    cdef double[:, ::1] s_in = np.ascontiguousarray(np.atleast_2d(s0), dtype=np.float64)
    cdef Py_ssize_t M = s_in.shape[0], D = s_in.shape[1], k, m, i
    out_arr = np.empty((n_steps, M, D))
    cdef double[:, :, ::1] out = out_arr
    cdef double hh = 0.5 * dt, dt6 = dt / 6.0
    cdef double[:, ::1] w = np.empty((6, D))
    cdef double* x = &w[0, 0]
    cdef double* t = &w[1, 0]
    cdef double* k1 = &w[2, 0]
    cdef double* k2 = &w[3, 0]
    cdef double* k3 = &w[4, 0]
    cdef double* k4 = &w[5, 0]
    with nogil:
        for m in range(M):
            for i in range(D):
                x[i] = s_in[m, i]
            for k in range(n_steps):
                _l96_two_f(x, K, J, F, h, b, c, sx, k1)
                for i in range(D):
                    t[i] = x[i] + hh * k1[i]
                _l96_two_f(t, K, J, F, h, b, c, sx, k2)
                for i in range(D):
                    t[i] = x[i] + hh * k2[i]
                _l96_two_f(t, K, J, F, h, b, c, sx, k3)
                for i in range(D):
                    t[i] = x[i] + dt * k3[i]
                _l96_two_f(t, K, J, F, h, b, c, sx, k4)
                for i in range(D):
                    x[i] = x[i] + dt6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                    out[k, m, i] = x[i]
    return out_arr.reshape((n_steps,) + np.shape(s0))


cdef void _ks_f(double* u, Py_ssize_t n, double c1, double c2, double c4,
                double* o) noexcept nogil:
    cdef Py_ssize_t i
    cdef double um2, um1, up1, up2, ux, uxx, ui
    for i in range(n):
        ui = u[i]
        um2 = u[i - 2] if i >= 2 else 0.0
        um1 = u[i - 1] if i >= 1 else 0.0
        up1 = u[i + 1] if i + 1 < n else 0.0
        up2 = u[i + 2] if i + 2 < n else 0.0
        ux = (up1 - um1) * c1
        uxx = (up1 - 2.0 * ui + um1) * c2
        o[i] = -ui * ux - uxx - c4 * (up2 - 4.0 * up1 + 6.0 * ui - 4.0 * um1 + um2)


def ks_run(u0, double nu, double dx, double dt, Py_ssize_t n_sub, noise):
    cdef double[:, ::1] u_in = np.ascontiguousarray(np.atleast_2d(u0), dtype=np.float64)
    cdef Py_ssize_t M = u_in.shape[0], n = u_in.shape[1]
    cdef double[:, :, ::1] nz = np.ascontiguousarray(noise, dtype=np.float64).reshape(
        noise.shape[0], M, n)
    cdef Py_ssize_t nrec = nz.shape[0], k, m, i, s
    out_arr = np.empty((nrec, M, n))
    cdef double[:, :, ::1] out = out_arr
    cdef double c1 = 1.0 / (2.0 * dx), c2 = 1.0 / (dx * dx), c4 = nu / (dx * dx * dx * dx)
    cdef double h = 0.5 * dt, dt6 = dt / 6.0
    cdef double[:, ::1] w = np.empty((6, n))
    cdef double* x = &w[0, 0]
    cdef double* t = &w[1, 0]
    cdef double* k1 = &w[2, 0]
    cdef double* k2 = &w[3, 0]
    cdef double* k3 = &w[4, 0]
    cdef double* k4 = &w[5, 0]
    with nogil:
        for m in range(M):
            for i in range(n):
                x[i] = u_in[m, i]
            for k in range(nrec):
                for s in range(n_sub):
                    _ks_f(x, n, c1, c2, c4, k1)
                    for i in range(n):
                        t[i] = x[i] + h * k1[i]
                    _ks_f(t, n, c1, c2, c4, k2)
                    for i in range(n):
                        t[i] = x[i] + h * k2[i]
                    _ks_f(t, n, c1, c2, c4, k3)
                    for i in range(n):
                        t[i] = x[i] + dt * k3[i]
                    _ks_f(t, n, c1, c2, c4, k4)
                    for i in range(n):
                        x[i] = x[i] + dt6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                for i in range(n):
                    x[i] = x[i] + nz[k, m, i]
                    out[k, m, i] = x[i]
    return out_arr.reshape((nrec,) + np.shape(u0))


def linear_assignment(cost):
    cdef double[:, ::1] a = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], i, j, i0, j0, j1
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(n + 1)
    cdef double[::1] minv = np.empty(n + 1)
    cdef Py_ssize_t[::1] p = np.zeros(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(n + 1, dtype=np.intp)
    cdef unsigned char[::1] used = np.zeros(n + 1, dtype=np.uint8)
    cdef double delta, cur
    perm_arr = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] perm = perm_arr
    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = INFINITY
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if p[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                p[j0] = p[j1]
                j0 = j1
                if j0 == 0:
                    break
        for j in range(1, n + 1):
            perm[p[j] - 1] = j - 1
    return perm_arr


def sinkhorn_log(cost, double gamma, Py_ssize_t n_iter):
    cdef double[:, ::1] C = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t N = C.shape[0], M = C.shape[1], i, j, it
    cdef double[::1] f = np.zeros(N)
    cdef double[::1] g = np.zeros(M)
    cdef double[::1] mx = np.empty(max(N, M))
    cdef double[::1] acc = np.empty(max(N, M))
    cdef double la = -log(<double>N), lb = -log(<double>M), val
    plan = np.empty((N, M))
    cdef double[:, ::1] P = plan
    with nogil:
        for it in range(n_iter):
            for i in range(N):
                mx[i] = -INFINITY
                for j in range(M):
                    val = -gamma * C[i, j] + g[j]
                    if val > mx[i]:
                        mx[i] = val
                acc[i] = 0.0
                for j in range(M):
                    acc[i] += exp(-gamma * C[i, j] + g[j] - mx[i])
                f[i] = la - (mx[i] + log(acc[i]))
            for j in range(M):
                mx[j] = -INFINITY
                for i in range(N):
                    val = -gamma * C[i, j] + f[i]
                    if val > mx[j]:
                        mx[j] = val
                acc[j] = 0.0
                for i in range(N):
                    acc[j] += exp(-gamma * C[i, j] + f[i] - mx[j])
                g[j] = lb - (mx[j] + log(acc[j]))
        for i in range(N):
            for j in range(M):
                P[i, j] = exp(-gamma * C[i, j] + f[i] + g[j])
    return plan
