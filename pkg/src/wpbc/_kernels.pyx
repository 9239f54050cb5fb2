# cython: language_level=3
"""Compiled grid kernels; same contract as ``wpbc._kernels_py``."""

from libc.math cimport INFINITY, isfinite

import numpy as np


cdef inline double slot0_power(double deficit, double t_rem, double h, double gain, double v) noexcept nogil:
    cdef double y
    if deficit <= 0.0:
        return 0.0
    y = deficit / t_rem
    if y * v >= gain:
        return INFINITY
    return y * v * v / (gain - y * v) / h


def dynamic_kernel(const double[:, ::1] net, const double[:, ::1] tau, const double[:, ::1] ptau, const double[:, ::1] cross,
                   const double[::1] h, double gain, double v, double t_lim, double p_max):
    cdef Py_ssize_t K = tau.shape[0], M = tau.shape[1]
    cdef Py_ssize_t m1, m2, b1 = -1, b2 = -1
    cdef double best = INFINITY, best_p0 = 0.0
    cdef double t_rem, d1, d2, p0, e
    with nogil:
        if K == 1:
            for m1 in range(M):
                if not isfinite(tau[0, m1]):
                    continue
                t_rem = t_lim - tau[0, m1]
                if t_rem < 0.0:
                    continue
                p0 = slot0_power(net[0, m1], t_rem, h[0], gain, v)
                if p0 > p_max:
                    continue
                e = ptau[0, m1] + p0 * t_rem
                if e < best:
                    best, b1, best_p0 = e, m1, p0
        else:
            for m1 in range(M):
                if not isfinite(tau[0, m1]):
                    continue
                for m2 in range(M):
                    if not isfinite(tau[1, m2]):
                        continue
                    t_rem = t_lim - tau[0, m1] - tau[1, m2]
                    if t_rem < 0.0:
                        continue
                    d1 = net[0, m1] - cross[1, m2]
                    d2 = net[1, m2] - cross[0, m1]
                    p0 = slot0_power(d1, t_rem, h[0], gain, v)
                    if p0 > p_max:
                        continue
                    p0 = max(p0, slot0_power(d2, t_rem, h[1], gain, v))
                    if p0 > p_max:
                        continue
                    e = ptau[0, m1] + ptau[1, m2] + p0 * t_rem
                    if e < best:
                        best, b1, b2, best_p0 = e, m1, m2, p0
    return best, b1, b2, best_p0


def static_kernel(const double[:, :, ::1] net, const double[:, :, ::1] tau, const double[:, ::1] fz, const double[::1] P, double t_lim):
    cdef Py_ssize_t nP = tau.shape[0], K = tau.shape[1], nB = tau.shape[2]
    cdef Py_ssize_t i, j1, j2, bi = -1, b1 = -1, b2 = -1
    cdef double best = INFINITY
    cdef double t0, d1, d2, total, e
    with nogil:
        for i in range(nP):
            for j1 in range(nB):
                if not isfinite(tau[i, 0, j1]):
                    continue
                if K == 1:
                    t0 = 0.0
                    if net[i, 0, j1] > 0.0:
                        if fz[i, 0] <= 0.0:
                            continue
                        t0 = net[i, 0, j1] / fz[i, 0]
                    total = t0 + tau[i, 0, j1]
                    if total <= t_lim:
                        e = P[i] * total
                        if e < best:
                            best, bi, b1 = e, i, j1
                    continue
                for j2 in range(nB):
                    if not isfinite(tau[i, 1, j2]):
                        continue
                    d1 = net[i, 0, j1] - fz[i, 0] * tau[i, 1, j2]
                    d2 = net[i, 1, j2] - fz[i, 1] * tau[i, 0, j1]
                    t0 = 0.0
                    if d1 > 0.0:
                        if fz[i, 0] <= 0.0:
                            continue
                        t0 = d1 / fz[i, 0]
                    if d2 > 0.0:
                        if fz[i, 1] <= 0.0:
                            continue
                        t0 = max(t0, d2 / fz[i, 1])
                    total = t0 + tau[i, 0, j1] + tau[i, 1, j2]
                    if total <= t_lim:
                        e = P[i] * total
                        if e < best:
                            best, bi, b1, b2 = e, i, j1, j2
    return best, bi, b1, b2
