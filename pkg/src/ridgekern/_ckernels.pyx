# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for ridge-kernel evaluation.

Mirrors :mod:`ridgekern._pykernels` function for function. Family codes and
the packed parameter layout are produced by ``BaseKernel.packed``.
"""
import numpy as np

from libc.math cimport exp, fabs, cos, pow, sqrt


cdef inline double _eval(int code, double p0, double p1, double p2, double p3,
                         double s, double t, int* bad) noexcept nogil:
    cdef double d
    if code == 0:
        d = s - t
        return exp(-(d * d) * p0)
    elif code == 1:
        return exp(-fabs(s - t) * p0)
    elif code == 2:
        return cos(p0 * (s - t))
    else:
        # p0 = degree, p1 = 1/r^2, p2 = domain bound, p3 = 1/(1 + B^2/r^2)
        if fabs(s) > p2 or fabs(t) > p2:
            bad[0] += 1
        return pow((1.0 + s * t * p1) * p3, p0)


def ridge_features(int code, const double[::1] params, const double[:, ::1] A,
                   const double[::1] b, const double[::1] t,
                   const double[:, ::1] X):
    """Return ``(Phi, n_bad)`` with ``Phi[j, i] = K(<A[i], X[j]> + b[i], t[i])``."""
    cdef Py_ssize_t m = X.shape[0], n = A.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s
    cdef int bad = 0
    cdef double p0 = params[0], p1 = params[1], p2 = params[2], p3 = params[3]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for j in range(m):
            for i in range(n):
                s = b[i]
                for k in range(d):
                    s = s + A[i, k] * X[j, k]
                o[j, i] = _eval(code, p0, p1, p2, p3, s, t[i], &bad)
    return out, bad


def ridge_apply(int code, const double[::1] params, const double[:, ::1] A,
                const double[::1] b, const double[::1] t,
                const double[:, ::1] X, const double[::1] w):
    """Return ``(y, n_bad)`` with ``y[j] = sum_i w[i] K(<A[i], X[j]> + b[i], t[i])``.

    Summation runs in node order, so the result is independent of how callers
    chunk the rows of ``X``.
    """
    cdef Py_ssize_t m = X.shape[0], n = A.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, acc
    cdef int bad = 0
    cdef double p0 = params[0], p1 = params[1], p2 = params[2], p3 = params[3]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for j in range(m):
            acc = 0.0
            for i in range(n):
                s = b[i]
                for k in range(d):
                    s = s + A[i, k] * X[j, k]
                acc = acc + w[i] * _eval(code, p0, p1, p2, p3, s, t[i], &bad)
            o[j] = acc
    return out, bad


def farthest_point_net(const double[:, ::1] P, double eps):
    """Greedy farthest-point centers until every point is within ``eps``.

    Returns ``(centers, dist)`` where ``dist[j]`` is the distance of point
    ``j`` to its nearest center.
    """
    cdef Py_ssize_t n = P.shape[0], d = P.shape[1]
    cdef Py_ssize_t j, k, c = 0, far
    cdef double acc, diff, best
    dist_arr = np.full(n, np.inf, dtype=np.float64)
    cdef double[::1] dist = dist_arr
    centers = []
    while True:
        centers.append(c)
        best = -1.0
        far = 0
        with nogil:
            for j in range(n):
                acc = 0.0
                for k in range(d):
                    diff = P[j, k] - P[c, k]
                    acc = acc + diff * diff
                acc = sqrt(acc)
                if acc < dist[j]:
                    dist[j] = acc
                if dist[j] > best:
                    best = dist[j]
                    far = j
        if best <= eps:
            break
        c = far
    return np.asarray(centers, dtype=np.intp), dist_arr
