# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: fused row-wise softmax / layer-norm and elementwise
gelu / sigmoid, forward and backward.

Same API and semantics as kernels_numpy; each function does a single fused
pass per row instead of a chain of numpy temporaries.
"""
import numpy as np

cimport cython
from libc.math cimport exp, sqrt, tanh

ctypedef fused floating:
    float
    double

cdef double GELU_C = sqrt(2.0 / 3.14159265358979323846)


def softmax_fwd(floating[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1]
    out_arr = np.empty((n, k), dtype=np.asarray(x).dtype)
    cdef floating[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double m, s, e
    for i in range(n):
        m = x[i, 0]
        for j in range(1, k):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(k):
            e = exp(<double> x[i, j] - m)
            out[i, j] = <floating> e
            s += e
        for j in range(k):
            out[i, j] = <floating> (out[i, j] / s)
    return out_arr


def softmax_bwd(floating[:, ::1] y, floating[:, ::1] gy):
    cdef Py_ssize_t n = y.shape[0], k = y.shape[1]
    gx_arr = np.empty((n, k), dtype=np.asarray(y).dtype)
    cdef floating[:, ::1] gx = gx_arr
    cdef Py_ssize_t i, j
    cdef double inner
    for i in range(n):
        inner = 0.0
        for j in range(k):
            inner += <double> y[i, j] * <double> gy[i, j]
        for j in range(k):
            gx[i, j] = <floating> (<double> y[i, j] * (<double> gy[i, j] - inner))
    return gx_arr


def layernorm_fwd(floating[:, ::1] x, floating[::1] gamma, floating[::1] beta,
                  double eps):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1]
    dt = np.asarray(x).dtype
    y_arr = np.empty((n, k), dtype=dt)
    mean_arr = np.empty(n, dtype=dt)
    rstd_arr = np.empty(n, dtype=dt)
    cdef floating[:, ::1] y = y_arr
    cdef floating[::1] mean = mean_arr
    cdef floating[::1] rstd = rstd_arr
    cdef Py_ssize_t i, j
    cdef double m, v, d, r
    for i in range(n):
        m = 0.0
        for j in range(k):
            m += x[i, j]
        m /= k
        v = 0.0
        for j in range(k):
            d = <double> x[i, j] - m
            v += d * d
        v /= k
        r = 1.0 / sqrt(v + eps)
        mean[i] = <floating> m
        rstd[i] = <floating> r
        for j in range(k):
            y[i, j] = <floating> ((<double> x[i, j] - m) * r * <double> gamma[j]
                                  + <double> beta[j])
    return y_arr, mean_arr, rstd_arr


def layernorm_bwd(floating[:, ::1] x, floating[::1] gamma, floating[::1] mean,
                  floating[::1] rstd, floating[:, ::1] gy):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1]
    dt = np.asarray(x).dtype
    gx_arr = np.empty((n, k), dtype=dt)
    dgamma_arr = np.zeros(k, dtype=dt)
    dbeta_arr = np.zeros(k, dtype=dt)
    cdef floating[:, ::1] gx = gx_arr
    cdef floating[::1] dgamma = dgamma_arr
    cdef floating[::1] dbeta = dbeta_arr
    cdef Py_ssize_t i, j
    cdef double xhat, gyg, s1, s2, m, r
    for i in range(n):
        m = mean[i]
        r = rstd[i]
        s1 = 0.0
        s2 = 0.0
        for j in range(k):
            xhat = (<double> x[i, j] - m) * r
            gyg = <double> gy[i, j] * <double> gamma[j]
            s1 += gyg
            s2 += gyg * xhat
            dgamma[j] += <floating> (<double> gy[i, j] * xhat)
            dbeta[j] += gy[i, j]
        s1 /= k
        s2 /= k
        for j in range(k):
            xhat = (<double> x[i, j] - m) * r
            gyg = <double> gy[i, j] * <double> gamma[j]
            gx[i, j] = <floating> (r * (gyg - s1 - xhat * s2))
    return gx_arr, dgamma_arr, dbeta_arr


def gelu_fwd(floating[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.asarray(x).dtype)
    cdef floating[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double v, u
    for i in range(n):
        v = x[i]
        u = GELU_C * (v + 0.044715 * v * v * v)
        out[i] = <floating> (0.5 * v * (1.0 + tanh(u)))
    return out_arr


def gelu_bwd(floating[::1] x, floating[::1] gy):
    cdef Py_ssize_t n = x.shape[0]
    gx_arr = np.empty(n, dtype=np.asarray(x).dtype)
    cdef floating[::1] gx = gx_arr
    cdef Py_ssize_t i
    cdef double v, u, t, du
    for i in range(n):
        v = x[i]
        u = GELU_C * (v + 0.044715 * v * v * v)
        t = tanh(u)
        du = GELU_C * (1.0 + 3.0 * 0.044715 * v * v)
        gx[i] = <floating> (<double> gy[i]
                            * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du))
    return gx_arr


def sigmoid_fwd(floating[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.asarray(x).dtype)
    cdef floating[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double v, e
    for i in range(n):
        v = x[i]
        if v >= 0.0:
            out[i] = <floating> (1.0 / (1.0 + exp(-v)))
        else:
            e = exp(v)
            out[i] = <floating> (e / (1.0 + e))
    return out_arr


def sigmoid_bwd(floating[::1] y, floating[::1] gy):
    cdef Py_ssize_t n = y.shape[0]
    gx_arr = np.empty(n, dtype=np.asarray(y).dtype)
    cdef floating[::1] gx = gx_arr
    cdef Py_ssize_t i
    for i in range(n):
        gx[i] = <floating> (<double> gy[i] * <double> y[i] * (1.0 - <double> y[i]))
    return gx_arr
