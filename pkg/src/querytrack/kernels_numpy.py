"""Pure-numpy implementations of the hot kernels.

This is the fallback backend used when the compiled extension is not
available.  Both backends expose the same eight functions; the autodiff
layer never calls numpy for these directly, it goes through
``querytrack.backend.kernels``.

Shape conventions: softmax/layernorm operate row-wise on 2-D C-contiguous
arrays, gelu/sigmoid on flat 1-D arrays.  Outputs keep the input dtype.
"""
import numpy as np

_GELU_C = np.sqrt(2.0 / np.pi)


def softmax_fwd(x):
    m = np.max(x, axis=1, keepdims=True)
    e = np.exp(x - m)
    return e / np.sum(e, axis=1, keepdims=True)


def softmax_bwd(y, gy):
    inner = np.sum(y * gy, axis=1, keepdims=True)
    return y * (gy - inner)


def layernorm_fwd(x, gamma, beta, eps):
    mean = np.mean(x, axis=1, keepdims=True)
    var = np.mean((x - mean) ** 2, axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    y = (x - mean) * rstd * gamma + beta
    return y, mean.ravel(), rstd.ravel()


def layernorm_bwd(x, gamma, mean, rstd, gy):
    xhat = (x - mean[:, None]) * rstd[:, None]
    dgamma = np.sum(gy * xhat, axis=0)
    dbeta = np.sum(gy, axis=0)
    gyg = gy * gamma
    k = x.shape[1]
    gx = rstd[:, None] * (
        gyg
        - np.sum(gyg, axis=1, keepdims=True) / k
        - xhat * np.sum(gyg * xhat, axis=1, keepdims=True) / k
    )
    return gx, dgamma, dbeta


def gelu_fwd(x):
    u = _GELU_C * (x + 0.044715 * x**3)
    return 0.5 * x * (1.0 + np.tanh(u))


def gelu_bwd(x, gy):
    u = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(u)
    du = _GELU_C * (1.0 + 3.0 * 0.044715 * x**2)
    return gy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du)


def sigmoid_fwd(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_bwd(y, gy):
    return gy * y * (1.0 - y)
