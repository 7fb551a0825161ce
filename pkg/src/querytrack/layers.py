"""Small module system and the transformer building blocks.

Modules auto-register Parameters, child Modules, and lists of Modules via
attribute assignment order, which makes parameter names and init order a
pure function of the model config.
"""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ConfigError
from .tensor import Parameter, Tensor


class Module:
    def named_parameters(self, prefix=""):
        for key, val in vars(self).items():
            if isinstance(val, Parameter):
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{key}.")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def num_params(self):
        return sum(p.data.size for p in self.parameters())

    def to_dtype(self, dtype):
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self

    def assign_names(self, prefix=""):
        """Stamp checkpoint path names onto all parameters."""
        for name, p in self.named_parameters(prefix):
            p.name = name
        return self


class Linear(Module):
    def __init__(self, n_in, n_out, rng, bias=True, std=0.02):
        self.w = Parameter(rng.normal(0.0, std, size=(n_in, n_out)))
        self.b = Parameter(np.zeros(n_out)) if bias else None

    def __call__(self, x):
        y = x @ self.w
        if self.b is not None:
            y = y + self.b
        return y


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-5):
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))
        self.eps = eps

    def __call__(self, x):
        return T.layer_norm(x, self.gamma, self.beta, self.eps)


class Mlp(Module):
    """Position-wise two-layer MLP with GELU."""

    def __init__(self, dim, hidden, rng):
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def __call__(self, x):
        return self.fc2(T.gelu(self.fc1(x)))


class MlpBlock(Module):
    """Pre-norm residual MLP block (the early, attention-free encoder stages)."""

    def __init__(self, dim, rng, expansion=4):
        self.norm = LayerNorm(dim)
        self.mlp = Mlp(dim, expansion * dim, rng)

    def __call__(self, x):
        return x + self.mlp(self.norm(x))


class MultiHeadAttention(Module):
    """Scaled dot-product attention with per-head projections.

    Queries (a x d), keys/values (b x d); output (a x d) via the learned
    output projection.  `sink`, when set to a list, receives a copy of every
    softmax attention matrix computed through this module.
    """

    def __init__(self, dim, heads, rng):
        if dim % heads != 0:
            raise ConfigError(f"attention dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.dim = dim
        self.head_dim = dim // heads
        self.wq = Parameter(rng.normal(0.0, 0.02, size=(dim, dim)))
        self.wk = Parameter(rng.normal(0.0, 0.02, size=(dim, dim)))
        self.wv = Parameter(rng.normal(0.0, 0.02, size=(dim, dim)))
        self.wo = Parameter(rng.normal(0.0, 0.02, size=(dim, dim)))
        self.sink = None

    def __call__(self, q, k, v):
        qp = q @ self.wq
        kp = k @ self.wk
        vp = v @ self.wv
        scale = 1.0 / np.sqrt(self.head_dim)
        outs = []
        for h in range(self.heads):
            sl = slice(h * self.head_dim, (h + 1) * self.head_dim)
            qh = qp[:, sl]
            kh = kp[:, sl]
            vh = vp[:, sl]
            attn = T.softmax((qh @ kh.T) * scale, axis=-1)
            if self.sink is not None:
                self.sink.append(attn.data.copy())
            outs.append(attn @ vh)
        return T.concat(outs, axis=1) @ self.wo


def attention_reference(q, k, v, wq, wk, wv, wo, heads):
    """Independent per-head reference for the attention formula.

    Plain numpy, computed head by head with its own exp-normalize softmax;
    used only by tests as the oracle against MultiHeadAttention.
    """
    dim = q.shape[1]
    dk = dim // heads
    head_outs = []
    for h in range(heads):
        wqh = wq[:, h * dk : (h + 1) * dk]
        wkh = wk[:, h * dk : (h + 1) * dk]
        wvh = wv[:, h * dk : (h + 1) * dk]
        qh = q @ wqh
        kh = k @ wkh
        vh = v @ wvh
        scores = qh @ kh.T / np.sqrt(dk)
        e = np.exp(scores - scores.max(axis=1, keepdims=True))
        probs = e / e.sum(axis=1, keepdims=True)
        head_outs.append(probs @ vh)
    return np.concatenate(head_outs, axis=1) @ wo
