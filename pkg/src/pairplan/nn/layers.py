"""Forward and backward passes of the primitive layers.

All functions are pure: a forward returns its output and a cache, the
matching backward consumes that cache and returns input and weight gradients.
"""

from dataclasses import dataclass
import math

import numpy as np

from .exceptions import ShapeError

GELU_C = math.sqrt(2.0 / math.pi)
GELU_K = 0.044715
LAYER_NORM_EPS = 1e-5


def gelu(x: np.ndarray) -> np.ndarray:
    """GELU, tanh approximation."""
    return 0.5 * x * (1.0 + np.tanh(GELU_C * (x + GELU_K * x**3)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """Derivative of gelu."""
    t = np.tanh(GELU_C * (x + GELU_K * x**3))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * GELU_C * (1.0 + 3.0 * GELU_K * x**2)


@dataclass(frozen=True)
class DenseCache:
    x: np.ndarray
    z: np.ndarray
    activation: str


def dense_forward(
    w: np.ndarray, b: np.ndarray | None, x: np.ndarray, activation: str = "linear"
) -> tuple[np.ndarray, DenseCache]:
    """y = act(x w + b) over the last axis of x."""
    if x.shape[-1] != w.shape[0]:
        raise ShapeError(f"Dense input width {x.shape[-1]} does not match {w.shape[0]}")
    z = x @ w
    if b is not None:
        z = z + b
    y = gelu(z) if activation == "gelu" else z
    return y, DenseCache(x, z, activation)


def dense_backward(
    w: np.ndarray, cache: DenseCache, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dw, db)."""
    dz = dy * gelu_grad(cache.z) if cache.activation == "gelu" else dy
    x2 = cache.x.reshape(-1, cache.x.shape[-1])
    dz2 = dz.reshape(-1, dz.shape[-1])
    return dz @ w.T, x2.T @ dz2, dz2.sum(axis=0)


@dataclass(frozen=True)
class LayerNormCache:
    xhat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray


def layer_norm_forward(
    gamma: np.ndarray, beta: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, LayerNormCache]:
    """Normalise the last axis, then scale and shift."""
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    xhat = (x - mu) * inv_std
    return gamma * xhat + beta, LayerNormCache(xhat, inv_std, gamma)


def layer_norm_backward(
    cache: LayerNormCache, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dgamma, dbeta)."""
    n = cache.xhat.shape[-1]
    lead = tuple(range(dy.ndim - 1))
    dgamma = np.sum(dy * cache.xhat, axis=lead)
    dbeta = np.sum(dy, axis=lead)
    dxhat = dy * cache.gamma
    dx = (
        cache.inv_std
        / n
        * (
            n * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - cache.xhat * np.sum(dxhat * cache.xhat, axis=-1, keepdims=True)
        )
    )
    return dx, dgamma, dbeta


@dataclass(frozen=True)
class AttentionCache:
    xq: np.ndarray
    xkv: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    probs: np.ndarray
    merged: np.ndarray
    heads: int


def _split(x: np.ndarray, heads: int) -> np.ndarray:
    """(n, d) -> (heads, n, d / heads)."""
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(1, 0, 2)


def _merge(x: np.ndarray) -> np.ndarray:
    """(heads, n, dh) -> (n, heads * dh)."""
    heads, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, heads * dh)


def softmax(scores: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def attention_forward(
    wq: np.ndarray,
    wk: np.ndarray,
    wv: np.ndarray,
    wo: np.ndarray,
    xq: np.ndarray,
    xkv: np.ndarray,
    heads: int,
) -> tuple[np.ndarray, AttentionCache]:
    """Multi-head scaled dot-product attention of xq (n, d) over xkv (m, d)."""
    if xq.ndim != 2 or xkv.ndim != 2 or xq.shape[1] != wq.shape[0] or xkv.shape[1] != wk.shape[0]:
        raise ShapeError(
            f"Attention inputs {xq.shape} and {xkv.shape} do not match width {wq.shape[0]}"
        )
    q = _split(xq @ wq, heads)
    k = _split(xkv @ wk, heads)
    v = _split(xkv @ wv, heads)
    scale = 1.0 / math.sqrt(q.shape[-1])
    probs = softmax(q @ k.transpose(0, 2, 1) * scale)
    merged = _merge(probs @ v)
    return merged @ wo, AttentionCache(xq, xkv, q, k, v, probs, merged, heads)


def attention_backward(
    wq: np.ndarray,
    wk: np.ndarray,
    wv: np.ndarray,
    wo: np.ndarray,
    cache: AttentionCache,
    dy: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Gradients (dxq, dxkv, {wq, wk, wv, wo})."""
    scale = 1.0 / math.sqrt(cache.q.shape[-1])
    dwo = cache.merged.T @ dy
    dheads = _split(dy @ wo.T, cache.heads)
    dprobs = dheads @ cache.v.transpose(0, 2, 1)
    dv = cache.probs.transpose(0, 2, 1) @ dheads
    dscores = cache.probs * (dprobs - np.sum(dprobs * cache.probs, axis=-1, keepdims=True))
    dq = dscores @ cache.k * scale
    dk = dscores.transpose(0, 2, 1) @ cache.q * scale
    dq2, dk2, dv2 = _merge(dq), _merge(dk), _merge(dv)
    grads = {
        "wq": cache.xq.T @ dq2,
        "wk": cache.xkv.T @ dk2,
        "wv": cache.xkv.T @ dv2,
        "wo": dwo,
    }
    return dq2 @ wq.T, dk2 @ wk.T + dv2 @ wv.T, grads
