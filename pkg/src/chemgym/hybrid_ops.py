"""Desk-scale reference of the hybrid sequence operators, float64 only.

Gated short convolution: the input projection splits into three d-wide
blocks (B, C, h-tilde); the output is (C * Conv_k(B * h_tilde)) @ W_out with
a causal depthwise convolution (left-padded, kernel tap 0 on the current
position). Grouped-query attention shares key/value heads across query
groups and reduces to standard multi-head attention when the counts match.
Analytic backward passes are verified against central finite differences.
Correctness reference, not a performance kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError


def _check(cond: bool, message: str):
    if not cond:
        raise ShapeMismatchError(message)


def _as_f64(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


# ---------------------------------------------------------------------------
# gated short convolution


@dataclass(frozen=True)
class ShortConvParams:
    w_in: np.ndarray   # (d, 3d)
    w_out: np.ndarray  # (d, d)
    kernel: np.ndarray  # (d, k), tap 0 = current position

    def __post_init__(self):
        object.__setattr__(self, "w_in", _as_f64(self.w_in))
        object.__setattr__(self, "w_out", _as_f64(self.w_out))
        object.__setattr__(self, "kernel", _as_f64(self.kernel))
        d = self.w_in.shape[0]
        _check(self.w_in.ndim == 2 and self.w_in.shape == (d, 3 * d),
               f"w_in must be (d, 3d), got {self.w_in.shape}")
        _check(self.w_out.shape == (d, d),
               f"w_out must be (d, d), got {self.w_out.shape}")
        _check(self.kernel.ndim == 2 and self.kernel.shape[0] == d
               and self.kernel.shape[1] >= 1,
               f"kernel must be (d, k>=1), got {self.kernel.shape}")

    @property
    def d(self) -> int:
        return self.w_in.shape[0]

    @property
    def k(self) -> int:
        return self.kernel.shape[1]

    @classmethod
    def random(cls, d: int, k: int = 3, rng: np.random.Generator | None = None,
               scale: float = 0.5) -> "ShortConvParams":
        rng = rng or np.random.default_rng(0)
        return cls(
            w_in=rng.normal(0.0, scale, (d, 3 * d)),
            w_out=rng.normal(0.0, scale, (d, d)),
            kernel=rng.normal(0.0, scale, (d, k)),
        )

    @classmethod
    def identity(cls, d: int, k: int = 3) -> "ShortConvParams":
        """Passes inputs through untouched when fed a ones gate channel.

        Channel 0 is the gate source: with h[:, 0] == 1, B and C come out
        all ones, h-tilde equals h, and the unit-impulse kernel plus identity
        w_out reproduce the input.
        """
        w_in = np.zeros((d, 3 * d))
        w_in[0, 0:d] = 1.0          # B = broadcast of channel 0
        w_in[0, d:2 * d] = 1.0      # C likewise
        w_in[:, 2 * d:] = np.eye(d)  # h-tilde = h
        kernel = np.zeros((d, k))
        kernel[:, 0] = 1.0
        return cls(w_in=w_in, w_out=np.eye(d), kernel=kernel)


def causal_depthwise_conv(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """y[t, c] = sum_tau kernel[c, tau] * x[t - tau, c] (zero left padding)."""
    length, d = x.shape
    k = kernel.shape[1]
    y = np.zeros_like(x)
    for tau in range(k):
        if tau == 0:
            y += kernel[:, 0] * x
        else:
            y[tau:] += kernel[:, tau] * x[:-tau]
    return y


def shortconv_forward(h: np.ndarray, params: ShortConvParams) -> np.ndarray:
    h = _as_f64(h)
    d = params.d
    _check(h.ndim == 2 and h.shape[1] == d,
           f"input must be (L, {d}), got {h.shape}")
    proj = h @ params.w_in
    b, c, ht = proj[:, :d], proj[:, d:2 * d], proj[:, 2 * d:]
    y = causal_depthwise_conv(b * ht, params.kernel)
    return (c * y) @ params.w_out


def shortconv_backward(h: np.ndarray, params: ShortConvParams,
                       grad_out: np.ndarray):
    """Gradients of sum(forward * grad_out) w.r.t. input and parameters."""
    h = _as_f64(h)
    grad_out = _as_f64(grad_out)
    d, k = params.d, params.k
    length = h.shape[0]
    proj = h @ params.w_in
    b, c, ht = proj[:, :d], proj[:, d:2 * d], proj[:, 2 * d:]
    x = b * ht
    y = causal_depthwise_conv(x, params.kernel)

    d_cy = grad_out @ params.w_out.T
    d_w_out = (c * y).T @ grad_out
    d_c = d_cy * y
    d_y = d_cy * c
    # conv transpose: dx[s, ch] = sum_tau kernel[ch, tau] * dy[s + tau, ch]
    d_x = np.zeros_like(x)
    d_kernel = np.zeros_like(params.kernel)
    for tau in range(k):
        if tau == 0:
            d_x += params.kernel[:, 0] * d_y
            d_kernel[:, 0] = np.sum(d_y * x, axis=0)
        else:
            d_x[:-tau] += params.kernel[:, tau] * d_y[tau:]
            d_kernel[:, tau] = np.sum(d_y[tau:] * x[:-tau], axis=0)
    d_b = d_x * ht
    d_ht = d_x * b
    d_proj = np.concatenate([d_b, d_c, d_ht], axis=1)
    d_w_in = h.T @ d_proj
    d_h = d_proj @ params.w_in.T
    return d_h, {"w_in": d_w_in, "w_out": d_w_out, "kernel": d_kernel}


# ---------------------------------------------------------------------------
# grouped-query attention


@dataclass(frozen=True)
class GQAParams:
    w_q: np.ndarray  # (n_q, d, head_dim)
    w_k: np.ndarray  # (n_kv, d, head_dim)
    w_v: np.ndarray  # (n_kv, d, head_dim)
    w_o: np.ndarray  # (n_q * head_dim, d)

    def __post_init__(self):
        for name in ("w_q", "w_k", "w_v", "w_o"):
            object.__setattr__(self, name, _as_f64(getattr(self, name)))
        _check(self.w_q.ndim == 3 and self.w_k.ndim == 3 and self.w_v.ndim == 3,
               "head projections must be 3-d arrays")
        n_q, d, head_dim = self.w_q.shape
        n_kv = self.w_k.shape[0]
        _check(self.w_k.shape == (n_kv, d, head_dim), "w_k shape mismatch")
        _check(self.w_v.shape == (n_kv, d, head_dim), "w_v shape mismatch")
        _check(n_kv >= 1 and n_q % n_kv == 0,
               f"n_q={n_q} must be divisible by n_kv={n_kv}")
        _check(self.w_o.shape == (n_q * head_dim, d), "w_o shape mismatch")

    @property
    def n_q(self) -> int:
        return self.w_q.shape[0]

    @property
    def n_kv(self) -> int:
        return self.w_k.shape[0]

    @property
    def d(self) -> int:
        return self.w_q.shape[1]

    @property
    def head_dim(self) -> int:
        return self.w_q.shape[2]

    @classmethod
    def random(cls, d: int, n_q: int, n_kv: int, head_dim: int,
               rng: np.random.Generator | None = None,
               scale: float = 0.5) -> "GQAParams":
        rng = rng or np.random.default_rng(0)
        return cls(
            w_q=rng.normal(0.0, scale, (n_q, d, head_dim)),
            w_k=rng.normal(0.0, scale, (n_kv, d, head_dim)),
            w_v=rng.normal(0.0, scale, (n_kv, d, head_dim)),
            w_o=rng.normal(0.0, scale, (n_q * head_dim, d)),
        )


def _causal_softmax(scores: np.ndarray) -> np.ndarray:
    length = scores.shape[0]
    mask = np.tril(np.ones((length, length), dtype=bool))
    masked = np.where(mask, scores, -np.inf)
    shifted = masked - masked.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def gqa_forward(h: np.ndarray, params: GQAParams) -> np.ndarray:
    h = _as_f64(h)
    _check(h.ndim == 2 and h.shape[1] == params.d,
           f"input must be (L, {params.d}), got {h.shape}")
    length = h.shape[0]
    group_size = params.n_q // params.n_kv
    scale = 1.0 / np.sqrt(params.head_dim)
    heads = []
    for i in range(params.n_q):
        g = i // group_size
        q = h @ params.w_q[i]
        k = h @ params.w_k[g]
        v = h @ params.w_v[g]
        attn = _causal_softmax((q @ k.T) * scale)
        heads.append(attn @ v)
    concat = np.concatenate(heads, axis=1)
    return concat @ params.w_o


def gqa_backward(h: np.ndarray, params: GQAParams, grad_out: np.ndarray):
    h = _as_f64(h)
    grad_out = _as_f64(grad_out)
    length = h.shape[0]
    group_size = params.n_q // params.n_kv
    head_dim = params.head_dim
    scale = 1.0 / np.sqrt(head_dim)

    heads = []
    cache = []
    for i in range(params.n_q):
        g = i // group_size
        q = h @ params.w_q[i]
        k = h @ params.w_k[g]
        v = h @ params.w_v[g]
        attn = _causal_softmax((q @ k.T) * scale)
        heads.append(attn @ v)
        cache.append((g, q, k, v, attn))
    concat = np.concatenate(heads, axis=1)

    d_w_o = concat.T @ grad_out
    d_concat = grad_out @ params.w_o.T
    d_h = np.zeros_like(h)
    d_w_q = np.zeros_like(params.w_q)
    d_w_k = np.zeros_like(params.w_k)
    d_w_v = np.zeros_like(params.w_v)
    for i in range(params.n_q):
        g, q, k, v, attn = cache[i]
        d_head = d_concat[:, i * head_dim:(i + 1) * head_dim]
        d_attn = d_head @ v.T
        d_v = attn.T @ d_head
        # softmax backward (rows); masked cells have attn == 0, so they vanish
        d_scores = attn * (d_attn - np.sum(d_attn * attn, axis=1, keepdims=True))
        d_q = (d_scores @ k) * scale
        d_k = (d_scores.T @ q) * scale
        d_w_q[i] = h.T @ d_q
        d_w_k[g] += h.T @ d_k
        d_w_v[g] += h.T @ d_v
        d_h += d_q @ params.w_q[i].T
        d_h += d_k @ params.w_k[g].T
        d_h += d_v @ params.w_v[g].T
    return d_h, {"w_q": d_w_q, "w_k": d_w_k, "w_v": d_w_v, "w_o": d_w_o}


# ---------------------------------------------------------------------------
# block helpers


def rmsnorm(x: np.ndarray, gain: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Root-mean-square normalization without the centering step."""
    x = _as_f64(x)
    scale = np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + eps)
    return x / scale * gain


def swiglu(x: np.ndarray, w_gate: np.ndarray, w_up: np.ndarray,
           w_down: np.ndarray) -> np.ndarray:
    """(silu(x @ w_gate) * (x @ w_up)) @ w_down."""
    x = _as_f64(x)
    gate = x @ w_gate
    return (gate / (1.0 + np.exp(-gate)) * (x @ w_up)) @ w_down


def block_forward(h, op, op_params, norm1_gain, norm2_gain,
                  w_gate, w_up, w_down):
    """Two Norm-Operator-Residual stages: sequence operator, then SwiGLU."""
    y = h + op(rmsnorm(h, norm1_gain), op_params)
    return y + swiglu(rmsnorm(y, norm2_gain), w_gate, w_up, w_down)


# ---------------------------------------------------------------------------
# gradient verification


class _OpAdapter:
    """Uniform (forward, backward, params-as-dict) view of an operator."""

    def __init__(self, forward, backward, params, param_names):
        self.forward = forward
        self.backward = backward
        self.params = params
        self.param_names = param_names

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self.params, name) for name in self.param_names}

    def with_array(self, name: str, value: np.ndarray):
        kwargs = {n: (value if n == name else getattr(self.params, n))
                  for n in self.param_names}
        return type(self.params)(**kwargs)


def op_adapter(name: str, params) -> _OpAdapter:
    if name == "shortconv":
        return _OpAdapter(shortconv_forward, shortconv_backward, params,
                          ("w_in", "w_out", "kernel"))
    if name == "gqa":
        return _OpAdapter(gqa_forward, gqa_backward, params,
                          ("w_q", "w_k", "w_v", "w_o"))
    raise ValueError(f"unknown operator {name!r}")


def grad_check(op_name: str, params, h: np.ndarray,
               epsilon: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    The scalar loss is sum(forward(h) * R) for a fixed random R; gradients
    are checked over the input and every parameter array.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    adapter = op_adapter(op_name, params)
    h = _as_f64(h)
    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, 1.0, adapter.forward(h, params).shape)

    def loss(hh, pp) -> float:
        return float(np.sum(adapter.forward(hh, pp) * weights))

    d_h, d_params = adapter.backward(h, params, weights)
    worst = 0.0

    def compare(analytic: float, numeric: float) -> float:
        return abs(analytic - numeric) / max(1e-6, abs(analytic), abs(numeric))

    flat = h.copy()
    for idx in np.ndindex(flat.shape):
        orig = flat[idx]
        flat[idx] = orig + epsilon
        up = loss(flat, params)
        flat[idx] = orig - epsilon
        down = loss(flat, params)
        flat[idx] = orig
        worst = max(worst, compare(d_h[idx], (up - down) / (2 * epsilon)))

    for name, grad in d_params.items():
        base = adapter.arrays()[name].copy()
        for idx in np.ndindex(base.shape):
            orig = base[idx]
            base[idx] = orig + epsilon
            up = loss(h, adapter.with_array(name, base))
            base[idx] = orig - epsilon
            down = loss(h, adapter.with_array(name, base))
            base[idx] = orig
            worst = max(worst, compare(grad[idx], (up - down) / (2 * epsilon)))
    return worst
