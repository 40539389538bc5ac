"""Weight-shared Transformer encoder layer iterated as a discrete-time map.

The encoder maps an (N_w, N_h) state matrix (one row per token vector) to a
matrix of the same shape.  Two variants of the layer are available:

* ``standard_albert`` -- the full encoder block: post-norm residual attention
  followed by a GELU feed-forward sub-layer with its own residual and norm.
* ``paper_literal`` -- the reduced form  LN2(x W2 + LN1(A(x) W1 + x))  with
  no feed-forward block, activation, or projection biases.

All arithmetic is 64-bit; parameters and states are plain numpy arrays and
every operation here is a pure function, so values can be shared freely
across worker threads.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erf

INIT_SIGMA = 0.02  # weight init scale; values hard-clipped to +/- 2 sigma

VARIANTS = ("standard_albert", "paper_literal")


class NumericalOverflowError(ArithmeticError):
    """Raised when a map application produces non-finite values."""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class EncoderConfig:
    hidden_dim: int = 64
    num_heads: int = 1
    head_dim: int = 64
    intermediate_dim: int = 256
    map_variant: str = "standard_albert"
    layernorm_epsilon: float = 1e-12

    def __post_init__(self):
        if self.map_variant not in VARIANTS:
            raise ValueError(f"unknown map_variant {self.map_variant!r}")
        if min(self.hidden_dim, self.num_heads, self.head_dim) < 1:
            raise ValueError("dimensions must be positive")
        if self.num_heads * self.head_dim != self.hidden_dim:
            raise ValueError(
                f"num_heads*head_dim = {self.num_heads * self.head_dim} "
                f"must equal hidden_dim = {self.hidden_dim}"
            )
        if self.map_variant == "standard_albert" and self.intermediate_dim < self.hidden_dim:
            raise ValueError("intermediate_dim must be >= hidden_dim")
        if self.layernorm_epsilon < 0:
            raise ValueError("layernorm_epsilon must be >= 0")

    @classmethod
    def for_hidden_dim(cls, hidden_dim: int, map_variant: str = "standard_albert",
                       head_dim: int = 64, **kwargs) -> "EncoderConfig":
        """Default geometry: one head per 64 hidden units, 4x feed-forward."""
        if hidden_dim % head_dim:
            raise ValueError(f"hidden_dim {hidden_dim} not divisible by head_dim {head_dim}")
        kwargs.setdefault("intermediate_dim", 4 * hidden_dim)
        return cls(hidden_dim=hidden_dim, num_heads=hidden_dim // head_dim,
                   head_dim=head_dim, map_variant=map_variant, **kwargs)


@dataclass(frozen=True)
class EncoderParams:
    """Weights of the shared layer.  Matrices act on row vectors (x @ W)."""

    config: EncoderConfig
    w_query: np.ndarray
    b_query: np.ndarray
    w_key: np.ndarray
    b_key: np.ndarray
    w_value: np.ndarray
    b_value: np.ndarray
    w_output: np.ndarray
    b_output: np.ndarray
    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray
    # standard_albert only
    w_ff1: Optional[np.ndarray] = None
    b_ff1: Optional[np.ndarray] = None
    w_ff2: Optional[np.ndarray] = None
    b_ff2: Optional[np.ndarray] = None
    # paper_literal only
    w1: Optional[np.ndarray] = None
    w2: Optional[np.ndarray] = None

    def __post_init__(self):
        h = self.config.hidden_dim
        expect = {
            "w_query": (h, h), "w_key": (h, h), "w_value": (h, h), "w_output": (h, h),
            "b_query": (h,), "b_key": (h,), "b_value": (h,), "b_output": (h,),
            "ln1_gain": (h,), "ln1_bias": (h,), "ln2_gain": (h,), "ln2_bias": (h,),
        }
        if self.config.map_variant == "standard_albert":
            i = self.config.intermediate_dim
            expect.update({"w_ff1": (h, i), "b_ff1": (i,), "w_ff2": (i, h), "b_ff2": (h,)})
        else:
            expect.update({"w1": (h, h), "w2": (h, h)})
        for name, shape in expect.items():
            arr = getattr(self, name)
            if arr is None:
                raise ValueError(f"{name} required for variant {self.config.map_variant}")
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")


@dataclass(frozen=True)
class StateTrajectory:
    """States recorded at ``times`` (multiples of the recording stride)."""

    config: EncoderConfig
    times: np.ndarray   # (n_recorded,) int
    states: np.ndarray  # (n_recorded, N_w, N_h)

    def __len__(self):
        return len(self.times)

    @property
    def last(self) -> np.ndarray:
        return self.states[-1]


def truncated_normal(rng: np.random.Generator, shape, sigma: float = INIT_SIGMA) -> np.ndarray:
    """N(0, sigma^2) draws hard-clipped to [-2 sigma, 2 sigma].

    Clipping (rather than redrawing) piles the tail mass onto the bounds, so
    the resulting std is sigma * 0.9594..., not the resampled-truncation std.
    """
    return np.clip(rng.normal(0.0, sigma, shape), -2.0 * sigma, 2.0 * sigma)


def init_params(config: EncoderConfig, seed: int) -> EncoderParams:
    """Random initial network: clipped-normal weights, zero biases, unit gains."""
    rng = np.random.default_rng(seed)
    h, i = config.hidden_dim, config.intermediate_dim
    zeros, ones = np.zeros(h), np.ones(h)
    common = dict(
        config=config,
        w_query=truncated_normal(rng, (h, h)),
        w_key=truncated_normal(rng, (h, h)),
        w_value=truncated_normal(rng, (h, h)),
        w_output=truncated_normal(rng, (h, h)),
        b_query=zeros.copy(), b_key=zeros.copy(),
        b_value=zeros.copy(), b_output=zeros.copy(),
        ln1_gain=ones.copy(), ln1_bias=zeros.copy(),
        ln2_gain=ones.copy(), ln2_bias=zeros.copy(),
    )
    if config.map_variant == "standard_albert":
        return EncoderParams(
            w_ff1=truncated_normal(rng, (h, i)), b_ff1=np.zeros(i),
            w_ff2=truncated_normal(rng, (i, h)), b_ff2=zeros.copy(),
            **common,
        )
    return EncoderParams(w1=truncated_normal(rng, (h, h)),
                         w2=truncated_normal(rng, (h, h)), **common)


def layer_norm(rows: np.ndarray, gain: np.ndarray, bias: np.ndarray,
               epsilon: float) -> np.ndarray:
    """Normalize the last axis to zero mean / unit population variance."""
    mean = rows.mean(axis=-1, keepdims=True)
    var = np.square(rows - mean).mean(axis=-1, keepdims=True)
    return gain * (rows - mean) / np.sqrt(var + epsilon) + bias


def gelu(v: np.ndarray) -> np.ndarray:
    """Exact-erf GELU: v * Phi(v)."""
    return 0.5 * v * (1.0 + erf(v / np.sqrt(2.0)))


def _head_attention(x: np.ndarray, params: EncoderParams):
    """Per-head attention probabilities (N_a, N_w, N_w) and values (N_a, N_w, d_k)."""
    cfg = params.config
    n_w = x.shape[0]
    dk, na = cfg.head_dim, cfg.num_heads
    # (N_w, N_h) -> (N_a, N_w, d_k)
    split = lambda m: m.reshape(n_w, na, dk).transpose(1, 0, 2)
    q = split(x @ params.w_query + params.b_query)
    k = split(x @ params.w_key + params.b_key)
    v = split(x @ params.w_value + params.b_value)
    logits = q @ k.transpose(0, 2, 1) / np.sqrt(dk)
    logits -= logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    probs = e / e.sum(axis=-1, keepdims=True)
    return probs, v


def attention_probabilities(x: np.ndarray, params: EncoderParams, head: int) -> np.ndarray:
    """Row-stochastic (N_w, N_w) attention matrix of one head."""
    if not 0 <= head < params.config.num_heads:
        raise ValueError(f"head {head} out of range [0, {params.config.num_heads})")
    probs, _ = _head_attention(x, params)
    return probs[head]


def multi_head_attention(x: np.ndarray, params: EncoderParams) -> np.ndarray:
    """A(x): concatenated per-head mixes projected back to N_h columns."""
    probs, v = _head_attention(x, params)
    n_w = x.shape[0]
    mixed = (probs @ v).transpose(1, 0, 2).reshape(n_w, params.config.hidden_dim)
    return mixed @ params.w_output + params.b_output


def encoder_step(x: np.ndarray, params: EncoderParams) -> np.ndarray:
    """One application of the shared layer f."""
    cfg = params.config
    eps = cfg.layernorm_epsilon
    # overflow is detected and raised below, so numpy's warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        a = multi_head_attention(x, params)
        if cfg.map_variant == "standard_albert":
            h = layer_norm(x + a, params.ln1_gain, params.ln1_bias, eps)
            ff = gelu(h @ params.w_ff1 + params.b_ff1) @ params.w_ff2 + params.b_ff2
            out = layer_norm(h + ff, params.ln2_gain, params.ln2_bias, eps)
        else:
            inner = layer_norm(a @ params.w1 + x, params.ln1_gain, params.ln1_bias, eps)
            out = layer_norm(x @ params.w2 + inner, params.ln2_gain, params.ln2_bias, eps)
    if not np.all(np.isfinite(out)):
        raise NumericalOverflowError("encoder step produced non-finite state")
    return out


def iterate(x0: np.ndarray, params: EncoderParams, steps: int,
            stride: int = 1) -> StateTrajectory:
    """Apply f ``steps`` times, recording x_0 and every stride-th state.

    Raises NumericalOverflowError naming the offending time step if the
    state leaves the finite range.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    x = np.asarray(x0, dtype=np.float64)
    times = [0]
    states = [x]
    for t in range(1, steps + 1):
        try:
            x = encoder_step(x, params)
        except NumericalOverflowError:
            raise NumericalOverflowError(f"non-finite state at step {t}", step=t) from None
        if t % stride == 0:
            times.append(t)
            states.append(x)
    return StateTrajectory(config=params.config,
                           times=np.asarray(times, dtype=np.int64),
                           states=np.stack(states))
