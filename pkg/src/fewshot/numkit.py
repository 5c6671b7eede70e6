"""Self-contained numerical kernel.

Similarity and loss primitives, a decoupled-weight-decay Adam optimizer,
a bidirectional GRU with hand-derived reverse-mode gradients, the pair
scoring head, and a finite-difference gradient checker.  All arithmetic
accumulates in 64-bit floats regardless of the storage dtype of the
inputs; gradients are exact derivatives of the forward computation as
implemented (including the loss clamp).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError
from .prng import SplitMix64

BCE_CLAMP = 1e-7

HEAD_WEIGHTED_L1 = "weighted-l1"
HEAD_EUCLIDEAN = "euclidean"
HEAD_KINDS = (HEAD_WEIGHTED_L1, HEAD_EUCLIDEAN)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """(a . b) / (|a| |b|), accumulated in 64-bit."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"vectors must be 1-D and equal length, got {a.shape} and {b.shape}")
    norm_a = math.sqrt(float(a @ a))
    norm_b = math.sqrt(float(b @ b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise NumericError("cosine similarity of a zero-norm vector is undefined")
    return float(a @ b) / (norm_a * norm_b)


def sigmoid(x):
    """1 / (1 + exp(-x)); stable for large |x| (saturates, never overflows)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    exp_x = np.exp(x[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    if out.ndim == 0:
        return float(out)
    return out


def bce_loss(pred: float, target: int) -> float:
    """Binary cross entropy with pred clamped into [1e-7, 1 - 1e-7]."""
    if target not in (0, 1):
        raise ValueError(f"target must be 0 or 1, got {target!r}")
    pred = min(max(float(pred), BCE_CLAMP), 1.0 - BCE_CLAMP)
    return -(target * math.log(pred) + (1 - target) * math.log(1.0 - pred))


def bce_grad(pred: float, target: int) -> float:
    """d bce_loss / d pred; zero where the clamp is active."""
    pred = float(pred)
    if pred <= BCE_CLAMP or pred >= 1.0 - BCE_CLAMP:
        return 0.0
    return (pred - target) / (pred * (1.0 - pred))


# ---------------------------------------------------------------------------
# AdamW
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdamWHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")


@dataclass
class AdamWState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


def adamw_init(params: Sequence[np.ndarray]) -> AdamWState:
    return AdamWState(
        m=[np.zeros(p.shape, dtype=np.float64) for p in params],
        v=[np.zeros(p.shape, dtype=np.float64) for p in params],
    )


def adamw_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamWState,
    hyper: AdamWHyper,
) -> tuple[list[np.ndarray], AdamWState]:
    """One Adam step with decoupled weight decay.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;  with bias-corrected
    m^ = m/(1-b1^t) and v^ = v/(1-b2^t):

        p <- p - lr * m^ / (sqrt(v^) + eps) - lr * weight_decay * p

    Pure: returns fresh parameter arrays (in each input's dtype) and a
    fresh state. Moments are kept in 64-bit.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and state must have matching lengths")
    t = state.t + 1
    new_params: list[np.ndarray] = []
    new_m: list[np.ndarray] = []
    new_v: list[np.ndarray] = []
    correction1 = 1.0 - hyper.beta1**t
    correction2 = 1.0 - hyper.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"parameter/gradient shape mismatch: {p.shape} vs {g.shape}")
        g64 = np.asarray(g, dtype=np.float64)
        if not np.all(np.isfinite(g64)):
            raise NumericError("non-finite gradient")
        p64 = np.asarray(p, dtype=np.float64)
        m_next = hyper.beta1 * m + (1.0 - hyper.beta1) * g64
        v_next = hyper.beta2 * v + (1.0 - hyper.beta2) * g64 * g64
        m_hat = m_next / correction1
        v_hat = v_next / correction2
        updated = p64 - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps) - hyper.lr * hyper.weight_decay * p64
        new_params.append(updated.astype(p.dtype))
        new_m.append(m_next)
        new_v.append(v_next)
    return new_params, AdamWState(m=new_m, v=new_v, t=t)


# ---------------------------------------------------------------------------
# Bidirectional GRU
# ---------------------------------------------------------------------------


@dataclass
class GruDirection:
    """One direction's parameters; field order is also the init draw order."""

    w_z: np.ndarray
    u_z: np.ndarray
    b_z: np.ndarray
    w_r: np.ndarray
    u_r: np.ndarray
    b_r: np.ndarray
    w_h: np.ndarray
    u_h: np.ndarray
    b_h: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r, self.w_h, self.u_h, self.b_h]


@dataclass
class GruParams:
    """Shared-weight bidirectional GRU parameters (also used for gradients)."""

    fwd: GruDirection
    bwd: GruDirection

    @property
    def hidden_size(self) -> int:
        return int(self.fwd.w_z.shape[0])

    @property
    def input_size(self) -> int:
        return int(self.fwd.w_z.shape[1])

    def arrays(self) -> list[np.ndarray]:
        return self.fwd.arrays() + self.bwd.arrays()

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "GruParams":
        if len(arrays) != 18:
            raise ValueError(f"expected 18 arrays, got {len(arrays)}")
        names = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")
        fwd = GruDirection(**dict(zip(names, arrays[:9])))
        bwd = GruDirection(**dict(zip(names, arrays[9:])))
        return GruParams(fwd=fwd, bwd=bwd)

    def astype(self, dtype, copy: bool = True) -> "GruParams":
        return self.with_arrays([a.astype(dtype, copy=copy) for a in self.arrays()])


def _init_direction(hidden_size: int, input_size: int, rng: SplitMix64) -> GruDirection:
    def draw(rows: int, cols: int | None, fan_in: int) -> np.ndarray:
        scale = 1.0 / math.sqrt(fan_in)
        count = rows if cols is None else rows * cols
        flat = np.array([rng.uniform_in(-scale, scale) for _ in range(count)], dtype=np.float64)
        return flat if cols is None else flat.reshape(rows, cols)

    h, d = hidden_size, input_size
    # draw order: per gate (z, r, h): input weights, hidden weights, bias
    arrays = []
    for _gate in range(3):
        arrays.append(draw(h, d, d))
        arrays.append(draw(h, h, h))
        arrays.append(draw(h, None, h))
    w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h = arrays
    return GruDirection(w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h)


def init_gru(hidden_size: int, input_size: int, rng: SplitMix64) -> GruParams:
    """Uniform init in [-s, s], s = 1/sqrt(fan-in); forward direction first."""
    if hidden_size <= 0 or input_size <= 0:
        raise ValueError("hidden_size and input_size must be positive")
    fwd = _init_direction(hidden_size, input_size, rng)
    bwd = _init_direction(hidden_size, input_size, rng)
    return GruParams(fwd=fwd, bwd=bwd)


def zeros_like_gru(params: GruParams) -> GruParams:
    return params.with_arrays([np.zeros(a.shape, dtype=np.float64) for a in params.arrays()])


@dataclass
class _GruStep:
    x: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    h_tilde: np.ndarray


@dataclass
class BiGruCache:
    params: GruParams
    fwd_steps: list[_GruStep]
    bwd_steps: list[_GruStep]


def _direction_forward(direction: GruDirection, sequence: np.ndarray) -> tuple[np.ndarray, list[_GruStep]]:
    """GRU recurrence with h_0 = 0:

    z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
    r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
    h~_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
    h_t = (1 - z_t) * h~_t + z_t * h_{t-1}
    """
    h = np.zeros(direction.w_z.shape[0], dtype=np.float64)
    steps: list[_GruStep] = []
    for x in sequence:
        z = sigmoid(direction.w_z @ x + direction.u_z @ h + direction.b_z)
        r = sigmoid(direction.w_r @ x + direction.u_r @ h + direction.b_r)
        h_tilde = np.tanh(direction.w_h @ x + direction.u_h @ (r * h) + direction.b_h)
        steps.append(_GruStep(x=x, h_prev=h, z=z, r=r, h_tilde=h_tilde))
        h = (1.0 - z) * h_tilde + z * h
    return h, steps


def _direction_backward(
    direction: GruDirection,
    steps: list[_GruStep],
    d_final: np.ndarray,
) -> GruDirection:
    """Backpropagation through time for one direction.

    Returns parameter gradients for a scalar objective whose gradient with
    respect to the final hidden state is ``d_final``.
    """
    grads = GruDirection(*[np.zeros(a.shape, dtype=np.float64) for a in direction.arrays()])
    d_h = np.asarray(d_final, dtype=np.float64).copy()
    for step in reversed(steps):
        d_h_tilde = d_h * (1.0 - step.z)
        d_z = d_h * (step.h_prev - step.h_tilde)
        d_h_prev = d_h * step.z

        d_a_h = d_h_tilde * (1.0 - step.h_tilde**2)
        grads.w_h += np.outer(d_a_h, step.x)
        grads.u_h += np.outer(d_a_h, step.r * step.h_prev)
        grads.b_h += d_a_h
        d_rh = direction.u_h.T @ d_a_h
        d_r = d_rh * step.h_prev
        d_h_prev = d_h_prev + d_rh * step.r

        d_a_z = d_z * step.z * (1.0 - step.z)
        grads.w_z += np.outer(d_a_z, step.x)
        grads.u_z += np.outer(d_a_z, step.h_prev)
        grads.b_z += d_a_z
        d_h_prev = d_h_prev + direction.u_z.T @ d_a_z

        d_a_r = d_r * step.r * (1.0 - step.r)
        grads.w_r += np.outer(d_a_r, step.x)
        grads.u_r += np.outer(d_a_r, step.h_prev)
        grads.b_r += d_a_r
        d_h_prev = d_h_prev + direction.u_r.T @ d_a_r

        d_h = d_h_prev
    return grads


def bigru_forward(params: GruParams, sequence: np.ndarray) -> tuple[np.ndarray, BiGruCache]:
    """Run both directions over the sequence; returns concat of final states.

    The backward direction consumes the reversed sequence with its own
    parameters; the output is ``concat(h_fwd_T, h_bwd_T)`` (length 2h).
    """
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim != 2 or sequence.shape[0] == 0:
        raise ValueError("sequence must be a non-empty T x d matrix")
    if sequence.shape[1] != params.input_size:
        raise ValueError(
            f"sequence dimension {sequence.shape[1]} != params input size {params.input_size}"
        )
    params64 = params.astype(np.float64, copy=False)
    h_fwd, fwd_steps = _direction_forward(params64.fwd, sequence)
    h_bwd, bwd_steps = _direction_forward(params64.bwd, sequence[::-1])
    embedding = np.concatenate([h_fwd, h_bwd])
    return embedding, BiGruCache(params=params64, fwd_steps=fwd_steps, bwd_steps=bwd_steps)


def bigru_backward(cache: BiGruCache, d_embedding: np.ndarray) -> GruParams:
    """Exact gradients of (d_embedding . output) w.r.t. all GRU parameters."""
    d_embedding = np.asarray(d_embedding, dtype=np.float64)
    h = cache.params.hidden_size
    if d_embedding.shape != (2 * h,):
        raise ValueError(f"d_embedding must have shape ({2 * h},)")
    fwd_grads = _direction_backward(cache.params.fwd, cache.fwd_steps, d_embedding[:h])
    bwd_grads = _direction_backward(cache.params.bwd, cache.bwd_steps, d_embedding[h:])
    return GruParams(fwd=fwd_grads, bwd=bwd_grads)


# ---------------------------------------------------------------------------
# Pair head
# ---------------------------------------------------------------------------


@dataclass
class PairHeadParams:
    """Comparison head over a pair of encoder outputs.

    weighted-l1: out = sigmoid(w . |e1 - e2| + b), learned w and b.
    euclidean:   out = sigmoid(||e1 - e2||), no parameters.
    """

    kind: str
    w: np.ndarray | None = None
    b: float | None = None

    def __post_init__(self):
        if self.kind not in HEAD_KINDS:
            raise ValueError(f"unknown head kind {self.kind!r}")
        if self.kind == HEAD_WEIGHTED_L1:
            if self.w is None or self.b is None:
                raise ValueError("weighted-l1 head needs w and b")
        elif self.w is not None or self.b is not None:
            raise ValueError("euclidean head takes no parameters")

    def arrays(self) -> list[np.ndarray]:
        if self.kind == HEAD_EUCLIDEAN:
            return []
        w = np.asarray(self.w)
        return [w, np.asarray([self.b], dtype=w.dtype)]

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "PairHeadParams":
        if self.kind == HEAD_EUCLIDEAN:
            if arrays:
                raise ValueError("euclidean head takes no arrays")
            return PairHeadParams(kind=self.kind)
        w, b = arrays
        return PairHeadParams(kind=self.kind, w=w, b=float(b[0]))


def init_head(kind: str, hidden_size: int, rng: SplitMix64) -> PairHeadParams:
    """Head init; weighted-l1 draws w then b uniform with s = 1/sqrt(2h)."""
    if kind == HEAD_EUCLIDEAN:
        return PairHeadParams(kind=kind)
    scale = 1.0 / math.sqrt(2 * hidden_size)
    w = np.array([rng.uniform_in(-scale, scale) for _ in range(2 * hidden_size)], dtype=np.float64)
    b = rng.uniform_in(-scale, scale)
    return PairHeadParams(kind=kind, w=w, b=b)


@dataclass
class _HeadCache:
    head: PairHeadParams
    diff: np.ndarray
    out: float


def head_forward(head: PairHeadParams, e1: np.ndarray, e2: np.ndarray) -> tuple[float, _HeadCache]:
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    if e1.shape != e2.shape:
        raise ValueError("pair embeddings must have equal shapes")
    diff = e1 - e2
    if head.kind == HEAD_WEIGHTED_L1:
        if head.w.shape != diff.shape:
            raise ValueError(f"head width {head.w.shape} != embedding width {diff.shape}")
        pre = float(np.asarray(head.w, dtype=np.float64) @ np.abs(diff)) + float(head.b)
    else:
        pre = math.sqrt(float(diff @ diff))
    out = sigmoid(pre)
    return out, _HeadCache(head=head, diff=diff, out=out)


def head_backward(cache: _HeadCache, d_out: float) -> tuple[PairHeadParams, np.ndarray, np.ndarray]:
    """Gradients of ``d_out * out`` w.r.t. head parameters and both inputs.

    |.| and ||.|| are non-differentiable where the difference vanishes;
    the zero subgradient is used there.
    """
    head = cache.head
    out = cache.out
    d_pre = float(d_out) * out * (1.0 - out)
    if head.kind == HEAD_WEIGHTED_L1:
        abs_diff = np.abs(cache.diff)
        d_w = d_pre * abs_diff
        d_b = d_pre
        d_diff = d_pre * np.asarray(head.w, dtype=np.float64) * np.sign(cache.diff)
        head_grads = PairHeadParams(kind=head.kind, w=d_w, b=d_b)
    else:
        norm = math.sqrt(float(cache.diff @ cache.diff))
        d_diff = (d_pre / norm) * cache.diff if norm > 0.0 else np.zeros_like(cache.diff)
        head_grads = PairHeadParams(kind=head.kind)
    return head_grads, d_diff, -d_diff


@dataclass
class PairCache:
    cache_a: BiGruCache
    cache_b: BiGruCache
    head_cache: _HeadCache


def soe_pair_forward(
    params: GruParams,
    head: PairHeadParams,
    seq_a: np.ndarray,
    seq_b: np.ndarray,
) -> tuple[float, PairCache]:
    """Encode both sequences with the same GRU, then score the pair."""
    e1, cache_a = bigru_forward(params, seq_a)
    e2, cache_b = bigru_forward(params, seq_b)
    out, head_cache = head_forward(head, e1, e2)
    return out, PairCache(cache_a=cache_a, cache_b=cache_b, head_cache=head_cache)


def soe_pair_backward(cache: PairCache, d_out: float) -> tuple[GruParams, PairHeadParams]:
    """Gradients of ``d_out * out`` for the GRU (branches summed) and head."""
    head_grads, d_e1, d_e2 = head_backward(cache.head_cache, d_out)
    grads_a = bigru_backward(cache.cache_a, d_e1)
    grads_b = bigru_backward(cache.cache_b, d_e2)
    summed = grads_a.with_arrays([ga + gb for ga, gb in zip(grads_a.arrays(), grads_b.arrays())])
    return summed, head_grads


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

LossFn = Callable[[list[np.ndarray]], tuple[float, Sequence[np.ndarray]]]


def gradient_check(loss_fn: LossFn, params: Sequence[np.ndarray], eps: float) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(params) -> (loss, grads)`` must be pure.  For every scalar
    parameter the analytic derivative is compared against
    ``(loss(p + eps) - loss(p - eps)) / (2 eps)`` and the error is
    ``|analytic - numeric| / max(1e-8, |analytic| + |numeric|)``.
    Run in 64-bit.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    params = [np.asarray(p, dtype=np.float64) for p in params]
    loss, analytic = loss_fn(params)
    if not math.isfinite(loss):
        raise NumericError("non-finite loss")
    worst = 0.0
    for index, param in enumerate(params):
        grad = np.asarray(analytic[index], dtype=np.float64)
        for flat_index in range(param.size):
            bumped = [p.copy() for p in params]
            bumped[index].flat[flat_index] += eps
            loss_plus = loss_fn(bumped)[0]
            bumped[index].flat[flat_index] -= 2.0 * eps
            loss_minus = loss_fn(bumped)[0]
            if not (math.isfinite(loss_plus) and math.isfinite(loss_minus)):
                raise NumericError("non-finite loss during finite differencing")
            numeric = (loss_plus - loss_minus) / (2.0 * eps)
            a = float(grad.flat[flat_index])
            error = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, error)
    return worst
