"""Minimal dense reverse-mode automatic differentiation on numpy arrays.

Operations executed while a Tape is active are recorded in execution order;
``backward`` replays them once in reverse, accumulating gradients into every
tensor with ``requires_grad``. All values are float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class Tensor:
    """A dense array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


_ACTIVE_TAPES: list["Tape"] = []
# When set, kinked activations (relu / leaky_relu) append their sign pattern
# here so finite-difference checks can detect kink crossings.
_KINK_TRACE: list[np.ndarray] | None = None


class Tape:
    """Ordered record of differentiable operations; context manager."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPES.pop()


def _lift(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> None:
    if _ACTIVE_TAPES and out.requires_grad:
        _ACTIVE_TAPES[-1].nodes.append((out, inputs, backward_fn))


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if not t.requires_grad:
        return
    t.grad = grad.copy() if t.grad is None else t.grad + grad


def _note_kink(values: np.ndarray) -> None:
    if _KINK_TRACE is not None:
        _KINK_TRACE.append(values > 0)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def backward(tape: Tape, loss: Tensor) -> None:
    """Reverse sweep: fill ``grad`` for every requires_grad tensor on the tape."""
    if loss.data.size != 1:
        raise ValueError("backward requires a scalar loss")
    outputs = {id(out) for out, _, _ in tape.nodes}
    if id(loss) not in outputs:
        raise ValueError("loss tensor is not on the tape (detached or recorded elsewhere)")
    for out, inputs, _ in tape.nodes:
        out.grad = None
        for t in inputs:
            t.grad = None
    loss.grad = np.ones_like(loss.data)
    for out, inputs, backward_fn in reversed(tape.nodes):
        if out.grad is None:
            continue
        backward_fn(out.grad)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = Tensor(a.data + b.data, a.requires_grad or b.requires_grad)

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    _record(out, (a, b), bwd)
    return out


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = Tensor(a.data - b.data, a.requires_grad or b.requires_grad)

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    _record(out, (a, b), bwd)
    return out


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = Tensor(a.data * b.data, a.requires_grad or b.requires_grad)

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    _record(out, (a, b), bwd)
    return out


def scale(a, factor: float) -> Tensor:
    a = _lift(a)
    out = Tensor(a.data * factor, a.requires_grad)

    def bwd(g):
        _accumulate(a, g * factor)

    _record(out, (a,), bwd)
    return out


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = Tensor(a.data @ b.data, a.requires_grad or b.requires_grad)

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    _record(out, (a, b), bwd)
    return out


def spmm(matrix: sp.spmatrix, h) -> Tensor:
    """Sparse constant matrix times dense tensor."""
    h = _lift(h)
    csr = matrix.tocsr()
    out = Tensor(csr @ h.data, h.requires_grad)
    csr_t = csr.T.tocsr() if h.requires_grad else None

    def bwd(g):
        _accumulate(h, csr_t @ g)

    _record(out, (h,), bwd)
    return out


def relu(x) -> Tensor:
    x = _lift(x)
    _note_kink(x.data)
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0), x.requires_grad)

    def bwd(g):
        _accumulate(x, g * mask)

    _record(out, (x,), bwd)
    return out


def leaky_relu(x, slope: float = 0.2) -> Tensor:
    x = _lift(x)
    _note_kink(x.data)
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, slope * x.data), x.requires_grad)

    def bwd(g):
        _accumulate(x, g * np.where(mask, 1.0, slope))

    _record(out, (x,), bwd)
    return out


def elu(x, alpha: float = 1.0) -> Tensor:
    x = _lift(x)
    mask = x.data > 0
    neg = alpha * (np.exp(np.minimum(x.data, 0.0)) - 1.0)
    out = Tensor(np.where(mask, x.data, neg), x.requires_grad)

    def bwd(g):
        _accumulate(x, g * np.where(mask, 1.0, neg + alpha))

    _record(out, (x,), bwd)
    return out


def exp(x) -> Tensor:
    x = _lift(x)
    out = Tensor(np.exp(x.data), x.requires_grad)

    def bwd(g):
        _accumulate(x, g * out.data)

    _record(out, (x,), bwd)
    return out


def log(x) -> Tensor:
    x = _lift(x)
    out = Tensor(np.log(x.data), x.requires_grad)

    def bwd(g):
        _accumulate(x, g / x.data)

    _record(out, (x,), bwd)
    return out


def clamp_min(x, floor: float) -> Tensor:
    x = _lift(x)
    mask = x.data > floor
    out = Tensor(np.where(mask, x.data, floor), x.requires_grad)

    def bwd(g):
        _accumulate(x, g * mask)

    _record(out, (x,), bwd)
    return out


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    x = _lift(x)
    out = Tensor(x.data.reshape(shape), x.requires_grad)

    def bwd(g):
        _accumulate(x, g.reshape(x.data.shape))

    _record(out, (x,), bwd)
    return out


def concat(parts, axis: int = 0) -> Tensor:
    parts = [_lift(p) for p in parts]
    out = Tensor(
        np.concatenate([p.data for p in parts], axis=axis),
        any(p.requires_grad for p in parts),
    )
    splits = np.cumsum([p.data.shape[axis] for p in parts])[:-1]

    def bwd(g):
        for p, piece in zip(parts, np.split(g, splits, axis=axis)):
            _accumulate(p, piece)

    _record(out, tuple(parts), bwd)
    return out


def reduce_sum(x, axis: int | None = None) -> Tensor:
    x = _lift(x)
    out = Tensor(x.data.sum(axis=axis), x.requires_grad)

    def bwd(g):
        if axis is None:
            _accumulate(x, np.broadcast_to(g, x.data.shape).copy())
        else:
            _accumulate(x, np.broadcast_to(np.expand_dims(g, axis), x.data.shape).copy())

    _record(out, (x,), bwd)
    return out


def reduce_mean(x, axis: int | None = None) -> Tensor:
    x = _lift(x)
    denom = x.data.size if axis is None else x.data.shape[axis]
    return scale(reduce_sum(x, axis=axis), 1.0 / denom)


def gather_rows(x, idx: np.ndarray) -> Tensor:
    x = _lift(x)
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(x.data[idx], x.requires_grad)

    def bwd(g):
        buf = np.zeros_like(x.data)
        np.add.at(buf, idx, g)
        _accumulate(x, buf)

    _record(out, (x,), bwd)
    return out


def take_per_row(x, cols: np.ndarray) -> Tensor:
    x = _lift(x)
    cols = np.asarray(cols, dtype=np.int64)
    rows = np.arange(x.data.shape[0])
    out = Tensor(x.data[rows, cols], x.requires_grad)

    def bwd(g):
        buf = np.zeros_like(x.data)
        buf[rows, cols] = g
        _accumulate(x, buf)

    _record(out, (x,), bwd)
    return out


def dropout(x, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; train-mode only (callers skip it in eval mode)."""
    x = _lift(x)
    if rate <= 0.0:
        return x
    if rate >= 1.0:
        raise ValueError("dropout rate must be < 1")
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.data * mask, x.requires_grad)

    def bwd(g):
        _accumulate(x, g * mask)

    _record(out, (x,), bwd)
    return out


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_rows(x) -> Tensor:
    x = _lift(x)
    p = _softmax_rows(x.data)
    out = Tensor(p, x.requires_grad)

    def bwd(g):
        dot = (g * p).sum(axis=-1, keepdims=True)
        _accumulate(x, p * (g - dot))

    _record(out, (x,), bwd)
    return out


def log_softmax_rows(x) -> Tensor:
    x = _lift(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = Tensor(shifted - lse, x.requires_grad)
    p = np.exp(out.data)

    def bwd(g):
        _accumulate(x, g - p * g.sum(axis=-1, keepdims=True))

    _record(out, (x,), bwd)
    return out


def softmax_with_temperature(x, tau: float) -> Tensor:
    """Row softmax of logits divided by a temperature tau > 0."""
    if tau <= 0:
        raise ValueError("temperature must be > 0")
    x = _lift(x)
    p = _softmax_rows(x.data / tau)
    out = Tensor(p, x.requires_grad)

    def bwd(g):
        dot = (g * p).sum(axis=-1, keepdims=True)
        _accumulate(x, p * (g - dot) / tau)

    _record(out, (x,), bwd)
    return out


def segment_softmax(values, segments: np.ndarray, num_segments: int) -> Tensor:
    """Softmax within each segment (e.g. over a node's incident edges).

    ``values`` may be 1-D (E,) or 2-D (E, K); segments indexes the first axis.
    """
    values = _lift(values)
    segments = np.asarray(segments, dtype=np.int64)
    v = values.data
    peak_shape = (num_segments,) + v.shape[1:]
    peak = np.full(peak_shape, -np.inf)
    np.maximum.at(peak, segments, v)
    e = np.exp(v - peak[segments])
    denom = np.zeros(peak_shape)
    np.add.at(denom, segments, e)
    p = e / denom[segments]
    out = Tensor(p, values.requires_grad)

    def bwd(g):
        dot = np.zeros(peak_shape)
        np.add.at(dot, segments, g * p)
        _accumulate(values, p * (g - dot[segments]))

    _record(out, (values,), bwd)
    return out


def edge_aggregate(values, h, src: np.ndarray, dst: np.ndarray, num_nodes: int) -> Tensor:
    """Weighted neighbor sum: out[i] = sum over edges e with dst[e]==i of
    values[e] * h[src[e]]. ``values`` is (E,) or (E, K) matching h's head axes.
    """
    values, h = _lift(values), _lift(h)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    v = values.data
    weight = v[..., None] if v.ndim == h.data.ndim - 1 else v
    contrib = weight * h.data[src]
    out_data = np.zeros((num_nodes,) + h.data.shape[1:])
    np.add.at(out_data, dst, contrib)
    out = Tensor(out_data, values.requires_grad or h.requires_grad)

    def bwd(g):
        g_edges = g[dst]
        if values.requires_grad:
            dv = (g_edges * h.data[src]).sum(axis=-1)
            _accumulate(values, dv if v.ndim == dv.ndim else dv[..., None])
        if h.requires_grad:
            dh = np.zeros_like(h.data)
            np.add.at(dh, src, weight * g_edges)
            _accumulate(h, dh)

    _record(out, (values, h), bwd)
    return out


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def cross_entropy(logits, labels: np.ndarray, class_weights: np.ndarray | None = None) -> Tensor:
    """Mean over rows of (optionally class-weighted) negative log-likelihood."""
    logits = _lift(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2 or logits.data.shape[0] != labels.shape[0]:
        raise ValueError("logits rows must match label count")
    picked = take_per_row(log_softmax_rows(logits), labels)
    if class_weights is not None:
        picked = mul(picked, np.asarray(class_weights, dtype=np.float64)[labels])
    return scale(reduce_mean(picked), -1.0)


KL_CLAMP = 1e-12


def kl_divergence(p, q) -> Tensor:
    """Mean over rows of KL(p || q), with 0 ln 0 = 0 and q clamped at 1e-12."""
    p, q = _lift(p), _lift(q)
    if p.data.shape != q.data.shape:
        raise ValueError("p and q must share a shape")
    pd = np.atleast_2d(p.data)
    qd = np.atleast_2d(q.data)
    for name, rows in (("p", pd), ("q", qd)):
        if rows.min() < -1e-9:
            raise ValueError(f"{name} must be nonnegative")
        if np.abs(rows.sum(axis=-1) - 1.0).max() > 1e-6:
            raise ValueError(f"{name} rows must sum to 1")
    q_safe = np.maximum(qd, KL_CLAMP)
    p_safe = np.maximum(pd, KL_CLAMP)
    terms = np.where(pd > 0, pd * (np.log(p_safe) - np.log(q_safe)), 0.0)
    n_rows = pd.shape[0]
    out = Tensor(terms.sum() / n_rows, p.requires_grad or q.requires_grad)

    def bwd(g):
        g = float(g)
        if p.requires_grad:
            gp = np.where(pd > 0, np.log(p_safe) - np.log(q_safe) + 1.0, 0.0) * (g / n_rows)
            _accumulate(p, gp.reshape(p.data.shape))
        if q.requires_grad:
            gq = np.where((pd > 0) & (qd > KL_CLAMP), -pd / q_safe, 0.0) * (g / n_rows)
            _accumulate(q, gq.reshape(q.data.shape))

    _record(out, (p, q), bwd)
    return out


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class OptimizerState:
    """Adam accumulators plus hyperparameters (decoupled weight decay)."""

    learning_rate: float = 0.01
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: OptimizerState) -> OptimizerState:
    """One bias-corrected Adam update, in place on ``params``."""
    if len(params) != len(grads):
        raise ValueError("params and grads must align")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p.data) for p in params]
        state.second_moment = [np.zeros_like(p.data) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.step
    correction2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if g.shape != p.data.shape:
            raise ValueError("gradient shape mismatch")
        if state.weight_decay:
            p.data -= state.learning_rate * state.weight_decay * p.data
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return state


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradientCheckResult:
    max_rel_error: float
    checked: int
    skipped: list[tuple[int, int]]  # (param index, flat coordinate)


def _run_traced(fn, params) -> tuple[float, list[np.ndarray]]:
    global _KINK_TRACE
    _KINK_TRACE = []
    try:
        value = float(fn(params).data)
        trace = _KINK_TRACE
    finally:
        _KINK_TRACE = None
    return value, trace


def _same_signs(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def finite_difference_check(fn, params: list[Tensor], eps: float = 1e-5) -> GradientCheckResult:
    """Compare analytic gradients of fn(params) against central differences.

    Coordinates whose +/- eps evaluations cross a relu-family kink (the sign
    pattern of any kinked activation changes) are skipped, not failed.
    Relative error uses max(1, |fd|, |analytic|) as the denominator.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    with Tape() as tape:
        loss = fn(params)
        backward(tape, loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    _, base_signs = _run_traced(fn, params)

    max_err = 0.0
    checked = 0
    skipped: list[tuple[int, int]] = []
    for pi, p in enumerate(params):
        flat = p.data.reshape(-1)
        an_flat = analytic[pi].reshape(-1)
        for ci in range(flat.size):
            orig = flat[ci]
            flat[ci] = orig + eps
            f_plus, signs_plus = _run_traced(fn, params)
            flat[ci] = orig - eps
            f_minus, signs_minus = _run_traced(fn, params)
            flat[ci] = orig
            if not (_same_signs(base_signs, signs_plus) and _same_signs(base_signs, signs_minus)):
                skipped.append((pi, ci))
                continue
            fd = (f_plus - f_minus) / (2.0 * eps)
            err = abs(fd - an_flat[ci]) / max(1.0, abs(fd), abs(an_flat[ci]))
            max_err = max(max_err, err)
            checked += 1
    return GradientCheckResult(max_rel_error=max_err, checked=checked, skipped=skipped)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape: tuple[int, ...]) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)
