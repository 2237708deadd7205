"""Dense tensor math with reverse-mode gradients.

A :class:`Tensor` wraps a numpy array and remembers the op that produced it.
Calling :meth:`Tensor.backward` on a scalar walks the recorded graph once in
reverse topological order and accumulates ``.grad`` on every tensor that
requires it.  Ops broadcast like numpy; gradients are summed back onto the
operand shapes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import NumericError, ParameterError, ShapeError

CHECK_FINITE = True


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 _parents: tuple["Tensor", ...] = (), _backward: Callable | None = None):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        if CHECK_FINITE and not np.isfinite(arr).all():
            raise NumericError(f"non-finite values produced{f' in {name}' if name else ''}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        g = g.astype(self.data.dtype, copy=False)
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad and not node._parents:
                node._accumulate(g)
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(other, self)
    __sub__ = lambda self, other: add(self, neg(as_tensor(other, like=self)))
    __rsub__ = lambda self, other: add(other, neg(self))
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(other, self)
    __matmul__ = lambda self, other: matmul(self, other)
    __neg__ = lambda self: neg(self)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if like is not None and isinstance(x, (int, float)):
        return Tensor(np.asarray(x, dtype=like.dtype))
    return Tensor(x)


def _result(data, parents: Sequence[Tensor], backward: Callable, name: str) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=needs, name=name,
                  _parents=tuple(parents) if needs else (),
                  _backward=backward if needs else None)


# ---------------------------------------------------------------- elementwise

def _pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _result(out, (a, b), backward, "add")


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = a.data * b.data

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return _result(out, (a, b), backward, "mul")


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),), "tanh")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _result(np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,), "relu")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(a.dtype)
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _result(out, (a,), lambda g: (g / a.data,), "log")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.data >= lo) & (a.data <= hi)
    return _result(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,), "clip")


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "tanh": tanh,
    "relu": relu,
    "sigmoid": sigmoid,
    "none": lambda t: t,
}


# ---------------------------------------------------------------- reductions / shape

def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return _result(out, (a,), backward, "sum")


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return mul(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def mean_pool(a: Tensor, axis: int = -2) -> Tensor:
    """Global average over ``axis``; the axis is kept with length 1."""
    return reduce_mean(a, axis=axis, keepdims=True)


def reshape(a: Tensor, shape) -> Tensor:
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a: Tensor) -> Tensor:
    return _result(np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),), "transpose")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from None
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=axis))
    return _result(out, tensors, backward, "concat")


def take_rows(a: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)
    return _result(a.data[index], (a,), backward, "take_rows")


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-2 if b.data.ndim > 1 else 0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return _result(out, (a, b), backward, "matmul")


def sparse_matmul(m: sp.spmatrix, h: Tensor) -> Tensor:
    """Constant sparse (n×n) matrix times a dense tensor; only ``h`` is differentiable."""
    if m.shape[1] != h.shape[0]:
        raise ShapeError(f"sparse_matmul: {m.shape} @ {h.shape}")
    m = sp.csr_matrix(m)
    out = np.asarray(m @ h.data, dtype=h.dtype)
    return _result(out, (h,), lambda g: (np.asarray(m.T @ g, dtype=h.dtype),), "sparse_matmul")


def dense_forward(x, w, b=None, activation: str = "none") -> Tensor:
    """``act(x @ w + b)``."""
    if activation not in ACTIVATIONS:
        raise ParameterError(f"unknown activation {activation!r}")
    y = matmul(x, w)
    if b is not None:
        y = add(y, b)
    return ACTIVATIONS[activation](y)


# ---------------------------------------------------------------- normalisers

def softmax_temp(s, temperature: float = 1.0, axis: int = -1) -> Tensor:
    if not temperature > 0:
        raise ParameterError(f"softmax temperature must be positive, got {temperature}")
    s = as_tensor(s)
    z = s.data / temperature
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot) / temperature,)
    return _result(y, (s,), backward, "softmax")


def l2_normalize(a: Tensor, axis: int = -1) -> Tensor:
    """Unit-norm rows; all-zero rows pass through unchanged."""
    a = as_tensor(a)
    norm = np.sqrt((a.data * a.data).sum(axis=axis, keepdims=True))
    zero = norm == 0
    safe = np.where(zero, 1.0, norm).astype(a.dtype)
    y = a.data / safe

    def backward(g):
        proj = (g * y).sum(axis=axis, keepdims=True)
        gx = (g - np.where(zero, 0.0, y * proj)) / safe
        return (gx.astype(a.dtype),)
    return _result(y, (a,), backward, "l2_normalize")


@dataclass
class BatchNormState:
    """Learnable scale/shift plus running statistics for one feature axis."""
    gamma: Tensor
    beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    epsilon: float = 1e-5
    momentum: float = 0.9

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError("batch-norm epsilon must be positive")
        if not 0 < self.momentum < 1:
            raise ParameterError("batch-norm momentum must lie in (0, 1)")

    @classmethod
    def create(cls, features: int, dtype=np.float32, **kw) -> "BatchNormState":
        return cls(
            gamma=Tensor(np.ones(features, dtype=dtype), requires_grad=True),
            beta=Tensor(np.zeros(features, dtype=dtype), requires_grad=True),
            running_mean=np.zeros(features, dtype=dtype),
            running_var=np.ones(features, dtype=dtype),
            **kw,
        )


def batch_norm(x, state: BatchNormState, mode: str = "train", update_stats: bool = True) -> Tensor:
    """Normalise the last axis over every other axis, then ``gamma * x_hat + beta``.

    ``momentum`` is the weight kept on the old running value.
    """
    x = as_tensor(x)
    axes = tuple(range(x.data.ndim - 1))
    if mode == "train":
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        if update_stats:
            m = state.momentum
            state.running_mean = (m * state.running_mean + (1 - m) * mu).astype(state.running_mean.dtype)
            state.running_var = (m * state.running_var + (1 - m) * var).astype(state.running_var.dtype)
    elif mode == "eval":
        mu, var = state.running_mean, state.running_var
    else:
        raise ParameterError(f"unknown batch-norm mode {mode!r}")
    inv = (1.0 / np.sqrt(var + state.epsilon)).astype(x.dtype)
    xhat = ((x.data - mu) * inv).astype(x.dtype)
    n = int(np.prod([x.shape[i] for i in axes])) if axes else 1

    def backward(g):
        gx_hat = g   # already dL/dx_hat: gamma is applied by the mul node below
        if mode == "train":
            gx = inv / n * (n * gx_hat - gx_hat.sum(axis=axes) - xhat * (gx_hat * xhat).sum(axis=axes))
        else:
            gx = gx_hat * inv
        return gx.astype(x.dtype)

    normed = _result(xhat, (x,), lambda g: (backward(g),), "batch_norm")
    return add(mul(normed, state.gamma), state.beta)


def dropout(x: Tensor, p: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout: scale kept units by 1/(1-p) in training, identity otherwise."""
    if not 0 <= p < 1:
        raise ParameterError(f"dropout probability must lie in [0, 1), got {p}")
    if not train or p == 0:
        return x
    if rng is None:
        raise ParameterError("training-mode dropout needs a random generator")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return mul(x, keep)


# ---------------------------------------------------------------- initialisation

def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


@dataclass
class ParameterStore:
    """Named trainable tensors plus non-trainable buffers (batch-norm statistics)."""
    params: dict[str, Tensor] = field(default_factory=dict)
    bn: dict[str, BatchNormState] = field(default_factory=dict)

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise ParameterError(f"duplicate parameter name {name!r}")
        t = Tensor(value, requires_grad=True, name=name)
        self.params[name] = t
        return t

    def dense(self, name: str, fan_in: int, fan_out: int, rng, dtype=np.float32, bias: bool = True):
        w = self.add(f"{name}.W", glorot_uniform(fan_in, fan_out, rng, dtype))
        b = self.add(f"{name}.b", np.zeros(fan_out, dtype=dtype)) if bias else None
        return w, b

    def batch_norm(self, name: str, features: int, dtype=np.float32, **kw) -> BatchNormState:
        state = BatchNormState.create(features, dtype=dtype, **kw)
        state.gamma = self.add(f"{name}.gamma", state.gamma.data)
        state.beta = self.add(f"{name}.beta", state.beta.data)
        self.bn[name] = state
        return state

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for name, st in self.bn.items():
            out[f"{name}.running_mean"] = st.running_mean
            out[f"{name}.running_var"] = st.running_var
        return out

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        bn_name, stat = name.rsplit(".", 1)
        setattr(self.bn[bn_name], stat, np.array(value))

    def astype(self, dtype) -> "ParameterStore":
        """Deep copy with every tensor and buffer cast to ``dtype``."""
        new = ParameterStore()
        for name, t in self.params.items():
            new.params[name] = Tensor(t.data.astype(dtype), requires_grad=True, name=name)
        for name, st in self.bn.items():
            new.bn[name] = BatchNormState(
                gamma=new.params[f"{name}.gamma"], beta=new.params[f"{name}.beta"],
                running_mean=st.running_mean.astype(dtype), running_var=st.running_var.astype(dtype),
                epsilon=st.epsilon, momentum=st.momentum,
            )
        return new

    def copy(self) -> "ParameterStore":
        return self.astype(next(iter(self.params.values())).dtype) if self.params else ParameterStore()


# ---------------------------------------------------------------- verification

def grad_check(loss_fn: Callable[[ParameterStore], Tensor], params: ParameterStore,
               probe_count: int = 20, eps: float = 1e-5, seed: int = 0,
               oracle_dtype=np.longdouble, floor: float = 1e-10,
               return_details: bool = False):
    """Compare reverse-mode gradients with central finite differences.

    ``probe_count`` scalar parameters are drawn uniformly over all entries of
    all tensors.  Finite differences are evaluated on a copy of the store cast
    to ``oracle_dtype``; the analytic gradient stays at the store's own
    precision.  Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    The default extended-precision oracle keeps round-off in the difference
    quotient well below the float64 analytic error.
    """
    params.zero_grad()
    loss = loss_fn(params)
    if not np.isfinite(loss.data).all():
        raise NumericError("loss is not finite")
    loss.backward()

    names = params.names()
    sizes = np.array([params[n].data.size for n in names])
    rng = np.random.default_rng(seed)
    flat = rng.choice(int(sizes.sum()), size=min(probe_count, int(sizes.sum())), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    oracle = params.astype(oracle_dtype)
    worst = 0.0
    details = []
    for f in np.sort(flat):
        k = int(np.searchsorted(offsets, f, side="right") - 1)
        name, idx = names[k], int(f - offsets[k])
        analytic = float(params[name].grad.reshape(-1)[idx])
        target = oracle[name].data.reshape(-1)
        orig = target[idx]
        vals = []
        for step in (eps, -eps):
            target[idx] = orig + step
            vals.append(np.asarray(loss_fn(oracle).data, dtype=oracle_dtype).reshape(()))
        target[idx] = orig
        up, down = vals
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericError(f"non-finite loss while probing {name}[{idx}]")
        numeric = float((up - down) / (2 * eps))
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
        details.append((name, idx, analytic, numeric, rel))
        worst = max(worst, rel)
    if return_details:
        return worst, details
    return worst
