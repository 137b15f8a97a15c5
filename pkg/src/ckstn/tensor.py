"""Dense 2-D float64 tensors with reverse-mode automatic differentiation.

Every value in the model is a rank-2 matrix; batches are lists of matrices.
Ops record a backward closure on the output node; ``Tensor.backward()`` walks
the graph in reverse topological order and accumulates into ``.grad``.

Tensors are treated as immutable once created. Gradient recording can be
switched off globally with the ``no_grad`` context manager (used by
evaluation and by finite-difference probes, where only values are needed).
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, ConfigError, NumericError

_GRAD_ENABLED = True

# tanh-approximation GELU constants: 0.5*x*(1 + tanh(c0*(x + c1*x^3)))
_GELU_C0 = math.sqrt(2.0 / math.pi)
_GELU_C1 = 0.044715


@contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise DimensionError(f"tensors are 2-D, got ndim={arr.ndim}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- shape helpers ------------------------------------------------------

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self) -> str:  # pragma: no cover
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph --------------------------------------------------------------

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Reverse-mode sweep from this node (iterative topological order)."""
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        if seed is None:
            seed = np.ones_like(self.data)
        self._accumulate(seed)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, scale(other, -1.0))

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)


def _make(data: np.ndarray, parents: Sequence[Tensor],
          backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED:
        out._parents = tuple(parents)
        out._backward = backward
    return out


# -- constructors -----------------------------------------------------------

def zeros(rows: int, cols: int) -> Tensor:
    return Tensor(np.zeros((rows, cols)))


def ones(rows: int, cols: int) -> Tensor:
    return Tensor(np.ones((rows, cols)))


def constant(arr) -> Tensor:
    return Tensor(np.asarray(arr, dtype=np.float64))


# -- arithmetic -------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum. ``b`` may also be a 1 x cols row (bias broadcast)."""
    if a.shape == b.shape:
        def back(g):
            a._accumulate(g)
            b._accumulate(g)
        return _make(a.data + b.data, (a, b), back)
    if b.rows == 1 and b.cols == a.cols:
        def back(g):
            a._accumulate(g)
            b._accumulate(g.sum(axis=0, keepdims=True))
        return _make(a.data + b.data, (a, b), back)
    raise DimensionError(f"add: incompatible shapes {a.shape} and {b.shape}")


def add_const(a: Tensor, arr) -> Tensor:
    """Add a constant array (no gradient into the constant)."""
    out = a.data + np.asarray(arr, dtype=np.float64)
    if out.shape != a.data.shape:
        raise DimensionError("add_const: constant must broadcast to operand shape")

    def back(g):
        a._accumulate(g)
    return _make(out, (a,), back)


def scale(a: Tensor, alpha: float) -> Tensor:
    def back(g):
        a._accumulate(alpha * g)
    return _make(alpha * a.data, (a,), back)


def affine(a: Tensor, alpha: float, beta: float) -> Tensor:
    """alpha * a + beta, elementwise."""
    def back(g):
        a._accumulate(alpha * g)
    return _make(alpha * a.data + beta, (a,), back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"mul: incompatible shapes {a.shape} and {b.shape}")

    def back(g):
        a._accumulate(g * b.data)
        b._accumulate(g * a.data)
    return _make(a.data * b.data, (a, b), back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise DimensionError(f"matmul: {a.shape} x {b.shape}")

    def back(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)
    return _make(a.data @ b.data, (a, b), back)


def transpose(a: Tensor) -> Tensor:
    def back(g):
        a._accumulate(g.T)
    return _make(a.data.T.copy(), (a,), back)


def sum_all(a: Tensor) -> Tensor:
    def back(g):
        a._accumulate(np.full_like(a.data, g[0, 0]))
    return _make(np.array([[a.data.sum()]]), (a,), back)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size

    def back(g):
        a._accumulate(np.full_like(a.data, g[0, 0] / n))
    return _make(np.array([[a.data.mean()]]), (a,), back)


def sum_cols(a: Tensor) -> Tensor:
    """Row sums: n x c -> n x 1."""
    def back(g):
        a._accumulate(np.broadcast_to(g, a.data.shape).copy())
    return _make(a.data.sum(axis=1, keepdims=True), (a,), back)


def max_over_rows(a: Tensor) -> Tensor:
    """Column-wise max: n x c -> 1 x c. Ties route gradient to the lowest row."""
    idx = a.data.argmax(axis=0)  # numpy argmax takes the first (lowest) index on ties
    out = a.data[idx, np.arange(a.cols)].reshape(1, -1)

    def back(g):
        ga = np.zeros_like(a.data)
        ga[idx, np.arange(a.cols)] = g[0]
        a._accumulate(ga)
    return _make(out, (a,), back)


# -- elementwise nonlinearities ----------------------------------------------

def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def back(g):
        a._accumulate(g * mask)
    return _make(np.maximum(a.data, 0.0), (a,), back)


def clamp_max(a: Tensor, cap: float) -> Tensor:
    """Elementwise min(a, cap); gradient passes where a <= cap."""
    mask = a.data <= cap

    def back(g):
        a._accumulate(g * mask)
    return _make(np.minimum(a.data, cap), (a,), back)


def gelu(a: Tensor) -> Tensor:
    x = a.data
    u = _GELU_C0 * (x + _GELU_C1 * x ** 3)
    t = np.tanh(u)
    out = 0.5 * x * (1.0 + t)

    def back(g):
        du = _GELU_C0 * (1.0 + 3.0 * _GELU_C1 * x ** 2)
        d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * du
        a._accumulate(g * d)
    return _make(out, (a,), back)


def paper_sigmoid(a: Tensor) -> Tensor:
    """Logistic 1/(1+e^-x), computed in the overflow-safe split form."""
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.maximum(x, 0))),
                   np.exp(np.minimum(x, 0)) / (1.0 + np.exp(np.minimum(x, 0))))

    def back(g):
        a._accumulate(g * out * (1.0 - out))
    return _make(out, (a,), back)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def back(g):
        a._accumulate(g * out)
    return _make(out, (a,), back)


def log(a: Tensor) -> Tensor:
    def back(g):
        a._accumulate(g / a.data)
    return _make(np.log(a.data), (a,), back)


# -- normalizations -----------------------------------------------------------

def softmax_rows(a: Tensor) -> Tensor:
    """Row softmax, stabilized by row-max subtraction."""
    if not np.isfinite(a.data).all():
        raise NumericError("softmax_rows: non-finite input")
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def back(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        a._accumulate(out * (g - dot))
    return _make(out, (a,), back)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row standardization followed by a learned affine.

    gain and bias are 1 x cols; variance uses the population mean with eps
    added inside the square root.
    """
    if x.cols == 0:
        raise DimensionError("layer_norm: zero columns")
    if gain.shape != (1, x.cols) or bias.shape != (1, x.cols):
        raise DimensionError(
            f"layer_norm: gain/bias must be 1x{x.cols}, got {gain.shape}/{bias.shape}")
    c = x.cols
    mu = x.data.mean(axis=1, keepdims=True)
    d = x.data - mu
    var = (d * d).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = d * inv
    out = xhat * gain.data + bias.data

    def back(g):
        gain._accumulate((g * xhat).sum(axis=0, keepdims=True))
        bias._accumulate(g.sum(axis=0, keepdims=True))
        gx = g * gain.data
        # d/dx of (x - mu)/sqrt(var + eps) with mu, var both functions of x
        m1 = gx.mean(axis=1, keepdims=True)
        m2 = (gx * xhat).mean(axis=1, keepdims=True)
        x._accumulate(inv * (gx - m1 - xhat * m2))
    return _make(out, (x, gain, bias), back)


def row_normalize(a: Tensor) -> Tensor:
    """L2-normalize each row. All-zero rows stay zero (identity gradient)."""
    norms = np.linalg.norm(a.data, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    out = a.data / safe

    def back(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        a._accumulate((g - out * dot) / safe)
    return _make(out, (a,), back)


# -- structure ops -------------------------------------------------------------

def clip_chunk(x: Tensor, i: int, m: int) -> Tensor:
    """Return the i-th of m contiguous column chunks (1-indexed i).

    m must divide the column count; chunk width is cols/m.
    """
    if m < 1 or x.cols % m != 0:
        raise ConfigError(f"clip_chunk: m={m} does not divide cols={x.cols}")
    if not (1 <= i <= m):
        raise ConfigError(f"clip_chunk: i={i} outside 1..{m}")
    w = x.cols // m
    lo, hi = (i - 1) * w, i * w

    def back(g):
        gx = np.zeros_like(x.data)
        gx[:, lo:hi] = g
        x._accumulate(gx)
    return _make(x.data[:, lo:hi].copy(), (x,), back)


def concat_shuffle(a: Tensor, b: Tensor) -> Tensor:
    """Group-2 channel shuffle of the column concatenation.

    Output column 2j is a's column j, output column 2j+1 is b's column j;
    a fixed, invertible permutation of concat(a, b).
    """
    if a.shape != b.shape:
        raise DimensionError(f"concat_shuffle: {a.shape} vs {b.shape}")
    n, c = a.shape
    out = np.empty((n, 2 * c))
    out[:, 0::2] = a.data
    out[:, 1::2] = b.data

    def back(g):
        a._accumulate(g[:, 0::2])
        b._accumulate(g[:, 1::2])
    return _make(out, (a, b), back)


def unshuffle_split(y: Tensor) -> tuple[Tensor, Tensor]:
    """Inverse of concat_shuffle: recover (a, b) from the interleaving."""
    if y.cols % 2 != 0:
        raise DimensionError("unshuffle_split: odd column count")

    a_data = y.data[:, 0::2].copy()
    b_data = y.data[:, 1::2].copy()

    def back_a(g):
        gy = np.zeros_like(y.data)
        gy[:, 0::2] = g
        y._accumulate(gy)

    def back_b(g):
        gy = np.zeros_like(y.data)
        gy[:, 1::2] = g
        y._accumulate(gy)
    return _make(a_data, (y,), back_a), _make(b_data, (y,), back_b)


def concat_rows(parts: Iterable[Tensor]) -> Tensor:
    parts = list(parts)
    if not parts:
        raise DimensionError("concat_rows: empty input")
    c = parts[0].cols
    for p in parts:
        if p.cols != c:
            raise DimensionError("concat_rows: column counts differ")
    sizes = [p.rows for p in parts]
    offs = np.cumsum([0] + sizes)

    def back(g):
        for p, lo, hi in zip(parts, offs[:-1], offs[1:]):
            p._accumulate(g[lo:hi])
    return _make(np.vstack([p.data for p in parts]), parts, back)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start <= stop <= a.rows):
        raise DimensionError(f"slice_rows: [{start}:{stop}] outside 0..{a.rows}")

    def back(g):
        ga = np.zeros_like(a.data)
        ga[start:stop] = g
        a._accumulate(ga)
    return _make(a.data[start:stop].copy(), (a,), back)


def reshape(a: Tensor, rows: int, cols: int) -> Tensor:
    if rows * cols != a.data.size:
        raise DimensionError(f"reshape: {a.shape} -> ({rows},{cols})")

    def back(g):
        a._accumulate(g.reshape(a.data.shape))
    return _make(a.data.reshape(rows, cols).copy(), (a,), back)


def logsumexp_rows(a: Tensor) -> Tensor:
    """Row-wise log-sum-exp, n x c -> n x 1, stabilized by a detached row max."""
    m = a.data.max(axis=1, keepdims=True)
    e = exp(add_const(a, -m))
    s = sum_cols(e)
    return add_const(log(s), m)
