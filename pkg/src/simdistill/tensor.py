"""Dense f64 tensors with define-by-run reverse-mode differentiation.

Every op validates shapes, checks its output for NaN/Inf (non-finite values
abort immediately rather than propagate), and records a backward closure on
the output when any input requires gradients. The graph is rebuilt per batch;
``backward`` on a scalar loss fills ``grad`` buffers by reverse topological
traversal.
"""

from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    """Raised when operand shapes do not line up."""


class NonFiniteError(FloatingPointError):
    """Raised when an op produces NaN or Inf."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def grad_or_zero(self) -> np.ndarray:
        """Gradient buffer, or zeros if the tensor never entered the graph."""
        if self.grad is None:
            return np.zeros_like(self.data)
        return self.grad

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn, op: str) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced non-finite values")
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward_fn = backward_fn
    return out


def backward(loss: Tensor) -> None:
    """Fill grad buffers for every requires_grad tensor reachable from loss."""
    if loss.shape != ():
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not require grad; nothing to differentiate")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(topo):
        if node._backward_fn is not None:
            node._backward_fn(node.grad)


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad:
            b.accumulate_grad(a.data.T @ g)

    return _result(out_data, (a, b), bwd, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise DimensionError(f"transpose needs a matrix, got shape {a.shape}")

    def bwd(g):
        a.accumulate_grad(g.T)

    return _result(a.data.T.copy(), (a,), bwd, "transpose")


def reshape(a: Tensor, shape) -> Tensor:
    def bwd(g):
        a.accumulate_grad(g.reshape(a.shape))

    return _result(a.data.reshape(shape), (a,), bwd, "reshape")


def _broadcast_ok(a: Tensor, b: Tensor) -> bool:
    # full shape match, or a row-vector bias added to every row of a matrix
    return a.shape == b.shape or (a.ndim == 2 and b.shape == (a.shape[1],))


def add(a: Tensor, b: Tensor) -> Tensor:
    if not _broadcast_ok(a, b):
        raise DimensionError(f"add shape mismatch: {a.shape} + {b.shape}")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=0) if b.shape != a.shape else g)

    return _result(a.data + b.data, (a, b), bwd, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if not _broadcast_ok(a, b):
        raise DimensionError(f"sub shape mismatch: {a.shape} - {b.shape}")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(-(g.sum(axis=0) if b.shape != a.shape else g))

    return _result(a.data - b.data, (a, b), bwd, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"mul shape mismatch: {a.shape} * {b.shape}")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * b.data)
        if b.requires_grad:
            b.accumulate_grad(g * a.data)

    return _result(a.data * b.data, (a, b), bwd, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bwd(g):
        a.accumulate_grad(g * c)

    return _result(a.data * c, (a,), bwd, "scale")


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0.0)

    def bwd(g):
        a.accumulate_grad(g * (a.data > 0.0))

    return _result(out_data, (a,), bwd, "relu")


def tensor_sum(a: Tensor) -> Tensor:
    def bwd(g):
        a.accumulate_grad(np.full_like(a.data, float(g)))

    return _result(np.asarray(a.data.sum()), (a,), bwd, "sum")


def rowwise_dot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row inner product of two equal-shape matrices -> vector (m,)."""
    if a.ndim != 2 or a.shape != b.shape:
        raise DimensionError(f"rowwise_dot shape mismatch: {a.shape} . {b.shape}")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g[:, None] * b.data)
        if b.requires_grad:
            b.accumulate_grad(g[:, None] * a.data)

    return _result((a.data * b.data).sum(axis=1), (a, b), bwd, "rowwise_dot")


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise DimensionError(f"concat_cols shape mismatch: {a.shape} | {b.shape}")
    k = a.shape[1]

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g[:, :k])
        if b.requires_grad:
            b.accumulate_grad(g[:, k:])

    return _result(np.concatenate([a.data, b.data], axis=1), (a, b), bwd, "concat_cols")


def gather_cols(a: Tensor, idx) -> Tensor:
    """Pick a[i, idx[i]] per row -> vector (m,); idx is a constant int array."""
    if a.ndim != 2:
        raise DimensionError(f"gather_cols needs a matrix, got shape {a.shape}")
    idx = np.asarray(idx, dtype=np.int64)
    if idx.shape != (a.shape[0],):
        raise DimensionError(f"gather_cols index shape {idx.shape} vs rows {a.shape[0]}")
    if idx.min(initial=0) < 0 or idx.max(initial=-1) >= a.shape[1]:
        raise IndexError(f"gather_cols index out of range [0, {a.shape[1]})")
    rows = np.arange(a.shape[0])

    def bwd(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, (rows, idx), g)
        a.accumulate_grad(buf)

    return _result(a.data[rows, idx], (a,), bwd, "gather_cols")


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax, max-shifted for stability; rows sum to 1."""
    if a.ndim != 2 or a.shape[1] < 1:
        raise DimensionError(f"softmax_rows needs a matrix with >=1 column, got {a.shape}")
    p = _softmax(a.data)

    def bwd(g):
        a.accumulate_grad(p * (g - (g * p).sum(axis=1, keepdims=True)))

    return _result(p, (a,), bwd, "softmax_rows")


def log_softmax_rows(a: Tensor) -> Tensor:
    """Row-wise log-softmax: x - max - log(sum(exp(x - max)))."""
    if a.ndim != 2 or a.shape[1] < 1:
        raise DimensionError(f"log_softmax_rows needs a matrix with >=1 column, got {a.shape}")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    out_data = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def bwd(g):
        p = np.exp(out_data)
        a.accumulate_grad(g - p * g.sum(axis=1, keepdims=True))

    return _result(out_data, (a,), bwd, "log_softmax_rows")


def logsumexp_rows(a: Tensor) -> Tensor:
    """Row-wise log(sum(exp(x))) -> vector (m,), max-shifted."""
    if a.ndim != 2 or a.shape[1] < 1:
        raise DimensionError(f"logsumexp_rows needs a matrix with >=1 column, got {a.shape}")
    m = a.data.max(axis=1, keepdims=True)
    out_data = (m + np.log(np.exp(a.data - m).sum(axis=1, keepdims=True))).reshape(-1)

    def bwd(g):
        a.accumulate_grad(_softmax(a.data) * g[:, None])

    return _result(out_data, (a,), bwd, "logsumexp_rows")


def softplus(a: Tensor) -> Tensor:
    """Stable log(1 + exp(x)); gradient is the logistic function."""
    out_data = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))

    def bwd(g):
        a.accumulate_grad(g / (1.0 + np.exp(-a.data)))

    return _result(out_data, (a,), bwd, "softplus")


def l2_normalize_rows(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale each row to unit norm; rows with norm < eps are scaled by 1/eps."""
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    if a.ndim != 2:
        raise DimensionError(f"l2_normalize_rows needs a matrix, got shape {a.shape}")
    norms = np.sqrt((a.data * a.data).sum(axis=1, keepdims=True))
    denom = np.maximum(norms, eps)
    out_data = a.data / denom

    def bwd(g):
        live = norms >= eps
        # unit-norm branch: (g - y (y.g)) / ||x||; eps branch: constant scale
        proj = (g - out_data * (g * out_data).sum(axis=1, keepdims=True)) / denom
        a.accumulate_grad(np.where(live, proj, g / eps))

    return _result(out_data, (a,), bwd, "l2_normalize_rows")
