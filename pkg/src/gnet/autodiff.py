"""Reverse-mode automatic differentiation over dense 2-D float64 tensors.

Every tensor is a :class:`Value` holding a ``(rows, cols)`` numpy array.
Operations build a dynamic computation graph: each result records its
parent tensors and a vector-Jacobian product used later by
:func:`backward`. Gradients accumulate additively across fan-out, and the
traversal order is fixed by construction order, so a given graph always
produces bit-identical gradients within a run.

Everything is double precision. Single precision makes central-difference
gradient checks at eps ~ 1e-4 meaningless, and those checks are the main
correctness oracle for the whole stack.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterator, Sequence

import numpy as np

# Floor applied inside log(); keeps NLL finite on exact-zero probabilities.
LOG_EPS = 1e-12


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested operation."""


class NumericError(ArithmeticError):
    """A numeric check failed (non-finite loss, invalid step size, ...)."""


_ids = itertools.count()


class Value:
    """A node in the computation graph: data, gradient accumulator, parents.

    ``data`` and ``grad`` always share the same ``(rows, cols)`` shape.
    Scalars are represented as ``(1, 1)``, row vectors as ``(1, n)``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "_op", "_id")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, arr.size)
        elif arr.ndim != 2:
            raise ShapeError(f"Value must be at most 2-D, got ndim={arr.ndim}")
        self.data = arr
        self.grad = np.zeros_like(arr)
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Value, ...] = ()
        self._vjp: Callable[[np.ndarray], tuple] | None = None
        self._op = "leaf"
        self._id = next(_ids)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 Value, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def backward(self) -> None:
        backward(self)

    # -- operator sugar -------------------------------------------------

    def __add__(self, other: "Value") -> "Value":
        return add(self, other)

    def __sub__(self, other: "Value") -> "Value":
        return sub(self, other)

    def __mul__(self, other) -> "Value":
        if isinstance(other, Value):
            return mul(self, other)
        return scalar_mul(self, float(other))

    def __rmul__(self, other) -> "Value":
        return scalar_mul(self, float(other))

    def __neg__(self) -> "Value":
        return scalar_mul(self, -1.0)

    def __matmul__(self, other: "Value") -> "Value":
        return matmul(self, other)

    def relu(self) -> "Value":
        return relu(self)

    def tanh(self) -> "Value":
        return tanh(self)

    def sigmoid(self) -> "Value":
        return sigmoid(self)

    def exp(self) -> "Value":
        return exp(self)

    def log(self) -> "Value":
        return log(self)

    def sum(self) -> "Value":
        return reduce_sum(self)

    def mean(self) -> "Value":
        return reduce_mean(self)

    @property
    def T(self) -> "Value":
        return transpose(self)

    def __repr__(self) -> str:
        return f"<Value {self._op} shape={self.shape} requires_grad={self.requires_grad}>"


def constant(data) -> Value:
    """Wrap an array as a non-trainable graph input."""
    return Value(data, requires_grad=False)


def _result(arr: np.ndarray, parents: Sequence[Value], op: str, vjp) -> Value:
    out = Value.__new__(Value)
    out.data = arr
    out.grad = np.zeros_like(arr)
    out.requires_grad = any(p.requires_grad for p in parents)
    # Non-differentiable subgraphs are pruned at construction time.
    out._parents = tuple(parents) if out.requires_grad else ()
    out._vjp = vjp if out.requires_grad else None
    out._op = op
    out._id = next(_ids)
    return out


def _check_same_shape(op: str, a: Value, b: Value) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: operand shapes differ: {a.shape} vs {b.shape}")


# -- primitive operations ------------------------------------------------


def matmul(a: Value, b: Value) -> Value:
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dimensions differ: {a.shape} @ {b.shape}")

    def vjp(g):
        da = g @ b.data.T if a.requires_grad else None
        db = a.data.T @ g if b.requires_grad else None
        return da, db

    return _result(a.data @ b.data, (a, b), "matmul", vjp)


def add(a: Value, b: Value) -> Value:
    _check_same_shape("add", a, b)

    def vjp(g):
        return g, g

    return _result(a.data + b.data, (a, b), "add", vjp)


def sub(a: Value, b: Value) -> Value:
    _check_same_shape("sub", a, b)

    def vjp(g):
        return g, -g

    return _result(a.data - b.data, (a, b), "sub", vjp)


def mul(a: Value, b: Value) -> Value:
    """Elementwise product."""
    _check_same_shape("elementwise-mul", a, b)

    def vjp(g):
        da = g * b.data if a.requires_grad else None
        db = g * a.data if b.requires_grad else None
        return da, db

    return _result(a.data * b.data, (a, b), "elementwise-mul", vjp)


def scalar_mul(a: Value, scalar: float) -> Value:
    c = float(scalar)

    def vjp(g):
        return (g * c,)

    return _result(a.data * c, (a,), "scalar-mul", vjp)


def relu(a: Value) -> Value:
    out = np.maximum(a.data, 0.0)
    mask = a.data > 0.0

    def vjp(g):
        return (g * mask,)

    return _result(out, (a,), "relu", vjp)


def tanh(a: Value) -> Value:
    t = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - t * t),)

    return _result(t, (a,), "tanh", vjp)


def sigmoid(a: Value) -> Value:
    # tanh form is stable in both tails.
    s = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def vjp(g):
        return (g * s * (1.0 - s),)

    return _result(s, (a,), "sigmoid", vjp)


def exp(a: Value) -> Value:
    e = np.exp(a.data)

    def vjp(g):
        return (g * e,)

    return _result(e, (a,), "exp", vjp)


def log(a: Value) -> Value:
    """Natural log, clamped below at LOG_EPS so log(0) stays finite."""
    clamped = np.maximum(a.data, LOG_EPS)
    mask = a.data > LOG_EPS

    def vjp(g):
        return (g * mask / clamped,)

    return _result(np.log(clamped), (a,), "log", vjp)


def reduce_sum(a: Value) -> Value:
    def vjp(g):
        return (np.full(a.shape, g[0, 0]),)

    return _result(np.array([[a.data.sum()]]), (a,), "sum", vjp)


def reduce_mean(a: Value) -> Value:
    n = a.data.size

    def vjp(g):
        return (np.full(a.shape, g[0, 0] / n),)

    return _result(np.array([[a.data.mean()]]), (a,), "mean", vjp)


def concat_cols(*parts: Value) -> Value:
    """Concatenate along columns; all operands must share the row count."""
    if not parts:
        raise ValueError("concat_cols needs at least one operand")
    rows = parts[0].rows
    for p in parts[1:]:
        if p.rows != rows:
            raise ShapeError(
                f"concat-cols: row counts differ: {parts[0].shape} vs {p.shape}"
            )
    widths = [p.cols for p in parts]
    offsets = np.cumsum([0] + widths)

    def vjp(g):
        return tuple(
            g[:, offsets[k] : offsets[k + 1]] if p.requires_grad else None
            for k, p in enumerate(parts)
        )

    return _result(np.hstack([p.data for p in parts]), parts, "concat-cols", vjp)


def row_select(a: Value, rows: Sequence[int]) -> Value:
    idx = [int(r) for r in rows]
    for r in idx:
        if not 0 <= r < a.rows:
            raise ValueError(f"row-select: index {r} out of range for {a.rows} rows")

    def vjp(g):
        da = np.zeros(a.shape)
        np.add.at(da, idx, g)
        return (da,)

    return _result(a.data[idx], (a,), "row-select", vjp)


def broadcast_add_row(m: Value, row: Value) -> Value:
    """Add a 1 x d row vector to every row of an N x d matrix."""
    if row.rows != 1 or row.cols != m.cols:
        raise ShapeError(
            f"broadcast-add-row: need (N,d) and (1,d), got {m.shape} and {row.shape}"
        )

    def vjp(g):
        dm = g if m.requires_grad else None
        drow = g.sum(axis=0, keepdims=True) if row.requires_grad else None
        return dm, drow

    return _result(m.data + row.data, (m, row), "broadcast-add-row", vjp)


def transpose(a: Value) -> Value:
    def vjp(g):
        return (g.T,)

    return _result(a.data.T.copy(), (a,), "transpose", vjp)


_OP_TABLE: dict[str, Callable[..., Value]] = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "elementwise-mul": mul,
    "relu": relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "exp": exp,
    "log": log,
    "sum": reduce_sum,
    "mean": reduce_mean,
    "concat-cols": concat_cols,
    "row-select": row_select,
    "scalar-mul": scalar_mul,
    "broadcast-add-row": broadcast_add_row,
    "transpose": transpose,
}


def op_kinds() -> tuple[str, ...]:
    return tuple(_OP_TABLE)


def op_forward(kind: str, inputs: Sequence[Value], **attrs) -> Value:
    """Uniform dispatch into the primitive op set, e.g. for generic op tests.

    ``row-select`` takes ``rows=...`` and ``scalar-mul`` takes ``scalar=...``
    as keyword attributes; everything else is positional on ``inputs``.
    """
    if kind not in _OP_TABLE:
        raise ValueError(f"unknown op kind {kind!r}; known: {sorted(_OP_TABLE)}")
    return _OP_TABLE[kind](*inputs, **attrs)


# -- backward pass -------------------------------------------------------


def backward(root: Value) -> None:
    """Accumulate gradients of a scalar root into every reachable Value.

    Repeated calls without zeroing add another full gradient. Within one
    pass, contributions are combined in an order fixed by construction
    ids, so results are deterministic.
    """
    if root.shape != (1, 1):
        raise ValueError(f"backward requires a 1x1 scalar root, got {root.shape}")
    root.grad += 1.0
    if not root.requires_grad:
        return

    # Reachable differentiable subgraph; descending construction id is a
    # valid reverse-topological order because inputs predate outputs.
    seen = {root}
    stack = [root]
    while stack:
        node = stack.pop()
        for p in node._parents:
            if p.requires_grad and p not in seen:
                seen.add(p)
                stack.append(p)

    contrib: dict[Value, np.ndarray] = {root: np.ones((1, 1))}
    for node in sorted(seen, key=lambda v: -v._id):
        g = contrib.pop(node, None)
        if g is None:
            continue
        if node is not root:
            node.grad += g
        if node._vjp is None:
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            held = contrib.get(parent)
            contrib[parent] = pg if held is None else held + pg


# -- parameter store -----------------------------------------------------


class ParamStore:
    """Trainable tensors addressable by stable dotted path names.

    Iteration is always sorted by path, so optimizer updates and
    serialization see parameters in a deterministic order.
    """

    def __init__(self):
        self._values: dict[str, Value] = {}

    def add(self, path: str, data) -> Value:
        if path in self._values:
            raise ValueError(f"duplicate parameter path {path!r}")
        v = Value(data, requires_grad=True)
        self._values[path] = v
        return v

    def __getitem__(self, path: str) -> Value:
        return self._values[path]

    def __contains__(self, path: str) -> bool:
        return path in self._values

    def __len__(self) -> int:
        return len(self._values)

    def paths(self) -> list[str]:
        return sorted(self._values)

    def items(self) -> Iterator[tuple[str, Value]]:
        for path in sorted(self._values):
            yield path, self._values[path]

    def zero_grad(self) -> None:
        for _, v in self.items():
            v.zero_grad()

    def num_entries(self) -> int:
        return sum(v.data.size for v in self._values.values())

    def arrays(self) -> dict[str, np.ndarray]:
        """Copy of every parameter array, keyed by path."""
        return {path: v.data.copy() for path, v in self.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Overwrite parameter data in place; paths and shapes must match."""
        missing = set(self._values) - set(arrays)
        extra = set(arrays) - set(self._values)
        if missing or extra:
            raise ValueError(
                f"parameter path mismatch: missing={sorted(missing)} extra={sorted(extra)}"
            )
        for path, v in self.items():
            arr = np.asarray(arrays[path], dtype=np.float64)
            if arr.shape != v.shape:
                raise ShapeError(
                    f"parameter {path!r}: stored shape {arr.shape} != expected {v.shape}"
                )
            v.data[...] = arr


# -- gradient checking ----------------------------------------------------


def finite_difference_check(
    f: Callable[[ParamStore], Value], params: ParamStore, eps: float = 1e-4
) -> float:
    """Compare analytic gradients of ``f`` against central differences.

    ``f`` must be deterministic (no dropout, no fresh latent noise). Every
    scalar entry of every parameter is perturbed by +/- eps and the central
    difference is compared to the analytic gradient. Returns the maximum
    relative error max(|a - n| / max(|a|, |n|, 1e-8)) over all entries.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError(f"eps must lie in [1e-6, 1e-3], got {eps}")

    params.zero_grad()
    loss = f(params)
    if loss.shape != (1, 1):
        raise ValueError(f"f must return a scalar Value, got shape {loss.shape}")
    backward(loss)
    analytic = {path: v.grad.copy() for path, v in params.items()}

    worst = 0.0
    for path, v in params.items():
        flat = v.data.reshape(-1)
        grad_flat = analytic[path].reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            f_plus = f(params).item()
            flat[i] = saved - eps
            f_minus = f(params).item()
            flat[i] = saved
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError(
                    f"non-finite loss while perturbing parameter {path!r} entry {i}"
                )
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = grad_flat[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
