"""
Tensor Autodiff Module

This module defines the Tensor class, a dense float64 array that records the
operations applied to it so gradients can be computed in reverse mode. It
provides every differentiable operation the encoder and the statement
classifiers need (matrix products, softmax, layer norm, masked pooling,
cross-entropy), the AdamW optimizer, a finite-difference gradient checker and
the checkpoint container used to store named tensors on disk.

date: 10/18/2026
"""

import contextlib
import io
import json
import logging
import threading
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from errors import CheckpointError, NumericError, ShapeError, TrainingError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'vulnloc-tensors'
CHECKPOINT_VERSION = 1
PROB_EPS = 1e-12

_grad_state = threading.local()


def is_grad_enabled() -> bool:
    """Whether operations in the calling thread record the graph."""
    return getattr(_grad_state, 'enabled', True)


@contextlib.contextmanager
def no_grad():
    """
    Disable graph construction inside the block, for the calling thread only.

    Operations still compute values, but results never require gradients.

    Returns:
        Iterator[None]
    """
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


def _check_finite(values: np.ndarray, where: str):
    if not np.all(np.isfinite(values)):
        raise NumericError(f'non-finite value produced by {where}')


class Tensor:
    """
    Dense real-valued tensor with an optional gradient accumulator.

    Values are stored row-major as float64 and are read-only once the tensor
    is built; only `grad` changes, and only while a backward pass runs.

    Attributes:
        data (np.ndarray): The values, read-only.
        requires_grad (bool): Whether gradients flow into this tensor.
        grad (np.ndarray | None): Same-shape accumulator, present iff requires_grad.
        op (str): Name of the operation that produced the tensor ('leaf' for inputs).
    """

    def __init__(self, data, requires_grad: bool = False, op: str = 'leaf'):
        """
        Build a tensor from anything numpy can turn into a float64 array.

        Args:
            data (array-like): Initial values; copied.
            requires_grad (bool): Track gradients for this tensor.
            op (str): Producing operation name.

        Returns:
            None
        """
        values = np.array(data, dtype=np.float64)
        if values.size == 0:
            raise ShapeError('tensor extents must be positive')
        _check_finite(values, op)
        values.setflags(write=False)
        self.data = values
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(values) if requires_grad else None
        self.op = op
        self._parents: tuple['Tensor', ...] = ()
        self._backward: Callable[[], None] = lambda: None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        """Return the single value of a one-element tensor."""
        if self.data.size != 1:
            raise ShapeError(f'item() needs one element, tensor has shape {self.shape}')
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Return a writable copy of the values."""
        return self.data.copy()

    def assign(self, values):
        """
        Replace the values in place of an optimizer or gradient-check update.

        Args:
            values (array-like): New values with the same shape.

        Returns:
            None
        """
        values = np.array(values, dtype=np.float64)
        if values.shape != self.data.shape:
            raise ShapeError(f'cannot assign shape {values.shape} to tensor of shape {self.shape}')
        _check_finite(values, 'assign')
        values.setflags(write=False)
        self.data = values

    def zero_grad(self):
        """Reset the gradient accumulator to zeros."""
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def backward(self, grad=None):
        """
        Run reverse-mode differentiation from this tensor.

        Gradients are added into every tensor of the graph; leaves keep
        accumulating across calls until `zero_grad` is called.

        Args:
            grad (array-like | None): Seed gradient; defaults to 1 for one-element tensors.

        Returns:
            None
        """
        if not self.requires_grad:
            raise TrainingError('backward() called on a tensor that does not require grad')
        if grad is None:
            if self.size != 1:
                raise ShapeError('backward() without a seed needs a one-element tensor')
            grad = np.ones_like(self.data)
        graph = Graph(self)
        self.grad = self.grad + np.asarray(grad, dtype=np.float64)
        for node in reversed(graph.order):
            node._backward()
        for node in graph.order:
            if node.grad is not None:
                _check_finite(node.grad, f'backward of {node.op}')

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f'Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})'


ModelParams = dict[str, Tensor]


class Graph:
    """
    The operation graph reachable from a root tensor.

    Attributes:
        root (Tensor): Tensor the traversal started from.
        order (list[Tensor]): Nodes in topological order, parents first, each once.
    """

    def __init__(self, root: Tensor):
        self.root = root
        self.order = self._topological_order(root)

    @property
    def nodes(self) -> list[Tensor]:
        return list(self.order)

    @staticmethod
    def _topological_order(root: Tensor) -> list[Tensor]:
        order = []
        visited = set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(values: np.ndarray, parents: Iterable[Tensor], op: str) -> Tensor:
    parents = tuple(parents)
    needs_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
    out = Tensor(values, requires_grad=needs_grad, op=op)
    if needs_grad:
        out._parents = parents
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _require_2d(x: Tensor, op: str):
    if x.ndim != 2:
        raise ShapeError(f'{op} needs a 2-d tensor, got shape {x.shape}')


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product of an m x k and a k x n tensor.

    Args:
        a (Tensor): Left operand, m x k.
        b (Tensor): Right operand, k x n.

    Returns:
        Tensor: m x n product.
    """
    _require_2d(a, 'matmul')
    _require_2d(b, 'matmul')
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f'matmul inner extents differ: {a.shape} x {b.shape}')
    out = _make(a.data @ b.data, (a, b), 'matmul')

    def _backward():
        if a.requires_grad:
            a.grad += out.grad @ b.data.T
        if b.requires_grad:
            b.grad += a.data.T @ out.grad

    out._backward = _backward
    return out


def transpose(x: Tensor) -> Tensor:
    _require_2d(x, 'transpose')
    out = _make(x.data.T, (x,), 'transpose')

    def _backward():
        x.grad += out.grad.T

    out._backward = _backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """
    Elementwise sum; a bias vector broadcasts over the rows of a matrix.

    Args:
        a (Tensor): First operand.
        b (Tensor): Second operand, same shape or broadcastable.

    Returns:
        Tensor: a + b.
    """
    try:
        values = a.data + b.data
    except ValueError as e:
        raise ShapeError(f'add cannot broadcast {a.shape} and {b.shape}') from e
    out = _make(values, (a, b), 'add')

    def _backward():
        if a.requires_grad:
            a.grad += _unbroadcast(out.grad, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(out.grad, b.shape)

    out._backward = _backward
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    try:
        values = a.data - b.data
    except ValueError as e:
        raise ShapeError(f'sub cannot broadcast {a.shape} and {b.shape}') from e
    out = _make(values, (a, b), 'sub')

    def _backward():
        if a.requires_grad:
            a.grad += _unbroadcast(out.grad, a.shape)
        if b.requires_grad:
            b.grad -= _unbroadcast(out.grad, b.shape)

    out._backward = _backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with the same broadcasting rule as `add`."""
    try:
        values = a.data * b.data
    except ValueError as e:
        raise ShapeError(f'mul cannot broadcast {a.shape} and {b.shape}') from e
    out = _make(values, (a, b), 'mul')

    def _backward():
        if a.requires_grad:
            a.grad += _unbroadcast(out.grad * b.data, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(out.grad * a.data, b.shape)

    out._backward = _backward
    return out


def scale(x: Tensor, factor: float) -> Tensor:
    """
    Multiply every value by a constant.

    Args:
        x (Tensor): Input.
        factor (float): Constant multiplier.

    Returns:
        Tensor: factor * x.
    """
    out = _make(x.data * factor, (x,), 'scale')

    def _backward():
        x.grad += out.grad * factor

    out._backward = _backward
    return out


def relu(x: Tensor) -> Tensor:
    out = _make(np.maximum(x.data, 0.0), (x,), 'relu')

    def _backward():
        x.grad += out.grad * (x.data > 0.0)

    out._backward = _backward
    return out


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """
    Elementwise maximum of two same-shape tensors.

    Where the values tie the gradient goes to `a`.

    Args:
        a (Tensor): First operand.
        b (Tensor): Second operand.

    Returns:
        Tensor: max(a, b).
    """
    if a.shape != b.shape:
        raise ShapeError(f'maximum needs equal shapes, got {a.shape} and {b.shape}')
    pick_a = a.data >= b.data
    out = _make(np.where(pick_a, a.data, b.data), (a, b), 'maximum')

    def _backward():
        if a.requires_grad:
            a.grad += out.grad * pick_a
        if b.requires_grad:
            b.grad += out.grad * ~pick_a

    out._backward = _backward
    return out


def softmax(x: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """
    Numerically stable softmax along one axis.

    Masked-out positions are treated as -inf logits and get probability 0.
    A slice whose every position is masked out is an error.

    Args:
        x (Tensor): Logits.
        axis (int): Axis that sums to one.
        mask (np.ndarray | None): Boolean array broadcastable to x; True keeps a position.

    Returns:
        Tensor: Probabilities with the shape of x.
    """
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f'softmax axis {axis} invalid for shape {x.shape}')
    logits = x.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not np.all(mask.any(axis=axis)):
            raise NumericError('softmax over a fully masked row')
        logits = np.where(mask, logits, -np.inf)
    shifted = logits - logits.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=axis, keepdims=True)
    out = _make(probs, (x,), 'softmax')

    def _backward():
        g = out.grad
        x.grad += probs * (g - (g * probs).sum(axis=axis, keepdims=True))

    out._backward = _backward
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """
    Normalize the last axis to zero mean and unit variance, then scale and shift.

    Args:
        x (Tensor): Input, ... x d.
        gamma (Tensor): Scale, d.
        beta (Tensor): Shift, d.
        eps (float): Variance floor.

    Returns:
        Tensor: gamma * (x - mean) / sqrt(var + eps) + beta.
    """
    width = x.shape[-1]
    if gamma.shape != (width,) or beta.shape != (width,):
        raise ShapeError(f'layer_norm parameters must have shape ({width},)')
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std
    out = _make(normed * gamma.data + beta.data, (x, gamma, beta), 'layer_norm')

    def _backward():
        g = out.grad
        lead = tuple(range(g.ndim - 1))
        if gamma.requires_grad:
            gamma.grad += (g * normed).sum(axis=lead)
        if beta.requires_grad:
            beta.grad += g.sum(axis=lead)
        if x.requires_grad:
            d_normed = g * gamma.data
            x.grad += inv_std / width * (
                width * d_normed
                - d_normed.sum(axis=-1, keepdims=True)
                - normed * (d_normed * normed).sum(axis=-1, keepdims=True)
            )

    out._backward = _backward
    return out


def gather_rows(x: Tensor, index) -> Tensor:
    """
    Select rows (or elements of a vector) by integer index; repeats allowed.

    Args:
        x (Tensor): Source tensor.
        index (array-like of int): Row indices.

    Returns:
        Tensor: x[index].
    """
    index = np.asarray(index, dtype=np.int64)
    if index.ndim != 1 or index.size == 0:
        raise ShapeError('gather_rows needs a non-empty 1-d index')
    if index.min() < 0 or index.max() >= x.shape[0]:
        raise ShapeError(f'row index out of range for {x.shape[0]} rows')
    out = _make(x.data[index], (x,), 'gather_rows')

    def _backward():
        np.add.at(x.grad, index, out.grad)

    out._backward = _backward
    return out


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """
    Look up one embedding row per id.

    Args:
        table (Tensor): vocab x d embedding table.
        ids (array-like of int): Token ids.

    Returns:
        Tensor: len(ids) x d embeddings.
    """
    _require_2d(table, 'embedding_lookup')
    return gather_rows(table, ids)


def columns(x: Tensor, start: int, stop: int) -> Tensor:
    """Slice columns [start, stop) of a 2-d tensor."""
    _require_2d(x, 'columns')
    if not 0 <= start < stop <= x.shape[1]:
        raise ShapeError(f'column slice [{start}, {stop}) invalid for shape {x.shape}')
    out = _make(x.data[:, start:stop], (x,), 'columns')

    def _backward():
        x.grad[:, start:stop] += out.grad

    out._backward = _backward
    return out


def select_column(x: Tensor, column: int) -> Tensor:
    """Return column `column` of a 2-d tensor as a vector."""
    _require_2d(x, 'select_column')
    out = _make(x.data[:, column], (x,), 'select_column')

    def _backward():
        x.grad[:, column] += out.grad

    out._backward = _backward
    return out


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    """
    Join 2-d tensors along an axis.

    Args:
        tensors (list[Tensor]): Parts, equal extents off the join axis.
        axis (int): 0 for rows, 1 for columns.

    Returns:
        Tensor: The joined tensor.
    """
    for t in tensors:
        _require_2d(t, 'concat')
    try:
        values = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f'concat shapes disagree: {[t.shape for t in tensors]}') from e
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])
    out = _make(values, tensors, 'concat')

    def _backward():
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                t.grad += out.grad[:, lo:hi] if axis == 1 else out.grad[lo:hi]

    out._backward = _backward
    return out


def _segment_rows(segment_ids, count: int, rows: int) -> np.ndarray:
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if segment_ids.shape != (rows,):
        raise ShapeError(f'need one segment id per row ({rows}), got {segment_ids.shape}')
    if rows and (segment_ids.min() < 0 or segment_ids.max() >= count):
        raise ShapeError(f'segment ids must lie in [0, {count})')
    return segment_ids


def segment_max(x: Tensor, segment_ids, count: int) -> Tensor:
    """
    Coordinate-wise maximum over the rows of each segment.

    Non-member rows are excluded outright, so a segment of all-negative rows
    keeps its negative maximum. Ties send the gradient to the lowest row.

    Args:
        x (Tensor): n x d rows.
        segment_ids (array-like of int): Segment of each row, values in [0, count).
        count (int): Number of segments; every one must have at least one row.

    Returns:
        Tensor: count x d maxima.
    """
    _require_2d(x, 'segment_max')
    segment_ids = _segment_rows(segment_ids, count, x.shape[0])
    winners = np.empty((count, x.shape[1]), dtype=np.int64)
    for segment in range(count):
        members = np.flatnonzero(segment_ids == segment)
        if members.size == 0:
            raise ShapeError(f'segment {segment} has no rows')
        winners[segment] = members[np.argmax(x.data[members], axis=0)]
    cols = np.arange(x.shape[1])
    out = _make(x.data[winners, cols], (x,), 'segment_max')

    def _backward():
        np.add.at(x.grad, (winners, np.broadcast_to(cols, winners.shape)), out.grad)

    out._backward = _backward
    return out


def segment_mean(x: Tensor, segment_ids, count: int) -> Tensor:
    """
    Arithmetic mean over the rows of each segment.

    Args:
        x (Tensor): n x d rows.
        segment_ids (array-like of int): Segment of each row, values in [0, count).
        count (int): Number of segments; every one must have at least one row.

    Returns:
        Tensor: count x d means.
    """
    _require_2d(x, 'segment_mean')
    segment_ids = _segment_rows(segment_ids, count, x.shape[0])
    membership = np.zeros((x.shape[0], count))
    membership[np.arange(x.shape[0]), segment_ids] = 1.0
    sizes = membership.sum(axis=0)
    if np.any(sizes == 0):
        raise ShapeError(f'segment {int(np.argmin(sizes))} has no rows')
    out = _make(membership.T @ x.data / sizes[:, None], (x,), 'segment_mean')

    def _backward():
        x.grad += membership @ (out.grad / sizes[:, None])

    out._backward = _backward
    return out


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    """
    Inverted dropout; identity when rate is 0 or no generator is given.

    Args:
        x (Tensor): Input.
        rate (float): Drop probability in [0, 1).
        rng (np.random.Generator | None): Source of the mask.

    Returns:
        Tensor: Masked and rescaled input.
    """
    if rate == 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    out = _make(x.data * keep, (x,), 'dropout')

    def _backward():
        x.grad += out.grad * keep

    out._backward = _backward
    return out


def sum_all(x: Tensor) -> Tensor:
    out = _make(x.data.sum(), (x,), 'sum_all')

    def _backward():
        x.grad += out.grad

    out._backward = _backward
    return out


def mean_all(x: Tensor) -> Tensor:
    return scale(sum_all(x), 1.0 / x.size)


def cross_entropy(p: Tensor, y) -> Tensor:
    """
    Mean binary cross-entropy of probabilities against 0/1 targets.

    Probabilities are clamped to [1e-12, 1 - 1e-12] before the log; the
    gradient is evaluated at the clamped value.

    Args:
        p (Tensor): Probabilities of the positive class.
        y (array-like): Targets in {0, 1}, broadcastable to p.

    Returns:
        Tensor: Scalar loss.
    """
    y = np.broadcast_to(np.asarray(y, dtype=np.float64), p.shape)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise NumericError('cross_entropy targets must be 0 or 1')
    if np.any(p.data < -PROB_EPS) or np.any(p.data > 1.0 + PROB_EPS):
        raise NumericError('cross_entropy probabilities must lie in [0, 1]')
    clamped = np.clip(p.data, PROB_EPS, 1.0 - PROB_EPS)
    losses = -(y * np.log(clamped) + (1.0 - y) * np.log(1.0 - clamped))
    out = _make(losses.mean(), (p,), 'cross_entropy')

    def _backward():
        p.grad += out.grad * (-(y / clamped) + (1.0 - y) / (1.0 - clamped)) / p.size

    out._backward = _backward
    return out


@dataclass
class AdamWState:
    """
    Running optimizer state.

    Attributes:
        first_moment (dict[str, np.ndarray]): Exponential average of gradients.
        second_moment (dict[str, np.ndarray]): Exponential average of squared gradients.
        step (int): Number of updates applied so far.
    """
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adamw_step(params: ModelParams, grads: Mapping[str, np.ndarray], state: AdamWState,
               lr: float, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
               weight_decay: float = 0.0) -> ModelParams:
    """
    Apply one AdamW update with decoupled weight decay.

    Weight decay applies to matrices only; vectors (biases, norm scales) are
    never decayed.

    Args:
        params (ModelParams): Trainable tensors by name; updated in place.
        grads (Mapping[str, np.ndarray]): One gradient per parameter name.
        state (AdamWState): Moments and step count, carried between calls.
        lr (float): Learning rate.
        betas (tuple[float, float]): Moment decay rates.
        eps (float): Denominator floor.
        weight_decay (float): Decoupled decay coefficient.

    Returns:
        ModelParams: The same mapping, holding the updated values.
    """
    missing = [name for name in params if name not in grads or grads[name] is None]
    if missing:
        raise TrainingError(f'no gradient for parameter(s): {", ".join(missing)}')
    beta1, beta2 = betas
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for name, param in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        m = state.first_moment.get(name, np.zeros_like(param.data))
        v = state.second_moment.get(name, np.zeros_like(param.data))
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v
        values = param.data
        if weight_decay and param.ndim >= 2:
            values = values - lr * weight_decay * values
        values = values - lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        param.assign(values)
    return params


class AdamW:
    """
    AdamW optimizer bound to a set of parameters.

    Attributes:
        params (ModelParams): Tensors being optimized.
        lr (float): Learning rate.
        betas (tuple[float, float]): Moment decay rates.
        eps (float): Denominator floor.
        weight_decay (float): Decoupled decay coefficient.
        state (AdamWState): Moments and step count.
    """

    def __init__(self, params: ModelParams, lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.01):
        self.params = params
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = AdamWState()

    def zero_grad(self):
        for param in self.params.values():
            param.zero_grad()

    def step(self):
        """
        Update every parameter from its accumulated gradient.

        Returns:
            None
        """
        grads = {name: param.grad for name, param in self.params.items()}
        adamw_step(self.params, grads, self.state, self.lr, self.betas, self.eps, self.weight_decay)


def gradient_check(fn: Callable[[], Tensor], tensors: list[Tensor], eps: float = 1e-5) -> float:
    """
    Compare analytic gradients with central finite differences.

    Args:
        fn (Callable[[], Tensor]): Builds a one-element tensor from `tensors`.
        tensors (list[Tensor]): Leaves to check; must require grad.
        eps (float): Finite-difference step.

    Returns:
        float: Worst relative error, max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-8).
    """
    for t in tensors:
        t.zero_grad()
    fn().backward()
    analytic = [t.grad.copy() for t in tensors]
    worst = 0.0
    for t, grad in zip(tensors, analytic):
        base = t.data.copy()
        numeric = np.zeros_like(base)
        for index in np.ndindex(base.shape):
            shifted = base.copy()
            shifted[index] = base[index] + eps
            t.assign(shifted)
            with no_grad():
                upper = fn().item()
            shifted[index] = base[index] - eps
            t.assign(shifted)
            with no_grad():
                lower = fn().item()
            numeric[index] = (upper - lower) / (2.0 * eps)
        t.assign(base)
        denom = max(np.abs(grad).max(), np.abs(numeric).max(), 1e-8)
        worst = max(worst, float(np.abs(grad - numeric).max() / denom))
    return worst


def save_tensors(path: Path, tensors: Mapping[str, Tensor | np.ndarray], meta: dict | None = None):
    """
    Write named tensors to a checkpoint container.

    The container is a zip archive with a `__meta__.json` entry followed by one
    `<name>.npy` entry per tensor in name order. Every entry carries a fixed
    timestamp, so the same tensors always produce the same bytes.

    Args:
        path (Path): Destination file.
        tensors (Mapping[str, Tensor | np.ndarray]): Values by name.
        meta (dict | None): Extra JSON-serializable metadata.

    Returns:
        None
    """
    header = {'format': CHECKPOINT_FORMAT, 'version': CHECKPOINT_VERSION, 'meta': meta or {}}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, 'w', compression=zipfile.ZIP_STORED) as archive:
        _write_entry(archive, '__meta__.json', json.dumps(header, indent=2, sort_keys=True).encode())
        for name in sorted(tensors):
            values = tensors[name]
            values = values.data if isinstance(values, Tensor) else np.asarray(values, dtype=np.float64)
            buffer = io.BytesIO()
            np.lib.format.write_array(buffer, np.ascontiguousarray(values, dtype=np.float64),
                                      version=(1, 0), allow_pickle=False)
            _write_entry(archive, f'{name}.npy', buffer.getvalue())
    logger.debug('wrote %d tensors to %s', len(tensors), path)


def _write_entry(archive: zipfile.ZipFile, name: str, payload: bytes):
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    info.external_attr = 0o644 << 16
    archive.writestr(info, payload)


def load_tensors(path: Path) -> tuple[dict[str, np.ndarray], dict]:
    """
    Read a checkpoint container written by `save_tensors`.

    Args:
        path (Path): Checkpoint file.

    Returns:
        tuple[dict[str, np.ndarray], dict]: Arrays by name, and the user metadata.
    """
    try:
        with zipfile.ZipFile(path) as archive:
            header = json.loads(archive.read('__meta__.json'))
            if header.get('format') != CHECKPOINT_FORMAT:
                raise CheckpointError(f'{path} is not a tensor checkpoint')
            if header.get('version') != CHECKPOINT_VERSION:
                raise CheckpointError(f'unsupported checkpoint version {header.get("version")}')
            arrays = {}
            for entry in archive.namelist():
                if entry.endswith('.npy'):
                    with archive.open(entry) as handle:
                        arrays[entry[:-4]] = np.lib.format.read_array(handle, allow_pickle=False)
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as e:
        raise CheckpointError(f'cannot read checkpoint {path}: {e}') from e
    return arrays, header['meta']
