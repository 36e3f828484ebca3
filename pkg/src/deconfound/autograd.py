"""Minimal reverse-mode automatic differentiation over dense float64 matrices.

Everything is a 2-D matrix: column vectors are (n, 1), scalars are (1, 1).
A fresh Tape is built per mini-batch (define-by-run); persistent parameters
are mounted onto the tape as leaf nodes and collect gradients after a
backward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes do not conform for an op."""


class DivergenceError(FloatingPointError):
    """Raised when a non-finite value stops an optimisation step."""


class SeededRng:
    """Deterministic random stream: identical seed, identical stream.

    Thin wrapper over numpy's PCG64 generator that also supports deriving
    independent child streams from integer keys, so parallel runs stay
    reproducible regardless of scheduling order.
    """

    def __init__(self, seed, _seq=None):
        self.seed = seed
        self._seq = np.random.SeedSequence(seed) if _seq is None else _seq
        self.gen = np.random.Generator(np.random.PCG64(self._seq))

    def child(self, *key):
        """Derive an independent stream keyed by integers (order matters)."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(int(k) for k in key))
        return SeededRng(self.seed, _seq=seq)

    def normal(self, shape):
        return self.gen.standard_normal(shape)

    def uniform(self, low, high, shape):
        return self.gen.uniform(low, high, shape)

    def binomial(self, p):
        return (self.gen.uniform(0.0, 1.0, np.shape(p)) < p).astype(np.float64)

    def permutation(self, n):
        return self.gen.permutation(n)


def glorot_uniform_init(shape, rng):
    """Glorot-uniform weight matrix: entries in +-sqrt(6 / (fan_in + fan_out))."""
    rows, cols = shape
    if rows < 1 or cols < 1:
        raise ShapeError(f"glorot_uniform_init: non-positive dims {shape}")
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, (rows, cols))


class ParamTensor:
    """A trainable matrix with its gradient buffer."""

    __slots__ = ("name", "values", "grad", "requires_grad")

    def __init__(self, values, name="param", requires_grad=True):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError(f"ParamTensor {name}: expected 2-D values, got shape {self.values.shape}")
        self.grad = np.zeros_like(self.values)
        self.name = name
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad[...] = 0.0


class Node:
    """One recorded value on the tape."""

    __slots__ = ("value", "parents", "backward_rule", "requires_grad", "grad", "tape")

    def __init__(self, value, parents, backward_rule, requires_grad, tape):
        self.value = value
        self.parents = parents
        self.backward_rule = backward_rule
        self.requires_grad = requires_grad
        self.grad = None
        self.tape = tape

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, g):
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    # Small operator sugar; other is a Node or a python float.
    def __add__(self, other):
        return add(self, other) if isinstance(other, Node) else shift(self, float(other))

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Node) else shift(self, -float(other))

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Node) else scale(self, float(other))

    __rmul__ = __mul__


class Tape:
    """Ordered record of operations; creation order is a topological order."""

    def __init__(self):
        self.nodes = []
        self._leaves = {}

    def record(self, value, parents=(), backward_rule=None, requires_grad=None):
        # ops guarantee 2-D float64 values; only constant() coerces
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in parents)
        node = Node(value, tuple(parents), backward_rule, requires_grad, self)
        self.nodes.append(node)
        return node

    def constant(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 0:
            values = values.reshape(1, 1)
        elif values.ndim == 1:
            values = values.reshape(-1, 1)
        elif values.ndim != 2:
            raise ShapeError(f"tape values must be 2-D, got shape {values.shape}")
        return self.record(values, requires_grad=False)

    def leaf(self, param):
        """Mount a ParamTensor; repeated mounts return the same node so its
        gradient contributions accumulate."""
        entry = self._leaves.get(id(param))
        if entry is None:
            node = self.record(param.values, requires_grad=param.requires_grad)
            self._leaves[id(param)] = (node, param)
            return node
        return entry[0]

    def backward(self, root):
        """Accumulate d(root)/d(param) into every mounted ParamTensor.

        Parameters not reachable from `root` receive a zero gradient.
        """
        if root.tape is not self:
            raise ValueError("backward: root node belongs to a different tape")
        if root.shape != (1, 1):
            raise ShapeError(f"backward: root must be scalar (1, 1), got {root.shape}")
        root.grad = np.ones((1, 1))
        for node in reversed(self.nodes):
            if node.grad is None or node.backward_rule is None or not node.requires_grad:
                continue
            node.backward_rule(node.grad)
        for node, param in self._leaves.values():
            if param.requires_grad:
                param.grad = node.grad.copy() if node.grad is not None else np.zeros_like(param.values)


def _same_tape(*nodes):
    tape = nodes[0].tape
    for n in nodes[1:]:
        if n.tape is not tape:
            raise ValueError("operands recorded on different tapes")
    return tape


def _fit_grad(g, shape):
    # Reduce an output-shaped gradient back to a (1, 1) broadcast operand.
    if g.shape == shape:
        return g
    return g.sum().reshape(1, 1)


def _binary(opname, a, b, fwd, da, db):
    tape = _same_tape(a, b)
    if a.shape != b.shape and a.shape != (1, 1) and b.shape != (1, 1):
        raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} do not conform")
    value = fwd(a.value, b.value)

    def rule(g):
        if a.requires_grad:
            a.accumulate(_fit_grad(da(g, a.value, b.value), a.shape))
        if b.requires_grad:
            b.accumulate(_fit_grad(db(g, a.value, b.value), b.shape))

    return tape.record(value, (a, b), rule)


def add(a, b):
    return _binary("add", a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    return _binary("sub", a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    return _binary("mul", a, b, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x)


def divide(a, b):
    return _binary("divide", a, b, lambda x, y: x / y,
                   lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y))


def matmul(a, b):
    tape = _same_tape(a, b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    value = a.value @ b.value

    def rule(g):
        if a.requires_grad:
            a.accumulate(g @ b.value.T)
        if b.requires_grad:
            b.accumulate(a.value.T @ g)

    return tape.record(value, (a, b), rule)


def add_bias(x, b):
    """Row-broadcast bias add: x is (r, c), b is (1, c)."""
    tape = _same_tape(x, b)
    if b.shape != (1, x.shape[1]):
        raise ShapeError(f"add_bias: bias {b.shape} does not match input {x.shape}")
    value = x.value + b.value

    def rule(g):
        if x.requires_grad:
            x.accumulate(g)
        if b.requires_grad:
            b.accumulate(g.sum(axis=0, keepdims=True))

    return tape.record(value, (x, b), rule)


def _unary(a, value, dfn):
    def rule(g):
        if a.requires_grad:
            a.accumulate(dfn(g))

    return a.tape.record(value, (a,), rule)


def square(a):
    return _unary(a, a.value * a.value, lambda g: g * (2.0 * a.value))


def absolute(a):
    return _unary(a, np.abs(a.value), lambda g: g * np.sign(a.value))


def elu(a):
    pos = a.value > 0.0
    value = np.where(pos, a.value, np.expm1(a.value))
    return _unary(a, value, lambda g: g * np.where(pos, 1.0, value + 1.0))


def sigmoid(a):
    value = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return _unary(a, value, lambda g: g * value * (1.0 - value))


def logn(a):
    return _unary(a, np.log(a.value), lambda g: g / a.value)


def clip(a, lo, hi):
    inside = (a.value >= lo) & (a.value <= hi)
    return _unary(a, np.clip(a.value, lo, hi), lambda g: g * inside)


def scale(a, c):
    c = float(c)
    return _unary(a, a.value * c, lambda g: g * c)


def shift(a, c):
    c = float(c)
    return _unary(a, a.value + c, lambda g: g)


def reduce_mean(a, axis=None):
    if axis is None:
        n = a.value.size
        value = np.array([[a.value.mean()]])
        return _unary(a, value, lambda g: np.full(a.shape, g[0, 0] / n))
    n = a.shape[axis]
    value = a.value.mean(axis=axis, keepdims=True)
    return _unary(a, value, lambda g: np.broadcast_to(g / n, a.shape).copy())


def reduce_sum(a, axis=None):
    if axis is None:
        value = np.array([[a.value.sum()]])
        return _unary(a, value, lambda g: np.full(a.shape, g[0, 0]))
    value = a.value.sum(axis=axis, keepdims=True)
    return _unary(a, value, lambda g: np.broadcast_to(g, a.shape).copy())


def concat_cols(nodes):
    tape = _same_tape(*nodes)
    rows = nodes[0].shape[0]
    for n in nodes:
        if n.shape[0] != rows:
            raise ShapeError(f"concat: row counts differ, {[n.shape for n in nodes]}")
    value = np.concatenate([n.value for n in nodes], axis=1)
    offsets = np.cumsum([0] + [n.shape[1] for n in nodes])

    def rule(g):
        for node, lo, hi in zip(nodes, offsets[:-1], offsets[1:]):
            if node.requires_grad:
                node.accumulate(g[:, lo:hi])

    return tape.record(value, tuple(nodes), rule)


def slice_cols(a, start, stop):
    if not (0 <= start < stop <= a.shape[1]):
        raise ShapeError(f"slice_cols: [{start}:{stop}] out of range for {a.shape}")
    value = a.value[:, start:stop].copy()

    def dfn(g):
        full = np.zeros(a.shape)
        full[:, start:stop] = g
        return full

    return _unary(a, value, dfn)


def gather_rows(a, idx):
    idx = np.asarray(idx, dtype=np.intp)
    value = a.value[idx]

    def dfn(g):
        full = np.zeros(a.shape)
        np.add.at(full, idx, g)
        return full

    return _unary(a, value, dfn)


def grad_reverse(a, lam):
    """Identity forward; backward passes -lam * upstream to the parent."""
    lam = float(lam)
    if lam < 0.0:
        raise ValueError(f"grad_reverse: lambda must be >= 0, got {lam}")
    return _unary(a, a.value.copy(), lambda g: g * (-lam))


def sum_sq(nodes):
    """Fused sum of squared entries over several nodes (one tape record)."""
    tape = _same_tape(*nodes)
    value = 0.0
    for n in nodes:
        flat = n.value.ravel()
        value += float(np.dot(flat, flat))

    def rule(g):
        s = 2.0 * g[0, 0]
        for n in nodes:
            if n.requires_grad:
                n.accumulate(s * n.value)

    return tape.record(np.array([[value]]), tuple(nodes), rule)


@dataclass
class AdamState:
    """Adam moments for one parameter (beta1=0.9, beta2=0.999, eps=1e-8)."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param):
        return cls(m=np.zeros_like(param.values), v=np.zeros_like(param.values))


def adam_step(param, state, lr):
    """One in-place Adam update with bias correction.

    A non-finite gradient aborts the step before any mutation.
    """
    if lr <= 0.0:
        raise ValueError(f"adam_step: lr must be > 0, got {lr}")
    g = param.grad
    if g.shape != param.values.shape:
        raise ShapeError(f"adam_step: grad {g.shape} does not match param {param.values.shape}")
    if not math.isfinite(float(g.sum())):
        raise DivergenceError(f"adam_step: non-finite gradient for {param.name}")
    state.t += 1
    m, v = state.m, state.v
    m *= state.beta1
    m += (1.0 - state.beta1) * g
    v *= state.beta2
    v += (1.0 - state.beta2) * (g * g)
    # update = lr * m_hat / (sqrt(v_hat) + eps), computed in one scratch array
    c1 = 1.0 - state.beta1 ** state.t
    c2 = math.sqrt(1.0 - state.beta2 ** state.t)
    scratch = np.sqrt(v)
    scratch /= c2
    scratch += state.eps
    np.divide(m, scratch, out=scratch)
    scratch *= lr / c1
    param.values -= scratch


class Adam:
    """Per-parameter Adam states over a fixed parameter list."""

    def __init__(self, params, lr):
        self.params = list(params)
        self.lr = lr
        self.states = [AdamState.for_param(p) for p in self.params]

    def step(self):
        for p, s in zip(self.params, self.states):
            if p.requires_grad:
                adam_step(p, s, self.lr)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()
