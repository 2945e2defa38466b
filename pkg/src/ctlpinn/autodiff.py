"""Jet arithmetic and reverse-mode parameter gradients.

Two layers live here:

* **Kernels** (`kmul`, `kunary`, `klinear`) operate on raw coefficient
  arrays whose trailing axis enumerates the multi-indices of a
  :class:`~ctlpinn.multiindex.JetSpace`.  A jet stores the plain partial
  derivatives of a scalar field with respect to the network *inputs*, up
  to a fixed order; elementary operations propagate them exactly
  (Leibniz rule for products, truncated Taylor composition for nonlinear
  functions).  Kernels are batched: arrays of shape ``(..., C)`` carry
  one jet per leading position.

* **AdjointRecorder** is an append-only tape of kernel applications.
  Replaying it reproduces the forward values bitwise; sweeping it in
  reverse accumulates sensitivities of a recorded scalar with respect
  to every parameter leaf, including parameters that reach the scalar
  only through derivative coefficients (reverse over forward).

Input derivatives are exact to the stored order; they are cheap because
the problems here have at most four inputs.  Parameter gradients go
through the reverse sweep because parameters number in the thousands.

Reductions are kept in fixed index order everywhere (sequential loops or
``np.add.reduceat`` over precomputed tables), so evaluation is bitwise
deterministic and independent of batch size.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from ._kernels import linear_backward, linear_forward, table_product, unary_compose
from .errors import ConfigurationError, NumericError
from .multiindex import MAX_ORDER, JetSpace, coeff_count, index_of

# ---------------------------------------------------------------------------
# Taylor coefficient series of the elementary nonlinear functions.
# _series(op, v, n) returns an array of shape (n+1,) + v.shape whose k-th
# entry is f^(k)(v) / k!.


def _poly_family(base: list[float], rule: list[float], count: int) -> list[np.ndarray]:
    """Derivative polynomials P_k with P_{k+1} = P_k' * rule, as coeff arrays."""
    polys = [np.array(base, dtype=np.float64)]
    rule_arr = np.array(rule, dtype=np.float64)
    for _ in range(count):
        d = np.polynomial.polynomial.polyder(polys[-1])
        polys.append(np.polynomial.polynomial.polymul(d, rule_arr))
    return polys


# tanh' = 1 - tanh^2 and sigmoid' = sigmoid - sigmoid^2, so every higher
# derivative is a polynomial in the function value itself.
_TANH_POLYS = _poly_family([0.0, 1.0], [1.0, 0.0, -1.0], MAX_ORDER + 2)
_SIGMOID_POLYS = _poly_family([0.0, 1.0], [0.0, 1.0, -1.0], MAX_ORDER + 2)


def _polyval(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for c in coeffs[::-1]:
        out = out * x + c
    return out


def _series(op: str, v: np.ndarray, n: int, aux=None) -> np.ndarray:
    """Normalized Taylor coefficients f^(k)(v)/k! for k = 0..n."""
    out = np.empty((n + 1,) + v.shape, dtype=np.float64)
    if op == "exp":
        e = np.exp(v)
        for k in range(n + 1):
            out[k] = e / factorial(k)
    elif op == "sin":
        s, c = np.sin(v), np.cos(v)
        cycle = (s, c, -s, -c)
        for k in range(n + 1):
            out[k] = cycle[k % 4] / factorial(k)
    elif op == "cos":
        s, c = np.sin(v), np.cos(v)
        cycle = (c, -s, -c, s)
        for k in range(n + 1):
            out[k] = cycle[k % 4] / factorial(k)
    elif op == "tanh":
        t = np.tanh(v)
        for k in range(n + 1):
            out[k] = _polyval(_TANH_POLYS[k], t) / factorial(k)
    elif op == "sigmoid":
        s = 1.0 / (1.0 + np.exp(-v))
        for k in range(n + 1):
            out[k] = _polyval(_SIGMOID_POLYS[k], s) / factorial(k)
    elif op == "recip":
        if np.any(v == 0.0):
            raise NumericError("division by a jet with zero value")
        inv = 1.0 / v
        acc = inv.copy()
        for k in range(n + 1):
            out[k] = acc
            acc = -acc * inv
    elif op == "log":
        if np.any(v <= 0.0):
            raise NumericError("log of a jet with non-positive value")
        out[0] = np.log(v)
        inv = 1.0 / v
        acc = inv.copy()
        for k in range(1, n + 1):
            out[k] = acc / k * (1.0 if k % 2 == 1 else -1.0)
            acc = acc * inv
    elif op == "pow":
        p = float(aux)
        if p == round(p) and p >= 0:
            p_int = int(round(p))
            for k in range(n + 1):
                if k > p_int:
                    out[k] = 0.0
                else:
                    coeff = 1.0
                    for j in range(k):
                        coeff *= (p - j) / (j + 1)
                    out[k] = coeff * np.power(v, p_int - k)
        else:
            if np.any(v <= 0.0):
                raise NumericError(f"non-integer power {p} of a jet with non-positive value")
            for k in range(n + 1):
                coeff = 1.0
                for j in range(k):
                    coeff *= (p - j) / (j + 1)
                out[k] = coeff * np.power(v, p - k)
    elif op == "interp":
        xg, yg, slopes = aux
        out[0] = np.interp(v, xg, yg)
        if n >= 1:
            seg = np.clip(np.searchsorted(xg, v, side="right") - 1, 0, len(slopes) - 1)
            out[1] = slopes[seg]
        for k in range(2, n + 1):
            out[k] = 0.0
    else:
        raise ConfigurationError(f"unknown elementary function {op!r}")
    return out


# ---------------------------------------------------------------------------
# Raw kernels on coefficient arrays (trailing axis = multi-index).


def kmul(a: np.ndarray, b: np.ndarray, space: JetSpace) -> np.ndarray:
    """Leibniz product of two derivative-valued jet arrays."""
    i_out, i_a, i_b, factor, starts = space.tables()[0]
    return table_product(a, b, i_a, i_b, i_out, factor, starts, space.size)


def _mul_transpose(adj: np.ndarray, other: np.ndarray, space: JetSpace, slot: int) -> np.ndarray:
    """Adjoint of one factor of a Leibniz product, the other factor fixed."""
    i_out, i_a, i_b, factor, starts = space.tables()[slot]
    if slot == 1:
        return table_product(adj, other, i_out, i_b, i_a, factor, starts, space.size)
    return table_product(adj, other, i_out, i_a, i_b, factor, starts, space.size)


def kunary(op: str, a: np.ndarray, space: JetSpace, aux=None, need_w: bool = True):
    """Compose an elementary function with a jet array.

    Returns ``(out, w)`` where ``w`` is the jet of the function's first
    derivative along the same argument; ``w`` is exactly the tangent
    weight needed by the reverse sweep (d out = w * d a in jet algebra).
    ``need_w=False`` skips it for evaluations outside any gradient path.
    """
    order = space.order
    series = _series(op, a[..., 0], order + 1, aux=aux)
    return unary_compose(a, series, space.tables()[0], order, need_w)


def klinear(weight: np.ndarray, bias: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Affine layer applied to a batch of jet vectors.

    ``a`` has shape (N, n_in, C); the bias, being constant in the inputs,
    only shifts the value coefficient.  The reduction over input neurons
    runs in fixed index order, so results are identical for any batch
    size (a BLAS matmul would re-block the sum and break bitwise
    reproducibility of single-point versus batched evaluation).
    """
    return linear_forward(weight, bias, a)


# ---------------------------------------------------------------------------
# Public scalar-jet API (always over the full coefficient set).


@dataclass(frozen=True)
class Jet:
    """Value plus all mixed input partials up to `order`, graded-lex layout."""

    order: int
    dim: int
    coeffs: np.ndarray

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def derivative(self, alpha: tuple[int, ...]) -> float:
        """Partial derivative for the exponent tuple `alpha`."""
        return float(self.coeffs[index_of(self.dim, self.order, alpha)])

    def __post_init__(self):
        expected = coeff_count(self.dim, self.order)
        if self.coeffs.shape != (expected,):
            raise ConfigurationError(
                f"jet with dim={self.dim}, order={self.order} needs {expected} "
                f"coefficients, got shape {self.coeffs.shape}"
            )


def jet_seed(point, order: int) -> list[Jet]:
    """One seed jet per input coordinate of `point`."""
    if not 1 <= order <= MAX_ORDER:
        raise ConfigurationError(f"jet order must be in 1..{MAX_ORDER}, got {order}")
    point = np.atleast_1d(np.asarray(point, dtype=np.float64))
    if not np.all(np.isfinite(point)):
        raise NumericError("seed point must be finite")
    dim = point.shape[0]
    coeffs = JetSpace.full(dim, order).seed(point[None, :])[0]
    return [Jet(order, dim, coeffs[j].copy()) for j in range(dim)]


_UNARY_ALIASES = {
    "tanh": "tanh", "sin": "sin", "cos": "cos", "exp": "exp",
    "sigmoid": "sigmoid", "log": "log",
}


def jet_apply(op: str, *args, power: float | None = None) -> Jet:
    """Apply one elementary operation to scalar jets.

    Supported: ``+ - * / tanh sin cos exp power abs sigmoid neg`` (word
    aliases ``add sub mul div pow`` accepted).  Non-jet numeric arguments
    are lifted to constant jets.
    """
    jets = [a for a in args if isinstance(a, Jet)]
    if not jets:
        raise ConfigurationError("jet_apply needs at least one Jet argument")
    dim, order = jets[0].dim, jets[0].order
    for j in jets:
        if j.dim != dim or j.order != order:
            raise ConfigurationError("jets passed to one operation must share dim and order")
    space = JetSpace.full(dim, order)

    def lift(x):
        if isinstance(x, Jet):
            return x.coeffs
        c = np.zeros(space.size)
        c[0] = float(x)
        return c

    name = {"+": "add", "-": "sub", "*": "mul", "×": "mul", "−": "sub",
            "/": "div", "÷": "div", "power": "pow"}.get(op, op)
    if name in ("add", "sub", "mul", "div"):
        if len(args) != 2:
            raise ConfigurationError(f"{op} takes two arguments")
        a, b = lift(args[0]), lift(args[1])
        if name == "add":
            out = a + b
        elif name == "sub":
            out = a - b
        elif name == "mul":
            out = kmul(a, b, space)
        else:
            if b[0] == 0.0:
                raise NumericError("jet division by zero value")
            out = kmul(a, kunary("recip", b[None], space)[0][0], space)
    elif name == "neg":
        out = -lift(args[0])
    elif name == "abs":
        a = lift(args[0])
        out = np.sign(a[0]) * a  # derivative 0 at a kink, by convention
    elif name == "pow":
        if power is None:
            raise ConfigurationError("power operation needs the exponent via power=")
        out = kunary("pow", lift(args[0])[None], space, aux=power)[0][0]
    elif name in _UNARY_ALIASES:
        out = kunary(_UNARY_ALIASES[name], lift(args[0])[None], space)[0][0]
    else:
        raise ConfigurationError(f"unknown jet operation {op!r}")
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite jet coefficients from {op!r}")
    return Jet(order, dim, out)


# ---------------------------------------------------------------------------
# The tape.


class Node:
    """Handle to one recorded array; overloads arithmetic for scalar arrays.

    Operator overloads are only meaningful for plain value arrays; jet
    arrays must go through the jet_* methods so the coefficient axis is
    treated correctly.
    """

    __slots__ = ("rec", "idx")

    def __init__(self, rec: "AdjointRecorder", idx: int):
        self.rec = rec
        self.idx = idx

    @property
    def value(self) -> np.ndarray:
        return self.rec.values[self.idx]

    def _coerce(self, other) -> "Node":
        if isinstance(other, Node):
            return other
        return self.rec.constant(np.asarray(other, dtype=np.float64))

    def __add__(self, other):
        return self.rec.emit("add", (self, self._coerce(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return self.rec.emit("sub", (self, self._coerce(other)))

    def __rsub__(self, other):
        return self.rec.emit("sub", (self._coerce(other), self))

    def __mul__(self, other):
        return self.rec.emit("mul", (self, self._coerce(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.rec.emit("div", (self, self._coerce(other)))

    def __rtruediv__(self, other):
        return self.rec.emit("div", (self._coerce(other), self))

    def __neg__(self):
        return self.rec.emit("neg", (self,))

    def __pow__(self, p):
        return self.rec.emit("pow_const", (self,), aux=float(p))


def _bcast_adj(adj: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum an adjoint down to `shape` (reverse of broadcasting)."""
    if adj.shape == shape:
        return adj
    extra = adj.ndim - len(shape)
    if extra > 0:
        adj = adj.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and adj.shape[i] != 1)
    if axes:
        adj = adj.sum(axis=axes, keepdims=True)
    return adj


# forward: fn(in_values, aux) -> out_value or (out_value, saved)
# backward: fn(adj_out, in_values, out_value, saved, aux, needs)
#           -> tuple of adjoints (None where needs[i] is False)
_FORWARD = {}
_BACKWARD = {}


def _op(name):
    def deco(fn):
        _FORWARD[name] = fn
        return fn
    return deco


def _bwd(name):
    def deco(fn):
        _BACKWARD[name] = fn
        return fn
    return deco


@_op("add")
def _f_add(vals, aux):
    return vals[0] + vals[1]


@_bwd("add")
def _b_add(adj, vals, out, saved, aux, needs):
    return adj, adj


@_op("sub")
def _f_sub(vals, aux):
    return vals[0] - vals[1]


@_bwd("sub")
def _b_sub(adj, vals, out, saved, aux, needs):
    return adj, -adj if needs[1] else None


@_op("neg")
def _f_neg(vals, aux):
    return -vals[0]


@_bwd("neg")
def _b_neg(adj, vals, out, saved, aux, needs):
    return (-adj,)


@_op("mul")
def _f_mul(vals, aux):
    return vals[0] * vals[1]


@_bwd("mul")
def _b_mul(adj, vals, out, saved, aux, needs):
    return (adj * vals[1] if needs[0] else None,
            adj * vals[0] if needs[1] else None)


@_op("div")
def _f_div(vals, aux):
    if np.any(vals[1] == 0.0):
        raise NumericError("division by zero")
    return vals[0] / vals[1]


@_bwd("div")
def _b_div(adj, vals, out, saved, aux, needs):
    inv = 1.0 / vals[1]
    return (adj * inv if needs[0] else None,
            -adj * out * inv if needs[1] else None)


@_op("scale")
def _f_scale(vals, aux):
    return vals[0] * aux


@_bwd("scale")
def _b_scale(adj, vals, out, saved, aux, needs):
    return (adj * aux,)


@_op("shift")
def _f_shift(vals, aux):
    return vals[0] + aux


@_bwd("shift")
def _b_shift(adj, vals, out, saved, aux, needs):
    return (adj,)


@_op("shift_coeff0")
def _f_shift_coeff0(vals, aux):
    # adding a constant to a jet moves only the value coefficient
    out = vals[0].copy()
    out[..., 0] += aux
    return out


@_bwd("shift_coeff0")
def _b_shift_coeff0(adj, vals, out, saved, aux, needs):
    return (adj,)


@_op("pow_const")
def _f_pow_const(vals, aux):
    return np.power(vals[0], aux)


@_bwd("pow_const")
def _b_pow_const(adj, vals, out, saved, aux, needs):
    return (adj * aux * np.power(vals[0], aux - 1.0),)


_SCALAR_UNARY = {
    "sin": (np.sin, lambda v, o: np.cos(v)),
    "cos": (np.cos, lambda v, o: -np.sin(v)),
    "tanh": (np.tanh, lambda v, o: 1.0 - o * o),
    "exp": (np.exp, lambda v, o: o),
    "sigmoid": (lambda v: 1.0 / (1.0 + np.exp(-v)), lambda v, o: o * (1.0 - o)),
    "sqrt": (np.sqrt, lambda v, o: 0.5 / o),
    "abs": (np.abs, lambda v, o: np.sign(v)),
}

for _name, (_f, _df) in _SCALAR_UNARY.items():
    _FORWARD[_name] = (lambda f: lambda vals, aux: f(vals[0]))(_f)
    _BACKWARD[_name] = (
        lambda df: lambda adj, vals, out, saved, aux, needs: (adj * df(vals[0], out),)
    )(_df)


@_op("sum")
def _f_sum(vals, aux):
    return np.asarray(vals[0].sum())


@_bwd("sum")
def _b_sum(adj, vals, out, saved, aux, needs):
    return (np.broadcast_to(adj, vals[0].shape),)


@_op("mean")
def _f_mean(vals, aux):
    return np.asarray(vals[0].mean())


@_bwd("mean")
def _b_mean(adj, vals, out, saved, aux, needs):
    return (np.broadcast_to(adj / vals[0].size, vals[0].shape),)


@_op("extract")
def _f_extract(vals, aux):
    return vals[0][..., aux].copy()


@_bwd("extract")
def _b_extract(adj, vals, out, saved, aux, needs):
    full = np.zeros_like(vals[0])
    full[..., aux] = adj
    return (full,)


@_op("take_output")
def _f_take_output(vals, aux):
    return vals[0][:, aux, :].copy()


@_bwd("take_output")
def _b_take_output(adj, vals, out, saved, aux, needs):
    full = np.zeros_like(vals[0])
    full[:, aux, :] = adj
    return (full,)


@_op("jet_mul")
def _f_jet_mul(vals, aux):
    return kmul(vals[0], vals[1], aux)


@_bwd("jet_mul")
def _b_jet_mul(adj, vals, out, saved, aux, needs):
    return (_mul_transpose(adj, vals[1], aux, 1) if needs[0] else None,
            _mul_transpose(adj, vals[0], aux, 2) if needs[1] else None)


@_op("jet_unary")
def _f_jet_unary(vals, aux):
    op, space, op_aux, need_w = aux
    return kunary(op, vals[0], space, aux=op_aux, need_w=need_w)


@_bwd("jet_unary")
def _b_jet_unary(adj, vals, out, saved, aux, needs):
    space = aux[1]
    return (_mul_transpose(adj, saved, space, 1),)


@_op("jet_abs")
def _f_jet_abs(vals, aux):
    sign = np.sign(vals[0][..., :1])
    return vals[0] * sign, sign


@_bwd("jet_abs")
def _b_jet_abs(adj, vals, out, saved, aux, needs):
    return (adj * saved,)


@_op("jet_linear")
def _f_jet_linear(vals, aux):
    return klinear(vals[0], vals[1], vals[2])


@_bwd("jet_linear")
def _b_jet_linear(adj, vals, out, saved, aux, needs):
    weight, _bias, a = vals
    adj_w, adj_a = linear_backward(adj, weight, a, needs[0], needs[2])
    adj_b = adj[:, :, 0].sum(axis=0) if needs[1] else None
    return adj_w, adj_b, adj_a


class AdjointRecorder:
    """Append-only record of kernel applications for one loss evaluation.

    One recorder per loss evaluation; make a fresh one instead of reusing.
    """

    def __init__(self):
        self.values: list[np.ndarray] = []
        self._saved: list = []
        self._ops: list = []
        self._needs_grad: list[bool] = []

    def _push(self, value, needs_grad, record, saved=None) -> Node:
        self.values.append(value)
        self._saved.append(saved)
        self._ops.append(record)
        self._needs_grad.append(needs_grad)
        return Node(self, len(self.values) - 1)

    def leaf(self, value) -> Node:
        """A differentiable input (network parameter block)."""
        return self._push(np.asarray(value, dtype=np.float64), True, None)

    def constant(self, value) -> Node:
        return self._push(np.asarray(value, dtype=np.float64), False, None)

    def emit(self, op: str, inputs: tuple[Node, ...], aux=None) -> Node:
        in_idx = tuple(n.idx for n in inputs)
        vals = [self.values[i] for i in in_idx]
        result = _FORWARD[op](vals, aux)
        saved = None
        if isinstance(result, tuple):
            result, saved = result
        needs = any(self._needs_grad[i] for i in in_idx)
        return self._push(result, needs, (op, in_idx, aux), saved=saved)

    # -- convenience wrappers -------------------------------------------

    def jet_mul(self, a: Node, b: Node, space: JetSpace) -> Node:
        return self.emit("jet_mul", (a, b), aux=space)

    def jet_unary(self, op: str, a: Node, space: JetSpace, aux=None) -> Node:
        if op == "abs":
            return self.emit("jet_abs", (a,))
        need_w = self._needs_grad[a.idx]  # tangent weight only feeds the reverse sweep
        return self.emit("jet_unary", (a,), aux=(op, space, aux, need_w))

    def jet_linear(self, weight: Node, bias: Node, a: Node) -> Node:
        return self.emit("jet_linear", (weight, bias, a))

    def extract(self, a: Node, index) -> Node:
        return self.emit("extract", (a,), aux=index)

    def scale(self, a: Node, factor: float) -> Node:
        return self.emit("scale", (a,), aux=float(factor))

    def shift(self, a: Node, offset: float) -> Node:
        return self.emit("shift", (a,), aux=float(offset))

    def mean(self, a: Node) -> Node:
        return self.emit("mean", (a,))

    def sum(self, a: Node) -> Node:
        return self.emit("sum", (a,))

    def unary(self, op: str, a: Node) -> Node:
        return self.emit(op, (a,))

    # -- replay and reverse sweep ---------------------------------------

    def replay(self, node: Node) -> np.ndarray:
        """Re-execute the recorded forward pass; bitwise-identical result."""
        for i, rec in enumerate(self._ops):
            if rec is None:
                continue
            op, in_idx, aux = rec
            result = _FORWARD[op]([self.values[j] for j in in_idx], aux)
            if isinstance(result, tuple):
                result, self._saved[i] = result
            self.values[i] = result
        return self.values[node.idx]

    def gradient(self, loss: Node, leaves: list[Node]) -> list[np.ndarray]:
        """Adjoints of a recorded scalar with respect to the given leaves."""
        loss_val = self.values[loss.idx]
        if loss_val.size != 1:
            raise ConfigurationError("gradient target must be a scalar node")
        adj: dict[int, np.ndarray] = {loss.idx: np.ones_like(loss_val)}
        for i in range(loss.idx, -1, -1):
            rec = self._ops[i]
            if rec is None:
                continue
            a = adj.pop(i, None)
            if a is None or not self._needs_grad[i]:
                continue
            op, in_idx, aux = rec
            vals = [self.values[j] for j in in_idx]
            needs = tuple(self._needs_grad[j] for j in in_idx)
            contribs = _BACKWARD[op](a, vals, self.values[i], self._saved[i], aux, needs)
            for j, contrib in zip(in_idx, contribs):
                if contrib is None or not self._needs_grad[j]:
                    continue
                contrib = _bcast_adj(contrib, self.values[j].shape)
                if j in adj:
                    adj[j] = adj[j] + contrib
                else:
                    adj[j] = contrib
        return [adj.get(n.idx, np.zeros_like(self.values[n.idx])) for n in leaves]


def grad_params(loss: Node, recorder: AdjointRecorder, leaves: list[Node]) -> np.ndarray:
    """Flat gradient of a recorded scalar loss over the parameter leaves.

    Raises NumericError naming the first offending flat index if the
    gradient contains a NaN.
    """
    if not np.isfinite(recorder.values[loss.idx]):
        raise NumericError("loss is not finite")
    grads = recorder.gradient(loss, leaves)
    flat = np.concatenate([g.ravel() for g in grads]) if grads else np.zeros(0)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise NumericError(f"non-finite gradient at parameter index {int(bad[0])}")
    return flat


# ---------------------------------------------------------------------------
# MLP evaluation in jet arithmetic.


def mlp_apply_jets(rec: AdjointRecorder, layer_nodes, activation: str,
                   inputs: Node, space: JetSpace) -> Node:
    """Run an MLP on a batch of jet vectors; returns an (N, n_out, C) node.

    ``layer_nodes`` is a sequence of (weight Node, bias Node) pairs from
    first hidden layer to output layer.
    """
    a = inputs
    last = len(layer_nodes) - 1
    for i, (w, b) in enumerate(layer_nodes):
        a = rec.jet_linear(w, b, a)
        if i != last:
            a = rec.jet_unary(activation, a, space)
    return a


def mlp_forward_jet(params: np.ndarray, spec, input_point, order: int) -> list[Jet]:
    """Network output jets at one input point (all partials to `order`)."""
    from .network import unpack_params  # deferred: network builds on this module

    if not 1 <= order <= MAX_ORDER:
        raise ConfigurationError(f"jet order must be in 1..{MAX_ORDER}, got {order}")
    point = np.atleast_1d(np.asarray(input_point, dtype=np.float64))
    dim = spec.layer_widths[0]
    if point.shape != (dim,):
        raise ConfigurationError(
            f"input has {point.shape[0]} coordinates, network expects {dim}")
    space = JetSpace.full(dim, order)
    rec = AdjointRecorder()
    layers = [(rec.constant(w), rec.constant(b)) for w, b in unpack_params(params, spec)]
    seeds = rec.constant(space.seed(point[None, :]))
    out = mlp_apply_jets(rec, layers, spec.activation, seeds, space)
    coeffs = out.value[0]
    return [Jet(order, dim, coeffs[j].copy()) for j in range(coeffs.shape[0])]
