"""Dense double-precision math with a reverse-mode tape, plus init and Adam.

Matrices are 2-d float64 ndarrays, vectors 1-d, scalars 0-d. The Tape
records every operation as a node (op kind, parent ids, cached value) in
insertion order; backward() walks the node list in reverse and returns
gradients keyed by parameter name. All randomness flows through
explicitly seeded generators so identical seeds give identical streams.
"""

from __future__ import annotations

import math
import zlib

import numpy as np

from .errors import ContractError, DimensionError, NumericError


def seeded_rng(seed: int, *tags: str) -> np.random.Generator:
    """Deterministic generator for (seed, tags); tag order matters."""
    entropy = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    entropy.extend(zlib.crc32(t.encode("utf-8")) for t in tags)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def glorot_uniform_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform init on [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))]."""
    if rows < 1 or cols < 1:
        raise DimensionError(f"glorot init needs positive dims, got {rows}x{cols}")
    bound = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def softmax(scores: np.ndarray) -> np.ndarray:
    """Stable softmax of a vector (max subtracted before exponentiation)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise DimensionError("softmax expects a nonempty vector")
    shifted = scores - scores.max()
    e = np.exp(shifted)
    return e / e.sum()


def _softmax_cols(mat: np.ndarray) -> np.ndarray:
    shifted = mat - mat.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


BCE_EPS = 1e-12


def _bce_value(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    losses = -(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))
    return np.asarray(losses.mean())


class Node:
    """One tape entry: an op kind, its input node ids, and the cached value."""

    __slots__ = ("idx", "op", "parents", "value", "extra", "param")

    def __init__(self, idx, op, parents, value, extra=None, param=None):
        self.idx = idx
        self.op = op
        self.parents = parents
        self.value = value
        self.extra = extra
        self.param = param

    @property
    def shape(self):
        return self.value.shape


# Forward rules used by replay(): op -> f(parent_values, extra) -> value.
_FORWARD = {}


def _forward(name):
    def deco(fn):
        _FORWARD[name] = fn
        return fn

    return deco


@_forward("add")
def _f_add(vals, extra):
    return vals[0] + vals[1]


@_forward("add_row")
def _f_add_row(vals, extra):
    return vals[0] + vals[1][None, :]


@_forward("mul")
def _f_mul(vals, extra):
    return vals[0] * vals[1]


@_forward("matmul")
def _f_matmul(vals, extra):
    return np.asarray(vals[0] @ vals[1])


@_forward("matmul_ta")
def _f_matmul_ta(vals, extra):
    return vals[0].T @ vals[1]


@_forward("matmul_tb")
def _f_matmul_tb(vals, extra):
    return vals[0] @ vals[1].T


@_forward("relu")
def _f_relu(vals, extra):
    return np.maximum(vals[0], 0.0)


@_forward("tanh")
def _f_tanh(vals, extra):
    return np.tanh(vals[0])


@_forward("sigmoid")
def _f_sigmoid(vals, extra):
    return 1.0 / (1.0 + np.exp(-vals[0]))


@_forward("softmax")
def _f_softmax(vals, extra):
    return softmax(vals[0])


@_forward("softmax_cols")
def _f_softmax_cols(vals, extra):
    return _softmax_cols(vals[0])


@_forward("concat")
def _f_concat(vals, extra):
    return np.concatenate(vals)


@_forward("concat_cols")
def _f_concat_cols(vals, extra):
    return np.concatenate(vals, axis=1)


@_forward("stack_rows")
def _f_stack_rows(vals, extra):
    return np.stack(vals, axis=0)


@_forward("row_select")
def _f_row_select(vals, extra):
    return vals[0][extra["row"]]


@_forward("mean")
def _f_mean(vals, extra):
    return np.asarray(vals[0].mean())


@_forward("sum")
def _f_sum(vals, extra):
    return np.asarray(vals[0].sum())


@_forward("rowdot")
def _f_rowdot(vals, extra):
    return (vals[0] * vals[1]).sum(axis=1)


@_forward("dropout")
def _f_dropout(vals, extra):
    return vals[0] * extra["mask"]


@_forward("bce")
def _f_bce(vals, extra):
    return _bce_value(vals[0], extra["target"])


class Tape:
    """Append-only computation record supporting replay and backward."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._param_ids: dict[str, int] = {}

    def _push(self, op, parents, value, extra=None, param=None) -> Node:
        value = np.asarray(value, dtype=np.float64)
        node = Node(len(self.nodes), op, tuple(p.idx for p in parents), value, extra, param)
        self.nodes.append(node)
        return node

    # -- leaves ---------------------------------------------------------

    def constant(self, value) -> Node:
        return self._push("leaf", (), np.asarray(value, dtype=np.float64))

    def param(self, name: str, value) -> Node:
        if name in self._param_ids:
            raise ContractError(f"parameter {name!r} registered twice")
        node = self._push("leaf", (), np.asarray(value, dtype=np.float64), param=name)
        self._param_ids[name] = node.idx
        return node

    # -- ops ------------------------------------------------------------

    def add(self, a: Node, b: Node) -> Node:
        if a.shape != b.shape:
            raise DimensionError(f"add shapes {a.shape} vs {b.shape}")
        return self._push("add", (a, b), a.value + b.value)

    def add_row(self, mat: Node, row: Node) -> Node:
        """Broadcast-add a length-c vector to every row of an r x c matrix."""
        if mat.value.ndim != 2 or row.value.ndim != 1 or mat.shape[1] != row.shape[0]:
            raise DimensionError(f"add_row shapes {mat.shape} vs {row.shape}")
        return self._push("add_row", (mat, row), mat.value + row.value[None, :])

    def mul(self, a: Node, b: Node) -> Node:
        if a.shape != b.shape:
            raise DimensionError(f"mul shapes {a.shape} vs {b.shape}")
        return self._push("mul", (a, b), a.value * b.value)

    def matmul(self, a: Node, b: Node) -> Node:
        """Matrix/vector product; accepts 2d@2d, 2d@1d, 1d@2d and 1d@1d."""
        av, bv = a.value, b.value
        if av.ndim == 0 or bv.ndim == 0 or av.shape[-1] != bv.shape[0]:
            raise DimensionError(f"matmul shapes {av.shape} vs {bv.shape}")
        return self._push("matmul", (a, b), np.asarray(av @ bv))

    def matmul_ta(self, a: Node, b: Node) -> Node:
        """a.T @ b for two matrices sharing their first dimension."""
        if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[0] != b.shape[0]:
            raise DimensionError(f"matmul_ta shapes {a.shape} vs {b.shape}")
        return self._push("matmul_ta", (a, b), a.value.T @ b.value)

    def matmul_tb(self, a: Node, b: Node) -> Node:
        """a @ b.T for two matrices sharing their second dimension."""
        if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[1]:
            raise DimensionError(f"matmul_tb shapes {a.shape} vs {b.shape}")
        return self._push("matmul_tb", (a, b), a.value @ b.value.T)

    def relu(self, a: Node) -> Node:
        return self._push("relu", (a,), np.maximum(a.value, 0.0))

    def tanh(self, a: Node) -> Node:
        return self._push("tanh", (a,), np.tanh(a.value))

    def sigmoid(self, a: Node) -> Node:
        return self._push("sigmoid", (a,), 1.0 / (1.0 + np.exp(-a.value)))

    def softmax(self, a: Node) -> Node:
        return self._push("softmax", (a,), softmax(a.value))

    def softmax_cols(self, a: Node) -> Node:
        """Independent softmax down each column of a matrix."""
        if a.value.ndim != 2:
            raise DimensionError("softmax_cols expects a matrix")
        return self._push("softmax_cols", (a,), _softmax_cols(a.value))

    def concat(self, parts: list[Node]) -> Node:
        if not parts or any(p.value.ndim != 1 for p in parts):
            raise DimensionError("concat expects a nonempty list of vectors")
        extra = {"sizes": [p.shape[0] for p in parts]}
        return self._push("concat", tuple(parts), np.concatenate([p.value for p in parts]), extra)

    def concat_cols(self, parts: list[Node]) -> Node:
        if not parts or any(p.value.ndim != 2 for p in parts):
            raise DimensionError("concat_cols expects a nonempty list of matrices")
        if len({p.shape[0] for p in parts}) != 1:
            raise DimensionError("concat_cols row counts differ")
        extra = {"sizes": [p.shape[1] for p in parts]}
        return self._push(
            "concat_cols", tuple(parts), np.concatenate([p.value for p in parts], axis=1), extra
        )

    def stack_rows(self, parts: list[Node]) -> Node:
        if not parts or any(p.value.ndim != 1 for p in parts):
            raise DimensionError("stack_rows expects a nonempty list of vectors")
        if len({p.shape[0] for p in parts}) != 1:
            raise DimensionError("stack_rows lengths differ")
        return self._push("stack_rows", tuple(parts), np.stack([p.value for p in parts], axis=0))

    def row_select(self, mat: Node, row: int) -> Node:
        if mat.value.ndim != 2 or not (0 <= row < mat.shape[0]):
            raise DimensionError(f"row_select row {row} of shape {mat.shape}")
        return self._push("row_select", (mat,), mat.value[row], {"row": row})

    def mean(self, a: Node) -> Node:
        return self._push("mean", (a,), np.asarray(a.value.mean()))

    def sum(self, a: Node) -> Node:
        return self._push("sum", (a,), np.asarray(a.value.sum()))

    def rowdot(self, a: Node, b: Node) -> Node:
        """Per-row dot product of two equal-shape matrices."""
        if a.value.ndim != 2 or a.shape != b.shape:
            raise DimensionError(f"rowdot shapes {a.shape} vs {b.shape}")
        return self._push("rowdot", (a, b), (a.value * b.value).sum(axis=1))

    def dropout(self, a: Node, keep: float, rng: np.random.Generator) -> Node:
        """Inverted-scaling dropout; the sampled mask is stored for replay."""
        if not 0.0 < keep <= 1.0:
            raise ContractError(f"dropout keep probability {keep} outside (0, 1]")
        mask = (rng.random(a.shape) < keep) / keep
        return self._push("dropout", (a,), a.value * mask, {"mask": mask})

    def bce(self, pred: Node, target: np.ndarray) -> Node:
        """Mean binary cross-entropy against a fixed 0/1 target array."""
        target = np.asarray(target, dtype=np.float64)
        if pred.shape != target.shape:
            raise DimensionError(f"bce shapes {pred.shape} vs {target.shape}")
        return self._push("bce", (pred,), _bce_value(pred.value, target), {"target": target})

    # -- replay / backward ---------------------------------------------

    def replay(self) -> None:
        """Recompute every non-leaf value in insertion order, in place."""
        for node in self.nodes:
            if node.op == "leaf":
                continue
            vals = [self.nodes[p].value for p in node.parents]
            node.value = np.asarray(_FORWARD[node.op](vals, node.extra), dtype=np.float64)

    def backward(self, loss: Node) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss for every registered parameter.

        Parameters the loss does not reach get zero gradients.
        """
        if loss.value.shape != ():
            raise ContractError(f"backward needs a scalar loss, got shape {loss.value.shape}")
        grads: list[np.ndarray | None] = [None] * len(self.nodes)
        grads[loss.idx] = np.asarray(1.0)

        def send(idx, g):
            if grads[idx] is None:
                grads[idx] = np.array(g, dtype=np.float64, copy=True)
            else:
                grads[idx] = grads[idx] + g

        for node in reversed(self.nodes[: loss.idx + 1]):
            g = grads[node.idx]
            if g is None or node.op == "leaf":
                continue
            ps = node.parents
            vals = [self.nodes[p].value for p in ps]
            op = node.op
            if op == "add":
                send(ps[0], g)
                send(ps[1], g)
            elif op == "add_row":
                send(ps[0], g)
                send(ps[1], g.sum(axis=0))
            elif op == "mul":
                send(ps[0], g * vals[1])
                send(ps[1], g * vals[0])
            elif op == "matmul":
                a, b = vals
                if a.ndim == 2 and b.ndim == 2:
                    send(ps[0], g @ b.T)
                    send(ps[1], a.T @ g)
                elif a.ndim == 2 and b.ndim == 1:
                    send(ps[0], np.outer(g, b))
                    send(ps[1], a.T @ g)
                elif a.ndim == 1 and b.ndim == 2:
                    send(ps[0], b @ g)
                    send(ps[1], np.outer(a, g))
                else:
                    send(ps[0], g * b)
                    send(ps[1], g * a)
            elif op == "matmul_ta":
                send(ps[0], vals[1] @ g.T)
                send(ps[1], vals[0] @ g)
            elif op == "matmul_tb":
                send(ps[0], g @ vals[1])
                send(ps[1], g.T @ vals[0])
            elif op == "relu":
                send(ps[0], g * (vals[0] > 0.0))
            elif op == "tanh":
                send(ps[0], g * (1.0 - node.value**2))
            elif op == "sigmoid":
                send(ps[0], g * node.value * (1.0 - node.value))
            elif op == "softmax":
                y = node.value
                send(ps[0], y * (g - float(g @ y)))
            elif op == "softmax_cols":
                y = node.value
                send(ps[0], y * (g - (g * y).sum(axis=0, keepdims=True)))
            elif op == "concat":
                at = 0
                for p, size in zip(ps, node.extra["sizes"]):
                    send(p, g[at : at + size])
                    at += size
            elif op == "concat_cols":
                at = 0
                for p, size in zip(ps, node.extra["sizes"]):
                    send(p, g[:, at : at + size])
                    at += size
            elif op == "stack_rows":
                for i, p in enumerate(ps):
                    send(p, g[i])
            elif op == "row_select":
                gm = np.zeros_like(vals[0])
                gm[node.extra["row"]] = g
                send(ps[0], gm)
            elif op == "mean":
                send(ps[0], np.full_like(vals[0], float(g) / vals[0].size))
            elif op == "sum":
                send(ps[0], np.full_like(vals[0], float(g)))
            elif op == "rowdot":
                send(ps[0], g[:, None] * vals[1])
                send(ps[1], g[:, None] * vals[0])
            elif op == "dropout":
                send(ps[0], g * node.extra["mask"])
            elif op == "bce":
                pred = vals[0]
                target = node.extra["target"]
                inside = (pred > BCE_EPS) & (pred < 1.0 - BCE_EPS)
                p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
                dp = (-target / p + (1.0 - target) / (1.0 - p)) / pred.size
                send(ps[0], float(g) * dp * inside)
            else:  # pragma: no cover
                raise ContractError(f"no backward rule for op {op!r}")

        out = {}
        for name, idx in self._param_ids.items():
            g = grads[idx]
            out[name] = np.zeros_like(self.nodes[idx].value) if g is None else np.asarray(g)
        return out


def finite_difference_check(build, params: dict[str, np.ndarray], eps: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    `build(params)` must deterministically construct the computation and
    return (tape, loss_node), registering each entry of `params` as a
    parameter leaf under its dict key. Entries of `params` are perturbed
    in place one coordinate at a time, so they must be float64 arrays.
    """
    tape, loss = build(params)
    analytic = tape.backward(loss)
    if not np.isfinite(loss.value):
        raise NumericError("loss is not finite at the evaluation point")

    def value_at() -> float:
        _, node = build(params)
        v = float(node.value)
        if not math.isfinite(v):
            raise NumericError("loss became non-finite during finite differencing")
        return v

    max_err = 0.0
    for name, theta in params.items():
        theta = np.asarray(theta)
        grad = analytic[name]
        for idx in np.ndindex(theta.shape):
            orig = theta[idx]
            theta[idx] = orig + eps
            plus = value_at()
            theta[idx] = orig - eps
            minus = value_at()
            theta[idx] = orig
            numeric = (plus - minus) / (2.0 * eps)
            err = abs(float(grad[idx]) - numeric) / max(1.0, abs(numeric))
            if err > max_err:
                max_err = err
    return max_err


class AdamState:
    """Per-parameter moment accumulators and step counter for Adam."""

    def __init__(self, params, learning_rate=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(v) for name, v in params.items()}
        self.v = {name: np.zeros_like(v) for name, v in params.items()}


def adam_step(state, params, grads):
    """One bias-corrected Adam update, applied to params in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise DimensionError(f"gradient shape {g.shape} vs parameter {theta.shape} for {name!r}")
        m = state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**state.t)
        v_hat = v / (1.0 - b2**state.t)
        theta -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state
