"""Reverse-mode autodiff on an explicit tape.

The tape records a flat list of nodes in creation order; parents always
precede children, so the reverse sweep is just reversed insertion order.
Only what a loss needs is ever taped — callers build a fresh Tape per loss,
and the number of retained nodes (`len(tape)`) is the memory observable
used by training code.

Scalars are 0-d arrays so every node value is an ndarray.  Parameters are
leaf nodes registered by name; registering the same name twice returns the
existing leaf, which is how gradient contributions from several forwards of
the same network accumulate.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .. import kernels
from .tensor import ShapeError


class Node:
    __slots__ = ("val", "vjps", "grad", "name")

    def __init__(self, val: np.ndarray, vjps, name: str | None = None):
        self.val = val
        self.vjps = vjps  # list of (parent Node, fn: g -> contribution)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.val.shape

    def item(self) -> float:
        return float(self.val)


def _val(x) -> np.ndarray:
    return x.val if isinstance(x, Node) else x


class Tape:
    """Recorder for one backward pass."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._params: dict[str, Node] = {}
        self._done = False

    def __len__(self) -> int:
        return len(self.nodes)

    def _push(self, val: np.ndarray, vjps, name: str | None = None) -> Node:
        node = Node(val, vjps, name)
        self.nodes.append(node)
        return node

    # -- leaves ------------------------------------------------------------

    def param(self, name: str, arr: np.ndarray) -> Node:
        """Register (or fetch) a named leaf; gradients accumulate on it."""
        node = self._params.get(name)
        if node is not None:
            if node.val is not arr:
                raise ValueError(f"param {name!r} re-registered with a different array")
            return node
        node = self._push(np.asarray(arr), [], name)
        self._params[name] = node
        return node

    def param_names(self) -> list[str]:
        return list(self._params)

    # -- array ops ----------------------------------------------------------

    def matmul(self, x, w: Node) -> Node:
        xv, wv = _val(x), _val(w)
        if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[0]:
            raise ShapeError(f"matmul: {xv.shape} @ {wv.shape}")
        y = kernels.matmul(xv, wv)
        vjps = []
        if isinstance(x, Node):
            vjps.append((x, lambda g, wv=wv: kernels.matmul_nt(g, wv)))
        vjps.append((w, lambda g, xv=xv: kernels.matmul_tn(xv, g)))
        return self._push(y, vjps)

    def add_bias(self, x: Node, b: Node) -> Node:
        xv, bv = x.val, b.val
        if xv.shape[1] != bv.shape[0]:
            raise ShapeError(f"add_bias: rows of {xv.shape} vs bias {bv.shape}")
        y = kernels.add_rowvec(xv, bv)
        vjps = [(x, lambda g: g), (b, lambda g: kernels.colsum(g))]
        return self._push(y, vjps)

    def tanh(self, x: Node) -> Node:
        y = kernels.tanh_fwd(x.val)
        vjps = [(x, lambda g, y=y: kernels.tanh_bwd(y, g))]
        return self._push(y, vjps)

    def gather(self, table: Node, idx: np.ndarray) -> Node:
        idx = np.asarray(idx, dtype=np.int64)
        y = kernels.gather_rows(table.val, idx)

        def back(g, shape=table.val.shape, idx=idx):
            acc = np.zeros(shape)
            kernels.scatter_add_rows(acc, idx, g)
            return acc

        return self._push(y, [(table, back)])

    def concat_cols(self, parts: Sequence) -> Node:
        vals = [_val(p) for p in parts]
        rows = {v.shape[0] for v in vals}
        if len(rows) != 1:
            raise ShapeError(f"concat_cols: row counts differ {[v.shape for v in vals]}")
        y = np.concatenate(vals, axis=1)
        vjps = []
        col = 0
        for p, v in zip(parts, vals):
            lo, hi = col, col + v.shape[1]
            if isinstance(p, Node):
                vjps.append((p, lambda g, lo=lo, hi=hi: np.ascontiguousarray(g[:, lo:hi])))
            col = hi
        return self._push(y, vjps)

    def lincomb(self, ca, a, cb, b) -> Node:
        """ca*a + cb*b with scalar or per-row coefficients; a, b node or const."""
        av, bv = _val(a), _val(b)
        if av.shape != bv.shape:
            raise ShapeError(f"lincomb: {av.shape} vs {bv.shape}")
        ca_arr = np.asarray(ca, dtype=np.float64)
        cb_arr = np.asarray(cb, dtype=np.float64)
        ca_col = ca_arr[:, None] if ca_arr.ndim == 1 else ca_arr
        cb_col = cb_arr[:, None] if cb_arr.ndim == 1 else cb_arr
        y = ca_col * av + cb_col * bv
        vjps = []
        if isinstance(a, Node):
            vjps.append((a, lambda g, c=ca_col: c * g))
        if isinstance(b, Node):
            vjps.append((b, lambda g, c=cb_col: c * g))
        if not vjps:
            raise ValueError("lincomb: at least one operand must be a Node")
        return self._push(np.ascontiguousarray(y), vjps)

    def sqsum_diff(self, x: Node, target: np.ndarray) -> Node:
        """Scalar sum of squared differences against a constant target."""
        tv = np.asarray(target, dtype=np.float64)
        if x.val.shape != tv.shape:
            raise ShapeError(f"sqsum_diff: {x.val.shape} vs target {tv.shape}")
        s = kernels.sqsum_diff(x.val, tv)

        def back(g, xv=x.val, tv=tv):
            return kernels.sqsum_diff_bwd(xv, tv, 2.0 * float(g))

        return self._push(np.asarray(s), [(x, back)])

    # -- scalar ops ----------------------------------------------------------

    def s_add(self, a: Node, b: Node) -> Node:
        y = np.asarray(a.val + b.val)
        return self._push(y, [(a, lambda g: g), (b, lambda g: g)])

    def s_sub(self, a: Node, b: Node) -> Node:
        y = np.asarray(a.val - b.val)
        return self._push(y, [(a, lambda g: g), (b, lambda g: np.asarray(-g))])

    def s_affine(self, a: Node, scale: float, shift: float = 0.0) -> Node:
        y = np.asarray(scale * a.val + shift)
        return self._push(y, [(a, lambda g, s=scale: np.asarray(s * g))])

    def s_softplus(self, a: Node) -> Node:
        z = float(a.val)
        y = np.asarray(np.logaddexp(0.0, z))

        def back(g, z=z):
            sig = 1.0 / (1.0 + np.exp(-z)) if z >= 0 else np.exp(z) / (1.0 + np.exp(z))
            return np.asarray(float(g) * sig)

        return self._push(y, [(a, back)])

    # -- reverse sweep ---------------------------------------------------------

    def backward(self, root: Node) -> None:
        if self._done:
            raise RuntimeError("tape already swept")
        if root.val.shape != ():
            raise ShapeError(f"backward root must be scalar, got {root.val.shape}")
        self._done = True
        root.grad = np.asarray(1.0)
        for node in reversed(self.nodes):
            g = node.grad
            if g is None:
                continue
            for parent, fn in node.vjps:
                contrib = fn(g)
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.val)
                parent.grad += contrib

    def grads(self) -> dict[str, np.ndarray]:
        """Per-parameter gradients after backward; zeros for unused leaves."""
        out = {}
        for name, node in self._params.items():
            out[name] = node.grad if node.grad is not None else np.zeros_like(node.val)
        return out
