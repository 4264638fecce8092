"""Plain tanh MLP over the tape.

One function builds the whole stack so the taped (training) and untaped
(reference / inference) paths run literally the same code: callers without a
tape get an ephemeral one that is dropped after the forward, which keeps the
two paths bitwise identical.
"""

from __future__ import annotations

import numpy as np

from .tape import Node, Tape
from .tensor import ParamSet, ShapeError, Tensor


def init_mlp(
    rng: np.random.Generator,
    sizes: list[int],
    prefix: str = "",
    final_scale: float = 1e-2,
) -> ParamSet:
    """He-style init; the final layer is shrunk so the net starts near zero."""
    params = ParamSet()
    n_layers = len(sizes) - 1
    for i in range(n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        if i == n_layers - 1:
            w *= final_scale
        params.add(f"{prefix}w{i + 1}", Tensor(w))
        params.add(f"{prefix}b{i + 1}", Tensor(np.zeros(fan_out)))
    return params


def mlp_layer_names(params: ParamSet, prefix: str = "") -> list[tuple[str, str]]:
    pairs = []
    i = 1
    while f"{prefix}w{i}" in params:
        pairs.append((f"{prefix}w{i}", f"{prefix}b{i}"))
        i += 1
    if not pairs:
        raise ShapeError(f"no layers with prefix {prefix!r}")
    return pairs


def mlp_forward(params: ParamSet, x: np.ndarray, tape: Tape | None, prefix: str = ""):
    """Run the MLP on rows `x`.

    With a tape, returns the output Node; without, returns a plain ndarray.
    tanh between layers, linear last layer.
    """
    layers = mlp_layer_names(params, prefix)
    t = tape if tape is not None else Tape()
    h: Node | np.ndarray = x if isinstance(x, Node) else np.asarray(x, dtype=np.float64)
    if (h.val if isinstance(h, Node) else h).ndim != 2:
        raise ShapeError(f"mlp input must be 2-d, got {h.shape}")
    for k, (wn, bn) in enumerate(layers):
        w, b = params[wn], params[bn]
        hv = h.val if isinstance(h, Node) else h
        if hv.shape[1] != w.shape[0]:
            raise ShapeError(
                f"layer {wn}: input has {hv.shape[1]} columns, weight expects {w.shape[0]}"
            )
        h = t.matmul(h, t.param(wn, w.data))
        h = t.add_bias(h, t.param(bn, b.data))
        if k < len(layers) - 1:
            h = t.tanh(h)
    return h if tape is not None else h.val
