"""Finite-difference gradient checking.

Central differences against an analytic gradient, coordinate-sampled so the
check stays fast on real-sized parameter sets.  The relative-error metric is
|ga - gn| / max(1, |ga| + |gn|), robust near zero.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import ParamSet


def fd_gradient(
    loss_fn: Callable[[ParamSet], float],
    params: ParamSet,
    name: str,
    index: tuple[int, ...],
    h: float = 1e-5,
) -> float:
    arr = params[name].data
    orig = arr[index]
    arr[index] = orig + h
    hi = loss_fn(params)
    arr[index] = orig - h
    lo = loss_fn(params)
    arr[index] = orig
    return (hi - lo) / (2.0 * h)


def check_gradients(
    loss_fn: Callable[[ParamSet], float],
    params: ParamSet,
    analytic: dict[str, np.ndarray],
    rng: np.random.Generator,
    n_coords: int = 5,
    h: float = 1e-5,
) -> float:
    """Return the worst relative error over sampled coordinates of every param."""
    worst = 0.0
    for name, t in params.items():
        flat_size = t.size
        k = min(n_coords, flat_size)
        picks = rng.choice(flat_size, size=k, replace=False)
        for flat in picks:
            index = np.unravel_index(int(flat), t.data.shape)
            gn = fd_gradient(loss_fn, params, name, index, h)
            ga = float(analytic[name][index])
            err = abs(ga - gn) / max(1.0, abs(ga) + abs(gn))
            worst = max(worst, err)
    return worst
