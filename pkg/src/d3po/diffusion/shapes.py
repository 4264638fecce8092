"""Synthetic grayscale shape data.

Five classes of 16x16 images in [-1, 1]: filled disc, ring, horizontal bar,
vertical bar, and cross.  Edges are softened with a tanh over the signed
distance so images have genuine gray ramps rather than binary masks.
A canonical template bank (no jitter, a few sizes per class) backs the
shape-fidelity score used elsewhere.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

CLASSES = ("disc", "ring", "hbar", "vbar", "cross")
N_CLASSES = len(CLASSES)
EDGE = 0.6  # softness of shape boundaries, in pixels


def class_id(name: str) -> int:
    try:
        return CLASSES.index(name)
    except ValueError:
        raise ValueError(f"unknown class {name!r}, expected one of {CLASSES}") from None


def _grid(side: int, cx: float, cy: float) -> tuple[np.ndarray, np.ndarray]:
    ax = np.arange(side, dtype=np.float64)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    return xx - cx, yy - cy


def _fill(signed_dist: np.ndarray) -> np.ndarray:
    """Signed distance (negative inside) -> smooth image in [-1, 1]."""
    return -np.tanh(signed_dist / EDGE)


def _disc(side, cx, cy, r):
    dx, dy = _grid(side, cx, cy)
    return _fill(np.sqrt(dx * dx + dy * dy) - r)


def _ring(side, cx, cy, r, w):
    dx, dy = _grid(side, cx, cy)
    return _fill(np.abs(np.sqrt(dx * dx + dy * dy) - r) - w / 2.0)


def _hbar(side, cx, cy, h):
    _, dy = _grid(side, cx, cy)
    return _fill(np.abs(dy) - h / 2.0)


def _vbar(side, cx, cy, w):
    dx, _ = _grid(side, cx, cy)
    return _fill(np.abs(dx) - w / 2.0)


def _cross(side, cx, cy, w):
    dx, dy = _grid(side, cx, cy)
    d = np.minimum(np.abs(dx), np.abs(dy)) - w / 2.0
    return _fill(d)


def sample_image(rng: np.random.Generator, cls: int, side: int = 16) -> np.ndarray:
    """One random training image of the given class, shape (side, side)."""
    if not 0 <= cls < N_CLASSES:
        raise ValueError(f"class index {cls} out of range")
    c = (side - 1) / 2.0
    jitter = 0.08 * side
    cx = c + rng.uniform(-jitter, jitter)
    cy = c + rng.uniform(-jitter, jitter)
    name = CLASSES[cls]
    if name == "disc":
        img = _disc(side, cx, cy, rng.uniform(0.24, 0.36) * side)
    elif name == "ring":
        img = _ring(side, cx, cy, rng.uniform(0.26, 0.36) * side, rng.uniform(0.10, 0.16) * side)
    elif name == "hbar":
        img = _hbar(side, cx, cy, rng.uniform(0.18, 0.30) * side)
    elif name == "vbar":
        img = _vbar(side, cx, cy, rng.uniform(0.18, 0.30) * side)
    else:
        img = _cross(side, cx, cy, rng.uniform(0.14, 0.22) * side)
    return img


def sample_batch(
    rng: np.random.Generator, n: int, side: int = 16, classes: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(images flattened to rows (n, side*side), class labels (n,))."""
    if classes is None:
        classes = rng.integers(0, N_CLASSES, size=n)
    rows = np.stack([sample_image(rng, int(c), side).ravel() for c in classes])
    return rows, np.asarray(classes, dtype=np.int64)


@lru_cache(maxsize=None)
def template_bank(cls: int, side: int = 16) -> np.ndarray:
    """Canonical centered exemplars, shape (k, side, side); used for scoring."""
    c = (side - 1) / 2.0
    name = CLASSES[cls]
    out = []
    for scale in (0.85, 1.0, 1.15):
        if name == "disc":
            out.append(_disc(side, c, c, 0.30 * scale * side))
        elif name == "ring":
            out.append(_ring(side, c, c, 0.31 * scale * side, 0.13 * side))
        elif name == "hbar":
            out.append(_hbar(side, c, c, 0.24 * scale * side))
        elif name == "vbar":
            out.append(_vbar(side, c, c, 0.24 * scale * side))
        else:
            out.append(_cross(side, c, c, 0.18 * scale * side))
    return np.stack(out)
