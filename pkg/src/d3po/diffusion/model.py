"""Conditional noise-prediction network.

A tanh MLP over [flattened image | sinusoidal time features | learned class
embedding], wrapped in an analytic skip: the MLP output m is read as a
denoised-image residual, x0_hat = sqrt(abar_t)*x_t + m, and converted to a
noise prediction

    eps_hat = sqrt(1-abar_t)*x_t - (sqrt(abar_t)/sqrt(1-abar_t))*m.

The skip matters: at high t the optimal eps is nearly x_t itself, an
identity map a narrow MLP cannot represent, while the residual the MLP must
actually learn is low-frequency image structure at every t.

The class table has one extra row — the null class — enabling classifier-
free guidance: eps_hat = (1+w)*eps(cond) - w*eps(null); the skip term is
identical in both rows, so it passes through the mix unchanged.

All forwards run through the tape module; passing tape=None gives the
inference path, which is bitwise identical to the training path because it
is the same code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..nd import ParamSet, Tape, init_mlp, mlp_forward
from ..nd.tape import Node
from .shapes import N_CLASSES


@dataclass(frozen=True)
class ModelConfig:
    side: int = 16
    time_dim: int = 32
    class_dim: int = 16
    hidden: tuple[int, ...] = (128, 128)
    n_classes: int = N_CLASSES

    @property
    def dim(self) -> int:
        return self.side * self.side

    @property
    def null_class(self) -> int:
        return self.n_classes

    @property
    def input_dim(self) -> int:
        return self.dim + self.time_dim + self.class_dim

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "time_dim": self.time_dim,
            "class_dim": self.class_dim,
            "hidden": list(self.hidden),
            "n_classes": self.n_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["hidden"] = tuple(d["hidden"])
        return cls(**d)


def init_model(rng: np.random.Generator, cfg: ModelConfig) -> ParamSet:
    sizes = [cfg.input_dim, *cfg.hidden, cfg.dim]
    params = init_mlp(rng, sizes)
    cemb = rng.normal(0.0, 0.5, size=(cfg.n_classes + 1, cfg.class_dim))
    from ..nd import Tensor

    params.add("cemb", Tensor(cemb))
    return params


@lru_cache(maxsize=None)
def _time_table(n_steps: int, dim: int) -> np.ndarray:
    """Sinusoidal features for t = 0..n_steps, shape (n_steps+1, dim)."""
    if dim % 2:
        raise ValueError("time_dim must be even")
    t = np.arange(n_steps + 1, dtype=np.float64)[:, None]
    k = np.arange(dim // 2, dtype=np.float64)[None, :]
    freq = np.exp(-np.log(10000.0) * (2.0 * k / dim))
    ang = t * freq
    table = np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
    table.setflags(write=False)
    return table


def time_features(t: np.ndarray, n_steps: int, dim: int) -> np.ndarray:
    return _time_table(n_steps, dim)[np.asarray(t, dtype=np.int64)]


def denoiser_rows(
    params: ParamSet,
    cfg: ModelConfig,
    x_rows: np.ndarray,
    t: np.ndarray,
    c: np.ndarray,
    sched,
    tape: Tape | None,
):
    """Predict noise for a batch of rows; per-row time and class indices.

    Valid for diffusion times t in 1..T.  Returns a Node when taped, else a
    plain (B, dim) array.
    """
    x_rows = np.asarray(x_rows, dtype=np.float64)
    c = np.asarray(c, dtype=np.int64)
    if np.any(c < 0) or np.any(c > cfg.n_classes):
        raise ValueError("class index out of range (null class is n_classes)")
    ti = np.asarray(t, dtype=np.int64)
    temb = time_features(ti, sched.T, cfg.time_dim)
    tp = tape if tape is not None else Tape()
    emb = tp.gather(tp.param("cemb", params["cemb"].data), c)
    h = tp.concat_cols([x_rows, temb, emb])
    m = mlp_forward(params, h, tp)
    eps = tp.lincomb(
        sched.sqrt_1mab[ti], x_rows, -sched.sqrt_ab[ti] / sched.sqrt_1mab[ti], m
    )
    return eps if tape is not None else eps.val


def guided_eps(
    params: ParamSet,
    cfg: ModelConfig,
    x_row: np.ndarray,
    t: int,
    c: int,
    w: float,
    sched,
    tape: Tape | None,
):
    """Classifier-free-guided noise prediction for a single state.

    Runs one denoiser forward (two rows when w != 0: conditional and null)
    and mixes them as (1+w)*cond - w*null.  Returns shape (1, dim).
    """
    x_row = np.asarray(x_row, dtype=np.float64).reshape(1, -1)
    if w == 0.0:
        return denoiser_rows(params, cfg, x_row, np.array([t]), np.array([c]), sched, tape)
    x2 = np.vstack([x_row, x_row])
    tt = np.array([t, t])
    cc = np.array([c, cfg.null_class])
    tp = tape if tape is not None else Tape()
    both = denoiser_rows(params, cfg, x2, tt, cc, sched, tp)
    mixed = _mix_rows(tp, both, w)
    return mixed if tape is not None else mixed.val


def _mix_rows(tape: Tape, both: Node, w: float) -> Node:
    """(1+w)*row0 - w*row1 of a (2, dim) node, as a (1, dim) node."""
    v = both.val
    y = np.ascontiguousarray((1.0 + w) * v[0:1] - w * v[1:2])

    def back(g, w=w, dim=v.shape[1]):
        out = np.empty((2, dim))
        out[0] = (1.0 + w) * g[0]
        out[1] = -w * g[0]
        return out

    return tape._push(y, [(both, back)])
