"""Preference objectives, pairwise labels, and the durable label store.

Three programmatic judges score a final image:

  compressibility    negated deflate length of the quantized image — smooth,
                     structured images win
  incompressibility  the exact negation — noisy images win
  shape_fidelity     best normalized cross-correlation against the class's
                     template bank — on-class images win

A label is "a", "b", or "tie" (ties only when the scores are exactly equal).
The store is a directory: an append-only JSONL of label records plus one
container file per pair holding both full chains, so any labeled pair can be
re-opened and retrained on later.
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .checkpoint import read_container, write_container
from .diffusion.sampling import Trajectory, trajectory_from_tensors, trajectory_to_tensors
from .diffusion.shapes import template_bank
from .imaging import quantize_u8

OBJECTIVES = ("compressibility", "incompressibility", "shape_fidelity")


def deflate_size(img: np.ndarray) -> int:
    return len(zlib.compress(quantize_u8(img).tobytes(), 9))


def ncc(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized cross-correlation of two images, in [-1, 1]."""
    av = a.ravel() - a.mean()
    bv = b.ravel() - b.mean()
    na, nb = float(av @ av), float(bv @ bv)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(av @ bv) / np.sqrt(na * nb)


def score_image(objective: str, img: np.ndarray, class_id: int) -> float:
    if objective == "compressibility":
        return -float(deflate_size(img))
    if objective == "incompressibility":
        return float(deflate_size(img))
    if objective == "shape_fidelity":
        return max(ncc(img, t) for t in template_bank(class_id, img.shape[0]))
    raise ValueError(f"unknown objective {objective!r}, expected one of {OBJECTIVES}")


def label_from_objective(
    objective: str, img_a: np.ndarray, img_b: np.ndarray, class_id: int
) -> tuple[str, float, float]:
    """("a" | "b" | "tie", score_a, score_b) under a programmatic judge."""
    sa = score_image(objective, img_a, class_id)
    sb = score_image(objective, img_b, class_id)
    if sa > sb:
        return "a", sa, sb
    if sb > sa:
        return "b", sa, sb
    return "tie", sa, sb


def bt_probability(r_a: float, r_b: float) -> float:
    """P(a preferred over b) under rewards r: logistic in the difference."""
    d = r_a - r_b
    if d >= 0:
        return 1.0 / (1.0 + np.exp(-d))
    e = np.exp(d)
    return e / (1.0 + e)


CHOICES = ("a", "b", "tie")


@dataclass
class LabelRecord:
    pair_id: str
    epoch: int
    class_id: int
    source: str          # "oracle:<objective>" or "human:<session>"
    choice: str          # "a" | "b" | "tie"
    score_a: float | None = None
    score_b: float | None = None
    ts: float = 0.0

    def __post_init__(self):
        if self.choice not in CHOICES:
            raise ValueError(f"choice must be one of {CHOICES}, got {self.choice!r}")


class PrefStore:
    """Durable pair + label storage rooted at a directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.pairs_dir = self.root / "pairs"
        self.pairs_dir.mkdir(parents=True, exist_ok=True)
        self.labels_path = self.root / "labels.jsonl"

    # -- pairs ---------------------------------------------------------------

    def pair_path(self, pair_id: str) -> Path:
        return self.pairs_dir / f"{pair_id}.pair"

    def save_pair(
        self,
        pair_id: str,
        epoch: int,
        traj_a: Trajectory,
        traj_b: Trajectory,
    ) -> None:
        if traj_a.class_id != traj_b.class_id:
            raise ValueError("pair must share a class")
        meta = {
            "pair_id": pair_id,
            "epoch": epoch,
            "class_id": traj_a.class_id,
            "guidance_w": traj_a.guidance_w,
        }
        tensors = [(f"a.{n}", t) for n, t in trajectory_to_tensors(traj_a)]
        tensors += [(f"b.{n}", t) for n, t in trajectory_to_tensors(traj_b)]
        write_container(self.pair_path(pair_id), meta, tensors)

    def load_pair(self, pair_id: str) -> tuple[dict, Trajectory, Trajectory]:
        meta, tensors = read_container(self.pair_path(pair_id))
        side = {k[2:]: v for k, v in tensors.items() if k.startswith("a.")}
        ta = trajectory_from_tensors(meta, side)
        side = {k[2:]: v for k, v in tensors.items() if k.startswith("b.")}
        tb = trajectory_from_tensors(meta, side)
        return meta, ta, tb

    def stored_pair_ids(self) -> list[str]:
        return sorted(p.stem for p in self.pairs_dir.glob("*.pair"))

    # -- labels ----------------------------------------------------------------

    def append_label(self, rec: LabelRecord) -> None:
        if rec.ts == 0.0:
            rec.ts = time.time()
        with self.labels_path.open("a") as f:
            f.write(json.dumps(asdict(rec), sort_keys=True) + "\n")

    def labels(self) -> list[LabelRecord]:
        if not self.labels_path.exists():
            return []
        out = []
        with self.labels_path.open() as f:
            for line in f:
                line = line.strip()
                if line:
                    out.append(LabelRecord(**json.loads(line)))
        return out

    def labeled_ids(self) -> set[str]:
        return {r.pair_id for r in self.labels()}

    def labels_for_epoch(self, epoch: int) -> list[LabelRecord]:
        return [r for r in self.labels() if r.epoch == epoch]
