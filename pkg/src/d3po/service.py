"""Label-collection service: the human-feedback half of the training loop.

A LabelSession owns the policy, a queue of unlabeled pairs, and the durable
preference store.  Labelers pull the oldest unclaimed pair, look at the two
rendered images, and submit a/b/tie; when enough labels have accumulated an
explicit epoch-advance trains on them, rotates the reference policy,
checkpoints, and queues the next epoch's pairs.

Concurrency: every state change serializes through one lock, so any number
of labelers can work the same queue without coordination — a claim marks
the entry and expires back to unclaimed after `claim_timeout` seconds if no
label arrives.  Training holds the "training" status; while it is set, all
mutating calls are rejected as busy (reads still work).

The HTTP layer is a thin JSON adapter over LabelSession; everything is
testable without sockets.
"""

from __future__ import annotations

import base64
import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .checkpoint import save_params
from .config import RunConfig
from .diffusion import CLASSES, Schedule, Trajectory
from .finetune import LabeledPair, advance_reference, finetune_epoch, generate_pair
from .imaging import render_png
from .nd import AdamState, ParamSet
from .preference import CHOICES, LabelRecord, PrefStore, score_image


class ServiceError(Exception):
    """Base for label-session failures; `status` is the HTTP mapping."""

    status = 500


class UnknownPair(ServiceError):
    status = 404


class AlreadyLabeled(ServiceError):
    status = 409


class Busy(ServiceError):
    status = 409


class NotEnoughLabels(ServiceError):
    status = 412


UNCLAIMED, CLAIMED, LABELED = "unclaimed", "claimed", "labeled"


@dataclass
class QueueEntry:
    pair_id: str
    epoch: int
    class_id: int
    traj_a: Trajectory
    traj_b: Trajectory
    score_a: float
    score_b: float
    state: str = UNCLAIMED
    claimed_at: float = 0.0
    choice: str | None = None


class LabelSession:
    """Queue, store, and training state for one human-in-the-loop run."""

    def __init__(
        self,
        theta: ParamSet,
        cfg: RunConfig,
        store: PrefStore,
        out_dir: str | Path | None = None,
        claim_timeout: float = 120.0,
        clock=time.monotonic,
    ):
        self.theta = theta
        self.cfg = cfg
        self.sched = Schedule(cfg.schedule)
        self.store = store
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.claim_timeout = claim_timeout
        self.clock = clock
        self.epoch = 0
        self.entries: dict[str, QueueEntry] = {}
        self.order: list[str] = []
        self.training = False
        self.metrics: list[dict] = []
        self.ref = advance_reference(theta)
        self.opt = AdamState.for_params(theta)
        self._lock = threading.RLock()

    # -- queue -----------------------------------------------------------------

    def _check_idle(self):
        if self.training:
            raise Busy("training in progress")

    def enqueue_epoch_pairs(self, n_pairs: int | None = None) -> int:
        """Sample and spool this epoch's pairs from the current policy."""
        with self._lock:
            self._check_idle()
            exp = self.cfg.experiment
            if n_pairs is None:
                n_pairs = exp.pairs_per_epoch
            self.ref = advance_reference(self.theta)
            scores = []
            for i in range(n_pairs):
                cls = i % self.cfg.model.n_classes
                ta, tb = generate_pair(
                    self.theta, self.cfg.model, self.sched, cls,
                    self.cfg.finetune.guidance_w, exp.master_seed, self.epoch, i,
                )
                pair_id = f"{self.epoch:04d}-{i:04d}"
                sa = score_image(exp.objective, ta.final_image(self.cfg.model.side), cls)
                sb = score_image(exp.objective, tb.final_image(self.cfg.model.side), cls)
                self.store.save_pair(pair_id, self.epoch, ta, tb)
                self.entries[pair_id] = QueueEntry(pair_id, self.epoch, cls, ta, tb, sa, sb)
                self.order.append(pair_id)
                scores.extend((sa, sb))
            if scores:
                self.metrics.append({
                    "epoch": self.epoch,
                    "mean_score": float(np.mean(scores)),
                    "n_pairs": n_pairs,
                })
            return n_pairs

    def _expire_claims(self):
        now = self.clock()
        for e in self.entries.values():
            if e.state == CLAIMED and now - e.claimed_at > self.claim_timeout:
                e.state = UNCLAIMED

    def next_unlabeled(self) -> QueueEntry | None:
        """Claim and return the oldest unclaimed pair of the current epoch."""
        with self._lock:
            self._check_idle()
            self._expire_claims()
            for pid in self.order:
                e = self.entries[pid]
                if e.epoch == self.epoch and e.state == UNCLAIMED:
                    e.state = CLAIMED
                    e.claimed_at = self.clock()
                    return e
            return None

    def submit_label(self, pair_id: str, choice: str, source: str = "human") -> int:
        """Record one label; returns the number of unlabeled pairs left."""
        if choice not in CHOICES:
            raise ValueError(f"choice must be one of {CHOICES}")
        with self._lock:
            self._check_idle()
            e = self.entries.get(pair_id)
            if e is None:
                raise UnknownPair(pair_id)
            if e.state == LABELED:
                raise AlreadyLabeled(pair_id)
            self.store.append_label(LabelRecord(
                pair_id=pair_id, epoch=e.epoch, class_id=e.class_id,
                source=source, choice=choice, score_a=e.score_a, score_b=e.score_b,
            ))
            e.state = LABELED
            e.choice = choice
            return self._remaining()

    def _remaining(self) -> int:
        return sum(
            1 for e in self.entries.values()
            if e.epoch == self.epoch and e.state != LABELED
        )

    # -- training ----------------------------------------------------------------

    def advance_epoch(self) -> dict:
        """Train on this epoch's labels, checkpoint, and queue the next epoch."""
        with self._lock:
            self._check_idle()
            labeled = [
                e for e in self.entries.values()
                if e.epoch == self.epoch and e.state == LABELED
            ]
            need = self.cfg.experiment.min_labels_per_epoch
            if len(labeled) < need:
                raise NotEnoughLabels(f"{len(labeled)} labeled, need {need}")
            self.training = True
        try:
            pairs = [
                LabeledPair(e.pair_id, e.traj_a, e.traj_b, e.choice) for e in labeled
            ]
            stats = finetune_epoch(
                self.theta, self.ref, self.cfg.model, self.sched,
                pairs, self.cfg.finetune, self.opt,
            )
        finally:
            with self._lock:
                self.training = False
        with self._lock:
            if self.out_dir is not None:
                self.out_dir.mkdir(parents=True, exist_ok=True)
                save_params(
                    self.out_dir / f"epoch_{self.epoch:04d}.ckpt", self.theta,
                    meta={"epoch": self.epoch, "kind": "finetuned"},
                )
            if self.metrics and self.metrics[-1]["epoch"] == self.epoch:
                self.metrics[-1].update(stats.as_dict())
            self.epoch += 1
            self.enqueue_epoch_pairs()
        return stats.as_dict()

    # -- snapshots ---------------------------------------------------------------

    def session_state(self) -> dict:
        with self._lock:
            self._expire_claims()
            cur = [e for e in self.entries.values() if e.epoch == self.epoch]
            return {
                "epoch": self.epoch,
                "queued": sum(1 for e in cur if e.state == UNCLAIMED),
                "claimed": sum(1 for e in cur if e.state == CLAIMED),
                "labeled": sum(1 for e in cur if e.state == LABELED),
                "ties": sum(1 for e in cur if e.choice == "tie"),
                "min_labels": self.cfg.experiment.min_labels_per_epoch,
                "status": "training" if self.training else "idle",
            }

    def metrics_snapshot(self) -> dict:
        with self._lock:
            return {"epochs": list(self.metrics), "total_labels": len(self.store.labeled_ids())}

    def pair_payload(self, e: QueueEntry) -> dict:
        side = self.cfg.model.side
        return {
            "pair_id": e.pair_id,
            "class": CLASSES[e.class_id],
            "epoch": e.epoch,
            "image_a": base64.b64encode(render_png(e.traj_a.final_image(side))).decode(),
            "image_b": base64.b64encode(render_png(e.traj_b.final_image(side))).decode(),
        }

    @classmethod
    def restore(cls, theta: ParamSet, cfg: RunConfig, store: PrefStore, **kw) -> "LabelSession":
        """Rebuild queue state from the store after a restart.

        The store is the event log: spooled pairs define the queue, labels
        mark entries labeled, and the session resumes at the highest epoch
        found (labeled claims are simply lost, which the timeout would have
        reclaimed anyway).
        """
        sess = cls(theta, cfg, store, **kw)
        ids = store.stored_pair_ids()
        if not ids:
            return sess
        labeled = {r.pair_id: r for r in store.labels()}
        side = cfg.model.side
        top_epoch = 0
        for pid in ids:
            meta, ta, tb = store.load_pair(pid)
            cls_id = int(meta["class_id"])
            sa = score_image(cfg.experiment.objective, ta.final_image(side), cls_id)
            sb = score_image(cfg.experiment.objective, tb.final_image(side), cls_id)
            e = QueueEntry(pid, int(meta["epoch"]), cls_id, ta, tb, sa, sb)
            rec = labeled.get(pid)
            if rec is not None:
                e.state = LABELED
                e.choice = rec.choice
            sess.entries[pid] = e
            sess.order.append(pid)
            top_epoch = max(top_epoch, int(meta["epoch"]))
        sess.epoch = top_epoch
        return sess


# -- HTTP adapter -----------------------------------------------------------------


def _handler_for(session: LabelSession):
    class Handler(BaseHTTPRequestHandler):
        def _send(self, status: int, payload: dict):
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(body)

        def _read_json(self) -> dict:
            n = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(n) if n else b"{}"
            return json.loads(raw or b"{}")

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()

        def do_GET(self):
            try:
                if self.path == "/api/pairs/next":
                    entry = session.next_unlabeled()
                    if entry is None:
                        self.send_response(204)
                        self.send_header("Access-Control-Allow-Origin", "*")
                        self.end_headers()
                        return
                    self._send(200, session.pair_payload(entry))
                elif self.path == "/api/metrics":
                    self._send(200, session.metrics_snapshot())
                elif self.path == "/api/session":
                    self._send(200, session.session_state())
                else:
                    self._send(404, {"error": f"no route {self.path}"})
            except ServiceError as exc:
                self._send(exc.status, {"error": str(exc)})

        def do_POST(self):
            try:
                if self.path == "/api/labels":
                    body = self._read_json()
                    remaining = session.submit_label(
                        str(body["pair_id"]), str(body["choice"]),
                        source=str(body.get("source", "human")),
                    )
                    self._send(200, {"remaining": remaining})
                elif self.path == "/api/epoch/advance":
                    self._send(200, session.advance_epoch())
                else:
                    self._send(404, {"error": f"no route {self.path}"})
            except ServiceError as exc:
                self._send(exc.status, {"error": str(exc)})
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                self._send(400, {"error": str(exc)})

        def log_message(self, *args):  # quiet by default
            pass

    return Handler


def make_server(session: LabelSession, port: int = 8080) -> ThreadingHTTPServer:
    return ThreadingHTTPServer(("127.0.0.1", port), _handler_for(session))


def serve_forever(session: LabelSession, port: int = 8080):
    server = make_server(session, port)
    print(f"labeling service on http://127.0.0.1:{port}  (Ctrl-C stops)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
