"""Operator command line.

Subcommands
-----------
pretrain   train the toy denoiser and write a checkpoint
sample     draw images from a checkpoint and write PNGs
finetune   oracle-judged preference fine-tuning loop
serve      launch the human-labeling HTTP service
verify     run the numerical verification suite and write a report
eval       score fresh samples under an objective and print statistics

Configuration precedence, lowest to highest: built-in defaults, the
--config file, repeated --set path=value overrides, then dedicated flags
(--seed, --epochs, ...), which are applied last.  Commands that read a
checkpoint fall back to the config embedded in it before the defaults.
Every command that writes artifacts drops the resolved configuration as
config.json next to them, and reruns with the same configuration produce
byte-identical artifacts.

The output root is $D3PO_HOME, defaulting to ./runs.  Exit codes: 0 on
success, 1 on runtime failure, 2 on bad usage or malformed configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointError, load_params, save_params
from .config import RunConfig, apply_overrides
from .diffusion import CLASSES, Schedule, class_id, sample_trajectory
from .imaging import render_png
from .loop import (
    build_pretrained,
    gradient_fidelity_report,
    oracle_finetune_run,
)
from .preference import OBJECTIVES, PrefStore, score_image
from .service import LabelSession, make_server
from .theory import verify_noisy_labels, verify_optimal_policy


class UsageError(Exception):
    """Bad command line or malformed configuration: exit code 2."""


def home_dir() -> Path:
    return Path(os.environ.get("D3PO_HOME", "runs"))


# --------------------------------------------------------------------------
# configuration resolution


_FLAG_PATHS = {
    "seed": "experiment.master_seed",
    "steps": "pretrain.n_steps",
    "objective": "experiment.objective",
    "epochs": "experiment.n_epochs",
    "pairs_per_epoch": "experiment.pairs_per_epoch",
    "guidance": "finetune.guidance_w",
    "min_labeled": "experiment.min_labels_per_epoch",
    "monitor_objective": "experiment.objective",
}


def resolve_config(args: argparse.Namespace, embedded: dict | None = None) -> RunConfig:
    """Defaults <- checkpoint-embedded config <- --config file <- --set <- flags."""
    try:
        if getattr(args, "config", None):
            cfg = RunConfig.load_json(args.config)
        elif embedded:
            cfg = RunConfig.from_dict(embedded)
        else:
            cfg = RunConfig()
        overrides = list(getattr(args, "set", None) or [])
        for flag, path in _FLAG_PATHS.items():
            value = getattr(args, flag, None)
            if value is not None:
                overrides.append(f"{path}={value}")
        return apply_overrides(cfg, overrides)
    except FileNotFoundError as e:
        raise UsageError(f"config file not found: {e.filename}") from e
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as e:
        raise UsageError(f"malformed configuration: {e}") from e


def prepare_out(args: argparse.Namespace, default_leaf: str, cfg: RunConfig) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else home_dir() / default_leaf
    out.mkdir(parents=True, exist_ok=True)
    cfg.save_json(out / "config.json")
    return out


def load_checkpoint(args: argparse.Namespace) -> tuple:
    path = Path(args.ckpt) if args.ckpt else home_dir() / "pretrain" / "model.ckpt"
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    params, meta = load_params(path)
    return params, meta, path


def _progress(prefix: str):
    def cb(step: int, value: float):
        print(f"{prefix} {step}: {value:.6g}", flush=True)

    return cb


# --------------------------------------------------------------------------
# subcommands


def cmd_pretrain(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = prepare_out(args, "pretrain", cfg)
    params, history = build_pretrained(cfg, progress=_progress("pretrain step"))
    save_params(out / "model.ckpt", params,
                {"kind": "pretrained", "config": cfg.to_dict()})
    (out / "loss.json").write_text(json.dumps(history, indent=0) + "\n")
    print(f"pretrained {cfg.pretrain.n_steps} steps, final window loss "
          f"{history[-1]:.6g}; checkpoint at {out / 'model.ckpt'}")
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    params, meta, _ = load_checkpoint(args)
    cfg = resolve_config(args, embedded=meta.get("config"))
    cls = class_id(args.class_name)
    out = prepare_out(args, "samples", cfg)
    sched = Schedule(cfg.schedule)
    master = cfg.experiment.master_seed
    w = cfg.finetune.guidance_w
    for i in range(args.count):
        traj = sample_trajectory(params, cfg.model, sched, cls, w, master, "sample", i)
        png = render_png(traj.final_image(cfg.model.side), scale=8)
        (out / f"{args.class_name}_{i:03d}.png").write_bytes(png)
    print(f"wrote {args.count} {args.class_name} sample(s) to {out} "
          f"(seed {master}, guidance {w})")
    return 0


def cmd_finetune(args: argparse.Namespace) -> int:
    params, meta, src_path = load_checkpoint(args)
    cfg = resolve_config(args, embedded=meta.get("config"))
    out = prepare_out(args, "finetune", cfg)
    dest = out / "model.ckpt"
    if cfg.experiment.n_epochs == 0:
        # A zero-epoch run trains nothing; the output container is the
        # input container, byte for byte.
        dest.write_bytes(src_path.read_bytes())
        print(f"0 epochs requested; copied {src_path} to {dest} unchanged")
        return 0

    def progress(record):
        print(f"epoch {record.epoch}: mean {cfg.experiment.objective} score "
              f"{record.mean_score:.4f}", flush=True)

    result = oracle_finetune_run(params, cfg, progress=progress)
    save_params(dest, result.params,
                {"kind": "finetuned", "objective": cfg.experiment.objective,
                 "config": cfg.to_dict()})
    (out / "history.json").write_text(
        json.dumps([r.as_dict() for r in result.records], indent=1) + "\n")
    print(f"fine-tuned {cfg.experiment.n_epochs} epochs on "
          f"{cfg.experiment.objective}: mean score "
          f"{result.pretrain_score:.4f} -> {result.final_score:.4f}; "
          f"checkpoint at {dest}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    params, meta, _ = load_checkpoint(args)
    cfg = resolve_config(args, embedded=meta.get("config"))
    out = prepare_out(args, "serve", cfg)
    store = PrefStore(out / "labels")
    kw = {"out_dir": out, "claim_timeout": args.claim_timeout_secs}
    if store.stored_pair_ids():
        session = LabelSession.restore(params, cfg, store, **kw)
        print(f"restored session at epoch {session.epoch} "
              f"({len(store.labels())} labels on record)")
    else:
        session = LabelSession(params, cfg, store, **kw)
        session.enqueue_epoch_pairs()
    server = make_server(session, port=args.port)
    host, port = server.server_address[:2]
    print(f"labeling service on http://{host}:{port}/ "
          f"(epoch {session.epoch}, {cfg.experiment.pairs_per_epoch} pairs/epoch, "
          f"min {cfg.experiment.min_labels_per_epoch} labels to advance)", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        print("shutting down")
    finally:
        server.server_close()
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    reports = [
        verify_optimal_policy(),
        verify_noisy_labels(),
        gradient_fidelity_report(),
    ]
    all_pass = all(r.passed for r in reports)
    blocks = []
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        body = "\n".join(f"  {ln}" for ln in r.lines)
        blocks.append(f"check={r.name}\nstatus={status}\n{body}")
    text = "\n\n".join(blocks) + f"\n\noverall={'PASS' if all_pass else 'FAIL'}\n"
    report_path = Path(args.report) if args.report else home_dir() / "verify" / "report.txt"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(text)
    print(text, end="")
    print(f"report written to {report_path}")
    return 0 if all_pass else 1


def cmd_eval(args: argparse.Namespace) -> int:
    params, meta, _ = load_checkpoint(args)
    cfg = resolve_config(args, embedded=meta.get("config"))
    objective = cfg.experiment.objective
    sched = Schedule(cfg.schedule)
    master = cfg.experiment.master_seed
    w = cfg.finetune.guidance_w
    per_class: dict[str, list[float]] = {name: [] for name in CLASSES}
    for i in range(args.count):
        cls = i % cfg.model.n_classes
        traj = sample_trajectory(params, cfg.model, sched, cls, w, master, "cli-eval", i)
        score = score_image(objective, traj.final_image(cfg.model.side), cls)
        per_class[CLASSES[cls]].append(score)
    print(f"objective={objective} n={args.count} seed={master} guidance={w}")
    for name, vals in per_class.items():
        if not vals:
            continue
        a = np.asarray(vals)
        print(f"  class={name} n={len(vals)} mean={a.mean():.4f} "
              f"std={a.std():.4f} min={a.min():.4f} max={a.max():.4f}")
    allv = np.asarray([v for vals in per_class.values() for v in vals])
    print(f"  overall n={len(allv)} mean={allv.mean():.4f} std={allv.std():.4f}")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d3po",
        description="Preference fine-tuning of a toy diffusion model, "
                    "with its numerical verification suite.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p: argparse.ArgumentParser, out_leaf: str | None = None):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="PATH=VALUE",
                       help="config override, e.g. finetune.beta=0.05 (repeatable)")
        if out_leaf:
            p.add_argument("--out", help=f"output directory "
                                         f"(default $D3PO_HOME/{out_leaf})")

    p = sub.add_parser("pretrain", help="train the toy denoiser")
    common(p, "pretrain")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--steps", type=int, help="optimizer steps")
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("sample", help="write PNG samples from a checkpoint")
    common(p, "samples")
    p.add_argument("--ckpt", help="model checkpoint "
                                  "(default $D3PO_HOME/pretrain/model.ckpt)")
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--class", dest="class_name", default="disc", choices=CLASSES)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--guidance", type=float, help="guidance strength")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("finetune", help="oracle-judged preference fine-tuning")
    common(p, "finetune")
    p.add_argument("--ckpt", help="starting checkpoint "
                                  "(default $D3PO_HOME/pretrain/model.ckpt)")
    p.add_argument("--objective", choices=OBJECTIVES)
    p.add_argument("--epochs", type=int)
    p.add_argument("--pairs-per-epoch", type=int, dest="pairs_per_epoch")
    p.add_argument("--seed", type=int, help="master seed")
    p.set_defaults(fn=cmd_finetune)

    p = sub.add_parser("serve", help="launch the labeling service")
    common(p, "serve")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--ckpt", help="starting checkpoint "
                                  "(default $D3PO_HOME/pretrain/model.ckpt)")
    p.add_argument("--pairs-per-epoch", type=int, dest="pairs_per_epoch")
    p.add_argument("--min-labeled", type=int, dest="min_labeled")
    p.add_argument("--claim-timeout-secs", type=float, default=120.0)
    p.add_argument("--monitor-objective", choices=OBJECTIVES,
                   dest="monitor_objective")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--report", help="report path "
                                    "(default $D3PO_HOME/verify/report.txt)")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("eval", help="score fresh samples under an objective")
    common(p)
    p.add_argument("--ckpt", help="model checkpoint "
                                  "(default $D3PO_HOME/pretrain/model.ckpt)")
    p.add_argument("--objective", choices=OBJECTIVES)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--guidance", type=float, help="guidance strength")
    p.set_defaults(fn=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "fn", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.fn(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"d3po: error: {e}", file=sys.stderr)
        return 2
    except (CheckpointError, FileNotFoundError, OSError, RuntimeError) as e:
        print(f"d3po: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
