"""Timing comparison of the compiled and numpy kernel backends.

Two views:

* micro: each hot kernel op timed directly against both backend modules at
  the shapes the training loop actually uses;
* end-to-end: trajectory sampling and one preference-training step, run in
  a subprocess per backend with D3PO_KERNELS forcing the selection, which is
  exactly how a user switches backends.

Usage: python benchmarks/kernel_bench.py [--repeats N] [--macro-chains N]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from d3po.kernels import _fallback

try:
    from d3po.kernels import _compiled
except ImportError:
    _compiled = None


def best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def micro_cases():
    """(name, arg-builder) for each kernel at training-loop shapes."""
    rng = np.random.default_rng(0)
    B, D, H = 128, 256, 128
    x = rng.standard_normal((B, D))
    w = rng.standard_normal((D, H))
    h = rng.standard_normal((B, H))
    g = rng.standard_normal((B, H))
    b = rng.standard_normal(H)
    t = rng.standard_normal((B, D))
    y = np.tanh(h)
    table = rng.standard_normal((21, 40))
    idx = rng.integers(0, 21, B)
    p = rng.standard_normal(D * H)
    pg = rng.standard_normal(D * H)
    m = np.zeros(D * H)
    v = np.zeros(D * H)
    return [
        ("matmul 128x256 @ 256x128", lambda k: k.matmul(x, w)),
        ("matmul_nt 128x128 @ (256x128)^T", lambda k: k.matmul_nt(g, w)),
        ("matmul_tn (128x256)^T @ 128x128", lambda k: k.matmul_tn(x, g)),
        ("add_rowvec 128x128", lambda k: k.add_rowvec(h, b)),
        ("colsum 128x128", lambda k: k.colsum(h)),
        ("tanh_fwd 128x128", lambda k: k.tanh_fwd(h)),
        ("tanh_bwd 128x128", lambda k: k.tanh_bwd(y, g)),
        ("sqsum 128x256", lambda k: k.sqsum(x)),
        ("sqsum_diff 128x256", lambda k: k.sqsum_diff(x, t)),
        ("sqsum_diff_bwd 128x256", lambda k: k.sqsum_diff_bwd(x, t, 2.0)),
        ("lincomb 128x256", lambda k: k.lincomb(0.3, x, 0.7, t)),
        ("gather_rows 128 of 21x40", lambda k: k.gather_rows(table, idx)),
        ("adam_update 32k params", lambda k: k.adam_update(
            p.copy(), pg, m.copy(), v.copy(),
            3e-5, 0.9, 0.999, 1e-8, 1.0, 1.0, 1e-4)),
    ]


def run_micro(repeats: int) -> None:
    backends = [("numpy", _fallback)]
    if _compiled is not None:
        backends.append(("compiled", _compiled))
    names = [n for n, _ in backends]
    print(f"micro kernels, best of {repeats} (microseconds)")
    header = f"{'op':36s}" + "".join(f"{n:>12s}" for n in names)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    print("-" * len(header))
    for name, call in micro_cases():
        times = [best_of(lambda k=kernel: call(k), repeats) for _, kernel in backends]
        row = f"{name:36s}" + "".join(f"{t * 1e6:12.1f}" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"{times[0] / times[1]:9.2f}x"
        print(row)


MACRO_SNIPPET = r"""
import time
import numpy as np
from d3po.config import RunConfig
from d3po.diffusion import Schedule, init_model
from d3po.diffusion import sample_trajectory
from d3po.finetune import LabeledPair, advance_reference, finetune_epoch, generate_pair
from d3po.nd import AdamState
from d3po.kernels import BACKEND

cfg = RunConfig()
sched = Schedule(cfg.schedule)
params = init_model(np.random.default_rng(0), cfg.model)

n = {chains}
t0 = time.perf_counter()
trajs = [sample_trajectory(params, cfg.model, sched, i % 5, 5.0, 1, "bench", i)
         for i in range(n)]
t_sample = time.perf_counter() - t0

pairs = [LabeledPair(str(i), *generate_pair(params, cfg.model, sched, i % 5,
                                            5.0, 2, 0, i), "a")
         for i in range(4)]
ref = advance_reference(params)
opt = AdamState.for_params(params)
t0 = time.perf_counter()
finetune_epoch(params, ref, cfg.model, sched, pairs, cfg.finetune, opt)
t_train = time.perf_counter() - t0
print(f"{{BACKEND}}: sample {{n}} chains {{t_sample:.3f}}s "
      f"({{t_sample / n * 1000:.1f}} ms/chain), "
      f"4-pair training epoch {{t_train:.3f}}s")
"""


def run_macro(chains: int) -> None:
    print(f"\nend-to-end (subprocess per backend, {chains} sampled chains)")
    code = MACRO_SNIPPET.format(chains=chains)
    for backend in ("numpy", "compiled"):
        env = dict(os.environ, D3PO_KERNELS=backend)
        proc = subprocess.run([sys.executable, "-c", code], env=env,
                              capture_output=True, text=True)
        if proc.returncode != 0:
            msg = proc.stderr.strip().splitlines()
            print(f"{backend}: unavailable ({msg[-1] if msg else 'failed'})")
        else:
            print(proc.stdout, end="")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200)
    ap.add_argument("--macro-chains", type=int, default=16)
    args = ap.parse_args()
    if _compiled is None:
        print("note: compiled extension not built; micro table shows numpy only")
    run_micro(args.repeats)
    run_macro(args.macro_chains)
    return 0


if __name__ == "__main__":
    sys.exit(main())
