"""Shared fixtures and the acceptance-criteria report.

Heavy artifacts (the full-size pretrained model, fine-tuning runs used by
the acceptance suite) are cached on disk under $D3PO_TEST_CACHE (default:
<repo>/.testcache), keyed by a digest of the exact configuration, so
iterating on tests does not repeat half-hour experiments.  Delete the
cache directory to force everything to be recomputed from scratch.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import pytest

from d3po.checkpoint import load_params, save_params
from d3po.config import RunConfig
from d3po.loop import build_pretrained
from d3po.nd import ParamSet


def cache_root() -> Path:
    env = os.environ.get("D3PO_TEST_CACHE")
    return Path(env) if env else Path(__file__).resolve().parent.parent / ".testcache"


def config_digest(cfg: RunConfig, *extra: object) -> str:
    payload = json.dumps([cfg.to_dict(), *extra], sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def cached_params(key: str, build) -> ParamSet:
    """Fetch a ParamSet checkpoint from the cache, building it on a miss."""
    path = cache_root() / f"{key}.ckpt"
    if path.exists():
        params, _ = load_params(path)
        return params
    params = build()
    path.parent.mkdir(parents=True, exist_ok=True)
    save_params(path, params, {"kind": "test-cache", "key": key})
    return params


def cached_json(key: str, build) -> dict:
    """Fetch a JSON-serializable result from the cache, building on a miss."""
    path = cache_root() / f"{key}.json"
    if path.exists():
        return json.loads(path.read_text())
    result = build()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result, indent=1, sort_keys=True) + "\n")
    return result


@pytest.fixture(scope="session")
def default_config() -> RunConfig:
    return RunConfig()


@pytest.fixture(scope="session")
def pretrained_default(default_config) -> ParamSet:
    """The full-size pretrained model every acceptance experiment starts from."""
    key = f"pretrained-{config_digest(default_config)}"
    return cached_params(key, lambda: build_pretrained(default_config)[0])


# --------------------------------------------------------------------------
# acceptance-criteria reporting: one visible pass/fail line per criterion


_ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    _ACCEPTANCE_LINES.append((name, ok, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE_LINES:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}: {detail}")
