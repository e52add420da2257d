"""Backend benchmark: compiled kernels vs interpreted fallback.

Runs the same seeded scenario under the active backend, then re-executes it
in a subprocess with the backend flipped via SERENE_NUMBA, compares wall
time and checks that both traces hash identically.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import time

from ._backend import USING_NUMBA
from .config import ScenarioConfig
from .engine import run
from .trace import trace_digest

__all__ = ["run_bench", "measure"]


def _bench_config(sim_end: float) -> ScenarioConfig:
    return ScenarioConfig(sim_end=sim_end, collusion_start_window=(1.0, min(3.0, sim_end)))


def measure(sim_end: float, seed: int) -> dict:
    """One warm-up plus one timed run; returns timing and a trace digest."""
    cfg = _bench_config(sim_end)
    run(cfg, "serene", seed=seed)  # warm-up (JIT compile / cache load)
    t0 = time.perf_counter()
    trace = run(cfg, "serene", seed=seed)
    wall = time.perf_counter() - t0
    return {
        "backend": "numba" if USING_NUMBA else "python",
        "wall_seconds": wall,
        "digest": trace_digest(trace),
        "simulated_seconds": trace.end_time,
        "tasks": trace.generated_tasks,
    }


def run_bench(sim_end: float = 5.0, seed: int = 1, compare: bool = True) -> int:
    mine = measure(sim_end, seed)
    print(f"{mine['backend']:>6} backend: {mine['wall_seconds']*1000:8.1f} ms "
          f"({mine['tasks']} tasks, {mine['simulated_seconds']:.2f}s simulated)")
    if not compare:
        print(f"digest: {mine['digest'][:16]}")
        return 0

    env = dict(os.environ)
    env["SERENE_NUMBA"] = "0" if USING_NUMBA else "1"
    code = (
        "import json;from serene.bench import measure;"
        f"print(json.dumps(measure({sim_end!r}, {seed!r})))"
    )
    try:
        proc = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
        )
        other = json.loads(proc.stdout.strip().splitlines()[-1])
    except (subprocess.CalledProcessError, json.JSONDecodeError) as exc:
        print(f"could not run flipped backend: {exc}", file=sys.stderr)
        return 2

    print(f"{other['backend']:>6} backend: {other['wall_seconds']*1000:8.1f} ms")
    slow, fast = sorted((mine, other), key=lambda m: -m["wall_seconds"])
    if fast["wall_seconds"] > 0:
        print(f"speedup: {slow['wall_seconds'] / fast['wall_seconds']:.1f}x ({fast['backend']} faster)")
    same = mine["digest"] == other["digest"]
    print(f"traces identical: {same}")
    return 0 if same else 1
