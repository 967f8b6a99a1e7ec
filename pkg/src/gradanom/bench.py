"""Wall-clock comparison of the reference and optimized anomaly-map paths."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

from .fields import build_field_stack
from .gamm import GammConfig, generate_joint_map
from .scene import synth_scene

MIN_BENCH_SIZE = 64


@dataclass
class BenchReport:
    size: int
    instances: int
    repeats: int
    ws: list[int]
    reference_s: dict[int, float] = field(default_factory=dict)
    optimized_s: dict[int, float] = field(default_factory=dict)

    @property
    def speedup(self) -> dict[int, float]:
        return {ws: self.reference_s[ws] / self.optimized_s[ws] for ws in self.ws}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reference_s"] = {str(k): v for k, v in self.reference_s.items()}
        d["optimized_s"] = {str(k): v for k, v in self.optimized_s.items()}
        d["speedup"] = {str(k): v for k, v in self.speedup.items()}
        return d


def _best_time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_bench(size: int, ws_list, repeats: int = 3, seed: int = 0) -> BenchReport:
    """Time both paths on a ``size x size`` random-cluster scene (best of ``repeats``)."""
    if size < MIN_BENCH_SIZE:
        raise ValueError(f"benchmark size must be >= {MIN_BENCH_SIZE}, got {size}")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    ws_list = [int(w) for w in ws_list]
    if not ws_list or min(ws_list) < 2:
        raise ValueError("window sizes must be integers >= 2")
    scene = synth_scene("random-cluster", seed, size, size)
    stack = build_field_stack(scene)
    report = BenchReport(size=size, instances=len(scene), repeats=repeats, ws=ws_list)
    for ws in ws_list:
        cfg = GammConfig(ws=ws)
        report.reference_s[ws] = _best_time(lambda: generate_joint_map(stack, cfg, "reference"), repeats)
        report.optimized_s[ws] = _best_time(lambda: generate_joint_map(stack, cfg, "optimized"), repeats)
    return report
