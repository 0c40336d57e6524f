"""Synthetic verification scenarios behind ``egfc synth`` and ``egfc bench``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List

from .evaluation import RunConfig, measure_latency, run_stream, windowed_accuracy
from .rules import HyperParams
from .synthetic import generate_synthetic, preset


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _run(name: str, params: HyperParams = None, seed: int = 0, **overrides):
    s = generate_synthetic(preset(name, seed=seed, **overrides))
    cfg = RunConfig(params=params or HyperParams(), normalize=False, seed=seed)
    return run_stream(s.X, s.y, cfg, visible=s.visible)


def separable(seed=0) -> List[Check]:
    r = _run("separable4", seed=seed)
    return [Check("separable4", r.final_acc >= 0.90 and r.final_c_avg <= 20,
                  f"Acc={r.final_acc:.4f} (>=0.90) c_avg={r.final_c_avg:.2f} (<=20)")]


def semisupervised(seed=0) -> List[Check]:
    full = _run("separable4", seed=seed)
    part = _run("semisup20", seed=seed)
    gap = full.final_acc - part.final_acc
    return [Check("semisup20", gap <= 0.10,
                  f"Acc={part.final_acc:.4f} vs fully labeled {full.final_acc:.4f} (gap {100 * gap:.1f} pp <= 10)")]


def drift(seed=0) -> List[Check]:
    r = _run("drift", seed=seed)
    dels = [h for h, tr in r.traces if tr.deleted and 1000 < h <= 1400]
    tail = windowed_accuracy(r, 500)
    return [Check("drift", bool(dels) and tail >= 0.85,
                  f"deletions in (1000,1400]: {len(dels)}; final-500 Acc={tail:.4f} (>=0.85)")]


def chance(seed=0) -> List[Check]:
    r = _run("shuffled4", seed=seed)
    return [Check("shuffled-label baseline", abs(r.final_acc - 0.25) <= 0.03,
                  f"Acc={r.final_acc:.4f} (0.25 +/- 0.03)")]


def throughput(seed=0) -> List[Check]:
    r = _run("wide140", seed=seed)
    lat = measure_latency(r)
    return [Check("throughput140", lat["mean"] <= 0.010,
                  f"mean {lat['mean'] * 1e3:.3f} ms/sample, p99 {lat['p99'] * 1e3:.3f} ms over {lat['n']} samples "
                  f"(gate 10 ms)")]


SCENARIOS: Dict[str, Callable[..., List[Check]]] = {
    "separable4": separable,
    "semisup20": semisupervised,
    "drift": drift,
    "shuffled4": chance,
    "wide140": throughput,
}
