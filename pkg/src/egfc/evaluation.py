"""Train-after-test stream evaluation and the single/multi-channel experiments."""

from __future__ import annotations

import logging
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .features import MinMaxNormalizer
from .granule import InvalidInputError, create_granule
from .ranking import hemisphere, leave_n_out_schedule, rank_features
from .rules import HyperParams, RuleBase, StepTrace

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    window_seconds: float = 10.0
    channels: Optional[List[str]] = None
    features: Optional[List[int]] = None
    params: HyperParams = field(default_factory=HyperParams)
    label_delay: Optional[int] = 0  # None: labels never delivered
    normalize: bool = True
    n_out: int = 5
    calibration_fraction: float = 1.0  # stream prefix used for feature ranking
    record_digest: bool = True
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        params = HyperParams(**(d.pop("params", None) or {}))
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(params=params, **d)
        if cfg.label_delay is not None and cfg.label_delay < 0:
            raise InvalidInputError("label_delay must be >= 0 or null")
        if not 0 < cfg.calibration_fraction <= 1:
            raise InvalidInputError("calibration_fraction must be in (0, 1]")
        return cfg


@dataclass
class StepRecord:
    h: int
    estimate: Optional[int]
    truth: int
    correct: bool
    acc: float
    c: int
    c_avg: float
    rho: float
    latency: float  # seconds, classify + learning done at this step
    digest: str = ""  # model state the estimate was computed from
    events: List[str] = field(default_factory=list)


@dataclass
class EvalReport:
    records: List[StepRecord]
    traces: List[Tuple[int, StepTrace]]  # (stream step, learner trace)
    final_acc: float
    final_c_avg: float
    cpu_time: float  # classifier processing only
    prep_time: float  # normalization, excluded from cpu_time
    rejected: int = 0
    config: Optional[dict] = None
    model: Optional[RuleBase] = field(default=None, repr=False)

    def __len__(self):
        return len(self.records)

    def summary(self) -> dict:
        lat = measure_latency(self)
        return {
            "samples": len(self.records),
            "acc": self.final_acc,
            "c_avg": self.final_c_avg,
            "cpu_time_s": self.cpu_time,
            "prep_time_s": self.prep_time,
            "latency_mean_ms": lat["mean"] * 1e3,
            "latency_p99_ms": lat["p99"] * 1e3,
            "rejected": self.rejected,
            "final_c": self.records[-1].c if self.records else 0,
        }


def recursive_accuracy(acc_old: float, h: int, tau: int) -> float:
    return ((h - 1) / h) * acc_old + (1.0 / h) * tau


def recursive_compactness(c_avg_old: float, h: int, c_now: int) -> float:
    return ((h - 1) / h) * c_avg_old + (1.0 / h) * c_now


def _label(v):
    return v.item() if isinstance(v, np.generic) else v


def run_stream(X, y, config: Optional[RunConfig] = None, visible=None, model: Optional[RuleBase] = None,
               timestamps=None) -> EvalReport:
    """Classify each sample, score it, then learn from it.

    A sample whose label is visible is learned in a supervised step once its
    label arrives (``config.label_delay`` steps later, after that step's
    estimate); hidden labels, or ``label_delay=None``, give an immediate
    unsupervised step. Labels still pending at the end are flushed.
    """
    config = config or RunConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    m, dim = X.shape
    if len(y) != m:
        raise InvalidInputError("X and y lengths differ")
    if visible is None:
        visible = np.ones(m, dtype=bool)
    if timestamps is not None:
        ts = np.asarray(timestamps)
        if np.any(np.diff(ts) <= 0):
            raise InvalidInputError("timestamps must be strictly increasing")
    model = model if model is not None else RuleBase(dim, config.params)
    norm = MinMaxNormalizer(dim) if config.normalize else None
    delay = config.label_delay

    pending: deque = deque()
    records: List[StepRecord] = []
    traces: List[Tuple[int, StepTrace]] = []
    acc = c_avg = 0.0
    cpu = prep = 0.0
    rejected = 0
    h = 0
    for k in range(m):
        x = X[k]
        if not np.all(np.isfinite(x)):
            rejected += 1
            continue
        h += 1
        if norm is not None:
            t = time.perf_counter()
            x = norm(x)
            prep += time.perf_counter() - t
        digest = model.digest() if config.record_digest else ""

        c0 = time.process_time()
        t0 = time.perf_counter()
        est = model.classify(x)
        step_traces = []
        if visible[k] and delay is not None:
            pending.append((h + delay, x, _label(y[k])))
        else:
            step_traces.append(model.learn_step(x))
        while pending and pending[0][0] <= h:
            _, px, py = pending.popleft()
            step_traces.append(model.learn_step(px, py))
        latency = time.perf_counter() - t0
        cpu += time.process_time() - c0

        truth = _label(y[k])
        tau = int(est.label is not None and est.label == truth)
        acc = recursive_accuracy(acc, h, tau)
        c_avg = recursive_compactness(c_avg, h, model.c)
        events = [e for tr in step_traces for e in tr.events if e != "none"]
        traces.extend((h, tr) for tr in step_traces)
        records.append(StepRecord(h, est.label, truth, bool(tau), acc, model.c, c_avg, model.rho,
                                  latency, digest, events))
    while pending:
        _, px, py = pending.popleft()
        traces.append((h, model.learn_step(px, py)))

    return EvalReport(records, traces, acc, c_avg, cpu, prep, rejected, config.to_dict(), model)


def batch_metrics(records: Sequence[StepRecord]):
    """Accuracy and c_avg recomputed non-recursively from a trace."""
    if not records:
        return 0.0, 0.0
    return (float(np.mean([r.correct for r in records])),
            float(np.mean([r.c for r in records])))


def windowed_accuracy(report: EvalReport, last: int) -> float:
    tail = report.records[-last:]
    return float(np.mean([r.correct for r in tail])) if tail else 0.0


def structural_trace(report: EvalReport) -> List[tuple]:
    """(h, c, event) rows, one per structural event, 'none' for quiet steps."""
    rows = []
    for r in report.records:
        for e in r.events or ["none"]:
            rows.append((r.h, r.c, e))
    return rows


def measure_latency(report: EvalReport) -> Dict[str, float]:
    lat = np.array([r.latency for r in report.records])
    if lat.size == 0:
        return {"n": 0, "mean": 0.0, "p50": 0.0, "p99": 0.0, "max": 0.0}
    return {
        "n": int(lat.size),
        "mean": float(lat.mean()),
        "p50": float(np.percentile(lat, 50)),
        "p99": float(np.percentile(lat, 99)),
        "max": float(lat.max()),
    }


# -- experiments -------------------------------------------------------------


def _run_columns(args):
    X, y, config = args
    rep = run_stream(X, y, config)
    rep.model = None  # keep results light across process boundaries
    return rep


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


@dataclass
class ChannelRow:
    channel: str
    hemisphere: Optional[str]
    acc: float
    c_avg: float
    cpu_time: float


@dataclass
class ChannelTable:
    window_seconds: Optional[float]
    rows: List[ChannelRow]
    skipped: List[str] = field(default_factory=list)

    def averages(self) -> Dict[str, Dict[str, float]]:
        out = {}
        for side in ("left", "right"):
            rs = [r for r in self.rows if r.hemisphere == side]
            if rs:
                out[side] = {"acc": float(np.mean([r.acc for r in rs])),
                             "c_avg": float(np.mean([r.c_avg for r in rs]))}
        return out


def single_channel_experiment(dataset, config: Optional[RunConfig] = None, channels=None,
                              jobs: int = 1) -> ChannelTable:
    """One independent learner per channel over that channel's 10 features."""
    config = config or RunConfig()
    wanted = channels or config.channels or dataset.channels
    tasks, used, skipped = [], [], []
    for ch in wanted:
        cols = dataset.columns_for(ch)
        if not cols:
            log.warning("channel %s not in dataset; skipped", ch)
            skipped.append(ch)
            continue
        tasks.append((dataset.X[:, cols], dataset.y, config))
        used.append(ch)
    reports = _map(_run_columns, tasks, jobs)
    rows = [ChannelRow(ch, hemisphere(ch), r.final_acc, r.final_c_avg, r.cpu_time)
            for ch, r in zip(used, reports)]
    return ChannelTable(dataset.window_seconds, rows, skipped)


@dataclass
class SubsetRow:
    n_features: int
    acc: float
    c_avg: float
    cpu_time: float
    latency_mean: float
    features: List[int] = field(default_factory=list)


def calibration_ranking(dataset, config: RunConfig):
    k = max(2, int(round(config.calibration_fraction * len(dataset))))
    return rank_features(dataset.X[:k], dataset.y[:k])


def multi_channel_experiment(dataset, config: Optional[RunConfig] = None, ranking=None,
                             n_out: Optional[int] = None, jobs: int = 1) -> List[SubsetRow]:
    """One run per leave-n-out subset, largest first."""
    config = config or RunConfig()
    n_out = n_out or config.n_out
    if ranking is None:
        ranking = calibration_ranking(dataset, config)
    dim = dataset.X.shape[1]
    subsets = [s for s in leave_n_out_schedule(ranking, n_out, dim) if s]
    tasks = [(dataset.X[:, s], dataset.y, config) for s in subsets]
    reports = _map(_run_columns, tasks, jobs)
    return [
        SubsetRow(len(s), r.final_acc, r.final_c_avg, r.cpu_time, measure_latency(r)["mean"], s)
        for s, r in zip(subsets, reports)
    ]


def rule_count_benchmark(dims: int, counts: Sequence[int], reps: int = 200, seed: int = 0) -> Dict[int, float]:
    """Mean classify latency (seconds) with the rule base forced to each size."""
    rng = np.random.default_rng(seed)
    out = {}
    for c in counts:
        rb = RuleBase(dims)
        for i in range(c):
            g = create_granule(rng.random(dims), i % 4 + 1)
            g.uid = i
            rb.granules.append(g)
        xs = rng.random((reps, dims))
        t = time.perf_counter()
        for x in xs:
            rb.classify(x)
        out[c] = (time.perf_counter() - t) / reps
    return out
