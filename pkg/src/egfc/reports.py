"""CSV / JSON emitters for reports, rankings and rule-base snapshots."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Dict, List, Sequence

from .evaluation import ChannelTable, EvalReport, SubsetRow, structural_trace
from .features import FeatureName
from .ranking import FeatureScore
from .rules import RuleBase

STEP_COLUMNS = ("h", "estimate", "truth", "correct", "acc", "c", "c_avg", "rho", "latency_ms", "digest", "events")
SUBSET_COLUMNS = ("#features", "Acc(%)", "c_avg", "CPU time (s)", "latency_ms")
RANKING_COLUMNS = ("feature", "channel", "band", "statistic", "relevance", "redundancy", "score", "rank")


def _cell(v):
    return "" if v is None else v


def write_steps_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STEP_COLUMNS)
        for r in report.records:
            w.writerow([r.h, _cell(r.estimate), r.truth, int(r.correct), repr(r.acc), r.c, repr(r.c_avg),
                        repr(r.rho), f"{r.latency * 1e3:.4f}", r.digest, ";".join(r.events)])


def write_structure_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("h", "c", "event"))
        w.writerows(structural_trace(report))


def write_channel_table(table: ChannelTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("window_s", "channel", "hemisphere", "Acc(%)", "c_avg"))
        for r in table.rows:
            w.writerow((table.window_seconds, r.channel, r.hemisphere or "", f"{100 * r.acc:.1f}", f"{r.c_avg:.1f}"))
        for side, avg in table.averages().items():
            w.writerow((table.window_seconds, "Avg.", side, f"{100 * avg['acc']:.1f}", f"{avg['c_avg']:.1f}"))


def write_subset_table(rows: Sequence[SubsetRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUBSET_COLUMNS)
        for r in rows:
            w.writerow((r.n_features, f"{100 * r.acc:.2f}", f"{r.c_avg:.2f}", f"{r.cpu_time:.3f}",
                        f"{r.latency_mean * 1e3:.3f}"))


def write_ranking_csv(scores: Sequence[FeatureScore], names: Sequence[FeatureName], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RANKING_COLUMNS)
        for rank, s in enumerate(scores, start=1):
            n = names[s.feature_index]
            w.writerow((str(n), n.channel, n.band, n.stat, repr(s.relevance), repr(s.redundancy),
                        repr(s.score), rank))


def write_band_summary(sums: Dict[str, Dict[str, float]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("band", "global", "left", "right"))
        for band, v in sums.items():
            w.writerow((band, f"{v['global']:.4f}", f"{v['left']:.4f}", f"{v['right']:.4f}"))


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False, default=str) + "\n")


def save_snapshot(model: RuleBase, path) -> None:
    write_json(model.to_dict(), path)


def load_snapshot(path) -> RuleBase:
    return RuleBase.from_dict(json.loads(Path(path).read_text()))


def describe_snapshot(model: RuleBase) -> List[str]:
    lines = [f"n={model.n} c={model.c} rho={model.rho:.6g} step={model.step} params={model.params.to_dict()}"]
    for g in model.granules:
        lines.append(
            f"  rule uid={g.uid:<5} class={g.label!s:<5} count={g.update_count:<6} inactive={g.inactivity:<4} "
            f"mean_sigma={g.sigma.mean():.5f} mu[:4]={[round(v, 4) for v in g.mu[:4].tolist()]}"
        )
    return lines
