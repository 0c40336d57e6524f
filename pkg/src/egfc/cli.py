"""Command-line entry point.

    egfc extract    raw corpus -> processed-sample CSV
    egfc rank       feature ranking + per-band class-correlation summary
    egfc run-single one learner per channel (per window length)
    egfc run-multi  leave-n-out runs over the ranked multichannel features
    egfc synth      synthetic verification scenarios
    egfc bench      latency report
    egfc inspect    dump a saved rule-base snapshot

Exit codes: 0 success, 1 runtime failure, 2 usage / configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import yaml

from . import reports
from .corpus import CorpusError, ProcessedDataset, extract_dataset, load_manifest, output_dir
from .evaluation import (
    RunConfig,
    calibration_ranking,
    measure_latency,
    multi_channel_experiment,
    rule_count_benchmark,
    run_stream,
    single_channel_experiment,
)
from .granule import InvalidInputError
from .ranking import band_class_correlation
from .scenarios import SCENARIOS
from .synthetic import generate_synthetic, preset

log = logging.getLogger("egfc")

EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _h_r(v: str) -> float:
    if v.lower() in ("inf", "infinity", "none"):
        return math.inf
    return int(v)


def _common(p: argparse.ArgumentParser, data: bool = True):
    p.add_argument("--config", type=Path, help="YAML/JSON run configuration")
    p.add_argument("--out", type=Path, help="output directory (default: $EGFC_OUTPUT_DIR or ./egfc-out)")
    p.add_argument("--rho0", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--h-r", type=_h_r, dest="h_r", help="inactivity horizon, or 'inf'")
    p.add_argument("--label-delay", type=int)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1, help="parallel independent runs")
    if data:
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--data", type=Path, help="processed-sample CSV")
        src.add_argument("--manifest", type=Path, help="raw corpus manifest")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="egfc", description="Evolving Gaussian fuzzy classifier toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("extract", help="raw corpus -> processed-sample CSV")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--window", type=float, default=10.0, help="window length in seconds")
    p.add_argument("--spectrum", choices=("magnitude", "power"), default="magnitude")
    p.add_argument("--taper", choices=("hann",), default=None)
    p.add_argument("-o", "--output", type=Path)

    p = sub.add_parser("rank", help="Spearman feature ranking")
    _common(p)
    p.add_argument("--window", type=float, default=10.0)
    p.add_argument("--stat", choices=("max", "mean"), default="mean", help="band feature summed per band")

    p = sub.add_parser("run-single", help="per-channel experiment")
    _common(p)
    p.add_argument("--window", type=float, nargs="+", default=[10.0])
    p.add_argument("--channels", nargs="+")

    p = sub.add_parser("run-multi", help="leave-n-out multichannel experiment")
    _common(p)
    p.add_argument("--window", type=float, default=10.0)
    p.add_argument("--n-out", type=int)
    p.add_argument("--save-model", action="store_true", help="snapshot the all-features model")

    p = sub.add_parser("synth", help="synthetic verification scenarios")
    p.add_argument("--preset", choices=sorted(SCENARIOS) + ["all"], default="all")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench", help="latency benchmark")
    _common(p, data=False)
    p.add_argument("--data", type=Path, help="processed-sample CSV (default: synthetic 140-dim stream)")
    p.add_argument("--dims", type=int, default=140)
    p.add_argument("--samples", type=int, default=3360)

    p = sub.add_parser("inspect", help="dump a rule-base snapshot")
    p.add_argument("snapshot", type=Path)
    return ap


def load_config(args) -> RunConfig:
    d = {}
    if getattr(args, "config", None):
        try:
            d = yaml.safe_load(args.config.read_text()) or {}
        except OSError as e:
            raise UsageError(f"cannot read config: {e}")
        if not isinstance(d, dict):
            raise UsageError("config file must hold a mapping")
    params = dict(d.get("params") or {})
    for key in ("rho0", "delta", "h_r"):
        v = getattr(args, key, None)
        if v is not None:
            params[key] = v
    d["params"] = params
    if getattr(args, "label_delay", None) is not None:
        d["label_delay"] = args.label_delay
    if getattr(args, "no_normalize", False):
        d["normalize"] = False
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    if getattr(args, "n_out", None) is not None:
        d["n_out"] = args.n_out
    try:
        return RunConfig.from_dict(d)
    except (TypeError, InvalidInputError) as e:
        raise UsageError(f"invalid configuration: {e}")


def _outdir(args) -> Path:
    if getattr(args, "out", None):
        args.out.mkdir(parents=True, exist_ok=True)
        return args.out
    return output_dir("egfc-out")


def _dataset(args, window: float) -> ProcessedDataset:
    if getattr(args, "data", None):
        ds = ProcessedDataset.from_csv(args.data)
        ds.window_seconds = window
        return ds
    return extract_dataset(load_manifest(args.manifest), window)


def _tag(w: float) -> str:
    return f"{w:g}s"


def cmd_extract(args) -> int:
    ds = extract_dataset(load_manifest(args.manifest), args.window, kind=args.spectrum, taper=args.taper)
    out = args.output or _outdir(args) / f"processed_{_tag(args.window)}.csv"
    ds.to_csv(out)
    print(f"{len(ds)} samples x {ds.X.shape[1]} features -> {out}")
    return 0


def cmd_rank(args) -> int:
    cfg = load_config(args)
    ds = _dataset(args, args.window)
    scores = calibration_ranking(ds, cfg)
    out = _outdir(args)
    reports.write_ranking_csv(scores, ds.names, out / "ranking.csv")
    sums = band_class_correlation(ds.X, ds.y, ds.names, stat=args.stat)
    reports.write_band_summary(sums, out / "band_correlation.csv")
    for band, v in sorted(sums.items(), key=lambda kv: -kv[1]["global"]):
        print(f"{band:<6} {v['global']:.4f}  (left {v['left']:.4f}, right {v['right']:.4f})")
    print(f"ranking -> {out / 'ranking.csv'}")
    return 0


def cmd_run_single(args) -> int:
    cfg = load_config(args)
    out = _outdir(args)
    if args.data and len(args.window) > 1:
        raise UsageError("several --window values need --manifest (a processed CSV has one window length)")
    summary = {"config": cfg.to_dict(), "tables": {}}
    for w in args.window:
        if w >= 300:
            log.warning("window of %gs leaves about one sample per recording; "
                        "expect accuracy near or below chance", w)
        ds = _dataset(args, w)
        cfg.window_seconds = w
        table = single_channel_experiment(ds, cfg, channels=args.channels, jobs=args.jobs)
        reports.write_channel_table(table, out / f"single_channel_{_tag(w)}.csv")
        print(f"window {w:g}s ({len(ds)} samples)")
        print(f"  {'Ch':<6}{'Acc(%)':>8}{'c_avg':>8}")
        for r in table.rows:
            print(f"  {r.channel:<6}{100 * r.acc:>8.1f}{r.c_avg:>8.1f}")
        for side, avg in table.averages().items():
            print(f"  Avg.{side[0].upper()} {100 * avg['acc']:>7.1f}{avg['c_avg']:>8.1f}")
        summary["tables"][_tag(w)] = {
            "rows": [vars(r) for r in table.rows],
            "averages": table.averages(),
            "skipped": table.skipped,
        }
    reports.write_json(summary, out / "single_channel_summary.json")
    return 0


def cmd_run_multi(args) -> int:
    cfg = load_config(args)
    cfg.window_seconds = args.window
    ds = _dataset(args, args.window)
    out = _outdir(args)
    ranking = calibration_ranking(ds, cfg)
    reports.write_ranking_csv(ranking, ds.names, out / "ranking.csv")
    rows = multi_channel_experiment(ds, cfg, ranking=ranking, jobs=args.jobs)
    reports.write_subset_table(rows, out / "multi_channel.csv")
    print(f"{'#Features':>9} {'Acc(%)':>8} {'c_avg':>6} {'CPU(s)':>8}")
    for r in rows:
        print(f"{r.n_features:>9} {100 * r.acc:>8.2f} {r.c_avg:>6.2f} {r.cpu_time:>8.3f}")
    # full-dimension run again with traces for the structural-evolution plot data
    full = run_stream(ds.X, ds.y, cfg)
    reports.write_steps_csv(full, out / "steps_all_features.csv")
    reports.write_structure_csv(full, out / "structure_all_features.csv")
    if args.save_model:
        reports.save_snapshot(full.model, out / "model_all_features.json")
    reports.write_json({"config": cfg.to_dict(), "rows": [vars(r) for r in rows],
                        "all_features": full.summary()}, out / "multi_channel_summary.json")
    return 0


def cmd_synth(args) -> int:
    names = sorted(SCENARIOS) if args.preset == "all" else [args.preset]
    ok = True
    for name in names:
        for chk in SCENARIOS[name](seed=args.seed):
            print(chk.line())
            ok &= chk.passed
    return 0 if ok else EXIT_FAIL


def cmd_bench(args) -> int:
    cfg = load_config(args)
    if args.data:
        ds = ProcessedDataset.from_csv(args.data)
        X, y, vis = ds.X, ds.y, None
    else:
        cfg.normalize = False
        s = generate_synthetic(preset("wide140", dims=args.dims, n_samples=args.samples, seed=cfg.seed))
        X, y, vis = s.X, s.y, s.visible
    cfg.record_digest = False
    rep = run_stream(X, y, cfg, visible=vis)
    lat = measure_latency(rep)
    print(f"{lat['n']} samples x {X.shape[1]} dims: mean {lat['mean'] * 1e3:.3f} ms, "
          f"p50 {lat['p50'] * 1e3:.3f} ms, p99 {lat['p99'] * 1e3:.3f} ms, CPU {rep.cpu_time:.3f} s, "
          f"c_avg {rep.final_c_avg:.2f}")
    counts = rule_count_benchmark(X.shape[1], [4, 8, 16, 32])
    for c, t in counts.items():
        print(f"  classify with c={c:<3} {t * 1e6:8.1f} us")
    out = _outdir(args)
    reports.write_json({"config": cfg.to_dict(), "latency": lat, "cpu_time_s": rep.cpu_time,
                        "classify_us_by_rule_count": {c: t * 1e6 for c, t in counts.items()}},
                       out / "bench.json")
    return 0


def cmd_inspect(args) -> int:
    model = reports.load_snapshot(args.snapshot)
    print("\n".join(reports.describe_snapshot(model)))
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "rank": cmd_rank,
    "run-single": cmd_run_single,
    "run-multi": cmd_run_multi,
    "synth": cmd_synth,
    "bench": cmd_bench,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except UsageError as e:
        print(f"egfc {args.cmd}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, InvalidInputError, OSError, ValueError) as e:
        print(f"egfc {args.cmd}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
