"""Corpus manifests, raw CSV ingestion and the processed-sample CSV format.

Manifest (YAML or JSON)::

    sampling_rate: 128
    channels: [AF3, AF4, F3, ...]
    segments:
      - {player: 1, game: G1, label: 1, path: S01/G1.csv}
      - ...

Segment paths are relative to the manifest. Each raw CSV has a header row
naming its columns; every manifest channel must appear there (extra columns
are ignored). Segments are processed in the order listed.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence

import numpy as np
import yaml

from .features import DEFAULT_BANDS, DEFAULT_FS, Band, FeatureName, extract_features, feature_names

log = logging.getLogger(__name__)

CLASS_NAMES = {1: "boredom", 2: "calmness", 3: "horror", 4: "joy"}
EPOC_CHANNELS = ("AF3", "AF4", "F3", "F4", "F7", "F8", "FC5", "FC6", "T7", "T8", "P7", "P8", "O1", "O2")
META_COLUMNS = ("player", "game", "window", "label")


class CorpusError(ValueError):
    pass


@dataclass
class Segment:
    player: str
    game: str
    label: int
    path: Path


@dataclass
class CorpusManifest:
    channels: List[str]
    segments: List[Segment]
    sampling_rate: float = DEFAULT_FS
    root: Path = field(default_factory=Path)


@dataclass
class RawSegment:
    segment: Segment
    channels: List[str]
    data: np.ndarray  # (time, channels)


def load_manifest(path) -> CorpusManifest:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as e:
        raise CorpusError(f"cannot read manifest {path}: {e}") from e
    if not isinstance(doc, dict) or "segments" not in doc or "channels" not in doc:
        raise CorpusError(f"{path}: manifest needs 'channels' and 'segments'")
    segs = []
    for k, s in enumerate(doc["segments"]):
        try:
            label = int(s["label"])
            if label not in CLASS_NAMES:
                raise ValueError(f"label {label} not in {sorted(CLASS_NAMES)}")
            seg = Segment(str(s["player"]), str(s["game"]), label, path.parent / s["path"])
        except (KeyError, TypeError, ValueError) as e:
            raise CorpusError(f"{path}: segment #{k} malformed ({e})") from e
        segs.append(seg)
    return CorpusManifest(
        channels=[str(c) for c in doc["channels"]],
        segments=segs,
        sampling_rate=float(doc.get("sampling_rate", DEFAULT_FS)),
        root=path.parent,
    )


def _locate_bad_cell(path: Path, cols: Sequence[int]) -> str:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for lineno, row in enumerate(reader, start=2):
            for c in cols:
                try:
                    v = float(row[c])
                except (IndexError, ValueError):
                    cell = row[c] if c < len(row) else "<missing>"
                    return f"{path}:{lineno}: non-numeric cell {cell!r} in column {c + 1}"
                if not np.isfinite(v):
                    return f"{path}:{lineno}: non-finite value in column {c + 1}"
    return f"{path}: malformed data"


def read_raw_csv(path, channels: Sequence[str]) -> np.ndarray:
    """Load the named channel columns of a raw recording as (time, channels)."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"missing file: {path}")
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise CorpusError(f"{path}: empty file")
    header = [h.strip() for h in header]
    missing = [c for c in channels if c not in header]
    if missing:
        raise CorpusError(f"{path}:1: header lacks channels {missing}")
    cols = [header.index(c) for c in channels]
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, usecols=cols, ndmin=2)
    except ValueError:
        raise CorpusError(_locate_bad_cell(path, cols)) from None
    if not np.all(np.isfinite(data)):
        row = int(np.argwhere(~np.isfinite(data))[0][0])
        raise CorpusError(f"{path}:{row + 2}: NaN or Inf cell")
    return data


def write_raw_csv(path, data: np.ndarray, channels: Sequence[str], fmt: str = "%.10g") -> None:
    """Inverse of :func:`read_raw_csv`; values are written with ``fmt``."""
    np.savetxt(path, np.asarray(data), delimiter=",", fmt=fmt, header=",".join(channels), comments="")


def ingest_corpus(manifest) -> Iterator[RawSegment]:
    if not isinstance(manifest, CorpusManifest):
        manifest = load_manifest(manifest)
    for seg in manifest.segments:
        yield RawSegment(seg, list(manifest.channels), read_raw_csv(seg.path, manifest.channels))


@dataclass
class ProcessedDataset:
    """Rows are stream samples in order; columns follow ``names``."""

    X: np.ndarray
    y: np.ndarray
    names: List[FeatureName]
    meta: List[dict] = field(default_factory=list)
    window_seconds: Optional[float] = None

    def __len__(self):
        return len(self.y)

    @property
    def channels(self) -> List[str]:
        seen = []
        for n in self.names:
            if n.channel not in seen:
                seen.append(n.channel)
        return seen

    def columns_for(self, channel: str) -> List[int]:
        return [j for j, n in enumerate(self.names) if n.channel == channel]

    def subset(self, cols: Sequence[int]) -> "ProcessedDataset":
        cols = list(cols)
        return ProcessedDataset(self.X[:, cols], self.y, [self.names[j] for j in cols], self.meta,
                                self.window_seconds)

    def head(self, k: int) -> "ProcessedDataset":
        return ProcessedDataset(self.X[:k], self.y[:k], self.names, self.meta[:k], self.window_seconds)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(META_COLUMNS) + [str(n) for n in self.names])
            for k in range(len(self.y)):
                m = self.meta[k] if self.meta else {}
                w.writerow(
                    [m.get("player", ""), m.get("game", ""), m.get("window", k), int(self.y[k])]
                    + [repr(float(v)) for v in self.X[k]]
                )

    @classmethod
    def from_csv(cls, path) -> "ProcessedDataset":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise CorpusError(f"{path}: empty processed-sample file")
        header = rows[0]
        if tuple(header[:4]) != META_COLUMNS:
            raise CorpusError(f"{path}:1: expected leading columns {META_COLUMNS}")
        names = [FeatureName.parse(h) for h in header[4:]]
        X = np.empty((len(rows) - 1, len(names)))
        y = np.empty(len(rows) - 1, dtype=int)
        meta = []
        for k, row in enumerate(rows[1:]):
            try:
                meta.append({"player": row[0], "game": row[1], "window": int(row[2])})
                y[k] = int(row[3])
                X[k] = [float(v) for v in row[4:]]
            except (ValueError, IndexError):
                raise CorpusError(f"{path}:{k + 2}: malformed row") from None
        if not np.all(np.isfinite(X)):
            raise CorpusError(f"{path}: non-finite feature values")
        return cls(X, y, names, meta)


def extract_dataset(manifest, window_seconds: float = 10.0, bands: Sequence[Band] = DEFAULT_BANDS,
                    kind: str = "magnitude", taper: Optional[str] = None) -> ProcessedDataset:
    """Raw corpus -> one processed sample per window, segments in manifest order."""
    if not isinstance(manifest, CorpusManifest):
        manifest = load_manifest(manifest)
    names = feature_names(manifest.channels, bands)
    blocks, labels, meta = [], [], []
    for raw in ingest_corpus(manifest):
        F = extract_features(raw.data, window_seconds, manifest.sampling_rate, bands, kind, taper)
        if len(F) == 0:
            log.warning("%s shorter than one %gs window; skipped", raw.segment.path, window_seconds)
            continue
        blocks.append(F)
        labels.extend([raw.segment.label] * len(F))
        meta.extend({"player": raw.segment.player, "game": raw.segment.game, "window": w}
                    for w in range(len(F)))
    X = np.vstack(blocks) if blocks else np.empty((0, len(names)))
    return ProcessedDataset(X, np.asarray(labels, dtype=int), names, meta, window_seconds)


def output_dir(default: str | os.PathLike = ".") -> Path:
    """Output directory, overridable through EGFC_OUTPUT_DIR."""
    p = Path(os.environ.get("EGFC_OUTPUT_DIR", default))
    p.mkdir(parents=True, exist_ok=True)
    return p
