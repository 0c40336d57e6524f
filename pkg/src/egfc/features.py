"""Windowed spectral band features and causal min-max normalization.

Feature layout is channel-major: for each channel, for each band in
``DEFAULT_BANDS`` order, ``max`` then ``mean`` of the spectrum inside the band.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from .granule import InvalidInputError

DEFAULT_FS = 128.0
STATS = ("max", "mean")


@dataclass(frozen=True)
class Band:
    name: str
    lo_hz: float
    hi_hz: float
    closed: bool = False  # include hi_hz itself

    def mask(self, freqs: np.ndarray) -> np.ndarray:
        upper = freqs <= self.hi_hz if self.closed else freqs < self.hi_hz
        return (freqs >= self.lo_hz) & upper


DEFAULT_BANDS: Tuple[Band, ...] = (
    Band("Delta", 1.0, 4.0),
    Band("Theta", 4.0, 8.0),
    Band("Alpha", 8.0, 13.0),
    Band("Beta", 13.0, 30.0),
    Band("Gamma", 30.0, 64.0, closed=True),
)


class FeatureName(NamedTuple):
    channel: str
    band: str
    stat: str

    def __str__(self):
        return f"{self.channel}_{self.band}_{self.stat}"

    @classmethod
    def parse(cls, s: str) -> "FeatureName":
        channel, band, stat = s.rsplit("_", 2)
        return cls(channel, band, stat)


def feature_names(channels: Sequence[str], bands: Sequence[Band] = DEFAULT_BANDS) -> List[FeatureName]:
    return [FeatureName(ch, b.name, s) for ch in channels for b in bands for s in STATS]


def window_length(window_seconds: float, fs: float = DEFAULT_FS) -> int:
    return int(round(window_seconds * fs))


def window_stream(samples: np.ndarray, window_seconds: float, fs: float = DEFAULT_FS) -> np.ndarray:
    """Cut a (time, channels) recording into non-overlapping aligned windows.

    Returns an array of shape (n_windows, channels, window_len). A trailing
    partial window is dropped; a recording shorter than one window gives
    zero windows.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise InvalidInputError("samples must be (time, channels)")
    win = window_length(window_seconds, fs)
    if win < 1:
        raise InvalidInputError("window shorter than one sample")
    n_win = data.shape[0] // win
    cut = data[: n_win * win]
    return cut.reshape(n_win, win, data.shape[1]).transpose(0, 2, 1)


def magnitude_spectrum(window: np.ndarray, fs: float = DEFAULT_FS, kind: str = "magnitude",
                       taper: str | None = None):
    """One-sided DFT spectrum along the last axis.

    Returns ``(freqs, values)``; bin spacing is fs / N. ``kind`` selects
    |X| ("magnitude") or |X|^2 ("power"). No taper unless ``taper="hann"``.
    """
    w = np.asarray(window, dtype=float)
    if w.shape[-1] < 2:
        raise InvalidInputError("window needs at least 2 samples")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("window contains NaN or Inf")
    if taper == "hann":
        w = w * np.hanning(w.shape[-1])
    elif taper is not None:
        raise InvalidInputError(f"unknown taper {taper!r}")
    spec = np.abs(np.fft.rfft(w, axis=-1))
    if kind == "power":
        spec = spec * spec
    elif kind != "magnitude":
        raise InvalidInputError(f"unknown spectrum kind {kind!r}")
    freqs = np.fft.rfftfreq(w.shape[-1], d=1.0 / fs)
    return freqs, spec


def band_features(freqs: np.ndarray, spectrum: np.ndarray, bands: Sequence[Band] = DEFAULT_BANDS) -> np.ndarray:
    """(max, mean) per band over the last axis; empty bands give (0, 0).

    The DC bin never falls in a band because every band starts above 0 Hz.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    out = np.zeros(spectrum.shape[:-1] + (2 * len(bands),))
    for k, band in enumerate(bands):
        m = band.mask(freqs) & (freqs > 0)
        if not m.any():
            continue
        vals = spectrum[..., m]
        out[..., 2 * k] = vals.max(axis=-1)
        out[..., 2 * k + 1] = vals.mean(axis=-1)
    return out


def extract_window_features(window: np.ndarray, fs: float = DEFAULT_FS,
                            bands: Sequence[Band] = DEFAULT_BANDS, kind: str = "magnitude",
                            taper: str | None = None) -> np.ndarray:
    """Flat feature vector (10 per channel) for one (channels, N) window."""
    freqs, spec = magnitude_spectrum(window, fs, kind=kind, taper=taper)
    return band_features(freqs, spec, bands).reshape(-1)


def extract_features(samples: np.ndarray, window_seconds: float, fs: float = DEFAULT_FS,
                     bands: Sequence[Band] = DEFAULT_BANDS, kind: str = "magnitude",
                     taper: str | None = None) -> np.ndarray:
    """Feature matrix (n_windows, 10 * channels) for a (time, channels) recording."""
    windows = window_stream(samples, window_seconds, fs)
    if len(windows) == 0:
        n_ch = np.asarray(samples).reshape(len(samples), -1).shape[1]
        return np.empty((0, 2 * len(bands) * n_ch))
    freqs, spec = magnitude_spectrum(windows, fs, kind=kind, taper=taper)
    return band_features(freqs, spec, bands).reshape(len(windows), -1)


class MinMaxNormalizer:
    """Causal per-feature min-max scaling into [0, 1].

    The running range is widened with each sample before that sample is
    mapped, so there is no lookahead.
    """

    def __init__(self, dim: int, eps: float = 1e-12):
        self.dim = dim
        self.eps = eps
        self.lo = np.full(dim, np.inf)
        self.hi = np.full(dim, -np.inf)
        self.count = 0

    def __call__(self, f) -> np.ndarray:
        return self.normalize(f)

    def normalize(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.dim,):
            raise InvalidInputError(f"expected {self.dim} features, got shape {f.shape}")
        np.minimum(self.lo, f, out=self.lo)
        np.maximum(self.hi, f, out=self.hi)
        self.count += 1
        out = (f - self.lo) / (self.hi - self.lo + self.eps)
        return np.clip(out, 0.0, 1.0)

    def state(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist(), "eps": self.eps, "count": self.count}
