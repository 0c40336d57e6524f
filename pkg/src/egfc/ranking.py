"""Spearman-based feature scoring, leave-n-out schedules and per-band
class-correlation sums."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .features import FeatureName


class UndefinedCorrelationError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureScore:
    feature_index: int
    relevance: float
    redundancy: float

    @property
    def score(self) -> float:
        return self.relevance - self.redundancy


def _rank_corr(a: np.ndarray, b: np.ndarray) -> float:
    ra = rankdata(a)
    rb = rankdata(b)
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    sxx = float(ra @ ra)
    syy = float(rb @ rb)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for constant input")
    # sqrt(sxx * syy) rather than sqrt(sxx) * sqrt(syy): exact for identical ranks
    r = float(ra @ rb) / np.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def spearman(u, v) -> float:
    """Pearson correlation of mid-ranks (ties get their average rank)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("spearman needs two 1-D sequences of equal length")
    if u.shape[0] < 2:
        raise ValueError("spearman needs at least 2 observations")
    return _rank_corr(u, v)


def spearman_matrix(X: np.ndarray) -> np.ndarray:
    """Column-wise Spearman correlations; pairs involving a constant column are 0."""
    R = np.apply_along_axis(rankdata, 0, np.asarray(X, dtype=float))
    R = R - R.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", R, R))
    const = norms == 0
    norms[const] = 1.0
    C = (R.T @ R) / np.outer(norms, norms)
    C[const, :] = 0.0
    C[:, const] = 0.0
    return np.clip(C, -1.0, 1.0)


def _safe_spearman(u, v) -> float:
    try:
        return spearman(u, v)
    except UndefinedCorrelationError:
        return 0.0


def rank_features(X, labels) -> List[FeatureScore]:
    """Score each column by |rho(feature, class)| minus its mean |rho| with the
    other columns, best first. Ties keep ascending feature order."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (samples, features) matching labels")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if np.unique(y).size < 2:
        raise ValueError("need at least 2 distinct labels")
    dim = X.shape[1]
    C = np.abs(spearman_matrix(X))
    if dim > 1:
        redundancy = (C.sum(axis=1) - np.diag(C)) / (dim - 1)
    else:
        redundancy = np.zeros(1)
    scores = [
        FeatureScore(j, abs(_safe_spearman(X[:, j], y)), float(redundancy[j]))
        for j in range(dim)
    ]
    return sorted(scores, key=lambda s: (-s.score, s.feature_index))


def leave_n_out_schedule(ranking: Sequence, n: int = 5, dim: Optional[int] = None) -> List[List[int]]:
    """Nested feature subsets of size dim, dim - n, ... (> 0).

    ``ranking`` lists feature indices (or FeatureScores) best first. Each
    subset is returned in ascending index order.
    """
    order = [r.feature_index if isinstance(r, FeatureScore) else int(r) for r in ranking]
    if dim is None:
        dim = len(order)
    if len(order) != dim or sorted(order) != list(range(dim)):
        raise ValueError("ranking must be a permutation of range(dim)")
    if not 1 <= n < dim:
        raise ValueError("need 1 <= n < dim")
    return [sorted(order[:size]) for size in range(dim, 0, -n)]


def hemisphere(channel: str) -> Optional[str]:
    """'left' for odd electrode numbers, 'right' for even, None for midline."""
    m = re.search(r"(\d+)$", channel)
    if not m:
        return None
    return "left" if int(m.group(1)) % 2 else "right"


def band_class_correlation(X, labels, names: Sequence[FeatureName], stat: str = "mean") -> Dict[str, Dict[str, float]]:
    """Per band, sum over channels of |rho(band feature, class)|.

    Returns ``{band: {"global": .., "left": .., "right": ..}}`` in the order
    the bands first appear in ``names``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels, dtype=float)
    out: Dict[str, Dict[str, float]] = {}
    for j, name in enumerate(names):
        if name.stat != stat:
            continue
        row = out.setdefault(name.band, {"global": 0.0, "left": 0.0, "right": 0.0})
        r = abs(_safe_spearman(X[:, j], y))
        row["global"] += r
        side = hemisphere(name.channel)
        if side:
            row[side] += r
    return out
