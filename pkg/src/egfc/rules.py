"""The evolving rule base: readout, semi-supervised learning step, adaptive
threshold, merging and deletion."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Hashable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .granule import (
    Granule,
    InvalidInputError,
    absorb_sample,
    as_sample,
    clamp_sigma,
    create_granule,
)

SNAPSHOT_FORMAT = "egfc-rulebase/1"


@dataclass
class HyperParams:
    rho0: float = 0.1
    delta: float = 0.1
    h_r: float = 200  # int, or math.inf to never delete
    rho_min: float = 0.01
    rho_max: float = 1.0

    def __post_init__(self):
        if self.h_r is None:
            self.h_r = math.inf
        elif isinstance(self.h_r, str):
            self.h_r = float(self.h_r)
        if not 0 < self.rho_min <= self.rho_max <= 1:
            raise InvalidInputError("need 0 < rho_min <= rho_max <= 1")
        if not 0 < self.rho0 <= 1:
            raise InvalidInputError("rho0 must lie in (0, 1]")
        if not self.delta > 0:
            raise InvalidInputError("delta must be > 0")
        if not self.h_r >= 1:
            raise InvalidInputError("h_r must be >= 1 (or inf)")
        if self.h_r != math.inf:
            self.h_r = int(self.h_r)

    def to_dict(self) -> dict:
        return {
            "rho0": self.rho0,
            "delta": self.delta,
            "h_r": None if self.h_r == math.inf else self.h_r,
            "rho_min": self.rho_min,
            "rho_max": self.rho_max,
        }


@dataclass
class ClassEstimate:
    label: Optional[Hashable]
    winning_rule: Optional[int]
    activation: float


@dataclass
class MergeEvent:
    kept: int
    removed: int
    new_uid: int
    distance: float
    raw_mu: np.ndarray = field(repr=False)
    raw_sigma: np.ndarray = field(repr=False)


@dataclass
class StepTrace:
    """What one learning step did to the structure."""

    h: int
    label: Optional[Hashable]
    selected: Optional[int] = None  # uid of the adapted rule
    created: Optional[int] = None
    labeled: Optional[int] = None  # uid that received its class this step
    merged: Optional[MergeEvent] = None
    deleted: List[int] = field(default_factory=list)
    max_activation: float = 0.0
    c: int = 0
    rho: float = 0.0

    @property
    def events(self) -> List[str]:
        ev = []
        if self.created is not None:
            ev.append("create")
        if self.merged is not None:
            ev.append("merge")
        ev.extend("delete" for _ in self.deleted)
        return ev or ["none"]


def _compatible(a, b) -> bool:
    return a is None or b is None or a == b


def granule_distance(g1: Granule, g2: Granule) -> float:
    """Mean over dimensions of |mu1 - mu2| + s1 + s2 - 2 sqrt(s1 s2)."""
    if g1.n != g2.n:
        raise InvalidInputError("granules have different dimensions")
    s1, s2 = g1.sigma, g2.sigma
    # s1 + s2 - 2 sqrt(s1 s2) == (sqrt s1 - sqrt s2)^2, written this way so it
    # can't go negative through rounding
    disp = (np.sqrt(s1) - np.sqrt(s2)) ** 2
    return float(np.mean(np.abs(g1.mu - g2.mu) + disp))


def condensed_distances(mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Granule distance for every pair i < j, in ``pdist`` order."""
    n = mu.shape[1]
    return (pdist(mu, "cityblock") + pdist(np.sqrt(sigma), "sqeuclidean")) / n


def pairwise_distances(mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """All-pairs granule distance for stacked (c, n) parameter matrices."""
    return squareform(condensed_distances(mu, sigma))


def _compatible_pairs(labels: Sequence) -> np.ndarray:
    """Label compatibility for every pair i < j, in ``pdist`` order."""
    codes = {}
    k = np.array([-1 if v is None else codes.setdefault(v, len(codes)) for v in labels])
    i, j = np.triu_indices(len(k), 1)
    return (k[i] < 0) | (k[j] < 0) | (k[i] == k[j])


def merged_parameters(g1: Granule, g2: Granule) -> Tuple[np.ndarray, np.ndarray]:
    """Unclamped modal values and dispersions of the union of two granules."""
    s1, s2 = g1.sigma, g2.sigma
    a, b = s1 / s2, s2 / s1
    mu = (a * g1.mu + b * g2.mu) / (a + b)
    return mu, s1 + s2


def merge_pair(g1: Granule, g2: Granule, clamp: bool = True) -> Granule:
    if g1.n != g2.n:
        raise InvalidInputError("granules have different dimensions")
    if not _compatible(g1.label, g2.label):
        raise InvalidInputError(
            f"refusing to merge granules with classes {g1.label!r} and {g2.label!r}"
        )
    mu, sigma = merged_parameters(g1, g2)
    if clamp:
        sigma = clamp_sigma(sigma)
    label = g1.label if g1.label is not None else g2.label
    return Granule(
        mu=mu,
        sigma=sigma,
        label=label,
        update_count=g1.update_count + g2.update_count,
        inactivity=min(g1.inactivity, g2.inactivity),
        created_at=min(g1.created_at, g2.created_at),
        born_labeled=g1.born_labeled and g2.born_labeled,
    )


class RuleBase:
    """Evolving Gaussian fuzzy classifier state.

    Single writer: call :meth:`learn_step` from one thread at a time.
    """

    def __init__(self, n: int, params: Optional[HyperParams] = None):
        if n < 1:
            raise InvalidInputError("feature dimension must be >= 1")
        self.n = int(n)
        self.params = params or HyperParams()
        self.granules: List[Granule] = []
        self.rho = float(self.params.rho0)
        self.sigma_avg_prev: Optional[float] = None
        self.step = 0
        self._next_uid = 0

    @property
    def c(self) -> int:
        return len(self.granules)

    def __len__(self):
        return len(self.granules)

    def __repr__(self):
        return f"RuleBase(n={self.n}, c={self.c}, rho={self.rho:.4g}, step={self.step})"

    # -- readout ---------------------------------------------------------

    def activations(self, x) -> np.ndarray:
        if not self.granules:
            return np.empty(0)
        x = as_sample(x, self.n)
        mu = np.stack([g.mu for g in self.granules])
        sigma = np.stack([g.sigma for g in self.granules])
        d = x - mu
        return np.exp(-(d * d) / (2.0 * sigma * sigma)).min(axis=1)

    def _best(self, acts: np.ndarray, candidates) -> Optional[int]:
        best = None
        best_key = None
        for i in candidates:
            key = (acts[i], self.granules[i].update_count)
            if best is None or key > best_key:
                best, best_key = i, key
        return best

    def classify(self, x) -> ClassEstimate:
        acts = self.activations(x)
        labeled = [i for i, g in enumerate(self.granules) if g.label is not None]
        i = self._best(acts, labeled)
        if i is None:
            return ClassEstimate(None, None, 0.0)
        return ClassEstimate(self.granules[i].label, i, float(acts[i]))

    def select_adaptation_rule(self, x, y=None, acts=None) -> Optional[int]:
        if acts is None:
            acts = self.activations(x)
        cands = [
            i for i, g in enumerate(self.granules)
            if acts[i] > self.rho and (y is None or _compatible(g.label, y))
        ]
        return self._best(acts, cands)

    # -- learning --------------------------------------------------------

    def _new_uid(self) -> int:
        uid = self._next_uid
        self._next_uid += 1
        return uid

    def learn_step(self, x, y=None) -> StepTrace:
        """Create-or-adapt, then threshold update, merge check and deletion sweep.

        Invalid samples raise before any state is touched.
        """
        x = as_sample(x, self.n)
        acts = self.activations(x)
        idx = self.select_adaptation_rule(x, y, acts)
        self.step += 1
        trace = StepTrace(h=self.step, label=y)
        trace.max_activation = float(acts.max()) if acts.size else 0.0

        if idx is None:
            g = create_granule(x, y)
            g.uid = self._new_uid()
            g.created_at = self.step
            self.granules.append(g)
            trace.created = g.uid
            chosen = g
        else:
            chosen = self.granules[idx]
            trace.selected = chosen.uid
            if chosen.label is None and y is not None:
                chosen.label = y
                chosen.inactivity = 0
                trace.labeled = chosen.uid
            else:
                absorb_sample(chosen, x)
        for g in self.granules:
            if g is not chosen:
                g.inactivity += 1

        self.update_threshold()
        trace.merged = self.maybe_merge()
        trace.deleted = self.prune_inactive()
        trace.c = self.c
        trace.rho = self.rho
        return trace

    def sigma_avg(self) -> Optional[float]:
        if not self.granules:
            return None
        return float(np.stack([g.sigma for g in self.granules]).mean(axis=1).mean())

    def update_threshold(self) -> float:
        s = self.sigma_avg()
        if s is None:
            return self.rho
        if self.sigma_avg_prev is None:
            self.sigma_avg_prev = s
        rho = (s / self.sigma_avg_prev) * self.rho
        self.rho = float(min(max(rho, self.params.rho_min), self.params.rho_max))
        self.sigma_avg_prev = s
        return self.rho

    def maybe_merge(self) -> Optional[MergeEvent]:
        c = self.c
        if c < 2:
            return None
        mu = np.stack([g.mu for g in self.granules])
        sigma = np.stack([g.sigma for g in self.granules])
        mask = _compatible_pairs([g.label for g in self.granules])
        if not mask.any():
            return None
        masked = np.where(mask, condensed_distances(mu, sigma), np.inf)
        k = int(np.argmin(masked))  # first minimum, i.e. lowest (i, j)
        iu, ju = np.triu_indices(c, 1)
        i, j = int(iu[k]), int(ju[k])
        d = float(masked[k])
        if d > self.params.delta:
            return None
        g1, g2 = self.granules[i], self.granules[j]
        raw_mu, raw_sigma = merged_parameters(g1, g2)
        merged = merge_pair(g1, g2)
        merged.uid = self._new_uid()
        self.granules[i] = merged
        del self.granules[j]
        return MergeEvent(g1.uid, g2.uid, merged.uid, d, raw_mu, raw_sigma)

    def prune_inactive(self) -> List[int]:
        h_r = self.params.h_r
        if h_r == math.inf:
            return []
        gone = [g.uid for g in self.granules if g.inactivity >= h_r]
        if gone:
            self.granules = [g for g in self.granules if g.inactivity < h_r]
        return gone

    # -- snapshots ---------------------------------------------------------

    def digest(self) -> str:
        """Short hash of the full learner state; changes whenever anything does."""
        h = hashlib.blake2b(digest_size=12)
        h.update(np.array([self.rho, self.sigma_avg_prev or 0.0, self.step]).tobytes())
        for g in self.granules:
            h.update(g.mu.tobytes())
            h.update(g.sigma.tobytes())
            h.update(repr((g.label, g.update_count, g.inactivity, g.uid)).encode())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "format": SNAPSHOT_FORMAT,
            "n": self.n,
            "step": self.step,
            "rho": self.rho,
            "sigma_avg_prev": self.sigma_avg_prev,
            "next_uid": self._next_uid,
            "params": self.params.to_dict(),
            "granules": [
                {
                    "uid": g.uid,
                    "label": g.label.item() if isinstance(g.label, np.generic) else g.label,
                    "mu": g.mu.tolist(),
                    "sigma": g.sigma.tolist(),
                    "update_count": g.update_count,
                    "inactivity": g.inactivity,
                    "created_at": g.created_at,
                    "born_labeled": g.born_labeled,
                }
                for g in self.granules
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RuleBase":
        if d.get("format") != SNAPSHOT_FORMAT:
            raise InvalidInputError(f"not a rule-base snapshot: format={d.get('format')!r}")
        rb = cls(d["n"], HyperParams(**d["params"]))
        rb.step = d["step"]
        rb.rho = d["rho"]
        rb.sigma_avg_prev = d["sigma_avg_prev"]
        rb._next_uid = d["next_uid"]
        for gd in d["granules"]:
            rb.granules.append(
                Granule(
                    mu=np.asarray(gd["mu"], dtype=float),
                    sigma=np.asarray(gd["sigma"], dtype=float),
                    label=gd["label"],
                    update_count=gd["update_count"],
                    inactivity=gd["inactivity"],
                    uid=gd["uid"],
                    created_at=gd["created_at"],
                    born_labeled=gd["born_labeled"],
                )
            )
        return rb

    def copy(self) -> "RuleBase":
        rb = RuleBase(self.n, self.params)
        rb.granules = [g.copy() for g in self.granules]
        rb.rho = self.rho
        rb.sigma_avg_prev = self.sigma_avg_prev
        rb.step = self.step
        rb._next_uid = self._next_uid
        return rb
