"""Seeded synthetic labeled streams for desk-scale verification."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import List, Optional, Tuple

import numpy as np

LOW, HIGH = 0.15, 0.55


@dataclass
class SyntheticSpec:
    n_classes: int = 4
    dims: int = 10
    n_samples: int = 2000
    spread: float = 0.03
    centers: Optional[List[List[float]]] = None  # default: separated binary layout
    order: str = "round_robin"  # or "blocked"
    drift: List[Tuple[int, float]] = field(default_factory=list)  # (h, shift added to every coord)
    visibility: float = 1.0  # fraction of labels delivered to the learner
    shuffle_labels: bool = False  # break the feature/label link (chance baseline)
    min_hamming: int = 3
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SyntheticStream:
    X: np.ndarray
    y: np.ndarray
    visible: np.ndarray
    centers: np.ndarray

    def __len__(self):
        return len(self.y)


def binary_centers(n_classes: int, dims: int, rng: np.random.Generator, min_hamming: int = 3) -> np.ndarray:
    """Class centers on the {LOW, HIGH}^dims grid, pairwise differing in at least
    ``min_hamming`` coordinates (so Euclidean distance >= 0.4 * sqrt(min_hamming))."""
    min_hamming = min(min_hamming, dims)
    for _ in range(10_000):
        bits = rng.integers(0, 2, size=(n_classes, dims))
        ham = (bits[:, None, :] != bits[None, :, :]).sum(axis=2)
        np.fill_diagonal(ham, dims)
        if ham.min() >= min_hamming:
            return np.where(bits == 1, HIGH, LOW).astype(float)
    raise ValueError(f"cannot place {n_classes} classes {min_hamming} bits apart in {dims} dims")


def generate_synthetic(spec: SyntheticSpec) -> SyntheticStream:
    rng = np.random.default_rng(spec.seed)
    if spec.centers is None:
        centers = binary_centers(spec.n_classes, spec.dims, rng, spec.min_hamming)
    else:
        centers = np.asarray(spec.centers, dtype=float)
        if centers.shape != (spec.n_classes, spec.dims):
            raise ValueError("centers must be (n_classes, dims)")

    if spec.order == "round_robin":
        y = np.arange(spec.n_samples) % spec.n_classes
    elif spec.order == "blocked":
        y = np.sort(np.arange(spec.n_samples) % spec.n_classes)
    else:
        raise ValueError(f"unknown order {spec.order!r}")

    shift = np.zeros(spec.n_samples)
    for h, amount in spec.drift:
        shift[h:] += amount  # h is 1-based, so index h is the first post-drift sample

    noise = rng.normal(0.0, spec.spread, size=(spec.n_samples, spec.dims))
    X = np.clip(centers[y] + shift[:, None] + noise, 0.0, 1.0)

    labels = y + 1  # classes are 1..k
    if spec.shuffle_labels:
        labels = rng.permutation(labels)
    visible = rng.random(spec.n_samples) < spec.visibility
    return SyntheticStream(X, labels, visible, centers)


PRESETS = {
    "separable4": SyntheticSpec(),
    "semisup20": SyntheticSpec(visibility=0.2),
    "drift": SyntheticSpec(drift=[(1000, 0.3)]),
    "shuffled4": SyntheticSpec(n_samples=10_000, shuffle_labels=True),
    "wide140": SyntheticSpec(dims=140, n_samples=3360),
}


def preset(name: str, **overrides) -> SyntheticSpec:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    d = PRESETS[name].to_dict()
    d.update(overrides)
    return SyntheticSpec(**d)
