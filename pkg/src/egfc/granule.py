"""Gaussian membership functions and single-granule recursive statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Optional

import numpy as np

SIGMA_MAX = 1.0 / (2.0 * math.pi)  # Stigler limit, also the creation width
SIGMA_MIN = 1.0 / (4.0 * math.pi)


class InvalidInputError(ValueError):
    """Raised for non-finite samples, dimension mismatches and degenerate widths."""


def as_sample(x, n: Optional[int] = None) -> np.ndarray:
    """Validate a feature vector and return it as a 1-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidInputError(f"expected a 1-D feature vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise InvalidInputError(f"dimension mismatch: expected {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("feature vector contains NaN or Inf")
    return arr


def membership_degree(mu, sigma, x):
    """Height-1 Gaussian exp(-(x - mu)^2 / (2 sigma^2)).

    Works elementwise on scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("membership evaluated at a non-finite point")
    if not np.all(sigma > 0) or not np.all(np.isfinite(sigma)):
        raise InvalidInputError("dispersion must be finite and > 0")
    d = x - mu
    out = np.exp(-(d * d) / (2.0 * sigma * sigma))
    return float(out) if out.ndim == 0 else out


def clamp_sigma(sigma):
    return np.clip(sigma, SIGMA_MIN, SIGMA_MAX)


def recursive_moments(mu: np.ndarray, sigma: np.ndarray, weight: int, x: np.ndarray):
    """One step of the recursive mean / dispersion update.

    ``weight`` is the count *including* the incoming sample. Returns
    ``(mu_new, sigma_new)`` with the dispersion not yet clamped.
    """
    w = float(weight)
    d = x - mu
    mu_new = ((w - 1.0) * mu + x) / w
    sigma_new = np.sqrt(((w - 1.0) / w) * sigma * sigma + (d * d) / w)
    return mu_new, sigma_new


@dataclass(eq=False)
class Granule:
    """One fuzzy rule: axis-aligned Gaussian memberships plus an optional class."""

    mu: np.ndarray
    sigma: np.ndarray
    label: Optional[Hashable] = None
    update_count: int = 1
    inactivity: int = 0
    uid: int = -1
    created_at: int = 0
    born_labeled: bool = field(default=False)

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    def copy(self) -> "Granule":
        return Granule(
            self.mu.copy(), self.sigma.copy(), self.label, self.update_count,
            self.inactivity, self.uid, self.created_at, self.born_labeled,
        )

    def activation(self, x) -> float:
        return granule_activation(self, x)

    def __repr__(self):
        return (
            f"Granule(uid={self.uid}, label={self.label!r}, n={self.n}, "
            f"count={self.update_count}, inactive={self.inactivity})"
        )


def granule_activation(g: Granule, x) -> float:
    """Minimum t-norm over the per-dimension membership degrees."""
    x = as_sample(x, g.n)
    return float(np.min(membership_degree(g.mu, g.sigma, x)))


def create_granule(x, label=None) -> Granule:
    x = as_sample(x)
    return Granule(
        mu=x.copy(),
        sigma=np.full(x.shape[0], SIGMA_MAX),
        label=label,
        born_labeled=label is not None,
    )


def absorb_sample(g: Granule, x) -> np.ndarray:
    """Fold ``x`` into ``g`` in place.

    The creating sample counts as the first observation, so after k
    absorptions ``g.mu`` is the mean of k + 1 points. Returns the dispersion
    before clamping (useful for checking the recursion).
    """
    x = as_sample(x, g.n)
    w = g.update_count + 1
    mu_new, raw = recursive_moments(g.mu, g.sigma, w, x)
    g.mu = mu_new
    g.sigma = clamp_sigma(raw)
    g.update_count = w
    g.inactivity = 0
    return raw
