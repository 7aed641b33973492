"""Reference densities on [0,1) used in the experiments, with seeded samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import betainc, betaincinv

from .model import Dataset

__all__ = ["DISTRIBUTIONS", "ReferenceDistribution", "get", "l1_error", "sample", "true_density",
           "grid"]

_BELOW_ONE = math.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class ReferenceDistribution:
    """A density on [0,1) with exact pdf, cdf and inverse cdf."""

    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    ppf: Callable[[np.ndarray], np.ndarray]
    mean: float


def _beta36_pdf(x):
    return 168.0 * x**2 * (1.0 - x) ** 5


def _piecewise(cut: float, low: float, high: float) -> tuple:
    mass = low * cut

    def pdf(x):
        return np.where(x < cut, low, high)

    def cdf(x):
        return np.where(x < cut, low * x, mass + high * (x - cut))

    def ppf(u):
        return np.where(u < mass, u / low, cut + (u - mass) / high)

    return pdf, cdf, ppf


_jump_half = _piecewise(0.5, 9.0 / 5.0, 1.0 / 5.0)
# the 2:1 level ratio at 1/3, normalized
_jump_third = _piecewise(1.0 / 3.0, 1.5, 0.75)

DISTRIBUTIONS = {
    "Beta36": ReferenceDistribution(
        "Beta36", _beta36_pdf,
        lambda x: betainc(3.0, 6.0, x),
        lambda u: betaincinv(3.0, 6.0, u),
        1.0 / 3.0,
    ),
    "Singular": ReferenceDistribution(
        "Singular",
        lambda x: 0.5 / np.sqrt(1.0 - x),
        lambda x: 1.0 - np.sqrt(1.0 - x),
        lambda u: 1.0 - (1.0 - u) ** 2,
        2.0 / 3.0,
    ),
    "Linear": ReferenceDistribution(
        "Linear", lambda x: 2.0 * x, lambda x: x * x, np.sqrt, 2.0 / 3.0,
    ),
    "JumpHalf": ReferenceDistribution("JumpHalf", *_jump_half, 0.3),
    "JumpThird": ReferenceDistribution("JumpThird", *_jump_third, 5.0 / 12.0),
}


def get(dist) -> ReferenceDistribution:
    """Look up a distribution by name (case-insensitive, ``-``/``_`` ignored)."""
    if isinstance(dist, ReferenceDistribution):
        return dist
    key = str(dist).replace("-", "").replace("_", "").lower()
    for name, d in DISTRIBUTIONS.items():
        if name.lower() == key:
            return d
    raise ValueError(f"unknown distribution {dist!r}; choose from {', '.join(DISTRIBUTIONS)}")


def sample(dist, n: int, seed: int) -> Dataset:
    """``n`` inverse-cdf draws from a PCG64 stream seeded with ``seed``.

    Identical ``(dist, n, seed)`` give bit-identical datasets.
    """
    if n < 0:
        raise ValueError(f"sample size must be >= 0, got {n}")
    d = get(dist)
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random(n)
    x = np.asarray(d.ppf(u), dtype=np.float64)
    np.clip(x, 0.0, _BELOW_ONE, out=x)
    return Dataset(x)


def true_density(dist, x):
    """Exact density; Singular grows without bound as ``x -> 1``."""
    d = get(dist)
    out = d.pdf(np.asarray(x, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def grid(size: int) -> np.ndarray:
    """Cell midpoints ``(i + 0.5) / size``."""
    return (np.arange(size) + 0.5) / size


def l1_error(density, dist, grid_size: int = 1000) -> float:
    """Grid L1 distance ``mean_i |p(x_i) - q(x_i)|`` on the midpoint grid.

    ``density`` is a vectorized callable, an array of values on the grid, or
    a Dataset whose predictive density is used.
    """
    if grid_size < 100:
        raise ValueError(f"grid_size must be >= 100, got {grid_size}")
    xs = grid(grid_size)
    if isinstance(density, Dataset):
        from .index import build_index, local_query

        idx = build_index(density)
        vals = np.array([local_query(idx, x) for x in xs])
    elif callable(density):
        vals = np.asarray(density(xs), dtype=np.float64)
    else:
        vals = np.asarray(density, dtype=np.float64)
        if vals.shape != xs.shape:
            raise ValueError(f"expected {grid_size} density values, got shape {vals.shape}")
    return float(np.mean(np.abs(vals - get(dist).pdf(xs))))
