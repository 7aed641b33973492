"""Posterior expectations of ``integral M(x) q(x) dx`` for simple ``M``.

Every cell contributes a uniform part and a split part::

    E_z = (u/p_z) Mbar_z + g_z [ (n0+a)/(n+2a) E_z0 + (n1+a)/(n+2a) E_z1 ]

where ``Mbar_z`` is the mean of ``M`` over the cell.  Empty cells have
``E_z = Mbar_z``.  A cell holding one multi-point repeats the same linear
step at every level below it; that chain is unrolled until its accumulated
factor drops below :data:`CHAIN_TOL` and then evaluated back to front, so
``M = 1`` reproduces exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .index import EvidenceIndex, build_index
from .model import ModelParams

__all__ = ["CHAIN_TOL", "Indicator", "MomentSpec", "Power", "cell_mean", "indicator_moment",
           "moment", "power_moment"]

CHAIN_TOL = 1e-15
_CHAIN_MAX = 1_000_000
_LEAF_CHUNK = 8192


class MomentSpec:
    """Base class of the supported test functions ``M``."""


@dataclass(frozen=True)
class Power(MomentSpec):
    """``M(x) = x**k``.  ``k = 0`` is the constant 1, kept for normalization checks."""

    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"power must be a nonnegative integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))


@dataclass(frozen=True)
class Indicator(MomentSpec):
    """``M(x) = 1{x <= a}``, giving the posterior distribution function at ``a``."""

    a: float

    def __post_init__(self):
        a = float(self.a)
        if not 0.0 <= a < 1.0:
            raise ValueError(f"indicator threshold must lie in [0, 1), got {self.a!r}")
        object.__setattr__(self, "a", a + 0.0)


def cell_mean(k: int, lo, width):
    """Mean of ``x**k`` over ``[lo, lo + width)``.

    Uses ``sum_j C(k+1, j+1) lo^(k-j) width^j / (k+1)`` so narrow cells do not
    lose precision to cancellation.
    """
    lo = np.asarray(lo, dtype=np.float64)
    width = np.asarray(width, dtype=np.float64)
    if k == 0:
        return np.ones(np.broadcast(lo, width).shape)
    # Horner in the width
    out = np.zeros(np.broadcast(lo, width).shape)
    for j in range(k, -1, -1):
        out = out * width + comb(k + 1, j + 1, exact=True) / (k + 1) * lo ** (k - j)
    return out


def _chain_params(n: int, idx: EvidenceIndex):
    """``(q, g, keep, J)`` for the chain below a multiplicity-n leaf."""
    ctx = idx._ctx
    _, heavy, lp = ctx.multipoint(n)[:3]
    q = 0.0 if heavy else math.exp(ctx.lu - lp)
    g = 1.0 - q
    alpha = idx.params.alpha
    keep = (n + alpha) / (n + 2.0 * alpha)
    rate = g * keep
    if rate <= 0.0:
        J = 1
    else:
        J = min(_CHAIN_MAX, max(1, math.ceil(math.log(CHAIN_TOL) / math.log(rate))))
    return q, g, keep, J


def _offsets(idx: EvidenceIndex) -> tuple[np.ndarray, np.ndarray]:
    """Left end and width of every stored cell."""
    depth = idx.depth
    width = np.ldexp(1.0, -depth.astype(np.int64))
    lo = np.zeros(idx.size)
    internal = idx.left >= 0
    for d in range(int(depth.max()) + 1 if idx.size else 0):
        ids = np.flatnonzero(internal & (depth == d))
        if ids.size == 0:
            continue
        lo[idx.left[ids]] = lo[ids]
        lo[idx.right[ids]] = lo[ids] + 0.5 * width[ids]
    return lo, width


def _chain_power(k, pts, lo, width, q, g, keep, J):
    """Vectorized multi-point chains for leaves sharing one multiplicity."""
    L = pts.size
    side = 1.0 - keep
    # rescaled position of the point inside the current chain cell
    y = (pts - lo) / width
    offs = np.empty((J + 1, L))
    sibs = np.empty((J, L))
    ws = np.empty((J + 1, L))
    o = lo.copy()
    w = width.copy()
    for j in range(J):
        offs[j] = o
        ws[j] = w
        bit = y >= 0.5
        half = 0.5 * w
        sibs[j] = np.where(bit, o, o + half)
        o = np.where(bit, o + half, o)
        y = np.where(bit, 2.0 * y - 1.0, 2.0 * y)
        w = half
    offs[J] = o
    ws[J] = w
    E = cell_mean(k, offs[J], ws[J])
    for j in range(J - 1, -1, -1):
        E = q * cell_mean(k, offs[j], ws[j]) + g * (keep * E + side * cell_mean(k, sibs[j], 0.5 * ws[j]))
    return E


def power_moment(idx: EvidenceIndex, k: int) -> float:
    """``E[integral x^k q(x) dx | D]`` over the whole tree."""
    lo, width = _offsets(idx)
    E = np.zeros(idx.size)
    leaves = np.flatnonzero(idx.left < 0)
    counts = idx.counts
    empty = leaves[counts[leaves] == 0]
    E[empty] = cell_mean(k, lo[empty], width[empty])
    occupied = leaves[counts[leaves] > 0]
    pts_all = idx.data.points
    for n in np.unique(counts[occupied]):
        ids = occupied[counts[occupied] == n]
        q, g, keep, J = _chain_params(int(n), idx)
        for start in range(0, ids.size, _LEAF_CHUNK):
            chunk = ids[start:start + _LEAF_CHUNK]
            E[chunk] = _chain_power(k, pts_all[idx.lo[chunk]], lo[chunk], width[chunk], q, g, keep, J)

    alpha = idx.params.alpha
    internal = idx.left >= 0
    for d in range(int(idx.depth.max()) if idx.size else -1, -1, -1):
        ids = np.flatnonzero(internal & (idx.depth == d))
        if ids.size == 0:
            continue
        l, r = idx.left[ids], idx.right[ids]
        n = counts[ids]
        w0 = (counts[l] + alpha) / (n + 2.0 * alpha)
        q = idx.uniform[ids]
        E[ids] = q * cell_mean(k, lo[ids], width[ids]) + (1.0 - q) * (w0 * E[l] + (1.0 - w0) * E[r])
    return float(E[0])


def _chain_indicator(y: float, v: float, q: float, g: float, keep: float, J: int) -> float:
    """Indicator chain below a multi-point leaf.

    ``y`` and ``v`` are the threshold and the point in leaf coordinates.
    """
    side = 1.0 - keep
    steps = []
    tail = None
    for _ in range(J):
        by = y >= 0.5
        bv = v >= 0.5
        y_child = 2.0 * y - 1.0 if by else 2.0 * y
        if by != bv:
            # threshold and point part here: the point's half lies wholly
            # below the threshold iff it is the left half
            steps.append((y, 0.0 if bv else 1.0, y_child))
            tail = None
            break
        steps.append((y, None, 1.0 if by else 0.0))
        y = y_child
        v = 2.0 * v - 1.0 if bv else 2.0 * v
        tail = y
    E = tail if tail is not None else 0.0
    for mbar, e_point, e_sib in reversed(steps):
        if e_point is not None:
            E = e_point
        E = q * mbar + g * (keep * E + side * e_sib)
    return E


def indicator_moment(idx: EvidenceIndex, spec: Indicator) -> float:
    """``P[X <= a | D]`` by following the single branch that contains ``a``."""
    depth, lo, hi, lp, flag, left, right = idx._lists
    uniform = idx.uniform
    alpha = idx.params.alpha
    y = spec.a
    node = 0
    stack = []
    while left[node] >= 0:
        by = y >= 0.5
        stack.append((node, y, by))
        y = 2.0 * y - 1.0 if by else 2.0 * y
        node = right[node] if by else left[node]
    n = hi[node] - lo[node]
    if n == 0:
        E = y
    else:
        v = float(idx.data.points[lo[node]])
        for _, _, by in stack:
            v = 2.0 * v - 1.0 if by else 2.0 * v
        q, g, keep, J = _chain_params(n, idx)
        E = _chain_indicator(y, v, q, g, keep, J)
    for node, y, by in reversed(stack):
        l, r = left[node], right[node]
        w0 = (hi[l] - lo[l] + alpha) / (hi[node] - lo[node] + 2.0 * alpha)
        e0, e1 = (1.0, E) if by else (E, 0.0)
        q = float(uniform[node])
        E = q * y + (1.0 - q) * (w0 * e0 + (1.0 - w0) * e1)
    return float(E)


def moment(data, spec: MomentSpec, params: ModelParams | None = None, min_depth: int = 0,
           index: EvidenceIndex | None = None) -> float:
    """Posterior expectation of ``integral M(x) q(x) dx``.

    Parameters
    ----------
    data : Dataset or array_like
    spec : Power or Indicator
    params : ModelParams, optional
    min_depth : int
        Forced recursion depth, see :func:`bayestree.engine.evaluate`.
    index : EvidenceIndex, optional
        Reuse a prebuilt index instead of running the recursion again.
    """
    idx = index if index is not None else build_index(data, params, min_depth=min_depth)
    if isinstance(spec, Power):
        return power_moment(idx, spec.k)
    if isinstance(spec, Indicator):
        return indicator_moment(idx, spec)
    raise TypeError(f"unsupported moment spec {spec!r}")
