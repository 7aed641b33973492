"""Precomputed sub-evidences for fast point queries.

One pass of the recursion stores ``ln p_z(D_z)`` for every cell down to the
separation level.  Adding one or two copies of a query point ``x`` only
changes the cells on the path of ``x``, so ``p(D, x)`` and ``p(D, x, x)``
can then be recomputed in time proportional to the depth of that path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._pykernel import _Ctx
from .engine import as_dataset, check_params, depth_cap, divergence_class
from .model import Dataset, DivergenceClass, ModelParams, NodeAddress
from .numerics import LogValue, is_heavy, variance_from_log_moments

__all__ = ["EvidenceIndex", "build_index", "local_query", "augmented_log_evidence"]


@dataclass(frozen=True, eq=False)
class EvidenceIndex:
    """Cells of the recursion in pre-order.

    Children always carry larger ids than their parent.  Leaves (``left ==
    -1``) are cells closed in form: empty or holding one (multi-)point.
    ``lo:hi`` is the slice of ``data.points`` inside each cell.
    """

    data: Dataset
    params: ModelParams
    min_depth: int
    depth: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    log_p: np.ndarray
    divergent: np.ndarray
    left: np.ndarray
    right: np.ndarray
    g: np.ndarray
    uniform: np.ndarray  # u / p_z, zero on divergent cells
    divergence_class: DivergenceClass
    _ctx: _Ctx = field(repr=False)
    _lists: tuple = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.depth.size)

    @property
    def counts(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def log_evidence(self) -> LogValue:
        if self.divergent[0]:
            return LogValue.divergent(float(self.log_p[0]), self.divergence_class)
        return LogValue.finite(float(self.log_p[0]))

    def lookup(self, address: NodeAddress) -> tuple[float, bool, int]:
        """``(ln p_z, divergent, n_z)`` for any cell, stored or not.

        Cells below a stored leaf hold either nothing or the leaf's
        multi-point, so their evidence follows from the closed form.
        """
        depth, lo, hi, lp, flag, left, right = self._lists
        node = 0
        bits = address.bits
        for i, b in enumerate(bits):
            if left[node] < 0:
                n = hi[node] - lo[node]
                if n == 0:
                    return 0.0, False, 0
                v = float(self.data.points[lo[node]])
                if not address.contains(v):
                    return 0.0, False, 0
                return _mp(self._ctx, n, address.depth) + (n,)
            node = right[node] if b == "1" else left[node]
        return lp[node], flag[node], hi[node] - lo[node]


def build_index(data, params: ModelParams | None = None, min_depth: int = 0,
                backend: str | None = None) -> EvidenceIndex:
    """Run the recursion once and keep every cell's evidence."""
    data = as_dataset(data)
    params = check_params(params)
    kernel = _backend.get_kernel(backend)
    depth, lo, hi, lp, flag, left, right = kernel.evidence_nodes(
        data.points, params.s, params.alpha, min_depth, depth_cap()
    )
    lu = math.log(params.u)
    with np.errstate(over="ignore"):
        uniform = np.where(flag, 0.0, np.exp(lu - lp))
        g = np.where(flag, 1.0, -np.expm1(lu - lp))
    ctx = _Ctx(params.s, params.alpha, np.zeros(1), min_depth, -1, depth_cap())
    lists = tuple(arr.tolist() for arr in (depth, lo, hi, lp, flag, left, right))
    return EvidenceIndex(
        data=data, params=params, min_depth=min_depth,
        depth=depth, lo=lo, hi=hi, log_p=lp, divergent=flag, left=left, right=right,
        g=g, uniform=uniform, divergence_class=divergence_class(data, params),
        _ctx=ctx, _lists=lists,
    )


def _mp(ctx: _Ctx, n: int, depth: int) -> tuple[float, bool]:
    lwb, heavy, lp = ctx.multipoint(n)[:3]
    if heavy:
        return -depth * lwb, True
    return lp, False


def _combine(ctx: _Ctx, t: float, flag: bool) -> float:
    return ctx.ls + t if flag else ctx.log_mix(t)


def _step(y: float) -> tuple[int, float]:
    if y < 0.5:
        return 0, 2.0 * y
    return 1, 2.0 * y - 1.0


def _descend(idx: EvidenceIndex, x: float):
    """Follow ``x`` to its stored leaf.

    Returns the path ``[(node, side), ...]``, the leaf id, ``x`` rescaled into
    the leaf and the leaf's point rescaled the same way (None if empty).
    """
    depth, lo, hi, lp, flag, left, right = idx._lists
    node = 0
    y = x
    path = []
    while left[node] >= 0:
        side, y = _step(y)
        path.append((node, side))
        node = right[node] if side else left[node]
    v = None
    if hi[node] > lo[node]:
        v = float(idx.data.points[lo[node]])
        for _, side in path:
            v = 2.0 * v - side
    return path, node, y, v


def _climb(idx: EvidenceIndex, path, lp: float, flag: bool, r: int) -> tuple[float, bool]:
    """Recombine the path cells with ``r`` extra points on the ``x`` side."""
    ctx = idx._ctx
    depth, lo, hi, lps, flags, left, right = idx._lists
    for node, side in reversed(path):
        sib = left[node] if side else right[node]
        n_sib = hi[sib] - lo[sib]
        n_x = hi[node] - lo[node] - n_sib + r
        n0, n1 = (n_sib, n_x) if side else (n_x, n_sib)
        t = lp + lps[sib] - ctx.log_weight(n0, n1)
        flag = flag or flags[sib]
        lp = _combine(ctx, t, flag)
    return lp, flag


def augmented_log_evidence(idx: EvidenceIndex, x: float, r: int = 1) -> tuple[float, bool]:
    """``(ln p(D, x^r), divergent)`` with ``r`` copies of ``x`` added."""
    ctx = idx._ctx
    path, leaf, y, v = _descend(idx, x)
    d = idx._lists[0][leaf]
    if v is None:
        lp, flag = _mp(ctx, r, d)
    else:
        n = idx._lists[2][leaf] - idx._lists[1][leaf]
        if y == v:
            lp, flag = _mp(ctx, n + r, d)
        else:
            # walk down until x and the multi-point fall into different halves
            k = d
            while (y < 0.5) == (v < 0.5):
                _, y = _step(y)
                _, v = _step(v)
                k += 1
            lpa, fa = _mp(ctx, n, k + 1)
            lpb, fb = _mp(ctx, r, k + 1)
            flag = fa or fb
            lp = _combine(ctx, lpa + lpb - ctx.log_weight(n, r), flag)
            lw = ctx.log_weight(n + r, 0)
            for _ in range(k - d):
                lp = _combine(ctx, lp - lw, flag)
    return _climb(idx, path, lp, flag, r)


def _height(idx: EvidenceIndex, x: float) -> float:
    ctx = idx._ctx
    path, leaf, y, v = _descend(idx, x)
    s_over_u = ctx.s_over_u
    if v is None:
        h = s_over_u
    else:
        n = idx._lists[2][leaf] - idx._lists[1][leaf]
        d = idx._lists[0][leaf]
        if y == v:
            h = ctx.multipoint(n)[5]
        else:
            k = d
            while (y < 0.5) == (v < 0.5):
                _, y = _step(y)
                _, v = _step(v)
                k += 1
            # cell k holds the multi-point and x in opposite halves
            lp, flag = _mp(ctx, n, k + 1)
            lw = ctx.log_weight(n, 0)
            lp = _combine(ctx, lp - lw, flag)
            h = _g(ctx, lp, flag) * (1.0 + s_over_u)
            for _ in range(k - d):
                lp = _combine(ctx, lp - lw, flag)
                h = _g(ctx, lp, flag) * (1.0 + h)
    g = idx.g
    for node, _ in reversed(path):
        h = float(g[node]) * (1.0 + h)
    return h


def _g(ctx: _Ctx, lp: float, flag: bool) -> float:
    if flag:
        return 1.0
    return -math.expm1(ctx.lu - lp)


def local_query(idx: EvidenceIndex, x: float, kind: str = "density") -> float:
    """Point query against a prebuilt index.

    ``kind`` is ``density`` (``p(x|D)``), ``variance`` (``Var[q(x)|D]``),
    ``height`` (``E[h(x)|D]``) or ``cdf`` (``P[X <= x | D]``).  Divergent
    densities and variances come back as ``inf``.
    """
    x = float(x)
    if not 0.0 <= x < 1.0:
        raise ValueError(f"query point {x!r} outside [0, 1)")
    x += 0.0
    if kind == "height":
        return _height(idx, x)
    if kind == "cdf":
        from .moments import Indicator, indicator_moment

        return indicator_moment(idx, Indicator(x))
    if kind not in ("density", "variance"):
        raise ValueError(f"unknown query kind {kind!r}")
    params = idx.params
    m = idx.data.multiplicity(x)
    lp0 = float(idx.log_p[0])
    if kind == "density":
        if is_heavy(m + 1, params):
            return math.inf
        lp1, _ = augmented_log_evidence(idx, x, 1)
        return LogValue.finite(lp1 - lp0).value
    if is_heavy(m + 2, params):
        return math.inf
    lp1, _ = augmented_log_evidence(idx, x, 1)
    lp2, _ = augmented_log_evidence(idx, x, 2)
    return variance_from_log_moments(lp1 - lp0, lp2 - lp0)
