"""Pure-Python evidence recursion.

Mirrors ``_kernel.pyx`` operation for operation and is used when the compiled
extension is not importable (or ``BAYESTREE_PURE_PYTHON=1``).
"""

import math
import sys
from contextlib import contextmanager

import numpy as np

from ._errors import DepthCapExceeded
from .numerics import HEAVY_TOL, LOG_MIX_CUTOFF

BACKEND = "python"


@contextmanager
def _recursion_room(depth_cap):
    old = sys.getrecursionlimit()
    need = 4 * depth_cap + 500
    if need > old:
        sys.setrecursionlimit(need)
    try:
        yield
    finally:
        sys.setrecursionlimit(old)


class _Ctx:
    def __init__(self, s, alpha, a, min_depth, max_depth, depth_cap):
        self.s = s
        self.u = 1.0 - s
        self.alpha = alpha
        self.ls = math.log(s) if s > 0.0 else -math.inf
        self.lu = math.log(self.u)
        self.s_over_u = s / self.u
        self.a = np.asarray(a, dtype=np.float64)
        self.ndim = self.a.size
        self.min_depth = min_depth
        self.max_depth = max_depth
        self.depth_cap = depth_cap
        self.lg_const = 2.0 * math.lgamma(alpha) - math.lgamma(2.0 * alpha)
        self.count = 0
        self._mp = {}
        self.empty = empty_cell_table(s, a, max_depth) if max_depth >= 0 else None

    def log_weight(self, n0, n1):
        if n0 == 0 and n1 == 0:
            return 0.0
        if n0 > n1:
            n0, n1 = n1, n0
        n = n0 + n1
        a = self.alpha
        return (-n * math.log(2.0) + math.lgamma(n + 2.0 * a)
                - math.lgamma(n0 + a) - math.lgamma(n1 + a) + self.lg_const)

    def log_mix(self, t):
        if self.s == 0.0 or t == -math.inf:
            return self.lu
        a = self.ls + t
        if a - self.lu > LOG_MIX_CUTOFF:
            return a
        if a > self.lu:
            return a + math.log1p(math.exp(self.lu - a))
        return self.lu + math.log1p(math.exp(a - self.lu))

    def multipoint(self, n):
        """Depth-independent closed form for a cell holding one n-fold point.

        Returns (lwbar, heavy, log_p, g, hbar, h_at_point, dims).
        """
        hit = self._mp.get(n)
        if hit is not None:
            return hit
        if n <= 1:
            lwb = self.ls
        else:
            lwb = self.ls - self.log_weight(n, 0) if self.s > 0.0 else -math.inf
            if abs(lwb) < HEAVY_TOL:
                lwb = 0.0
        heavy = n >= 2 and lwb >= 0.0
        dims = np.zeros(self.ndim)
        alpha = self.alpha
        if n <= 1:
            res = (lwb, False, 0.0, self.s, self.s_over_u, self.s_over_u, self.a.copy())
        elif heavy:
            hbar = (n + 2.0 * alpha) / alpha + self.s_over_u
            res = (lwb, True, 0.0, 1.0, hbar, math.inf, dims)
        else:
            wb = math.exp(lwb)
            lp = self.lu - math.log1p(-wb)
            keep = (n + alpha) / (n + 2.0 * alpha)
            side = alpha / (n + 2.0 * alpha)
            hbar = wb * (1.0 + side * self.s_over_u) / (1.0 - wb * keep)
            dims[0] = -math.expm1(lwb)
            a = self.a
            for k in range(self.ndim - 1):
                dims[k + 1] = wb * float(np.dot(dims[: k + 1], a[k::-1]))
            res = (lwb, False, lp, wb, hbar, wb / (1.0 - wb), dims)
        self._mp[n] = res
        return res


def empty_cell_table(s, a, max_depth):
    """Finite-depth statistics of an empty cell by remaining depth ``r``.

    Empty cells all look alike (evidence exactly 1, split probability ``s``),
    so they are tabulated once instead of being expanded to the depth limit.
    Returns ``(h, hbar, dims)`` with shapes ``(r+1,)``, ``(r+1,)``, ``(r+1, ndim)``.
    """
    a = np.asarray(a, dtype=np.float64)
    ndim = a.size
    R = max(int(max_depth), 0)
    h = np.zeros(R + 1)
    hbar = np.zeros(R + 1)
    dims = np.zeros((R + 1, ndim))
    dims[0, 0] = 1.0
    for r in range(1, R + 1):
        h[r] = s * (1.0 + h[r - 1])
        hbar[r] = s * (1.0 + hbar[r - 1])
        dims[r, 0] = 1.0 - s
        if ndim > 1:
            dims[r, 1:] = s * np.convolve(dims[r - 1], dims[r - 1])[: ndim - 1]
    return h, hbar, dims


def _split_index(arr, lo, hi):
    return lo + int(np.searchsorted(arr[lo:hi], 0.5, side="left"))


def _rescale(arr, lo, mid, hi):
    arr[lo:mid] *= 2.0
    arr[mid:hi] *= 2.0
    arr[mid:hi] -= 1.0


def _rec(c, arr, lo, hi, depth, x):
    c.count += 1
    if depth > c.depth_cap:
        raise DepthCapExceeded(
            f"recursion depth {depth} exceeds cap {c.depth_cap}; "
            "raise BAYESTREE_DEPTH_CAP if the data really needs it"
        )
    n = hi - lo
    has_x = not math.isnan(x)
    if c.max_depth >= 0:
        if depth == c.max_depth:
            dims = np.zeros(c.ndim)
            dims[0] = 1.0
            return 0.0, False, 0.0, 0.0, dims
        if n == 0:
            eh, ehb, ed = c.empty
            r = c.max_depth - depth
            return 0.0, False, (eh[r] if has_x else 0.0), ehb[r], ed[r].copy()
    elif depth >= c.min_depth and (n == 0 or arr[lo] == arr[hi - 1]):
        if n == 0 or not has_x or x == arr[lo]:
            lwb, heavy, lp, g, hbar, h_pt, dims = c.multipoint(n)
            if heavy:
                lp = -depth * lwb
            h = 0.0
            if has_x:
                h = c.s_over_u if n == 0 else h_pt
            return lp, heavy, h, hbar, dims.copy()

    mid = _split_index(arr, lo, hi)
    _rescale(arr, lo, mid, hi)
    x0 = x1 = math.nan
    if has_x:
        if x < 0.5:
            x0 = 2.0 * x
        else:
            x1 = 2.0 * x - 1.0
    lp0, f0, h0, hb0, d0 = _rec(c, arr, lo, mid, depth + 1, x0)
    lp1, f1, h1, hb1, d1 = _rec(c, arr, mid, hi, depth + 1, x1)

    n0 = mid - lo
    n1 = hi - mid
    t = lp0 + lp1 - c.log_weight(n0, n1)
    if f0 or f1:
        lp = c.ls + t
        flag = True
        g = 1.0
        g0 = 0.0
    else:
        lp = c.log_mix(t)
        flag = False
        g0 = math.exp(c.lu - lp)
        g = -math.expm1(c.lu - lp)
    h = g * (1.0 + h0 + h1) if has_x else 0.0
    den = n + 2.0 * c.alpha
    hbar = g * (1.0 + (n0 + c.alpha) / den * hb0 + (n1 + c.alpha) / den * hb1)
    dims = np.empty(c.ndim)
    dims[0] = g0
    if c.ndim > 1:
        dims[1:] = g * np.convolve(d0, d1)[: c.ndim - 1]
    return lp, flag, h, hbar, dims


def bayes_tree(points, x, a, s, alpha, min_depth=0, max_depth=-1, depth_cap=1100):
    """Run the evidence recursion over sorted ``points``.

    Returns ``(log_p, divergent, h_x, hbar, dims, count)``.  ``x`` may be NaN
    when no height query is wanted.  ``max_depth >= 0`` selects the
    finite-depth tree (no closed forms, leaves at that depth).
    """
    arr = np.array(points, dtype=np.float64)
    c = _Ctx(float(s), float(alpha), a, int(min_depth), int(max_depth), int(depth_cap))
    with _recursion_room(c.depth_cap):
        lp, flag, h, hbar, dims = _rec(c, arr, 0, arr.size, 0, float(x))
    return lp, bool(flag), h, hbar, dims, c.count


def _rec_nodes(c, arr, lo, hi, depth, out):
    if depth > c.depth_cap:
        raise DepthCapExceeded(f"recursion depth {depth} exceeds cap {c.depth_cap}")
    depths, los, his, lps, flags, lefts, rights = out
    me = len(depths)
    depths.append(depth)
    los.append(lo)
    his.append(hi)
    lps.append(0.0)
    flags.append(False)
    lefts.append(-1)
    rights.append(-1)
    n = hi - lo
    if depth >= c.min_depth and (n == 0 or arr[lo] == arr[hi - 1]):
        lwb, heavy, lp, _, _, _, _ = c.multipoint(n)
        lps[me] = -depth * lwb if heavy else lp
        flags[me] = heavy
        return lps[me], heavy
    mid = _split_index(arr, lo, hi)
    _rescale(arr, lo, mid, hi)
    lefts[me] = len(depths)
    lp0, f0 = _rec_nodes(c, arr, lo, mid, depth + 1, out)
    rights[me] = len(depths)
    lp1, f1 = _rec_nodes(c, arr, mid, hi, depth + 1, out)
    t = lp0 + lp1 - c.log_weight(mid - lo, hi - mid)
    if f0 or f1:
        lps[me] = c.ls + t
        flags[me] = True
    else:
        lps[me] = c.log_mix(t)
    return lps[me], flags[me]


def evidence_nodes(points, s, alpha, min_depth=0, depth_cap=1100):
    """Evidence of every recursed cell, in pre-order.

    Returns arrays ``(depth, lo, hi, log_p, divergent, left, right)``; leaves
    have ``left == right == -1`` and cover closed-form cells.
    """
    arr = np.array(points, dtype=np.float64)
    c = _Ctx(float(s), float(alpha), np.zeros(1), int(min_depth), -1, int(depth_cap))
    out = ([], [], [], [], [], [], [])
    with _recursion_room(c.depth_cap):
        _rec_nodes(c, arr, 0, arr.size, 0, out)
    depths, los, his, lps, flags, lefts, rights = out
    return (
        np.asarray(depths, dtype=np.int32),
        np.asarray(los, dtype=np.int64),
        np.asarray(his, dtype=np.int64),
        np.asarray(lps, dtype=np.float64),
        np.asarray(flags, dtype=np.bool_),
        np.asarray(lefts, dtype=np.int64),
        np.asarray(rights, dtype=np.int64),
    )
