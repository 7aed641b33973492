# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled evidence recursion.

Same contract as ``_pykernel``: the sorted data are copied once and rescaled
in place level by level (``2x`` / ``2x - 1`` are exact), so cells are index
ranges of one buffer and no sub-arrays are allocated.
"""

from libc.math cimport log, exp, log1p, expm1, lgamma, isnan, fabs, INFINITY, NAN
from libc.stdlib cimport malloc, free
from libcpp.vector cimport vector

import numpy as np

from bayestree._errors import DepthCapExceeded
from bayestree._pykernel import empty_cell_table

BACKEND = "compiled"

cdef double HEAVY_TOL = 1e-12
cdef double LOG_MIX_CUTOFF = log(1e15)
cdef double LN2 = log(2.0)


cdef struct Ctx:
    double s
    double u
    double alpha
    double ls
    double lu
    double s_over_u
    double lg_const
    double* a
    double* arr
    double* work
    double* empty_h
    double* empty_hbar
    double* empty_dims
    int ndim
    int min_depth
    int max_depth
    int depth_cap
    long count


cdef struct Res:
    double lp
    double h
    double hbar
    bint flag


cdef struct NodeRec:
    int depth
    long lo
    long hi
    double lp
    bint flag
    long left
    long right


cdef inline double log_weight(Ctx* c, long n0, long n1) nogil:
    cdef long n = n0 + n1
    cdef long t
    if n == 0:
        return 0.0
    if n0 > n1:
        t = n0
        n0 = n1
        n1 = t
    return (-n * LN2 + lgamma(n + 2.0 * c.alpha)
            - lgamma(n0 + c.alpha) - lgamma(n1 + c.alpha) + c.lg_const)


cdef inline double log_mix(Ctx* c, double t) nogil:
    cdef double a
    if c.s == 0.0 or t == -INFINITY:
        return c.lu
    a = c.ls + t
    if a - c.lu > LOG_MIX_CUTOFF:
        return a
    if a > c.lu:
        return a + log1p(exp(c.lu - a))
    return c.lu + log1p(exp(a - c.lu))


cdef inline double log_wbar(Ctx* c, long n) nogil:
    cdef double v
    if n <= 1:
        return c.ls
    if c.s == 0.0:
        return -INFINITY
    v = c.ls - log_weight(c, n, 0)
    if fabs(v) < HEAVY_TOL:
        return 0.0
    return v


cdef long split_index(double* arr, long lo, long hi) nogil:
    # first index in [lo, hi) with arr[i] >= 0.5
    cdef long a = lo, b = hi, m
    while a < b:
        m = (a + b) >> 1
        if arr[m] < 0.5:
            a = m + 1
        else:
            b = m
    return a


cdef inline void rescale(double* arr, long lo, long mid, long hi) nogil:
    cdef long i
    for i in range(lo, mid):
        arr[i] = 2.0 * arr[i]
    for i in range(mid, hi):
        arr[i] = 2.0 * arr[i] - 1.0


cdef void multipoint(Ctx* c, long n, int depth, bint has_x, Res* out, double* dims) nogil:
    cdef double lwb = log_wbar(c, n)
    cdef double wb, keep, side, acc
    cdef int k, i
    if n <= 1:
        out.lp = 0.0
        out.flag = False
        out.hbar = c.s_over_u
        out.h = c.s_over_u if has_x else 0.0
        if dims != NULL:
            for k in range(c.ndim):
                dims[k] = c.a[k]
        return
    if lwb >= 0.0:
        out.lp = -depth * lwb
        out.flag = True
        out.hbar = (n + 2.0 * c.alpha) / c.alpha + c.s_over_u
        out.h = INFINITY if has_x else 0.0
        if dims != NULL:
            for k in range(c.ndim):
                dims[k] = 0.0
        return
    wb = exp(lwb)
    keep = (n + c.alpha) / (n + 2.0 * c.alpha)
    side = c.alpha / (n + 2.0 * c.alpha)
    out.lp = c.lu - log1p(-wb)
    out.flag = False
    out.hbar = wb * (1.0 + side * c.s_over_u) / (1.0 - wb * keep)
    out.h = wb / (1.0 - wb) if has_x else 0.0
    if dims != NULL:
        dims[0] = -expm1(lwb)
        for k in range(c.ndim - 1):
            acc = 0.0
            for i in range(k + 1):
                acc += dims[i] * c.a[k - i]
            dims[k + 1] = wb * acc


cdef int rec(Ctx* c, long lo, long hi, int depth, double x, Res* out, double* dims) except -1:
    cdef long n = hi - lo
    cdef bint has_x = not isnan(x)
    cdef long mid, n0, n1
    cdef double x0, x1, t, g, g0, den, acc
    cdef Res r0, r1
    cdef double* d0
    cdef double* d1
    cdef int k, i
    c.count += 1
    if depth > c.depth_cap:
        raise DepthCapExceeded(
            f"recursion depth {depth} exceeds cap {c.depth_cap}; "
            "raise BAYESTREE_DEPTH_CAP if the data really needs it")
    if c.max_depth >= 0:
        if depth == c.max_depth:
            out.lp = 0.0
            out.flag = False
            out.h = 0.0
            out.hbar = 0.0
            dims[0] = 1.0
            for k in range(1, c.ndim):
                dims[k] = 0.0
            return 0
        if n == 0:
            k = c.max_depth - depth
            out.lp = 0.0
            out.flag = False
            out.h = c.empty_h[k] if has_x else 0.0
            out.hbar = c.empty_hbar[k]
            for i in range(c.ndim):
                dims[i] = c.empty_dims[k * c.ndim + i]
            return 0
    elif depth >= c.min_depth and (n == 0 or c.arr[lo] == c.arr[hi - 1]):
        if n == 0 or not has_x or x == c.arr[lo]:
            multipoint(c, n, depth, has_x, out, dims)
            if has_x and n == 0:
                out.h = c.s_over_u
            return 0

    mid = split_index(c.arr, lo, hi)
    rescale(c.arr, lo, mid, hi)
    x0 = NAN
    x1 = NAN
    if has_x:
        if x < 0.5:
            x0 = 2.0 * x
        else:
            x1 = 2.0 * x - 1.0
    d0 = c.work + <long>depth * 2 * c.ndim
    d1 = d0 + c.ndim
    rec(c, lo, mid, depth + 1, x0, &r0, d0)
    rec(c, mid, hi, depth + 1, x1, &r1, d1)

    n0 = mid - lo
    n1 = hi - mid
    t = r0.lp + r1.lp - log_weight(c, n0, n1)
    if r0.flag or r1.flag:
        out.lp = c.ls + t
        out.flag = True
        g = 1.0
        g0 = 0.0
    else:
        out.lp = log_mix(c, t)
        out.flag = False
        g0 = exp(c.lu - out.lp)
        g = -expm1(c.lu - out.lp)
    out.h = g * (1.0 + r0.h + r1.h) if has_x else 0.0
    den = n + 2.0 * c.alpha
    out.hbar = g * (1.0 + (n0 + c.alpha) / den * r0.hbar + (n1 + c.alpha) / den * r1.hbar)
    dims[0] = g0
    for k in range(c.ndim - 1):
        acc = 0.0
        for i in range(k + 1):
            acc += d0[i] * d1[k - i]
        dims[k + 1] = g * acc
    return 0


cdef void init_ctx(Ctx* c, double s, double alpha, int min_depth, int max_depth, int depth_cap):
    c.s = s
    c.u = 1.0 - s
    c.alpha = alpha
    c.ls = log(s) if s > 0.0 else -INFINITY
    c.lu = log(c.u)
    c.s_over_u = s / c.u
    c.lg_const = 2.0 * lgamma(alpha) - lgamma(2.0 * alpha)
    c.min_depth = min_depth
    c.max_depth = max_depth
    c.depth_cap = depth_cap
    c.count = 0


def bayes_tree(points, double x, a, double s, double alpha,
               int min_depth=0, int max_depth=-1, int depth_cap=1100):
    """Run the evidence recursion over sorted ``points``.

    Returns ``(log_p, divergent, h_x, hbar, dims, count)``.
    """
    cdef double[::1] arr = np.array(points, dtype=np.float64)
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef Ctx c
    cdef Res res
    cdef int ndim = av.shape[0]
    dims_np = np.empty(ndim, dtype=np.float64)
    cdef double[::1] dims = dims_np
    cdef double[::1] empty = np.zeros(1)
    init_ctx(&c, s, alpha, min_depth, max_depth, depth_cap)
    c.ndim = ndim
    c.a = &av[0]
    c.arr = &arr[0] if arr.shape[0] > 0 else &empty[0]
    cdef double[::1] eh, ehb, ed
    if max_depth >= 0:
        th, thb, td = empty_cell_table(s, av, max_depth)
        eh = th
        ehb = thb
        ed = np.ascontiguousarray(td).ravel()
        c.empty_h = &eh[0]
        c.empty_hbar = &ehb[0]
        c.empty_dims = &ed[0]
    c.work = <double*> malloc(sizeof(double) * (<long>depth_cap + 2) * 2 * ndim)
    if c.work == NULL:
        raise MemoryError()
    try:
        rec(&c, 0, arr.shape[0], 0, x, &res, &dims[0])
    finally:
        free(c.work)
    return res.lp, bool(res.flag), res.h, res.hbar, dims_np, c.count


cdef int rec_nodes(Ctx* c, long lo, long hi, int depth, vector[NodeRec]* nodes) except -1:
    cdef long n = hi - lo
    cdef long me = nodes.size()
    cdef long mid
    cdef NodeRec rec_
    cdef Res leaf
    cdef double lp0, lp1, t
    cdef bint f0, f1
    if depth > c.depth_cap:
        raise DepthCapExceeded(f"recursion depth {depth} exceeds cap {c.depth_cap}")
    rec_.depth = depth
    rec_.lo = lo
    rec_.hi = hi
    rec_.lp = 0.0
    rec_.flag = False
    rec_.left = -1
    rec_.right = -1
    nodes.push_back(rec_)
    if depth >= c.min_depth and (n == 0 or c.arr[lo] == c.arr[hi - 1]):
        multipoint(c, n, depth, False, &leaf, NULL)
        nodes[0][me].lp = leaf.lp
        nodes[0][me].flag = leaf.flag
        return 0
    mid = split_index(c.arr, lo, hi)
    rescale(c.arr, lo, mid, hi)
    nodes[0][me].left = nodes.size()
    rec_nodes(c, lo, mid, depth + 1, nodes)
    nodes[0][me].right = nodes.size()
    rec_nodes(c, mid, hi, depth + 1, nodes)
    lp0 = nodes[0][nodes[0][me].left].lp
    f0 = nodes[0][nodes[0][me].left].flag
    lp1 = nodes[0][nodes[0][me].right].lp
    f1 = nodes[0][nodes[0][me].right].flag
    t = lp0 + lp1 - log_weight(c, mid - lo, hi - mid)
    if f0 or f1:
        nodes[0][me].lp = c.ls + t
        nodes[0][me].flag = True
    else:
        nodes[0][me].lp = log_mix(c, t)
    return 0


def evidence_nodes(points, double s, double alpha, int min_depth=0, int depth_cap=1100):
    """Evidence of every recursed cell in pre-order.

    Returns arrays ``(depth, lo, hi, log_p, divergent, left, right)``.
    """
    cdef double[::1] arr = np.array(points, dtype=np.float64)
    cdef double[::1] empty = np.zeros(1)
    cdef Ctx c
    cdef vector[NodeRec] nodes
    cdef long i, m
    init_ctx(&c, s, alpha, min_depth, -1, depth_cap)
    c.ndim = 0
    c.a = NULL
    c.work = NULL
    c.arr = &arr[0] if arr.shape[0] > 0 else &empty[0]
    rec_nodes(&c, 0, arr.shape[0], 0, &nodes)
    m = nodes.size()
    depth = np.empty(m, dtype=np.int32)
    lo = np.empty(m, dtype=np.int64)
    hi = np.empty(m, dtype=np.int64)
    lp = np.empty(m, dtype=np.float64)
    flag = np.empty(m, dtype=np.uint8)
    left = np.empty(m, dtype=np.int64)
    right = np.empty(m, dtype=np.int64)
    cdef int[::1] vd = depth
    cdef long long[::1] vlo = lo
    cdef long long[::1] vhi = hi
    cdef double[::1] vlp = lp
    cdef long long[::1] vl = left
    cdef long long[::1] vr = right
    cdef unsigned char[::1] vf = flag
    for i in range(m):
        vd[i] = nodes[i].depth
        vlo[i] = nodes[i].lo
        vhi[i] = nodes[i].hi
        vlp[i] = nodes[i].lp
        vf[i] = nodes[i].flag
        vl[i] = nodes[i].left
        vr[i] = nodes[i].right
    return depth, lo, hi, lp, flag.view(np.bool_), left, right
