"""Evidence recursion and the quantities read off a single pass.

The heavy lifting happens in the selected kernel (compiled or pure Python);
this module validates inputs, builds the prior dimension coefficients and
wraps the raw kernel output into :class:`InferenceResult`.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._errors import DepthCapExceeded
from .model import Dataset, DivergenceClass, ModelParams, partition
from .numerics import LogValue, is_heavy, log_wbar, log_weight, variance_from_log_moments

DEFAULT_DEPTH_CAP = 1100
DEFAULT_DIM_MAX = 16

__all__ = [
    "DEFAULT_DEPTH_CAP",
    "DEFAULT_DIM_MAX",
    "DepthCapExceeded",
    "InferenceResult",
    "as_dataset",
    "check_params",
    "depth_cap",
    "divergence_class",
    "double_point_dim_coefficients",
    "evaluate",
    "expected_dimension",
    "dimension_distribution",
    "multipoint_dim_coefficients",
    "posterior_variance",
    "predictive_density",
    "prior_dim_coefficients",
    "prior_dim_coefficients_closed",
    "scaled_evidence",
    "split_probability",
    "split_probability_forms",
    "tree_heights",
]


def depth_cap() -> int:
    """Recursion cap, overridable through ``BAYESTREE_DEPTH_CAP``."""
    raw = os.environ.get("BAYESTREE_DEPTH_CAP")
    if raw is None or raw.strip() == "":
        return DEFAULT_DEPTH_CAP
    cap = int(raw)
    if cap < 1:
        raise ValueError(f"BAYESTREE_DEPTH_CAP must be a positive integer, got {raw!r}")
    return cap


def as_dataset(data) -> Dataset:
    if isinstance(data, Dataset):
        return data
    return Dataset(np.asarray(data, dtype=np.float64))


def check_params(params: ModelParams | None) -> ModelParams:
    """Default and validate parameters for the recursion.

    ``s = 1`` leaves no uniform mass (u = 0), so even empty cells split
    forever and the evidence is undefined; it is rejected here.
    """
    if params is None:
        return ModelParams()
    if params.u == 0.0:
        raise ValueError("s = 1 gives u = 0; the infinite tree has no finite evidence")
    return params


# ---------------------------------------------------------------- coefficients


def prior_dim_coefficients(N: int, params: ModelParams | None = None) -> np.ndarray:
    """Prior probabilities ``a_k = P[N = k]`` for ``k < N``.

    a_0 = u,  a_{k+1} = s * sum_{i<=k} a_i a_{k-i}
    """
    if N < 1:
        raise ValueError(f"dimension cutoff N must be >= 1, got {N}")
    params = params or ModelParams()
    a = np.zeros(N)
    a[0] = params.u
    for k in range(N - 1):
        a[k + 1] = params.s * float(np.dot(a[: k + 1], a[k::-1]))
    return a


def prior_dim_coefficients_closed(N: int, params: ModelParams | None = None) -> np.ndarray:
    """Closed form ``a_k = u (su)^k Cat_k`` with Catalan numbers ``Cat_k``.

    Equivalent to ``2u(-4su)^k binom(1/2, k+1)``; evaluated through log-gamma
    so large ``k`` does not overflow.
    """
    if N < 1:
        raise ValueError(f"dimension cutoff N must be >= 1, got {N}")
    params = params or ModelParams()
    s, u = params.s, params.u
    a = np.zeros(N)
    a[0] = u
    if s == 0.0 or u == 0.0:
        return a
    for k in range(1, N):
        log_cat = math.lgamma(2 * k + 1) - 2.0 * math.lgamma(k + 1) - math.log(k + 1)
        a[k] = math.exp(math.log(u) + k * math.log(s * u) + log_cat)
    return a


def multipoint_dim_coefficients(n: int, N: int, params: ModelParams | None = None) -> np.ndarray:
    """Posterior dimension distribution of a cell holding one n-fold point.

    c_0 = 1 - wbar,  c_{k+1} = wbar * sum_i c_i a_{k-i}.  For n <= 1 this is
    the prior sequence; for a heavy point every entry is zero.
    """
    params = params or ModelParams()
    a = prior_dim_coefficients(N, params)
    if n <= 1:
        return a
    if is_heavy(n, params):
        return np.zeros(N)
    lwb = log_wbar(n, params)
    wb = math.exp(lwb)
    c = np.zeros(N)
    c[0] = -math.expm1(lwb)
    for k in range(N - 1):
        c[k + 1] = wb * float(np.dot(c[: k + 1], a[k::-1]))
    return c


def double_point_dim_coefficients(N: int, params: ModelParams | None = None) -> np.ndarray:
    """``b_k = P[N = k | x, x]``; at s=1/2, alpha=1 starts 1/3, 1/9, 7/108."""
    return multipoint_dim_coefficients(2, N, params)


# ---------------------------------------------------------------- evaluation


@dataclass(frozen=True)
class InferenceResult:
    """Output of one pass of the recursion over a dataset.

    ``height_at_x`` is None when no query point was given and ``inf`` when the
    query point sits on a heavy multi-point.  ``dim_dist`` holds
    ``P[N = k | D]`` for ``k < N`` and ``tail_mass`` the remainder.
    """

    log_evidence: LogValue
    split_prob: float
    height_at_x: float | None
    avg_height: float
    dim_dist: np.ndarray
    tail_mass: float
    recursion_count: int
    divergence_class: DivergenceClass

    @property
    def divergent(self) -> bool:
        return self.log_evidence.is_divergent


def divergence_class(data, params: ModelParams | None = None) -> DivergenceClass:
    """Multi-points of ``data`` whose closed-form evidence diverges."""
    data = as_dataset(data)
    params = params or ModelParams()
    heavy = tuple((v, m) for v, m in data.multiplicities if is_heavy(m, params))
    return DivergenceClass(heavy)


def _wrap_log(lp: float, flag: bool, klass: DivergenceClass) -> LogValue:
    if flag:
        return LogValue.divergent(lp, klass)
    return LogValue.finite(lp)


def evaluate(
    data,
    x: float | None = None,
    N: int = DEFAULT_DIM_MAX,
    params: ModelParams | None = None,
    min_depth: int = 0,
    max_depth: int = -1,
    backend: str | None = None,
) -> InferenceResult:
    """Run the evidence recursion over ``data``.

    Parameters
    ----------
    data : Dataset or array_like
        Points in [0, 1).
    x : float, optional
        Query point for the expected tree height at ``x``.
    N : int
        Number of dimension probabilities to report.
    params : ModelParams, optional
        Defaults to s = 1/2, alpha = 1.
    min_depth : int
        Force recursion down to this depth before closed forms are used.
        Results do not depend on it; it exists as a correctness check.
    max_depth : int
        If non-negative, evaluate the finite tree whose cells at this depth
        are always uniform.  No closed forms are used in that mode.
    backend : {"compiled", "python"}, optional
        Kernel override; the default is chosen at import.
    """
    data = as_dataset(data)
    params = check_params(params)
    if N < 1:
        raise ValueError(f"dimension cutoff N must be >= 1, got {N}")
    if min_depth < 0:
        raise ValueError(f"min_depth must be >= 0, got {min_depth}")
    xq = math.nan
    if x is not None:
        xq = float(x)
        if not 0.0 <= xq < 1.0:
            raise ValueError(f"query point {x!r} outside [0, 1)")
        xq += 0.0
    kernel = _backend.get_kernel(backend)
    a = prior_dim_coefficients(N, params)
    lp, flag, h, hbar, dims, count = kernel.bayes_tree(
        data.points, xq, a, params.s, params.alpha,
        min_depth, max_depth, depth_cap(),
    )
    klass = divergence_class(data, params) if max_depth < 0 else DivergenceClass()
    if flag:
        g = 1.0
    else:
        g = -math.expm1(math.log(params.u) - lp)
    tail = min(1.0, max(0.0, 1.0 - math.fsum(dims)))
    return InferenceResult(
        log_evidence=_wrap_log(lp, flag, klass),
        split_prob=g,
        height_at_x=float(h) if x is not None else None,
        avg_height=float(hbar),
        dim_dist=np.asarray(dims),
        tail_mass=tail,
        recursion_count=int(count),
        divergence_class=klass,
    )


def scaled_evidence(data, params: ModelParams | None = None, min_depth: int = 0):
    """Evidence with heavy multi-points rescaled to a finite surrogate.

    Returns ``(LogValue, DivergenceClass)``.  The surrogate is only meaningful
    as a ratio against another surrogate of the same class.
    """
    res = evaluate(data, N=1, params=params, min_depth=min_depth)
    return res.log_evidence, res.divergence_class


def split_probability(data, params: ModelParams | None = None, min_depth: int = 0) -> float:
    """Posterior probability ``g = 1 - u/p(D)`` that the root cell splits."""
    return evaluate(data, N=1, params=params, min_depth=min_depth).split_prob


def split_probability_forms(data, params: ModelParams | None = None) -> tuple[float, float]:
    """Root split probability computed two ways.

    Returns ``(1 - u/p, s p0 p1 / (p w))`` where ``p0, p1`` are the child
    evidences of the rescaled halves.  Both are 1 for divergent evidence.
    """
    data = as_dataset(data)
    params = check_params(params)
    root = evaluate(data, N=1, params=params).log_evidence
    if root.is_divergent:
        return 1.0, 1.0
    left, right = partition(data)
    p0 = evaluate(left, N=1, params=params).log_evidence
    p1 = evaluate(right, N=1, params=params).log_evidence
    g1 = -math.expm1(math.log(params.u) - root.log)
    if params.s == 0.0:
        return g1, 0.0
    lw = log_weight(left.n, right.n, params.alpha)
    g2 = math.exp(math.log(params.s) + p0.log + p1.log - lw - root.log)
    return g1, g2


def _augment(data: Dataset, x: float, r: int) -> Dataset:
    return data.with_points(*([x] * r))


def _check_x(x: float) -> float:
    x = float(x)
    if not 0.0 <= x < 1.0:
        raise ValueError(f"query point {x!r} outside [0, 1)")
    return x + 0.0


def predictive_density(data, x: float, params: ModelParams | None = None,
                       min_depth: int = 0) -> LogValue:
    """``p(x | D) = p(D, x) / p(D)`` from two full evaluations.

    When adding ``x`` creates or grows a heavy multi-point the density is
    infinite and a divergent LogValue carrying the new class is returned.
    """
    data = as_dataset(data)
    params = check_params(params)
    x = _check_x(x)
    den = evaluate(data, N=1, params=params, min_depth=min_depth).log_evidence
    num = evaluate(_augment(data, x, 1), N=1, params=params, min_depth=min_depth).log_evidence
    if is_heavy(data.multiplicity(x) + 1, params):
        return LogValue.divergent(num.log - den.log, num.klass)
    return num / den


def posterior_variance(data, x: float, params: ModelParams | None = None,
                       min_depth: int = 0) -> float:
    """``Var[q(x) | D] = p(D,x,x)/p(D) - p(x|D)^2``; ``inf`` when divergent."""
    data = as_dataset(data)
    params = check_params(params)
    x = _check_x(x)
    m = data.multiplicity(x)
    if is_heavy(m + 2, params):
        return math.inf
    den = evaluate(data, N=1, params=params, min_depth=min_depth).log_evidence
    one = evaluate(_augment(data, x, 1), N=1, params=params, min_depth=min_depth).log_evidence
    two = evaluate(_augment(data, x, 2), N=1, params=params, min_depth=min_depth).log_evidence
    return variance_from_log_moments((one / den).log, (two / den).log)


def dimension_distribution(data, N: int = DEFAULT_DIM_MAX, params: ModelParams | None = None,
                           min_depth: int = 0) -> tuple[np.ndarray, float]:
    """``(P[N = k | D] for k < N, tail mass)``."""
    res = evaluate(data, N=N, params=params, min_depth=min_depth)
    return res.dim_dist, res.tail_mass


def tree_heights(data, x: float | None = None, params: ModelParams | None = None,
                 min_depth: int = 0) -> tuple[float | None, float, float]:
    """``(E[h(x)|D], E[hbar|D], average log2 cell volume)``.

    At the root the average log volume (in bits, sign flipped) coincides with
    the average height.
    """
    res = evaluate(data, x=x, N=1, params=params, min_depth=min_depth)
    return res.height_at_x, res.avg_height, res.avg_height


def expected_dimension(data, params: ModelParams | None = None) -> float:
    """``E[N | D]`` for ``s < 1/2``.

    For ``s >= 1/2`` the prior expectation of the dimension is already
    infinite, so a ValueError is raised; use the distribution instead.
    Heavy multi-points also make the expectation infinite.
    """
    from .index import build_index

    data = as_dataset(data)
    params = check_params(params)
    if params.s >= 0.5:
        raise ValueError("E[N | D] is infinite for s >= 1/2; report the distribution instead")
    idx = build_index(data, params)
    e_prior = params.s / (1.0 - 2.0 * params.s)
    E = np.zeros(idx.size)
    for i in range(idx.size - 1, -1, -1):
        l, r = idx.left[i], idx.right[i]
        if l < 0:
            n = int(idx.hi[i] - idx.lo[i])
            if n <= 1:
                E[i] = e_prior
            elif is_heavy(n, params):
                E[i] = math.inf
            else:
                wb = math.exp(log_wbar(n, params))
                E[i] = wb * (1.0 + e_prior) / (1.0 - wb)
        else:
            E[i] = idx.g[i] * (1.0 + E[l] + E[r])
    return float(E[0])
