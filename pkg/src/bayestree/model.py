"""Model parameters, datasets on [0,1) and dyadic cell addressing."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, TextIO

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Prior parameters: split probability ``s`` and Beta concentration ``alpha``.

    The uniform probability ``u`` is always derived as ``1 - s``.
    """

    s: float = 0.5
    alpha: float = 1.0

    def __post_init__(self):
        s = float(self.s)
        alpha = float(self.alpha)
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"s must lie in [0, 1], got {s}")
        if not alpha > 0.0 or math.isinf(alpha):
            raise ValueError(f"alpha must be a positive real, got {alpha}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "alpha", alpha)

    @property
    def u(self) -> float:
        return 1.0 - self.s


@dataclass(frozen=True)
class NodeAddress:
    """Binary address ``z`` of the cell ``[0.z, 0.z + 2**-len(z))``."""

    bits: str = ""

    def __post_init__(self):
        if any(b not in "01" for b in self.bits):
            raise ValueError(f"address must be a binary string, got {self.bits!r}")

    @property
    def depth(self) -> int:
        return len(self.bits)

    def children(self) -> tuple[NodeAddress, NodeAddress]:
        return NodeAddress(self.bits + "0"), NodeAddress(self.bits + "1")

    def interval(self) -> tuple[Fraction, Fraction]:
        """Exact cell bounds as fractions."""
        lo = Fraction(int(self.bits, 2) if self.bits else 0, 2**self.depth)
        return lo, lo + Fraction(1, 2**self.depth)

    def width(self) -> Fraction:
        return Fraction(1, 2**self.depth)

    def contains(self, x: float) -> bool:
        lo, hi = self.interval()
        return lo <= x < hi

    @classmethod
    def of_point(cls, x: float, depth: int) -> NodeAddress:
        """Address of the depth-``depth`` cell containing ``x``."""
        bits = []
        y = float(x)
        for _ in range(depth):
            b = 1 if y >= 0.5 else 0
            bits.append("01"[b])
            y = 2.0 * y - b
        return cls("".join(bits))


@dataclass(frozen=True)
class DivergenceClass:
    """The multi-points whose closed-form evidence diverges under given params.

    Two scaled evidences can only be compared when their classes are equal.
    """

    heavy_points: tuple[tuple[float, int], ...] = ()

    def __bool__(self) -> bool:
        return bool(self.heavy_points)

    def to_list(self) -> list[list]:
        return [[v, m] for v, m in self.heavy_points]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sorted multiset of points in [0,1).

    Points are stored as an ascending read-only float64 array.  Multi-points
    are runs of bit-identical values.
    """

    points: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).ravel()
        pts.sort(kind="stable")
        if pts.size and not (np.all(np.isfinite(pts)) and pts[0] >= 0.0 and pts[-1] < 1.0):
            bad = pts[~((pts >= 0.0) & (pts < 1.0))][0]
            raise ValueError(f"point {bad!r} outside [0, 1)")
        # -0.0 and 0.0 must group together
        pts = pts + 0.0
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return int(self.points.size)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    @property
    def multiplicities(self) -> list[tuple[float, int]]:
        """Run-length view ``[(value, count), ...]`` in ascending order."""
        if self.n == 0:
            return []
        values, counts = np.unique(self.points, return_counts=True)
        return [(float(v), int(c)) for v, c in zip(values, counts)]

    def multiplicity(self, x: float) -> int:
        lo = np.searchsorted(self.points, x, side="left")
        hi = np.searchsorted(self.points, x, side="right")
        return int(hi - lo)

    def count(self, address: NodeAddress) -> int:
        """Number of points ``n_z`` in the cell with the given address."""
        lo, hi = address.interval()
        pts = self.points
        # float < Fraction comparisons are exact
        return bisect.bisect_left(pts, hi, key=float) - bisect.bisect_left(pts, lo, key=float)

    def with_points(self, *extra: float) -> Dataset:
        return Dataset(np.concatenate([self.points, np.asarray(extra, dtype=np.float64)]))

    @classmethod
    def from_iterable(cls, values: Iterable[float]) -> Dataset:
        return cls(np.fromiter((float(v) for v in values), dtype=np.float64))


def compactify(x: float, mode: str) -> float:
    """Map a point from an unbounded domain into [0,1).

    ``reciprocal`` maps (1, inf] by ``1/x``; ``rational`` maps the real line
    through the inverse of ``y -> (2y-1)/(y(1-y))`` on (0,1), with -inf sent
    to 0.  Results that round to 1.0 are clamped to the largest double below 1.
    """
    x = float(x)
    if math.isnan(x):
        raise ValueError("cannot compactify NaN")
    if mode == "reciprocal":
        if not x > 1.0:
            raise ValueError(f"reciprocal compactification needs x in (1, inf], got {x}")
        return 1.0 / x
    if mode == "rational":
        if x == math.inf:
            raise ValueError("rational compactification is undefined at +inf")
        if x == -math.inf:
            return 0.0
        r = math.hypot(x, 2.0)
        if x >= 0.0:
            y = 2.0 / (2.0 + 4.0 / (r + x))
        else:
            y = 2.0 / (r - x + 2.0)
        return min(y, math.nextafter(1.0, 0.0))
    raise ValueError(f"unknown compactification mode {mode!r}")


def partition(data: Dataset) -> tuple[Dataset, Dataset]:
    """Split at 1/2 and rescale both halves back onto [0,1).

    The rescaling ``2x`` and ``2x - 1`` is exact in binary floating point, so
    multi-points stay bit-identical.
    """
    pts = data.points
    k = int(np.searchsorted(pts, 0.5, side="left"))
    return Dataset(2.0 * pts[:k]), Dataset(2.0 * pts[k:] - 1.0)


def _parse_lines(stream: TextIO, mode: str | None) -> list[float]:
    values = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            v = float(line)
        except ValueError:
            raise ValueError(f"line {lineno}: cannot parse {line!r} as a number") from None
        if mode is not None:
            try:
                v = compactify(v, mode)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        elif not (0.0 <= v < 1.0):
            raise ValueError(f"line {lineno}: value {line} outside [0, 1)")
        values.append(v)
    return values


def load_dataset(stream: TextIO, compactify_mode: str | None = None) -> Dataset:
    """Read one decimal per line; blank lines and ``#`` comments are skipped."""
    return Dataset(np.asarray(_parse_lines(stream, compactify_mode), dtype=np.float64))


def dump_dataset(data: Dataset, stream: TextIO) -> None:
    for v in data.points:
        stream.write(f"{float(v)!r}\n")
