"""MAP-like partition tree.

A cell is kept as a leaf when its uniform term wins the evidence mixture,
``s p0 p1 / w <= u``, and split otherwise.  Ties go to the leaf so that the
prior with ``s = u`` gives the one-cell tree; terms within rounding of each
other count as tied, so the tree does not depend on the kernel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .index import EvidenceIndex, build_index
from .model import ModelParams, NodeAddress

__all__ = ["TreeSkeleton", "map_skeleton", "DEFAULT_SKELETON_DEPTH"]

DEFAULT_SKELETON_DEPTH = 64
# split and uniform terms closer than this (in logs) count as a tie
TIE_TOL = 1e-12


@dataclass
class TreeSkeleton:
    """One node of the skeleton.

    ``truncated`` marks a leaf that the rule would keep splitting (the chain
    below a multi-point, or empty cells when ``s > u``) but that was cut at
    the depth limit.
    """

    address: NodeAddress
    n: int
    g: float
    children: list["TreeSkeleton"] = field(default_factory=list)
    truncated: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def kind(self) -> str:
        return "leaf" if self.is_leaf else "split"

    def walk(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list["TreeSkeleton"]:
        return [nd for nd in self.walk() if nd.is_leaf]

    def height(self) -> int:
        return max(nd.address.depth for nd in self.walk()) - self.address.depth

    def to_dict(self) -> dict:
        lo, hi = self.address.interval()
        out = {
            "address": self.address.bits,
            "interval": [float(lo), float(hi)],
            "n": self.n,
            "g": self.g,
            "kind": self.kind,
        }
        if self.truncated:
            out["truncated"] = True
        if self.children:
            out["children"] = [c.to_dict() for c in self.children]
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_text(self) -> str:
        lines = []
        base = self.address.depth
        for nd in self.walk():
            lo, hi = nd.address.interval()
            tag = " truncated" if nd.truncated else ""
            lines.append(
                f"{'  ' * (nd.address.depth - base)}{nd.kind} [{float(lo):.17g}, {float(hi):.17g}) "
                f"n={nd.n} g={nd.g:.17g}{tag}"
            )
        return "\n".join(lines)


def _closed_cell(idx: EvidenceIndex, node: TreeSkeleton, point: float | None, max_depth: int):
    """Expand a cell below the separation level: empty or one multi-point."""
    ctx = idx._ctx
    stack = [(node, point)]
    while stack:
        cur, c = stack.pop()
        n = cur.n
        if n <= 1:
            splits = ctx.ls > ctx.lu + TIE_TOL
        else:
            lwb, heavy, lp = ctx.multipoint(n)[:3]
            # split term s p_n / w(n,0) against u
            splits = heavy or (ctx.ls + lp - ctx.log_weight(n, 0) > ctx.lu + TIE_TOL)
        if not splits:
            continue
        if cur.address.depth >= max_depth or n <= 1:
            # the rule never stops here; cut the infinite descent
            cur.truncated = True
            continue
        a0, a1 = cur.address.children()
        for addr in (a0, a1):
            inside = c is not None and addr.contains(c)
            m = n if inside else 0
            child = TreeSkeleton(addr, m, _closed_g(ctx, m))
            cur.children.append(child)
            stack.append((child, c if inside else None))


def _closed_g(ctx, n: int) -> float:
    if n <= 1:
        return ctx.s
    return ctx.multipoint(n)[3]


def map_skeleton(data, params: ModelParams | None = None,
                 max_depth: int = DEFAULT_SKELETON_DEPTH,
                 index: EvidenceIndex | None = None) -> TreeSkeleton:
    """MAP-like tree of ``data``.

    Parameters
    ----------
    data : Dataset or array_like
    params : ModelParams, optional
    max_depth : int
        Depth at which splitting chains (multi-points, or every empty cell
        when ``s > u``) are cut and marked ``truncated``.
    index : EvidenceIndex, optional
        Prebuilt index to reuse.
    """
    idx = index if index is not None else build_index(data, params)
    ctx = idx._ctx
    depth, lo, hi, lp, flag, left, right = idx._lists
    pts = idx.data.points
    root = TreeSkeleton(NodeAddress(""), hi[0] - lo[0], float(idx.g[0]))
    stack = [(root, 0)]
    while stack:
        cur, i = stack.pop()
        l, r = left[i], right[i]
        if l < 0:
            c = float(pts[lo[i]]) if hi[i] > lo[i] else None
            _closed_cell(idx, cur, c, max_depth)
            continue
        if flag[l] or flag[r]:
            splits = True
        else:
            t = lp[l] + lp[r] - ctx.log_weight(hi[l] - lo[l], hi[r] - lo[r])
            splits = ctx.ls + t > ctx.lu + TIE_TOL
        if not splits:
            continue
        if cur.address.depth >= max_depth:
            cur.truncated = True
            continue
        a0, a1 = cur.address.children()
        kids = []
        for addr, j in ((a0, l), (a1, r)):
            child = TreeSkeleton(addr, hi[j] - lo[j], float(idx.g[j]))
            cur.children.append(child)
            kids.append((child, j))
        stack.extend(reversed(kids))
    return root
