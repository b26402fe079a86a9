"""Balanced k-ary domain trees over inclusive integer ranges.

A tree is a value type described entirely by (lo, hi, k); nodes are
addressed by paths of child indices and materialised only as intervals.
Nothing is allocated per node, so a tree over a 2**20-wide range costs
O(depth) to query.
"""

from __future__ import annotations

from dataclasses import dataclass

Interval = tuple[int, int]
NodePath = tuple[int, ...]


@dataclass(frozen=True)
class DomainTree:
    """Hierarchical partition of the integer range [lo, hi].

    Every internal node splits its interval into min(k, size) contiguous,
    disjoint, non-empty child intervals in ascending order; when the split
    is uneven the extra elements go to the leftmost children.  Leaves are
    single values.
    """

    lo: int
    hi: int
    k: int = 2

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"empty domain range [{self.lo}, {self.hi}]")
        if self.k < 2:
            raise ValueError(f"branching factor must be >= 2, got {self.k}")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def root(self) -> Interval:
        return (self.lo, self.hi)

    @property
    def depth(self) -> int:
        """Refinement levels from the root to the deepest leaf."""
        d, span = 0, 1
        while span < self.size:
            span *= self.k
            d += 1
        return d

    def split(self, interval: Interval) -> list[Interval]:
        """Child intervals of an internal node, left-biased when uneven."""
        lo, hi = interval
        m = hi - lo + 1
        if m <= 1:
            raise ValueError(f"node [{lo}, {hi}] is a leaf and has no children")
        c = min(self.k, m)
        q, r = divmod(m, c)
        out = []
        at = lo
        for i in range(c):
            width = q + 1 if i < r else q
            out.append((at, at + width - 1))
            at += width
        return out

    def node(self, path: NodePath) -> Interval:
        """Interval addressed by a root-relative path of child indices."""
        cur = self.root
        for i in path:
            kids = self.split(cur)
            if not 0 <= i < len(kids):
                raise ValueError(f"child index {i} out of range at node {cur}")
            cur = kids[i]
        return cur

    def children(self, path: NodePath) -> list[Interval]:
        """Child intervals of the node at `path`; error if it is a leaf."""
        return self.split(self.node(path))

    def path_to_value(self, v: int) -> NodePath:
        """Root-to-leaf path whose leaf is the singleton {v}."""
        if not self.lo <= v <= self.hi:
            raise ValueError(f"value {v} outside domain [{self.lo}, {self.hi}]")
        path = []
        cur = self.root
        while cur[0] != cur[1]:
            for i, kid in enumerate(self.split(cur)):
                if kid[0] <= v <= kid[1]:
                    path.append(i)
                    cur = kid
                    break
        return tuple(path)

    def leaves(self) -> range:
        """All leaf values in ascending order."""
        return range(self.lo, self.hi + 1)

    def internal_paths(self):
        """Yield (path, interval) for every internal node, preorder."""
        stack = [((), self.root)]
        while stack:
            path, cur = stack.pop()
            if cur[0] == cur[1]:
                continue
            yield path, cur
            kids = self.split(cur)
            for i in range(len(kids) - 1, -1, -1):
                stack.append((path + (i,), kids[i]))


def is_leaf(interval: Interval) -> bool:
    return interval[0] == interval[1]
