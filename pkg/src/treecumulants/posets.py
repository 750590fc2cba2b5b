"""Posets of tree partitions and their Möbius functions.

A tree partition of a leaf set is any partition realizable as the leaf
blocks of the connected components left after deleting a subset of edges
of the spanning subtree.  The refinement order on these partitions forms
a poset with a minimum (all singletons) and maximum (one block); the
Möbius function of that poset drives the moment/cumulant coordinate
change.

Enumeration is brute force over edge subsets with deduplication, which is
exact and fast at the leaf counts this library targets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .trees import RestrictedTree

__all__ = ["TreePartition", "PartitionPoset", "tree_partitions", "leq", "mobius"]


@dataclass(frozen=True)
class TreePartition:
    """A partition of a ground set into disjoint nonempty blocks.

    Blocks are stored sorted by their minimum element, each block sorted,
    so equal partitions compare and hash equal.
    """

    blocks: tuple[tuple[int, ...], ...]

    @classmethod
    def from_blocks(cls, blocks) -> "TreePartition":
        canon = tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0]))
        return cls(blocks=canon)

    @property
    def ground_set(self) -> frozenset[int]:
        return frozenset(x for b in self.blocks for x in b)

    def n_blocks(self) -> int:
        return len(self.blocks)

    def has_singleton(self) -> bool:
        return any(len(b) == 1 for b in self.blocks)

    def __str__(self) -> str:
        return "|".join("".join(str(x) for x in b) for b in self.blocks)


def leq(p: TreePartition, q: TreePartition) -> bool:
    """Refinement test: every block of ``p`` lies inside a block of ``q``."""
    if p.ground_set != q.ground_set:
        raise ValueError("partitions compare only over the same ground set")
    covering = {}
    for bi, block in enumerate(q.blocks):
        for x in block:
            covering[x] = bi
    return all(len({covering[x] for x in b}) == 1 for b in p.blocks)


class PartitionPoset:
    """All tree partitions of a leaf set under refinement.

    Elements are listed bottom-up-ish in a deterministic order (by
    decreasing block count, then lexicographically).  The Möbius memo
    table is filled on demand; calling :meth:`mobius_to_top` for every
    element precomputes it, after which the poset is read-only.
    """

    def __init__(self, elements: list[TreePartition]):
        self.elements = sorted(
            set(elements), key=lambda p: (-p.n_blocks(), p.blocks)
        )
        self._index = {p: i for i, p in enumerate(self.elements)}
        m = len(self.elements)
        self._leq = [[False] * m for _ in range(m)]
        for i, p in enumerate(self.elements):
            for j, q in enumerate(self.elements):
                self._leq[i][j] = leq(p, q)
        self._mobius_memo: dict[tuple[int, int], int] = {}
        self.bottom = self.elements[0]
        self.top = self.elements[-1]
        if self.bottom.n_blocks() != len(self.bottom.ground_set):
            raise ValueError("poset is missing the all-singletons partition")
        if self.top.n_blocks() != 1:
            raise ValueError("poset is missing the one-block partition")

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, p: TreePartition) -> bool:
        return p in self._index

    def index(self, p: TreePartition) -> int:
        return self._index[p]

    def leq(self, p: TreePartition, q: TreePartition) -> bool:
        return self._leq[self._index[p]][self._index[q]]

    def mobius(self, p: TreePartition, q: TreePartition) -> int:
        """Möbius function m(p, q): 1 on the diagonal, 0 off-order."""
        return self._mobius_idx(self._index[p], self._index[q])

    def _mobius_idx(self, i: int, j: int) -> int:
        if i == j:
            return 1
        if not self._leq[i][j]:
            return 0
        key = (i, j)
        if key not in self._mobius_memo:
            total = 0
            for d in range(len(self.elements)):
                if d != j and self._leq[i][d] and self._leq[d][j]:
                    total += self._mobius_idx(i, d)
            self._mobius_memo[key] = -total
        return self._mobius_memo[key]

    def mobius_to_top(self, p: TreePartition) -> int:
        return self.mobius(p, self.top)


def tree_partitions(rt: RestrictedTree) -> PartitionPoset:
    """Enumerate the poset of tree partitions of a restricted tree.

    Every subset of the restriction's edges is deleted in turn; the leaf
    blocks of the surviving components (components without leaves vanish)
    give one partition, deduplicated over subsets.
    """
    leaves = sorted(rt.leaf_set)
    if len(leaves) == 1:
        only = TreePartition.from_blocks([leaves])
        return PartitionPoset([only])
    edges = sorted(rt.edges)
    adj: dict[int, list[int]] = {v: [] for v in rt.nodes}
    seen_parts: set[TreePartition] = set()
    leafset = set(leaves)
    for keep_mask in range(1 << len(edges)):
        for v in adj:
            adj[v].clear()
        for b, (u, v) in enumerate(edges):
            if keep_mask >> b & 1:
                adj[u].append(v)
                adj[v].append(u)
        blocks = []
        unvisited = set(rt.nodes)
        while unvisited:
            start = unvisited.pop()
            comp_leaves = [start] if start in leafset else []
            stack = [start]
            while stack:
                x = stack.pop()
                for w in adj[x]:
                    if w in unvisited:
                        unvisited.remove(w)
                        if w in leafset:
                            comp_leaves.append(w)
                        stack.append(w)
            if comp_leaves:
                blocks.append(comp_leaves)
        seen_parts.add(TreePartition.from_blocks(blocks))
    return PartitionPoset(list(seen_parts))


def mobius(poset: PartitionPoset, p: TreePartition, q: TreePartition) -> int:
    """Convenience wrapper for :meth:`PartitionPoset.mobius`."""
    return poset.mobius(p, q)
