"""Leaf-labeled tree topologies and the combinatorics built on top of them.

A :class:`TreeTopology` is an undirected tree whose degree-one nodes carry
integer labels; the node id of a leaf *is* its label.  Everything downstream
(edge splits, restrictions to a leaf subset, paths, separating nodes,
contractions) is derived from this one structure.  Instances are immutable
after construction and safe to share between threads; lazy caches are
per-instance dictionaries guarded only by the GIL.

Trees are read and written as Newick text with integer leaf labels
``1..n``.  A Newick string whose outermost grouping has exactly two children
describes a rooted binary tree; the degree-two outer node is suppressed (its
two incident edges are fused) and the rooting is kept by rooting the result
at the adjacent inner node, which leaves every observable quantity unchanged.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

__all__ = [
    "TreeError",
    "TreeTopology",
    "Split",
    "RestrictedTree",
    "parse_newick",
    "trivalent_refinement",
]


class TreeError(ValueError):
    """Raised for malformed trees, bad Newick text, or invalid operations."""


def _norm_edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Split:
    """The two-block leaf partition induced by deleting a single edge.

    ``block_a`` is the block containing the smallest leaf label.
    """

    edge: tuple[int, int]
    block_a: frozenset[int]
    block_b: frozenset[int]

    def blocks(self) -> tuple[frozenset[int], frozenset[int]]:
        return (self.block_a, self.block_b)

    def is_inner(self) -> bool:
        return len(self.block_a) >= 2 and len(self.block_b) >= 2


class TreeTopology:
    """An undirected tree with labeled leaves and an optional rooting.

    Parameters
    ----------
    nodes : iterable of int
        Node ids.  Degree-one nodes are the leaves; their ids are the labels.
    edges : iterable of (int, int)
        Unordered edges.
    root : int or None
        Optional distinguished node.  The root only matters for operations
        that need a direction (parent maps, ``root_of_restriction``, the
        monomial parametrization); the observable model does not depend
        on it.
    """

    def __init__(self, nodes, edges, root: int | None = None):
        self.nodes: frozenset[int] = frozenset(int(v) for v in nodes)
        self.edges: frozenset[tuple[int, int]] = frozenset(
            _norm_edge(int(u), int(v)) for u, v in edges
        )
        if not self.nodes:
            raise TreeError("a tree needs at least one node")
        if len(self.edges) != len(self.nodes) - 1:
            raise TreeError(
                f"not a tree: {len(self.nodes)} nodes but {len(self.edges)} edges"
            )
        adj: dict[int, list[int]] = {v: [] for v in self.nodes}
        for u, v in self.edges:
            if u == v:
                raise TreeError(f"self-loop at node {u}")
            if u not in adj or v not in adj:
                raise TreeError(f"edge ({u},{v}) mentions an unknown node")
            adj[u].append(v)
            adj[v].append(u)
        self._adj = {v: tuple(sorted(ws)) for v, ws in adj.items()}
        # Connectivity check: one BFS must reach every node.
        seen = {min(self.nodes)}
        queue = deque(seen)
        while queue:
            for w in self._adj[queue.popleft()]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        if seen != self.nodes:
            raise TreeError("graph is not connected")
        if len(self.nodes) == 1:
            self.leaves: tuple[int, ...] = (min(self.nodes),)
        else:
            self.leaves = tuple(sorted(v for v in self.nodes if len(self._adj[v]) == 1))
        if root is not None and root not in self.nodes:
            raise TreeError(f"root {root} is not a node of the tree")
        self.root: int | None = root
        self._restriction_cache: dict[frozenset[int], RestrictedTree] = {}
        self._dist_cache: dict[int, dict[int, int]] = {}

    # ------------------------------------------------------------------ #
    # Basic queries
    # ------------------------------------------------------------------ #

    @property
    def n(self) -> int:
        """Number of leaves."""
        return len(self.leaves)

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def is_leaf(self, v: int) -> bool:
        return v in self.nodes and len(self._adj[v]) <= 1

    @property
    def inner_nodes(self) -> tuple[int, ...]:
        return tuple(sorted(v for v in self.nodes if len(self._adj[v]) > 1))

    def is_trivalent(self) -> bool:
        """True iff every inner node has degree exactly three."""
        return all(len(self._adj[v]) == 3 for v in self.inner_nodes)

    def with_root(self, root: int) -> "TreeTopology":
        """Return the same topology rooted at ``root``."""
        if root == self.root:
            return self
        return TreeTopology(self.nodes, self.edges, root=root)

    def default_root(self) -> int:
        """The rooting used when none was chosen: lowest inner node id."""
        if self.root is not None:
            return self.root
        inner = self.inner_nodes
        return inner[0] if inner else self.leaves[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TreeTopology)
            and self.nodes == other.nodes
            and self.edges == other.edges
            and self.root == other.root
        )

    def __hash__(self) -> int:
        return hash((self.nodes, self.edges, self.root))

    def __repr__(self) -> str:
        return f"TreeTopology({self.n} leaves, {len(self.nodes)} nodes, root={self.root})"

    # ------------------------------------------------------------------ #
    # Directed views
    # ------------------------------------------------------------------ #

    def parent_map(self, root: int | None = None) -> dict[int, int | None]:
        """Map node -> parent under the given rooting (root maps to None)."""
        r = self.default_root() if root is None else root
        parent: dict[int, int | None] = {r: None}
        queue = deque([r])
        while queue:
            u = queue.popleft()
            for w in self._adj[u]:
                if w not in parent:
                    parent[w] = u
                    queue.append(w)
        return parent

    def directed_edges(self, root: int | None = None) -> list[tuple[int, int]]:
        """Edges as (parent, child) pairs in breadth-first order from the root."""
        parent = self.parent_map(root)
        order = self.topological_order(root)
        return [(parent[v], v) for v in order if parent[v] is not None]

    def topological_order(self, root: int | None = None) -> list[int]:
        """Nodes in breadth-first order from the root."""
        r = self.default_root() if root is None else root
        seen = {r}
        order = [r]
        queue = deque([r])
        while queue:
            u = queue.popleft()
            for w in self._adj[u]:
                if w not in seen:
                    seen.add(w)
                    order.append(w)
                    queue.append(w)
        return order

    def _distances_from(self, s: int) -> dict[int, int]:
        if s not in self._dist_cache:
            dist = {s: 0}
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w in self._adj[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        queue.append(w)
            self._dist_cache[s] = dist
        return self._dist_cache[s]

    # ------------------------------------------------------------------ #
    # Paths and separating nodes
    # ------------------------------------------------------------------ #

    def path_nodes(self, i: int, j: int) -> list[int]:
        """Nodes along the unique path from ``i`` to ``j``, inclusive."""
        if i not in self.nodes or j not in self.nodes:
            raise TreeError(f"unknown node in path query ({i},{j})")
        parent = self.parent_map(i)
        path = [j]
        while path[-1] != i:
            nxt = parent[path[-1]]
            if nxt is None:  # pragma: no cover - connectivity guarantees this
                raise TreeError("path search escaped the tree")
            path.append(nxt)
        path.reverse()
        return path

    def path_edges(self, i: int, j: int) -> list[tuple[int, int]]:
        """Edges along the path from ``i`` to ``j``, oriented i -> j."""
        if i == j:
            raise TreeError("path_edges requires two distinct nodes")
        nodes = self.path_nodes(i, j)
        return list(zip(nodes, nodes[1:]))

    def separating_node(self, i: int, j: int, k: int) -> int:
        """The unique node lying on all three pairwise paths of i, j, k."""
        if len({i, j, k}) != 3:
            raise TreeError("separating_node requires three distinct leaves")
        on_ij = set(self.path_nodes(i, j))
        on_ik = set(self.path_nodes(i, k))
        on_jk = set(self.path_nodes(j, k))
        common = on_ij & on_ik & on_jk
        if len(common) != 1:  # pragma: no cover - tree structure guarantees this
            raise TreeError(f"no unique separating node for ({i},{j},{k})")
        return next(iter(common))

    # ------------------------------------------------------------------ #
    # Splits, restrictions, contractions
    # ------------------------------------------------------------------ #

    def edge_splits(self) -> list[Split]:
        """One :class:`Split` per edge, blocks normalized."""
        return [self.split_of_edge(e) for e in sorted(self.edges)]

    def split_of_edge(self, edge: tuple[int, int]) -> Split:
        e = _norm_edge(*edge)
        if e not in self.edges:
            raise TreeError(f"({edge[0]},{edge[1]}) is not an edge of the tree")
        u, v = e
        side_u = self._component_leaves(u, banned_edge=e)
        side_v = frozenset(self.leaves) - side_u
        lo = min(self.leaves)
        if lo in side_u:
            return Split(edge=e, block_a=side_u, block_b=side_v)
        return Split(edge=e, block_a=side_v, block_b=side_u)

    def _component_leaves(self, start: int, banned_edge: tuple[int, int]) -> frozenset[int]:
        seen = {start}
        queue = deque([start])
        leafset = set()
        if self.is_leaf(start):
            leafset.add(start)
        while queue:
            x = queue.popleft()
            for w in self._adj[x]:
                if _norm_edge(x, w) == banned_edge or w in seen:
                    continue
                seen.add(w)
                if self.is_leaf(w):
                    leafset.add(w)
                queue.append(w)
        return frozenset(leafset)

    def restrict(self, labels) -> "RestrictedTree":
        """Minimal subtree spanning the given leaves.

        Degree-two nodes of the restriction are kept; they are neutral in
        every formula that consumes restrictions.
        """
        I = frozenset(int(x) for x in labels)
        if not I:
            raise TreeError("restriction needs at least one leaf")
        unknown = I - set(self.leaves)
        if unknown:
            raise TreeError(f"unknown leaf labels in restriction: {sorted(unknown)}")
        if I in self._restriction_cache:
            return self._restriction_cache[I]
        members = sorted(I)
        base = members[0]
        span: set[int] = {base}
        for j in members[1:]:
            span.update(self.path_nodes(base, j))
        sub_edges = [e for e in self.edges if e[0] in span and e[1] in span]
        rt = RestrictedTree(
            tree=self,
            leaf_set=I,
            nodes=frozenset(span),
            edges=frozenset(sub_edges),
        )
        self._restriction_cache[I] = rt
        return rt

    def root_of_restriction(self, labels, root: int | None = None) -> int:
        """The node of the spanning subtree nearest to the (global) root."""
        I = frozenset(int(x) for x in labels)
        if len(I) < 2:
            raise TreeError("root_of_restriction needs at least two leaves")
        r = self.default_root() if root is None else root
        dist = self._distances_from(r)
        span = self.restrict(I).nodes
        return min(span, key=lambda v: (dist[v], v))

    def contract_edge(self, edge: tuple[int, int]) -> "TreeTopology":
        """Identify the endpoints of an inner edge and drop the edge."""
        e = _norm_edge(*edge)
        if e not in self.edges:
            raise TreeError(f"({edge[0]},{edge[1]}) is not an edge of the tree")
        u, v = e
        if self.is_leaf(u) or self.is_leaf(v):
            raise TreeError(f"cannot contract pendant edge ({u},{v})")
        keep, drop = (u, v) if u < v else (v, u)
        new_edges = set()
        for a, b in self.edges:
            if (a, b) == e:
                continue
            a2 = keep if a == drop else a
            b2 = keep if b == drop else b
            new_edges.add(_norm_edge(a2, b2))
        new_root = self.root
        if new_root == drop:
            new_root = keep
        return TreeTopology(self.nodes - {drop}, new_edges, root=new_root)

    # ------------------------------------------------------------------ #
    # Serialization
    # ------------------------------------------------------------------ #

    def to_newick(self) -> str:
        """Canonical Newick text: children sorted by smallest descendant leaf.

        Serialization starts from the current root (or the default root).
        Degree-two chains survive only as unlabeled unary groupings are not
        emitted, so paths with degree-two inner nodes do not round-trip;
        parse-produced trees do.
        """
        if len(self.nodes) == 1:
            return f"{self.leaves[0]};"
        r = self.default_root()
        if self.is_leaf(r) and len(self.nodes) > 2:
            r = self._adj[r][0]

        def min_leaf(v: int, parent: int) -> int:
            best = v if self.is_leaf(v) else None
            for w in self._adj[v]:
                if w == parent:
                    continue
                m = min_leaf(w, v)
                if best is None or m < best:
                    best = m
            return best

        def emit(v: int, parent: int) -> str:
            kids = [w for w in self._adj[v] if w != parent]
            if not kids:
                return str(v)
            kids.sort(key=lambda w: min_leaf(w, v))
            return "(" + ",".join(emit(w, v) for w in kids) + ")"

        kids = sorted(self._adj[r], key=lambda w: min_leaf(w, r))
        body = ",".join(emit(w, r) for w in kids)
        return f"({body});"


@dataclass(frozen=True)
class RestrictedTree:
    """A tree together with the minimal subtree spanning a leaf subset."""

    tree: TreeTopology
    leaf_set: frozenset[int]
    nodes: frozenset[int]
    edges: frozenset[tuple[int, int]]

    def degree(self, v: int) -> int:
        return sum(1 for e in self.edges if v in e)

    @property
    def inner_nodes(self) -> tuple[int, ...]:
        if len(self.nodes) == 1:
            return ()
        return tuple(sorted(v for v in self.nodes if self.degree(v) > 1))

    def as_topology(self) -> TreeTopology:
        root = self.tree.root if self.tree.root in self.nodes else None
        return TreeTopology(self.nodes, self.edges, root=root)


# ---------------------------------------------------------------------- #
# Newick parsing
# ---------------------------------------------------------------------- #


def parse_newick(text: str) -> TreeTopology:
    """Parse Newick text with integer leaf labels ``1..n``.

    Inner nodes must be unlabeled; branch lengths are accepted and ignored;
    the trailing semicolon is required.  A two-child outer grouping (a
    rooted binary tree) is fused into a single edge and the tree is rooted
    at the first inner child; a grouping with three or more children
    becomes an inner node which is taken as the root.
    """
    s = text.strip()
    if not s.endswith(";"):
        raise TreeError("Newick text must end with ';'")
    s = s[:-1].strip()
    if not s:
        raise TreeError("empty Newick string")

    pos = 0

    def peek() -> str:
        return s[pos] if pos < len(s) else ""

    def skip_ws() -> None:
        nonlocal pos
        while pos < len(s) and s[pos].isspace():
            pos += 1

    def skip_branch_length() -> None:
        nonlocal pos
        skip_ws()
        if peek() == ":":
            pos += 1
            start = pos
            while pos < len(s) and (s[pos].isdigit() or s[pos] in ".eE+-"):
                pos += 1
            if pos == start:
                raise TreeError("':' must be followed by a branch length")

    def parse_subtree():
        # Returns a nested structure: int for a leaf, list for an inner node.
        nonlocal pos
        skip_ws()
        if peek() == "(":
            pos += 1
            children = [parse_subtree()]
            skip_ws()
            while peek() == ",":
                pos += 1
                children.append(parse_subtree())
                skip_ws()
            if peek() != ")":
                raise TreeError("unbalanced parentheses in Newick text")
            pos += 1
            skip_ws()
            if peek().isdigit() or (peek().isalpha() or peek() == "_"):
                raise TreeError("inner nodes must be unlabeled")
            skip_branch_length()
            if len(children) == 1:
                raise TreeError("unary groupings are not allowed")
            return children
        start = pos
        while pos < len(s) and s[pos].isdigit():
            pos += 1
        if pos == start:
            raise TreeError(f"expected a leaf label at position {pos}")
        label = int(s[start:pos])
        skip_branch_length()
        return label

    structure = parse_subtree()
    skip_ws()
    if pos != len(s):
        raise TreeError(f"trailing characters after position {pos}")
    if isinstance(structure, int):
        raise TreeError("a tree needs at least two leaves")

    labels: list[int] = []

    def collect(node) -> None:
        if isinstance(node, int):
            labels.append(node)
        else:
            for c in node:
                collect(c)

    collect(structure)
    if len(labels) != len(set(labels)):
        dup = sorted({x for x in labels if labels.count(x) > 1})
        raise TreeError(f"duplicate leaf labels: {dup}")
    n = len(labels)
    if set(labels) != set(range(1, n + 1)):
        raise TreeError(f"leaf labels must be exactly 1..{n}, got {sorted(labels)}")

    next_id = n + 1
    edges: list[tuple[int, int]] = []

    def build(node) -> int:
        nonlocal next_id
        if isinstance(node, int):
            return node
        my_id = next_id
        next_id += 1
        for child in node:
            edges.append((my_id, build(child)))
        return my_id

    if len(structure) == 2:
        # Rooted binary outer node: fuse its two edges into one.
        left = build(structure[0])
        right = build(structure[1])
        edges.append((left, right))
        nodes = set(labels) | set(range(n + 1, next_id))
        root = left if left > n else (right if right > n else left)
        return TreeTopology(nodes, edges, root=root)
    top = build(structure)
    nodes = set(labels) | set(range(n + 1, next_id))
    return TreeTopology(nodes, edges, root=top)


# ---------------------------------------------------------------------- #
# Trivalent refinement
# ---------------------------------------------------------------------- #


def trivalent_refinement(tree: TreeTopology, root: int | None = None):
    """Resolve every multifurcation into a chain of degree-three nodes.

    Children are attached in order of their smallest descendant leaf: the
    first two children of an overfull node are grouped under a fresh node,
    repeatedly.  Returns ``(refined_tree, introduced)`` where ``introduced``
    maps each new node id to the node it was split off from; the refinement
    of an already-suitable tree is the tree itself with an empty map.
    """
    r = tree.default_root() if root is None else root
    if all(tree.degree(v) <= 3 for v in tree.inner_nodes):
        return tree.with_root(r) if tree.root != r else tree, {}

    parent = tree.parent_map(r)
    children: dict[int, list[int]] = {v: [] for v in tree.nodes}
    for v, p in parent.items():
        if p is not None:
            children[p].append(v)

    min_leaf: dict[int, int] = {}

    def fill_min_leaf(v: int) -> int:
        kids = children[v]
        m = min([fill_min_leaf(w) for w in kids] + ([v] if tree.is_leaf(v) else []))
        min_leaf[v] = m
        return m

    fill_min_leaf(r)

    next_id = max(tree.nodes) + 1
    new_children: dict[int, list[int]] = {
        v: sorted(children[v], key=lambda w: min_leaf[w]) for v in tree.nodes
    }
    introduced: dict[int, int] = {}
    # The root may keep three children (degree three); everyone else two.
    pending = sorted(tree.nodes)
    for v in pending:
        limit = 3 if v == r else 2
        kids = new_children[v]
        while len(kids) > limit:
            fresh = next_id
            next_id += 1
            grouped = kids[:2]
            new_children[fresh] = grouped
            introduced[fresh] = v
            kids = [fresh] + kids[2:]
        new_children[v] = kids

    edges = []
    all_nodes = set()

    def walk(v: int) -> None:
        all_nodes.add(v)
        for w in new_children.get(v, []):
            edges.append((v, w))
            walk(w)

    walk(r)
    return TreeTopology(all_nodes, edges, root=r), introduced
