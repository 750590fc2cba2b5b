"""Latent parametrizations of binary hidden tree models and their maps.

Two equivalent parameter spaces are implemented:

* ``ThetaParams`` - the raw conditional-probability parametrization: the
  root's success probability and, per non-root node, the pair
  ``(P(X_v=1 | parent=0), P(X_v=1 | parent=1))``.  The parameter space is
  the unit cube in ``2|E|+1`` coordinates.
* ``OmegaParams`` - per-node signed means ``1 - 2*E[Y_v]`` and per-edge
  regression coefficients; its defining inequalities are the actual
  membership constraints the certifier and recovery report against.

``forward`` marginalizes the tree Markov process over the inner nodes,
``psi`` evaluates the induced monomial parametrization of tree cumulants,
and the two reparametrization maps convert between the spaces exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

from .moments import EXACT, FLOAT, MomentSet, ProbTable, coerce_number, labels_of
from .radicals import SqrtValue
from .trees import TreeError, TreeTopology, trivalent_refinement

__all__ = [
    "ThetaParams",
    "OmegaParams",
    "validate_theta",
    "validate_omega",
    "forward",
    "theta_to_omega",
    "omega_to_theta",
    "psi",
    "refine_tree_and_params",
    "sample_theta",
    "relabel_hidden",
]


@dataclass(frozen=True)
class ThetaParams:
    """Conditional-probability parameters for a rooted tree.

    ``conditionals[v] = (t10, t11)`` holds ``P(X_v=1 | parent=0)`` and
    ``P(X_v=1 | parent=1)`` for every non-root node ``v``.
    """

    root: int
    root_prob: object
    conditionals: dict[int, tuple]

    def nodes(self) -> set[int]:
        return {self.root} | set(self.conditionals)

    def entry_count(self) -> int:
        return 1 + 2 * len(self.conditionals)

    def to_float(self) -> "ThetaParams":
        return ThetaParams(
            self.root,
            float(self.root_prob),
            {v: (float(a), float(b)) for v, (a, b) in self.conditionals.items()},
        )

    def to_json(self) -> dict:
        def num(x):
            return str(x) if isinstance(x, Fraction) else x

        return {
            "root": self.root,
            "root_prob": num(self.root_prob),
            "conditionals": {
                str(v): [num(a), num(b)] for v, (a, b) in sorted(self.conditionals.items())
            },
        }

    @classmethod
    def from_json(cls, doc: dict, mode: str = EXACT) -> "ThetaParams":
        return cls(
            root=int(doc["root"]),
            root_prob=coerce_number(doc["root_prob"], mode),
            conditionals={
                int(v): (coerce_number(a, mode), coerce_number(b, mode))
                for v, (a, b) in doc["conditionals"].items()
            },
        )


@dataclass(frozen=True)
class OmegaParams:
    """Signed node means and directed-edge regression coefficients."""

    root: int
    node_means: dict[int, object]
    edge_coeffs: dict[tuple[int, int], object]

    def eta(self, u: int, v: int):
        return self.edge_coeffs[(u, v)]

    def mean(self, v: int):
        return self.node_means[v]

    def to_float(self) -> "OmegaParams":
        return OmegaParams(
            self.root,
            {v: float(x) for v, x in self.node_means.items()},
            {e: float(x) for e, x in self.edge_coeffs.items()},
        )

    def to_json(self) -> dict:
        def num(x):
            if isinstance(x, Fraction):
                return str(x)
            if isinstance(x, SqrtValue):
                return str(x.as_fraction()) if x.is_rational else float(x)
            return x

        return {
            "root": self.root,
            "node_means": {str(v): num(x) for v, x in sorted(self.node_means.items())},
            "edge_coeffs": {
                f"{u}-{v}": num(x) for (u, v), x in sorted(self.edge_coeffs.items())
            },
        }

    @classmethod
    def from_json(cls, doc: dict, mode: str = EXACT) -> "OmegaParams":
        coeffs = {}
        for key, x in doc["edge_coeffs"].items():
            u, v = key.split("-")
            coeffs[(int(u), int(v))] = coerce_number(x, mode)
        return cls(
            root=int(doc["root"]),
            node_means={int(v): coerce_number(x, mode) for v, x in doc["node_means"].items()},
            edge_coeffs=coeffs,
        )


# ---------------------------------------------------------------------- #
# Validation
# ---------------------------------------------------------------------- #


def _check_theta_shape(tree: TreeTopology, theta: ThetaParams) -> None:
    if theta.root not in tree.nodes:
        raise ValueError(f"theta root {theta.root} is not a tree node")
    expected = tree.nodes - {theta.root}
    if set(theta.conditionals) != expected:
        missing = sorted(expected - set(theta.conditionals))
        extra = sorted(set(theta.conditionals) - expected)
        raise ValueError(f"theta shape mismatch: missing {missing}, extra {extra}")


def validate_theta(tree: TreeTopology, theta: ThetaParams):
    """Unit-cube membership with per-entry witnesses.

    Returns ``(ok, violations)`` where each violation is a tuple
    ``(node, which, value)`` with ``which`` in {"root", "1|0", "1|1"}.
    """
    _check_theta_shape(tree, theta)
    violations = []
    if not 0 <= theta.root_prob <= 1:
        violations.append((theta.root, "root", theta.root_prob))
    for v in sorted(theta.conditionals):
        t10, t11 = theta.conditionals[v]
        if not 0 <= t10 <= 1:
            violations.append((v, "1|0", t10))
        if not 0 <= t11 <= 1:
            violations.append((v, "1|1", t11))
    return (not violations, violations)


def validate_omega(tree: TreeTopology, omega: OmegaParams):
    """Check the defining inequalities of the signed-mean parameter space.

    Per directed edge (u, v):

        -(1 + mean_v) <= (1 - mean_u) * eta <= (1 - mean_v)
        -(1 - mean_v) <= (1 + mean_u) * eta <= (1 + mean_v)

    plus the root mean lying in [-1, 1].  Violations are tuples
    ``(edge, side, lhs, bound)`` (edge None for the root bound).
    """
    violations = []
    mr = omega.node_means[omega.root]
    if not -1 <= mr <= 1:
        violations.append((None, "root-mean", mr, 1))
    for u, v in tree.directed_edges(omega.root):
        eta = omega.edge_coeffs[(u, v)]
        mu, mv = omega.node_means[u], omega.node_means[v]
        minus = (1 - mu) * eta
        plus = (1 + mu) * eta
        if minus > 1 - mv:
            violations.append(((u, v), "(1-mean_u)*eta <= 1-mean_v", minus, 1 - mv))
        if minus < -(1 + mv):
            violations.append(((u, v), "(1-mean_u)*eta >= -(1+mean_v)", minus, -(1 + mv)))
        if plus > 1 + mv:
            violations.append(((u, v), "(1+mean_u)*eta <= 1+mean_v", plus, 1 + mv))
        if plus < -(1 - mv):
            violations.append(((u, v), "(1+mean_u)*eta >= -(1-mean_v)", plus, -(1 - mv)))
    return (not violations, violations)


# ---------------------------------------------------------------------- #
# Forward map
# ---------------------------------------------------------------------- #


def forward(tree: TreeTopology, theta: ThetaParams, mode: str | None = None) -> ProbTable:
    """Joint law of the leaves: marginalize the process over inner nodes."""
    _check_theta_shape(tree, theta)
    if mode is None:
        mode = EXACT if isinstance(theta.root_prob, (Fraction, int)) else FLOAT
    order = tree.topological_order(theta.root)
    parent = tree.parent_map(theta.root)
    n = tree.n
    leaves = set(tree.leaves)
    inner = [v for v in order if v not in leaves]
    if mode == EXACT:
        return _forward_exact(tree, theta, order, parent, inner)
    size = 1 << n
    out = [0.0] * size
    node_pos = {v: i for i, v in enumerate(order)}
    nodes = order
    for assign in range(1 << len(nodes)):
        states = {v: assign >> node_pos[v] & 1 for v in nodes}
        w = theta.root_prob if states[theta.root] else 1.0 - theta.root_prob
        for v in nodes:
            if v == theta.root:
                continue
            t10, t11 = theta.conditionals[v]
            t = t11 if states[parent[v]] else t10
            w *= t if states[v] else 1.0 - t
        mask = 0
        for leaf in leaves:
            if states[leaf]:
                mask |= 1 << (leaf - 1)
        out[mask] += w
    return ProbTable(n, out, mode=FLOAT, _validate=False)


def _forward_exact(tree, theta, order, parent, inner) -> ProbTable:
    # Scale every parameter to a common integer grid so the hidden-state
    # sum runs in plain integer arithmetic; one Fraction per table entry
    # is built at the end.
    root = theta.root
    dens = {root: Fraction(theta.root_prob).denominator}
    for v, (t10, t11) in theta.conditionals.items():
        dens[v] = lcm(Fraction(t10).denominator, Fraction(t11).denominator)
    total_den = 1
    for v in order:
        total_den *= dens[v]
    num = {}
    rp = Fraction(theta.root_prob)
    num[root] = {
        (1, None): rp.numerator * (dens[root] // rp.denominator),
    }
    num[root][(0, None)] = dens[root] - num[root][(1, None)]
    for v, (t10, t11) in theta.conditionals.items():
        f10, f11 = Fraction(t10), Fraction(t11)
        d = dens[v]
        n10 = f10.numerator * (d // f10.denominator)
        n11 = f11.numerator * (d // f11.denominator)
        num[v] = {(1, 0): n10, (1, 1): n11, (0, 0): d - n10, (0, 1): d - n11}
    n = tree.n
    leaves = tree.leaves
    out = [0] * (1 << n)
    n_inner = len(inner)
    inner_pos = {v: i for i, v in enumerate(inner)}
    for leafmask in range(1 << n):
        leaf_state = {leaf: leafmask >> (leaf - 1) & 1 for leaf in leaves}
        acc = 0
        for hidden in range(1 << n_inner):
            def state(v):
                return (
                    leaf_state[v]
                    if v in leaf_state
                    else hidden >> inner_pos[v] & 1
                )

            w = num[root][(state(root), None)]
            for v in order:
                if v == root:
                    continue
                w *= num[v][(state(v), state(parent[v]))]
                if w == 0:
                    break
            acc += w
        out[leafmask] = acc
    vals = [Fraction(x, total_den) for x in out]
    return ProbTable(n, vals, mode=EXACT, _validate=False)


# ---------------------------------------------------------------------- #
# Reparametrization
# ---------------------------------------------------------------------- #


def theta_to_omega(tree: TreeTopology, theta: ThetaParams) -> OmegaParams:
    """Signed means by chain marginalization; edge coefficients by differencing."""
    _check_theta_shape(tree, theta)
    order = tree.topological_order(theta.root)
    parent = tree.parent_map(theta.root)
    lam = {theta.root: theta.root_prob}
    for v in order:
        if v == theta.root:
            continue
        t10, t11 = theta.conditionals[v]
        lp = lam[parent[v]]
        lam[v] = t11 * lp + t10 * (1 - lp)
    means = {v: 1 - 2 * lam[v] for v in order}
    coeffs = {}
    for u, v in tree.directed_edges(theta.root):
        t10, t11 = theta.conditionals[v]
        coeffs[(u, v)] = t11 - t10
    return OmegaParams(root=theta.root, node_means=means, edge_coeffs=coeffs)


def omega_to_theta(tree: TreeTopology, omega: OmegaParams) -> ThetaParams:
    """Exact inverse of :func:`theta_to_omega`.

    Out-of-range conditional probabilities are returned as-is; run
    :func:`validate_theta` to collect them.  That is deliberate: inspecting
    infeasible conditionals is the central diagnostic this library exists
    to support.
    """
    half = Fraction(1, 2)
    lam = {v: (1 - m) * half for v, m in omega.node_means.items()}
    conds = {}
    for u, v in tree.directed_edges(omega.root):
        eta = omega.edge_coeffs[(u, v)]
        t10 = lam[v] - lam[u] * eta
        t11 = lam[v] + (1 - lam[u]) * eta
        conds[v] = (t10, t11)
    return ThetaParams(root=omega.root, root_prob=lam[omega.root], conditionals=conds)


# ---------------------------------------------------------------------- #
# Monomial parametrization of tree cumulants
# ---------------------------------------------------------------------- #


def _psi_structure(tree: TreeTopology, root: int):
    """Per-subset data for the monomial cumulant formula, cached on the tree.

    For each leaf-subset mask: the restriction's root, the inner nodes of
    the spanning subtree with their degree-minus-two exponents (only
    positive exponents are kept), and the directed edges of the subtree.
    """
    cache = tree.__dict__.setdefault("_psi_structure_cache", {})
    if root in cache:
        return cache[root]
    parent = tree.parent_map(root)
    structure = {}
    n = tree.n
    for mask in range(1, 1 << n):
        labels = labels_of(mask)
        if len(labels) < 2:
            continue
        rt = tree.restrict(labels)
        r_i = tree.root_of_restriction(labels, root)
        exponents = tuple(
            (v, rt.degree(v) - 2)
            for v in rt.inner_nodes
            if rt.degree(v) > 2
        )
        edges = []
        for a, b in sorted(rt.edges):
            edges.append((a, b) if parent[b] == a else (b, a))
        structure[mask] = (r_i, exponents, tuple(edges))
    cache[root] = structure
    return structure


def _square(x):
    return x.square() if isinstance(x, SqrtValue) else x * x


def psi(tree: TreeTopology, omega: OmegaParams, mode: str | None = None) -> MomentSet:
    """Monomial parametrization: latent parameters to tree cumulants.

    Requires every inner node to have degree at most three; run
    :func:`refine_tree_and_params` first for bushier trees, in which case
    the output lives in the refined tree's cumulant coordinates.
    """
    over = [v for v in tree.inner_nodes if tree.degree(v) > 3]
    if over:
        raise TreeError(
            f"inner nodes of degree > 3: {over}; supply a trivalent refinement"
        )
    if mode is None:
        sample = omega.node_means[omega.root]
        mode = FLOAT if isinstance(sample, float) else EXACT
    n = tree.n
    structure = _psi_structure(tree, omega.root)
    quarter = Fraction(1, 4) if mode == EXACT else 0.25
    one = Fraction(1) if mode == EXACT else 1.0
    zero = Fraction(0) if mode == EXACT else 0.0
    means = [(one - omega.node_means[i]) / 2 for i in range(1, n + 1)]
    values = [zero] * (1 << n)
    values[0] = one
    exact_out = True
    for mask, (r_i, exponents, edges) in structure.items():
        root_mean = omega.node_means[r_i]
        acc = (one - _square(root_mean)) * quarter
        for v, e in exponents:
            acc = acc * omega.node_means[v] ** e
        for u, v in edges:
            acc = acc * omega.edge_coeffs[(u, v)]
        if isinstance(acc, SqrtValue):
            if acc.is_rational:
                acc = acc.as_fraction()
            else:
                exact_out = False
        values[mask] = acc
    if not exact_out:
        # Irrational parameters: deliver the float picture; exact callers
        # compare squares upstream instead of materializing radicals here.
        return MomentSet(
            n,
            "cumulant",
            [float(v) for v in values],
            means=[float(x) for x in means],
            mode=FLOAT,
        )
    return MomentSet(n, "cumulant", values, means=means, mode=mode)


def psi_values(tree: TreeTopology, omega: OmegaParams) -> dict[int, object]:
    """Raw cumulant values from the monomial formula, radicals preserved.

    Unlike :func:`psi` this returns a plain mask-indexed dict and keeps
    :class:`SqrtValue` entries intact so exact comparisons stay exact.
    """
    over = [v for v in tree.inner_nodes if tree.degree(v) > 3]
    if over:
        raise TreeError(f"inner nodes of degree > 3: {over}")
    structure = _psi_structure(tree, omega.root)
    quarter = Fraction(1, 4)
    out: dict[int, object] = {0: Fraction(1)}
    for i in range(1, tree.n + 1):
        out[1 << (i - 1)] = Fraction(0)
    for mask, (r_i, exponents, edges) in structure.items():
        root_mean = omega.node_means[r_i]
        acc = (1 - _square(root_mean)) * quarter
        for v, e in exponents:
            acc = acc * omega.node_means[v] ** e
        for u, v in edges:
            acc = acc * omega.edge_coeffs[(u, v)]
        if isinstance(acc, SqrtValue) and acc.is_rational:
            acc = acc.as_fraction()
        out[mask] = acc
    return out


def refine_tree_and_params(tree: TreeTopology, omega: OmegaParams):
    """Embed a bushy tree's parameters into a trivalent refinement.

    Introduced edges carry coefficient one and introduced nodes copy the
    mean of the node they were split from, so the refined parameters
    induce exactly the same leaf law.  Returns ``(refined_tree,
    refined_omega, introduced)``.
    """
    refined, introduced = trivalent_refinement(tree, omega.root)
    if not introduced:
        return refined, omega, introduced
    exact = not isinstance(omega.node_means[omega.root], float)
    one = Fraction(1) if exact else 1.0
    means = dict(omega.node_means)
    for fresh, origin in introduced.items():
        base = origin
        while base in introduced:  # origin may itself be an introduced node
            base = introduced[base]
        means[fresh] = omega.node_means[base]
    coeffs = {}
    old_adj = {
        frozenset(e): omega.edge_coeffs[e] for e in omega.edge_coeffs
    }

    def origin_of(v: int) -> int:
        while v in introduced:
            v = introduced[v]
        return v

    for u, v in refined.directed_edges(omega.root):
        ou, ov = origin_of(u), origin_of(v)
        if ou == ov:
            coeffs[(u, v)] = one
        else:
            coeffs[(u, v)] = old_adj[frozenset((ou, ov))]
    return refined, OmegaParams(omega.root, means, coeffs), introduced


# ---------------------------------------------------------------------- #
# Sampling and hidden relabeling
# ---------------------------------------------------------------------- #


def sample_theta(
    tree: TreeTopology,
    rng: random.Random,
    mode: str = EXACT,
    grid: int = 256,
    root: int | None = None,
) -> ThetaParams:
    """Draw parameters uniformly from the unit cube.

    In exact mode the draw is uniform on the grid ``{0, 1/grid, ..., 1}``
    so downstream rational arithmetic stays bounded.
    """
    r = tree.default_root() if root is None else root

    def draw():
        if mode == EXACT:
            return Fraction(rng.randint(0, grid), grid)
        return rng.random()

    conds = {v: (draw(), draw()) for v in sorted(tree.nodes) if v != r}
    return ThetaParams(root=r, root_prob=draw(), conditionals=conds)


def relabel_hidden(tree: TreeTopology, theta: ThetaParams, flips) -> ThetaParams:
    """Swap the state labels of the given inner nodes.

    Relabeling hidden nodes leaves the leaf law untouched; it generates
    the whole non-identifiable class of a generic parameter point.
    """
    flips = set(flips)
    leafset = set(tree.leaves)
    if flips & leafset:
        raise ValueError("only inner (hidden) nodes can be relabeled")
    parent = tree.parent_map(theta.root)
    rp = theta.root_prob
    if theta.root in flips:
        rp = 1 - rp
    conds = {}
    for v, (t10, t11) in theta.conditionals.items():
        if parent[v] in flips:
            t10, t11 = t11, t10
        if v in flips:
            t10, t11 = 1 - t10, 1 - t11
        conds[v] = (t10, t11)
    return ThetaParams(theta.root, rp, conds)
