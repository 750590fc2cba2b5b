"""Identification of latent parameters from observed moments.

On a trivalent tree with no vanishing pairwise covariances the latent
parameters are pinned down, up to hidden-state relabeling, by moment
ratios: the squared mean at an inner node is the squared third moment of
any triple it separates divided by that triple's hyperdeterminant, and
squared edge coefficients are hyperdeterminant ratios.  Signs then follow
from the pairwise covariance signs via an edge sign assignment.

Vanishing covariances are handled by deleting the edges across which
every covariance vanishes (the covariance forest); each surviving
component is recovered independently, with two-leaf components solved by
a copy construction whose non-uniqueness is flagged.

Recovered values may be irrational (square roots of moment ratios); in
exact mode they are carried as :class:`~treecumulants.radicals.SqrtValue`
and every feasibility decision, including the parameter-space
inequalities, is made exactly.  Infeasibility is a reported outcome,
never an exception.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .membership import triple_hyperdet
from .metrics import sign_assignment
from .models import OmegaParams, ThetaParams, omega_to_theta, psi_values, validate_theta
from .moments import (
    EXACT,
    FLOAT,
    MomentSet,
    ProbTable,
    central_to_cumulants,
    cumulants_to_central,
    noncentral_to_central,
    probs_to_noncentral,
)
from .radicals import SqrtValue, sign_of_radical_sum
from .trees import TreeError, TreeTopology

__all__ = [
    "KForest",
    "RecoveryResult",
    "SquareRecovery",
    "k_forest",
    "recover_squares",
    "resolve_signs",
    "recover",
]


@dataclass(frozen=True)
class KForest:
    """Edges isolated by vanishing covariances, and what is left.

    An edge is isolated when every leaf pair whose path crosses it has
    zero covariance.  Components are the connected pieces after deleting
    the isolated edges; each is either a lone inner node or a subtree
    whose degree-one nodes are original leaves.
    """

    isolated_edges: frozenset
    components: tuple  # of (nodes frozenset, edges frozenset, leaves tuple)

    def is_degenerate(self) -> bool:
        return bool(self.isolated_edges)


@dataclass
class RecoveryResult:
    """Outcome of latent-parameter recovery."""

    omega: OmegaParams
    theta: ThetaParams | None
    feasible: bool
    reproduces_input: bool
    violations: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    degenerate_info: KForest | None = None
    theta_exact: bool = True
    mode: str = EXACT

    def omega_float(self) -> OmegaParams:
        return OmegaParams(
            self.omega.root,
            {v: float(x) for v, x in self.omega.node_means.items()},
            {e: float(x) for e, x in self.omega.edge_coeffs.items()},
        )

    def to_json(self) -> dict:
        doc = {
            "feasible": self.feasible,
            "reproduces_input": self.reproduces_input,
            "mode": self.mode,
            "omega": self.omega_float().to_json(),
            "theta": None,
            "theta_exact": self.theta_exact,
            "violations": [list(map(_jsonable, v)) for v in self.violations],
            "diagnostics": self.diagnostics,
            "degenerate": None,
        }
        if self.theta is not None:
            doc["theta"] = (
                self.theta.to_json() if self.theta_exact else self.theta.to_float().to_json()
            )
        if self.degenerate_info is not None and self.degenerate_info.is_degenerate():
            doc["degenerate"] = {
                "isolated_edges": sorted(map(list, self.degenerate_info.isolated_edges)),
                "components": [
                    {"leaves": list(leaves), "nodes": sorted(nodes)}
                    for nodes, _edges, leaves in self.degenerate_info.components
                ],
            }
        return doc


def _jsonable(x):
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, SqrtValue):
        return float(x)
    if isinstance(x, tuple):
        return list(x)
    return x


def _sign(x) -> int:
    return (x > 0) - (x < 0)


# ---------------------------------------------------------------------- #
# Covariance forest
# ---------------------------------------------------------------------- #


def k_forest(tree: TreeTopology, m: MomentSet, tol=0) -> KForest:
    """Isolated edges and the components they leave behind."""

    def is_zero(x) -> bool:
        return x == 0 if tol == 0 else abs(x) <= tol

    isolated = set()
    for split in tree.edge_splits():
        crossing_nonzero = any(
            not is_zero(m.value((i, j)))
            for i in split.block_a
            for j in split.block_b
        )
        if not crossing_nonzero:
            isolated.add(split.edge)
    remaining = [e for e in tree.edges if e not in isolated]
    adj = {v: [] for v in tree.nodes}
    for u, v in remaining:
        adj[u].append(v)
        adj[v].append(u)
    unvisited = set(tree.nodes)
    comps = []
    while unvisited:
        start = min(unvisited)
        unvisited.discard(start)
        nodes = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for w in adj[x]:
                if w in unvisited:
                    unvisited.discard(w)
                    nodes.add(w)
                    stack.append(w)
        edges = frozenset(e for e in remaining if e[0] in nodes)
        leaves = tuple(sorted(v for v in nodes if tree.is_leaf(v)))
        comps.append((frozenset(nodes), edges, leaves))
    comps.sort(key=lambda c: min(c[0]))
    return KForest(isolated_edges=frozenset(isolated), components=tuple(comps))


# ---------------------------------------------------------------------- #
# Core graphs: components with degree-two chains suppressed
# ---------------------------------------------------------------------- #


class _Core:
    """A component subtree with its degree-two chains contracted away."""

    def __init__(self, nodes, edges, leaves):
        self.leaves = tuple(sorted(leaves))
        adj = {v: set() for v in nodes}
        for u, v in edges:
            adj[u].add(v)
            adj[v].add(u)
        # chains[frozenset(core edge)] = ordered node path between core nodes
        paths = {frozenset((u, v)): [u, v] for u, v in edges}
        leafset = set(leaves)
        changed = True
        while changed:
            changed = False
            for x in list(adj):
                if len(adj[x]) == 2 and x not in leafset:
                    a, b = sorted(adj[x])
                    pa = paths.pop(frozenset((a, x)))
                    pb = paths.pop(frozenset((x, b)))
                    if pa[0] == x:
                        pa.reverse()
                    if pb[-1] == x:
                        pb.reverse()
                    paths[frozenset((a, b))] = pa + pb[1:]
                    adj[a].discard(x)
                    adj[b].discard(x)
                    adj[a].add(b)
                    adj[b].add(a)
                    del adj[x]
                    changed = True
                    break
        self.adj = {v: tuple(sorted(ws)) for v, ws in adj.items()}
        self.paths = paths  # core edge -> original node path
        self.nodes = frozenset(adj)

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def inner_nodes(self):
        return tuple(sorted(v for v in self.nodes if self.degree(v) >= 2))

    def direction_leaves(self, v: int, toward: int) -> list[int]:
        """Component leaves reachable from v through neighbor ``toward``."""
        seen = {v, toward}
        stack = [toward]
        out = []
        leafset = set(self.leaves)
        while stack:
            x = stack.pop()
            if x in leafset:
                out.append(x)
            for w in self.adj[x]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        out.sort()
        return out

    def path_of(self, u: int, v: int) -> list[int]:
        """Original node path of a core edge, oriented u -> v."""
        p = self.paths[frozenset((u, v))]
        return p if p[0] == u else list(reversed(p))

    def parent_map(self, root: int) -> dict:
        parent = {root: None}
        stack = [root]
        while stack:
            x = stack.pop()
            for w in self.adj[x]:
                if w not in parent:
                    parent[w] = x
                    stack.append(w)
        return parent

    def as_topology(self) -> TreeTopology:
        edges = []
        for key in self.paths:
            a, b = tuple(key)
            edges.append((a, b))
        return TreeTopology(self.nodes, edges)


# ---------------------------------------------------------------------- #
# Case 1: all pairwise covariances nonzero on a component
# ---------------------------------------------------------------------- #


def _sqrt_value(square, sign: int, exact: bool):
    if exact:
        return SqrtValue.from_square(Fraction(square), sign)
    return sign * math.sqrt(max(float(square), 0.0))


def _witness_triples_at(core: _Core, v: int):
    """Smallest leaf per direction at a degree-three core node."""
    dirs = [core.direction_leaves(v, w) for w in core.adj[v]]
    return dirs


@dataclass
class SquareRecovery:
    """Squared parameters from moment ratios, with witness diagnostics.

    ``edge_squares`` is keyed by directed edge for the rooting used;
    ``checks`` records disagreements between alternative witness choices,
    which can only occur when the split equations fail.
    """

    root: int
    node_squares: dict
    edge_squares: dict
    node_witnesses: dict
    checks: list


def recover_squares(tree: TreeTopology, m: MomentSet, root: int | None = None) -> SquareRecovery:
    """Squared latent parameters from moment ratios (nondegenerate case).

    Requires a trivalent tree and nonvanishing pairwise covariances; the
    degenerate cases are routed through :func:`recover`.
    """
    if not tree.is_trivalent():
        raise TreeError("square recovery requires a trivalent tree")
    if m.kind not in ("central", "cumulant"):
        raise ValueError("need central moments or cumulants")
    for i, j in itertools.combinations(range(1, m.n + 1), 2):
        if m.value((i, j)) == 0:
            raise ValueError(
                f"pair ({i},{j}) has zero covariance; run full recover() instead"
            )
    r = tree.default_root() if root is None else root
    if tree.is_leaf(r) and tree.inner_nodes:
        r = tree.inner_nodes[0]
    core = _Core(tree.nodes, tree.edges, tree.leaves)
    node_squares, edge_squares, checks, node_witness = _case1_squares(core, m, r)
    return SquareRecovery(
        root=r,
        node_squares=node_squares,
        edge_squares=edge_squares,
        node_witnesses=node_witness,
        checks=checks,
    )


def _case1_squares(core: _Core, m: MomentSet, root: int):
    checks: list[dict] = []
    node_squares: dict[int, object] = {}
    node_witness: dict[int, tuple] = {}

    def det_of(triple):
        return triple_hyperdet(m, *sorted(triple))

    for h in core.inner_nodes():
        if core.degree(h) != 3:
            raise ValueError(f"core node {h} has degree {core.degree(h)}, expected 3")
        dirs = _witness_triples_at(core, h)
        triple = (dirs[0][0], dirs[1][0], dirs[2][0])
        det = det_of(triple)
        if det <= 0:
            raise _Nonpositive(h, triple, det)
        mu3 = m.value(tuple(sorted(triple)))
        node_squares[h] = mu3 * mu3 / det
        node_witness[h] = tuple(sorted(triple))
        for d in range(3):
            if len(dirs[d]) > 1:
                alt = list(triple)
                alt[d] = dirs[d][1]
                det_a = det_of(alt)
                if det_a > 0:
                    mu_a = m.value(tuple(sorted(alt)))
                    val_a = mu_a * mu_a / det_a
                    if val_a != node_squares[h]:
                        checks.append(
                            {
                                "kind": "node-square-mismatch",
                                "node": h,
                                "witnesses": (tuple(sorted(triple)), tuple(sorted(alt))),
                                "values": (node_squares[h], val_a),
                            }
                        )

    edge_squares: dict[tuple[int, int], object] = {}
    parent = core.parent_map(root)
    for v, p in parent.items():
        if p is None:
            continue
        u = p
        if v in core.leaves:
            dirs = [d for w, d in zip(core.adj[u], _witness_triples_at(core, u)) if w != v]
            j, k = dirs[0][0], dirs[1][0]
            det = det_of((v, j, k))
            if det <= 0:
                raise _Nonpositive(u, (v, j, k), det)
            mjk = m.value(tuple(sorted((j, k))))
            edge_squares[(u, v)] = det / (mjk * mjk)
            alts = []
            if len(dirs[0]) > 1:
                alts.append((dirs[0][1], k))
            if len(dirs[1]) > 1:
                alts.append((j, dirs[1][1]))
            for (j2, k2) in alts:
                det_a = det_of((v, j2, k2))
                m2 = m.value(tuple(sorted((j2, k2))))
                if det_a > 0 and m2 != 0:
                    val_a = det_a / (m2 * m2)
                    if val_a != edge_squares[(u, v)]:
                        checks.append(
                            {
                                "kind": "edge-square-mismatch",
                                "edge": (u, v),
                                "witnesses": ((v, j, k), (v, j2, k2)),
                                "values": (edge_squares[(u, v)], val_a),
                            }
                        )
        else:
            dirs_u = [d for w, d in zip(core.adj[u], _witness_triples_at(core, u)) if w != v]
            dirs_v = [d for w, d in zip(core.adj[v], _witness_triples_at(core, v)) if w != u]
            i, j = sorted((dirs_u[0][0], dirs_u[1][0]))
            k, l = sorted((dirs_v[0][0], dirs_v[1][0]))
            det_ijk = det_of((i, j, k))
            det_ikl = det_of((i, k, l))
            if det_ijk < 0:
                raise _Nonpositive(u, (i, j, k), det_ijk)
            if det_ikl <= 0:
                raise _Nonpositive(v, (i, k, l), det_ikl)
            mu_il = m.value(tuple(sorted((i, l))))
            mu_ij = m.value(tuple(sorted((i, j))))
            edge_squares[(u, v)] = (
                mu_il * mu_il / (mu_ij * mu_ij) * det_ijk / det_ikl
            )
    return node_squares, edge_squares, checks, node_witness


class _Nonpositive(Exception):
    """A triple hyperdeterminant needed by recovery is not positive."""

    def __init__(self, node, triple, value):
        self.node = node
        self.triple = tuple(sorted(triple))
        self.value = value
        super().__init__(f"hyperdeterminant of {self.triple} at node {node} is {value}")


def resolve_signs(
    tree: TreeTopology, m: MomentSet, squares: SquareRecovery | None = None
) -> OmegaParams:
    """Attach signs to recovered squares via the covariance sign pattern.

    Raises ValueError when the pairwise signs admit no edge assignment
    (some triple has negative sign product).  The returned parameters use
    exact radicals in exact mode.
    """
    if squares is None:
        squares = recover_squares(tree, m)
    core = _Core(tree.nodes, tree.edges, tree.leaves)
    exact = m.mode == EXACT
    return _signed_omega(
        core,
        m,
        squares.root,
        squares.node_squares,
        squares.edge_squares,
        squares.node_witnesses,
        exact,
    )


def _signed_omega(core, m, root, node_squares, edge_squares, node_witness, exact):
    sigma = {}
    for i, j in itertools.combinations(core.leaves, 2):
        s = _sign(m.value((i, j)))
        if s == 0:
            raise ValueError(f"pair ({i},{j}) has zero covariance")
        sigma[(i, j)] = s
    assignment = sign_assignment(core.as_topology(), sigma)
    if not assignment.feasible:
        raise ValueError(
            f"no edge sign assignment: triple {assignment.violating_triple} "
            "has negative covariance sign product"
        )
    core_top = core.as_topology()

    means: dict[int, object] = {}
    for i in core.leaves:
        means[i] = m.signed_mean(i)
    for h, sq in node_squares.items():
        i, j, k = node_witness[h]
        s3 = _sign(m.value((i, j, k)))
        s = (
            s3
            * assignment.node_pair_sign(core_top, h, i)
            * assignment.node_pair_sign(core_top, h, j)
            * assignment.node_pair_sign(core_top, h, k)
        )
        means[h] = _sqrt_value(sq, s, exact)

    etas: dict[tuple[int, int], object] = {}
    for (u, v), sq in edge_squares.items():
        s = assignment.edge_sign(u, v)
        etas[(u, v)] = _sqrt_value(sq, s, exact)
    return OmegaParams(root=root, node_means=means, edge_coeffs=etas)


# ---------------------------------------------------------------------- #
# Full recovery with the degenerate case
# ---------------------------------------------------------------------- #


def recover(tree: TreeTopology, data, tol=0, root: int | None = None) -> RecoveryResult:
    """Full latent-parameter recovery from a table or moment set.

    Runs the covariance-forest split, per-component identification, sign
    resolution, the canonical hidden-relabel representative (root mean
    nonnegative), parameter-space validation, and a verification that the
    monomial parametrization reproduces the input cumulants.
    """
    if not tree.is_trivalent():
        raise TreeError("recovery requires a trivalent tree")
    kappa, central = _to_moments(tree, data)
    exact = central.mode == EXACT
    if not exact and tol == 0:
        tol = 1e-9
    r = tree.default_root() if root is None else root
    if tree.is_leaf(r) and tree.inner_nodes:
        r = tree.inner_nodes[0]

    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    diagnostics: list = []
    forest = k_forest(tree, central, tol if not exact else 0)

    means: dict[int, object] = {}
    etas: dict[tuple[int, int], object] = {}
    parent = tree.parent_map(r)
    for u, v in tree.directed_edges(r):
        if tuple(sorted((u, v))) in forest.isolated_edges:
            etas[(u, v)] = zero
    for i in tree.leaves:
        means[i] = central.signed_mean(i)

    for nodes, edges, leaves in forest.components:
        local_root = min(nodes, key=lambda x: (_depth(parent, x), x))
        if len(leaves) == 0 or (len(leaves) <= 1 and len(nodes) == 1):
            for v in nodes:
                if not tree.is_leaf(v):
                    means[v] = zero
            continue
        if len(leaves) == 1:
            # A pendant fragment: nothing beyond the leaf mean is
            # identified; defaulted to the uncorrelated point.
            for v in nodes:
                if not tree.is_leaf(v):
                    means[v] = zero
            for u, v in _directed_within(tree, r, edges):
                etas[(u, v)] = zero
            diagnostics.append(
                {"kind": "unidentified-component", "leaves": list(leaves)}
            )
            continue
        core = _Core(nodes, edges, leaves)
        if len(leaves) == 2:
            _two_leaf_component(
                tree, core, central, r, local_root, means, etas, exact, diagnostics
            )
            diagnostics.append(
                {
                    "kind": "one-parameter-family",
                    "leaves": list(leaves),
                    "note": "two-leaf component; hidden nodes copy one leaf",
                }
            )
            continue
        ok = _component_case1(
            tree, core, central, r, local_root, means, etas, exact, diagnostics
        )
        if not ok:
            for v in nodes:
                if not tree.is_leaf(v) and v not in means:
                    means[v] = zero
            for u, v in _directed_within(tree, r, edges):
                if (u, v) not in etas:
                    etas[(u, v)] = zero

    omega = OmegaParams(root=r, node_means=means, edge_coeffs=etas)
    omega = _canonical_flip(tree, omega, exact)

    violations = _validate_exact(tree, omega) if exact else _validate_float(tree, omega, tol)
    reproduces = _verify_psi(tree, omega, kappa, exact, tol)

    theta, theta_exact = _theta_from_omega(tree, omega, exact)
    theta_violations = []
    if theta is not None:
        ok_theta, theta_violations = validate_theta(tree, theta)
    feasible = not violations and not theta_violations and reproduces
    all_violations = [("omega",) + tuple(v) for v in violations] + [
        ("theta",) + tuple(v) for v in theta_violations
    ]
    return RecoveryResult(
        omega=omega,
        theta=theta,
        feasible=feasible,
        reproduces_input=reproduces,
        violations=all_violations,
        diagnostics=diagnostics,
        degenerate_info=forest,
        theta_exact=theta_exact,
        mode=EXACT if exact else FLOAT,
    )


def _to_moments(tree, data):
    if isinstance(data, ProbTable):
        central = noncentral_to_central(probs_to_noncentral(data))
        kappa = central_to_cumulants(tree, central)
        return kappa, central
    if isinstance(data, MomentSet):
        if data.kind == "cumulant":
            return data, cumulants_to_central(tree, data)
        if data.kind == "central":
            return central_to_cumulants(tree, data), data
    raise TypeError("recover needs a probability table or a moment set")


def _depth(parent, v):
    d = 0
    while parent[v] is not None:
        v = parent[v]
        d += 1
    return d


def _directed_within(tree, root, edges):
    out = []
    for u, v in tree.directed_edges(root):
        if tuple(sorted((u, v))) in edges:
            out.append((u, v))
    return out


def _two_leaf_component(tree, core, m, global_root, local_root, means, etas, exact, diagnostics):
    """Copy construction for a two-leaf component.

    Every hidden node on the path copies the source leaf (the component's
    entry point when that is a leaf, else the smaller leaf); the edge
    into the far leaf carries the regression coefficient of the far leaf
    on the source.  The pair covariance is then reproduced and the
    parameters sit inside the parameter space whenever the pair margin is
    a genuine distribution.  The family of valid parameters here is a
    curve; this picks one representative deterministically.
    """
    i, j = core.leaves
    source = local_root if local_root in (i, j) else min(i, j)
    far = j if source == i else i
    mbar = m.signed_mean(source)
    var4 = 1 - mbar * mbar
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    mu = m.value(tuple(sorted((i, j))))
    if var4 == 0:
        diagnostics.append(
            {
                "kind": "degenerate-source-leaf",
                "leaves": [i, j],
                "note": "source leaf has zero variance but nonzero covariance",
            }
        )
        eta_reg = zero
    else:
        eta_reg = 4 * mu / var4
    path = tree.path_nodes(i, j)
    for x in path[1:-1]:
        means[x] = mbar
    directed = set(tree.directed_edges(global_root))
    for a, b in zip(path, path[1:]):
        key = (a, b) if (a, b) in directed else (b, a)
        etas[key] = one
    last = (path[-2], path[-1]) if path[-1] == far else (path[1], path[0])
    key = last if last in directed else (last[1], last[0])
    etas[key] = eta_reg


def _component_case1(tree, core, m, global_root, local_root, means, etas, exact, diagnostics):
    for a, b in itertools.combinations(core.leaves, 2):
        if m.value((a, b)) == 0:
            diagnostics.append(
                {
                    "kind": "zero-pair-inside-component",
                    "pair": (a, b),
                    "note": "component violates the vanishing-propagation law",
                }
            )
            return False
    # Root the core at the component's entry point, projected to a core node.
    if local_root in core.nodes:
        core_root = local_root
    else:
        chain = next(p for p in core.paths.values() if local_root in p)
        u, v = chain[0], chain[-1]
        iu, iv = chain.index(local_root), len(chain) - 1 - chain.index(local_root)
        core_root = u if (iu, u) <= (iv, v) else v
    try:
        node_squares, edge_squares, checks, node_witness = _case1_squares(core, m, core_root)
    except _Nonpositive as exc:
        diagnostics.append(
            {
                "kind": "nonpositive-hyperdeterminant",
                "node": exc.node,
                "triple": exc.triple,
                "value": _jsonable(exc.value),
            }
        )
        return False
    diagnostics.extend(checks)
    try:
        comp_omega = _signed_omega(
            core, tree, m, core_root, node_squares, edge_squares, node_witness, exact
        )
    except ValueError as exc:
        diagnostics.append({"kind": "sign-infeasible", "note": str(exc)})
        return False
    for h in core.inner_nodes():
        means[h] = comp_omega.node_means[h]
    one = Fraction(1) if exact else 1.0
    directed = set(tree.directed_edges(global_root))
    for (cu, cv), value in comp_omega.edge_coeffs.items():
        # Suppressed degree-two nodes along the chain copy the mean of the
        # core-parent endpoint; the recovered coefficient sits on the edge
        # entering the core-child endpoint (always directed toward it) and
        # the rest of the chain carries unit coefficients.  Path products
        # and the parameter-space constraints then match the contracted
        # core edge exactly.
        chain_nodes = core.path_of(cu, cv)
        near_mean = comp_omega.node_means[cu]
        for x in chain_nodes[1:-1]:
            means[x] = near_mean
        chain_edges = list(zip(chain_nodes, chain_nodes[1:]))
        for a, b in chain_edges[:-1]:
            key = (a, b) if (a, b) in directed else (b, a)
            etas[key] = one
        a, b = chain_edges[-1]
        etas[(a, b)] = value
    return True


def _canonical_flip(tree, omega, exact):
    """Hidden-relabel representative: root mean nonnegative.

    Relabeling the root's hidden state negates its mean and the
    coefficients on its incident edges and leaves the leaf law unchanged;
    a zero root mean falls back to making the first root edge nonnegative.
    """
    r = omega.root
    if tree.is_leaf(r):
        return omega
    root_mean = omega.node_means[r]
    s = root_mean.sign() if isinstance(root_mean, SqrtValue) else _sign(root_mean)
    flip = s < 0
    if s == 0:
        first = min((e for e in omega.edge_coeffs if r in e), default=None)
        if first is not None:
            ev = omega.edge_coeffs[first]
            es = ev.sign() if isinstance(ev, SqrtValue) else _sign(ev)
            flip = es < 0
    if not flip:
        return omega
    means = dict(omega.node_means)
    means[r] = -means[r]
    etas = dict(omega.edge_coeffs)
    for u, v in list(etas):
        if u == r or v == r:
            etas[(u, v)] = -etas[(u, v)]
    return OmegaParams(omega.root, means, etas)


# ---------------------------------------------------------------------- #
# Exact validation and verification
# ---------------------------------------------------------------------- #


def _terms_of(x):
    """(constant, radical terms) decomposition of a summand."""
    if isinstance(x, SqrtValue):
        if x.is_rational:
            return x.as_fraction(), []
        return Fraction(0), [(x.coeff, x.radicand)]
    return Fraction(x), []


def _radsum_sign(summands) -> int:
    const = Fraction(0)
    terms = []
    for x in summands:
        c, t = _terms_of(x)
        const += c
        terms.extend(t)
    return sign_of_radical_sum(const, terms)


def _validate_exact(tree, omega):
    """Parameter-space inequalities decided in exact radical arithmetic."""
    violations = []
    r = omega.root
    root_mean = omega.node_means[r]
    for label, summands in (
        ("root-mean <= 1", [Fraction(-1), root_mean]),
        ("root-mean >= -1", [Fraction(-1), _neg(root_mean)]),
    ):
        if _radsum_sign(summands) > 0:
            violations.append((None, label, float(root_mean), 1.0))
    for u, v in tree.directed_edges(r):
        eta = omega.edge_coeffs[(u, v)]
        mu, mv = omega.node_means[u], omega.node_means[v]
        me = mu * eta
        cases = (
            ("(1-mean_u)*eta <= 1-mean_v", [eta, _neg(me), Fraction(-1), mv]),
            ("(1-mean_u)*eta >= -(1+mean_v)", [_neg(eta), me, Fraction(-1), _neg(mv)]),
            ("(1+mean_u)*eta <= 1+mean_v", [eta, me, Fraction(-1), _neg(mv)]),
            ("(1+mean_u)*eta >= -(1-mean_v)", [_neg(eta), _neg(me), Fraction(-1), mv]),
        )
        for label, summands in cases:
            if _radsum_sign(summands) > 0:
                lhs, bound = _violation_values(label, mu, mv, eta)
                violations.append(((u, v), label, lhs, bound))
    return violations


def _neg(x):
    return -x


def _violation_values(label, mu, mv, eta):
    fmu, fmv, feta = float(mu), float(mv), float(eta)
    if label.startswith("(1-"):
        lhs = (1 - fmu) * feta
    else:
        lhs = (1 + fmu) * feta
    if "<= 1-" in label:
        bound = 1 - fmv
    elif "<= 1+" in label:
        bound = 1 + fmv
    elif ">= -(1+" in label:
        bound = -(1 + fmv)
    else:
        bound = -(1 - fmv)
    return lhs, bound


def _validate_float(tree, omega, tol):
    violations = []
    r = omega.root
    mr = float(omega.node_means[r])
    if abs(mr) > 1 + tol:
        violations.append((None, "root-mean in [-1,1]", mr, 1.0))
    for u, v in tree.directed_edges(r):
        eta = float(omega.edge_coeffs[(u, v)])
        mu, mv = float(omega.node_means[u]), float(omega.node_means[v])
        minus, plus = (1 - mu) * eta, (1 + mu) * eta
        checks = (
            ("(1-mean_u)*eta <= 1-mean_v", minus, 1 - mv, 1),
            ("(1-mean_u)*eta >= -(1+mean_v)", minus, -(1 + mv), -1),
            ("(1+mean_u)*eta <= 1+mean_v", plus, 1 + mv, 1),
            ("(1+mean_u)*eta >= -(1-mean_v)", plus, -(1 - mv), -1),
        )
        for label, lhs, bound, direction in checks:
            if direction > 0 and lhs > bound + tol:
                violations.append(((u, v), label, lhs, bound))
            if direction < 0 and lhs < bound - tol:
                violations.append(((u, v), label, lhs, bound))
    return violations


def _verify_psi(tree, omega, kappa, exact, tol) -> bool:
    values = psi_values(tree, omega)
    if exact:
        for mask, val in values.items():
            target = kappa[mask]
            if isinstance(val, SqrtValue):
                if not (val == target):
                    return False
            elif val != target:
                return False
        return True
    bound = max(tol, 1e-9)
    return all(abs(float(values[mask]) - float(kappa[mask])) <= bound for mask in values)


def _theta_from_omega(tree, omega, exact):
    if exact:
        rationalizable = all(
            not isinstance(x, SqrtValue) or x.is_rational
            for x in list(omega.node_means.values()) + list(omega.edge_coeffs.values())
        )
        if rationalizable:
            om = OmegaParams(
                omega.root,
                {v: x.as_fraction() if isinstance(x, SqrtValue) else x
                 for v, x in omega.node_means.items()},
                {e: x.as_fraction() if isinstance(x, SqrtValue) else x
                 for e, x in omega.edge_coeffs.items()},
            )
            return omega_to_theta(tree, om), True
        return omega_to_theta(tree, _float_omega(omega)), False
    return omega_to_theta(tree, omega), True


def _float_omega(omega):
    return OmegaParams(
        omega.root,
        {v: float(x) for v, x in omega.node_means.items()},
        {e: float(x) for e, x in omega.edge_coeffs.items()},
    )
