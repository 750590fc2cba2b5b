"""Correlations, tree metrics, four-point checks, and edge sign assignment.

Squared correlations of a nondegenerate model point factor along tree
paths, so minus the log of a squared correlation behaves like an additive
distance.  The four-point condition characterizes such distances; its
correlation-ratio form needs no logarithms and is used for exact
arithmetic, together with the triple sign condition that governs whether
pairwise correlation signs can be realized by signs on the edges.

Correlations are stored as ``(sign, rho^2)`` so exact mode never takes a
square root; the float view is derived on demand.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .models import OmegaParams
from .moments import EXACT, FLOAT, MomentSet
from .radicals import SqrtValue
from .trees import TreeTopology

__all__ = [
    "CorrelationData",
    "EdgeCorrelations",
    "TreeMetricMap",
    "SignAssignment",
    "correlations",
    "edge_correlations",
    "check_path_factorization",
    "tree_metric_map",
    "four_point_check",
    "second_order_necessary",
    "sign_assignment",
    "sigma_from_moments",
]


def _sign(x) -> int:
    return (x > 0) - (x < 0)


class CorrelationData:
    """Pairwise leaf correlations stored as signs and squares."""

    def __init__(self, n: int, signs: dict, squares: dict, mode: str):
        self.n = n
        self.mode = mode
        self._signs = signs  # keyed by sorted pair
        self._squares = squares

    @staticmethod
    def _key(i: int, j: int) -> tuple[int, int]:
        return (i, j) if i < j else (j, i)

    def sign(self, i: int, j: int) -> int:
        if i == j:
            return 1
        return self._signs[self._key(i, j)]

    def square(self, i: int, j: int):
        if i == j:
            return Fraction(1) if self.mode == EXACT else 1.0
        return self._squares[self._key(i, j)]

    def rho(self, i: int, j: int) -> float:
        return self.sign(i, j) * math.sqrt(float(self.square(i, j)))

    def matrix(self) -> list[list[float]]:
        return [
            [self.rho(i, j) for j in range(1, self.n + 1)] for i in range(1, self.n + 1)
        ]


def correlations(m: MomentSet) -> CorrelationData:
    """Leaf correlation data from central moments and means.

    Fails when some leaf has zero variance (a degenerate mean), since the
    correlation is undefined there.
    """
    if m.kind not in ("central", "cumulant"):
        raise ValueError("need central moments or cumulants")
    variances = {}
    for i in range(1, m.n + 1):
        mbar = m.signed_mean(i)
        var4 = 1 - mbar * mbar  # 4 * Var(X_i)
        if var4 == 0:
            raise ValueError(f"leaf {i} has zero variance; correlations undefined")
        variances[i] = var4
    signs, squares = {}, {}
    for i, j in itertools.combinations(range(1, m.n + 1), 2):
        mu = m.value((i, j))
        signs[(i, j)] = _sign(mu)
        squares[(i, j)] = 16 * mu * mu / (variances[i] * variances[j])
    return CorrelationData(m.n, signs, squares, m.mode)


class EdgeCorrelations:
    """Per-edge correlations of the latent process, as signs and squares."""

    def __init__(self, signs: dict, squares: dict, mode: str):
        self.mode = mode
        self._signs = signs  # keyed by frozenset edge
        self._squares = squares

    def sign(self, u: int, v: int) -> int:
        return self._signs[frozenset((u, v))]

    def square(self, u: int, v: int):
        return self._squares[frozenset((u, v))]

    def rho(self, u: int, v: int) -> float:
        return self.sign(u, v) * math.sqrt(float(self.square(u, v)))


def _value_sign(x) -> int:
    if isinstance(x, SqrtValue):
        return x.sign()
    return _sign(x)


def _value_square(x):
    if isinstance(x, SqrtValue):
        return x.square()
    return x * x


def edge_correlations(tree: TreeTopology, omega: OmegaParams) -> EdgeCorrelations:
    """Correlation across each edge from the latent parameters.

    For the directed edge (u, v):  rho_uv = eta_uv * sqrt((1-mean_u^2)/(1-mean_v^2));
    only the sign and the square are materialized, which keeps recovered
    irrational parameters exact.
    """
    signs, squares = {}, {}
    for (u, v), eta in omega.edge_coeffs.items():
        vu = 1 - _value_square(omega.node_means[u])
        vv = 1 - _value_square(omega.node_means[v])
        if vu == 0 or vv == 0:
            raise ValueError(f"degenerate variance at edge ({u},{v})")
        signs[frozenset((u, v))] = _value_sign(eta)
        squares[frozenset((u, v))] = _value_square(eta) * vu / vv
    mode = EXACT if isinstance(next(iter(squares.values()), Fraction(1)), Fraction) else FLOAT
    return EdgeCorrelations(signs, squares, mode)


def check_path_factorization(
    tree: TreeTopology,
    leaf_rho: CorrelationData,
    edge_rho: EdgeCorrelations,
    tol=0,
) -> list[dict]:
    """Residuals of rho_ij minus the product of edge correlations on the path.

    In exact mode the comparison is sign-and-square equality, which is
    exact even when individual edge correlations are irrational.
    """
    reports = []
    exact = leaf_rho.mode == EXACT and edge_rho.mode == EXACT
    for i, j in itertools.combinations(range(1, leaf_rho.n + 1), 2):
        path = tree.path_edges(i, j)
        sign_prod = 1
        for u, v in path:
            sign_prod *= edge_rho.sign(u, v)
        if exact:
            sq = Fraction(1)
            for u, v in path:
                sq *= edge_rho.square(u, v)
            match = sign_prod == leaf_rho.sign(i, j) and sq == leaf_rho.square(i, j)
            residual = 0 if match else leaf_rho.rho(i, j) - sign_prod * math.sqrt(float(sq))
            reports.append(
                {
                    "pair": (i, j),
                    "residual": residual,
                    "satisfied": match,
                }
            )
        else:
            prod = 1.0
            for u, v in path:
                prod *= edge_rho.rho(u, v)
            residual = leaf_rho.rho(i, j) - prod
            reports.append(
                {
                    "pair": (i, j),
                    "residual": residual,
                    "satisfied": abs(residual) <= tol,
                }
            )
    return reports


class TreeMetricMap:
    """Leaf-pair distances -log(rho^2), with an explicit infinity branch."""

    def __init__(self, n: int, values: dict):
        self.n = n
        self._values = values  # sorted pair -> float or math.inf

    def delta(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        return self._values[(i, j) if i < j else (j, i)]

    def items(self):
        return sorted(self._values.items())

    def matrix(self) -> list[list[float]]:
        return [
            [self.delta(i, j) for j in range(1, self.n + 1)]
            for i in range(1, self.n + 1)
        ]


def tree_metric_map(rho: CorrelationData) -> TreeMetricMap:
    """Distances -log(rho_ij^2); infinite when the correlation vanishes."""
    values = {}
    for i, j in itertools.combinations(range(1, rho.n + 1), 2):
        sq = rho.square(i, j)
        if sq == 0:
            values[(i, j)] = math.inf
        else:
            values[(i, j)] = -math.log(float(sq))
    return TreeMetricMap(rho.n, values)


def four_point_check(delta: TreeMetricMap, tol: float = 1e-9) -> list[dict]:
    """The four-point condition over all quadruples, repeats included.

    For each multiset {i,j,k,l} and each pairing taken as the left side:
    delta(i,j) + delta(k,l) <= max of the two other pairing sums.
    Repeated indices embed the triangle-type inequalities.
    """
    reports = []
    leaves = range(1, delta.n + 1)
    for quad in itertools.combinations_with_replacement(leaves, 4):
        pairings = _pairings(quad)
        sums = [delta.delta(a, b) + delta.delta(c, d) for (a, b), (c, d) in pairings]
        for idx, pairing in enumerate(pairings):
            lhs = sums[idx]
            rhs = max(s for t, s in enumerate(sums) if t != idx)
            if math.isinf(lhs) and math.isinf(rhs):
                satisfied, vacuous = True, True
            elif math.isinf(rhs):
                satisfied, vacuous = True, False
            elif math.isinf(lhs):
                satisfied, vacuous = False, False
            else:
                satisfied = lhs <= rhs + tol
                vacuous = len(set(quad)) < 2
            reports.append(
                {
                    "quadruple": quad,
                    "pairing": pairing,
                    "lhs": lhs,
                    "rhs": rhs,
                    "satisfied": satisfied,
                    "vacuous": vacuous,
                }
            )
    return reports


def _pairings(quad):
    i, j, k, l = quad
    return [
        (((i, j), (k, l))),
        (((i, k), (j, l))),
        (((i, l), (j, k))),
    ]


def second_order_necessary(m: MomentSet, tol=0) -> list[dict]:
    """The complete second-order constraint set, in ratio form.

    Per quadruple (repeats allowed, with the variance standing in for a
    repeated-index "covariance"): the smaller cross-ratio lies in [0, 1];
    per triple: the product of the three covariances is nonnegative.
    Instances with a vanishing denominator are reported vacuous.
    """
    if m.kind not in ("central", "cumulant"):
        raise ValueError("need central moments or cumulants")
    n = m.n

    def cov(x: int, y: int):
        if x == y:
            mbar = m.signed_mean(x)
            return (1 - mbar * mbar) / 4
        return m.value((x, y))

    reports = []
    for i, j, k in itertools.combinations(range(1, n + 1), 3):
        prod = cov(i, j) * cov(i, k) * cov(j, k)
        reports.append(
            {
                "kind": "triple-sign",
                "witness": (i, j, k),
                "value": prod,
                "satisfied": prod >= -tol,
                "vacuous": False,
            }
        )
    for quad in itertools.combinations_with_replacement(range(1, n + 1), 4):
        i, j, k, l = quad
        denom = cov(i, j) * cov(k, l)
        num1 = cov(i, k) * cov(j, l)
        num2 = cov(i, l) * cov(j, k)
        if denom == 0:
            reports.append(
                {
                    "kind": "cross-ratio",
                    "witness": quad,
                    "value": None,
                    "satisfied": True,
                    "vacuous": True,
                }
            )
            continue
        r1, r2 = num1 / denom, num2 / denom
        low = min(r1, r2)
        reports.append(
            {
                "kind": "cross-ratio",
                "witness": quad,
                "value": low,
                "satisfied": -tol <= low <= 1 + tol,
                "vacuous": False,
            }
        )
    return reports


@dataclass(frozen=True)
class SignAssignment:
    """Edge signs realizing pairwise leaf signs as path products."""

    feasible: bool
    s0: dict | None  # frozenset edge -> +/-1
    sigma: dict | None  # sorted leaf pair -> +/-1
    violating_triple: tuple | None = None

    def edge_sign(self, u: int, v: int) -> int:
        return self.s0[frozenset((u, v))]

    def node_pair_sign(self, tree: TreeTopology, u: int, v: int) -> int:
        if u == v:
            return 1
        out = 1
        for a, b in tree.path_edges(u, v):
            out *= self.s0[frozenset((a, b))]
        return out


def sigma_from_moments(m: MomentSet) -> dict:
    """Pairwise signs of the covariances; fails on a vanishing pair."""
    sigma = {}
    for i, j in itertools.combinations(range(1, m.n + 1), 2):
        s = _sign(m.value((i, j)))
        if s == 0:
            raise ValueError(f"covariance of pair ({i},{j}) vanishes; no sign")
        sigma[(i, j)] = s
    return sigma


def sign_assignment(tree: TreeTopology, sigma: dict) -> SignAssignment:
    """Construct edge signs whose path products realize ``sigma``.

    Feasible exactly when every leaf triple has positive sign product.
    The construction fixes a unit potential at every inner node and at the
    smallest leaf, and gives every other leaf the potential sigma pairs it
    with the smallest leaf; an edge's sign is the product of its endpoint
    potentials, so path products telescope to the leaf potentials.
    """
    leaves = list(tree.leaves)

    def sig(i: int, j: int) -> int:
        return sigma[(i, j) if i < j else (j, i)]

    for i, j, k in itertools.combinations(leaves, 3):
        if sig(i, j) * sig(i, k) * sig(j, k) != 1:
            return SignAssignment(
                feasible=False, s0=None, sigma=dict(sigma), violating_triple=(i, j, k)
            )
    base = leaves[0]
    potential = {v: 1 for v in tree.nodes}
    for leaf in leaves[1:]:
        potential[leaf] = sig(base, leaf)
    s0 = {}
    for u, v in tree.edges:
        s0[frozenset((u, v))] = potential[u] * potential[v]
    return SignAssignment(feasible=True, s0=s0, sigma=dict(sigma))
