"""Hyperdeterminants and the full semialgebraic membership certificate.

Membership of a leaf distribution in a binary hidden tree model on a
trivalent tree is decided by five constraint families on the tree
cumulants:

C1  rank-one equations across every edge split (all 2x2 minors of the
    cumulant flattening of each edge);
C2  per-triple sign and sandwich bounds tying the triple hyperdeterminant
    to the pairwise covariances;
C3  per-triple bounds tying the hyperdeterminant to means and third
    moments (both coupled sign choices);
C4  vanishing covariances propagate: a zero pair kills every cumulant
    containing the pair;
C5  per-quadruple two-radical bounds across every inner edge split.

A PASS certificate means a valid latent parametrization exists and the
recovery module will construct one; a FAIL certificate carries the
violated family and witness.  In exact mode every decision, including the
nested radicals of C5, is made in rational arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm, sqrt

from .moments import (
    EXACT,
    FLOAT,
    MomentSet,
    ProbTable,
    central_to_cumulants,
    cumulants_to_central,
    cumulants_to_probs,
    mask_of,
    probs_to_cumulants,
)
from .radicals import exact_sqrt, sign_of_radical_sum
from .trees import TreeError, TreeTopology, trivalent_refinement

__all__ = [
    "hyperdet",
    "hyperdet_from_moments",
    "triple_hyperdet",
    "Report",
    "Certificate",
    "check_C1",
    "check_C2",
    "check_C3",
    "check_C4",
    "check_C5",
    "certify",
    "block_subsets",
]

FAMILIES = ("C1", "C2", "C3", "C4", "C5")


def hyperdet(table) -> object:
    """Hyperdeterminant of a 2x2x2 table.

    Accepts a nested ``[[[a000, a001], [a010, a011]], ...]`` structure or a
    flat length-8 sequence in binary order a000..a111.
    """
    if len(table) == 2:
        a = [table[i][j][k] for i in (0, 1) for j in (0, 1) for k in (0, 1)]
    else:
        a = list(table)
    if len(a) != 8:
        raise ValueError("a 2x2x2 table has eight entries")
    a000, a001, a010, a011, a100, a101, a110, a111 = a
    squares = (
        a000 * a000 * a111 * a111
        + a001 * a001 * a110 * a110
        + a010 * a010 * a101 * a101
        + a011 * a011 * a100 * a100
    )
    pairs = (
        a000 * a001 * a110 * a111
        + a000 * a010 * a101 * a111
        + a000 * a011 * a100 * a111
        + a001 * a010 * a101 * a110
        + a001 * a011 * a110 * a100
        + a010 * a011 * a101 * a100
    )
    quads = a000 * a011 * a101 * a110 + a001 * a010 * a100 * a111
    return squares - 2 * pairs + 4 * quads


def hyperdet_from_moments(mu12, mu13, mu23, mu123):
    """Hyperdeterminant of a normalized table from its central moments."""
    return mu123 * mu123 + 4 * mu12 * mu13 * mu23


def triple_hyperdet(m: MomentSet, i: int, j: int, k: int):
    """Hyperdeterminant of the (i, j, k) marginal via its central moments."""
    if m.kind not in ("central", "cumulant"):
        raise ValueError("need central moments or cumulants")
    return hyperdet_from_moments(
        m.value((i, j)), m.value((i, k)), m.value((j, k)), m.value((i, j, k))
    )


@dataclass(frozen=True)
class Report:
    """One evaluated constraint instance.

    ``relation`` is ``"eq"``, ``"le"`` (lhs <= rhs), or ``"ge"``;
    ``residual`` is ``lhs - rhs`` (or its float when the exact value has
    radicals); ``vacuous`` marks degenerate instances that hold trivially.
    """

    family: str
    witness: tuple
    lhs: object
    rhs: object
    relation: str
    residual: object
    satisfied: bool
    vacuous: bool = False

    def to_json(self) -> dict:
        def num(x):
            if isinstance(x, Fraction):
                return float(x)
            return x

        return {
            "family": self.family,
            "witness": _jsonify(self.witness),
            "lhs": num(self.lhs),
            "rhs": num(self.rhs),
            "relation": self.relation,
            "residual": num(self.residual),
            "satisfied": self.satisfied,
            "vacuous": self.vacuous,
        }


def _jsonify(x):
    if isinstance(x, tuple):
        return [_jsonify(v) for v in x]
    if isinstance(x, frozenset):
        return sorted(x)
    return x


@dataclass
class Certificate:
    """Aggregate membership verdict with per-constraint reports."""

    verdict: str
    mode: str
    tolerance: object
    reports: list[Report]
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def failures(self) -> list[Report]:
        return [r for r in self.reports if not r.satisfied]

    def family_reports(self, family: str) -> list[Report]:
        return [r for r in self.reports if r.family == family]

    def failing_families(self) -> list[str]:
        return sorted({r.family for r in self.reports if not r.satisfied})

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "mode": self.mode,
            "tolerance": float(self.tolerance),
            "notes": self.notes,
            "reports": [r.to_json() for r in self.reports],
        }


# ---------------------------------------------------------------------- #
# Block subset ordering
# ---------------------------------------------------------------------- #


def block_subsets(block) -> list[tuple[int, ...]]:
    """Nonempty subsets of a leaf block in flattening order.

    The t-th smallest member of the block corresponds to bit t-1, and
    subsets are listed by increasing code, so the all-ones subset (the
    whole block) comes last.
    """
    members = sorted(block)
    out = []
    for code in range(1, 1 << len(members)):
        out.append(tuple(members[t] for t in range(len(members)) if code >> t & 1))
    return out


# ---------------------------------------------------------------------- #
# C1: rank-one equations across edge splits
# ---------------------------------------------------------------------- #


def check_C1(tree: TreeTopology, kappa: MomentSet, tol=0) -> list[Report]:
    """All 2x2 minors of every edge's cumulant flattening.

    Each minor is one instance of the split equation
    kappa_{I1 J1} kappa_{I2 J2} = kappa_{I1 J2} kappa_{I2 J1}; visiting
    minors visits each nontrivial instance exactly once.  Pendant edges
    have a single row and are vacuous.
    """
    if kappa.kind != "cumulant":
        raise ValueError("C1 needs tree cumulants")
    reports: list[Report] = []
    for split in tree.edge_splits():
        if not split.is_inner():
            continue
        rows = block_subsets(split.block_a)
        cols = block_subsets(split.block_b)
        if kappa.mode == EXACT:
            reports.extend(_c1_exact(split, rows, cols, kappa, tol))
        else:
            reports.extend(_c1_float(split, rows, cols, kappa, tol))
    return reports


def _c1_exact(split, rows, cols, kappa, tol):
    entries = [[kappa.value(r + c) for c in cols] for r in rows]
    dens = [v.denominator for row in entries for v in row]
    d = lcm(*dens)
    scaled = [[v.numerator * (d // v.denominator) for v in row] for row in entries]
    d2 = d * d
    bound = Fraction(tol) * d2 if tol else 0
    out = []
    for (r1, r2) in itertools.combinations(range(len(rows)), 2):
        row1, row2 = scaled[r1], scaled[r2]
        for (c1, c2) in itertools.combinations(range(len(cols)), 2):
            minor = row1[c1] * row2[c2] - row1[c2] * row2[c1]
            ok = minor == 0 if not tol else abs(minor) <= bound
            residual = Fraction(0) if minor == 0 else Fraction(minor, d2)
            out.append(
                Report(
                    family="C1",
                    witness=(split.edge, rows[r1], rows[r2], cols[c1], cols[c2]),
                    lhs=residual,
                    rhs=Fraction(0),
                    relation="eq",
                    residual=residual,
                    satisfied=ok,
                )
            )
    return out


def _c1_float(split, rows, cols, kappa, tol):
    entries = [[float(kappa.value(r + c)) for c in cols] for r in rows]
    out = []
    for (r1, r2) in itertools.combinations(range(len(rows)), 2):
        for (c1, c2) in itertools.combinations(range(len(cols)), 2):
            minor = entries[r1][c1] * entries[r2][c2] - entries[r1][c2] * entries[r2][c1]
            out.append(
                Report(
                    family="C1",
                    witness=(split.edge, rows[r1], rows[r2], cols[c1], cols[c2]),
                    lhs=minor,
                    rhs=0.0,
                    relation="eq",
                    residual=minor,
                    satisfied=abs(minor) <= tol,
                )
            )
    return out


# ---------------------------------------------------------------------- #
# C2 and C3: per-triple hyperdeterminant bounds
# ---------------------------------------------------------------------- #


def _all_triples(n: int):
    return itertools.combinations(range(1, n + 1), 3)


def check_C2(m: MomentSet, tol=0, triples=None) -> list[Report]:
    """Per triple: covariance sign plus the hyperdeterminant sandwich."""
    reports = []
    for (i, j, k) in triples if triples is not None else _all_triples(m.n):
        mij, mik, mjk = m.value((i, j)), m.value((i, k)), m.value((j, k))
        det = triple_hyperdet(m, i, j, k)
        prod = mij * mik * mjk
        reports.append(
            Report(
                family="C2",
                witness=(i, j, k, "sign"),
                lhs=prod,
                rhs=0 * prod,
                relation="ge",
                residual=prod,
                satisfied=prod >= -tol,
            )
        )
        sum_sq = mij * mij * mik * mik + mij * mij * mjk * mjk + mik * mik * mjk * mjk
        reports.append(
            Report(
                family="C2",
                witness=(i, j, k, "lower"),
                lhs=sum_sq,
                rhs=det,
                relation="le",
                residual=sum_sq - det,
                satisfied=sum_sq <= det + tol,
            )
        )
        min_sq = min(mij * mij, mik * mik, mjk * mjk)
        reports.append(
            Report(
                family="C2",
                witness=(i, j, k, "upper"),
                lhs=det,
                rhs=min_sq,
                relation="le",
                residual=det - min_sq,
                satisfied=det <= min_sq + tol,
            )
        )
    return reports


def check_C3(m: MomentSet, tol=0, triples=None) -> list[Report]:
    """Per triple, each leaf in the mean role, both coupled sign choices."""
    reports = []
    for (i, j, k) in triples if triples is not None else _all_triples(m.n):
        det = triple_hyperdet(m, i, j, k)
        m_ijk = m.value((i, j, k))
        for role in (i, j, k):
            other = tuple(x for x in (i, j, k) if x != role)
            pair_mu = m.value(other)
            mbar = m.signed_mean(role)
            for sgn, tag in ((1, "+"), (-1, "-")):
                inner = (1 + sgn * mbar) * pair_mu - sgn * m_ijk
                rhs = inner * inner
                reports.append(
                    Report(
                        family="C3",
                        witness=(i, j, k, role, tag),
                        lhs=det,
                        rhs=rhs,
                        relation="le",
                        residual=det - rhs,
                        satisfied=det <= rhs + tol,
                    )
                )
    return reports


# ---------------------------------------------------------------------- #
# C4: zero covariances propagate to cumulants
# ---------------------------------------------------------------------- #


def check_C4(tree: TreeTopology, kappa: MomentSet, tol=0) -> list[Report]:
    """For every pair with vanishing covariance, every cumulant over a
    superset of the pair must vanish too."""
    if kappa.kind != "cumulant":
        raise ValueError("C4 needs tree cumulants")
    n = kappa.n
    reports = []
    for i, j in itertools.combinations(range(1, n + 1), 2):
        mu_ij = kappa.value((i, j))
        triggered = mu_ij == 0 if tol == 0 else abs(mu_ij) <= tol
        if not triggered:
            continue
        pair_mask = mask_of((i, j))
        for mask in range(1 << n):
            if mask & pair_mask != pair_mask or mask == pair_mask:
                continue
            val = kappa[mask]
            ok = val == 0 if tol == 0 else abs(val) <= tol
            reports.append(
                Report(
                    family="C4",
                    witness=(i, j, tuple(sorted(set_labels(mask)))),
                    lhs=val,
                    rhs=0 * val,
                    relation="eq",
                    residual=val,
                    satisfied=ok,
                )
            )
    return reports


def set_labels(mask: int) -> list[int]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


# ---------------------------------------------------------------------- #
# C5: quadruple bounds across inner edge splits
# ---------------------------------------------------------------------- #


def check_C5(
    tree: TreeTopology, m: MomentSet, tol=0, form: str = "theorem"
) -> list[Report]:
    """Two-radical quadruple inequalities, both coupled sign choices.

    ``form="theorem"`` keeps the pair covariance inside the first radical,
    which is the self-consistent version; ``form="proof"`` evaluates the
    (weaker) display without that factor, kept for cross-checking.
    Indices i, j are distinct on one side of the split and k, l on the
    other; coincident indices reduce to C2/C3 instances and are skipped.
    """
    if form not in ("theorem", "proof"):
        raise ValueError("form must be 'theorem' or 'proof'")
    exact = m.mode == EXACT
    reports = []
    for split in tree.edge_splits():
        if not split.is_inner():
            continue
        a_side = sorted(split.block_a)
        b_side = sorted(split.block_b)
        for i, j in itertools.permutations(a_side, 2):
            for k, l in itertools.permutations(b_side, 2):
                det1 = triple_hyperdet(m, *sorted((i, j, k)))
                det2 = triple_hyperdet(m, *sorted((i, k, l)))
                mu_ik = m.value((i, k))
                mu_jl = m.value((j, l))
                mu_ijk = m.value((i, j, k))
                mu_ikl = m.value((i, k, l))
                lhs = 4 * mu_ik * mu_ik * mu_jl * mu_jl
                for sgn, tag in ((1, "+"), (-1, "-")):
                    witness = (split.edge, i, j, k, l, tag)
                    if exact:
                        rep = _c5_exact(
                            witness, lhs, mu_jl, mu_ijk, mu_ikl, det1, det2, sgn, tol, form
                        )
                    else:
                        rep = _c5_float(
                            witness, lhs, mu_jl, mu_ijk, mu_ikl, det1, det2, sgn, tol, form
                        )
                    reports.append(rep)
    return reports


def _c5_exact(witness, lhs, mu_jl, mu_ijk, mu_ikl, det1, det2, sgn, tol, form):
    if det1 < 0 or det2 < 0:
        # Negative hyperdeterminant already violates C2; the radical here
        # is not real, so the instance cannot be satisfied.
        return Report(
            family="C5",
            witness=witness,
            lhs=lhs,
            rhs=float("nan"),
            relation="le",
            residual=float("inf"),
            satisfied=False,
        )
    coef1 = abs(mu_jl) if form == "theorem" else Fraction(1)
    # expression = (coef1*sqrt(det1) + sgn*mu_jl*mu_ijk) * (sqrt(det2) - sgn*mu_ikl) - lhs
    constant = -mu_jl * mu_ijk * mu_ikl - lhs
    terms = [
        (coef1, det1 * det2),
        (-sgn * coef1 * mu_ikl, det1),
        (sgn * mu_jl * mu_ijk, det2),
    ]
    margin = constant + Fraction(tol) if tol else constant
    sign = sign_of_radical_sum(margin, terms)
    satisfied = sign >= 0
    # Exact residual when both radicals are rational, float otherwise.
    r1, r2 = exact_sqrt(det1), exact_sqrt(det2)
    if r1 is not None and r2 is not None:
        rhs = (coef1 * r1 + sgn * mu_jl * mu_ijk) * (r2 - sgn * mu_ikl)
        residual = lhs - rhs
    else:
        rhs = (float(coef1) * sqrt(float(det1)) + sgn * float(mu_jl * mu_ijk)) * (
            sqrt(float(det2)) - sgn * float(mu_ikl)
        )
        residual = float(lhs) - rhs
    return Report(
        family="C5",
        witness=witness,
        lhs=lhs,
        rhs=rhs,
        relation="le",
        residual=residual,
        satisfied=satisfied,
    )


def _c5_float(witness, lhs, mu_jl, mu_ijk, mu_ikl, det1, det2, sgn, tol, form):
    if det1 < -tol or det2 < -tol:
        return Report(
            family="C5",
            witness=witness,
            lhs=lhs,
            rhs=float("nan"),
            relation="le",
            residual=float("inf"),
            satisfied=False,
        )
    coef1 = abs(mu_jl) if form == "theorem" else 1.0
    rhs = (coef1 * sqrt(max(det1, 0.0)) + sgn * mu_jl * mu_ijk) * (
        sqrt(max(det2, 0.0)) - sgn * mu_ikl
    )
    return Report(
        family="C5",
        witness=witness,
        lhs=lhs,
        rhs=rhs,
        relation="le",
        residual=lhs - rhs,
        satisfied=lhs <= rhs + tol,
    )


# ---------------------------------------------------------------------- #
# The aggregate certificate
# ---------------------------------------------------------------------- #


def certify(
    tree: TreeTopology,
    data,
    tol=None,
    refine: bool = False,
    c5_form: str = "theorem",
) -> Certificate:
    """Run the five constraint families and aggregate the verdict.

    ``data`` is a probability table or a cumulant (or central) moment set
    matching the tree's leaves.  Non-trivalent trees are refused unless
    ``refine=True``, in which case the verdict applies to a canonical
    trivalent refinement, whose model contains the original one.
    """
    notes: list[str] = []
    work_tree = tree
    if not tree.is_trivalent():
        if not refine:
            raise TreeError(
                "certification requires a trivalent tree; pass refine=True "
                "to certify against a trivalent refinement"
            )
        work_tree, introduced = trivalent_refinement(tree)
        notes.append(
            "tree is not trivalent; verdict applies to the trivalent "
            f"refinement obtained by splitting nodes {sorted(set(introduced.values()))}; "
            "that model contains the original one"
        )
        if isinstance(data, MomentSet):
            data = cumulants_to_probs(
                tree,
                data if data.kind == "cumulant" else central_to_cumulants(tree, data),
            )

    if isinstance(data, ProbTable):
        kappa = probs_to_cumulants(work_tree, data)
    elif isinstance(data, MomentSet):
        if data.kind == "cumulant":
            kappa = data
        elif data.kind == "central":
            kappa = central_to_cumulants(work_tree, data)
        else:
            raise ValueError("certify needs a table, cumulants, or central moments")
    else:
        raise TypeError(f"cannot certify a {type(data).__name__}")
    mode = kappa.mode
    if tol is None:
        tol = Fraction(0) if mode == EXACT else 1e-9
    central = cumulants_to_central(work_tree, kappa)

    reports: list[Report] = []
    reports.extend(check_C1(work_tree, kappa, tol))
    reports.extend(check_C2(central, tol))
    reports.extend(check_C3(central, tol))
    reports.extend(check_C4(work_tree, kappa, tol))
    reports.extend(check_C5(work_tree, central, tol, form=c5_form))
    reports.sort(key=lambda r: (r.family, repr(r.witness)))
    verdict = "PASS" if all(r.satisfied for r in reports) else "FAIL"
    return Certificate(
        verdict=verdict, mode=mode, tolerance=tol, reports=reports, notes=notes
    )
