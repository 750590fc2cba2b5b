"""Coordinate changes between probability tables, moments, and tree cumulants.

The pipeline is

    probabilities  <->  non-central moments  <->  (means, central moments)
                   <->  (means, tree cumulants)

All four coordinate systems are indexed by subsets of the leaf set,
represented as bitmasks with bit ``i-1`` standing for leaf ``i``; map
iteration is in increasing mask order.  Every map here is a polynomial
bijection with a polynomial inverse, so in exact (rational) mode the
round trips are identities, not approximations.

Two arithmetic modes are supported and carried on the data: ``"exact"``
(``fractions.Fraction`` entries) and ``"float"``.  Signed "formal" tables
(entries summing to one but possibly negative) flow through the whole
pipeline unchanged; they are flagged, never rejected, because mapping
out-of-model cumulants back to a table is a supported diagnostic.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from .posets import tree_partitions
from .trees import TreeTopology

__all__ = [
    "ProbTable",
    "MomentSet",
    "probs_to_noncentral",
    "noncentral_to_probs",
    "noncentral_to_central",
    "central_to_noncentral",
    "central_to_cumulants",
    "cumulants_to_central",
    "probs_to_cumulants",
    "cumulants_to_probs",
    "mask_of",
    "labels_of",
    "table_from_json",
    "table_to_json",
]

EXACT = "exact"
FLOAT = "float"


def mask_of(labels) -> int:
    """Bitmask of a leaf subset (bit i-1 for leaf i)."""
    m = 0
    for i in labels:
        m |= 1 << (int(i) - 1)
    return m


def labels_of(mask: int) -> tuple[int, ...]:
    """Sorted leaf labels of a bitmask."""
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def coerce_number(x, mode: str):
    """Parse a number for the given mode; decimal strings become exact."""
    if mode == EXACT:
        if isinstance(x, Fraction):
            return x
        if isinstance(x, int):
            return Fraction(x)
        if isinstance(x, str):
            return Fraction(x)
        if isinstance(x, float):
            # repr(x) is the shortest decimal that round-trips, so this
            # reads a printed decimal back as the exact decimal rational.
            return Fraction(repr(x))
        raise TypeError(f"cannot coerce {type(x).__name__} to exact rational")
    if mode == FLOAT:
        return float(x)
    raise ValueError(f"unknown arithmetic mode {mode!r}")


def _check_mode(mode: str) -> str:
    if mode not in (EXACT, FLOAT):
        raise ValueError(f"unknown arithmetic mode {mode!r}")
    return mode


class ProbTable:
    """A joint table over ``n`` binary leaf variables.

    Entries are indexed by bitmask (bit i-1 = value of leaf i) and must sum
    to one.  Entries may be negative; :meth:`negative_entries` reports them
    and :attr:`is_distribution` tells whether the table is a genuine
    probability distribution.
    """

    def __init__(self, n: int, values, mode: str = EXACT, _validate: bool = True):
        self.n = int(n)
        self.mode = _check_mode(mode)
        vals = list(values)
        if len(vals) != 1 << self.n:
            raise ValueError(f"need {1 << self.n} entries for n={self.n}, got {len(vals)}")
        self.values = tuple(coerce_number(v, mode) for v in vals)
        if _validate:
            total = sum(self.values)
            if mode == EXACT:
                if total != 1:
                    raise ValueError(f"table entries must sum to 1, got {total}")
            elif abs(total - 1.0) > 1e-9:
                raise ValueError(f"table entries must sum to 1, got {total}")

    def __getitem__(self, mask: int):
        return self.values[mask]

    def value(self, labels):
        """Entry where exactly the given leaves are 1."""
        return self.values[mask_of(labels)]

    def negative_entries(self) -> list[tuple[int, object]]:
        return [(m, v) for m, v in enumerate(self.values) if v < 0]

    @property
    def is_distribution(self) -> bool:
        return not self.negative_entries()

    def to_float(self) -> "ProbTable":
        if self.mode == FLOAT:
            return self
        return ProbTable(self.n, [float(v) for v in self.values], mode=FLOAT, _validate=False)

    def marginal(self, labels) -> "ProbTable":
        """Marginal table over a subset of leaves, relabeled to 1..k in order."""
        keep = sorted(set(int(x) for x in labels))
        k = len(keep)
        zero = Fraction(0) if self.mode == EXACT else 0.0
        out = [zero] * (1 << k)
        for m, v in enumerate(self.values):
            sub = 0
            for pos, leaf in enumerate(keep):
                if m >> (leaf - 1) & 1:
                    sub |= 1 << pos
            out[sub] += v
        return ProbTable(k, out, mode=self.mode, _validate=False)

    def __repr__(self) -> str:
        return f"ProbTable(n={self.n}, mode={self.mode!r})"


class MomentSet:
    """Subset-indexed moment coordinates of one of the three kinds.

    ``kind`` is ``"noncentral"`` (lambda), ``"central"`` (mu), or
    ``"cumulant"`` (kappa).  Central and cumulant sets carry the means
    alongside, since the map to raw moments needs them.
    """

    KINDS = ("noncentral", "central", "cumulant")

    def __init__(self, n: int, kind: str, values, means=None, mode: str = EXACT):
        self.n = int(n)
        if kind not in self.KINDS:
            raise ValueError(f"kind must be one of {self.KINDS}")
        self.kind = kind
        self.mode = _check_mode(mode)
        if isinstance(values, dict):
            vals = [values[m] for m in range(1 << self.n)]
        else:
            vals = list(values)
        if len(vals) != 1 << self.n:
            raise ValueError(f"need {1 << self.n} values for n={self.n}")
        self.values = tuple(coerce_number(v, mode) for v in vals)
        if kind == "noncentral":
            self.means = tuple(self.values[1 << i] for i in range(self.n))
        else:
            if means is None:
                raise ValueError(f"{kind} moments need the means")
            means = tuple(coerce_number(x, mode) for x in means)
            if len(means) != self.n:
                raise ValueError(f"need {self.n} means")
            self.means = means
        self._validate()

    def _validate(self) -> None:
        one = 1
        if self.mode == EXACT:
            if self.values[0] != one:
                raise ValueError("the empty-set coordinate must be 1")
            if self.kind in ("central", "cumulant"):
                bad = [i + 1 for i in range(self.n) if self.values[1 << i] != 0]
                if bad:
                    raise ValueError(f"singleton {self.kind} coordinates must vanish: {bad}")
        else:
            if abs(self.values[0] - 1.0) > 1e-9:
                raise ValueError("the empty-set coordinate must be 1")

    def __getitem__(self, mask: int):
        return self.values[mask]

    def value(self, labels):
        return self.values[mask_of(labels)]

    def mean(self, leaf: int):
        return self.means[leaf - 1]

    def signed_mean(self, leaf: int):
        """The +/-1-scaled mean 1 - 2*E[X_leaf]."""
        return 1 - 2 * self.means[leaf - 1]

    def to_float(self) -> "MomentSet":
        if self.mode == FLOAT:
            return self
        return MomentSet(
            self.n,
            self.kind,
            [float(v) for v in self.values],
            means=[float(x) for x in self.means],
            mode=FLOAT,
        )

    def items(self):
        return enumerate(self.values)

    def __repr__(self) -> str:
        return f"MomentSet(n={self.n}, kind={self.kind!r}, mode={self.mode!r})"


# ---------------------------------------------------------------------- #
# probabilities <-> non-central moments
# ---------------------------------------------------------------------- #


def probs_to_noncentral(p: ProbTable) -> MomentSet:
    """lambda_A = sum of p over entries dominating A (bitwise superset)."""
    f = list(p.values)
    size = 1 << p.n
    for i in range(p.n):
        bit = 1 << i
        for m in range(size):
            if not m & bit:
                f[m] = f[m] + f[m | bit]
    return MomentSet(p.n, "noncentral", f, mode=p.mode)


def noncentral_to_probs(l: MomentSet) -> ProbTable:
    """Inclusion-exclusion inverse of :func:`probs_to_noncentral`."""
    if l.kind != "noncentral":
        raise ValueError("expected non-central moments")
    f = list(l.values)
    size = 1 << l.n
    for i in range(l.n):
        bit = 1 << i
        for m in range(size):
            if not m & bit:
                f[m] = f[m] - f[m | bit]
    return ProbTable(l.n, f, mode=l.mode, _validate=False)


# ---------------------------------------------------------------------- #
# non-central <-> central moments
# ---------------------------------------------------------------------- #


def _mean_products(means, mode: str):
    """prod[mask] = product of means over the leaves in mask."""
    n = len(means)
    one = Fraction(1) if mode == EXACT else 1.0
    prod = [one] * (1 << n)
    for m in range(1, 1 << n):
        low = m & (-m)
        prod[m] = prod[m ^ low] * means[low.bit_length() - 1]
    return prod


def noncentral_to_central(l: MomentSet) -> MomentSet:
    """mu_A = sum over B subset A of (-1)^|B| lambda_{A\\B} prod_{i in B} lambda_i."""
    if l.kind != "noncentral":
        raise ValueError("expected non-central moments")
    prod = _mean_products(l.means, l.mode)
    vals = l.values
    out = []
    for a in range(1 << l.n):
        acc = vals[a]
        b = (a - 1) & a
        while True:
            term = vals[a ^ b] * prod[b]
            acc = acc + term if (bin(b).count("1") % 2 == 0) else acc - term
            if b == 0:
                break
            b = (b - 1) & a
        out.append(acc)
    # Exact zero for singletons comes out of the algebra; snap float noise.
    if l.mode == FLOAT:
        for i in range(l.n):
            out[1 << i] = 0.0
    return MomentSet(l.n, "central", out, means=l.means, mode=l.mode)


def central_to_noncentral(m: MomentSet) -> MomentSet:
    """lambda_A = sum over B subset A of mu_{A\\B} prod_{i in B} lambda_i."""
    if m.kind != "central":
        raise ValueError("expected central moments")
    prod = _mean_products(m.means, m.mode)
    vals = m.values
    out = []
    for a in range(1 << m.n):
        acc = vals[a]
        b = (a - 1) & a
        while True:
            acc = acc + vals[a ^ b] * prod[b]
            if b == 0:
                break
            b = (b - 1) & a
        out.append(acc)
    return MomentSet(m.n, "noncentral", out, mode=m.mode)


# ---------------------------------------------------------------------- #
# central moments <-> tree cumulants
# ---------------------------------------------------------------------- #


@lru_cache(maxsize=None)
def _partition_terms(tree: TreeTopology, mask: int):
    """Per-subset partition data for the cumulant coordinate change.

    Returns a tuple of ``(mobius_to_top, blocks)`` rows, one per partition
    of the spanning subtree's leaf set with no singleton block (singleton
    central moments and cumulants vanish, so only these contribute);
    blocks are bitmasks.
    """
    labels = labels_of(mask)
    poset = tree_partitions(tree.restrict(labels))
    rows = []
    for part in poset.elements:
        if part.has_singleton():
            continue
        coef = poset.mobius_to_top(part)
        rows.append((coef, tuple(mask_of(b) for b in part.blocks)))
    return tuple(rows)


def central_to_cumulants(tree: TreeTopology, m: MomentSet) -> MomentSet:
    """Möbius inversion of central moments over each subset's partition poset."""
    if m.kind != "central":
        raise ValueError("expected central moments")
    if set(tree.leaves) != set(range(1, m.n + 1)):
        raise ValueError("tree leaves must be 1..n matching the moment set")
    zero = Fraction(0) if m.mode == EXACT else 0.0
    out = list(m.values)
    for mask in range(1 << m.n):
        k = bin(mask).count("1")
        if k < 2:
            continue
        if k <= 3:
            continue  # cumulants equal central moments up to order three
        acc = zero
        for coef, blocks in _partition_terms(tree, mask):
            term = m.values[blocks[0]]
            for b in blocks[1:]:
                term = term * m.values[b]
            acc = acc + coef * term
        out[mask] = acc
    return MomentSet(m.n, "cumulant", out, means=m.means, mode=m.mode)


def cumulants_to_central(tree: TreeTopology, k: MomentSet) -> MomentSet:
    """Inverse change: mu_I as the partition-sum of cumulant products."""
    if k.kind != "cumulant":
        raise ValueError("expected tree cumulants")
    if set(tree.leaves) != set(range(1, k.n + 1)):
        raise ValueError("tree leaves must be 1..n matching the moment set")
    zero = Fraction(0) if k.mode == EXACT else 0.0
    out = list(k.values)
    for mask in range(1 << k.n):
        nbits = bin(mask).count("1")
        if nbits < 2 or nbits <= 3:
            continue
        acc = zero
        for _coef, blocks in _partition_terms(tree, mask):
            term = k.values[blocks[0]]
            for b in blocks[1:]:
                term = term * k.values[b]
            acc = acc + term
        out[mask] = acc
    return MomentSet(k.n, "central", out, means=k.means, mode=k.mode)


def probs_to_cumulants(tree: TreeTopology, p: ProbTable) -> MomentSet:
    return central_to_cumulants(tree, noncentral_to_central(probs_to_noncentral(p)))


def cumulants_to_probs(tree: TreeTopology, k: MomentSet) -> ProbTable:
    return noncentral_to_probs(central_to_noncentral(cumulants_to_central(tree, k)))


# ---------------------------------------------------------------------- #
# JSON table format
# ---------------------------------------------------------------------- #
#
# {"n": 4, "order": "binary-ascending", "p": [p_0000, p_0001, ..., p_1111]}
#
# The index string alpha assigns alpha_i to leaf i reading left to right,
# and rows are listed in increasing binary value of that string, so the
# all-zeros pattern comes first and leaf n varies fastest.


def _json_index_to_mask(idx: int, n: int) -> int:
    mask = 0
    for i in range(1, n + 1):
        if idx >> (n - i) & 1:
            mask |= 1 << (i - 1)
    return mask


def table_from_json(doc: dict, mode: str = EXACT) -> ProbTable:
    n = int(doc["n"])
    order = doc.get("order", "binary-ascending")
    if order != "binary-ascending":
        raise ValueError(f"unsupported table order {order!r}")
    raw = doc["p"]
    if len(raw) != 1 << n:
        raise ValueError(f"need {1 << n} entries, got {len(raw)}")
    vals = [None] * (1 << n)
    for idx, x in enumerate(raw):
        vals[_json_index_to_mask(idx, n)] = coerce_number(x, mode)
    return ProbTable(n, vals, mode=mode)


def table_to_json(p: ProbTable) -> dict:
    raw = []
    for idx in range(1 << p.n):
        v = p.values[_json_index_to_mask(idx, p.n)]
        raw.append(str(v) if isinstance(v, Fraction) else v)
    return {"n": p.n, "order": "binary-ascending", "p": raw}
