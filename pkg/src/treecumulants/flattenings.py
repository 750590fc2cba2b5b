"""Edge flattenings of joint tables and cumulants, and exact rank tests.

Flattening a joint table along an edge split reshapes it into a matrix
whose rank is at most two exactly on the model; equivalently the matrix
of cumulants indexed by nonempty subsets on either side of the split has
rank at most one.  Rank is decided by minor enumeration in exact mode and
by singular-value thresholding in float mode.

Rows and columns follow the block-subset order of
:func:`treecumulants.membership.block_subsets`: within a block the t-th
smallest member corresponds to bit t-1, patterns and subsets are listed
by increasing code, and the all-zeros pattern (or, for cumulant
flattenings, the smallest singleton) comes first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .membership import block_subsets
from .moments import EXACT, FLOAT, MomentSet, ProbTable, mask_of
from .trees import Split, TreeTopology

__all__ = [
    "Flattening",
    "CumulantFlattening",
    "flatten",
    "unflatten",
    "minor_residuals_3x3",
    "cumulant_flattening",
    "rank_leq",
    "matrix_rank_exact",
]


def _block_patterns(block) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """(ones, zeros) label pairs for every 0/1 pattern over a block."""
    members = sorted(block)
    out = []
    for code in range(1 << len(members)):
        ones = tuple(members[t] for t in range(len(members)) if code >> t & 1)
        zeros = tuple(m for m in members if m not in ones)
        out.append((ones, zeros))
    return out


@dataclass(frozen=True)
class Flattening:
    """A joint table reshaped along a split: rows index block-A patterns."""

    split: Split
    row_patterns: tuple
    col_patterns: tuple
    matrix: tuple  # tuple of row tuples
    mode: str

    def shape(self) -> tuple[int, int]:
        return (len(self.row_patterns), len(self.col_patterns))

    def as_numpy(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.matrix], dtype=float)


@dataclass(frozen=True)
class CumulantFlattening:
    """Cumulants indexed by nonempty subsets on each side of a split."""

    split: Split
    row_subsets: tuple
    col_subsets: tuple
    matrix: tuple
    mode: str

    def shape(self) -> tuple[int, int]:
        return (len(self.row_subsets), len(self.col_subsets))

    def as_numpy(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.matrix], dtype=float)


def flatten(p: ProbTable, split: Split) -> Flattening:
    """Reshape the joint table along a split of the leaf set."""
    all_leaves = sorted(split.block_a | split.block_b)
    if len(all_leaves) != p.n or set(all_leaves) != set(range(1, p.n + 1)):
        raise ValueError("split must cover the table's leaves 1..n")
    rows = _block_patterns(split.block_a)
    cols = _block_patterns(split.block_b)
    matrix = []
    for ones_a, _zeros_a in rows:
        row = []
        for ones_b, _zeros_b in cols:
            row.append(p.values[mask_of(ones_a + ones_b)])
        matrix.append(tuple(row))
    return Flattening(
        split=split,
        row_patterns=tuple(r[0] for r in rows),
        col_patterns=tuple(c[0] for c in cols),
        matrix=tuple(matrix),
        mode=p.mode,
    )


def unflatten(f: Flattening, n: int) -> ProbTable:
    """Rebuild the joint table from a flattening (exact inverse)."""
    zero = Fraction(0) if f.mode == EXACT else 0.0
    vals = [zero] * (1 << n)
    for ri, ones_a in enumerate(f.row_patterns):
        for ci, ones_b in enumerate(f.col_patterns):
            vals[mask_of(ones_a + ones_b)] = f.matrix[ri][ci]
    return ProbTable(n, vals, mode=f.mode, _validate=False)


def cumulant_flattening(tree: TreeTopology, kappa: MomentSet, edge) -> CumulantFlattening:
    """The cumulant matrix of an edge: entry (I, J) is kappa over I union J."""
    if kappa.kind != "cumulant":
        raise ValueError("need tree cumulants")
    split = tree.split_of_edge(tuple(edge))
    rows = block_subsets(split.block_a)
    cols = block_subsets(split.block_b)
    matrix = tuple(
        tuple(kappa.value(r + c) for c in cols) for r in rows
    )
    return CumulantFlattening(
        split=split,
        row_subsets=tuple(rows),
        col_subsets=tuple(cols),
        matrix=matrix,
        mode=kappa.mode,
    )


def minor_residuals_3x3(f: Flattening, tol=0):
    """All 3x3 minors of a flattening.

    Returns ``(max_abs, minors)`` where each minor is
    ``((rows, cols), value)``.  Matrices with fewer than three rows or
    columns are vacuous and return ``(0, [])``.
    """
    nrows, ncols = f.shape()
    if nrows < 3 or ncols < 3:
        zero = Fraction(0) if f.mode == EXACT else 0.0
        return zero, []
    m = f.matrix
    minors = []
    best = None
    for rs in itertools.combinations(range(nrows), 3):
        for cs in itertools.combinations(range(ncols), 3):
            a, b, c = (
                [m[r][cs[0]] for r in rs],
                [m[r][cs[1]] for r in rs],
                [m[r][cs[2]] for r in rs],
            )
            det = (
                a[0] * (b[1] * c[2] - b[2] * c[1])
                - b[0] * (a[1] * c[2] - a[2] * c[1])
                + c[0] * (a[1] * b[2] - a[2] * b[1])
            )
            minors.append(((rs, cs), det))
            if best is None or abs(det) > best:
                best = abs(det)
    return best, minors


def matrix_rank_exact(matrix) -> int:
    """Rank of a rational matrix by exact Gaussian elimination."""
    m = [list(row) for row in matrix]
    nrows = len(m)
    ncols = len(m[0]) if nrows else 0
    rank = 0
    row = 0
    for col in range(ncols):
        pivot = next((r for r in range(row, nrows) if m[r][col] != 0), None)
        if pivot is None:
            continue
        m[row], m[pivot] = m[pivot], m[row]
        pv = m[row][col]
        for r in range(row + 1, nrows):
            factor = m[r][col]
            if factor != 0:
                m[r] = [x - factor * y / pv for x, y in zip(m[r], m[row])]
        rank += 1
        row += 1
        if row == nrows:
            break
    return rank


def rank_leq(matrix, r: int, mode: str = EXACT, tol: float = 1e-9):
    """Decide rank(matrix) <= r; on failure return a witness minor.

    Exact mode enumerates (r+1)x(r+1) minors and returns the first
    nonvanishing one as ``(rows, cols, value)``; float mode thresholds
    singular values at ``tol`` times the largest.
    """
    rows = [list(row) for row in matrix]
    nrows = len(rows)
    ncols = len(rows[0]) if nrows else 0
    if r < 0:
        raise ValueError("rank bound must be nonnegative")
    if min(nrows, ncols) <= r:
        return True, None
    if mode == FLOAT:
        arr = np.array([[float(x) for x in row] for row in rows], dtype=float)
        svals = np.linalg.svd(arr, compute_uv=False)
        if svals[0] == 0:
            return True, None
        ok = bool(np.all(svals[r:] <= tol * svals[0]))
        return ok, None if ok else ("sigma", r, float(svals[r]))
    k = r + 1
    for rsel in itertools.combinations(range(nrows), k):
        for csel in itertools.combinations(range(ncols), k):
            sub = [[rows[i][j] for j in csel] for i in rsel]
            det = _det_exact(sub)
            if det != 0:
                return False, (rsel, csel, det)
    return True, None


def _det_exact(m):
    size = len(m)
    if size == 1:
        return m[0][0]
    if size == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    if size == 3:
        return (
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        )
    total = 0
    for j in range(size):
        sub = [row[:j] + row[j + 1 :] for row in m[1:]]
        term = m[0][j] * _det_exact(sub)
        total = total + term if j % 2 == 0 else total - term
    return total
