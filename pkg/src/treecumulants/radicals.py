"""Exact arithmetic with quadratic radicals over the rationals.

The membership inequalities and the recovered latent parameters involve
square roots of rational quantities.  Everything needed here stays inside
products and two-term radical sums, so exact decisions reduce to sign
tests of ``p + q*sqrt(a)`` and ``p + q*sqrt(a) + r*sqrt(b) + s*sqrt(a*b)``
carried out by repeated squaring; no factoring or symbolic algebra is
required.
"""

from __future__ import annotations

from fractions import Fraction
from math import isqrt

__all__ = ["SqrtValue", "exact_sqrt", "sign_1rad", "sign_2rad", "sign_of_radical_sum"]


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def exact_sqrt(q: Fraction) -> Fraction | None:
    """The exact rational square root of ``q`` if it has one, else None."""
    if q < 0:
        return None
    num, den = q.numerator, q.denominator
    rn, rd = isqrt(num), isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


class SqrtValue:
    """An exact value ``coeff * sqrt(radicand)`` with rational parts.

    Closed under multiplication and integer powers; two values multiply by
    multiplying coefficients and radicands, with same-radicand products and
    perfect-square radicands collapsing to plain rationals.  Instances are
    immutable.
    """

    __slots__ = ("coeff", "radicand")

    def __init__(self, coeff, radicand=Fraction(1)):
        c = Fraction(coeff)
        r = Fraction(radicand)
        if r < 0:
            raise ValueError("radicand must be nonnegative")
        if c == 0 or r == 0:
            c, r = Fraction(0), Fraction(1)
        else:
            root = exact_sqrt(r)
            if root is not None:
                c, r = c * root, Fraction(1)
        object.__setattr__(self, "coeff", c)
        object.__setattr__(self, "radicand", r)

    def __setattr__(self, *a):  # pragma: no cover - immutability guard
        raise AttributeError("SqrtValue is immutable")

    @classmethod
    def from_square(cls, square, sign: int = 1) -> "SqrtValue":
        """The value sign * sqrt(square)."""
        sq = Fraction(square)
        if sq < 0:
            raise ValueError("cannot take a real square root of a negative number")
        return cls(Fraction(sign), sq)

    @property
    def is_rational(self) -> bool:
        return self.radicand == 1

    def as_fraction(self) -> Fraction:
        if not self.is_rational:
            raise ValueError(f"{self!r} is irrational")
        return self.coeff

    def square(self) -> Fraction:
        return self.coeff * self.coeff * self.radicand

    def sign(self) -> int:
        return _sign(self.coeff)

    def __mul__(self, other):
        if isinstance(other, SqrtValue):
            if self.radicand == other.radicand:
                return SqrtValue(self.coeff * other.coeff * self.radicand)
            return SqrtValue(self.coeff * other.coeff, self.radicand * other.radicand)
        if isinstance(other, (int, Fraction)):
            return SqrtValue(self.coeff * other, self.radicand)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return SqrtValue(-self.coeff, self.radicand)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        out = SqrtValue(Fraction(1))
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, SqrtValue):
            return self.sign() == other.sign() and self.square() == other.square()
        if isinstance(other, (int, Fraction)):
            return self.sign() == _sign(other) and self.square() == Fraction(other) ** 2
        return NotImplemented

    def __hash__(self):
        return hash((self.sign(), self.square()))

    def __float__(self) -> float:
        return float(self.coeff) * float(self.radicand) ** 0.5

    def __repr__(self) -> str:
        if self.is_rational:
            return f"SqrtValue({self.coeff})"
        return f"SqrtValue({self.coeff}*sqrt({self.radicand}))"


def sign_1rad(p, q, alpha) -> int:
    """Sign of p + q*sqrt(alpha) for rationals p, q and alpha >= 0."""
    p, q, alpha = Fraction(p), Fraction(q), Fraction(alpha)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if q == 0 or alpha == 0:
        return _sign(p)
    if q > 0 and p >= 0:
        return 1
    if q < 0 and p <= 0:
        return -1
    d = _sign(p * p - q * q * alpha)
    return d if p > 0 else -d


def sign_2rad(p, q, r, s, alpha, beta) -> int:
    """Sign of p + q*sqrt(alpha) + r*sqrt(beta) + s*sqrt(alpha*beta).

    Written as A + sqrt(beta)*B with A = p + q*sqrt(alpha) and
    B = r + s*sqrt(alpha); comparing A^2 with beta*B^2 needs only
    single-radical signs in sqrt(alpha).
    """
    p, q, r, s = Fraction(p), Fraction(q), Fraction(r), Fraction(s)
    alpha, beta = Fraction(alpha), Fraction(beta)
    if alpha < 0 or beta < 0:
        raise ValueError("radicands must be nonnegative")
    if beta == 0:
        return sign_1rad(p, q, alpha)
    if alpha == 0:
        return sign_1rad(p, r, beta)
    sb = sign_1rad(r, s, alpha)
    if sb == 0:
        return sign_1rad(p, q, alpha)
    sa = sign_1rad(p, q, alpha)
    if sa >= 0 and sb > 0:
        return 1
    if sa <= 0 and sb < 0:
        return -1
    # Opposite signs: compare A^2 against beta * B^2, both single-radical.
    a2_p = p * p + q * q * alpha
    a2_q = 2 * p * q
    b2_p = beta * (r * r + s * s * alpha)
    b2_q = beta * 2 * r * s
    d = sign_1rad(a2_p - b2_p, a2_q - b2_q, alpha)
    return d if sa > 0 else -d


def sign_of_radical_sum(constant, terms) -> int:
    """Sign of ``constant + sum of c_i * sqrt(r_i)`` with rational data.

    Terms with equal radicands merge, and a pair of radicands whose
    product is a perfect square merges likewise.  After merging, at most
    two independent radicands plus their product are decidable; anything
    deeper raises ValueError (it does not arise in this library's flows).
    """
    const = Fraction(constant)
    merged: list[list[Fraction]] = []  # [coeff, radicand]
    for c, r in terms:
        c, r = Fraction(c), Fraction(r)
        if c == 0 or r == 0:
            continue
        root = exact_sqrt(r)
        if root is not None:
            const += c * root
            continue
        for slot in merged:
            if slot[1] == r:
                slot[0] += c
                break
            ratio_root = exact_sqrt(r / slot[1])
            if ratio_root is not None:
                # sqrt(r) = ratio_root * sqrt(slot radicand)
                slot[0] += c * ratio_root
                break
        else:
            merged.append([c, r])
    merged = [slot for slot in merged if slot[0] != 0]
    if not merged:
        return _sign(const)
    if len(merged) == 1:
        return sign_1rad(const, merged[0][0], merged[0][1])
    if len(merged) == 2:
        (q, a), (r_, b) = merged
        return sign_2rad(const, q, r_, 0, a, b)
    if len(merged) == 3:
        # Look for the product relation r_k ~ r_i * r_j.
        for k in range(3):
            i, j = [t for t in range(3) if t != k]
            ratio = merged[i][1] * merged[j][1] / merged[k][1]
            root = exact_sqrt(ratio)
            if root is not None:
                s_coeff = merged[k][0] / root
                return sign_2rad(
                    const,
                    merged[i][0],
                    merged[j][0],
                    s_coeff,
                    merged[i][1],
                    merged[j][1],
                )
    raise ValueError("radical sum with more than two independent radicands")
