"""Exact set algebra and integration on dyadic subsets of the unit fiber [0, 1).

Every quantity here is a :class:`fractions.Fraction`; nothing is ever rounded.
Intervals are half-open, so disjoint decompositions are exact.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union

RationalLike = Union[Fraction, int, str]

ZERO = Fraction(0)
ONE = Fraction(1)

SET_OPS = ("union", "intersect", "difference", "symmetric-difference")


def as_fraction(value: RationalLike) -> Fraction:
    """Parse ``value`` into a Fraction; accepts ``"num/den"`` and ``"num/2^k"``."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            num, den = text.split("/", 1)
            den = den.strip()
            if "^" in den:
                base, exp = den.split("^", 1)
                den_value = int(base) ** int(exp)
            else:
                den_value = int(den)
            return Fraction(int(num), den_value)
        return Fraction(text)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def is_dyadic(q: Fraction) -> bool:
    den = q.denominator
    return den & (den - 1) == 0


def format_rational(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """Half-open interval ``[lo, hi)`` with dyadic endpoints inside [0, 1]."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        lo, hi = as_fraction(self.lo), as_fraction(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if not (ZERO <= lo < hi <= ONE):
            raise ValueError(f"need 0 <= lo < hi <= 1, got [{lo}, {hi})")
        if not (is_dyadic(lo) and is_dyadic(hi)):
            raise ValueError(f"endpoints must be dyadic rationals, got [{lo}, {hi})")

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo


def _merge(pairs: Iterable[tuple[Fraction, Fraction]]) -> tuple[DyadicInterval, ...]:
    out: list[list[Fraction]] = []
    for lo, hi in sorted(pairs):
        if lo >= hi:
            continue
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1][1] = hi
        else:
            out.append([lo, hi])
    return tuple(DyadicInterval(lo, hi) for lo, hi in out)


class DyadicSet:
    """Finite disjoint union of dyadic half-open intervals, kept canonical.

    Canonical means sorted, pairwise disjoint and with touching intervals merged,
    so two sets are equal exactly when their interval tuples are equal.
    """

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[DyadicInterval | tuple[RationalLike, RationalLike]] = ()):
        pairs = []
        for item in intervals:
            if isinstance(item, DyadicInterval):
                pairs.append((item.lo, item.hi))
            else:
                iv = DyadicInterval(as_fraction(item[0]), as_fraction(item[1]))
                pairs.append((iv.lo, iv.hi))
        self.intervals: tuple[DyadicInterval, ...] = _merge(pairs)

    @classmethod
    def empty(cls) -> "DyadicSet":
        return cls()

    @classmethod
    def unit(cls) -> "DyadicSet":
        return cls([(ZERO, ONE)])

    @classmethod
    def interval(cls, lo: RationalLike, hi: RationalLike) -> "DyadicSet":
        return cls([(lo, hi)])

    @classmethod
    def from_cells(cls, cells: Iterable[int], r: int) -> "DyadicSet":
        """Union of grid cells ``[i/2^r, (i+1)/2^r)``."""
        step = Fraction(1, 2**r)
        return cls([(i * step, (i + 1) * step) for i in cells])

    def __iter__(self) -> Iterator[DyadicInterval]:
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DyadicSet) and self.intervals == other.intervals

    def __hash__(self) -> int:
        return hash(self.intervals)

    def __repr__(self) -> str:
        return f"DyadicSet({self.to_text() or 'empty'})"

    def endpoints(self) -> list[Fraction]:
        pts = []
        for iv in self.intervals:
            pts.extend((iv.lo, iv.hi))
        return pts

    def contains_point(self, x: Fraction) -> bool:
        for iv in self.intervals:
            if iv.lo <= x < iv.hi:
                return True
        return False

    def issubset(self, other: "DyadicSet") -> bool:
        return not combine(self, other, "difference")

    def complement(self) -> "DyadicSet":
        return combine(DyadicSet.unit(), self, "difference")

    def __or__(self, other: "DyadicSet") -> "DyadicSet":
        return combine(self, other, "union")

    def __and__(self, other: "DyadicSet") -> "DyadicSet":
        return combine(self, other, "intersect")

    def __sub__(self, other: "DyadicSet") -> "DyadicSet":
        return combine(self, other, "difference")

    def __xor__(self, other: "DyadicSet") -> "DyadicSet":
        return combine(self, other, "symmetric-difference")

    def to_text(self) -> str:
        return ",".join(f"{_fmt_point(iv.lo)}:{_fmt_point(iv.hi)}" for iv in self.intervals)

    @classmethod
    def from_text(cls, text: str) -> "DyadicSet":
        text = text.strip()
        if not text or text in ("empty", "{}"):
            return cls()
        pairs = []
        for chunk in text.split(","):
            lo, hi = chunk.split(":")
            pairs.append((as_fraction(lo), as_fraction(hi)))
        return cls(pairs)


def _fmt_point(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return format_rational(q)


def combine(a: DyadicSet, b: DyadicSet, op: str) -> DyadicSet:
    """Set operation on two canonical sets by a sweep over their endpoints."""
    if op not in SET_OPS:
        raise ValueError(f"unknown set operation {op!r}")
    # canonical sets never repeat an endpoint, so membership toggles at each one
    a_pts, b_pts = set(a.endpoints()), set(b.endpoints())
    pts = sorted(a_pts | b_pts)
    in_a = in_b = False
    pairs = []
    for lo, hi in zip(pts, pts[1:]):
        if lo in a_pts:
            in_a = not in_a
        if lo in b_pts:
            in_b = not in_b
        if op == "union":
            keep = in_a or in_b
        elif op == "intersect":
            keep = in_a and in_b
        elif op == "difference":
            keep = in_a and not in_b
        else:
            keep = in_a != in_b
        if keep:
            pairs.append((lo, hi))
    return DyadicSet(pairs)


def lebesgue(s: DyadicSet) -> Fraction:
    return sum((iv.length for iv in s.intervals), ZERO)


def normalize(s: DyadicSet) -> DyadicSet:
    return DyadicSet(s.intervals)


class StepFunction:
    """Positive piecewise-constant density on [0, 1) with dyadic breakpoints.

    ``breakpoints[i]`` is the left end of piece ``i``; the last piece ends at 1.
    Adjacent pieces with equal values are merged on construction.
    """

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints: Sequence[RationalLike], values: Sequence[RationalLike]):
        bps = [as_fraction(b) for b in breakpoints]
        vals = [as_fraction(v) for v in values]
        if len(bps) != len(vals) or not bps:
            raise ValueError("breakpoints and values must be non-empty and equally long")
        if bps[0] != ZERO:
            raise ValueError("first breakpoint must be 0")
        for x, y in zip(bps, bps[1:]):
            if not x < y:
                raise ValueError("breakpoints must be strictly increasing")
        if bps[-1] >= ONE:
            raise ValueError("breakpoints must lie in [0, 1)")
        if any(not is_dyadic(b) for b in bps):
            raise ValueError("breakpoints must be dyadic")
        if any(v <= 0 for v in vals):
            raise ValueError("density values must be strictly positive")
        cb, cv = [bps[0]], [vals[0]]
        for b, v in zip(bps[1:], vals[1:]):
            if v != cv[-1]:
                cb.append(b)
                cv.append(v)
        self.breakpoints: tuple[Fraction, ...] = tuple(cb)
        self.values: tuple[Fraction, ...] = tuple(cv)

    @classmethod
    def constant(cls, value: RationalLike) -> "StepFunction":
        return cls([ZERO], [value])

    @classmethod
    def from_pieces(cls, pieces: Iterable[tuple[RationalLike, RationalLike, RationalLike]]) -> "StepFunction":
        """Build from ``(lo, hi, value)`` triples that tile [0, 1)."""
        items = sorted((as_fraction(lo), as_fraction(hi), as_fraction(v)) for lo, hi, v in pieces)
        edge = ZERO
        for lo, hi, _ in items:
            if lo != edge:
                raise ValueError("pieces must tile [0, 1) without gaps or overlaps")
            edge = hi
        if edge != ONE:
            raise ValueError("pieces must reach 1")
        return cls([lo for lo, _, _ in items], [v for _, _, v in items])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, StepFunction)
            and self.breakpoints == other.breakpoints
            and self.values == other.values
        )

    def __hash__(self) -> int:
        return hash((self.breakpoints, self.values))

    def __repr__(self) -> str:
        body = ", ".join(f"[{lo},{hi}):{v}" for lo, hi, v in self.pieces())
        return f"StepFunction({body})"

    def pieces(self) -> Iterator[tuple[Fraction, Fraction, Fraction]]:
        ends = self.breakpoints[1:] + (ONE,)
        return zip(self.breakpoints, ends, self.values)

    def __call__(self, x: RationalLike) -> Fraction:
        x = as_fraction(x)
        if not ZERO <= x < ONE:
            raise ValueError("density is defined on [0, 1)")
        return self.values[bisect_right(self.breakpoints, x) - 1]

    def is_constant(self) -> bool:
        return len(self.values) == 1

    def sup(self) -> Fraction:
        return max(self.values)

    def inf(self) -> Fraction:
        return min(self.values)

    def scaled(self, c: RationalLike) -> "StepFunction":
        return StepFunction(self.breakpoints, [v * as_fraction(c) for v in self.values])


def integrate(d: StepFunction, s: DyadicSet) -> Fraction:
    """Exact integral of the density ``d`` over ``s``."""
    total = ZERO
    for iv in s.intervals:
        k = bisect_right(d.breakpoints, iv.lo) - 1
        lo = iv.lo
        while lo < iv.hi:
            piece_end = d.breakpoints[k + 1] if k + 1 < len(d.breakpoints) else ONE
            hi = min(piece_end, iv.hi)
            total += d.values[k] * (hi - lo)
            lo = hi
            k += 1
    return total


def refinement(
    functions: Iterable[StepFunction], within: DyadicSet | None = None
) -> list[tuple[Fraction, Fraction]]:
    """Common refinement of the densities, restricted to ``within``.

    Returns the cells ``(lo, hi)`` on which every given density is constant,
    in increasing fiber order.
    """
    within = DyadicSet.unit() if within is None else within
    cuts = set()
    for f in functions:
        cuts.update(f.breakpoints)
    cells = []
    ordered = sorted(cuts)
    for iv in within.intervals:
        i = bisect_right(ordered, iv.lo)
        lo = iv.lo
        while i < len(ordered) and ordered[i] < iv.hi:
            cells.append((lo, ordered[i]))
            lo = ordered[i]
            i += 1
        cells.append((lo, iv.hi))
    return cells


def grid_refinement(cells: list[tuple[Fraction, Fraction]], r: int) -> list[tuple[Fraction, Fraction]]:
    """Split cells further at the grid points ``k/2^r``."""
    step = Fraction(1, 2**r)
    out = []
    for lo, hi in cells:
        x = lo
        while x < hi:
            nxt = (x // step + 1) * step
            nxt = min(nxt, hi)
            out.append((x, nxt))
            x = nxt
    return out


def overlap_length(s: DyadicSet, lo: Fraction, hi: Fraction) -> Fraction:
    """``lebesgue(s & [lo, hi))`` without building the intersection."""
    total = ZERO
    for iv in s.intervals:
        a, b = max(iv.lo, lo), min(iv.hi, hi)
        if a < b:
            total += b - a
    return total


def dyadic_floor(x: Fraction, bits: int) -> Fraction:
    """Largest multiple of ``2^-bits`` not exceeding ``x``."""
    scale = 2**bits
    return Fraction((x * scale).__floor__(), scale)
