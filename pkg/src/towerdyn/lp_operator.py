"""The composition operator ``phi -> phi o f`` on simple functions over a tower.

Norms are returned as exact p-th powers. Only integer exponents are exact in
general; a rational exponent is exact when every ``|a|^p`` is rational and
otherwise falls back to :func:`lp_norm_p_bounds`.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from .conditions import certificate_depth, ksc_failure_certificate
from .measure_core import ZERO, DyadicSet, RationalLike, as_fraction, integrate
from .tower import LeveledSet, TowerSystem, measure, push, shifted_measure

Term = tuple[int, DyadicSet, Fraction]


def _canonical(terms: Iterable[tuple[int, DyadicSet, RationalLike]]) -> tuple[Term, ...]:
    """Disjoint supports per level, one term per (level, value), zeros dropped."""
    by_level: dict[int, list[tuple[DyadicSet, Fraction]]] = defaultdict(list)
    for level, s, c in terms:
        c = as_fraction(c)
        if c != 0 and s:
            by_level[int(level)].append((s, c))
    out: list[Term] = []
    for level in sorted(by_level):
        items = by_level[level]
        cuts = sorted({x for s, _ in items for x in s.endpoints()})
        groups: dict[Fraction, list[tuple[Fraction, Fraction]]] = defaultdict(list)
        for lo, hi in zip(cuts, cuts[1:]):
            mid = (lo + hi) / 2
            total = sum((c for s, c in items if s.contains_point(mid)), ZERO)
            if total != 0:
                groups[total].append((lo, hi))
        for c in sorted(groups):
            out.append((level, DyadicSet(groups[c]), c))
    return tuple(out)


class SimpleFunction:
    """Finite sum ``sum a_i chi_{A_i}`` with each ``A_i`` inside one tower level."""

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[tuple[int, DyadicSet, RationalLike]] = ()):
        self.terms = _canonical(terms)

    @classmethod
    def indicator(cls, s: LeveledSet, coeff: RationalLike = 1) -> "SimpleFunction":
        return cls((p, fib, coeff) for p, fib in s)

    @classmethod
    def zero(cls) -> "SimpleFunction":
        return cls()

    def __iter__(self) -> Iterator[Term]:
        return iter(self.terms)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SimpleFunction) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(self.terms)

    def __repr__(self) -> str:
        body = " + ".join(f"{c}*chi[{p}:{s.to_text()}]" for p, s, c in self.terms)
        return f"SimpleFunction({body or '0'})"

    def __add__(self, other: "SimpleFunction") -> "SimpleFunction":
        return SimpleFunction(self.terms + other.terms)

    def __neg__(self) -> "SimpleFunction":
        return self.scale(-1)

    def __sub__(self, other: "SimpleFunction") -> "SimpleFunction":
        return self + (-other)

    def scale(self, a: RationalLike) -> "SimpleFunction":
        a = as_fraction(a)
        return SimpleFunction((p, s, c * a) for p, s, c in self.terms)

    def __rmul__(self, a: RationalLike) -> "SimpleFunction":
        return self.scale(a)

    def abs(self) -> "SimpleFunction":
        return SimpleFunction((p, s, abs(c)) for p, s, c in self.terms)

    def support(self) -> LeveledSet:
        return LeveledSet((p, s) for p, s, _ in self.terms)

    def level_set(self, predicate) -> LeveledSet:
        return LeveledSet((p, s) for p, s, c in self.terms if predicate(c))


def apply_op(sys: TowerSystem, phi: SimpleFunction, n: int) -> SimpleFunction:
    """``T_f^n phi = phi o f^n``; indicators pull back, so each level moves by ``-n``."""
    return SimpleFunction((p - n, s, c) for p, s, c in phi)


def _exact_power(c: Fraction, p: Fraction) -> Fraction | None:
    c = abs(c)
    if p.denominator == 1:
        return c ** p.numerator
    root = _exact_root(c, p.denominator)
    return None if root is None else root ** p.numerator


def _iroot(x: int, k: int) -> int:
    """Floor of the k-th root of a non-negative integer."""
    if x < 2:
        return x
    lo, hi = 1, 1 << (x.bit_length() // k + 1)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mid**k <= x:
            lo = mid
        else:
            hi = mid - 1
    return lo


def _exact_root(c: Fraction, k: int) -> Fraction | None:
    a, b = _iroot(c.numerator, k), _iroot(c.denominator, k)
    if a**k == c.numerator and b**k == c.denominator:
        return Fraction(a, b)
    return None


def _check_p(p: RationalLike) -> Fraction:
    p = as_fraction(p)
    if p < 1:
        raise ValueError("p must be at least 1")
    return p


def lp_norm_p(sys: TowerSystem, phi: SimpleFunction, p: RationalLike = 1) -> Fraction:
    """``||phi||_p^p = sum |a|^p mu(level set)``, exactly."""
    p = _check_p(p)
    total = ZERO
    for level, s, c in phi:
        power = _exact_power(c, p)
        if power is None:
            raise ValueError(
                f"|{c}|^{p} is irrational; use lp_norm_p_bounds for a certified enclosure"
            )
        total += power * integrate(sys.density(level), s)
    return total


def lp_norm_p_bounds(
    sys: TowerSystem, phi: SimpleFunction, p: RationalLike, bits: int = 40
) -> tuple[Fraction, Fraction]:
    """Enclosure ``lo <= ||phi||_p^p <= hi``.

    Each irrational ``|a|^p`` is bracketed within ``2^-bits`` relative to its
    denominator scale, so the width is at most ``2^-bits * sum mu(A_i)`` up to
    that scale.
    """
    p = _check_p(p)
    lo_total = hi_total = ZERO
    for level, s, c in phi:
        m = integrate(sys.density(level), s)
        exact = _exact_power(c, p)
        if exact is not None:
            lo_total += exact * m
            hi_total += exact * m
            continue
        base = abs(c) ** p.numerator
        k = p.denominator
        scale = 2**bits
        # floor((num * den^(k-1) * scale^k)^(1/k)) / (den * scale) brackets the root
        num = base.numerator * base.denominator ** (k - 1) * scale**k
        r = _iroot(num, k)
        den = base.denominator * scale
        lo_total += Fraction(r, den) * m
        hi_total += Fraction(r + 1, den) * m
    return lo_total, hi_total


@dataclass(frozen=True)
class FrechetValue:
    value: Fraction
    attained: bool

    def __float__(self) -> float:
        return float(self.value)


def distribution(sys: TowerSystem, g: SimpleFunction) -> list[tuple[Fraction, Fraction]]:
    """``(v, mu(g == v))`` for the distinct values ``v > 0`` of ``|g|``, largest first."""
    mass: dict[Fraction, Fraction] = defaultdict(Fraction)
    for level, s, c in g.abs():
        mass[c] += integrate(sys.density(level), s)
    return sorted(mass.items(), reverse=True)


def frechet(sys: TowerSystem, phi: SimpleFunction, psi: SimpleFunction) -> FrechetValue:
    """``inf_{xi > 0} mu(|phi - psi| >= xi) + xi``, evaluated exactly.

    With distinct values ``v_1 > ... > v_r > 0`` of ``|phi - psi|`` and
    ``M_i = mu(|phi - psi| >= v_i)``, the function is ``M_i + xi`` on
    ``(v_{i+1}, v_i]``, so the infimum is the least of ``M_i + v_{i+1}``
    (with ``M_0 = 0`` and ``v_{r+1} = 0``).
    """
    dist = distribution(sys, phi - psi)
    values = [v for v, _ in dist] + [ZERO]
    cumulative = [ZERO]
    for _, m in dist:
        cumulative.append(cumulative[-1] + m)
    best = min(cumulative[i] + values[i] for i in range(len(dist) + 1))
    # the candidate M_i + v_{i+1} is approached from above; xi = v_{i+1} itself adds m_{i+1}
    attained = any(cumulative[i + 1] + values[i] == best for i in range(len(dist)))
    return FrechetValue(best, attained)


def level_measure_at_least(sys: TowerSystem, g: SimpleFunction, threshold: RationalLike) -> Fraction:
    """``mu(|g| >= threshold)``."""
    t = as_fraction(threshold)
    return sum((m for v, m in distribution(sys, g) if v >= t), ZERO)


@dataclass
class InverseOrbit:
    values: dict[int, Fraction]
    floor: Fraction | None
    certified_steps: list[int]
    verdict: str


def inverse_orbit_floor(
    sys: TowerSystem,
    B: LeveledSet,
    delta: RationalLike,
    p: RationalLike = 1,
    horizon: int = 50,
) -> InverseOrbit:
    """``||T_f^{-n}(delta chi_B)||_p^p = delta^p mu(f^n(B))`` for ``0 <= n <= horizon``.

    On the bdp system, with ``B`` inside the wandering fiber, the pigeonhole
    chain certifies the values at the steps ``K_n`` never drop below
    ``delta^p lambda(C)``.
    """
    delta, p = as_fraction(delta), _check_p(p)
    if delta <= 0:
        raise ValueError("delta must be positive")
    dp = _exact_power(delta, p)
    if dp is None:
        raise ValueError(f"delta^p must be rational, got delta={delta}, p={p}")
    values = {n: dp * shifted_measure(sys, B, n) for n in range(horizon + 1)}
    depth = certificate_depth(horizon)
    if sys.kind == "bdp" and B.positions() == [0] and depth >= 1:
        cert = ksc_failure_certificate(sys, B, depth)
        floor = dp * cert.floor
        steps = [s.K for s in cert.steps]
        ok = cert.verified and all(values[k] >= floor for k in steps)
        return InverseOrbit(values, floor, steps, "floor-certified" if ok else "inconclusive")
    return InverseOrbit(values, None, [], "no-floor-certified")


def check_isometry(sys: TowerSystem, phi: SimpleFunction, n: int, p: RationalLike = 1) -> bool:
    """``||T_f^n phi||_p^p`` against ``sum |a|^p mu(f^{-n}(A))`` computed on the tower."""
    p = _check_p(p)
    direct = lp_norm_p(sys, apply_op(sys, phi, n), p)
    via_tower = sum(
        (_exact_power(c, p) * measure(sys, push(sys, LeveledSet({lvl: s}), -n)) for lvl, s, c in phi),
        ZERO,
    )
    return direct == via_tower
