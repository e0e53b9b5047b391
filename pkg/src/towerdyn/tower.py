"""Invertible dissipative systems as integer-indexed towers of weighted fibers.

A system is a stack of copies of [0, 1) indexed by the integers. The map ``f``
moves every point one level up and leaves its fiber coordinate alone, so all
of the dynamics lives in the per-level densities. The wandering set ``W`` is
the fiber at position 0, and ``f^m(W)`` is the fiber at position ``m``.

The counterexample system ("bdp") interleaves the plain levels ``I_N`` with
``2^N * 4N`` detour levels ``I_{N,j}^l``; :func:`encode` and :func:`decode`
translate between those addresses and consecutive integer positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping, Union

from .measure_core import (
    ONE,
    ZERO,
    DyadicSet,
    RationalLike,
    StepFunction,
    as_fraction,
    grid_refinement,
    integrate,
    refinement,
)


@dataclass(frozen=True)
class Base:
    """The plain level ``I_n``."""

    n: int


@dataclass(frozen=True)
class Detour:
    """The detour level ``I_{n,j}^l`` with ``1 <= j <= 2^n`` and ``1 <= l <= 4n``."""

    n: int
    j: int
    l: int

    def __post_init__(self) -> None:
        if self.n < 1 or not 1 <= self.j <= 2**self.n or not 1 <= self.l <= 4 * self.n:
            raise ValueError(f"detour index out of range: {self}")


LevelAddress = Union[Base, Detour]


def block_start(N: int) -> int:
    """Position ``n_N`` of ``I_N`` for ``N >= 0``.

    Closed form of ``n_0 = 0, n_{N+1} = n_N + 2^N * 4N + 1``.
    """
    if N < 0:
        raise ValueError("block index must be non-negative")
    return N + 4 * ((N - 2) * 2**N + 2)


def block_index(p: int) -> int:
    """Largest ``N >= 0`` with ``n_N <= p`` (0 for non-positive positions)."""
    if p <= 0:
        return 0
    N = 0
    while block_start(N + 1) <= p:
        N += 1
    return N


def encode(addr: LevelAddress) -> int:
    if isinstance(addr, Base):
        return addr.n if addr.n <= 0 else block_start(addr.n)
    return block_start(addr.n) + (addr.j - 1) * 4 * addr.n + addr.l


def decode(p: int) -> LevelAddress:
    if p <= 0:
        return Base(p)
    N = block_index(p)
    offset = p - block_start(N)
    if offset == 0:
        return Base(N)
    offset -= 1
    return Detour(N, offset // (4 * N) + 1, offset % (4 * N) + 1)


def special_interval(n: int, j: int) -> tuple[Fraction, Fraction]:
    """The fiber interval ``[(j-1)/2^n, j/2^n)`` that a detour level inflates."""
    return Fraction(j - 1, 2**n), Fraction(j, 2**n)


@lru_cache(maxsize=65536)
def bdp_density(p: int) -> StepFunction:
    addr = decode(p)
    if isinstance(addr, Base):
        return StepFunction.constant(Fraction(1, 2 ** abs(addr.n)))
    n, j, l = addr.n, addr.j, addr.l
    scale = 2**l if l <= 2 * n else 2 ** (4 * n - l)
    special = Fraction(scale, 2**n)
    background = Fraction(1, 2**n)
    lo, hi = special_interval(n, j)
    pieces = [(lo, hi, special)]
    if lo > 0:
        pieces.append((ZERO, lo, background))
    if hi < 1:
        pieces.append((hi, ONE, background))
    return StepFunction.from_pieces(pieces)


class TowerSystem:
    """A tower system: a name, a kind tag, and a rule giving each level's density.

    Densities are produced lazily; the object is immutable once built.
    """

    wandering_position = 0

    def __init__(
        self,
        name: str,
        kind: str,
        rule: Callable[[int], StepFunction],
        parameters: Mapping[str, object] | None = None,
    ):
        self.name = name
        self.kind = kind
        self._rule = rule
        self.parameters = dict(parameters or {})

    def __repr__(self) -> str:
        return f"TowerSystem({self.name!r}, kind={self.kind!r})"

    def density(self, p: int) -> StepFunction:
        return self._rule(p)

    def level_measure(self, p: int) -> Fraction:
        return integrate(self.density(p), DyadicSet.unit())

    def uniform_constant(self) -> Fraction | None:
        """The common density if every level carries the same constant, else None."""
        return self.parameters.get("uniform")  # type: ignore[return-value]

    def descriptor(self) -> dict:
        from .serialize import system_to_descriptor

        return system_to_descriptor(self)


def bdp_system() -> TowerSystem:
    """The mixing system whose composition operator fails Kitai's Criterion."""
    return TowerSystem("bdp", "bdp", bdp_density)


def geometric_system(rho: RationalLike) -> TowerSystem:
    """Contrast system with constant density ``rho^|n|`` on level ``n``."""
    rho = as_fraction(rho)
    if not ZERO < rho < ONE:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")

    @lru_cache(maxsize=4096)
    def rule(p: int) -> StepFunction:
        return StepFunction.constant(rho ** abs(p))

    return TowerSystem(f"geometric({rho})", "geometric", rule, {"rho": rho})


def custom_system(
    name: str,
    table: Mapping[int, StepFunction] | None = None,
    default: Callable[[int], StepFunction] | RationalLike = 1,
    default_spec: object = None,
) -> TowerSystem:
    """System given by explicit densities on a finite window plus a default rule.

    ``default`` is either a constant or a callable of the position.
    """
    table = dict(table or {})
    params: dict[str, object] = {"table": table, "default": default_spec}
    if callable(default):
        fallback = default
    else:
        const = as_fraction(default)
        if const <= 0:
            raise ValueError("default density must be positive")
        flat = StepFunction.constant(const)

        def fallback(p: int) -> StepFunction:
            return flat

        if default_spec is None:
            params["default"] = const
        if not table:
            params["uniform"] = const

    def rule(p: int) -> StepFunction:
        got = table.get(p)
        return got if got is not None else fallback(p)

    return TowerSystem(name, "custom", rule, params)


def uniform_system(value: RationalLike = 1) -> TowerSystem:
    """Every level carries the same constant density, so ``f`` preserves measure."""
    return custom_system("identity-like", default=value)


@dataclass(frozen=True)
class LeveledSet:
    """Finite-measure set: a finite map from level positions to non-empty fiber sets."""

    parts: tuple[tuple[int, DyadicSet], ...] = ()

    def __init__(self, parts: Mapping[int, DyadicSet] | Iterable[tuple[int, DyadicSet]] = ()):
        items = parts.items() if isinstance(parts, Mapping) else parts
        merged: dict[int, DyadicSet] = {}
        for p, s in items:
            merged[int(p)] = merged[int(p)] | s if int(p) in merged else s
        object.__setattr__(
            self, "parts", tuple(sorted((p, s) for p, s in merged.items() if s))
        )

    @classmethod
    def single(cls, p: int, s: DyadicSet | None = None) -> "LeveledSet":
        return cls({p: DyadicSet.unit() if s is None else s})

    def __iter__(self) -> Iterator[tuple[int, DyadicSet]]:
        return iter(self.parts)

    def __bool__(self) -> bool:
        return bool(self.parts)

    def as_dict(self) -> dict[int, DyadicSet]:
        return dict(self.parts)

    def positions(self) -> list[int]:
        return [p for p, _ in self.parts]

    def fiber(self, p: int) -> DyadicSet:
        return self.as_dict().get(p, DyadicSet())

    def _binary(self, other: "LeveledSet", op: str) -> "LeveledSet":
        a, b = self.as_dict(), other.as_dict()
        out = {}
        for p in set(a) | set(b):
            sa, sb = a.get(p, DyadicSet()), b.get(p, DyadicSet())
            if op == "union":
                out[p] = sa | sb
            elif op == "intersect":
                out[p] = sa & sb
            else:
                out[p] = sa - sb
        return LeveledSet(out)

    def __or__(self, other: "LeveledSet") -> "LeveledSet":
        return self._binary(other, "union")

    def __and__(self, other: "LeveledSet") -> "LeveledSet":
        return self._binary(other, "intersect")

    def __sub__(self, other: "LeveledSet") -> "LeveledSet":
        return self._binary(other, "difference")

    def issubset(self, other: "LeveledSet") -> bool:
        return not (self - other)


def push(sys: TowerSystem, s: LeveledSet, n: int) -> LeveledSet:
    """Image ``f^n(s)``: every part moves ``n`` levels, fibers unchanged."""
    return LeveledSet({p + n: fib for p, fib in s})


def measure(sys: TowerSystem, s: LeveledSet) -> Fraction:
    return sum((integrate(sys.density(p), fib) for p, fib in s), ZERO)


def wandering_set() -> LeveledSet:
    return LeveledSet.single(TowerSystem.wandering_position)


def shifted_measure(sys: TowerSystem, s: LeveledSet, n: int) -> Fraction:
    """``mu(f^n(s))`` without building the shifted set."""
    return sum((integrate(sys.density(p + n), fib) for p, fib in s), ZERO)


def doubling_bound_holds(sys: TowerSystem, positions: Iterable[int]) -> bool:
    """Check ``mu(f^{+-1}(B)) <= 2 mu(B)`` for every B inside the given levels.

    Because f fixes fibers, this is the pointwise bound
    ``d_{p +- 1} <= 2 d_p`` on the common refinement.
    """
    for p in positions:
        here = sys.density(p)
        for q in (p - 1, p + 1):
            there = sys.density(q)
            for lo, _ in refinement([here, there]):
                if there(lo) > 2 * here(lo):
                    return False
    return True


@dataclass(frozen=True)
class DistortionResult:
    constant: Fraction
    worst_k: int
    worst_cell: tuple[Fraction, Fraction]
    ratios: dict[int, Fraction] = field(default_factory=dict, compare=False)


def distortion_constant(sys: TowerSystem, k_range: range | Iterable[int], r: int = 10) -> DistortionResult:
    """Smallest K that makes the bounded-distortion inequality hold for k in ``k_range``.

    The ratio ``mu(f^k B) / mu(B)`` over subsets B of W ranges exactly between
    the essential inf and sup of ``d_k / d_0``, and both are attained on cells
    of the common refinement (intersected with the grid of step ``2^-r``).
    """
    ks = list(k_range)
    if not ks:
        raise ValueError("k_range must be non-empty")
    w0 = sys.wandering_position
    base = sys.density(w0)
    mu_w = integrate(base, DyadicSet.unit())
    best = None
    per_k: dict[int, Fraction] = {}
    for k in ks:
        dk = sys.density(w0 + k)
        avg = integrate(dk, DyadicSet.unit()) / mu_w
        worst_here = None
        for lo, hi in grid_refinement(refinement([base, dk]), r):
            ratio = dk(lo) / base(lo)
            k_val = max(ratio / avg, avg / ratio)
            if worst_here is None or k_val > worst_here[0]:
                worst_here = (k_val, (lo, hi))
        per_k[k] = worst_here[0]
        if best is None or worst_here[0] > best[0]:
            best = (worst_here[0], k, worst_here[1])
    return DistortionResult(best[0], best[1], best[2], per_k)
