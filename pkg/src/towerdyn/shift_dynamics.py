"""Weighted backward shifts: weights and norms induced by tower systems, and their criteria.

Weights and coordinate norms are stored as exact p-th powers, and every
comparison against a tolerance schedule is made on those p-th powers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Sequence

from .conditions import (
    FAILS,
    HOLDS,
    INCONCLUSIVE,
    PROVED,
    Label,
    Schedule,
    bdp_exceptional_closed_form,
    decreasing_subsequence,
    get_schedule,
    holds,
    kitai_generator_check,
    tail_window,
)
from .measure_core import ONE, ZERO, RationalLike, as_fraction
from .tower import TowerSystem, distortion_constant

HYPOTHESIS_NOTE = (
    "assumes the ambient sequence space satisfies: for every eps there is delta with "
    "||x|| < delta => min(|x_n|, ||e_n||) < eps for all n"
)


def _memo(fn: Callable[[int], Fraction]) -> Callable[[int], Fraction]:
    return lru_cache(maxsize=None)(fn)


@dataclass(frozen=True)
class WeightSeq:
    """Weights ``w_k > 0``, held as ``w_k^p``.

    ``source`` names the system the weights came from (enables the closed-form
    recognizers); ``period`` is set for periodic sequences.
    """

    kind: str
    p: Fraction
    power: Callable[[int], Fraction]
    source: str = "custom"
    period: tuple[Fraction, ...] | None = None

    def __call__(self, k: int) -> Fraction:
        return self.power(k)

    @classmethod
    def periodic(cls, powers: Sequence[RationalLike], p: RationalLike = 1, kind: str = "bilateral") -> "WeightSeq":
        vals = tuple(as_fraction(v) for v in powers)
        if not vals or any(v <= 0 for v in vals):
            raise ValueError("weights must be positive")
        return cls(kind, as_fraction(p), lambda k: vals[k % len(vals)], "periodic", vals)

    def bounds(self, ks: range) -> tuple[Fraction, Fraction]:
        vals = [self(k) for k in ks]
        return min(vals), max(vals)


@dataclass(frozen=True)
class NormSeq:
    """Coordinate norms ``||e_n||``, held as ``||e_n||^p``."""

    kind: str
    p: Fraction
    power: Callable[[int], Fraction]
    source: str = "custom"
    period: tuple[Fraction, ...] | None = None

    def __call__(self, n: int) -> Fraction:
        return self.power(n)

    @classmethod
    def periodic(cls, powers: Sequence[RationalLike], p: RationalLike = 1, kind: str = "bilateral") -> "NormSeq":
        vals = tuple(as_fraction(v) for v in powers)
        if not vals or any(v <= 0 for v in vals):
            raise ValueError("norms must be positive")
        return cls(kind, as_fraction(p), lambda n: vals[n % len(vals)], "periodic", vals)

    @classmethod
    def from_function(cls, fn: Callable[[int], RationalLike], p: RationalLike = 1, kind: str = "bilateral") -> "NormSeq":
        return cls(kind, as_fraction(p), _memo(lambda n: as_fraction(fn(n))))


def weights_from_system(sys: TowerSystem, p: RationalLike = 1) -> WeightSeq:
    """``w_k^p = mu(f^{k-1}(W)) / mu(f^k(W))``."""
    p = as_fraction(p)
    if p < 1:
        raise ValueError("p must be at least 1")

    @_memo
    def power(k: int) -> Fraction:
        return sys.level_measure(k - 1) / sys.level_measure(k)

    return WeightSeq("bilateral", p, power, sys.kind)


def norms_from_system(sys: TowerSystem, p: RationalLike = 1) -> NormSeq:
    """``||e_n||^p = mu(f^n(W))``: the norm of the indicator of ``W_n`` in L^p."""
    return NormSeq("bilateral", as_fraction(p), _memo(sys.level_measure), sys.kind)


def forward_product(ws: WeightSeq, k: int) -> Fraction:
    """``prod_{j=1}^k w_j^p``."""
    out = ONE
    for j in range(1, k + 1):
        out *= ws(j)
    return out


def backward_product(ws: WeightSeq, k: int) -> Fraction:
    """``prod_{j=-k+1}^{0} w_j^p``."""
    out = ONE
    for j in range(-k + 1, 1):
        out *= ws(j)
    return out


@dataclass
class ShiftVerdicts:
    mixing: Label
    hypercyclic: Label
    subsequence: list[int] = field(default_factory=list)
    obstruction: list[int] = field(default_factory=list)
    sequences: dict[str, dict[int, Fraction]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def kitai(self) -> Label:
        # for weighted shifts Kitai's Criterion is equivalent to mixing
        return self.mixing


def product_criterion(ws: WeightSeq, horizon: int, schedule: str | Schedule = "block") -> ShiftVerdicts:
    """Mixing and hypercyclicity of ``B_w`` from the partial products of the weights.

    Mixing needs ``prod_{1..n} w -> inf`` and ``prod_{-n+1..0} w -> 0`` along
    all n; hypercyclicity along some subsequence.
    """
    if ws.kind != "bilateral":
        raise ValueError("the product criterion here is for bilateral weights")
    sched = get_schedule(schedule)
    fwd: dict[int, Fraction] = {}
    back: dict[int, Fraction] = {}
    P = Q = ONE
    for k in range(1, horizon + 1):
        P *= ws(k)
        Q *= ws(-k + 1)
        fwd[k], back[k] = P, Q
    inv_fwd = {k: 1 / v for k, v in fwd.items()}
    r = {k: max(inv_fwd[k], back[k]) for k in fwd}
    low = [k for k, v in fwd.items() if v <= 1]
    sub = decreasing_subsequence(inv_fwd, back)
    basis = f"evidence at horizon {horizon}"
    out = ShiftVerdicts(
        Label(INCONCLUSIVE, basis),
        Label(INCONCLUSIVE, basis),
        subsequence=sub,
        obstruction=low,
        sequences={"forward_product": fwd, "backward_product": back},
    )
    if len(sub) >= 2 and r[sub[-1]] <= sched(sub[-1]):
        out.hypercyclic = Label(HOLDS, basis)
    if all(r[k] <= sched(k) for k in tail_window(horizon)):
        out.mixing = Label(HOLDS, basis)

    if ws.source == "bdp":
        if len(low) >= 3 and low == bdp_exceptional_closed_form(horizon):
            out.mixing = Label(FAILS, "certificate")
            out.notes.append(
                "prod_{j<=k} w_j^p = mu(W)/mu(f^k(W)) <= 1 for every k in the infinite set D "
                "of levels I_{n,j}^{2n}"
            )
    elif ws.source == "geometric":
        out.mixing = out.hypercyclic = Label(PROVED, "closed-form")
    elif ws.period is not None:
        period_product = ONE
        for v in ws.period:
            period_product *= v
        if period_product <= 1:
            # products stay bounded: P_{tq + r} = P_q^t P_r
            out.mixing = out.hypercyclic = Label(FAILS, "certificate")
            out.notes.append(f"periodic weights with period product {period_product} <= 1")
    return out


def _window_values(ns: NormSeq, J: int, n: int) -> Fraction:
    return max(max(ns(j - n), ns(j + n)) for j in range(-J, J + 1))


def classify_bilateral(ns: NormSeq, J: int, horizon: int, schedule: str | Schedule = "block") -> ShiftVerdicts:
    """Bilateral backward shift: hypercyclic iff some ``n_k`` sends ``e_{j -+ n_k}`` to 0.

    Mixing iff the same holds along the full sequence. ``J`` bounds ``|j|``.
    """
    if J < 0:
        raise ValueError("J must be non-negative")
    sched = get_schedule(schedule)
    r = {n: _window_values(ns, J, n) for n in range(1, horizon + 1)}
    return _verdicts(ns, r, horizon, sched)


def classify_unilateral(ns: NormSeq, horizon: int, schedule: str | Schedule = "block") -> ShiftVerdicts:
    """Unilateral backward shift: only ``j = 0`` matters, so look at ``||e_n||`` alone."""
    sched = get_schedule(schedule)
    r = {n: ns(n) for n in range(1, horizon + 1)}
    return _verdicts(ns, r, horizon, sched)


def _verdicts(ns: NormSeq, r: dict[int, Fraction], horizon: int, sched: Schedule) -> ShiftVerdicts:
    basis = f"evidence at horizon {horizon}"
    sub = decreasing_subsequence(r)
    out = ShiftVerdicts(Label(INCONCLUSIVE, basis), Label(INCONCLUSIVE, basis), subsequence=sub, sequences={"r": r})
    out.notes.append(HYPOTHESIS_NOTE)
    if len(sub) >= 2 and r[sub[-1]] <= sched(sub[-1]):
        out.hypercyclic = Label(HOLDS, basis)
    out.obstruction = [n for n in tail_window(horizon) if r[n] > sched(n)]
    if not out.obstruction:
        out.mixing = Label(HOLDS, basis)
    if ns.source == "bdp":
        out.obstruction = [n for n in r if r[n] >= 1]
        if out.obstruction and set(bdp_exceptional_closed_form(horizon)) <= set(out.obstruction):
            out.mixing = Label(FAILS, "certificate")
            out.notes.append("||e_k||^p = mu(f^k(W)) >= 1 on the infinite set D")
    elif ns.source == "geometric":
        out.mixing = out.hypercyclic = Label(PROVED, "closed-form")
    elif ns.period is not None:
        # a positive periodic sequence is bounded below
        out.mixing = out.hypercyclic = Label(FAILS, "certificate")
        out.notes.append(f"periodic norms bounded below by {min(ns.period)}")
    return out


# -- example norms ----------------------------------------------------------


def _as_sparse(x: Sequence[RationalLike] | Mapping[int, RationalLike]) -> dict[int, Fraction]:
    if isinstance(x, Mapping):
        items = ((int(k), as_fraction(v)) for k, v in x.items())
    else:
        items = ((i + 1, as_fraction(v)) for i, v in enumerate(x))
    return {k: v for k, v in items if v != 0}


def example_norms(x: Sequence[RationalLike] | Mapping[int, RationalLike], which: str) -> Fraction:
    """Exact norm of a finitely supported sequence indexed from 1.

    ``abel``: ``sup_N |sum_{n<=N} x_n / n|``.
    ``diff``: ``|x_1| + sup_n |x_{n+1}/(n+1) - x_n/n|``.
    A list is read as ``x_1, x_2, ...``; a mapping gives index -> value.
    """
    xs = _as_sparse(x)
    if which == "abel":
        best = partial = ZERO
        for n in sorted(xs):
            partial += xs[n] / n
            best = max(best, abs(partial))
        return best
    if which == "diff":

        def q(n: int) -> Fraction:
            return xs.get(n, ZERO) / n

        candidates = {k for n in xs for k in (n - 1, n) if k >= 1}
        sup = max((abs(q(k + 1) - q(k)) for k in candidates), default=ZERO)
        return abs(xs.get(1, ZERO)) + sup
    raise ValueError(f"unknown norm {which!r}; expected 'abel' or 'diff'")


@dataclass
class ProbeRow:
    n: int
    x_n: Fraction
    norm: Fraction
    ratio: Fraction


@dataclass
class ProbeResult:
    which: str
    rows: list[ProbeRow]
    log_lower_bound: Fraction
    diverging: bool

    @property
    def last(self) -> ProbeRow:
        return self.rows[-1]


def equicontinuity_probe(which: str, N: int) -> ProbeResult:
    """Growth of ``||x_n e_n||`` for ``x_n = n * H_n`` (``H_n`` harmonic numbers).

    ``ratio`` is ``|x_n| / n = H_n``; ``norm`` is the exact norm of ``x_n e_n``
    (they differ only at n = 1 for the diff norm, where ``|x_1|`` is counted twice).
    Divergence is flagged against the certified bound ``H_{2^k} >= 1 + k/2``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    rows = []
    h = ZERO
    for n in range(1, N + 1):
        h += Fraction(1, n)
        x_n = n * h
        rows.append(ProbeRow(n, x_n, example_norms({n: x_n}, which), abs(x_n) / n))
    bound = 1 + Fraction(N.bit_length() - 1, 2)
    return ProbeResult(which, rows, bound, rows[-1].ratio >= bound and N > 1)


# -- bounded distortion ------------------------------------------------------


@dataclass
class DistortionConsistency:
    distortion: Fraction
    tf_kitai: Label
    bw_kitai: Label
    mu_forward: dict[int, Fraction]
    mu_backward: dict[int, Fraction]

    @property
    def agree(self) -> bool:
        return holds(self.tf_kitai.verdict) == holds(self.bw_kitai.verdict)


def bounded_distortion_consistency(
    sys: TowerSystem, horizon: int, p: RationalLike = 1, k_span: int = 16, schedule: str | Schedule = "block"
) -> DistortionConsistency:
    """Compare the Kitai verdict for ``T_f`` with the one for the induced shift ``B_w``.

    For bounded-distortion systems the two must coincide.
    """
    K = distortion_constant(sys, range(-k_span, k_span + 1)).constant
    gen = kitai_generator_check(sys, horizon, schedule)
    tf = Label(gen.verdict, gen.basis)
    bw = product_criterion(weights_from_system(sys, p), horizon, schedule).kitai
    return DistortionConsistency(K, tf, bw, gen.sequences["mu_forward"], gen.sequences["mu_backward"])
