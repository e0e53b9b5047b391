"""Witness search and horizon-bounded checks for the runaway and shift-like conditions.

The conditions quantify over all n, so a finite computation can only
semi-decide them. Every check returns a verdict that carries its horizon:

* ``holds-to-horizon``: the evidence sequences meet the tolerance schedule on
  the tail window ``[ceil(H/2), H]``;
* ``holds``: a closed form for a built-in system gives the true limit;
* ``fails-with-certificate``: an unconditional argument (a pigeonhole chain, or
  a closed form for a built-in system) rules the condition out;
* ``inconclusive``: neither.

All measures are exact rationals.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .measure_core import (
    ONE,
    ZERO,
    DyadicSet,
    StepFunction,
    dyadic_floor,
    format_rational,
    integrate,
    lebesgue,
    overlap_length,
    refinement,
)
from .tower import (
    Detour,
    LeveledSet,
    TowerSystem,
    block_index,
    block_start,
    encode,
    measure,
    push,
    special_interval,
)

HOLDS = "holds-to-horizon"
PROVED = "holds"
FAILS = "fails-with-certificate"
INCONCLUSIVE = "inconclusive"

# granularity used when a greedy split point is not itself dyadic
SPLIT_BITS = 64


# -- tolerance schedules ---------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    name: str
    rule: Callable[[int], Fraction]

    def __call__(self, n: int) -> Fraction:
        return self.rule(max(n, 1))


def _block(n: int) -> Fraction:
    return Fraction(1, 2 ** block_index(n))


def _log2(n: int) -> Fraction:
    return Fraction(1, 2 ** (n.bit_length() - 1))


def _inv_log(n: int) -> Fraction:
    # 1 / ceil(log2(n + 2))
    return Fraction(1, (n + 1).bit_length())


SCHEDULES: dict[str, Schedule] = {
    "block": Schedule("block", _block),
    "log2": Schedule("log2", _log2),
    "inv-log": Schedule("inv-log", _inv_log),
}


def get_schedule(schedule: str | Schedule) -> Schedule:
    if isinstance(schedule, Schedule):
        return schedule
    try:
        return SCHEDULES[schedule]
    except KeyError:
        raise ValueError(f"unknown schedule {schedule!r}; choose from {sorted(SCHEDULES)}") from None


def tail_window(horizon: int) -> range:
    return range(max(1, (horizon + 1) // 2), horizon + 1)


# -- result types ----------------------------------------------------------


@dataclass(frozen=True)
class WitnessTriple:
    """A candidate ``B`` inside ``A`` at step ``n`` and its three exact defects."""

    n: int
    B: LeveledSet
    defect_A: Fraction
    defect_back: Fraction
    defect_fwd: Fraction

    @property
    def worst(self) -> Fraction:
        return max(self.defect_A, self.defect_back, self.defect_fwd)

    @property
    def tail_sum(self) -> Fraction:
        return self.defect_back + self.defect_fwd


@dataclass
class CheckResult:
    condition: str
    horizon: int
    schedule: str
    verdict: str
    basis: str
    achieved: Fraction
    triples: list[WitnessTriple] = field(default_factory=list)
    sequences: dict[str, dict[int, Fraction]] = field(default_factory=dict)
    subsequence: list[int] = field(default_factory=list)
    witness: LeveledSet | None = None
    certificate: dict | None = None
    notes: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class CertificateStep:
    n: int
    j: int
    overlap: Fraction
    pigeonhole_bound: Fraction
    K: int
    measure_at_K: Fraction
    lower_bound: Fraction
    verified: bool


@dataclass
class KitaiFailureCertificate:
    fiber_measure: Fraction
    steps: list[CertificateStep]

    @property
    def verified(self) -> bool:
        return all(s.verified for s in self.steps)

    @property
    def floor(self) -> Fraction:
        """Certified lower bound for ``mu(f^{K_n}(B))`` at every step."""
        return self.fiber_measure

    def max_measure(self) -> Fraction:
        return max((s.measure_at_K for s in self.steps), default=ZERO)


# -- helpers ---------------------------------------------------------------


def _fiber_of(A: DyadicSet | LeveledSet, m: int) -> DyadicSet:
    if isinstance(A, DyadicSet):
        return A
    positions = A.positions()
    if positions and positions != [m]:
        raise ValueError(f"A must lie inside the fiber of level {m}, found levels {positions}")
    return A.fiber(m)


def _greedy_discard(
    cells: list[tuple[Fraction, Fraction]],
    base: StepFunction,
    cost: Callable[[Fraction], Fraction],
    budget: Fraction,
) -> DyadicSet:
    """Remove the cells with the largest cost per unit of base mass, within budget.

    Fractional knapsack on a linear objective, so the greedy order is optimal.
    Equal ratios are discarded in increasing fiber order.
    """
    ranked = sorted(cells, key=lambda c: (-(cost(c[0]) / base(c[0])), c[0]))
    removed = []
    for lo, hi in ranked:
        if budget <= 0:
            break
        dm = base(lo)
        mass = dm * (hi - lo)
        if mass <= budget:
            removed.append((lo, hi))
            budget -= mass
        else:
            cut = dyadic_floor(budget / dm, SPLIT_BITS)
            if cut > 0:
                removed.append((lo, lo + cut))
            break
    return DyadicSet(removed)


def _uniform_certificate(sys: TowerSystem, mass_A: Fraction, eps: Fraction) -> dict | None:
    c = sys.uniform_constant()
    if c is None or mass_A - eps <= 0:
        return None
    return {
        "kind": "measure-preserving",
        "statement": "every level has the same constant density, so mu(f^n(B)) = mu(B) >= mu(A) - eps for all n",
        "floor": mass_A - eps,
    }


def _meets(values: Mapping[int, Fraction], schedule: Schedule, horizon: int) -> bool:
    return all(values[n] <= schedule(n) for n in tail_window(horizon) if n in values)


# -- witnesses -------------------------------------------------------------


def optimal_witness(
    sys: TowerSystem,
    m: int,
    A: DyadicSet | LeveledSet,
    n: int,
    eps: Fraction,
) -> WitnessTriple:
    """Best ``B`` inside ``A`` (fiber of level m) for step n with ``mu(A - B) <= eps``.

    Minimizes the total tail mass ``mu(f^-n B) + mu(f^n B)`` exactly.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    fiber = _fiber_of(A, m)
    dm, db, df = sys.density(m), sys.density(m - n), sys.density(m + n)
    cells = refinement([dm, db, df], within=fiber)
    removed = _greedy_discard(cells, dm, lambda x: db(x) + df(x), eps)
    B = fiber - removed
    return WitnessTriple(
        n=n,
        B=LeveledSet({m: B}),
        defect_A=integrate(dm, removed),
        defect_back=integrate(db, B),
        defect_fwd=integrate(df, B),
    )


def check_msc(
    sys: TowerSystem,
    m: int,
    A: DyadicSet | LeveledSet,
    horizon: int,
    schedule: str | Schedule = "block",
) -> CheckResult:
    """Mixing shift-like condition: a fresh ``B_n`` for every step ``n <= horizon``."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    sched = get_schedule(schedule)
    fiber = _fiber_of(A, m)
    triples = [optimal_witness(sys, m, fiber, n, sched(n)) for n in range(1, horizon + 1)]
    seqs = {
        "defect_A": {t.n: t.defect_A for t in triples},
        "defect_back": {t.n: t.defect_back for t in triples},
        "defect_fwd": {t.n: t.defect_fwd for t in triples},
    }
    window = tail_window(horizon)
    achieved = max(triples[n - 1].worst for n in window)
    mass_A = integrate(sys.density(m), fiber)
    cert = _uniform_certificate(sys, mass_A, sched(horizon))
    if cert is not None:
        verdict, basis = FAILS, "closed-form"
    elif all(_meets(s, sched, horizon) for s in seqs.values()):
        verdict, basis = HOLDS, f"evidence at horizon {horizon}"
    else:
        verdict, basis = INCONCLUSIVE, f"evidence at horizon {horizon}"
    return CheckResult("MSC", horizon, sched.name, verdict, basis, achieved, triples, seqs, certificate=cert)


def pointwise_max(functions: Iterable[StepFunction], cells: list[tuple[Fraction, Fraction]]) -> list[Fraction]:
    """Max of the densities on each cell; cells must refine every density.

    Pieces are visited from the largest value down and each cell keeps the
    first value that covers it.
    """
    los = [lo for lo, _ in cells]
    pieces = []
    for f in functions:
        for lo, hi, v in f.pieces():
            i, k = bisect_left(los, lo), bisect_left(los, hi)
            if i < k:
                pieces.append((v, i, k))
    pieces.sort(key=lambda t: t[0], reverse=True)
    out: list[Fraction | None] = [None] * len(cells)
    nxt = list(range(len(cells) + 1))  # next unassigned cell, path-compressed

    def find(x: int) -> int:
        root = x
        while nxt[root] != root:
            root = nxt[root]
        while nxt[x] != root:
            nxt[x], x = root, nxt[x]
        return root

    for v, i, k in pieces:
        c = find(i)
        while c < k:
            out[c] = v
            nxt[c] = c + 1
            c = find(c + 1)
    return out  # type: ignore[return-value]


def _tails(sys: TowerSystem, m: int, B: DyadicSet, horizon: int) -> tuple[dict[int, Fraction], dict[int, Fraction]]:
    back = {n: integrate(sys.density(m - n), B) for n in range(1, horizon + 1)}
    fwd = {n: integrate(sys.density(m + n), B) for n in range(1, horizon + 1)}
    return back, fwd


def ksc_failure_certificate(sys: TowerSystem, B: LeveledSet, n_max: int) -> KitaiFailureCertificate:
    """Pigeonhole chain showing ``mu(f^{K_n}(B)) >= lambda(C)`` for ``1 <= n <= n_max``.

    ``B`` must be a subset of the wandering fiber (level 0) of the bdp system.
    """
    if sys.kind != "bdp":
        raise ValueError("the pigeonhole certificate is specific to the bdp system")
    positions = B.positions()
    if positions != [0]:
        raise ValueError(f"B must be supported on level 0, found levels {positions}")
    C = B.fiber(0)
    lam = lebesgue(C)
    steps = []
    for n in range(1, n_max + 1):
        best_j, best = 1, Fraction(-1)
        for j in range(1, 2**n + 1):
            ov = overlap_length(C, *special_interval(n, j))
            if ov > best:
                best_j, best = j, ov
        bound = lam / 2**n
        K = encode(Detour(n, best_j, 2 * n))
        at_K = measure(sys, push(sys, B, K))
        lower = 2**n * best
        ok = best >= bound and at_K >= lower >= lam
        steps.append(CertificateStep(n, best_j, best, bound, K, at_K, lower, ok))
    return KitaiFailureCertificate(lam, steps)


def certificate_depth(horizon: int) -> int:
    """Largest n whose whole detour block lies within ``horizon`` steps."""
    n = 0
    while block_start(n + 2) - 1 <= horizon:
        n += 1
    return n


def check_ksc(
    sys: TowerSystem,
    m: int,
    A: DyadicSet | LeveledSet,
    eps: Fraction,
    horizon: int,
    schedule: str | Schedule = "block",
) -> CheckResult:
    """Kitai shift-like condition: one ``B`` for all steps up to the horizon."""
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    sched = get_schedule(schedule)
    fiber = _fiber_of(A, m)
    dm = sys.density(m)
    shifted = [sys.density(m + s * n) for n in range(1, horizon + 1) for s in (-1, 1)]
    cells = refinement(shifted + [dm], within=fiber)
    top = pointwise_max(shifted, cells)
    cost = dict(zip((lo for lo, _ in cells), top))
    removed = _greedy_discard(cells, dm, lambda x: cost[x], eps)
    B = fiber - removed
    back, fwd = _tails(sys, m, B, horizon)
    achieved = max(max(back.values()), max(fwd.values()))
    mass_A = integrate(dm, fiber)
    result = CheckResult(
        "KSC", horizon, sched.name, INCONCLUSIVE, f"evidence at horizon {horizon}", achieved,
        sequences={"tail_back": back, "tail_fwd": fwd}, witness=LeveledSet({m: B}),
    )
    cert = _uniform_certificate(sys, mass_A, eps)
    if cert is not None:
        result.verdict, result.basis, result.certificate = FAILS, "closed-form", cert
        return result
    depth = certificate_depth(horizon)
    if sys.kind == "bdp" and m == 0 and depth >= 1 and B:
        chain = ksc_failure_certificate(sys, LeveledSet({0: B}), depth)
        universal = lebesgue(fiber) - eps
        result.certificate = certificate_to_dict(chain, universal)
        if chain.verified and universal > 0:
            result.verdict, result.basis = FAILS, "certificate"
            result.notes.append(
                "every B inside A with mu(A - B) <= eps has fiber measure >= "
                f"{format_rational(universal)}, so the same chain bounds mu(f^K_n(B)) below for all n"
            )
            return result
    if _meets(back, sched, horizon) and _meets(fwd, sched, horizon):
        result.verdict = HOLDS
    return result


def certificate_to_dict(cert: KitaiFailureCertificate, universal_floor: Fraction | None = None) -> dict:
    out = {
        "kind": "pigeonhole",
        "fiber_measure": cert.fiber_measure,
        "verified": cert.verified,
        "steps": [
            {
                "n": s.n,
                "j": s.j,
                "overlap": s.overlap,
                "pigeonhole_bound": s.pigeonhole_bound,
                "K": s.K,
                "measure_at_K": s.measure_at_K,
                "lower_bound": s.lower_bound,
                "verified": s.verified,
            }
            for s in cert.steps
        ],
    }
    if universal_floor is not None:
        out["universal_floor"] = universal_floor
    return out


def decreasing_subsequence(*seqs: Mapping[int, Fraction]) -> list[int]:
    """Greedy: start at the first index, then the next index where every sequence drops."""
    indices = sorted(seqs[0])
    if not indices:
        return []
    picked = [indices[0]]
    for n in indices[1:]:
        cur = picked[-1]
        if all(s[n] < s[cur] for s in seqs):
            picked.append(n)
    return picked


def grc_witness(
    sys: TowerSystem,
    m: int,
    A: DyadicSet | LeveledSet,
    eps: Fraction,
    horizon: int,
    schedule: str | Schedule = "block",
) -> CheckResult:
    """Gethner-Shapiro shift-like condition: one ``B`` and a subsequence ``n_k``.

    ``B`` is the optimal witness at the step where ``A`` itself escapes best;
    the subsequence is extracted greedily (smallest index first) so that both
    tails strictly decrease along it.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    sched = get_schedule(schedule)
    fiber = _fiber_of(A, m)
    back_A, fwd_A = _tails(sys, m, fiber, horizon)
    star = min(range(1, horizon + 1), key=lambda n: (max(back_A[n], fwd_A[n]), n))
    B = optimal_witness(sys, m, fiber, star, eps).B.fiber(m)
    back, fwd = _tails(sys, m, B, horizon)
    sub = decreasing_subsequence(back, fwd)
    last = sub[-1] if sub else horizon
    achieved = max(back[last], fwd[last]) if sub else ZERO
    result = CheckResult(
        "GSC", horizon, sched.name, INCONCLUSIVE, f"evidence at horizon {horizon}", achieved,
        sequences={"tail_back": back, "tail_fwd": fwd}, subsequence=sub, witness=LeveledSet({m: B}),
    )
    cert = _uniform_certificate(sys, integrate(sys.density(m), fiber), eps)
    if cert is not None:
        result.verdict, result.basis, result.certificate = FAILS, "closed-form", cert
    elif len(sub) >= 2 and achieved <= sched(last):
        result.verdict = HOLDS
    return result


def exceptional_set(sys: TowerSystem, horizon: int, threshold: Fraction = ONE) -> list[int]:
    """Steps ``1 <= k <= horizon`` with ``mu(f^k(W)) >= threshold``."""
    return [k for k in range(1, horizon + 1) if sys.level_measure(k) >= threshold]


def bdp_exceptional_closed_form(horizon: int) -> list[int]:
    """Positions of the levels ``I_{n,j}^{2n}``: the only bdp levels of measure >= 1."""
    out = []
    n = 1
    while block_start(n) + 2 * n <= horizon:
        for j in range(1, 2**n + 1):
            k = encode(Detour(n, j, 2 * n))
            if k <= horizon:
                out.append(k)
        n += 1
    return out


def kitai_generator_check(
    sys: TowerSystem, horizon: int, schedule: str | Schedule = "block"
) -> CheckResult:
    """Whether ``mu(f^n(W))`` and ``mu(f^-n(W))`` both go to 0."""
    sched = get_schedule(schedule)
    mu_w = sys.level_measure(0)
    if mu_w <= 0:
        raise ValueError("mu(W) must be positive")
    fwd = {n: sys.level_measure(n) for n in range(0, horizon + 1)}
    back = {n: sys.level_measure(-n) for n in range(0, horizon + 1)}
    window = tail_window(horizon)
    achieved = max(max(fwd[n], back[n]) / mu_w for n in window)
    exceptional = exceptional_set(sys, horizon)
    result = CheckResult(
        "kitai-generator", horizon, sched.name, INCONCLUSIVE, f"evidence at horizon {horizon}", achieved,
        sequences={"mu_forward": fwd, "mu_backward": back},
    )
    result.certificate = {"exceptional_set": exceptional}
    if sys.kind == "bdp":
        result.verdict, result.basis = FAILS, "closed-form"
        result.certificate.update(
            kind="infinite-exceptional-set",
            statement="each block N contributes 2^N levels I_{N,j}^{2N}, all of measure >= 1",
            closed_form_matches=exceptional == bdp_exceptional_closed_form(horizon),
        )
    elif sys.kind == "geometric":
        result.verdict, result.basis = PROVED, "closed-form"
        result.certificate.update(kind="geometric", statement="mu(f^n(W)) = rho^|n| -> 0")
    elif sys.uniform_constant() is not None:
        result.verdict, result.basis = FAILS, "closed-form"
        result.certificate.update(kind="measure-preserving", statement="mu(f^n(W)) = mu(W) for all n")
    else:
        rel_f = {n: v / mu_w for n, v in fwd.items()}
        rel_b = {n: v / mu_w for n, v in back.items()}
        if _meets(rel_f, sched, horizon) and _meets(rel_b, sched, horizon):
            result.verdict = HOLDS
    return result


# -- classification --------------------------------------------------------

LABEL_ORDER = ("kitai", "mixing", "weakly_mixing", "hypercyclic", "recurrent")


@dataclass
class Label:
    verdict: str
    basis: str


@dataclass
class DynamicsReport:
    system: str
    horizon: int
    conditions: dict[str, CheckResult]
    labels: dict[str, Label]
    assumptions: list[str] = field(default_factory=list)


def holds(verdict: str) -> bool:
    return verdict in (HOLDS, PROVED)


def _rank(label: Label) -> int:
    return {PROVED: 2, HOLDS: 1}.get(label.verdict, 0)


def _propagate(labels: dict[str, Label]) -> None:
    """Kitai => mixing => weak mixing => hypercyclic => recurrent, and failures back down."""
    for stronger, weaker in zip(LABEL_ORDER, LABEL_ORDER[1:]):
        s, w = labels[stronger], labels[weaker]
        if holds(s.verdict) and _rank(w) < _rank(s):
            if w.verdict == FAILS:
                raise AssertionError(f"inconsistent labels: {stronger} holds but {weaker} fails")
            labels[weaker] = Label(s.verdict, f"implied by {stronger}")
    order = list(reversed(LABEL_ORDER))
    for weaker, stronger in zip(order, order[1:]):
        if labels[weaker].verdict == FAILS and labels[stronger].verdict != FAILS:
            if holds(labels[stronger].verdict):
                raise AssertionError(f"inconsistent labels: {weaker} fails but {stronger} holds")
            labels[stronger] = Label(FAILS, f"implied by {weaker}")


def classify(
    sys: TowerSystem,
    horizon: int,
    schedule: str | Schedule = "block",
    eps: Fraction = Fraction(1, 4),
) -> DynamicsReport:
    """Run the checkers on ``A = W`` and map their verdicts to dynamical labels."""
    W = DyadicSet.unit()
    msc = check_msc(sys, 0, W, horizon, schedule)
    ksc = check_ksc(sys, 0, W, eps, horizon, schedule)
    gsc = grc_witness(sys, 0, W, eps, horizon, schedule)
    gen = kitai_generator_check(sys, horizon, schedule)
    conditions = {"MSC": msc, "KSC": ksc, "GSC": gsc, "kitai-generator": gen}

    def from_check(c: CheckResult) -> Label:
        return Label(c.verdict, c.basis)

    labels = {
        "kitai": from_check(ksc),
        "mixing": from_check(msc),
        "weakly_mixing": from_check(gsc),
        "hypercyclic": from_check(gsc),
        "recurrent": from_check(gsc),
    }
    if sys.kind == "bdp":
        labels["mixing"] = Label(PROVED, "closed-form")
    elif sys.kind == "geometric":
        # constant densities give bounded distortion with K = 1, and mu(f^n W) -> 0
        labels["kitai"] = Label(PROVED, "closed-form")
    _propagate(labels)
    assumptions = [
        "f^{-1}(B) =ess B holds structurally for tower systems and is not checked",
        "outer measure equals measure for every represented set",
    ]
    return DynamicsReport(sys.name, horizon, conditions, labels, assumptions)
