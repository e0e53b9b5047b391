import random
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction as F

import pytest

from towerdyn.lp_operator import (
    SimpleFunction,
    apply_op,
    check_isometry,
    distribution,
    frechet,
    inverse_orbit_floor,
    level_measure_at_least,
    lp_norm_p,
    lp_norm_p_bounds,
)
from towerdyn.measure_core import DyadicSet
from towerdyn.tower import (
    Detour,
    LeveledSet,
    bdp_system,
    block_start,
    encode,
    geometric_system,
    measure,
    push,
    wandering_set,
)

BDP = bdp_system()
CHI_W = SimpleFunction.indicator(wandering_set())
ZERO = SimpleFunction.zero()


def random_simple(rng, levels=range(-4, 30), r=4, terms=4):
    out = []
    for _ in range(rng.randint(0, terms)):
        cells = rng.sample(range(2**r), rng.randint(1, 2**r))
        coeff = F(rng.randint(-8, 8), rng.choice([1, 2, 4, 3]))
        out.append((rng.choice(levels), DyadicSet.from_cells(cells, r), coeff))
    return SimpleFunction(out)


def random_set(rng, levels=range(-4, 30), r=4):
    parts = {}
    for p in rng.sample(list(levels), rng.randint(1, 3)):
        parts[p] = DyadicSet.from_cells(rng.sample(range(2**r), rng.randint(1, 2**r)), r)
    return LeveledSet(parts)


def pointwise(phi, level, x):
    return sum((c for p, s, c in phi if p == level and s.contains_point(x)), F(0))


def test_canonical_form():
    half = DyadicSet.interval(0, F(1, 2))
    phi = SimpleFunction([(0, DyadicSet.unit(), 1), (0, half, 2), (1, half, 0)])
    assert phi.terms == (
        (0, DyadicSet.interval(F(1, 2), 1), F(1)),
        (0, half, F(3)),
    )
    assert (phi - phi) == ZERO
    assert SimpleFunction([(0, half, 1), (0, DyadicSet.interval(F(1, 2), 1), 1)]) == CHI_W


def test_apply_op_examples():
    assert apply_op(BDP, CHI_W, 1) == SimpleFunction.indicator(LeveledSet.single(-1))
    assert apply_op(BDP, CHI_W, 0) == CHI_W
    for N in (1, 2, 3):
        assert lp_norm_p(BDP, apply_op(BDP, CHI_W, -block_start(N)), 1) == F(1, 2**N)


def test_linearity_and_inverse():
    rng = random.Random(1)
    for _ in range(200):
        phi, psi = random_simple(rng), random_simple(rng)
        a, n = F(rng.randint(-5, 5), 3), rng.randint(-40, 40)
        assert apply_op(BDP, phi.scale(a) + psi, n) == apply_op(BDP, phi, n).scale(a) + apply_op(BDP, psi, n)
        assert apply_op(BDP, apply_op(BDP, phi, n), -n) == phi


def test_pointwise_semantics():
    rng = random.Random(2)
    for _ in range(100):
        phi, psi = random_simple(rng), random_simple(rng)
        level, x = rng.randint(-4, 29), F(rng.randint(0, 31), 32) + F(1, 64)
        assert pointwise(phi + psi, level, x) == pointwise(phi, level, x) + pointwise(psi, level, x)
        n = rng.randint(-5, 5)
        # (phi o f^n)(level, x) = phi(level + n, x)
        assert pointwise(apply_op(BDP, phi, n), level, x) == pointwise(phi, level + n, x)


def test_norm_examples():
    assert lp_norm_p(BDP, CHI_W, 1) == 1
    assert lp_norm_p(BDP, SimpleFunction.indicator(LeveledSet.single(encode(Detour(1, 1, 2)))), 1) == F(5, 4)
    rng = random.Random(3)
    for _ in range(50):
        A = random_set(rng)
        for p in (1, 2, 3):
            assert lp_norm_p(BDP, SimpleFunction.indicator(A, 2), p) == 2**p * measure(BDP, A)


def test_rational_exponents():
    four = SimpleFunction.indicator(wandering_set(), 4)
    assert lp_norm_p(BDP, four, F(3, 2)) == 8
    two = SimpleFunction.indicator(wandering_set(), 2)
    with pytest.raises(ValueError):
        lp_norm_p(BDP, two, F(3, 2))
    lo, hi = lp_norm_p_bounds(BDP, two, F(3, 2), bits=30)
    assert lo ** 2 <= 8 <= hi ** 2
    assert hi - lo <= F(1, 2**30)
    assert lp_norm_p_bounds(BDP, four, F(3, 2)) == (8, 8)
    with pytest.raises(ValueError):
        lp_norm_p(BDP, CHI_W, F(1, 2))


def test_isometry_bookkeeping():
    rng = random.Random(4)
    for _ in range(100):
        phi = random_simple(rng)
        n = rng.randint(-60, 60)
        assert check_isometry(BDP, phi, n, rng.choice([1, 2]))
        # independent recomputation through push and measure
        expected = sum(
            (abs(c) * measure(BDP, push(BDP, LeveledSet({p: s}), -n)) for p, s, c in phi), F(0)
        )
        assert lp_norm_p(BDP, apply_op(BDP, phi, n), 1) == expected


def brute_frechet(sys, g):
    """Infimum over xi > 0 of mu(|g| >= xi) + xi, from the right limit at each value and at 0."""
    dist = distribution(sys, g)
    thresholds = [F(0)] + [v for v, _ in dist]
    return min(sum((m for w, m in dist if w > v), F(0)) + v for v in thresholds)


def test_frechet_examples():
    d = frechet(BDP, CHI_W, ZERO)
    assert d.value == 1 and not d.attained
    assert frechet(BDP, CHI_W, CHI_W).value == 0
    rng = random.Random(5)
    for _ in range(100):
        A = random_set(rng)
        assert frechet(BDP, SimpleFunction.indicator(A), ZERO).value == min(measure(BDP, A), 1)


def test_frechet_metric_axioms():
    rng = random.Random(6)
    for _ in range(300):
        a, b, c = random_simple(rng), random_simple(rng), random_simple(rng)
        dab, dbc, dac = (frechet(BDP, *pair).value for pair in ((a, b), (b, c), (a, c)))
        assert dac <= dab + dbc
        assert dab == frechet(BDP, b, a).value
        assert (dab == 0) == (a == b)
        assert dab == brute_frechet(BDP, a - b)


def test_frechet_controls_large_deviations():
    rng = random.Random(7)
    for _ in range(300):
        phi, psi = random_simple(rng), random_simple(rng)
        d = frechet(BDP, phi, psi).value
        eps = d + F(rng.randint(1, 8), 16)
        if eps < 1:
            assert level_measure_at_least(BDP, phi - psi, 1) < eps


def test_escape_in_measure_on_bdp():
    for N in range(1, 6):
        d = frechet(BDP, apply_op(BDP, CHI_W, -block_start(N)), ZERO).value
        assert d == F(1, 2**N)


def test_inverse_orbit_on_bdp():
    io = inverse_orbit_floor(BDP, wandering_set(), 1, 1, 60)
    assert io.verdict == "floor-certified"
    assert all(io.values[n] == BDP.level_measure(n) for n in range(61))
    assert [n for n in range(1, 61) if io.values[n] >= 1] == [3, 7, 14, 22, 30, 38, 49]
    C = DyadicSet.interval(F(1, 8), 1)
    io = inverse_orbit_floor(BDP, LeveledSet({0: C}), 1, 1, block_start(5))
    assert io.floor == F(7, 8)
    assert all(io.values[k] >= F(7, 8) for k in io.certified_steps)


def test_inverse_orbit_geometric_has_no_floor():
    io = inverse_orbit_floor(geometric_system(F(1, 2)), wandering_set(), 1, 1, 20)
    assert io.floor is None
    assert all(io.values[n] == F(1, 2**n) for n in range(21))
    with pytest.raises(ValueError):
        inverse_orbit_floor(BDP, wandering_set(), 0, 1, 5)


def test_parallel_norms():
    rng = random.Random(8)
    phis = [random_simple(rng) for _ in range(50)]
    seq = [lp_norm_p(BDP, phi, 2) for phi in phis]
    with ThreadPoolExecutor(max_workers=8) as pool:
        par = list(pool.map(lambda phi: lp_norm_p(bdp_system(), phi, 2), phis))
    assert par == seq
