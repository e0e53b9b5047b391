from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction as F
from math import isqrt

import pytest
from hypothesis import given
from hypothesis import strategies as st

from towerdyn.conditions import FAILS, HOLDS, PROVED, holds, kitai_generator_check
from towerdyn.shift_dynamics import (
    NormSeq,
    WeightSeq,
    backward_product,
    bounded_distortion_consistency,
    classify_bilateral,
    classify_unilateral,
    equicontinuity_probe,
    example_norms,
    forward_product,
    norms_from_system,
    product_criterion,
    weights_from_system,
)
from towerdyn.tower import bdp_system, block_start, geometric_system, uniform_system

BDP = bdp_system()
D = [3, 7, 14, 22, 30, 38, 49]


def harmonic(n):
    return sum((F(1, k) for k in range(1, n + 1)), F(0))


def test_bdp_weights_bounded():
    ws = weights_from_system(BDP, 1)
    assert ws.bounds(range(-60, 61)) == (F(1, 2), F(2))
    for k in range(-60, 61):
        assert F(1, 2) <= ws(k) <= 2


def test_geometric_weights():
    ws = weights_from_system(geometric_system(F(1, 2)), 1)
    assert ws(1) == 2
    assert all(ws(k) == 2 for k in range(1, 20))
    assert all(ws(k) == F(1, 2) for k in range(-20, 1))


@pytest.mark.parametrize("p", [1, 2, F(3, 2)])
def test_telescoping_identity(p):
    for sys in (BDP, geometric_system(F(3, 4))):
        ws = weights_from_system(sys, p)
        mu_w = sys.level_measure(0)
        for k in range(1, 80):
            assert forward_product(ws, k) * sys.level_measure(k) == mu_w
            assert backward_product(ws, k) * mu_w == sys.level_measure(-k)


def test_product_criterion_bdp():
    v = product_criterion(weights_from_system(BDP, 1), 60)
    assert v.mixing.verdict == FAILS and v.mixing.basis == "certificate"
    assert v.kitai == v.mixing
    assert v.obstruction == D
    fwd = v.sequences["forward_product"]
    for N in range(1, 4):
        assert fwd[block_start(N)] == 2**N
    assert holds(v.hypercyclic.verdict)


def test_product_criterion_constant_weights():
    v = product_criterion(WeightSeq.periodic([1]), 40)
    assert v.mixing.verdict == FAILS and v.hypercyclic.verdict == FAILS
    assert all(x == 1 for x in v.sequences["forward_product"].values())
    with pytest.raises(ValueError):
        product_criterion(WeightSeq.periodic([1], kind="unilateral"), 10)


def test_product_criterion_geometric():
    v = product_criterion(weights_from_system(geometric_system(F(1, 2))), 30)
    assert v.mixing.verdict == PROVED and v.hypercyclic.verdict == PROVED


def test_bilateral_norm_classification():
    ns = NormSeq.from_function(lambda n: F(1, 2 ** abs(n)))
    for J in (0, 2, 5):
        v = classify_bilateral(ns, J, 40)
        assert v.mixing.verdict == HOLDS and v.hypercyclic.verdict == HOLDS
    bdp = classify_bilateral(norms_from_system(BDP), 0, 60)
    assert bdp.mixing.verdict == FAILS
    assert set(D) <= set(bdp.obstruction)
    assert holds(bdp.hypercyclic.verdict)
    flat = classify_bilateral(NormSeq.periodic([1]), 1, 30)
    assert flat.mixing.verdict == FAILS and flat.hypercyclic.verdict == FAILS
    with pytest.raises(ValueError):
        classify_bilateral(ns, -1, 10)


def test_unilateral_norm_classification():
    v = classify_unilateral(NormSeq.from_function(lambda n: F(1, n), kind="unilateral"), 60)
    assert v.mixing.verdict == HOLDS
    squares = NormSeq.from_function(lambda n: F(1) if isqrt(n) ** 2 == n else F(1, n), kind="unilateral")
    v = classify_unilateral(squares, 60)
    assert v.hypercyclic.verdict == HOLDS
    assert not holds(v.mixing.verdict)
    assert all(isqrt(n) ** 2 != n for n in v.subsequence[1:])
    flat = classify_unilateral(NormSeq.periodic([1], kind="unilateral"), 30)
    assert flat.mixing.verdict == FAILS and flat.hypercyclic.verdict == FAILS


def test_norm_and_generator_checks_agree():
    for sys in (BDP, geometric_system(F(1, 2)), uniform_system()):
        gen = kitai_generator_check(sys, 60)
        norms = classify_bilateral(norms_from_system(sys), 0, 60)
        assert holds(gen.verdict) == holds(norms.mixing.verdict)


def test_evidence_is_monotone_in_horizon():
    ns = NormSeq.from_function(lambda n: F(1, 2 ** abs(n)))
    seen = False
    for H in range(2, 40):
        now = holds(classify_bilateral(ns, 1, H).mixing.verdict)
        assert now or not seen
        seen = now


def test_example_norms():
    for n in range(1, 10):
        assert example_norms({n: 1}, "abel") == F(1, n)
    for n in range(1, 30):
        assert example_norms({n: n * harmonic(n)}, "diff") == harmonic(n) * (2 if n == 1 else 1)
    assert example_norms([], "diff") == 0
    assert example_norms([1, -1, 1], "abel") == 1
    with pytest.raises(ValueError):
        example_norms([1], "sup")


@given(st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=20), max_size=12),
       st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=20), max_size=12))
def test_example_norms_are_seminorms(x, y):
    n = max(len(x), len(y))
    x, y = x + [F(0)] * (n - len(x)), y + [F(0)] * (n - len(y))
    s = [a + b for a, b in zip(x, y)]
    for which in ("abel", "diff"):
        assert example_norms(s, which) <= example_norms(x, which) + example_norms(y, which)
        assert example_norms([3 * a for a in x], which) == 3 * example_norms(x, which)


def test_equicontinuity_probe():
    probe = equicontinuity_probe("diff", 1000)
    ratios = {row.n: row.ratio for row in probe.rows}
    assert ratios[1] == 1
    assert ratios[4] == F(25, 12)
    assert ratios[1000] == harmonic(1000)
    assert ratios[1000] > 7
    assert probe.diverging
    with pytest.raises(ValueError):
        equicontinuity_probe("diff", 0)


def test_bounded_distortion_consistency():
    for rho in (F(1, 2), F(3, 4)):
        c = bounded_distortion_consistency(geometric_system(rho), 40)
        assert c.distortion == 1
        assert c.agree and holds(c.tf_kitai.verdict) and holds(c.bw_kitai.verdict)
        assert all(c.mu_forward[n] == rho**n == c.mu_backward[n] for n in range(41))


def test_cached_weights_thread_safe():
    ws = weights_from_system(bdp_system())
    seq = [ws(k) for k in range(-200, 200)]
    fresh = weights_from_system(bdp_system())
    with ThreadPoolExecutor(max_workers=8) as pool:
        par = list(pool.map(fresh, range(-200, 200)))
    assert par == seq
