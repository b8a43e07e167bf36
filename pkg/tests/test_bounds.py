import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rclmc import bounds as B

mpmath.mp.dps = 50
RTOL = 1e-12


def mp(x):
    return mpmath.mpf(x)


# independent high-precision evaluations of each bound
def mp_lmc1(W0, mu, L, d, h, m):
    return mpmath.exp(-mp(mu) * h * m / 2) * W0 + 2 * mpmath.sqrt(mp(L) / mu * h * d)


def mp_lmc2(W0, mu, L, H, d, h, m):
    k = mp(L) / mu
    return (mpmath.exp(-mp(mu) * h * m) * W0 + mp(H) * h * d / (2 * mp(mu))
            + 3 * k ** mpmath.mpf(1.5) * mpmath.sqrt(mu) * h * mpmath.sqrt(d))


def mp_rc1(W0, mu, h, m, L, phi):
    s = mpmath.fsum(mp(l) ** 2 / mp(p) for l, p in zip(L, phi))
    return mpmath.exp(-mp(mu) * h * m / 4) * W0 + 5 * mpmath.sqrt(h) / mu * mpmath.sqrt(s)


def mp_rc2(W0, mu, h, m, L, H, phi):
    s = mpmath.fsum((mp(l) ** 3 + mp(q) ** 2) / mp(p) ** 2 for l, q, p in zip(L, H, phi))
    return mpmath.exp(-mp(mu) * h * m / 4) * W0 + 3 * mp(h) / mu * mpmath.sqrt(s)


def close(a, b):
    return abs(mp(a) - b) <= RTOL * max(abs(b), mpmath.mpf(1e-300))


def test_lmc_case1_examples():
    r = B.lmc_bound_case1(2.0, 1.0, 1.0, 4, 0.25, 0)
    assert r.bound == 4.0 and r.admissible
    assert close(r.bound, mp_lmc1(2, 1, 1, 4, mp(0.25), 0))
    far = B.lmc_bound_case1(2.0, 1.0, 1.0, 4, 0.25, 10 ** 6)
    assert far.decay == 0.0 and far.bound == far.bias == 2.0
    tiny = B.lmc_bound_case1(2.0, 1.0, 1.0, 4, 1e-30, 3)
    assert tiny.bound == pytest.approx(2.0, rel=1e-12)
    assert not B.lmc_bound_case1(1.0, 1.0, 2.0, 1, 0.6, 0).admissible
    with pytest.raises(B.BoundError):
        B.lmc_bound_case1(1.0, 0.0, 1.0, 1, 0.1, 0)


def test_lmc_case2_examples():
    r = B.lmc_bound_case2(1.0, 1.0, 1.0, 0.0, 1, 0.5, 0)
    assert r.bound == 2.5 and r.admissible
    assert close(r.bound, mp_lmc2(1, 1, 1, 0, 1, mp(0.5), 0))
    a = B.lmc_bound_case2(1.0, 1.0, 2.0, 0.3, 5, 0.1, 7)
    b = B.lmc_bound_case2(1.0, 1.0, 2.0, 0.3, 5, 0.2, 7)
    assert b.bias == pytest.approx(2 * a.bias, rel=1e-15)
    # the admissible region is open at 2/(mu+L)
    assert not B.lmc_bound_case2(1.0, 1.0, 1.0, 0.0, 1, 1.0, 0).admissible


def test_rclmc_case1_examples():
    r = B.rclmc_bound_case1(1.0, 1.0, 1.0 / 16, 0, [1.0, 1.0], [0.5, 0.5])
    assert r.bound == 3.5 and r.admissible
    assert close(r.bound, mp_rc1(1, 1, mp(1) / 16, 0, [1, 1], [0.5, 0.5]))
    a = B.rclmc_bound_case1(1.0, 1.0, 0.01, 3, [1.0, 2.0], [0.4, 0.6])
    b = B.rclmc_bound_case1(1.0, 1.0, 0.04, 3, [1.0, 2.0], [0.4, 0.6])
    assert b.bias == pytest.approx(2 * a.bias, rel=1e-15)
    with pytest.raises(B.BoundError):
        B.rclmc_bound_case1(1.0, 1.0, 0.01, 0, [1.0, 2.0], [1.0])
    with pytest.raises(B.BoundError):
        B.rclmc_bound_case1(1.0, 1.0, 0.01, 0, [1.0, 2.0], [0.7, 0.7])


def test_rclmc_case2_examples():
    r = B.rclmc_bound_case2(0.0, 1.0, 0.01, 0, [1.0, 1.0], [0.0, 0.0], [0.5, 0.5])
    assert r.bound == pytest.approx(0.03 * math.sqrt(8), rel=1e-15)
    assert r.bound == pytest.approx(0.084853, abs=5e-7)
    assert close(r.bound, mp_rc2(0, 1, mp("0.01"), 0, [1, 1], [0, 0], [0.5, 0.5]))
    a = B.rclmc_bound_case2(1.0, 1.0, 0.01, 5, [1.0, 2.0], [0.5, 0.1], [0.3, 0.7])
    b = B.rclmc_bound_case2(1.0, 1.0, 0.02, 5, [1.0, 2.0], [0.5, 0.1], [0.3, 0.7])
    assert b.bias == pytest.approx(2 * a.bias, rel=1e-15)


def test_rclmc_case2_uniform_unit_constants():
    for d in (1, 4, 50):
        h = 1e-3
        r = B.rclmc_bound_case2(0.0, 1.0, h, 0, np.ones(d), np.zeros(d), np.full(d, 1 / d))
        exact = 3 * mp(h) * mpmath.sqrt(mp(d) * mp(d) ** 2)
        assert close(r.bias, exact)


def test_report_json_keys():
    r = B.rclmc_bound_case1(1.0, 1.0, 0.5, 0, [1.0, 1.0], [0.5, 0.5])
    d = json.loads(r.to_json())
    assert set(d) == {"bound", "decay", "bias", "admissible", "violated", "inputs"}
    assert d["admissible"] is False and "min(phi)" in d["violated"]
    assert r.bound == r.decay + r.bias


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 10), st.floats(0.1, 5), st.floats(1e-5, 0.5), st.integers(1, 50))
def test_bounds_monotone_in_m(W0, mu, h, d):
    L = np.linspace(mu, 3 * mu, d)
    phi = np.full(d, 1 / d)
    prev = None
    for m in (0, 1, 2, 5, 10, 100, 1000, 10 ** 5):
        reports = [B.lmc_bound_case1(W0, mu, 3 * mu, d, h, m),
                   B.lmc_bound_case2(W0, mu, 3 * mu, 0.5, d, h, m),
                   B.rclmc_bound_case1(W0, mu, h, m, L, phi),
                   B.rclmc_bound_case2(W0, mu, h, m, L, 0.1 * L, phi)]
        vals = [r.bound for r in reports]
        if prev is not None:
            assert all(v <= p * (1 + 1e-15) for v, p in zip(vals, prev[0]))
            assert [r.bias for r in reports] == prev[1]
        prev = (vals, [r.bias for r in reports])


# -- stopping rules ------------------------------------------------------------

def test_rclmc_stopping1_unit_constants():
    d, eps, W0 = 6, 0.05, 3.0
    plan = B.rclmc_stopping_case1(eps, W0, 1.0, 1.0, np.ones(d), alpha=1.0)
    assert plan.h == pytest.approx(eps ** 2 / (100 * d ** 2), rel=1e-14)
    M_exact = mpmath.ceil(4 / (mp(plan.h)) * mpmath.log(2 * mp(W0) / eps))
    assert plan.M == int(M_exact)
    rep = B.rclmc_bound_case1(W0, 1.0, plan.h, 0, np.ones(d), plan.phi)
    assert rep.bias == pytest.approx(eps / 2, rel=1e-12)


def test_rclmc_stopping1_alpha_one_beats_uniform():
    L = np.array([10.0] + [1.0] * 9)
    a1 = B.rclmc_stopping_case1(1e-3, 1.0, 1.0, 10.0, L, alpha=1.0)
    a0 = B.rclmc_stopping_case1(1e-3, 1.0, 1.0, 10.0, L, alpha=0.0)
    assert a1.M <= a0.M


def test_rclmc_stopping1_eps_scaling():
    L = np.ones(4)
    a = B.rclmc_stopping_case1(1e-3, 1.0, 1.0, 1.0, L)
    b = B.rclmc_stopping_case1(5e-4, 1.0, 1.0, 1.0, L)
    assert b.h == pytest.approx(a.h / 4, rel=1e-14)
    assert not a.capped and not b.capped
    ratio = b.M / a.M
    assert 4.0 < ratio < 4.6  # log factor grows slightly


def test_rclmc_stopping_within_tolerance():
    plan = B.rclmc_stopping_case1(5.0, 1.0, 1.0, 1.0, np.ones(3))
    assert plan.M == 0 and "within tolerance" in plan.note


def test_rclmc_stopping2_examples():
    d, eps = 8, 1e-3
    plan = B.rclmc_stopping_case2(eps, 1.0, 1.0, np.ones(d), np.zeros(d))
    assert np.allclose(plan.phi, 1 / d)
    assert np.allclose(plan.phi, B.phi_alpha(np.ones(d), 1, 1).probs)
    exact_h = mp(eps) / (6 * mpmath.sqrt(mp(d) ** 3))
    assert close(plan.h, exact_h)
    rep = B.rclmc_bound_case2(1.0, 1.0, plan.h, 0, np.ones(d), np.zeros(d), plan.phi)
    assert rep.bias == pytest.approx(eps / 2, rel=1e-12)
    half = B.rclmc_stopping_case2(eps / 2, 1.0, 1.0, np.ones(d), np.zeros(d))
    assert half.h == pytest.approx(plan.h / 2, rel=1e-14)
    assert 2.0 < half.M / plan.M < 2.2
    # M grows as d^{3/2} / eps up to the log factor
    big = B.rclmc_stopping_case2(eps, 1.0, 1.0, np.ones(4 * d), np.zeros(4 * d))
    assert big.M / plan.M == pytest.approx(8.0, rel=1e-3)


def test_h_zero_hessian_opt_is_alpha_one():
    L = np.array([1.0, 3.0, 0.5])
    plan = B.rclmc_stopping_case2(0.1, 1.0, 0.5, L, np.zeros(3), L_global=3.0)
    assert np.allclose(plan.phi, B.phi_alpha(L, 1.0, 1.0).probs, rtol=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-4, 1.0), st.floats(0.01, 10), st.floats(0.2, 5),
       st.lists(st.floats(0.2, 5), min_size=1, max_size=8), st.floats(-1, 2))
def test_stopping_self_consistency(eps, W0, mu, L, alpha):
    L = np.maximum(np.asarray(L), mu)
    lg = float(L.max())
    p1 = B.rclmc_stopping_case1(eps, W0, mu, lg, L, alpha)
    r1 = B.rclmc_bound_case1(W0, mu, p1.h, p1.M, L, p1.phi, lips_global=lg)
    p2 = B.rclmc_stopping_case2(eps, W0, mu, L, 0.3 * L, L_global=lg)
    r2 = B.rclmc_bound_case2(W0, mu, p2.h, p2.M, L, 0.3 * L, p2.phi, lips_global=lg)
    q1 = B.lmc_stopping_case1(eps, W0, mu, lg, L.size)
    s1 = B.lmc_bound_case1(W0, mu, lg, L.size, q1.h, q1.M)
    q2 = B.lmc_stopping_case2(eps, W0, mu, lg, 0.5, L.size)
    s2 = B.lmc_bound_case2(W0, mu, lg, 0.5, L.size, q2.h, q2.M)
    for plan, rep in ((p1, r1), (p2, r2), (q1, s1), (q2, s2)):
        assert rep.admissible
        if not plan.capped:
            assert rep.bound <= eps * (1 + 1e-9)
        else:
            assert rep.bias <= eps


def test_lmc_stopping_examples():
    p = B.lmc_stopping_case1(0.1, 1.0, 1.0, 1.0, 1)
    assert p.h == pytest.approx(6.25e-4, rel=1e-15)
    assert p.M == int(mpmath.ceil(2 / (mp(1) * mp(p.h)) * mpmath.log(20)))
    assert B.lmc_stopping_case1(3.0, 1.0, 1.0, 1.0, 1).M == 0
    a = B.lmc_stopping_case2(1e-3, 1.0, 1.0, 1.0, 0.0, 100)
    b = B.lmc_stopping_case2(5e-4, 1.0, 1.0, 1.0, 0.0, 100)
    assert b.h == pytest.approx(a.h / 2, rel=1e-14)
    assert b.M / a.M == pytest.approx(2 * math.log(6000) / math.log(3000), rel=1e-5)
    assert B.lmc_stopping_case2(3.0, 1.0, 1.0, 1.0, 0.0, 1).M == 0


def test_lmc_stopping2_independent_evaluation():
    eps, W0, mu, L, H, d = mp("0.01"), mp(2), mp("0.5"), mp(2), mp("0.7"), 30
    k = L / mu
    h = min(2 * mu * eps / (3 * H * d), eps / (9 * k ** mpmath.mpf(1.5) * mpmath.sqrt(mu)
                                               * mpmath.sqrt(d)))
    plan = B.lmc_stopping_case2(0.01, 2.0, 0.5, 2.0, 0.7, 30)
    assert close(plan.h, h)
    assert plan.M == int(mpmath.ceil(mpmath.log(3 * W0 / eps) / (mu * mp(plan.h))))


def test_lmc_stopping_caps():
    p = B.lmc_stopping_case1(10.0, 100.0, 1.0, 2.0, 1)
    assert p.capped and p.h == 0.5
    q = B.lmc_stopping_case2(10.0, 100.0, 1.0, 1.0, 0.0, 1)
    assert q.capped and q.h < 1.0
    assert B.lmc_bound_case2(100.0, 1.0, 1.0, 0.0, 1, q.h, q.M).admissible


# -- other formulas ------------------------------------------------------------

def test_isotropic_w2_lower_bound():
    v = B.isotropic_w2_lower_bound(4, 0.1, 5)
    exact = mpmath.exp(-1) * 2 / 3 + mp("0.8") / 6
    assert close(v, exact)
    assert v == pytest.approx(0.378586, abs=5e-7)
    assert B.isotropic_w2_lower_bound(9, 1e-12, 3) == pytest.approx(1.0, rel=1e-10)
    a, b = B.isotropic_w2_lower_bound(4, 0.1, 10 ** 4), B.isotropic_w2_lower_bound(4, 0.1, 10 ** 5)
    assert a == b == pytest.approx(4 ** 1.5 * 0.1 / 6)
    with pytest.raises(B.BoundError):
        B.isotropic_w2_lower_bound(4, 0.3, 1)


def test_moment_recursion():
    assert B.moment_recursion(2, 0.1, 1, 6.0) == pytest.approx(5.32, rel=1e-14)
    assert B.moment_fixed_point(50, 1e-12) == pytest.approx(50, rel=1e-10)
    assert B.moment_recursion(10, 0.01, 10 ** 6, 3.0) == pytest.approx(20 / (2 - 0.1), rel=1e-14)
    # direct iteration oracle
    e = mp(7)
    for _ in range(30):
        e = (1 - 2 * mp("0.02") + 5 * mp("0.02") ** 2) * e + 2 * 5 * mp("0.02")
    assert close(B.moment_recursion(5, 0.02, 30, 7.0), e) or \
        B.moment_recursion(5, 0.02, 30, 7.0) == pytest.approx(float(e), rel=1e-13)
    with pytest.raises(B.BoundError):
        B.moment_recursion(10, 0.2, 1, 1.0)


def test_coordinate_moments_reduce_to_recursion():
    d, h = 6, 0.01
    second, mean = B.coordinate_moments(np.full(d, 3.0), np.ones(d), np.ones(d),
                                        np.full(d, 1 / d), h, 40)
    assert second.sum() == pytest.approx(B.moment_recursion(d, h, 40, 3.0 * d), rel=1e-12)
    assert np.allclose(mean, (1 - h) ** 40)


def test_sde_step_admissible():
    assert B.sde_step_admissible(1.0, 1.0, 1.0, 1 / 44)
    assert B.sde_step_admissible(1.0, 1.0, 1.0, 0.0)
    assert not B.sde_step_admissible(1.0, 1.0, 1.0, 1 / 44 + 1e-9)


def test_condition_numbers():
    c = B.condition_numbers(2.0, 6.0, [2.0, 4.0, 6.0])
    assert c.kappa == 3 and c.kappa_i.tolist() == [1, 2, 3] and c.kappa_max == 3
    assert c.consistent
    diag = B.condition_numbers(1.0, 5.0, [1.0, 5.0, 2.0])
    assert diag.kappa_max == diag.kappa
    rank_one = B.condition_numbers(1e-3, 3.0, [1.0, 1.0, 1.0])
    assert rank_one.consistent and rank_one.kappa == pytest.approx(3 * rank_one.kappa_max)
    bad = B.condition_numbers(1.0, 10.0, [1.0, 1.0])
    assert not bad.consistent and bad.note == "inconsistent-constants"


def test_holder_equality_at_one():
    k = np.array([1.0, 4.0, 9.0])
    assert B.holder_product(k, 1.0) == pytest.approx(k.sum() ** 2, rel=1e-15)
    assert B.holder_product(k, 0.0) > B.holder_product(k, 1.0)
