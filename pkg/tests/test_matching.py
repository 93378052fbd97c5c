import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twotimescale import _backend
from twotimescale.config import default_config
from twotimescale.matching import (best_assignment, blocking_pairs, build_preferences,
                                   check_c12, default_delta_lambda, delay_residual,
                                   delay_to_rate, enforce_energy_causality, evaluate_pairs,
                                   match, optimal_power, pair_utility, random_assignment,
                                   round_limit, welfare)

CFG = default_config()
NOISE, PMAX = CFG.noise, CFG.p_max
H0 = 10 ** (-CFG.pathloss_db[0] / 10)


# --- delay target ----------------------------------------------------------------

def test_delay_target_zero_rate():
    assert delay_to_rate(0.0, 1e-5) == 0.0


def test_delay_target_golden_ratio():
    assert delay_to_rate(1.0, 1.0) == pytest.approx((1 + 5 ** 0.5) / 2, rel=1e-15)


@given(st.floats(0, 1e8, allow_subnormal=False), st.floats(1e-7, 1.0))
def test_delay_target_is_root(r, d):
    v = delay_to_rate(r, d)
    assert v >= r
    scale = max(1.0, d * v * v, r)
    assert abs(delay_residual(v, r, d)) <= 1e-9 * scale


def test_delay_target_rejects_nonpositive_deadline():
    with pytest.raises(ValueError):
        delay_to_rate(1.0, 0.0)


def test_c12_flags():
    r = np.array([1.0, 2.0])
    target = delay_to_rate(r * 1e6, 1e-5) / 1e6
    assert check_c12(target, r, 1e-5).tolist() == [True, True]
    assert check_c12([0.0, 5.0], r, 1e-5).tolist() == [False, True]


# --- power ---------------------------------------------------------------------------

def test_power_lower_clamp():
    assert optimal_power(0.0, 2.0, 1.0, H0, NOISE, 1.0, PMAX) == 0.0


def test_power_upper_clamp():
    assert optimal_power(50.0, 0.1, 1.0, H0, NOISE, 1.0, PMAX) == PMAX


def test_power_full_battery_uses_budget():
    assert optimal_power(1.0, 0.0, 1.0, H0, NOISE, 1.0, PMAX) == PMAX


def test_power_frozen_interior_value():
    # Q=1, headroom=3, W=1, h=1e-10: 1/(3 ln2) - 1e-3
    p = optimal_power(1.0, 3.0, 1.0, 1e-10, 1e-13, 1.0, 1.0)
    assert p == pytest.approx(1 / (3 * math.log(2)) - 1e-3, rel=1e-12)


def test_power_matches_dense_grid():
    rng = np.random.default_rng(2)
    for _ in range(30):
        Q, head, h = rng.uniform(0, 4), rng.uniform(0.1, 5), rng.exponential() * H0
        p = optimal_power(Q, head, 1.0, h, NOISE, 1.0, PMAX)
        grid = np.linspace(0, PMAX, 1_000_001)
        vals = pair_utility(Q, head, 1.0, h, NOISE, 1.0, grid)
        assert pair_utility(Q, head, 1.0, h, NOISE, 1.0, p) >= vals.max() - 1e-12
        assert abs(grid[vals.argmax()] - p) <= 2e-6 or p in (0.0, PMAX)


@given(st.floats(0, 10), st.floats(0.01, 5), st.floats(0.1, 10), st.floats(1.0, 3.0))
def test_power_comparative_statics(Q, head, hs, k):
    h = hs * H0
    p = optimal_power(Q, head, 1.0, h, NOISE, 1.0, PMAX)
    assert optimal_power(Q * k, head, 1.0, h, NOISE, 1.0, PMAX) >= p
    assert optimal_power(Q, head * k, 1.0, h, NOISE, 1.0, PMAX) <= p
    # larger noise-to-gain ratio never raises power
    assert optimal_power(Q, head, 1.0, h / k, NOISE, 1.0, PMAX) <= p


def test_pair_utility_examples():
    assert pair_utility(3.0, 2.0, 1.0, H0, NOISE, 1.0, 0.0) == 0.0
    ps = np.linspace(0, 1, 50)
    vals = pair_utility(3.0, 0.0, 1.0, H0, NOISE, 1.0, ps)
    assert np.all(np.diff(vals) > 0)
    # SNR 3 at p=1 -> log2(4) = 2
    assert pair_utility(1.0, 0.0, 1.0, 3e-13, 1e-13, 1.0, 1.0) == pytest.approx(2.0)


def test_power_bounds_on_evaluated_pairs():
    rng = np.random.default_rng(0)
    ev = evaluate_pairs(rng.uniform(0, 30, 5), 2.5, rng.exponential(1, (5, 12)) * H0,
                        np.ones(12), NOISE, 1.0, PMAX)
    assert np.all((ev.power >= 0) & (ev.power <= PMAX))
    assert np.array_equal(ev.preference, ev.utility)
    prices = rng.uniform(0, 1, 12)
    assert np.array_equal(ev.with_prices(prices).preference, ev.utility - prices)


# --- preferences ------------------------------------------------------------------------

def _pairs(gains, Q=None, head=2.0):
    gains = np.asarray(gains, dtype=float)
    Q = np.full(gains.shape[0], 3.0) if Q is None else Q
    return evaluate_pairs(Q, head, gains, np.ones(gains.shape[1]), NOISE, 1.0, PMAX)


def test_better_gain_ranked_first():
    ev = _pairs([[H0, 2 * H0]])
    assert build_preferences(0, np.zeros(2), ev) == [1, 0]


def test_price_rise_swaps_order():
    ev = _pairs([[H0, 2 * H0]])
    gap = ev.utility[0, 1] - ev.utility[0, 0]
    assert build_preferences(0, np.array([0.0, gap * 1.01]), ev) == [0, 1]


def test_ties_broken_by_index():
    ev = _pairs([[H0, H0, H0]])
    assert build_preferences(0, np.zeros(3), ev) == [0, 1, 2]


def test_preferences_match_recomputation():
    rng = np.random.default_rng(4)
    gains = rng.exponential(1, (5, 12)) * H0
    Q = rng.uniform(0, 20, 5)
    ev = _pairs(gains, Q)
    prices = rng.uniform(0, 5, 12)
    for n in range(5):
        F = []
        for k in range(12):
            p = optimal_power(Q[n], 2.0, 1.0, gains[n, k], NOISE, 1.0, PMAX)
            F.append(pair_utility(Q[n], 2.0, 1.0, gains[n, k], NOISE, 1.0, p) - prices[k])
        expect = sorted(range(12), key=lambda k: (-F[k], k))
        assert build_preferences(n, prices, ev) == expect
        assert build_preferences(n, prices, ev, acceptable_only=True) == [k for k in expect if F[k] > 0]


# --- matching ------------------------------------------------------------------------------

def test_single_device_takes_everything():
    f = np.array([[3.0, 1.0, 2.0, 0.5]])
    m = match(f, q=4)
    assert m.assignment[0] == frozenset({0, 1, 2, 3}) and m.rounds == 1


def test_two_devices_one_channel_higher_value_wins():
    m = match(np.array([[5.0], [3.0]]), q=1, delta_lambda=0.1)
    assert m.channel_owner.tolist() == [0]
    assert 3.0 <= m.prices[0] < 3.0 + 0.1 + 1e-9


def test_unacceptable_channels_left_unassigned():
    m = match(np.array([[-1.0, 2.0]]), q=2)
    assert m.channel_owner.tolist() == [-1, 0]
    assert m.unmatched == []
    m = match(np.array([[-1.0, -2.0], [1.0, -1.0]]), q=1)
    assert m.unmatched == [0]


def test_small_instances_near_optimal():
    rng = np.random.default_rng(11)
    for _ in range(200):
        f = rng.normal(1, 1, (2, 3))
        m = match(f, q=1)
        assert not blocking_pairs(m, f, 1)
        opt, _ = best_assignment(f, 1)
        assert welfare(f, m.x) >= opt - m.delta_lambda * m.rises - 1e-12


def test_quota_and_uniqueness_every_round():
    rng = np.random.default_rng(6)
    for _ in range(100):
        N, K, q = rng.integers(2, 7), rng.integers(2, 12), rng.integers(1, 4)
        f = rng.normal(1, 1, (N, K))
        m = match(f, int(q), trace=True)
        assert m.history
        for owner in m.history:
            loads = np.bincount(owner[owner >= 0], minlength=N)
            assert loads.max(initial=0) <= q
        assert np.array_equal(m.history[-1], m.channel_owner)


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 8), st.integers(2, 16), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_stable_and_bounded(N, K, q, seed):
    rng = np.random.default_rng(seed)
    f = rng.normal(1.0, 1.0, (N, K))
    m = match(f, q)
    m.check(q)
    assert blocking_pairs(m, f, q) == []
    assert m.rounds <= round_limit(f, m.delta_lambda)
    # devices short of quota have no acceptable unclaimed channel left
    F = f - m.prices
    for n, held in enumerate(m.assignment):
        if len(held) < q:
            free = m.channel_owner < 0
            assert not np.any(F[n, free] > 0)


def test_default_price_step():
    assert default_delta_lambda(np.array([[1.0, -3.0, 2.0]])) == pytest.approx(0.02)
    assert default_delta_lambda(np.array([[0.0, 0.0, 4.0]])) == pytest.approx(0.04)
    assert default_delta_lambda(np.zeros((2, 2))) == 1.0


def test_backends_agree_on_auction():
    rng = np.random.default_rng(9)
    for _ in range(50):
        f = rng.normal(1, 1, (rng.integers(2, 8), rng.integers(2, 14)))
        a = _backend.kernels.price_auction(f, 2, 0.05, 10**6)
        b = _backend.pure.price_auction(f, 2, 0.05, 10**6)
        assert np.array_equal(a[0], b[0]) and np.allclose(a[1], b[1]) and a[2:] == b[2:]


def test_random_assignment_feasible():
    rng = np.random.default_rng(1)
    for q in (1, 3):
        m = random_assignment(5, 12, q, rng)
        m.check(q)
        assert (m.channel_owner >= 0).sum() == min(12, 5 * q)


# --- energy repair -----------------------------------------------------------------------------

def test_energy_repair_identity():
    p = np.array([0.2, 0.3])
    out, scaled = enforce_energy_causality(p, 1.0)
    assert np.array_equal(out, p) and not scaled


def test_energy_repair_halves():
    p = np.array([0.5, 1.5])
    out, scaled = enforce_energy_causality(p, 1.0)
    assert np.allclose(out, p / 2) and scaled


def test_energy_repair_empty_battery():
    out, _ = enforce_energy_causality(np.array([0.5, 1.0]), 0.0)
    assert np.all(out == 0)
