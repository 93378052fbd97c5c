import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from twotimescale.config import JOULES_PER_KWH, default_config
from twotimescale.energy import d1_value, kappa_regime_ok, schedule_energy

CFG = default_config()
V, T, BETA = CFG.V, CFG.T, CFG.beta
WB = V * T * BETA


def sched(E, phi, eta, kappa=0.0, beta=BETA):
    return schedule_energy(E, phi, eta, CFG.g_max, CFG.E_max, V, T, beta, kappa=kappa)


def test_harvest_limited_by_headroom():
    assert sched(2.0, 10.0, 9.0 / JOULES_PER_KWH).harvested == 3.0


def test_no_harvest_fills_from_grid_when_cheap():
    d = sched(2.0, 0.0, 1e-9)
    assert d.harvested == 0.0
    assert d.psi < 0
    assert d.purchased == min(3.0, CFG.g_max)


def test_no_purchase_at_high_price():
    d = sched(2.0, 0.5, 9.0 / JOULES_PER_KWH)
    assert d.psi >= 0 and d.purchased == 0.0


def test_threshold_branch_exact():
    E = 1.0
    eta_edge = (CFG.E_max - E) / WB  # psi == 0 exactly at this price
    assert sched(E, 0.0, eta_edge).purchased == 0.0
    assert sched(E, 0.0, eta_edge * 0.999).purchased > 0.0


def test_frozen_values():
    # E=2, phi=1, eta=1.8 RMB/kWh: psi = 2.5e6 * 5e-7 - 3 = -1.75 -> buy min(2, 2.5) = 2
    d = sched(2.0, 1.0, 1.8 / JOULES_PER_KWH)
    assert (d.harvested, d.purchased) == (1.0, 2.0)
    assert d.psi == pytest.approx(-1.75)


def test_overfull_battery_rejected():
    with pytest.raises(ValueError):
        sched(5.5, 1.0, 1e-7)


def test_d1_examples():
    assert d1_value(0, 0, 2.0, 1e-7, 0, V, T, BETA, 5.0) == 0.0
    assert d1_value(0, 1.0, 2.0, 1e-7, 0.0, V, T, BETA, 5.0) == -3.0


def test_d1_term_by_term():
    rng = np.random.default_rng(3)
    for _ in range(100):
        E, g, th = rng.uniform(0, 5), rng.uniform(0, 2.5), rng.uniform(0, 2.5)
        eta, kappa = rng.uniform(0, 3e-6, 2)
        head = 5.0 - E
        expect = (WB * eta * g) - head * g + (WB * kappa * th) - head * th
        assert d1_value(g, th, E, eta, kappa, V, T, BETA, 5.0) == pytest.approx(expect)


prices = st.floats(1.8 / JOULES_PER_KWH, 9.0 / JOULES_PER_KWH)


@given(st.floats(0, 5), st.floats(0, 2.5), prices, prices)
def test_harvest_independent_of_grid_price(E, phi, eta1, eta2):
    assert sched(E, phi, eta1).harvested == sched(E, phi, eta2).harvested


@given(st.floats(0, 5), st.floats(0, 2.5), prices, st.floats(0, 1), st.floats(0, 1))
def test_kappa_neutral_in_regime(E, phi, eta, a, b):
    # with headroom above the weighted harvest price, any kappa in [0, eta) gives the same plan
    head = CFG.E_max - E
    k1, k2 = a * eta, b * eta
    assume(kappa_regime_ok(E, max(k1, k2), eta, V, T, BETA, CFG.E_max))
    d1, d2 = sched(E, phi, eta, k1), sched(E, phi, eta, k2)
    assert (d1.harvested, d1.purchased) == (d2.harvested, d2.purchased)
    assert d1.harvested == min(phi, head)


@given(st.floats(0, 5), st.floats(0, 2.5), prices, st.floats(0, 0.999))
def test_plan_feasible_and_optimal_against_vertices(E, phi, eta, frac):
    kappa = frac * eta
    d = sched(E, phi, eta, kappa)
    head = CFG.E_max - E
    assert 0 <= d.harvested <= phi and 0 <= d.purchased <= CFG.g_max
    assert E + d.total <= CFG.E_max + 1e-12
    ours = d1_value(d.purchased, d.harvested, E, eta, kappa, V, T, BETA, CFG.E_max)
    # linear objective over a polygon: compare with every vertex
    th_hi = min(phi, head)
    verts = [(0, 0), (0, th_hi), (min(CFG.g_max, head), 0),
             (min(CFG.g_max, head - th_hi), th_hi)]
    if head - CFG.g_max > 0:
        verts.append((CFG.g_max, min(th_hi, head - CFG.g_max)))
    best = min(d1_value(g, th, E, eta, kappa, V, T, BETA, CFG.E_max) for g, th in verts)
    assert ours <= best + 1e-9


def test_no_purchase_without_cost_weight_only_when_full():
    d = sched(5.0, 1.0, 1e-7, beta=0.0)
    assert d.purchased == 0.0 and d.harvested == 0.0
    d = sched(1.0, 0.0, 1e-7, beta=0.0)
    assert d.purchased == CFG.g_max
