import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from satabr.abr import (
    AbrInputs,
    AbrKind,
    AbrParams,
    EmptyHistory,
    apply_scalars,
    bba_select,
    bola_select,
    bola_v_for_top,
    dynamic_mode,
    dynamic_select,
    harmonic_mean,
    mpc_throughput_estimate,
    rate_select,
    robust_mpc_select,
    select_bitrate,
)
from satabr.player import DEFAULT_LADDER_KBPS as LADDER, QoEParams, quality

DEFAULTS = AbrParams()


def inputs(buffer_s=2.0, xi=8000.0, history=(8000.0,) * 5, prev=1000.0, ladder=LADDER, **kw):
    return AbrInputs(buffer_s, xi, tuple(history), prev, tuple(ladder), **kw)


# --- scalars ---------------------------------------------------------------

@pytest.mark.parametrize("kind", list(AbrKind))
def test_unit_scalars_are_identity(kind):
    x = inputs(buffer_s=3.3, xi=4321.0)
    assert apply_scalars(x, 1.0, 1.0, kind) == x


def test_bba_scales_buffer_only():
    y = apply_scalars(inputs(buffer_s=4.0, xi=8000.0), 0.5, 0.3, AbrKind.BBA)
    assert (y.buffer_s, y.throughput_kbps, y.rate_scale) == (2.0, 8000.0, 1.0)


def test_rate_scales_throughput_only():
    y = apply_scalars(inputs(buffer_s=4.0, xi=8000.0), 0.5, 0.25, AbrKind.RATE)
    assert (y.buffer_s, y.throughput_kbps) == (4.0, 2000.0)


def test_hybrid_scales_both_history_raw():
    x = inputs(buffer_s=4.0, xi=8000.0, history=(7000.0, 9000.0))
    y = apply_scalars(x, 0.5, 0.25, AbrKind.ROBUST_MPC)
    assert (y.buffer_s, y.throughput_kbps, y.rate_scale) == (2.0, 2000.0, 0.25)
    assert y.throughput_history == x.throughput_history


def test_scalar_range_checked():
    with pytest.raises(ValueError):
        apply_scalars(inputs(), 1.2, 1.0, AbrKind.BBA)


@given(s=st.floats(0, 1), t=st.floats(0, 1), buf=st.floats(0, 20), xi=st.floats(1, 1e5),
       kind=st.sampled_from(list(AbrKind)))
def test_scalars_multiplicative(s, t, buf, xi, kind):
    x = inputs(buffer_s=buf, xi=xi)
    two = apply_scalars(apply_scalars(x, s, s, kind), t, t, kind)
    one = apply_scalars(x, s * t, s * t, kind)
    assert two.buffer_s == pytest.approx(one.buffer_s, rel=1e-12, abs=1e-300)
    assert two.throughput_kbps == pytest.approx(one.throughput_kbps, rel=1e-12, abs=1e-300)
    assert two.rate_scale == pytest.approx(one.rate_scale, rel=1e-12, abs=1e-300)


@given(buf=st.floats(0, 50), xi=st.floats(1, 1e6))
def test_zero_scalars_force_lowest(buf, xi):
    x = inputs(buffer_s=buf, xi=xi)
    assert bba_select(apply_scalars(x, 0.0, 1.0, AbrKind.BBA)) == LADDER[0]
    assert rate_select(apply_scalars(x, 1.0, 0.0, AbrKind.RATE)) == LADDER[0]


def test_inputs_validation():
    with pytest.raises(EmptyHistory):
        inputs(history=())
    with pytest.raises(ValueError):
        inputs(buffer_s=-1.0)


# --- BBA -------------------------------------------------------------------

def test_bba_examples():
    assert bba_select(inputs(buffer_s=0.5), 1.0, 2.0) == 1000.0
    assert bba_select(inputs(buffer_s=3.0), 1.0, 2.0) == 8000.0
    assert bba_select(inputs(buffer_s=2.0), 1.0, 2.0) == 2500.0  # map gives 4500


@given(buf=st.floats(0, 10))
def test_bba_matches_linear_map(buf):
    got = bba_select(inputs(buffer_s=buf), 1.0, 2.0)
    if buf <= 1.0:
        want = 1000.0
    elif buf >= 3.0:
        want = 8000.0
    else:
        target = 1000.0 + 7000.0 * (buf - 1.0) / 2.0
        want = max(b for b in LADDER if b <= target)
    assert got == want


# --- BOLA ------------------------------------------------------------------

def bola_oracle(buf, V, gp, ladder=LADDER, alpha=0.5):
    Q = buf / alpha
    objs = [(V * (math.log(b / ladder[0]) + gp * alpha) - Q) / (b * alpha) for b in ladder]
    if max(objs) < 0:
        return ladder[0]
    best = max(objs)
    return max(b for b, o in zip(ladder, objs) if o == best)


def test_bola_empty_buffer_picks_lowest():
    assert bola_select(inputs(buffer_s=0.0)) == 1000.0
    assert bola_oracle(0.0, DEFAULTS.bola_v, DEFAULTS.bola_gamma_p) == 1000.0


def test_bola_top_at_design_buffer():
    assert bola_select(inputs(buffer_s=2.5)) == 8000.0
    assert bola_select(inputs(buffer_s=2.49)) == 5000.0


def test_bola_no_pressure_returns_lowest():
    V, gp = DEFAULTS.bola_v, DEFAULTS.bola_gamma_p
    q_cut = V * (math.log(8.0) + gp * 0.5)
    assert bola_select(inputs(buffer_s=(q_cut + 0.01) * 0.5)) == 1000.0


def test_bola_v_derivation_crossing():
    V = bola_v_for_top(2.0, 1.0)
    assert bola_oracle(1.999, V, 1.0) == 5000.0
    assert bola_oracle(2.001, V, 1.0) == 8000.0


@given(buf=st.floats(0, 8), V=st.floats(0.1, 5), gp=st.floats(0.1, 5))
def test_bola_matches_oracle(buf, V, gp):
    assert bola_select(inputs(buffer_s=buf), V, gp) == bola_oracle(buf, V, gp)


def test_bola_monotone_sweep_below_no_pressure():
    V, gp = DEFAULTS.bola_v, DEFAULTS.bola_gamma_p
    top = 0.5 * V * (math.log(8.0) + gp * 0.5)
    picks = [bola_select(inputs(buffer_s=b)) for b in np.linspace(0.0, top, 2001)]
    assert all(b2 >= b1 for b1, b2 in zip(picks, picks[1:]))
    assert picks[0] == 1000.0 and picks[-1] == 8000.0


# --- throughput rules ------------------------------------------------------

def test_harmonic_mean():
    assert harmonic_mean([4000.0, 8000.0]) == pytest.approx(5333.333333, rel=1e-9)
    assert harmonic_mean([700.0] * 6) == pytest.approx(700.0)
    assert harmonic_mean([1000.0, 1000.0, 4000.0]) == pytest.approx(1333.333333, rel=1e-9)
    with pytest.raises(EmptyHistory):
        harmonic_mean([])


def test_mpc_estimate_discount():
    # steady history: no error, estimate equals the harmonic mean
    assert mpc_throughput_estimate([5000.0] * 8) == pytest.approx(5000.0)
    # the last sample doubles: predictor said 5000, error 0.5 -> 1/(1.5) discount
    hist = [5000.0] * 5 + [10000.0]
    hm = 5.0 / (4.0 / 5000.0 + 1.0 / 10000.0)
    assert mpc_throughput_estimate(hist) == pytest.approx(hm / 1.5)


def test_rate_examples():
    assert rate_select(inputs(xi=6000.0), 0.9) == 5000.0
    assert rate_select(inputs(xi=500.0), 0.9) == 1000.0
    assert rate_select(inputs(xi=9000.0), 1.0) == 8000.0


# --- RobustMPC -------------------------------------------------------------

def mpc_oracle(buf, xi, ladder, prev, qoe, horizon, alpha=0.5):
    """Plain enumeration; first maximal sequence in lexicographic order wins."""
    q = [quality(qoe, ladder, b) for b in ladder]
    best, best_first = -math.inf, None
    for seq in itertools.product(range(len(ladder)), repeat=horizon):
        b, last, total = buf, quality(qoe, ladder, prev), 0.0
        for m in seq:
            dt = ladder[m] * alpha / xi
            rb = max(dt - b, 0.0)
            b = max(b - dt, 0.0) + alpha
            total += q[m] - qoe.omega * rb - qoe.rho * abs(q[m] - last)
            last = q[m]
        if total > best:
            best, best_first = total, seq[0]
    return ladder[best_first]


def test_mpc_single_rung():
    x = inputs(ladder=(3000.0,), prev=3000.0, buffer_s=0.1, xi=100.0, history=(100.0,) * 5)
    assert robust_mpc_select(x, horizon=3) == 3000.0


def test_mpc_horizon_one_ample_buffer():
    x = inputs(buffer_s=10.0, history=(8000.0,) * 5, prev=8000.0)
    assert robust_mpc_select(x, horizon=1) == 8000.0


@pytest.mark.parametrize("seed", range(40))
def test_mpc_matches_enumeration(seed):
    r = np.random.default_rng(seed)
    ladder = tuple(sorted(r.choice(np.arange(500.0, 10001.0, 500.0), 3, replace=False)))
    qoe = QoEParams.linear() if seed % 2 else QoEParams.log()
    hist = tuple(r.uniform(300.0, 12000.0, 6))
    x = inputs(buffer_s=float(r.uniform(0, 4)), history=hist, prev=float(r.choice(ladder)), ladder=ladder)
    est = mpc_throughput_estimate(hist)
    assert robust_mpc_select(x, 3, qoe) == mpc_oracle(x.buffer_s, est, ladder, x.prev_bitrate_kbps, qoe, 3)


def test_mpc_horizon_five_matches_enumeration():
    r = np.random.default_rng(5)
    for _ in range(10):
        hist = tuple(r.uniform(500.0, 12000.0, 5))
        x = inputs(buffer_s=float(r.uniform(0, 4)), history=hist, prev=float(r.choice(LADDER)))
        est = mpc_throughput_estimate(hist)
        assert robust_mpc_select(x, 5) == mpc_oracle(x.buffer_s, est, LADDER, x.prev_bitrate_kbps, QoEParams(), 5)


def test_mpc_zero_throughput_scale():
    x = apply_scalars(inputs(buffer_s=3.0), 1.0, 0.0, AbrKind.ROBUST_MPC)
    assert robust_mpc_select(x) == 1000.0


# --- Dynamic ---------------------------------------------------------------

def test_dynamic_paths():
    assert dynamic_mode(0.2, 1.5) == "rate"
    assert dynamic_mode(2.5, 1.5) == "bola"
    x = inputs(buffer_s=0.2, xi=6000.0)
    assert dynamic_select(x, 1.5) == rate_select(x)
    y = inputs(buffer_s=2.5)
    assert dynamic_select(y, 1.5) == bola_select(y)


def test_dynamic_hysteresis():
    switch = 1.5
    mode = None
    seen = []
    for i in range(200):
        buf = switch * (1.01 if i % 2 == 0 else 0.99)
        mode = dynamic_mode(buf, switch, mode)
        seen.append(mode)
    assert len(set(seen)) == 1
    # leaving the band does switch
    assert dynamic_mode(0.9 * switch - 1e-9, switch, "bola") == "rate"
    assert dynamic_mode(1.1 * switch, switch, "rate") == "bola"


# --- totality --------------------------------------------------------------

@given(kind=st.sampled_from(list(AbrKind)), buf=st.floats(0, 30), xi=st.floats(1e-3, 1e6),
       hist=st.lists(st.floats(1.0, 1e6), min_size=1, max_size=8), prev=st.sampled_from(LADDER),
       mode=st.sampled_from([None, "bola", "rate"]))
def test_selectors_total(kind, buf, xi, hist, prev, mode):
    x = inputs(buffer_s=buf, xi=xi, history=hist, prev=prev)
    assert select_bitrate(kind, x, DEFAULTS, QoEParams(), mode) in LADDER
