import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from atomsim.dynamics import AtomState, IntegratorOptions, SimParams, Trajectory, integrate
from atomsim.regimes import (REFERENCE_CASES, Regime, TrajectoryFeatures, ballistic_boundary,
                             classify, count_node_crossings, count_reversals, disk_coverage,
                             extract_features, group_parameter_portrait, jump_spread,
                             modulation_period, node_jump_ratio, raw_node_jump_ratio)


def _traj(label, tau=1000.0, dt=0.1):
    delta, p0 = REFERENCE_CASES[label]
    return integrate(AtomState.ground(0.0, p0), SimParams(1e-3, delta), tau, IntegratorOptions(dt=dt))


def _synthetic(x, p):
    n = len(x)
    y = np.zeros((n, 6))
    y[:, 0], y[:, 1], y[:, 2] = x, p, 1.0
    return Trajectory(np.arange(n, dtype=float), y, np.zeros(n), np.ones(n), np.zeros(n),
                      SimParams(1e-3, 0.0), IntegratorOptions())


# ------------------------------------------------------------- counting

@pytest.mark.parametrize("x_end", [0.5, 1.6, 5.0, 30.0, 100.0])
def test_constant_velocity_crossings(x_end):
    x = np.linspace(0.0, x_end, 2000)
    assert count_node_crossings(x) == max(0, math.floor((x_end - math.pi / 2) / math.pi) + 1)


def test_reversals_with_hysteresis():
    assert count_reversals(np.array([1.0, 0.3, -0.3, 0.2, -0.1, 0.4])) == 0
    assert count_reversals(np.array([1.0, 0.3, -0.6, 0.2, 0.7])) == 2
    assert count_reversals(np.array([-2.0, -1.0, 0.0])) == 0


def test_extract_features_rejects_undersampling():
    with pytest.raises(ValueError):
        extract_features(_synthetic([0.0, 4.0], [1.0, 1.0]), 0.0)


def test_features_reference_examples():
    t = extract_features(_traj("T"), 0.0)
    assert t.node_crossings == 0 and t.confined_to_first_well
    rf = extract_features(_traj("RF"), 0.0)
    assert rf.direction_reversals == 0 and rf.node_crossings > 0


# -------------------------------------------------------------- classify

features = st.builds(TrajectoryFeatures, node_crossings=st.integers(0, 200),
                     direction_reversals=st.integers(0, 200), max_excursion=st.floats(0, 1e3),
                     confined_to_first_well=st.booleans(), lambda_=st.floats(0, 0.1))


@given(f=features, thr=st.floats(1e-4, 0.05))
def test_classify_decision_table(f, thr):
    label = classify(f, thr)
    assert label == classify(f, thr)
    chaotic = f.lambda_ > thr
    if f.confined_to_first_well:
        assert label is (Regime.CT if chaotic else Regime.T)
    elif chaotic:
        assert label is (Regime.CW if f.direction_reversals else Regime.CF)
    else:
        assert label is (Regime.RF if f.node_crossings else Regime.T)


# ------------------------------------------------------------- portraits

def test_disk_coverage_extremes():
    assert disk_coverage(np.array([0.0]), np.array([0.0])) == pytest.approx(1 / 7860, rel=0.05)
    r = np.sqrt(np.linspace(0, 1, 400))[:, None]
    th = np.linspace(0, 2 * np.pi, 400)[None, :]
    assert disk_coverage((r * np.cos(th)).ravel(), (r * np.sin(th)).ravel()) > 0.99


@pytest.mark.parametrize("label", list(REFERENCE_CASES))
def test_portraits_nested_inside_disk_and_monotone(label):
    traj = _traj(label)
    ps = group_parameter_portrait(traj, [100, 500, 1000])
    for a, b in zip(ps, ps[1:]):
        assert a.g1.size < b.g1.size
        np.testing.assert_array_equal(b.g1[: a.g1.size], a.g1)
        assert a.coverage <= b.coverage
    assert np.all(ps[-1].g1 ** 2 + ps[-1].g2 ** 2 <= 1 + 1e-9)


def test_portrait_rejects_mark_past_end():
    with pytest.raises(ValueError):
        group_parameter_portrait(_traj("T", tau=100.0), [200])


def test_regular_portraits_have_forbidden_centre():
    """Regular orbits keep away from g = 0; chaotic ones reach it."""
    assert np.abs(_traj("RF").g).min() > 0.3
    assert np.abs(_traj("CW").g).min() < 0.1
    assert np.abs(_traj("CF").g).min() < 0.1


@pytest.mark.xfail(strict=True, reason="the regular-flight orbit fills the annulus 0.35 < |g| < 1 "
                   "(coverage 0.63 vs 0.49 for chaotic walking); see the decision ledger")
def test_regular_flight_covers_less_than_chaotic_walking():
    cov = {k: group_parameter_portrait(_traj(k), [1000])[0].coverage for k in ("RF", "CW")}
    assert cov["RF"] < cov["CW"]


# ------------------------------------------------------- u(tau) structure

def test_modulation_period_synthetic():
    t = np.arange(0, 3000, 0.1)
    u = np.cos(3.0 * t) * (1 + 0.6 * np.cos(2 * np.pi * t / 70.0))
    assert modulation_period(t, u) == pytest.approx(70.0, rel=0.01)


def test_regular_flight_modulation_period():
    traj = _traj("RF")
    assert modulation_period(traj.tau, traj.u) == pytest.approx(math.pi / (1e-3 * 45), rel=0.1)


def test_chaotic_flight_steps_at_nodes():
    cf, rf = _traj("CF", 2000.0), _traj("RF", 2000.0)
    assert node_jump_ratio(cf) > 5.0
    # chaotic steps vary in size, regular ones repeat
    assert jump_spread(cf) > 3 * jump_spread(rf)


@pytest.mark.xfail(strict=True, reason="raw sample differences are dominated by the fast Rabi "
                   "oscillation everywhere (ratio ~1.0); see the decision ledger")
def test_chaotic_flight_raw_sample_jumps_at_nodes():
    assert raw_node_jump_ratio(_traj("CF", 2000.0), window=0.3) > 5.0


def test_ballistic_boundary_coarse_scan():
    boundary, flags = ballistic_boundary(np.arange(36.0, 56.0, 2.0), 0.05, tau_end=4000.0)
    assert 0.9 * 44.7 <= boundary <= 1.1 * 44.7
    assert flags[-1] and not flags[0]
