import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from atomsim.dynamics import AtomState, GaussianField, SimParams, integrate
from atomsim.ensemble import (EnsembleSpec, PhysicalSetup, draw_initial, fig10b_spec, histogram,
                              normalize_physical, recoil_frequency_from_mass, run_ensemble,
                              velocity_for_sigma_tau)

LITHIUM = dict(wavelength=670.7e-9, recoil_frequency=63e3, rabi_frequency=126e6, beam_radius=5e-4)


def _spec(**kw):
    base = dict(n_atoms=20, x0_mean=0.0, p0_mean=10.0, sigma_x=2.0, sigma_p=2.0, seed=42,
                params=SimParams(1e-3, 0.2, GaussianField(40.0)), tau_end=100.0)
    base.update(kw)
    return EnsembleSpec(**base)


# ------------------------------------------------------------------ spec

@pytest.mark.parametrize("kw", [dict(n_atoms=0), dict(sigma_x=-1.0), dict(seed=-1), dict(seed=2**64),
                                dict(tau_end=0.0)])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        _spec(**kw)


def test_draws_depend_only_on_seed_and_index():
    s = _spec()
    assert draw_initial(s, 7) == draw_initial(_spec(n_atoms=1000), 7)
    assert draw_initial(s, 7) != draw_initial(s, 8)
    assert draw_initial(s, 7) != draw_initial(_spec(seed=43), 7)


def test_draw_statistics():
    s = _spec(x0_mean=1.0, p0_mean=10.0, sigma_x=2.0, sigma_p=0.5)
    xp = np.array([draw_initial(s, i) for i in range(20000)])
    np.testing.assert_allclose(xp.mean(axis=0), [1.0, 10.0], atol=0.05)
    np.testing.assert_allclose(xp.std(axis=0), [2.0, 0.5], rtol=0.03)
    assert abs(np.corrcoef(xp.T)[0, 1]) < 0.03


# ------------------------------------------------------------------- runs

def test_degenerate_ensemble_equals_single_integration():
    s = _spec(n_atoms=1, sigma_x=0.0, sigma_p=0.0)
    res = run_ensemble(s)
    traj = integrate(AtomState.ground(0.0, 10.0), s.params, s.tau_end)
    np.testing.assert_allclose(res.final[0], traj.y[-1], atol=1e-12)


def test_same_seed_bitwise_identical_and_parallel_invariant():
    s = _spec()
    a, b, c = run_ensemble(s), run_ensemble(s), run_ensemble(s, jobs=3)
    np.testing.assert_array_equal(a.final, b.final)
    np.testing.assert_array_equal(a.final, c.final)
    np.testing.assert_array_equal(a.initial, c.initial)


def test_norm_invariant_per_atom():
    res = run_ensemble(_spec())
    assert np.abs(res.norm - 1).max() < 1e-8


def test_failures_excluded_and_counted():
    from atomsim.dynamics import IntegratorOptions
    res = run_ensemble(_spec(opts=IntegratorOptions(max_steps=30)))
    assert res.n_excluded == 20
    assert res.x_final.size == 0
    assert np.isnan(res.final).all()


# -------------------------------------------------------------- histogram

def test_histogram_single_value():
    h = histogram([0.3], 0.25, (-1, 1))
    assert h.counts.sum() == 1 and np.count_nonzero(h.counts) == 1
    assert h.bin_left[np.argmax(h.counts)] == 0.25


def test_histogram_left_closed_right_open():
    h = histogram([-1.0, 0.0, 0.5, 1.0], 0.5, (-1, 1))
    np.testing.assert_array_equal(h.counts, [1, 0, 1, 1])


@given(v=st.lists(st.floats(-10, 10), min_size=1, max_size=200))
def test_histogram_conservation_and_normalization(v):
    h = histogram(v, 0.5, (-6, 6))
    inside = sum(1 for x in v if -6 <= x < 6)
    assert h.counts.sum() == inside
    if inside:
        assert h.density.sum() * h.bin_width == pytest.approx(1.0)


def test_histogram_uniform_chi_square():
    rng = np.random.default_rng(0)
    h = histogram(rng.uniform(-6, 6, 48000), 0.25, (-6, 6))
    assert chisquare(h.counts).pvalue > 1e-3


@pytest.mark.parametrize("args", [([], 0.25, (-1, 1)), ([0.0], 0.0, (-1, 1)), ([0.0], 0.3, (-1, 1))])
def test_histogram_rejects(args):
    with pytest.raises(ValueError):
        histogram(*args)


# ------------------------------------------------------------------ units

def test_lithium_conversion():
    v = velocity_for_sigma_tau(5e-4, 126e6, 400.0)
    assert v == pytest.approx(989.6, abs=0.1)
    omega_r, sigma_tau = normalize_physical(PhysicalSetup(**LITHIUM, longitudinal_velocity=v))
    assert omega_r == pytest.approx(1e-3, rel=1e-12)
    assert sigma_tau == pytest.approx(400.0, rel=1e-12)


def test_doubling_rabi_frequency():
    a = normalize_physical(PhysicalSetup(**LITHIUM, longitudinal_velocity=1000.0))
    d = dict(LITHIUM, rabi_frequency=2 * LITHIUM["rabi_frequency"])
    b = normalize_physical(PhysicalSetup(**d, longitudinal_velocity=1000.0))
    assert b[0] == pytest.approx(a[0] / 2) and b[1] == pytest.approx(2 * a[1])


def test_recoil_from_mass():
    m_li7 = 7.016003 * 1.66053906660e-27
    assert recoil_frequency_from_mass(670.7e-9, m_li7) == pytest.approx(63e3, rel=0.01)


@pytest.mark.parametrize("field", ["wavelength", "recoil_frequency", "rabi_frequency", "beam_radius"])
def test_setup_rejects_nonpositive(field):
    with pytest.raises(ValueError):
        PhysicalSetup(**dict(LITHIUM, **{field: 0.0}), longitudinal_velocity=1.0)


def test_scattering_preset():
    s = fig10b_spec(0.2)
    assert (s.n_atoms, s.sigma_x, s.sigma_p, s.p0_mean, s.tau_end) == (10000, 2.0, 2.0, 10.0, 1000.0)
    assert s.params.sigma_tau == 400.0 and s.params.omega_r == 1e-3


def test_regular_ensemble_small_peaked():
    """Small scattering ensemble: regular case narrower and multi-peaked (bins of 1/8 wavelength)."""
    chaotic = run_ensemble(fig10b_spec(0.2, n_atoms=1500)).positions_in_wavelengths
    regular = run_ensemble(fig10b_spec(1.0, n_atoms=1500)).positions_in_wavelengths
    assert chaotic.std() > 2 * regular.std()
    h = histogram(regular, 0.125)
    peaks = [i for i in h.local_maxima() if h.density[i] > 0.2 * h.density.max()]
    assert len(peaks) >= 2
    span = (max(peaks) - min(peaks) + 1) * h.bin_width
    assert span < 0.5 * histogram(chaotic).support_width(0.05)
