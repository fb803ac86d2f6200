import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from auger_sim import fitlab
from auger_sim.qdcore import HBAR, M0
from auger_sim.relaxation import cascade, phonon, wkb


def _ode(n, taus, t):
    A = cascade.rate_matrix(n, taus)
    y0 = np.zeros(n)
    y0[-1] = 1.0
    sol = solve_ivp(lambda _t, y: A @ y, (0, t[-1]), y0, method="DOP853", rtol=1e-13, atol=1e-16, t_eval=t)
    return sol.y.T


def test_single_step_chain():
    tr = cascade.cascade_evolve(cascade.CascadeSpec("h2", (161.0,)))
    t = tr.times
    np.testing.assert_allclose(tr.population("h2"), np.exp(-t / 161), atol=1e-14)
    np.testing.assert_allclose(tr.population("h1"), 1 - np.exp(-t / 161), atol=1e-14)
    fit = cascade.fit_filling_time(tr)
    assert fit.tau_fill == pytest.approx(161.0, rel=1e-6)


def test_h5_matches_ode_at_322():
    spec = cascade.CascadeSpec("h5", (161, 28, 22, 15))
    tr = cascade.cascade_evolve(spec)
    ref = _ode(5, spec.lifetimes, np.array([0.0, 322.0]))[-1]
    assert tr.population("h1")[322] == pytest.approx(ref[0], abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1, 300), min_size=1, max_size=4))
def test_closed_form_vs_ode_random(taus):
    n = len(taus) + 1
    t = np.linspace(0, 800, 81)
    tr = cascade.cascade_evolve(cascade.CascadeSpec(f"h{n}", tuple(taus), t))
    np.testing.assert_allclose(tr.populations[:, ::-1], _ode(n, taus, t), atol=1e-8)
    assert np.max(np.abs(tr.populations.sum(axis=1) - 1)) < 1e-10
    assert tr.populations.min() >= 0 and tr.populations.max() <= 1


@pytest.mark.parametrize("taus", [(10, 10, 10, 10), (20, 20 + 1e-12, 5), (30, 15, 30)])
def test_degenerate_lifetimes(taus):
    n = len(taus) + 1
    t = np.linspace(0, 300, 61)
    tr = cascade.cascade_evolve(cascade.CascadeSpec(f"h{n}", taus, t))
    assert np.all(np.isfinite(tr.populations))
    np.testing.assert_allclose(tr.populations[:, ::-1], _ode(n, taus, t), atol=1e-8)


def test_fast_limit():
    tr = cascade.cascade_evolve(cascade.CascadeSpec("h5", (1e-6, 2e-6, 3e-6, 4e-6), [0.0, 0.01, 1.0]))
    assert tr.population("h1")[1:] == pytest.approx([1.0, 1.0], abs=1e-12)


def test_filling_time_and_sensitivity(caplog):
    taus = (161, 28, 22, 15)
    tr = cascade.cascade_evolve(cascade.CascadeSpec("h5", taus))
    fit = cascade.fit_filling_time(tr, lifetimes=taus)
    assert fit.window == (65.0, 1000.0)
    assert fit.tau_fill == pytest.approx(173.0, abs=10.0)
    with caplog.at_level("INFO"):
        table = cascade.filling_sensitivity(tr)
    assert table.shape == (5, 3) and "window start 50" in caplog.text
    shifted = cascade.fit_filling_time(tr, (50.0, 1000.0)).tau_fill
    assert shifted != fit.tau_fill


def test_filling_window_outside_grid():
    tr = cascade.cascade_evolve(cascade.CascadeSpec("h2", (161.0,), np.arange(0, 501.0)))
    with pytest.raises(ValueError):
        cascade.fit_filling_time(tr, (0.0, 1000.0))


def test_cascade_spec_validation():
    with pytest.raises(ValueError):
        cascade.CascadeSpec("h5", (161, 28, -1, 15))
    with pytest.raises(ValueError):
        cascade.CascadeSpec("h5", (161, 28))


def test_phonon_examples():
    p = phonon.PhononSpectralDensity.from_energy(0.0052, 2.11)
    ratio = phonon.phonon_J(2.90, p) / phonon.phonon_J(4.36, p)
    direct = (2.90 / 4.36) ** 3 * math.exp((4.36 ** 2 - 2.90 ** 2) / 2.11 ** 2)
    assert ratio == pytest.approx(direct, rel=1e-12)
    assert ratio == pytest.approx(3.19, abs=0.01)
    assert phonon.phonon_J(1e-6, p) < 1e-18


def test_phonon_single_maximum():
    p = phonon.PhononSpectralDensity.from_energy(0.0052, 2.11)
    E = np.linspace(0.01, 10, 20001)
    J = phonon.phonon_J(E, p)
    k = int(np.argmax(J))
    assert np.all(np.diff(J[: k + 1]) > 0) and np.all(np.diff(J[k:]) < 0)
    assert E[k] == pytest.approx(p.peak_energy, abs=1e-3)
    h = 1e-5
    d = (phonon.phonon_J(p.peak_energy + h, p) - phonon.phonon_J(p.peak_energy - h, p)) / (2 * h)
    assert abs(d) < 1e-9


def test_phonon_endpoint_fit():
    fit = phonon.fit_phonon_params([(4.36, 161.0), (2.90, 47.0)])
    assert fit.exact
    assert fit.hbar_omega_c == pytest.approx(2.08, abs=0.01)
    assert fit.hbar_omega_c == pytest.approx(phonon.endpoint_cutoff(4.36, 161, 2.90, 47), rel=1e-12)
    assert phonon.phonon_tau(4.36, fit.density) == pytest.approx(161.0, rel=1e-10)


def test_phonon_round_trip_and_errors():
    truth = phonon.PhononSpectralDensity.from_energy(0.0052, 2.11)
    E = np.array([1.5, 2.2, 2.9, 3.6, 4.36, 5.0])
    fit = phonon.fit_phonon_params(list(zip(E, phonon.phonon_tau(E, truth))))
    assert fit.alpha == pytest.approx(0.0052, rel=1e-6)
    assert fit.hbar_omega_c == pytest.approx(2.11, rel=1e-6)
    rng = np.random.default_rng(3)
    noisy = phonon.phonon_tau(E, truth) * (1 + 0.05 * rng.standard_normal(E.size))
    nf = phonon.fit_phonon_params(list(zip(E, noisy)))
    assert 0 < nf.hbar_omega_c_err < 0.2
    with pytest.raises(fitlab.UnderdeterminedError):
        phonon.fit_phonon_params([(4.36, 161.0)])


def test_printed_alpha_mismatch():
    p = phonon.PhononSpectralDensity.from_energy(0.0052, 2.11)
    assert phonon.phonon_tau(4.36, p) == pytest.approx(47.3, abs=0.5)


def test_wkb_trivial_cases():
    b = wkb.rectangular_barrier(100.0, 10.0)
    assert wkb.wkb_transmission(150.0, b) == 1.0
    assert wkb.wkb_transmission(100.0, b) == 1.0
    assert wkb.wkb_transmission(30.0, wkb.rectangular_barrier(100.0, 1e-12)) == pytest.approx(1.0, abs=1e-9)


def test_wkb_attempt_time():
    E = 0.5 * 0.59 * M0 * 100.0 ** 2
    assert wkb.hole_velocity(E) == pytest.approx(100.0)
    assert wkb.wkb_tunneling_time(E, wkb.rectangular_barrier(1.0, 5.0)) == pytest.approx(0.1)


@settings(max_examples=100, deadline=None)
@given(V=st.floats(10, 500), d=st.floats(0.1, 30), frac=st.floats(0.01, 0.99), m=st.floats(0.05, 1.5))
def test_wkb_rectangular_closed_form(V, d, frac, m):
    E = frac * V
    closed = math.exp(-2 * d * math.sqrt(2 * m * M0 * (V - E)) / HBAR)
    tc = wkb.wkb_transmission(E, wkb.rectangular_barrier(V, d, m_b=m))
    assert tc == pytest.approx(closed, rel=1e-12)
    assert 0 < tc <= 1


@settings(max_examples=100, deadline=None)
@given(z=st.lists(st.floats(0.1, 5), min_size=2, max_size=6), ev=st.lists(st.floats(-50, 300), min_size=7,
       max_size=7), E=st.floats(1, 200), cut=st.floats(0.05, 0.95))
def test_wkb_split_additive(z, ev, E, cut):
    knots = np.concatenate([[0.0], np.cumsum(z)])
    b = wkb.BarrierProfile(knots, np.array(ev[: knots.size]))
    s = b.split(knots[0] + cut * b.width) if knots[0] + cut * b.width not in knots else b
    assert wkb.wkb_exponent(E, s) == pytest.approx(wkb.wkb_exponent(E, b), rel=1e-12, abs=1e-12)


def test_wkb_triangular_closed_form():
    # linear barrier V0 -> V0 - F d crossing E: action (2/hbar) sqrt(2m) (2/3) (V0-E)^1.5 / F
    V0, d, E, slope = 200.0, 20.0, 50.0, 400.0
    b = wkb.biased_barrier(V0, d, 1.0, slope)
    F = slope / d
    expect = 2 * math.sqrt(2 * 0.59 * M0) / HBAR * (2 / 3) * (V0 - E) ** 1.5 / F
    assert wkb.wkb_exponent(E, b) == pytest.approx(expect, rel=1e-12)


def test_wkb_representative_and_underflow():
    est = wkb.tunneling_estimate(30.0, wkb.rectangular_barrier(330.0, 20.0))
    assert est.tau_ps > 1e6 and not est.underflow
    huge = wkb.tunneling_estimate(1.0, wkb.rectangular_barrier(5000.0, 100.0))
    assert huge.underflow and math.isinf(huge.tau_ps) and huge.log10_tau_ps > 300


def test_barrier_validation():
    with pytest.raises(ValueError):
        wkb.BarrierProfile(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        wkb.BarrierProfile(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        wkb.rectangular_barrier(100.0, 5.0, m_b=0.0)
