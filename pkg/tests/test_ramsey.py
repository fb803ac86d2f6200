import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from auger_sim import ramsey as rm

P = rm.CoherenceParams(161.0, 1930.0, 1.0543)


def test_bloch_limits():
    np.testing.assert_allclose(rm.bloch_evolve(P, 0.0).as_array(), [-1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(rm.bloch_evolve(P, 1e6).as_array(), [0, 0, 1], atol=1e-12)


def test_bloch_example_t100():
    m = rm.bloch_evolve(P, 100.0)
    decay = math.exp(-100 * (1 / 322 + 1 / 1930))
    assert decay == pytest.approx(0.6960, abs=1e-4)
    assert m.x == pytest.approx(-decay * math.cos(2 * math.pi * 105.43), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(tau=st.floats(1, 1e4), t2s=st.floats(1, 1e5), nu=st.floats(0.01, 5), t=st.floats(0, 1e4))
def test_bloch_transverse_and_norm(tau, t2s, nu, t):
    p = rm.CoherenceParams(tau, t2s, nu)
    m = rm.bloch_evolve(p, t)
    assert math.hypot(m.x, m.y) == pytest.approx(math.exp(-t * p.decoherence_rate), abs=1e-12)
    assert m.norm() <= 1 + 1e-12


def test_population_range_random():
    rng = np.random.default_rng(5)
    for _ in range(10):
        p = rm.CoherenceParams(*rng.uniform([1, 1, 0.01], [1e3, 1e4, 5]))
        v = rm.ramsey_population(p, rng.uniform(0, 1e4, 10_000))
        assert v.min() >= 0 and v.max() <= 1


def test_population_examples():
    assert rm.ramsey_population(P, 0.0) == 0.5
    t = 0.25 / P.nu
    assert rm.ramsey_population(P, t) == pytest.approx(0.5 * (1 - math.exp(-t / P.t2)))
    assert P.t2 == pytest.approx(275.9, abs=0.1)
    env = math.exp(-P.t2 * P.decoherence_rate)
    assert env == pytest.approx(math.exp(-1))


def test_coherence_relation():
    assert rm.coherence_relation(161, 276) == pytest.approx(1931, abs=1)
    assert rm.coherence_from(161, math.inf) == pytest.approx(322)
    with pytest.raises(rm.NoSolutionError):
        rm.coherence_relation(161, 322)


@settings(max_examples=200, deadline=None)
@given(t1=st.floats(1, 1e4), t2s=st.floats(1, 1e5))
def test_coherence_round_trip(t1, t2s):
    t2 = rm.coherence_from(t1, t2s)
    assert rm.coherence_relation(t1, t2) == pytest.approx(t2s, rel=1e-10)
    assert rm.coherence_from(t1, rm.coherence_relation(t1, t2)) == pytest.approx(t2, rel=1e-12)


def test_envelope_noiseless():
    x = np.linspace(0, 800, 20)
    fit = rm.fringe_envelope_fit(x, 0.5 * np.exp(-x / 276.0))
    assert fit.t2 == pytest.approx(276.0, abs=1e-6)


def test_envelope_monte_carlo():
    x = np.linspace(0, 800, 20)
    clean = 0.5 * np.exp(-x / 276.0)
    rng = np.random.default_rng(2024)
    hits = 0
    for _ in range(1000):
        y = clean * (1 + 0.05 * rng.standard_normal(x.size))
        hits += abs(rm.fringe_envelope_fit(x, y).t2 - 276.0) <= 15.0
    assert hits >= 950


def test_envelope_constant_unbounded():
    with pytest.raises(rm.UnboundedParameterError):
        rm.fringe_envelope_fit(np.linspace(0, 800, 20), np.full(20, 0.3))


def test_envelope_needs_points():
    with pytest.raises(ValueError):
        rm.fringe_envelope_fit([0, 1, 2], [1, 0.9, 0.8])


def test_dft_pure_sine():
    t = np.linspace(0, 24, 256, endpoint=False)
    assert rm.dft_peak(t, np.sin(2 * np.pi * 1.0543 * t)) == pytest.approx(1.0543, abs=0.002)


def test_dft_fringes():
    t = np.arange(0, 24, 0.1)
    assert rm.dft_peak(t, rm.ramsey_population(P, t), expected_nu=P.nu) == pytest.approx(P.nu, abs=0.01)


def test_dft_constant_and_alias():
    t = np.arange(0, 24, 0.1)
    with pytest.raises(ValueError):
        rm.dft_peak(t, np.full(t.size, 0.4))
    with pytest.raises(rm.AliasingError, match="Nyquist"):
        rm.dft_peak(np.arange(0, 100, 0.6), np.zeros(167), expected_nu=1.0543)


def test_fringe_step_guard():
    rm.check_fringe_step(0.1, 1.0543)
    with pytest.raises(rm.AliasingError):
        rm.check_fringe_step(0.2, 1.0543)


def test_csv_round_trip(tmp_path):
    t = np.arange(0, 5, 0.5)
    path = tmp_path / "f.csv"
    path.write_text("delay_ps,intensity\n" + "".join(f"{a},{b}\n" for a, b in zip(t, t ** 2)))
    d, v = rm.read_fringe_csv(path)
    np.testing.assert_allclose(v, t ** 2)
    f, m = rm.dft_spectrum(np.arange(32.0), np.sin(np.arange(32.0)))
    rm.write_spectrum_csv(tmp_path / "s.csv", f, m)
    assert (tmp_path / "s.csv").read_text().startswith("freq_THz,magnitude\n")
