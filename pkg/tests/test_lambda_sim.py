import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from auger_sim import lambda_sim as ls
from auger_sim.qdcore import HBAR, Pulse


def _valid(S, trace_tol=1e-9):
    H = np.conj(np.transpose(S, (0, 2, 1)))
    assert np.max(np.abs(np.trace(S, axis1=1, axis2=2) - 1)) < trace_tol
    assert np.max(np.abs(S - H)) < 1e-9
    assert np.min(np.linalg.eigvalsh(0.5 * (S + H))) > -1e-9


def test_hamiltonian_no_drive_is_diagonal():
    spec = ls.default_spec(delta=0.05)
    spec = ls.HamiltonianSpec(spec.pump.shifted(0, detuning=0.2), spec.control.shifted(0, detuning=0.25),
                              basis=spec.basis)
    H = ls.build_hamiltonian(spec, 500.0)
    np.testing.assert_allclose(H, np.diag([0.0, 0.2, -0.05]), atol=1e-15)


def test_hamiltonian_peak_entry():
    spec = ls.default_spec()
    H = ls.build_hamiltonian(spec, 0.0)
    assert abs(H[0, 1]) == pytest.approx(0.1619, abs=1e-4)
    assert H[1, 2] == pytest.approx(0.0, abs=1e-8)


def test_hamiltonian_cross_terms():
    spec = ls.default_spec(cross_coupling=True, dipole_ratio=5.0)
    t = 18.0
    H = ls.build_hamiltonian(spec, t)
    om2 = spec.control.envelope(t)
    om1 = spec.pump.envelope(t)
    ph = np.exp(-1j * (4.36 / HBAR) * t)
    assert H[0, 1] == pytest.approx(HBAR * (om1 / 2 + 5 * om2 / 2 * ph), abs=1e-14)
    assert H[1, 2] == pytest.approx(HBAR * (om2 / 2 + om1 / 5 / 2 * ph), abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(t=st.floats(-30, 60), cc=st.booleans(), ratio=st.floats(0.2, 10), d=st.floats(-0.5, 0.5))
def test_hamiltonian_hermitian(t, cc, ratio, d):
    H = ls.build_hamiltonian(ls.default_spec(delta=d, cross_coupling=cc, dipole_ratio=ratio), t)
    np.testing.assert_allclose(H, H.conj().T, atol=0)


def test_basis_size_rejected():
    p = Pulse("h1", 1.0, 6.0)
    with pytest.raises(ValueError):
        ls.HamiltonianSpec(p, Pulse("h2", 1.0, 6.0), basis=("h1", "T+", "h2", "h3"))


def test_free_evolution_keeps_populations():
    spec = ls.default_spec(control_area=0.0)
    spec = ls.HamiltonianSpec(spec.pump.shifted(0, area=0.0), spec.control, basis=spec.basis)
    rho0 = np.diag([0.2, 0.5, 0.3]).astype(complex)
    rho0[0, 1] = rho0[1, 0] = 0.1
    tr = ls.evolve(rho0, spec, None, np.linspace(-30, 60, 50))
    np.testing.assert_allclose(tr.populations, np.tile([0.2, 0.5, 0.3], (50, 1)), atol=1e-12)


def test_resonant_pi_pump():
    spec = ls.default_spec(control_area=0.0)
    tr = ls.evolve(ls.pure_state("h1"), spec, None, [-50.0, 17.0])
    assert tr.population("T+")[-1] >= 1 - 1e-3


def test_radiative_decay_after_pump():
    spec = ls.default_spec(control_area=0.0)
    grid = np.linspace(-50, 2000, 2051)
    tr = ls.evolve(ls.pure_state("h1"), spec, ls.Dissipators.standard(400.0, None), grid, keep_states=False)
    pt = tr.population("T+")
    k = int(np.argmax(pt))
    at400 = np.interp(grid[k] + 400.0, grid, pt)
    assert at400 / pt[k] == pytest.approx(math.exp(-1), rel=0.01)


def test_square_pulse_sin2_exact():
    for theta in (0.3, math.pi / 2, math.pi, 2.5):
        p = Pulse("h1", theta, 5.0, shape="square")
        c = Pulse("h2", 0.0, 5.0, arrival=20.0, shape="square")
        spec = ls.HamiltonianSpec(p, c)
        rho = ls.final_state(spec, rtol=1e-12, atol=1e-14)
        assert rho[1, 1].real == pytest.approx(math.sin(theta / 2) ** 2, abs=1e-9)


def test_rabi_sweep_two_level():
    areas = np.array([0.0, math.pi / 2, math.pi, 1.5 * math.pi])
    pops = ls.rabi_sweep(ls.default_spec(), areas)
    np.testing.assert_allclose(pops, np.cos(areas / 2) ** 2, atol=1e-6)
    m = ls.rabi_minima(ls.default_spec(), max_area=2 * math.pi, step=0.1 * math.pi)
    assert m[0] == pytest.approx(math.pi, abs=1e-3)


def test_cross_coupling_first_minimum_shift():
    spec = ls.default_spec(cross_coupling=True)
    d_star, _ = ls.stark_optimal_detuning(spec)
    areas = np.linspace(0.6, 1.4, 17) * math.pi
    c0 = ls.rabi_sweep(spec, areas)
    cs = ls.rabi_sweep(spec, areas, d_star)
    # the compensated minimum is deeper and sits above pi
    assert cs.min() < c0.min()
    assert ls.curve_minima(areas, cs)[0] > math.pi


def test_map_symmetric_without_cross_coupling():
    deltas = np.linspace(-0.2, 0.2, 5)
    areas = np.linspace(0.5, 2.5, 5) * math.pi
    M = ls.detuning_area_map(ls.default_spec(), deltas, areas)
    np.testing.assert_allclose(M, M[::-1], atol=1e-6)


def test_map_zero_area_constant():
    M = ls.detuning_area_map(ls.default_spec(cross_coupling=True), [-0.1, 0.0, 0.1], [0.0, 0.0])
    assert np.ptp(M) < 1e-9


def test_map_argmin_shifted_with_cross_coupling():
    deltas = np.linspace(-0.3, 0.3, 13)
    M = ls.detuning_area_map(ls.default_spec(cross_coupling=True), deltas, [math.pi])
    assert deltas[np.argmin(M[:, 0])] != 0.0


def test_stark_symmetric_case():
    d, transfer = ls.stark_optimal_detuning(ls.default_spec())
    assert abs(d) < 1e-3
    assert transfer > 0.999


def test_stark_flat_landscape():
    with pytest.raises(ls.FlatLandscapeError):
        ls.stark_optimal_detuning(ls.default_spec(), bracket=(0.05, 0.3))


def test_parallel_sweep_bit_identical():
    spec = ls.default_spec(cross_coupling=True)
    areas = np.linspace(0.2, 3, 6)
    a = ls.rabi_sweep_populations(spec, areas, jobs=1)
    b = ls.rabi_sweep_populations(spec, areas, jobs=3)
    assert np.array_equal(a, b)


def test_deterministic():
    spec = ls.default_spec(cross_coupling=True)
    assert np.array_equal(ls.final_state(spec), ls.final_state(spec))


def test_gauge_invariance():
    spec = ls.default_spec(cross_coupling=True, control_area=2.0)
    grid = np.linspace(-30, 40, 30)
    a = ls.evolve(ls.pure_state("h1"), spec, ls.Dissipators.standard(), grid)
    b = ls.evolve(ls.pure_state("h1"), spec, ls.Dissipators.standard(), grid, energy_offset=3.7)
    np.testing.assert_allclose(a.populations, b.populations, atol=1e-8)


def test_tolerance_halving_converged():
    spec = ls.default_spec(cross_coupling=True, control_area=3 * math.pi)
    a = np.diag(ls.final_state(spec)).real
    b = np.diag(ls.final_state(spec, rtol=ls.RTOL / 2, atol=ls.ATOL / 2)).real
    assert np.max(np.abs(a - b)) < 1e-6


def test_state_validity_dissipative():
    spec = ls.default_spec(cross_coupling=True, control_area=1.7 * math.pi)
    tr = ls.evolve(ls.pure_state("h1"), spec, ls.Dissipators.standard(pure_dephasing=500.0),
                   np.linspace(-30, 300, 120))
    _valid(tr.states, 1e-8)


def test_check_state_rejects():
    with pytest.raises(ValueError):
        ls.check_state(np.diag([0.5, 0.6, 0.0]).astype(complex))
    with pytest.raises(ValueError):
        ls.check_state(np.diag([1.2, -0.2, 0.0]).astype(complex))


def test_integration_error_reports_time(monkeypatch):
    from types import SimpleNamespace
    real = ls.solve_ivp

    def failing(fun, span, y0, **kw):
        sol = real(fun, (span[0], 0.5 * (span[0] + span[1])), y0, **kw)
        return SimpleNamespace(status=-1, message="Required step size is less than spacing between numbers.",
                               t=sol.t, y=sol.y, sol=sol.sol)

    monkeypatch.setattr(ls, "solve_ivp", failing)
    with pytest.raises(ls.IntegrationError) as exc:
        ls.evolve(ls.pure_state("h1"), ls.default_spec(), None, [-40, 40])
    assert exc.value.last_time > -40.0


def test_ramsey_sim_matches_analytic():
    from auger_sim.ramsey import CoherenceParams, ramsey_population
    from auger_sim.qdcore import PLANCK_H
    p = CoherenceParams(161.0, 1930.0, 4.36 / PLANCK_H)
    seq = ls.ramsey_pulse_sequence()
    for dt in (0.0, 0.237, 3.1, 12.5, 49.0):
        sim = ls.ramsey_sequence_sim(seq, dt)["T+"]
        ideal = ramsey_population(CoherenceParams(1e12, 1e12, p.nu), dt)
        assert sim == pytest.approx(ideal, abs=0.02)
    diss = ls.Dissipators.standard(trion_lifetime=None, hole_lifetime=161.0, pure_dephasing=1930.0)
    for dt in (0.4, 30.0):
        assert ls.ramsey_sequence_sim(seq, dt, diss)["T+"] == pytest.approx(ramsey_population(p, dt), abs=0.02)


def test_ramsey_zero_delay_two_pi_identity():
    seq = ls.ramsey_pulse_sequence()
    pulses = list(seq.pulses)
    pulses[3] = pulses[3].shifted(0.0, area=0.0)
    from auger_sim.qdcore import PulseSequence
    pops = ls.ramsey_sequence_sim(PulseSequence(tuple(pulses)), 0.0)
    assert pops["h1"] == pytest.approx(0.5, abs=0.02)
    assert pops["T+"] == pytest.approx(0.5, abs=0.02)
    assert pops["h2"] == pytest.approx(0.0, abs=0.02)


def test_ramsey_all_areas_zero():
    from auger_sim.qdcore import PulseSequence
    seq = PulseSequence(tuple(p.shifted(0.0, area=0.0) for p in ls.ramsey_pulse_sequence().pulses))
    pops = ls.ramsey_sequence_sim(seq, 5.0)
    assert pops["h1"] == pytest.approx(1.0, abs=1e-12)


def test_superposition_sequence_weights():
    pulses = ls.superposition_sequence([0.25, 0.75], ["h2"])
    spec = ls.HamiltonianSpec(pulses[0], pulses[1])
    pops = np.diag(ls.final_state(spec)).real
    np.testing.assert_allclose(pops, [0.25, 0.0, 0.75], atol=1e-6)
    with pytest.raises(ValueError):
        ls.superposition_sequence([0.5, 0.6], ["h2"])
