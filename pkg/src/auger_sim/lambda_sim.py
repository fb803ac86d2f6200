"""Driven three-level Lambda system: h1 <-> T+ <-> h_n.

The working Hamiltonian is written in the rotating frame of the two lasers,
basis ``(h1, T+, h_n)``::

    H/hbar = [[0,                 g1(t),    0          ],
              [conj(g1(t)),       Delta,    g2(t)      ],
              [0,                 conj(g2), -delta     ]]

    g1 = Omega1/2 + Omega2'/2 * exp(-i (D12 + delta) t)
    g2 = Omega2/2 + Omega1'/2 * exp(-i (D12 + delta) t)

where the primed Rabi frequencies are the cross-couplings of each field to
the other dipole (Omega1' = Omega1 mu2/mu1, Omega2' = Omega2 mu1/mu2). The
phase factors are referenced to the pump centre.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .qdcore import HBAR, Pulse, PulseSequence

log = logging.getLogger(__name__)

BASIS = ("h1", "T+", "h2")
RTOL = 1e-9
ATOL = 1e-12


class IntegrationError(RuntimeError):
    """Adaptive integrator gave up; ``last_time`` is the last accepted time (ps)."""

    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last good t = {last_time:.6g} ps)")
        self.last_time = last_time


class FlatLandscapeError(RuntimeError):
    pass


@dataclass(frozen=True)
class HamiltonianSpec:
    """Pump on h1 <-> T+, control on T+ <-> basis[2].

    ``delta12`` is the h1 - h_n splitting (meV) and ``dipole_ratio`` is
    mu1/mu_n. ``extra_pulses`` are further pulses on either leg, e.g. the
    second Ramsey pair; they must share the detuning of their leg.
    """

    pump: Pulse
    control: Pulse
    delta12: float = 4.36
    cross_coupling: bool = False
    dipole_ratio: float = 5.0
    basis: tuple[str, ...] = BASIS
    extra_pulses: tuple[Pulse, ...] = ()

    def __post_init__(self):
        if len(self.basis) != 3:
            raise ValueError(f"Lambda Hamiltonian needs a 3-level basis, got {self.basis}")
        if self.delta12 <= 0:
            raise ValueError("delta12 must be positive")
        if self.dipole_ratio <= 0:
            raise ValueError("dipole_ratio must be positive")
        for p in self.pulses:
            if p.target not in (self.basis[0], self.basis[2]):
                raise ValueError(f"pulse target {p.target!r} not a leg of basis {self.basis}")
            leg_ref = self.pump if p.target == self.basis[0] else self.control
            if p.detuning != leg_ref.detuning:
                raise ValueError("pulses on one leg must share that leg's detuning")
        object.__setattr__(self, "extra_pulses", tuple(self.extra_pulses))

    @property
    def pulses(self) -> tuple[Pulse, ...]:
        return (self.pump, self.control) + self.extra_pulses

    @property
    def pump_detuning(self) -> float:
        """Delta in meV."""
        return self.pump.detuning

    @property
    def delta(self) -> float:
        """delta in meV (control detuning minus pump detuning)."""
        return self.control.detuning - self.pump.detuning

    def with_control(self, **changes) -> "HamiltonianSpec":
        return replace(self, control=replace(self.control, **changes))


@dataclass(frozen=True)
class Channel:
    """Lindblad channel. ``kind`` is "decay" (source -> target) or "dephasing" (on source)."""

    kind: str
    source: str
    rate: float
    target: str | None = None

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("dissipator rates must be non-negative")
        if self.kind not in ("decay", "dephasing"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.kind == "decay" and self.target is None:
            raise ValueError("decay channel needs a target level")

    def operator(self, basis: Sequence[str]) -> np.ndarray:
        n = len(basis)
        L = np.zeros((n, n), dtype=complex)
        i = basis.index(self.source)
        if self.kind == "decay":
            L[basis.index(self.target), i] = 1.0
        else:
            L[i, i] = 1.0
        return L


@dataclass(frozen=True)
class Dissipators:
    channels: tuple[Channel, ...] = ()

    @classmethod
    def none(cls) -> "Dissipators":
        return cls(())

    @classmethod
    def standard(cls, trion_lifetime: float | None = 400.0, hole_lifetime: float | None = 161.0,
                 hole: str = "h2", pure_dephasing: float | None = None) -> "Dissipators":
        """T+ -> h1 radiative decay, h_n -> h1 relaxation, optional h_n pure dephasing time."""
        ch = []
        if trion_lifetime:
            ch.append(Channel("decay", "T+", 1.0 / trion_lifetime, "h1"))
        if hole_lifetime:
            ch.append(Channel("decay", hole, 1.0 / hole_lifetime, "h1"))
        if pure_dephasing:
            # L = sqrt(g)|n><n| damps coherences at g/2
            ch.append(Channel("dephasing", hole, 2.0 / pure_dephasing))
        return cls(tuple(ch))

    def active(self) -> tuple[Channel, ...]:
        return tuple(c for c in self.channels if c.rate > 0)


@dataclass
class Trajectory:
    times: np.ndarray
    populations: np.ndarray
    labels: tuple[str, ...]
    states: np.ndarray | None = None

    def population(self, label: str) -> np.ndarray:
        return self.populations[:, self.labels.index(label)]

    @property
    def final(self) -> dict[str, float]:
        return {lb: float(v) for lb, v in zip(self.labels, self.populations[-1])}

    def to_rows(self) -> tuple[list[str], np.ndarray]:
        header = ["t_ps"] + [f"p_{lb}" for lb in self.labels]
        return header, np.column_stack([self.times, self.populations])


def _leg_arrays(pulses: Iterable[Pulse], shape: str):
    ps = [p for p in pulses if p.shape == shape and p.area > 0]
    amp = np.array([0.5 * p.peak_rabi * np.exp(1j * p.phase) for p in ps], dtype=complex)
    t0 = np.array([p.arrival for p in ps])
    if shape == "gaussian":
        w = np.array([p.sigma for p in ps])
    else:
        w = np.array([0.5 * p.field_fwhm for p in ps])
    return amp, t0, w


class _Drive:
    """Fast evaluation of the two half-Rabi couplings and the generator."""

    def __init__(self, spec: HamiltonianSpec):
        self.spec = spec
        left = [p for p in spec.pulses if p.target == spec.basis[0]]
        right = [p for p in spec.pulses if p.target == spec.basis[2]]
        self.legs = []
        for group in (left, right):
            self.legs.append((_leg_arrays(group, "gaussian"), _leg_arrays(group, "square")))
        self.Delta = spec.pump_detuning / HBAR
        self.delta = spec.delta / HBAR
        self.beat = (spec.delta12 + spec.delta) / HBAR
        self.t_ref = spec.pump.arrival
        ratio = spec.dipole_ratio
        # Omega1' = Omega1 / ratio on the right leg, Omega2' = Omega2 * ratio on the left
        self.cross = (1.0 / ratio, ratio) if spec.cross_coupling else (0.0, 0.0)

    @staticmethod
    def _half_rabi(arrays, t: float) -> complex:
        (ga, gt, gs), (sa, st, sw) = arrays
        val = 0j
        if ga.size:
            x = (t - gt) / gs
            val += np.dot(ga, np.exp(-0.5 * x * x))
        if sa.size:
            val += np.sum(sa[np.abs(t - st) <= sw])
        return complex(val)

    def couplings(self, t: float) -> tuple[complex, complex]:
        h1 = self._half_rabi(self.legs[0], t)
        h2 = self._half_rabi(self.legs[1], t)
        g1, g2 = h1, h2
        if self.spec.cross_coupling:
            ph = np.exp(-1j * self.beat * (t - self.t_ref))
            g1 = h1 + self.cross[1] * h2 * ph
            g2 = h2 + self.cross[0] * h1 * ph
        return g1, g2

    def generator(self, t: float) -> np.ndarray:
        """H(t)/hbar in rad/ps."""
        g1, g2 = self.couplings(t)
        return np.array([[0.0, g1, 0.0],
                         [np.conj(g1), self.Delta, g2],
                         [0.0, np.conj(g2), -self.delta]], dtype=complex)


def build_hamiltonian(spec: HamiltonianSpec, t: float) -> np.ndarray:
    """Rotating-frame Hamiltonian at time ``t`` (ps), in meV."""
    return HBAR * _Drive(spec).generator(t)


def _rhs_factory(drive: _Drive, ops: Sequence[tuple[float, np.ndarray]], n: int):
    lind = [(g, L, L.conj().T, L.conj().T @ L) for g, L in ops]

    def rhs(t, y):
        rho = y.reshape(n, n)
        M = drive.generator(t)
        d = -1j * (M @ rho - rho @ M)
        for g, L, Ld, LdL in lind:
            d += g * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
        return d.ravel()

    return rhs


def _knots(spec: HamiltonianSpec, t_start: float, t_end: float):
    """Split [t_start, t_end] into driven windows (max_step bounded) and free stretches."""
    windows = []
    for p in spec.pulses:
        if p.area <= 0:
            continue
        a, b = p.support(nsigma=8.0)
        windows.append((a, b, p.sigma if p.shape == "gaussian" else 0.5 * p.field_fwhm))
    windows.sort()
    merged: list[list[float]] = []
    for a, b, s in windows:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
            merged[-1][2] = min(merged[-1][2], s)
        else:
            merged.append([a, b, s])
    segs = []
    t = t_start
    for a, b, s in merged:
        a, b = max(a, t_start), min(b, t_end)
        if b <= t:
            continue
        if a > t:
            segs.append((t, a, np.inf))
        segs.append((max(a, t), b, 0.5 * s))
        t = b
    if t < t_end:
        segs.append((t, t_end, np.inf))
    # square pulse edges are discontinuities: always break there
    edges = sorted({e for p in spec.pulses if p.shape == "square" and p.area > 0 for e in p.support()})
    out = []
    for a, b, m in segs:
        cuts = [a] + [e for e in edges if a < e < b] + [b]
        out += [(c0, c1, m) for c0, c1 in zip(cuts, cuts[1:])]
    return out


def check_state(rho: np.ndarray, tol: float = 1e-9) -> None:
    """Raise ValueError unless ``rho`` is a valid density matrix within ``tol``."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) >= tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) >= tol:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() <= -tol:
        raise ValueError("density matrix is not positive semidefinite")


def pure_state(label: str, basis: Sequence[str] = BASIS) -> np.ndarray:
    rho = np.zeros((len(basis), len(basis)), dtype=complex)
    i = basis.index(label)
    rho[i, i] = 1.0
    return rho


def evolve(rho0: np.ndarray, spec: HamiltonianSpec, diss: Dissipators | None, grid,
           rtol: float = RTOL, atol: float = ATOL, keep_states: bool = True,
           energy_offset: float = 0.0) -> Trajectory:
    """Integrate the master equation and sample it on ``grid`` (ps).

    ``energy_offset`` (meV) is added to every diagonal element of H; it is a
    gauge freedom and must not change any population.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    check_state(rho0)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) < 0):
        raise ValueError("time grid must be a non-decreasing 1-D array")
    n = rho0.shape[0]
    drive = _Drive(spec)
    if energy_offset:
        base = drive.generator
        shift = energy_offset / HBAR * np.eye(n)
        drive.generator = lambda t: base(t) + shift  # type: ignore[method-assign]
    diss = diss or Dissipators.none()
    ops = [(c.rate, c.operator(spec.basis)) for c in diss.active()]
    rhs = _rhs_factory(drive, ops, n)

    out = np.empty((grid.size, n, n), dtype=complex)
    y = rho0.ravel().copy()
    t_now = grid[0]
    out[grid == t_now] = rho0
    for a, b, max_step in _knots(spec, grid[0], grid[-1]):
        if b <= a:
            continue
        mask = (grid > a) & (grid <= b)
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol,
                        max_step=max_step, dense_output=True)
        if sol.status != 0:
            raise IntegrationError(sol.message, float(sol.t[-1]))
        if mask.any():
            out[mask] = sol.sol(grid[mask]).T.reshape(-1, n, n)
        y = sol.y[:, -1]
    pops = np.real(np.einsum("kii->ki", out))
    return Trajectory(grid, pops, tuple(spec.basis), out if keep_states else None)


def final_state(spec: HamiltonianSpec, diss: Dissipators | None = None, t_end: float | None = None,
                rho0: np.ndarray | None = None, **kw) -> np.ndarray:
    """Density matrix after the last pulse (or at ``t_end``), starting in h1 before the first."""
    start = min(p.support()[0] for p in spec.pulses)
    if t_end is None:
        t_end = max(p.support()[1] for p in spec.pulses)
    if rho0 is None:
        rho0 = pure_state(spec.basis[0], spec.basis)
    traj = evolve(rho0, spec, diss, [start, t_end], **kw)
    return traj.states[-1]


def default_spec(control_area: float = math.pi, delta: float = 0.0, cross_coupling: bool = False,
                 dipole_ratio: float = 5.0, delta12: float = 4.36, fwhm: float = 6.0,
                 delay: float = 18.0, target: str = "h2") -> HamiltonianSpec:
    """Resonant pi pump at t=0 followed by a control pulse ``delay`` ps later."""
    pump = Pulse(target="h1", area=math.pi, fwhm=fwhm, arrival=0.0)
    control = Pulse(target=target, area=control_area, fwhm=fwhm, arrival=delay, detuning=delta)
    return HamiltonianSpec(pump=pump, control=control, delta12=delta12,
                           cross_coupling=cross_coupling, dipole_ratio=dipole_ratio,
                           basis=("h1", "T+", target))


def _final_pops(args) -> np.ndarray:
    spec, diss, kw = args
    rho = final_state(spec, diss, **kw)
    return np.real(np.diag(rho))


def _run(tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) < 2:
        return [_final_pops(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_final_pops, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def rabi_sweep_populations(template: HamiltonianSpec, areas, delta_opt: float = 0.0,
                           diss: Dissipators | None = None, jobs: int = 1, **kw) -> np.ndarray:
    """Final populations (rows: areas, columns: basis) after the control pulse."""
    tasks = []
    for a in areas:
        spec = template.with_control(area=float(a), detuning=template.pump.detuning + delta_opt)
        tasks.append((spec, diss, kw))
    return np.array(_run(tasks, jobs)).reshape(len(tasks), 3)


def rabi_sweep(template: HamiltonianSpec, areas, delta_opt: float = 0.0,
               diss: Dissipators | None = None, jobs: int = 1, **kw) -> np.ndarray:
    """Final T+ population for each control-pulse area (rad)."""
    return rabi_sweep_populations(template, areas, delta_opt, diss, jobs, **kw)[:, 1]


def detuning_area_map(template: HamiltonianSpec, deltas, areas, diss: Dissipators | None = None,
                      jobs: int = 1, **kw) -> np.ndarray:
    """Final T+ population, shape ``(len(deltas), len(areas))``.

    delta is the control detuning relative to the pump detuning, in meV,
    with the sign convention of the diagonal element -delta on h_n.
    """
    deltas = list(deltas)
    areas = list(areas)
    tasks = []
    for d in deltas:
        for a in areas:
            spec = template.with_control(area=float(a), detuning=template.pump.detuning + float(d))
            tasks.append((spec, diss, kw))
    pops = np.array(_run(tasks, jobs)).reshape(len(deltas), len(areas), 3)
    return pops[:, :, 1]


def _golden_min(f, a: float, b: float, tol: float):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def stark_optimal_detuning(template: HamiltonianSpec, area: float = math.pi,
                           bracket: tuple[float, float] = (-0.3, 0.3), tol: float = 1e-5,
                           coarse: int = 13, diss: Dissipators | None = None, **kw) -> tuple[float, float]:
    """Control detuning delta* (meV) minimising the final T+ population.

    A coarse scan locates the basin, then a golden-section search refines it.
    Returns ``(delta_star, transfer)`` with transfer = 1 - p(T+).
    """
    if area <= 0:
        raise ValueError("pulse area must be positive")

    def pt(d):
        spec = template.with_control(area=area, detuning=template.pump.detuning + d)
        return float(_final_pops((spec, diss, kw))[1])

    lo, hi = bracket
    xs = np.linspace(lo, hi, coarse)
    ys = np.array([pt(x) for x in xs])
    if np.ptp(ys) < 1e-12:
        raise FlatLandscapeError("T+ population independent of detuning over the search interval")
    k = int(np.argmin(ys))
    if k == 0 or k == coarse - 1:
        raise FlatLandscapeError(
            f"minimum not bracketed in [{lo}, {hi}] meV (lowest at the edge, delta={xs[k]:.4g})")
    x, y = _golden_min(pt, xs[k - 1], xs[k + 1], tol)
    return x, 1.0 - y


def ramsey_pulse_sequence(fwhm: float = 6.0, gap: float = 18.0, target: str = "h2",
                          start: float = 0.0) -> PulseSequence:
    """Four-pulse Ramsey protocol at zero pair delay.

    pi/2 (h1), pi (target), pi (target), pi/2 (h1); pulses 2 and 3 coincide.
    """
    half = math.pi / 2
    return PulseSequence((
        Pulse("h1", half, fwhm, start),
        Pulse(target, math.pi, fwhm, start + gap),
        Pulse(target, math.pi, fwhm, start + gap),
        Pulse("h1", half, fwhm, start + 2 * gap),
    ))


def ramsey_spec(seq: PulseSequence, delta_t: float, delta12: float = 4.36,
                cross_coupling: bool = False, dipole_ratio: float = 5.0,
                fringe_phase: float = -math.pi / 2) -> HamiltonianSpec:
    """Hamiltonian for the sequence with the second pair delayed by ``delta_t``.

    In the laser frames the free h1-h_n precession is carried by the optical
    phase of the delayed h1 pulse: it advances by delta12/hbar * delta_t.
    ``fringe_phase`` fixes the interferometer zero so that the final T+
    population follows 1/2 (1 - sin(2 pi nu dt)) for ideal pulses.
    """
    if len(seq) != 4:
        raise ValueError("Ramsey protocol needs exactly four pulses")
    # PulseSequence sorts by arrival; pulses 2 and 3 may tie, keep input order
    p1, p2, p3, p4 = seq.pulses
    if delta_t < 0:
        raise ValueError("delta_t must be non-negative")
    p3 = p3.shifted(delta_t)
    p4 = p4.shifted(delta_t, phase=p4.phase + delta12 / HBAR * delta_t + fringe_phase)
    return HamiltonianSpec(pump=p1, control=p2, delta12=delta12, cross_coupling=cross_coupling,
                           dipole_ratio=dipole_ratio, basis=("h1", "T+", p2.target),
                           extra_pulses=(p3, p4))


def ramsey_sequence_sim(seq: PulseSequence, delta_t: float, diss: Dissipators | None = None,
                        **kw) -> dict[str, float]:
    """Final populations of (h1, T+, h_n) after the four-pulse protocol."""
    spec_kw = {k: kw.pop(k) for k in ("delta12", "cross_coupling", "dipole_ratio", "fringe_phase")
               if k in kw}
    spec = ramsey_spec(seq, delta_t, **spec_kw)
    pops = _final_pops((spec, diss, kw))
    return dict(zip(spec.basis, map(float, pops)))


def superposition_sequence(weights: Sequence[float], targets: Sequence[str], fwhm: float = 6.0,
                           gap: float = 18.0) -> list[Pulse]:
    """Pump then successive Auger pi-fractions distributing T+ over ``targets``.

    ``weights`` are the desired final populations of h1 followed by each
    target (must sum to 1). Only sequences whose targets fit in one
    Lambda basis can be simulated here.
    """
    w = np.asarray(weights, dtype=float)
    if w.size != len(targets) + 1 or abs(w.sum() - 1.0) > 1e-12 or np.any(w < 0):
        raise ValueError("weights must be non-negative, sum to 1, one per level")
    pulses = [Pulse("h1", 2.0 * math.acos(math.sqrt(w[0])), fwhm, 0.0)]
    remaining = 1.0 - w[0]
    for k, (tgt, wk) in enumerate(zip(targets, w[1:]), start=1):
        frac = 1.0 if remaining <= 0 else min(1.0, wk / remaining)
        pulses.append(Pulse(tgt, 2.0 * math.asin(math.sqrt(frac)), fwhm, k * gap))
        remaining -= wk
    return pulses


def curve_minima(x, y) -> np.ndarray:
    """Interior local minima of a sampled curve, refined by a parabola through 3 samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = []
    for k in range(1, x.size - 1):
        if y[k] < y[k - 1] and y[k] <= y[k + 1]:
            x0, x1, x2 = x[k - 1:k + 2]
            y0, y1, y2 = y[k - 1:k + 2]
            den = (x0 - x1) * (x0 - x2) * (x1 - x2)
            a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
            b = (x2 ** 2 * (y0 - y1) + x1 ** 2 * (y2 - y0) + x0 ** 2 * (y1 - y2)) / den
            out.append(-b / (2 * a) if a > 0 else x1)
    return np.array(out)


def rabi_minima(template: HamiltonianSpec, max_area: float = 7 * math.pi, step: float = 0.05 * math.pi,
                delta_opt: float = 0.0, diss: Dissipators | None = None, jobs: int = 1,
                **kw) -> np.ndarray:
    """Control-pulse areas (rad) at which the final T+ population is locally minimal."""
    areas = np.arange(step, max_area + 0.5 * step, step)
    return curve_minima(areas, rabi_sweep(template, areas, delta_opt, diss, jobs, **kw))
