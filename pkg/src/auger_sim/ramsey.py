"""Analytic Bloch-vector model of the h1/h2 superposition and fringe analysis.

Sign convention: after the first pulse pair the transverse Bloch vector
points along -x, so that M(t) = (-D cos 2 pi nu t, -D sin 2 pi nu t, 1 - e^{-t/tau})
with D = exp(-t (1/(2 tau) + 1/T2*)). The final h2 population after the
second pair is 1/2 (1 - D sin 2 pi nu dt).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fitlab


class NoSolutionError(ValueError):
    pass


class UnboundedParameterError(fitlab.FitError):
    pass


class AliasingError(ValueError):
    pass


@dataclass(frozen=True)
class CoherenceParams:
    tau_h2: float    # ps, population lifetime of the upper orbital
    t2_star: float   # ps, pure dephasing time
    nu: float        # THz, precession frequency

    def __post_init__(self):
        if min(self.tau_h2, self.t2_star, self.nu) <= 0:
            raise ValueError("coherence parameters must be positive")

    @property
    def decoherence_rate(self) -> float:
        """1/T2 in 1/ps."""
        return 1.0 / (2.0 * self.tau_h2) + 1.0 / self.t2_star

    @property
    def t2(self) -> float:
        return 1.0 / self.decoherence_rate


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def bloch_evolve(p: CoherenceParams, t: float) -> BlochVector:
    if t < 0:
        raise ValueError("t must be non-negative")
    d = math.exp(-t * p.decoherence_rate)
    ph = 2.0 * math.pi * p.nu * t
    return BlochVector(-d * math.cos(ph), -d * math.sin(ph), -math.expm1(-t / p.tau_h2))


def ramsey_population(p: CoherenceParams, delta_t):
    """Final h2 population (proportional to the detected T+ emission)."""
    dt = np.asarray(delta_t, dtype=float)
    if np.any(dt < 0):
        raise ValueError("delta_t must be non-negative")
    out = 0.5 * (1.0 - np.exp(-dt * p.decoherence_rate) * np.sin(2.0 * np.pi * p.nu * dt))
    return float(out) if out.ndim == 0 else out


def coherence_relation(t1: float, t2: float) -> float:
    """Pure dephasing time T2* from T1 and T2 via 1/T2 = 1/T2* + 1/(2 T1)."""
    if t1 <= 0 or t2 <= 0:
        raise ValueError("times must be positive")
    inv = 1.0 / t2 - 1.0 / (2.0 * t1)
    if inv <= 0:
        raise NoSolutionError(f"T2 = {t2} ps >= 2 T1 = {2 * t1} ps: no finite pure dephasing time")
    return 1.0 / inv


def coherence_from(t1: float, t2_star: float) -> float:
    """T2 from T1 and T2*; ``t2_star = inf`` gives the lifetime limit 2 T1."""
    if t1 <= 0 or t2_star <= 0:
        raise ValueError("times must be positive")
    return 1.0 / (1.0 / t2_star + 1.0 / (2.0 * t1))


@dataclass(frozen=True)
class EnvelopeFit:
    t2: float
    stderr: float
    amplitude: float
    fit: fitlab.FitResult


def fringe_envelope_fit(delays, amplitudes, relative_weights: bool = True) -> EnvelopeFit:
    """Fit A exp(-dt / T2) to fringe amplitudes versus coarse delay (ps).

    With ``relative_weights`` each point is weighted by 1/amplitude^2,
    matching multiplicative noise.
    """
    x = np.asarray(delays, dtype=float)
    y = np.asarray(amplitudes, dtype=float)
    if x.size < 4:
        raise ValueError("need at least 4 fringe amplitudes")
    if np.any(y <= 0):
        raise ValueError("fringe amplitudes must be positive")
    span = float(np.ptp(x)) or 1.0
    model = fitlab.single_exponential()
    p0 = model.guess(x, y)
    p0[2] = 0.0
    if not np.isfinite(p0[1]) or p0[1] <= 0 or p0[1] > 100 * span:
        p0[1] = span
    try:
        res = fitlab.nls_fit(model, x, y, p0=p0, fixed={"C": 0.0},
                             weights=1.0 / y ** 2 if relative_weights else None)
    except (fitlab.RankDeficiencyError, fitlab.ConvergenceError) as exc:
        best = getattr(exc, "best", None)
        if best is None or best["tau"] > 100 * span:
            raise UnboundedParameterError(f"decay time unbounded by the data ({exc})") from exc
        raise
    if res["tau"] > 100 * span:
        raise UnboundedParameterError(
            f"fitted T2 = {res['tau']:.4g} ps exceeds 100x the delay span; decay not resolved")
    return EnvelopeFit(res["tau"], res.errors["tau"], res["A"], res)


def check_fringe_step(step: float, nu: float) -> None:
    """Fine-delay step must stay below 0.2/nu to resolve the fringes."""
    if step >= 0.2 / nu:
        raise AliasingError(f"fine-delay step {step} ps too coarse for nu = {nu} THz (need < {0.2 / nu:.4g} ps)")


def dft_spectrum(t, values, pad: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude spectrum (THz, arb.) of uniformly sampled data, mean removed, zero-padded."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size != v.size:
        raise ValueError("t and values lengths differ")
    if t.size < 16:
        raise ValueError("need at least 16 samples")
    dt = np.diff(t)
    if np.any(dt <= 0) or not np.allclose(dt, dt[0], rtol=1e-6, atol=0):
        raise ValueError("samples must be uniformly spaced in time")
    n_fft = int(2 ** math.ceil(math.log2(pad * t.size)))
    mag = np.abs(np.fft.rfft(v - v.mean(), n=n_fft))
    freqs = np.fft.rfftfreq(n_fft, d=dt[0])
    return freqs, mag


def dft_peak(t, values, expected_nu: float | None = None, pad: int = 8) -> float:
    """Dominant oscillation frequency (THz), refined by a log-parabola through 3 bins."""
    t = np.asarray(t, dtype=float)
    freqs, mag = dft_spectrum(t, values, pad)
    fs = 1.0 / (t[1] - t[0])
    if expected_nu is not None and fs <= 2.0 * expected_nu:
        raise AliasingError(f"sample rate {fs:.4g} THz below twice nu = {expected_nu} THz "
                            f"(Nyquist limit {fs / 2:.4g} THz)")
    # skip DC and its leakage lobe (one resolution cell)
    first = max(1, int(np.ceil((freqs.size - 1) * 2 / t.size)))
    peak_region = mag[first:]
    if peak_region.size < 3 or not np.any(peak_region > 1e-12 * max(1.0, np.abs(values).max())):
        raise ValueError("no oscillation found (signal constant after removing the mean)")
    k = first + int(np.argmax(peak_region))
    if k >= mag.size - 1:
        raise AliasingError(f"peak at the Nyquist limit {fs / 2:.4g} THz")
    a, b, c = np.log(mag[k - 1:k + 2] + 1e-300)
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    return float(freqs[k] + shift * freqs[1])


def synthetic_fringes(p: CoherenceParams, delays) -> np.ndarray:
    return ramsey_population(p, np.asarray(delays, dtype=float))


def fringe_amplitudes(p: CoherenceParams, coarse_delays, window: float | None = None,
                      step: float | None = None) -> np.ndarray:
    """Fringe amplitude in a fine-delay window starting at each coarse delay.

    Mimics the coarse/fine scan: the window (default two periods) is
    sampled with ``step`` and fitted by a sinusoid of known frequency.
    """
    period = 1.0 / p.nu
    window = window or 2 * period
    step = step or period / 32
    check_fringe_step(step, p.nu)
    out = []
    for d in np.asarray(coarse_delays, dtype=float):
        ts = d + np.arange(0.0, window, step)
        out.append(sinusoid_amplitude(ts, ramsey_population(p, ts), p.nu))
    return np.array(out)


def sinusoid_amplitude(t, values, nu: float) -> float:
    """Amplitude of the nu-component by linear least squares (offset free)."""
    t = np.asarray(t, dtype=float)
    w = 2 * np.pi * nu * (t - t.mean())
    basis = np.column_stack([np.sin(w), np.cos(w), np.ones_like(w)])
    (a, b, _), *_ = np.linalg.lstsq(basis, np.asarray(values, dtype=float), rcond=None)
    return float(math.hypot(a, b))


def read_fringe_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``delay_ps, intensity`` columns (header row required)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "delay_ps" not in rows[0] or "intensity" not in rows[0]:
        raise ValueError(f"{path}: expected columns delay_ps, intensity")
    return (np.array([float(r["delay_ps"]) for r in rows]),
            np.array([float(r["intensity"]) for r in rows]))


def write_spectrum_csv(path, freqs, mags) -> None:
    from .io import write_csv
    write_csv(Path(path), ["freq_THz", "magnitude"], np.column_stack([freqs, mags]))
