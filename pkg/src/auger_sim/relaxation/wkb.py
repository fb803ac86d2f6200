"""WKB tunneling of a hole out of the dot through a piecewise-linear barrier.

Energies are measured from the dot's valence-band reference, with E_v(z)
the barrier height seen by the hole at depth z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..qdcore import HBAR, M0

DEFAULT_HOLE_MASS = 0.59
DEFAULT_DOT_HEIGHT = 5.0


@dataclass(frozen=True)
class BarrierProfile:
    z: np.ndarray           # nm, knots
    ev: np.ndarray          # meV, band edge at the knots
    l_qd: float = DEFAULT_DOT_HEIGHT
    m_b: float = DEFAULT_HOLE_MASS
    m_dot: float = DEFAULT_HOLE_MASS

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        ev = np.asarray(self.ev, dtype=float)
        if z.ndim != 1 or z.shape != ev.shape or z.size < 2:
            raise ValueError("need matching 1-D knot arrays with at least 2 knots")
        if np.any(np.diff(z) < 0):
            raise ValueError("knots must be non-decreasing in z")
        if not np.all(np.isfinite(ev)):
            raise ValueError("band edge must be finite")
        if z[-1] - z[0] < 0 or self.l_qd <= 0 or self.m_b <= 0 or self.m_dot <= 0:
            raise ValueError("widths and masses must be positive")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "ev", ev)

    @property
    def width(self) -> float:
        return float(self.z[-1] - self.z[0])

    @property
    def height(self) -> float:
        return float(self.ev.max())

    def split(self, z_new: float) -> "BarrierProfile":
        """Same profile with an extra knot inserted at ``z_new``."""
        if not self.z[0] < z_new < self.z[-1]:
            raise ValueError("split point must lie inside the barrier")
        i = int(np.searchsorted(self.z, z_new))
        ev_new = np.interp(z_new, self.z, self.ev)
        return BarrierProfile(np.insert(self.z, i, z_new), np.insert(self.ev, i, ev_new),
                              self.l_qd, self.m_b, self.m_dot)


def rectangular_barrier(height: float, width: float, **kw) -> BarrierProfile:
    return BarrierProfile(np.array([0.0, width]), np.array([height, height]), **kw)


def biased_barrier(height: float, width: float, bias: float, slope_per_volt: float, **kw) -> BarrierProfile:
    """Barrier tilted linearly by a gate bias: E_v drops by slope_per_volt * bias (meV) across it."""
    return BarrierProfile(np.array([0.0, width]),
                          np.array([height, height - slope_per_volt * bias]), **kw)


def _segment_action(u0: np.ndarray, u1: np.ndarray, length: np.ndarray) -> np.ndarray:
    """Integral of sqrt(max(U, 0)) over a segment where U is linear from u0 to u1."""
    out = np.zeros_like(u0)
    both = (u0 >= 0) & (u1 >= 0) & ((u0 > 0) | (u1 > 0))
    a, b = np.sqrt(u0[both]), np.sqrt(u1[both])
    # (2L/3) (u1^1.5 - u0^1.5)/(u1 - u0), written without the cancellation
    out[both] = (2.0 / 3.0) * length[both] * (a * a + a * b + b * b) / (a + b)
    cross = (u0 > 0) != (u1 > 0)
    cross &= ~both
    hi = np.maximum(u0[cross], u1[cross])
    lo = np.minimum(u0[cross], u1[cross])
    frac = hi / (hi - lo)
    out[cross] = (2.0 / 3.0) * length[cross] * frac * np.sqrt(hi)
    return out


def wkb_exponent(E: float, b: BarrierProfile) -> float:
    """-(log TC), the WKB action (2/hbar) int sqrt(2 m_b (E_v - E)) dz over the forbidden region."""
    u = b.ev - E
    s = _segment_action(u[:-1], u[1:], np.diff(b.z))
    k = math.sqrt(2.0 * b.m_b * M0) / HBAR
    return float(2.0 * k * s.sum())


def wkb_transmission(E: float, b: BarrierProfile) -> float:
    """Tunneling probability; 1 when E is at or above the barrier top."""
    if E >= b.height:
        return 1.0
    return math.exp(-wkb_exponent(E, b))


def hole_velocity(E: float, m_dot: float = DEFAULT_HOLE_MASS) -> float:
    """Parabolic-band group velocity sqrt(2E/m) in nm/ps."""
    if E <= 0:
        raise ValueError("hole energy must be positive")
    return math.sqrt(2.0 * E / (m_dot * M0))


@dataclass(frozen=True)
class TunnelingEstimate:
    tau_ps: float           # +inf when 1/TC overflows
    log10_tau_ps: float
    transmission: float
    log_transmission: float
    attempt_time_ps: float
    underflow: bool


def tunneling_estimate(E: float, b: BarrierProfile) -> TunnelingEstimate:
    attempt = 2.0 * b.l_qd / hole_velocity(E, b.m_dot)
    action = 0.0 if E >= b.height else wkb_exponent(E, b)
    log_tau = math.log(attempt) + action
    underflow = action > 700.0
    tc = math.exp(-action)
    tau = math.inf if underflow or log_tau > 709.0 else attempt / tc
    return TunnelingEstimate(tau, log_tau / math.log(10.0), tc, -action, attempt, underflow)


def wkb_tunneling_time(E: float, b: BarrierProfile) -> float:
    """Escape time (ps) = round-trip time in the dot divided by TC; +inf if TC underflows."""
    return tunneling_estimate(E, b).tau_ps
