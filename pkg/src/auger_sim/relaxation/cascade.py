"""Single-phonon cascade h_n -> h_{n-1} -> ... -> h1 as a linear rate chain.

Populations have the closed form of a chain of first-order decays. With
Laplace transform P_n(s) = prod_{j<n} k_j / prod_{j<=n} (s + k_j) the
inverse transform is a sum of (polynomial x exponential) terms, one per
distinct rate; coinciding rates give the confluent t^r e^{-kt} terms.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .. import fitlab
from ..lambda_sim import Trajectory

log = logging.getLogger(__name__)

# rates closer than this (1/ps) are treated as one repeated pole
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class CascadeSpec:
    """``lifetimes`` are tau_h2, tau_h3, ... in ps; ``initial`` is e.g. "h5"."""

    initial: str
    lifetimes: tuple[float, ...]
    grid: tuple[float, ...] | np.ndarray = tuple(np.arange(0.0, 1001.0))

    def __post_init__(self):
        if any(t <= 0 for t in self.lifetimes):
            raise ValueError("lifetimes must be positive")
        n = self.level_index
        if n < 2 or n > len(self.lifetimes) + 1:
            raise ValueError(f"initial level {self.initial!r} outside h2..h{len(self.lifetimes) + 1}")
        object.__setattr__(self, "lifetimes", tuple(float(t) for t in self.lifetimes))
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))

    @property
    def level_index(self) -> int:
        return int(self.initial.lstrip("h"))

    @classmethod
    def from_lifetimes(cls, initial: str, lifetime_map: Mapping[str, float], grid=None) -> "CascadeSpec":
        n = int(initial.lstrip("h"))
        taus = tuple(lifetime_map[f"h{k}"] for k in range(2, n + 1))
        return cls(initial, taus) if grid is None else cls(initial, taus, grid)


def _group_poles(rates: Sequence[float]):
    """Cluster rates into (pole, multiplicity)."""
    poles: list[list[float]] = []
    for k in rates:
        for p in poles:
            if abs(p[0] - k) < DEGENERACY_TOL:
                p[1] += 1
                break
        else:
            poles.append([k, 1])
    return [(p, int(m)) for p, m in poles]


def _chain_population(rates: Sequence[float], t: np.ndarray) -> np.ndarray:
    """Inverse Laplace transform of prod(rates[:-1]) / prod(s + rates)."""
    rates = list(rates)
    gain = math.prod(rates[:-1])
    if gain == 0.0:
        return np.zeros_like(t)
    poles = _group_poles(rates)
    out = np.zeros_like(t)
    for i, (a, m) in enumerate(poles):
        others = [(b, mb) for j, (b, mb) in enumerate(poles) if j != i]
        # g(s) = prod (s + b)^-mb ; derivatives at s = -a via g' = g h
        def h_deriv(order: int) -> float:
            return sum(-mb * (-1) ** order * math.factorial(order) / (b - a) ** (order + 1)
                       for b, mb in others)
        g = [math.prod((b - a) ** -mb for b, mb in others)]
        for nn in range(m - 1):
            g.append(sum(math.comb(nn, i2) * g[i2] * h_deriv(nn - i2) for i2 in range(nn + 1)))
        term = np.zeros_like(t)
        for r in range(m):
            coef = g[m - 1 - r] / (math.factorial(m - 1 - r) * math.factorial(r))
            term += coef * t ** r
        out += term * np.exp(-a * t)
    return gain * out


def cascade_populations(initial_index: int, lifetimes: Sequence[float], t) -> np.ndarray:
    """Populations P_1..P_N (columns, N = initial_index) on times ``t``.

    ``lifetimes[k]`` is the lifetime of h_{k+2}; h1 is stable.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    # k[n] is the decay rate of h_{n+1}; the chain runs from initial_index down to 1
    k = [0.0] + [1.0 / tau if np.isfinite(tau) else 0.0 for tau in lifetimes[: initial_index - 1]]
    cols = []
    for n in range(1, initial_index + 1):
        # rates from the initial level down to level n
        chain = [k[j - 1] for j in range(initial_index, n - 1, -1)]
        cols.append(_chain_population(chain, t))
    P = np.column_stack(cols)
    return np.clip(P, 0.0, 1.0)


def cascade_evolve(spec: CascadeSpec) -> Trajectory:
    """Closed-form cascade from ``spec.initial``; columns ordered (P_N, ..., P_1)."""
    n = spec.level_index
    P = cascade_populations(n, spec.lifetimes, spec.grid)
    labels = tuple(f"h{j}" for j in range(n, 0, -1))
    return Trajectory(np.asarray(spec.grid), P[:, ::-1].copy(), labels)


def rate_matrix(initial_index: int, lifetimes: Sequence[float]) -> np.ndarray:
    """Generator A with dP/dt = A P for P = (P_1..P_N)."""
    k = np.array([0.0] + [1.0 / tau for tau in lifetimes[: initial_index - 1]])
    return np.diag(-k) + np.diag(k[1:], 1)


@dataclass(frozen=True)
class FillingFit:
    tau_fill: float
    stderr: float
    window: tuple[float, float]
    model: str
    fit: fitlab.FitResult


def upper_transit_time(lifetimes: Sequence[float], initial_index: int) -> float:
    """Mean time spent above h2 when starting in h_initial (sum of tau_h3..tau_hN)."""
    return float(sum(lifetimes[1: initial_index - 1]))


def fit_filling_time(traj: Trajectory, window: tuple[float, float] | None = None,
                     model: str = "exponential_fill", lifetimes: Sequence[float] | None = None
                     ) -> FillingFit:
    """Single-exponential fit of the h1 filling curve.

    ``model="exponential_fill"`` fits A (1 - e^{-t/tau}) + C; ``"pure"``
    fits 1 - e^{-t/tau} alone. The default window starts once the fast
    upper part of the cascade has been traversed (``upper_transit_time``,
    needs ``lifetimes``) and ends at 1000 ps or the grid end.
    """
    t = np.asarray(traj.times, dtype=float)
    p1 = traj.population("h1")
    if window is None:
        start = 0.0
        if lifetimes is not None:
            n = max(int(lb.lstrip("h")) for lb in traj.labels)
            start = upper_transit_time(lifetimes, n)
        window = (start, min(1000.0, float(t.max())))
    lo, hi = window
    if lo < t.min() - 1e-12 or hi > t.max() + 1e-12 or hi <= lo:
        raise ValueError(f"window {window} outside the trajectory grid [{t.min()}, {t.max()}]")
    m = (t >= lo) & (t <= hi)
    x, y = t[m], p1[m]
    if model == "pure":
        fm = fitlab.Model("pure_fill", ("tau",), lambda x, p: 1.0 - np.exp(-x / p[0]),
                          lambda x, p: np.column_stack([-np.exp(-x / p[0]) * x / p[0] ** 2]),
                          None, {"tau": (1e-12, np.inf)})
        guess = fitlab.exponential_fill().guess(x, y)[1]
        res = fitlab.nls_fit(fm, x, y, p0=[guess])
    elif model == "exponential_fill":
        res = fitlab.nls_fit(fitlab.exponential_fill(), x, y)
    else:
        raise ValueError(f"unknown filling model {model!r}")
    return FillingFit(res["tau"], res.errors["tau"], (lo, hi), model, res)


def filling_sensitivity(traj: Trajectory, starts=(0.0, 25.0, 50.0, 65.0, 100.0), end: float = 1000.0):
    """Table of (window_start, tau_fill free A/C, tau_fill pure) for the log and CSV."""
    rows = []
    for s in starts:
        free = fit_filling_time(traj, (s, end), "exponential_fill").tau_fill
        pure = fit_filling_time(traj, (s, end), "pure").tau_fill
        log.info("filling-time window start %g ps: free-offset %.3f ps, pure %.3f ps", s, free, pure)
        rows.append((s, free, pure))
    return np.array(rows)
