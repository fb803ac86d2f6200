"""Super-ohmic phonon spectral density with Gaussian cutoff and its fit to tau(dE)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import fitlab
from ..qdcore import HBAR


@dataclass(frozen=True)
class PhononSpectralDensity:
    """J(w) = alpha w^3 exp(-w^2 / w_c^2); alpha in ps^2, omega_c in rad/ps."""

    alpha: float
    omega_c: float

    def __post_init__(self):
        if self.alpha <= 0 or self.omega_c <= 0:
            raise ValueError("alpha and omega_c must be positive")

    @classmethod
    def from_energy(cls, alpha: float, hbar_omega_c: float) -> "PhononSpectralDensity":
        return cls(alpha, hbar_omega_c / HBAR)

    @property
    def hbar_omega_c(self) -> float:
        return self.omega_c * HBAR

    @property
    def peak_energy(self) -> float:
        """Energy (meV) at which J is maximal."""
        return self.hbar_omega_c * math.sqrt(1.5)


def phonon_J(E, p: PhononSpectralDensity):
    """Relaxation rate 1/tau (1/ps) at level spacing E (meV), taking 1/tau = J(E/hbar)."""
    E = np.asarray(E, dtype=float)
    if np.any(E <= 0):
        raise ValueError("energy spacing must be positive")
    w = E / HBAR
    out = p.alpha * w ** 3 * np.exp(-(w / p.omega_c) ** 2)
    return float(out) if out.ndim == 0 else out


def phonon_tau(E, p: PhononSpectralDensity):
    """Relaxation time (ps) under the 1/tau = J normalisation."""
    return 1.0 / np.asarray(phonon_J(E, p)) if np.ndim(E) else 1.0 / phonon_J(E, p)


@dataclass(frozen=True)
class PhononFit:
    alpha: float
    hbar_omega_c: float
    alpha_err: float
    hbar_omega_c_err: float
    residuals: np.ndarray
    exact: bool

    @property
    def density(self) -> PhononSpectralDensity:
        return PhononSpectralDensity.from_energy(self.alpha, self.hbar_omega_c)

    def to_dict(self) -> dict:
        return {"alpha_ps2": self.alpha, "alpha_stderr": self.alpha_err,
                "hbar_omega_c_meV": self.hbar_omega_c, "hbar_omega_c_stderr": self.hbar_omega_c_err,
                "residuals_log_rate": list(self.residuals), "exact": self.exact}


def _log_rate_model() -> fitlab.Model:
    # log(1/tau) = log(alpha) + 3 log(E/hbar) - (E/hbar_wc)^2
    def f(E, p):
        return np.log(p[0]) + 3 * np.log(E / HBAR) - (E / p[1]) ** 2

    def jac(E, p):
        return np.column_stack([np.full_like(E, 1.0 / p[0]), 2 * E ** 2 / p[1] ** 3])

    return fitlab.Model("phonon_log_rate", ("alpha", "hbar_omega_c"), f, jac, None,
                        {"alpha": (1e-300, np.inf), "hbar_omega_c": (1e-12, np.inf)})


def _linear_solution(E: np.ndarray, tau: np.ndarray) -> tuple[float, float]:
    """Least squares in (log alpha, 1/(hbar w_c)^2), where the model is linear."""
    y = -np.log(tau) - 3 * np.log(E / HBAR)
    A = np.column_stack([np.ones_like(E), -E ** 2])
    (la, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    if b <= 0:
        raise fitlab.FitError("data imply no finite cutoff (rate does not fall off with spacing)")
    return math.exp(la), 1.0 / math.sqrt(b)


def fit_phonon_params(data: Sequence[tuple[float, float]]) -> PhononFit:
    """Fit (alpha, hbar w_c) to (delta_E meV, tau ps) pairs in log-rate space.

    Two points are solved exactly (no error estimate); more points use
    nonlinear least squares started from the linearised solution.
    """
    arr = np.asarray(data, dtype=float).reshape(-1, 2)
    if arr.shape[0] < 2:
        raise fitlab.UnderdeterminedError("need at least 2 (delta_E, tau) points for 2 parameters")
    E, tau = arr[:, 0], arr[:, 1]
    if np.any(E <= 0) or np.any(tau <= 0):
        raise ValueError("energies and lifetimes must be positive")
    if np.unique(E).size < 2:
        raise fitlab.UnderdeterminedError("need at least 2 distinct energy spacings")
    alpha, wc = _linear_solution(E, tau)
    model = _log_rate_model()
    y = -np.log(tau)
    if arr.shape[0] == 2:
        res = y - model.func(E, np.array([alpha, wc]))
        return PhononFit(alpha, wc, float("nan"), float("nan"), res, True)
    fit = fitlab.nls_fit(model, E, y, p0=[alpha, wc])
    return PhononFit(fit["alpha"], fit["hbar_omega_c"], fit.errors["alpha"],
                     fit.errors["hbar_omega_c"], fit.residuals, False)


def endpoint_cutoff(e_hi: float, tau_hi: float, e_lo: float, tau_lo: float) -> float:
    """hbar w_c from the ratio equation through two (E, tau) points, independent of alpha."""
    # (e_lo/e_hi)^3 exp((e_hi^2 - e_lo^2)/wc^2) = tau_hi / tau_lo
    rhs = math.log(tau_hi / tau_lo) - 3 * math.log(e_lo / e_hi)
    if rhs <= 0:
        raise ValueError("no positive cutoff satisfies the ratio equation")
    return math.sqrt((e_hi ** 2 - e_lo ** 2) / rhs)
