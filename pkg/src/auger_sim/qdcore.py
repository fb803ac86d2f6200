"""Shared domain types, constants and pulse-envelope mathematics.

Units are fixed across the package: energies in meV, times in ps, angular
frequencies in rad/ps and ordinary frequencies in THz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class PhysConstants:
    hbar: float = 0.6582119569        # meV ps
    m0: float = 5.68563e-3            # meV ps^2 / nm^2

    @property
    def planck_h(self) -> float:
        # derived so that h = 2 pi hbar holds to machine precision
        return 2.0 * math.pi * self.hbar


CONST = PhysConstants()
HBAR = CONST.hbar
PLANCK_H = CONST.planck_h
M0 = CONST.m0

# FWHM = FWHM_TO_SIGMA * sigma for a Gaussian
FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

LEVEL_LABELS = ("h1", "h2", "h3", "h4", "h5", "T+")


def energy_to_frequency(energy):
    """Energy in meV to ordinary frequency in THz."""
    return np.divide(energy, PLANCK_H)


def energy_to_angular_frequency(energy):
    """Energy in meV to angular frequency in rad/ps."""
    return np.divide(energy, HBAR)


def pulse_overlap_fwhm(fwhm1: float, fwhm2: float) -> float:
    """FWHM of the convolution of two Gaussians (pump-probe resolution)."""
    if fwhm1 <= 0 or fwhm2 <= 0:
        raise ValueError("pulse widths must be positive")
    return math.hypot(fwhm1, fwhm2)


@dataclass(frozen=True)
class LevelSystem:
    """Hole orbitals h1..h5 plus the positive trion.

    ``orbital_energy`` is measured from h1 (meV), ``dipole_rel`` is the
    T+ <-> h_n dipole relative to the fundamental transition, and
    ``hole_lifetime`` holds the phonon relaxation times of h2..h5 (ps).
    """

    levels: tuple[str, ...]
    orbital_energy: Mapping[str, float]
    dipole_rel: Mapping[str, float]
    trion_lifetime: float
    hole_lifetime: Mapping[str, float]
    approximate: tuple[str, ...] = ()

    def __post_init__(self):
        holes = [lv for lv in self.levels if lv != "T+"]
        if not holes or holes[0] != "h1":
            raise ValueError("level list must start with h1")
        energies = [self.orbital_energy[lv] for lv in holes]
        if energies[0] != 0.0:
            raise ValueError("h1 energy must be exactly 0")
        if any(b <= a for a, b in zip(energies, energies[1:])):
            raise ValueError(f"orbital energies must be strictly increasing, got {energies}")
        if self.dipole_rel.get("h1", 1.0) != 1.0:
            raise ValueError("dipole_rel of h1 is the reference and must equal 1")
        if any(v <= 0 for v in self.dipole_rel.values()):
            raise ValueError("relative dipole moments must be positive")
        if self.trion_lifetime <= 0 or any(v <= 0 for v in self.hole_lifetime.values()):
            raise ValueError("lifetimes must be positive")
        object.__setattr__(self, "orbital_energy", dict(self.orbital_energy))
        object.__setattr__(self, "dipole_rel", {"h1": 1.0, **dict(self.dipole_rel)})
        object.__setattr__(self, "hole_lifetime", dict(self.hole_lifetime))

    @property
    def hole_levels(self) -> list[str]:
        return [lv for lv in self.levels if lv != "T+"]

    def splitting(self, label: str) -> float:
        """Energy of ``label`` above h1 in meV."""
        return self.orbital_energy[label]

    def dipole_ratio(self, label: str) -> float:
        """mu1/mu_n for the Auger transition T+ <-> ``label``."""
        return 1.0 / self.dipole_rel[label]

    def lifetimes(self) -> list[float]:
        """Relaxation lifetimes ordered h2, h3, ... (ps)."""
        return [self.hole_lifetime[lv] for lv in self.hole_levels[1:]]


def default_level_system() -> LevelSystem:
    """Default configuration of the droplet-etched GaAs dot.

    h3..h5 energies and all dipole ratios except mu1/mu2 are rough
    placeholders and flagged ``approximate``.
    """
    return LevelSystem(
        levels=LEVEL_LABELS,
        orbital_energy={"h1": 0.0, "h2": 4.36, "h3": 5.9, "h4": 7.3, "h5": 8.7},
        dipole_rel={"h1": 1.0, "h2": 0.2, "h3": 0.1, "h4": 0.08, "h5": 0.06},
        trion_lifetime=400.0,
        hole_lifetime={"h2": 161.0, "h3": 28.0, "h4": 22.0, "h5": 15.0},
        approximate=("h3", "h4", "h5"),
    )


@dataclass(frozen=True)
class Pulse:
    """A phase-locked control field addressing T+ <-> ``target``.

    ``fwhm`` refers to the field envelope unless ``fwhm_convention`` is
    ``"intensity"``. ``shape="square"`` gives a rectangular envelope of
    width ``fwhm`` carrying the same area.
    """

    target: str
    area: float
    fwhm: float
    arrival: float = 0.0
    detuning: float = 0.0
    phase: float = 0.0
    shape: str = "gaussian"
    fwhm_convention: str = "field"

    def __post_init__(self):
        if self.fwhm <= 0:
            raise ValueError("fwhm must be positive")
        if self.area < 0:
            raise ValueError("pulse area must be non-negative")
        if self.shape not in ("gaussian", "square"):
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if self.fwhm_convention not in ("field", "intensity"):
            raise ValueError(f"unknown fwhm convention {self.fwhm_convention!r}")

    @property
    def field_fwhm(self) -> float:
        # |E|^2 Gaussian with FWHM w  <=>  E Gaussian with FWHM sqrt(2) w
        if self.fwhm_convention == "intensity":
            return math.sqrt(2.0) * self.fwhm
        return self.fwhm

    @property
    def sigma(self) -> float:
        return self.field_fwhm / FWHM_TO_SIGMA

    @property
    def peak_rabi(self) -> float:
        """Peak Rabi frequency in rad/ps."""
        if self.shape == "square":
            return self.area / self.field_fwhm
        return self.area / (self.sigma * math.sqrt(2.0 * math.pi))

    def support(self, nsigma: float = 8.0) -> tuple[float, float]:
        """Interval outside which the envelope is negligible (exactly 0 for square)."""
        if self.shape == "square":
            half = 0.5 * self.field_fwhm
        else:
            half = nsigma * self.sigma
        return self.arrival - half, self.arrival + half

    def envelope(self, t):
        return envelope(self, t)

    def shifted(self, dt: float, **changes) -> "Pulse":
        from dataclasses import replace
        return replace(self, arrival=self.arrival + dt, **changes)


def envelope(p: Pulse, t):
    """Real Rabi-frequency envelope Omega(t) of pulse ``p`` in rad/ps.

    Integrates to ``p.area`` over the real line.
    """
    t = np.asarray(t, dtype=float)
    if p.shape == "square":
        half = 0.5 * p.field_fwhm
        out = np.where(np.abs(t - p.arrival) <= half, p.peak_rabi, 0.0)
    else:
        x = (t - p.arrival) / p.sigma
        out = p.peak_rabi * np.exp(-0.5 * x * x)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple[Pulse, ...]
    duration: float | None = None

    def __post_init__(self):
        ps = tuple(sorted(self.pulses, key=lambda p: p.arrival))
        object.__setattr__(self, "pulses", ps)
        minimum = max((p.arrival + 3 * p.field_fwhm for p in ps), default=0.0)
        if self.duration is None:
            object.__setattr__(self, "duration", minimum)
        elif self.duration < minimum:
            raise ValueError(
                f"sequence duration {self.duration} ps shorter than last arrival + 3 fwhm ({minimum} ps)")

    def __len__(self):
        return len(self.pulses)

    def __iter__(self):
        return iter(self.pulses)

    def __getitem__(self, i):
        return self.pulses[i]


def make_sequence(pulses: Sequence[Pulse], duration: float | None = None) -> PulseSequence:
    return PulseSequence(tuple(pulses), duration)


def level_system_from_dict(doc: Mapping) -> LevelSystem:
    return LevelSystem(
        levels=tuple(doc.get("levels", LEVEL_LABELS)),
        orbital_energy=doc["orbital_energy"],
        dipole_rel=doc.get("dipole_rel", {"h1": 1.0}),
        trion_lifetime=float(doc["trion_lifetime"]),
        hole_lifetime=doc.get("hole_lifetime", {}),
        approximate=tuple(doc.get("approximate", ())),
    )


def pulse_from_dict(doc: Mapping) -> Pulse:
    return Pulse(**dict(doc))


def sequence_from_dict(doc: Mapping) -> PulseSequence:
    return PulseSequence(tuple(pulse_from_dict(p) for p in doc["pulses"]), doc.get("duration"))
