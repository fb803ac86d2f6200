"""Coherent control of hole orbitals in a quantum dot via the stimulated Auger process.

Submodules: ``qdcore`` (units, levels, pulses), ``lambda_sim`` (driven
Lambda-system master equation), ``ramsey`` (Bloch model and fringe
analysis), ``relaxation`` (cascade, phonon density, WKB), ``fitlab``
(Levenberg-Marquardt engine and model zoo) and ``cli``.
"""
from .qdcore import (CONST, HBAR, PLANCK_H, LevelSystem, Pulse, PulseSequence, envelope,
                     energy_to_angular_frequency, energy_to_frequency, make_sequence,
                     default_level_system, pulse_overlap_fwhm)
from .lambda_sim import (Dissipators, HamiltonianSpec, Trajectory, build_hamiltonian, default_spec,
                         detuning_area_map, evolve, final_state, rabi_minima, rabi_sweep,
                         ramsey_sequence_sim, stark_optimal_detuning)
from .ramsey import (CoherenceParams, coherence_relation, dft_peak, fringe_envelope_fit,
                     ramsey_population)
from .fitlab import FitResult, Model, fit_global, get_model, nls_fit
from .relaxation import (BarrierProfile, CascadeSpec, PhononSpectralDensity, cascade_evolve,
                         fit_filling_time, fit_phonon_params, phonon_J, wkb_transmission,
                         wkb_tunneling_time)

__version__ = "0.1.0"
