"""Hole relaxation: phonon cascade, spectral density and tunneling estimates."""
from .cascade import (CascadeSpec, FillingFit, cascade_evolve, cascade_populations,
                      filling_sensitivity, fit_filling_time, rate_matrix, upper_transit_time)
from .phonon import (PhononFit, PhononSpectralDensity, endpoint_cutoff, fit_phonon_params,
                     phonon_J, phonon_tau)
from .wkb import (BarrierProfile, TunnelingEstimate, biased_barrier, hole_velocity,
                  rectangular_barrier, tunneling_estimate, wkb_exponent, wkb_transmission,
                  wkb_tunneling_time)
