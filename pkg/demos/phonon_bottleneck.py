"""
   Hole relaxation time versus level spacing from the super-ohmic
   spectral density with Gaussian cutoff
"""
from pathlib import Path

import numpy as np

from auger_sim.io import write_csv
from auger_sim.relaxation import phonon

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

fit = phonon.fit_phonon_params([(4.36, 161.0), (2.90, 47.0)])
print("hbar w_c = %.3f meV, alpha = %.4g ps^2 (exact through both points)" % (fit.hbar_omega_c, fit.alpha))

# alpha is normalisation dependent; the reference pair gives the right shape only
reference = phonon.PhononSpectralDensity.from_energy(0.0052, 2.11)
print("reference parameters: tau(4.36) = %.1f ps, tau(2.90) = %.1f ps" %
      (phonon.phonon_tau(4.36, reference), phonon.phonon_tau(2.90, reference)))
print("J ratio 2.90/4.36 meV: %.2f" % (phonon.phonon_J(2.90, reference) / phonon.phonon_J(4.36, reference)))

E = np.linspace(0.5, 8, 76)
write_csv(out / "phonon_tau.csv", ["delta_E_meV", "tau_ps"], np.column_stack([E, phonon.phonon_tau(E, fit.density)]))
