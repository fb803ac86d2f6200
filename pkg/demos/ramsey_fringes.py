"""
   Ramsey interference between h1 and h2: analytic fringes, a few points
   from the full four-pulse simulation, DFT frequency and envelope T2
"""
import math
from pathlib import Path

import numpy as np

from auger_sim import lambda_sim as ls
from auger_sim import ramsey as rm
from auger_sim.io import write_csv
from auger_sim.qdcore import PLANCK_H

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

p = rm.CoherenceParams(tau_h2=161.0, t2_star=1930.0, nu=4.36 / PLANCK_H)
print("nu = %.4f THz, T2 = %.1f ps" % (p.nu, p.t2))

fine = np.arange(0, 24, 0.1)
fringes = rm.ramsey_population(p, fine)
print("DFT peak %.4f THz" % rm.dft_peak(fine, fringes, expected_nu=p.nu))

# the master equation with the same T1 and T2* follows the analytic curve
diss = ls.Dissipators.standard(trion_lifetime=None, hole_lifetime=161.0, pure_dephasing=1930.0)
seq = ls.ramsey_pulse_sequence()
for dt in (0.0, 0.25, 0.5, 100.0):
    sim = ls.ramsey_sequence_sim(seq, dt, diss)["T+"]
    print("dt = %6.2f ps  sim %.4f  analytic %.4f" % (dt, sim, rm.ramsey_population(p, dt)))

coarse = np.linspace(0, 800, 20)
amps = rm.fringe_amplitudes(p, coarse)
amps *= 1 + 0.05 * np.random.default_rng(1).standard_normal(amps.size)
env = rm.fringe_envelope_fit(coarse, amps)
print("T2 = %.0f +- %.0f ps  ->  T2* = %.2f ns" % (env.t2, env.stderr, rm.coherence_relation(161.0, env.t2) / 1e3))

write_csv(out / "ramsey_fine.csv", ["delta_t_ps", "p_h2"], np.column_stack([fine, fringes]))
write_csv(out / "ramsey_envelope.csv", ["delay_ps", "amplitude"], np.column_stack([coarse, amps]))
