"""
   Stimulated Auger Rabi oscillations: area sweep of the control pulse
   with and without cross-coupling, and the Stark-compensating detuning
"""
import math
from pathlib import Path

import numpy as np

from auger_sim import lambda_sim as ls
from auger_sim.io import write_csv

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

areas = np.linspace(0.1, 5.5, 55) * math.pi
off = ls.default_spec(cross_coupling=False)
on = ls.default_spec(cross_coupling=True)

# with cross-coupling the pi pulse is no longer optimal on resonance
d_star, transfer = ls.stark_optimal_detuning(on)
print("delta* = %.4f meV, transfer %.4f" % (d_star, transfer))
print("transfer at delta = 0: %.4f" % (1 - ls.rabi_sweep(on, [math.pi])[0]))

curves = [ls.rabi_sweep(off, areas), ls.rabi_sweep(on, areas), ls.rabi_sweep(on, areas, d_star)]
for name, c in zip(("cross off", "cross on", "cross on, delta*"), curves):
    m = ls.curve_minima(areas, c) / math.pi
    print("%-18s minima/pi: %s" % (name, np.round(m, 3)))

write_csv(out / "auger_rabi.csv", ["theta_rad", "p_T+_off", "p_T+_on", "p_T+_on_dstar"],
          np.column_stack([areas] + curves))
