"""
   Single-phonon cascade h5 -> h1 and the h1 filling time, with the
   dependence on the fit window
"""
from pathlib import Path

import numpy as np

from auger_sim.io import write_csv
from auger_sim.qdcore import default_level_system, pulse_overlap_fwhm
from auger_sim.relaxation import cascade

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

system = default_level_system()
spec = cascade.CascadeSpec.from_lifetimes("h5", system.hole_lifetime)
traj = cascade.cascade_evolve(spec)

fit = cascade.fit_filling_time(traj, lifetimes=spec.lifetimes)
print("tau_fill = %.1f +- %.1f ps over %s ps" % (fit.tau_fill, fit.stderr, fit.window))
print("window start, free-offset fit, pure 1 - exp fit")
print(np.round(cascade.filling_sensitivity(traj), 1))

# pump-probe time resolution for two 6 ps pulses
print("cross-correlation FWHM %.3f ps" % pulse_overlap_fwhm(6.0, 6.0))

write_csv(out / "cascade.csv", ["t_ps"] + ["P_" + lb for lb in traj.labels],
          np.column_stack([traj.times, traj.populations]))
