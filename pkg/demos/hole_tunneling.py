"""
   WKB escape time of the hole through the barrier versus gate bias
"""
from pathlib import Path

import numpy as np

from auger_sim.io import write_csv
from auger_sim.relaxation import wkb

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

E = 30.0
b = wkb.rectangular_barrier(330.0, 20.0)
est = wkb.tunneling_estimate(E, b)
print("TC = %.3g, tau = %.3g ps (%.3g s)" % (est.transmission, est.tau_ps, est.tau_ps * 1e-12))

# a bias lowers the far side of the barrier; slope per volt is a free input
biases = np.linspace(0, 2, 21)
rows = []
for v in biases:
    e = wkb.tunneling_estimate(E, wkb.biased_barrier(330.0, 20.0, v, 100.0))
    rows.append((v, e.transmission, e.tau_ps))
    print("V = %.1f  log10 tau/ps = %.2f" % (v, e.log10_tau_ps))
write_csv(out / "tunneling.csv", ["bias_V", "TC", "tau_t_ps"], rows)
