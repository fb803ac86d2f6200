"""
   Global damped-sinusoid fit of several noisy Rabi curves sharing one
   frequency and damping
"""
import numpy as np

from auger_sim import fitlab

rng = np.random.default_rng(7)
theta = np.linspace(0, 4 * np.pi, 80)
model = fitlab.damped_sinusoid()
truth = [(0.45, 15.0, 1.0, np.pi / 2, 0.5), (0.30, 15.0, 1.0, np.pi / 2, 0.4)]
sets = [(theta, model(theta, np.array(p)) + 0.01 * rng.standard_normal(theta.size)) for p in truth]

res = fitlab.fit_global(model, sets, shared=("tau", "omega"))
for name in res.names:
    print("%-10s %9.4f +- %.4f" % (name, res[name], res.errors[name]))
