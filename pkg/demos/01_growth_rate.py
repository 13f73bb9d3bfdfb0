"""Three routes to the stochastic growth rate.

Two patches with growth rates 3 and 4, symmetric dispersal 1 and noise
variance 7 in each patch.  With one shared driver the proportion in patch 1
settles on a fixed root, so r has a closed form.  With independent drivers
the proportion keeps fluctuating and r is a quadrature against its
stationary density.  The simulated routes agree with both.
"""

import numpy as np

from patchdyn import SimConfig, r_closedform_2patch, r_logslope, r_timeavg, two_patch, ystar

sig = np.sqrt(7.0)
cfg = SimConfig(dt=1e-3, t_end=2000, seed=1)

for rho in (1.0, 0.0):
    spec = two_patch(3, 4, 1, 1, sig, sig, rho)
    cf = r_closedform_2patch(spec)
    ta = r_timeavg(spec, cfg)
    ls = r_logslope(spec, cfg)
    print(f"rho = {rho}")
    print(f"  closed form   r = {cf.value:.6f}  ({cf.details['case']})")
    print(f"  time average  r = {ta.value:.6f} +/- {ta.stderr:.2g}")
    print(f"  log slope     r = {ls.value:.6f} +/- {ls.stderr:.2g}")

print()
print(f"equilibrium proportion in patch 1: y* = {ystar(3, 4, 1, 1):.6f}")
print("r is positive in both cases: the population persists,")
print("but shared noise costs more than a unit of growth rate.")
