"""Stationary law of the proportion in patch 1.

For two patches the proportion y = X1 / (X1 + X2) of the competition-free
system is a scalar diffusion on (0, 1).  Its speed-measure density is
computed on an adaptive grid and compared with an explicit closed form.
"""

import numpy as np

from patchdyn import reduce_2patch, stationary_density, two_patch
from patchdyn.reduce1d import density_gap, density_moment, explicit_log_rho_nondegenerate

sig = np.sqrt(7.0)
diff = reduce_2patch(two_patch(3, 4, 1, 1, sig, sig, 0))
dens = stationary_density(diff)

print(f"truncation eps = {dens.eps:.2e}, tail mass bound = {dens.tail_mass:.1e}")
print(f"total mass     = {dens.mass():.12f}")
print(f"mean of y      = {density_moment(dens, 1):.12f}")
print(f"E[phi(y)] = r  = {dens.expect(diff.phi):.12f}")
gap = density_gap(dens, lambda y: explicit_log_rho_nondegenerate(y, 3, 4, 1, 1, 7, 7))
print(f"relative gap to the explicit density: {gap:.1e}")

print()
print("   y      density")
for y in (0.05, 0.2, 0.4, 0.6, 0.8, 0.95):
    print(f"  {y:4.2f}  {dens.pdf(y)[0]:9.5f}")
