"""Extinction at rate r in every patch.

When r < 0 the log abundance of every patch declines along a common
straight line of slope r, whatever the dispersal between the patches.
"""

import numpy as np

from patchdyn import SimConfig, extinction_slopes, r_closedform_2patch, simulate_x, two_patch

spec = two_patch(0.0, 0.2, 1, 1, np.sqrt(1.5), np.sqrt(1.5), 0.3)
r = r_closedform_2patch(spec).value
path = simulate_x(spec, SimConfig(dt=1e-3, t_end=2000, seed=2, record_stride=100), [1.0, 1.0])

print(f"closed-form r = {r:.5f}")
for s in extinction_slopes(path):
    print(f"patch {s.patch + 1}: slope of log X = {s.slope:.5f} +/- {s.stderr:.2g}")
print(f"log X at t = {path.times[-1]:.0f}: {path.log_states[-1]}")
