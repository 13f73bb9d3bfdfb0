"""Persistence diagnostics when r > 0.

Two proxies: how much time some patch spends below a small threshold, and
how quickly ensembles started far apart forget their initial condition.
Large noise lets a persistent population spend long stretches at very low
abundance, so the first proxy can be large even when r > 0.
"""

import numpy as np

from patchdyn import SimConfig, convergence_distance, occupation_fraction, simulate_x, two_patch

sig = np.sqrt(7.0)
spec = two_patch(3, 4, 1, 1, sig, sig, 1)
path = simulate_x(spec, SimConfig(dt=1e-3, t_end=2000, seed=3, record_stride=10), [1.0, 1.0])
for eta in (1e-8, 1e-4, 1e-2):
    print(f"fraction of time with some X_i <= {eta:.0e}: {occupation_fraction(path, eta).fraction:.3f}")

rep = convergence_distance(spec, SimConfig(dt=1e-3, seed=3), [0.01, 0.01], [5.0, 5.0], [1, 10, 100], 200)
print()
print("   t    W1(S_a, S_b)   null 95%")
for row in rep.rows():
    print(f"  {row['t']:4.0f}  {row['w1']:12.5f}  {row['null95']:9.5f}")
print(f"distance ratio t=100 / t=1: {rep.ratio:.3f}")
