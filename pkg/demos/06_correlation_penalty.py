"""Spatial correlation lowers the growth rate.

Growth rate against dispersal for several noise correlations, using the
same curves as the ``patchdyn figure --preset evans-correlation`` command.
Shared noise removes the averaging benefit of spreading across patches.
"""

from patchdyn.cli import figure_rows

alphas = [0.5, 1, 2, 5, 10, 20]
rhos = (0.0, 0.5, 0.9, 1.0)
rows = {(a, rho): r for a, rho, r, _, _ in figure_rows(alphas=alphas, rhos=rhos)}

print(" alpha " + "".join(f"  rho={rho:<4}" for rho in rhos) + "  1/(8 alpha)")
for a in alphas:
    print(f"{a:6.1f} " + "".join(f"  {rows[a, rho]:8.5f}" for rho in rhos) + f"  {1 / (8 * a):9.5f}")
