"""Rotating filament equilibria and a Newton solve back onto one of them."""
import numpy as np

from glhelix.filaments import (centered_equilibrium, find_critical_point,
                               gauge_distance, ode_residual, polygon_equilibrium,
                               renormalized_energy)

for n in range(2, 7):
    tr = polygon_equilibrium(n)
    print("polygon n=%d  residual %.1e  W_eps(0.05) = %.6f"
          % (n, ode_residual(tr)[0], renormalized_energy(tr, 0.05)))
for n in range(5, 9):
    print("centered n=%d residual %.1e" % (n, ode_residual(centered_equilibrium(n))[0]))

f0 = polygon_equilibrium(3)
start = f0.with_coeffs(1.05 * f0.coeffs)
out = find_critical_point(start)
print("Newton from 1.05 f0: converged=%s in %d steps, distance to f0 %.1e"
      % (out.meta["converged"], out.meta["iterations"], gauge_distance(out, f0)))
f = out.sample()
print("pair distances stay at", np.round(np.abs(f[0] - f[1])[:4], 12))
