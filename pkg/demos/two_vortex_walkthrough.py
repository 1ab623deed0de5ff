"""From the radial profile to a helical two-vortex solution at eps = 0.2.

Run with `python3 demos/two_vortex_walkthrough.py`.  Takes about 15 s.
"""
import math

from glhelix.fields import build_ansatz, make_grid, two_vortex
from glhelix.norms import norm_star_star
from glhelix.operators import compute_error
from glhelix.profile import default_profile
from glhelix.reduction import solve_reduced
from glhelix.solver import gibbons_minimum, interior_residual, solve_full, track_solution

eps = 0.2
p = default_profile()
print("profile: w'(0) = %.8f, w(10) = %.6f" % (p.alpha_slope, p(10.0)[0]))

# The product ansatz and the size of its error in the weighted norm.
cfg = two_vortex(eps, 1.0)
g = make_grid(cfg)
V = build_ansatz(cfg, p, g)
err = compute_error(cfg, p, g)
rep = norm_star_star(err.R, base=V)
print("ansatz on a %d x %d grid, ||R||** = %.4g (times |log eps|: %.4g)"
      % (g.N1, g.N2, rep.total, rep.total * abs(math.log(eps))))

# Leading-order reduced equation: the root where the projection vanishes.
red = solve_reduced(eps, p)
print("leading-order root d_hat = %.5f, sqrt(a0/a1) = %.5f" % (red.d0, red.reference))

# Full projected solve with the outer root search over d_hat.
v, full, trace = solve_full(eps, p)
vs, d_track = track_solution(v)
print("full solve: d_hat = %.5f after %d inner solves" % (full.d0, len(full.samples)))
print("  max |S(v)| = %.2e, tracked d_hat = %.5f, min |v| near the edge = %.5f"
      % (interior_residual(v), d_track, gibbons_minimum(v)))
for z, w in vs:
    print("  vortex at (%+.4f, %+.4f), degree %+d" % (z.real, z.imag, w))
