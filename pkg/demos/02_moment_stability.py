"""
Why the exponent s < 1 matters
==============================

The s-th moment of the Green function stays bounded as the regularizer
eps shrinks, but only for s < 1.  At s = 1 the moment diverges like
log(1/eps) worth of near-resonances: single realizations where an
eigenvalue sits within eps of E dominate the whole average.

This script runs the identical Monte Carlo scan (same 200 disorder
realizations, common random numbers) at s = 0.3 and at s = 1 and prints
what stabilizes and what blows up.
"""

import numpy as np

from fracmom import (
    BackgroundFields,
    EpsilonSchedule,
    GridSpec,
    ModelConfig,
    SingleSiteProfile,
    disorder_law,
    epsilon_scan,
    indicator_set,
)
from fracmom.moments import estimates_from_norms

# mid-spectrum energy on a moderately disordered chain, 256 points
grid = GridSpec(d=1, box=(64.25,), h=0.25)
config = ModelConfig(grid=grid, background=BackgroundFields(),
                     profile=SingleSiteProfile(r=1.0, u0=1.0),
                     law=disorder_law(2.0, grid))
X = indicator_set(grid, (24.0,), 1.0)
Y = indicator_set(grid, (40.0,), 1.0)
E = 32.0
schedule = EpsilonSchedule((1e-2, 1e-3, 1e-4, 1e-5, 1.5e-6, 1e-6))

print(f"scanning eps = {schedule.eps} at E = {E}, N = 200 realizations")

scan = epsilon_scan(config, 0.3, E, schedule, X, Y, N=200, master_seed=2024)
# the same norms, re-weighted with exponent 1 (diagnostic mode)
diag = estimates_from_norms(scan.norms, 1.0, schedule.shifts(E),
                            seed=2024, diagnostic=True)

print(f"\n{'eps':>10}   {'mean (s=0.3)':>14} {'se/mean':>8}   "
      f"{'mean (s=1.0)':>14} {'se/mean':>8}")
for e3, e1 in zip(scan.estimates, diag):
    print(f"{e3.eps:10.1e}   {e3.mean:14.6g} {e3.stderr / e3.mean:8.3f}   "
          f"{e1.mean:14.6g} {e1.stderr / e1.mean:8.3f}")

means = scan.means
change = abs(means[-1] - means[-2]) / abs(means[-1])
print(f"\ns = 0.3 verdict: {scan.verdict} "
      f"(last two means differ by {100 * change:.2f}%)")
print(f"s = 1.0: the mean grew {diag[0].mean:.3g} -> {diag[-1].mean:.3g} "
      f"over the schedule")
print("note the s = 1 relative error saturating near 1: the average is")
print("carried by a handful of near-resonant realizations, which is the")
print("blow-up in Monte Carlo form.  (for nonnegative samples the sample")
print("stderr/mean cannot exceed 1, so ~0.99 is as loud as it gets.)")
