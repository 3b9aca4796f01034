"""
The finite-volume localization criterion, end to end
====================================================

The criterion folds one measurable quantity, the fractional moment of
the Green function between a ball center and its boundary layer, into a
factor whose value below 1 certifies exponential decay at the rate
gamma / (2L).  The prefactor is astronomically pessimistic, so the raw
boundary moment has to be astronomically small before the factor
crosses 1; at strong coupling it is, once the ball is deep enough.

Three stages here:
  1. scan ball radii L and watch the factor fall through 1,
  2. read off the certified rate from the triggered radius,
  3. measure the actual moment decay in a big box and compare.
"""

import warnings

import numpy as np

from fracmom import (
    BackgroundFields,
    EpsilonSchedule,
    GridSpec,
    ModelConfig,
    SingleSiteProfile,
    criterion_factor,
    disorder_law,
    estimate_raw_boundary_moment,
    ground_energy,
    verify_criterion_consistency,
)

LAM, U0, H = 50.0, 8.0, 0.25   # strong coupling on a fine chain
S, E = 0.3, 8.0                # subcritical exponent, low-lying energy


def chain(box):
    grid = GridSpec(d=1, box=(box,), h=H)
    return ModelConfig(grid=grid, background=BackgroundFields(),
                       profile=SingleSiteProfile(r=1.0, u0=U0),
                       law=disorder_law(LAM, grid))


# ---------------------------------------------------------------------------
# stage 1: the factor crosses 1 between L = 30 and L = 40
# ---------------------------------------------------------------------------

schedule = EpsilonSchedule((1e-2, 1e-3))
reports = []
print(f"{'L':>4} {'raw boundary moment':>22} {'criterion factor':>18} "
      f"{'triggered':>10}")
# the deepest ball pushes boundary blocks to ~1e-25 where the power
# iteration can stall at its lower-bound fallback; that is fine on the
# six-order margin below, so silence the warning for the demo
with warnings.catch_warnings():
    warnings.filterwarnings("ignore", message="power iteration hit")
    for L in (26.0, 30.0, 40.0):
        cfg = chain(2.0 * L)  # the smallest box that holds the ball
        raw = estimate_raw_boundary_moment(cfg, S, E, L, schedule, N=200,
                                           master_seed=2024, alphas=[(L,)])
        rep = criterion_factor(S, LAM, E, ground_energy(cfg.h0()), L, 1,
                               raw, M_const=1.0, r=1.0)
        reports.append(rep)
        print(f"{L:4.0f} {raw:22.6e} {rep.factor:18.6e} {str(rep.triggered):>10}")

triggered = next(rep for rep in reports if rep.triggered)

# ---------------------------------------------------------------------------
# stage 2: what the triggered criterion certifies
# ---------------------------------------------------------------------------

print(f"\ntriggered at L = {triggered.L:.0f}: gamma = {triggered.gamma:.3f}, "
      f"certified rate gamma / (2L) = {triggered.predicted_rate:.4f} per unit")
print("the rate is a guaranteed floor, not a prediction: every constant")
print("in the prefactor is taken worst-case")

# ---------------------------------------------------------------------------
# stage 3: measured decay in a big box
# ---------------------------------------------------------------------------

check = verify_criterion_consistency(
    chain(64.0), triggered, ladder=(2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0),
    eps=1e-3, N=100, master_seed=2024, x0=(20.0,))

print(f"\nmeasured moment decay over the ladder:")
for d, m, se in zip(check.distances, check.means, check.stderrs):
    print(f"  dist {d:5.1f}   {m:12.4e} +- {se:.1e}")
print(f"fit: mu = {check.fit.mu:.4f} per unit, r2 = {check.fit.r2:.4f}")
print(f"measured / certified = {check.rate_ratio:.1f}x "
      f"(the slack is the worst-case prefactor at work)")
print(f"consistent: {check.consistent}")
