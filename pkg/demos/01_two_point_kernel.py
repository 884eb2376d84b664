"""
A two-point Metropolis-Hastings kernel by hand
==============================================

Target (0.75, 0.25) on two unit-mass atoms, uniform proposal. Every number
printed here can be checked by hand.
"""

import numpy as np

from mhlab import (acceptance, build_kernel, counting_space, point_mass, target_density,
                   tv_trace, uniform_proposal)
from mhlab.kernel import check_detailed_balance, stationarity_check

space = counting_space(2)
pi = target_density(space, [0.75, 0.25])
q = uniform_proposal(space)

###############################################################################
# Acceptance probabilities: moving uphill is always accepted, moving to the
# lighter atom only a third of the time.
print("alpha(0 -> 1) =", acceptance(pi, q, 0, 1))
print("alpha(1 -> 0) =", acceptance(pi, q, 1, 0))

###############################################################################
# The kernel keeps the accepted part and the rejection mass apart.
k = build_kernel(pi, q)
print("sub-kernel:\n", k.sub_kernel)
print("rejection mass:", k.phi)
print("folded transition matrix:\n", k.folded())

###############################################################################
# Detailed balance and invariance of the target.
print("detailed balance residual:", check_detailed_balance(k))
print("stationarity residual:", stationarity_check(k))

###############################################################################
# Starting from the first atom the distance to the target shrinks by exactly
# a factor 3 per step.
rep = tv_trace(point_mass(space, 0), k, 10)
for r in rep.records:
    print(f"n={r.n:2d}  tv={r.tv:.3e}  0.25*3^-n={0.25 * 3.0 ** -r.n:.3e}")
