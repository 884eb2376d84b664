"""
The conjugate operator on L2(pi)
================================

Contraction, self-adjointness, decreasing quadratic forms and the spectrum
of a random positive kernel.
"""

import numpy as np

from mhlab import build_kernel, fixed_point_constancy, target_density
from mhlab.kernel import table_proposal
from mhlab.measure_space import StateSpace
from mhlab.spectral import (check_contraction, check_self_adjoint, quadratic_form_sequence,
                            strong_limit_trace, verify_operator_inequality)

rng = np.random.default_rng(0)
n = 12
space = StateSpace(rng.uniform(0.5, 1.5, n))
pi = target_density(space, rng.uniform(0.1, 1.0, n))
k = build_kernel(pi, table_proposal(space, rng.uniform(size=(n, n)), normalize_rows=True))

f, g = rng.normal(size=n), rng.normal(size=n)
print("(||K f||, ||f||) =", check_contraction(k, f))
print("self-adjointness residual:", check_self_adjoint(k, f, g))

###############################################################################
# s_n = <K^(2n) f, f> never increases and settles at <f, 1>^2.
s = quadratic_form_sequence(k, f, nu=1, n_max=15)
print("quadratic forms:", np.array2string(s, precision=5))

###############################################################################
# Both sides of ||T u||^2 <= ||T|| <T u, u> for T = K^2 - K^4.
print("coarse bound:", verify_operator_inequality(k, f, 1, 1))
print("exact norm:  ", verify_operator_inequality(k, f, 1, 1, exact=True))

###############################################################################
# The unit eigenvalue is simple and its eigenfunction constant.
rep = fixed_point_constancy(k, nu=1)
print("spectrum:", np.array2string(rep.eigenvalues, precision=4))
print("gap:", rep.gap, " constancy spread:", rep.constancy_spread)
print("||K^n f - <f,1> 1||:", np.array2string(strong_limit_trace(k, f, 10), precision=3))
