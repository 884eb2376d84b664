"""
When positivity fails
=====================

Two blocks that never talk to each other. No power of the sub-kernel is
positive, the unit eigenvalue is double, and a chain started in one block
never reaches the target.
"""

from mhlab.experiment import PRESETS, build_problem, parse_config
from mhlab.kernel import first_positive_order
from mhlab.spectral import fixed_point_constancy
from mhlab.convergence import tv_trace

prob = build_problem(parse_config(PRESETS["disconnected-negative-control"]))
k = prob.kernel
print("first positive order up to 10:", first_positive_order(k, 10))
rep = fixed_point_constancy(k, 1, diagnostic=True)
print("spectrum:", rep.eigenvalues, " multiplicity of 1:", rep.unit_multiplicity)
trace = tv_trace(prob.initial, k, 40)
print("tv at n = 0, 10, 20, 40:", [round(float(trace.tv[n]), 6) for n in (0, 10, 20, 40)])
