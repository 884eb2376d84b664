"""
Monte Carlo chains against exact density evolution
==================================================

100000 replicas of the two-point chain, started on the first atom. The
empirical law at each step is compared with the exact pushed-forward density.
"""

import numpy as np

from mhlab.convergence import evolve
from mhlab.experiment import PRESETS, build_problem, parse_config
from mhlab.sampler import (count_symmetry_zscores, empirical_vs_exact, run_chain,
                           run_ensemble, transition_counts)

prob = build_problem(parse_config(PRESETS["two-point"]))
ens = run_ensemble(prob.initial, prob.kernel, 10, 100_000, base_seed=11)
disc = empirical_vs_exact(ens, evolve(prob.initial, prob.kernel, 10))
print("envelope:", disc.envelope)
for n, (emp, tv) in enumerate(zip(ens.densities, disc.tv)):
    print(f"n={n:2d}  empirical={np.array2string(emp.values, precision=4)}  tv={tv:.4f}")

###############################################################################
# One long chain: ordered transition counts are balanced in both directions.
path = run_chain(prob.kernel, 0, 200_000, seed=3)
counts = transition_counts(path, 2)
print("transition counts:\n", counts)
print("largest asymmetry (sigma):", count_symmetry_zscores(counts).max())
