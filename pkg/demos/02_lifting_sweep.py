"""Sweep the reprogramming inequality over every (H, G, x_o) for a few random adversaries.

Prints how much room the inequality leaves: the ratio rhs / lhs against the
loss factor it must stay below.
"""
import itertools

import numpy as np

from qlift import coherent_sim_exact, enumerate_oracles, random_circuit, wrap_with_readout
from qlift.statevec import true_predicate

M, N, q = 3, 2, 2
oracles = list(enumerate_oracles(M, N))

for seed in range(3):
    adv = wrap_with_readout(random_circuit(seed, q, M, N), 1)
    ratios = []
    for H, G, x in itertools.product(oracles, oracles, range(M)):
        r = coherent_sim_exact(adv, H, G, (x,), true_predicate(1))
        assert r.holds
        if r.rhs > 1e-9:
            ratios.append(r.rhs / r.lhs)
    ratios = np.array(ratios)
    print(f"seed {seed}: worst rhs/lhs = {ratios.max():6.2f}  median {np.median(ratios):5.2f}  "
          f"(loss factor {r.loss:.0f})")
