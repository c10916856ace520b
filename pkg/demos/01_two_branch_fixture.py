"""Walk through the smallest coherent reprogramming run by hand.

The adversary makes no queries of its own and outputs x=1. The simulator
intercepts its single read-out query either before (b=0) or after (b=1)
the query happens.
"""
from qlift import OracleTable, Predicate, coherent_sim_exact, guess_adversary, wrap_with_readout
from qlift.reprogram import BranchChoice, run_branch

H = OracleTable(2, 2, (0, 0))
G = OracleTable(2, 2, (1, 1))
adv = wrap_with_readout(guess_adversary(2, 2, [1]), 1)
V = Predicate(1, lambda xs, ys, z, oracle: ys == (1,), "y = G(1)")

# b=0: the input 1 goes into the control register first, so the query answers G(1) = 1
print("update then query :", run_branch(adv, H, G, (1,), BranchChoice((1,), (0,)), V))
# b=1: the query still sees H(1) = 0, which the predicate rejects
print("query then update :", run_branch(adv, H, G, (1,), BranchChoice((1,), (1,)), V))

res = coherent_sim_exact(adv, H, G, (1,), V, keep_branches=True)
print(f"simulator success {res.lhs}, direct run {res.rhs}, loss {res.loss}")
print("lhs * loss >= rhs:", res.holds)
