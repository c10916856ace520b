"""Measurement-based reprogramming next to the coherent simulator on one instance."""
from qlift import OracleTable, coherent_sim_exact, random_circuit, wrap_with_readout
from qlift.bounds import loss_factor, yz_loss
from qlift.reprogram import classical_mr_direct, classical_mr_exact, classical_mr_sample
from qlift.statevec import true_predicate

M, N, q = 3, 2, 2
adv = random_circuit(4, q, M, N)
H = OracleTable(M, N, (0, 1, 0))
y, x_star = (1,), (2,)
V = true_predicate(1)

direct = classical_mr_direct(adv, H, y, x_star, V)
exact = classical_mr_exact(adv, H, y, x_star, V)
est = classical_mr_sample(adv, H, y, 20000, 0, V, x_star)
print(f"direct run        {direct:.4f}")
print(f"measure+reprogram {exact:.4f}  (sampled {est.mean:.4f} +- {est.stderr:.4f})")
print(f"  times (2q+1)^2k = {exact * yz_loss(q, 1):.4f}")

G = OracleTable(M, N, (1, 1, 1))
r = coherent_sim_exact(wrap_with_readout(adv, 1), H, G, x_star, V)
print(f"coherent sim      {r.lhs:.4f} vs direct {r.rhs:.4f}; times loss {r.lhs * loss_factor(q, 1):.4f}")
