"""How the coherent loss 2^{2k} C(q+k,k)^2 compares with (2q+1)^{2k}.

For q >> k the ratio approaches (k!)^2.
"""
from math import factorial

from qlift.bounds import bound_nonuniform, compare_losses

print(" k    q      ratio   (k!)^2")
for k in (1, 2, 3, 4):
    for q in (1, 10, 100, 1000, 10000):
        r = compare_losses(q, k)
        print(f"{k:2d} {q:6d} {r['ratio']:10.2f} {factorial(k) ** 2:8d}")

# advice bound with and without the 1/S power on p
for S in (1, 2, 4, 8):
    print(f"S={S}: {bound_nonuniform(10, 2, S, 2.0 ** (-20 * S)):.3g} "
          f"(literal form {bound_nonuniform(10, 2, S, 2.0 ** (-20 * S), literal=True):.3g})")
