"""Winning probabilities of small adversaries against the lifted bound loss(q,k) * p(R).

At desk scale many bounds exceed 1; they are printed raw next to the values.
"""
from qlift import classical_strategy, grover_search, guess_adversary, random_circuit
from qlift.games import collision_game, inversion_game, lifted_adversary_check, lifting_check, search_zero_game

M, N = 4, 2
advs = {
    "guess": guess_adversary(M, N, [0]),
    "depth-1 tree": classical_strategy({"query": 0, "children": {0: {"output": [0]}, 1: {"output": [1]}}}, M, N),
    "grover t=1": grover_search(M, N, 1),
    "random q=2": random_circuit(0, 2, M, N),
}

for game in (search_zero_game(M, N, 1), inversion_game(M, N, 1)):
    print(game.name)
    for name, adv in advs.items():
        r = lifting_check(game, adv)
        print(f"  {name:13s} q={r['q']}  value {r['value']:.4f}  bound {r['bound']:7.2f}")

# the k=2 collision game: two distinct inputs with equal images
game = collision_game(3, 2, 2)
r = lifting_check(game, random_circuit(1, 1, 3, 2, k=2))
print(f"{game.name}: value {r['value']:.4f}, bound {r['bound']:.1f}")

# the simulator adversary B, evaluated exactly
b = lifted_adversary_check(search_zero_game(M, N, 1), advs["grover t=1"])
print(f"B wins with {b['lifted_value']:.4f} >= {b['value']:.4f} / {b['loss']:.0f}")
