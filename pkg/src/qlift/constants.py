"""Numerical tolerances and default budgets."""

UNITARY_TOL = 1e-10
EQUALITY_TOL = 1e-12
INEQUALITY_SLACK = 1e-9

# N^M oracle tables enumerated in exact mode
ENUMERATION_BUDGET = 1_000_000
# complex amplitudes per state vector
STATE_DIM_BUDGET = 1 << 22
# branches (v, b) evaluated exactly before falling back to sampling
BRANCH_CAP = 4096
# N^k * k! for exact p(R)
P_OF_R_BUDGET = 10**7
# exact integer binomials up to this many bits before switching to logs
EXACT_BINOMIAL_BITS = 4096

DEFAULT_MC_TRIALS = 100_000


def tolerances() -> dict:
    return {
        "unitary_tol": UNITARY_TOL,
        "equality_tol": EQUALITY_TOL,
        "inequality_slack": INEQUALITY_SLACK,
    }
