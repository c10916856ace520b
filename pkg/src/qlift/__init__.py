"""Exact statevector checks of coherent measure-and-reprogram and the lifting bounds it implies."""

__version__ = "0.1.0"

from .errors import (CapacityError, ConfigurationError, DomainError, InvariantError, QliftError,
                     ValidationError)
from .oracle import OracleTable, enumerate_oracles, reprogram, reprogram_multi, sample_oracle
from .statevec import Gate, OutputMap, Predicate, RegisterLayout, StateVector
from .adversary import (AdversaryCircuit, WrappedAdversary, classical_strategy, grover, grover_search,
                        guess_adversary, random_circuit, run, wrap_with_readout)
from .bounds import (BoundReport, Estimate, RelationSpec, bound_collision, bound_inversion,
                     bound_nonuniform, bound_salted, bound_search, compare_losses, lifted_bound,
                     loss_factor, p_of_r_exact, p_of_r_mc, stirling_chain_check, yz_loss)
from .reprogram import (BranchChoice, ExperimentResult, classical_mr_exact, classical_mr_sample,
                        coherent_sim_exact, coherent_sim_sample, run_branch, uniform_images_check)
from .games import (DerivedGame, GameSpec, direct_product, game_value_exact, game_value_mc,
                    lifted_adversary_check, multi_instance, named_game, salt)
