"""Steering-based self-testing toolkit for qudit observables."""

__version__ = "0.1.0"

from .incompat import (
    commutant,
    commutant_blocks,
    common_invariant_subspace,
    is_genuinely_incompatible,
    is_mub_pair,
    shares_common_eigenvector,
)
from .linalg import max_entangled, schmidt_decompose
from .observables import (
    QuditObservable,
    builtin_example,
    conjugate_observable,
    generalized_pauli,
    mub_observable,
    observable_from_basis,
    pauli_x,
    pauli_z,
    shift_clock_power,
)
from .robustness import NoiseSpec, analytic_bounds, perturb, sweep, verify_theorem2
from .selftest import certify, partial_certify
from .steering import (
    Scenario,
    classical_bound_estimate,
    ideal_realization,
    prob_table,
    quantum_max,
    steering_value,
    steering_value_from_probs,
)
