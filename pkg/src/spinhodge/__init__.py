"""spinhodge: exact Hodge integrals and tautological relations for spin curves.

The engine evaluates products of the top Chern class of the dual Hodge
bundle with virtual classes of moduli of spin curves for Fermat, chain,
and (hypothesis-satisfying) loop singularities, through the t -> 1 limit
of a characteristic-class expression, entirely in exact arithmetic.
"""

from .arith import (
    LaurentSeries,
    Rat,
    RationalFunction,
    bernoulli_number,
    bernoulli_poly,
    gamma_lk,
    laurent_at_one,
    s_function,
)
from .graphs import (
    Ambient,
    StableGraph,
    StrataExpression,
    StrataTerm,
    automorphism_order,
    enumerate_stable_graphs,
    enumerate_weightings,
    strata_exp,
    strata_mul,
)
from .integrate import CorrelatorCache, kappa_reduce, pair, psi_correlator

__version__ = "0.1.0"

__all__ = [
    "Ambient",
    "CorrelatorCache",
    "LaurentSeries",
    "Rat",
    "RationalFunction",
    "StableGraph",
    "StrataExpression",
    "StrataTerm",
    "automorphism_order",
    "bernoulli_number",
    "bernoulli_poly",
    "enumerate_stable_graphs",
    "enumerate_weightings",
    "gamma_lk",
    "kappa_reduce",
    "laurent_at_one",
    "pair",
    "psi_correlator",
    "s_function",
    "strata_exp",
    "strata_mul",
    "__version__",
]
