"""Exact invariants of unipotent radicals of Weil restrictions.

Given a modular purely inseparable extension presentation, this package
computes the nilpotency class and element-order bounds of the geometric
unipotent radical of the Weil restriction of the classical rank-one groups
and tori, certifies them with explicit matrix commutators, and checks them
against literal brute-force computations on the finite groups of points.
"""

from .algebra import (
    AlgebraElement,
    ExtensionSpec,
    MonomialIdeal,
    TruncatedAlgebra,
    ideal_product,
    nilpotency_index,
    sl2_filtration_ideals,
    squares_ideal,
    unusual_class_invariant,
)
from .errors import (
    BudgetExceeded,
    HypothesisNotSatisfied,
    MismatchedAlgebras,
    NoWitness,
    UnsupportedCharacteristic,
    UsageError,
    WeilradError,
)
from .field import CoefficientField
from .invariants import (
    FibreKind,
    FibreSpec,
    InvariantReport,
    borel_exponent_conjecture,
    certify_class,
    class_upper_bound,
    exponent_bound_from_nilpotency,
    exponent_bound_from_rank,
    fibre_class,
    gl2_class_witness,
    imprimitive_borel_witness,
    is_unusual,
    predict_class,
    sl2_class_witness,
    sl2_odd_class_witness,
    superdiagonal_order_witness,
)
from .matgroup import (
    AlgebraMatrix,
    GroupTag,
    UnipotentElement,
    commutator,
    enumerate_unipotents,
    random_unipotent,
    unipotent_count,
)
from .experiments import (
    ExperimentConfig,
    ExponentResult,
    SeriesResult,
    borel_exponent_experiment,
    brute_class,
    brute_exponent,
    default_budget,
    run_experiment,
    stabilization_check,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
