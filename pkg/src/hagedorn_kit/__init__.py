"""Hagedorn wave packets from the symplectic point of view.

Modules:

* :mod:`.symplectic` -- symplectic matrices, Lubich pairs, Siegel action, free factorization
* :mod:`.ladder` -- coefficient algebra of ladder operators
* :mod:`.hermite` -- scaled Hermite polynomials and functions
* :mod:`.hagedorn` -- packets, Hagedorn polynomials, generating functions
* :mod:`.grid` -- grids, quadrature, Heisenberg-Weyl and metaplectic operators
* :mod:`.uncertainty` -- ground-state covariance and minimal uncertainty
* :mod:`.cli` -- command-line front end
"""

from .errors import (
    FactorizationError,
    InvalidInputError,
    NotFreeError,
    ParametrizationError,
    QuadratureWarning,
    SingularityError,
    TruncationWarning,
)
from .grid import (
    GaussianForm,
    GridFunction,
    GridSpec,
    MetaplecticFactor,
    QuadratureRule,
    adapted_rule,
    apply_word,
    fourier_semiclassical,
    heisenberg_weyl_apply,
    hermite_form,
    hermite_generating_form,
    inner_product,
    metaplectic_apply,
    metaplectic_generator_apply,
    quadratic_fourier_apply,
    standard_rule,
)
from .hagedorn import (
    HagedornBasisSpec,
    PacketTable,
    expand_in_hermite,
    generating_eval,
    generating_series,
    hagedorn_poly_eval,
    hermite_expansion_coeffs,
    packet_eval_all,
)
from .hermite import HermiteContext, hermite_fn_eval, hermite_poly_eval, multi_indices
from .ladder import (
    LinearObservable,
    OperatorTuple,
    commutator,
    hagedorn_ladder,
    is_ladder,
    ladder_matrix,
    transform_by_symplectic,
    transform_by_translation,
)
from .symplectic import (
    NormalizedPair,
    SiegelPoint,
    SymplecticMatrix,
    SymplecticRotation,
    check_symplectic,
    free_factorize,
    mu_factor,
    pair_from_symplectic,
    siegel_action,
    symplectic_diagonalize,
    symplectic_from_pair,
)
from .uncertainty import UncertaintyReport, ground_covariance, minimal_rotation, theta_1d

__all__ = [
    "adapted_rule",
    "apply_word",
    "check_symplectic",
    "commutator",
    "expand_in_hermite",
    "FactorizationError",
    "fourier_semiclassical",
    "free_factorize",
    "GaussianForm",
    "generating_eval",
    "generating_series",
    "GridFunction",
    "GridSpec",
    "ground_covariance",
    "hagedorn_ladder",
    "hagedorn_poly_eval",
    "HagedornBasisSpec",
    "heisenberg_weyl_apply",
    "hermite_expansion_coeffs",
    "hermite_fn_eval",
    "hermite_form",
    "hermite_generating_form",
    "hermite_poly_eval",
    "HermiteContext",
    "inner_product",
    "InvalidInputError",
    "is_ladder",
    "ladder_matrix",
    "LinearObservable",
    "metaplectic_apply",
    "metaplectic_generator_apply",
    "MetaplecticFactor",
    "minimal_rotation",
    "mu_factor",
    "multi_indices",
    "NormalizedPair",
    "NotFreeError",
    "OperatorTuple",
    "packet_eval_all",
    "PacketTable",
    "pair_from_symplectic",
    "ParametrizationError",
    "quadratic_fourier_apply",
    "QuadratureRule",
    "QuadratureWarning",
    "siegel_action",
    "SiegelPoint",
    "SingularityError",
    "standard_rule",
    "symplectic_diagonalize",
    "symplectic_from_pair",
    "SymplecticMatrix",
    "SymplecticRotation",
    "theta_1d",
    "transform_by_symplectic",
    "transform_by_translation",
    "TruncationWarning",
    "UncertaintyReport",
]

__version__ = "0.1.0"
