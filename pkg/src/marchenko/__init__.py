"""Marchenko inverse scattering for exponential-sum data-sets."""

from .kernel import (
    DivergentRegion,
    PotentialProfile,
    convergence_abscissa,
    eval_diagonal,
    eval_kernel,
    eval_potential,
    geometric_diagonal,
    geometric_potential,
)
from .oracle import DirectSolution, SingularOperator, TruncationInsufficient, compare, solve_direct
from .recursion import (
    KernelExpansion,
    KernelTerm,
    TermBudgetExceeded,
    apply_rule,
    expand,
    iterate,
    seed_terms,
)
from .spectrum import (
    FourierComponent,
    NonDecayingComponent,
    SpectralDataset,
    evaluate_data,
    fit_amplitudes,
    rational_to_components,
    validate_dataset,
)
from .stability import (
    Classification,
    LyapunovReport,
    PerturbationSpec,
    classify,
    closed_form_exponent,
    empirical_exponent,
    filter_stable,
    lyapunov_report,
    propagate_perturbation,
)

__version__ = "0.1.0"
