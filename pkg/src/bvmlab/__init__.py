"""Finite-sample diagnostics for Gaussian approximations of posteriors in
exponential families whose dimension grows with the sample size."""

from .curved import (
    CurvedMap,
    build_curved,
    curved_local_posterior,
    curved_mle,
    curved_tv,
    injectivity_floor,
    linearize,
    s_statistic,
    ssem_map,
    sur_map,
    tail_mass_audit,
)
from .diagnostics import (
    a_n_bisect,
    b1n,
    b2n,
    growth_check,
    h_theta_proximity,
    lambda_curve,
    lemma1_audit,
    lemma3_audit,
    lemma4_audit,
    lv_reverse_moment_check,
    matrix_map_moment_check,
)
from .empirical_likelihood import MomentModel, el_smoothness_probe, profile_q, theta_of_eta
from .estimators import (
    CurvedMLE,
    CurvedPosteriorApproximation,
    EmpiricalLikelihoodProfile,
    LocalPosteriorApproximation,
)
from .families import (
    MultinomialSpec,
    MvLinearSpec,
    build_multinomial,
    build_mv_linear,
    multinomial_closed_forms,
    multinomial_rank_one_factor,
)
from .harness import ExperimentConfig, emit_plotdata, emit_table, run
from .local import (
    PriorSpec,
    alpha_moment_distance,
    make_posterior,
    tv_distance_importance,
    tv_distance_quadrature,
)

__version__ = "0.1.0"
