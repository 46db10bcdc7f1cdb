"""Bayesian estimation of long-memory spectral densities with FEXP priors."""

from .divergences import (
    b,
    b_n,
    check_b_h_inequality,
    d_inf,
    d_n,
    divergence_report,
    h,
    h_n,
    kl_inf,
    kl_n,
    log_l2,
    mean_ratio,
)
from .harness import ExperimentConfig, parse_config, run_experiment, serialize_config, validate_properties
from .posterior import (
    HLossEstimate,
    PosteriorSamples,
    SamplerConfig,
    estimate_d,
    estimate_f_h,
    estimate_f_log,
    posterior_prob,
    run_mcmc,
    whittle_loglik,
)
from .prior import PriorSpec, log_prior_density, sample_prior
from .simulate import SimRequest, sample
from .spectral import (
    AutocovSeq,
    Fexp,
    FexpParams,
    PowerLawTimesSmooth,
    SpectralFn,
    autocov,
    eval_fexp,
    fexp_from_arfima,
    log_spectrum_grid,
)
from .toeplitz import ToeplitzCov, ToeplitzSolver, gauss_loglik, matvec, trace_ratio

__version__ = "0.1.0"
