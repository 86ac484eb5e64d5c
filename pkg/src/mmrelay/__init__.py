"""Spectral efficiency of multipair massive-MIMO two-way AF relaying with
relay hardware impairments: Monte Carlo link model and large-N closed forms."""

from .analytics import (
    ClosedFormTerms,
    ScalingLaw,
    appendix_expectations,
    corollary1_limit,
    evm_tradeoff,
    lemma1_se,
    lemma1_terms,
    substituted_kappa,
)
from .model import (
    ChannelRealization,
    ConfigError,
    DistortionMode,
    DistortionRealization,
    LargeScaleFading,
    SystemConfig,
    draw_channels,
    draw_distortions,
    draw_large_scale_fading,
    receiver_distortion_variances,
    validate_config,
)
from .montecarlo import (
    ConvergenceReport,
    SEEstimate,
    estimate_jensen_bound,
    estimate_se,
    lln_convergence_suite,
    run_trial,
)
from .mr import (
    GramCache,
    TrialResult,
    apply_precoder,
    bilinear_form,
    build_gram_cache,
    compute_trial_sinr,
    frobenius_norms,
    power_control_rho,
    precoder_row_norm,
)

__version__ = "0.1.0"
