"""Nonparametric tensor completion by sign-series estimation."""
from .baselines import cp_als, naive_impute, nonpara_matrix
from .fit import FitConfig, FitReport, fit_level, update_factor
from .losses import (
    LevelGrid,
    SurrogateKind,
    empirical_cdf,
    excess_risk_oracle,
    surrogate_gradient,
    surrogate_objective,
    weighted_loss,
)
from .sign_series import SignSeriesEstimate, aggregate_signs, estimate, sign_series_of
from .simgen import SimSpec, add_noise, apply_mask, gen_signal
from .tensor_core import (
    CpFactors,
    SampleSet,
    SamplingDistribution,
    cp_eval,
    cp_materialize,
    draw_samples,
    mae,
    refold,
    sign_of,
    unfold,
)

__version__ = "0.1.0"
