"""Classifier-based density-ratio Monte Carlo sampling.

Train a binary classifier to tell target samples from instrumental ones,
read the density ratio off its posterior odds, and drive acceptance-
rejection, independent Metropolis-Hastings and sampling-importance-
resampling with it.  Oracle variants computed from closed-form densities
validate every step.
"""

from .classifier import (
    ConstantPosterior,
    LossTrace,
    MlpClassifier,
    MlpNetwork,
    OraclePosterior,
    TrainConfig,
    bce_loss,
    load_model,
    posterior_values,
    save_model,
    train,
)
from .dataset import (
    DatasetSplit,
    LabeledDataset,
    build_dataset,
    from_samples,
    load_csv,
    save_csv,
    stratified_split,
)
from .diagnostics import (
    Grid,
    TwoSampleReport,
    ess,
    kl_bce_consistency,
    kolmogorov_sf,
    ks_two_sample,
    two_sample_report,
)
from .distributions import (
    Distribution,
    Gaussian,
    GaussianMixture,
    Rings,
    TwoMoons,
    distribution_from_spec,
    fit_gaussian_moments,
)
from .errors import (
    AllZeroWeights,
    ConfigError,
    DegenerateData,
    DimensionMismatch,
    InvalidC,
    NonFiniteLoss,
    ParseError,
    RatioMcError,
    TooFewSamples,
    UnsupportedDensity,
)
from .ratio import (
    ClassifierRatio,
    EnvelopeConstant,
    RatioEstimator,
    estimate_envelope,
    p_phi_normalizer,
    p_phi_unnorm,
    update_envelope,
)
from .rng import RngStream
from .samplers import (
    ChainResult,
    Integrand,
    SampleSet,
    ar_sample,
    imh_chain,
    imh_log_alpha,
    is_estimate,
    mixture_decomposition_check,
    sir_sample,
)

__version__ = "0.1.0"
