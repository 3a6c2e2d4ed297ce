"""Classifier-based estimation of KL and JS divergences between datasets."""

from .discriminator import DiscriminatorConfig, TrainedDiscriminator, bce_loss, predict_proba, train
from .distributions import (
    DivergenceEstimate,
    GaussianDist,
    MixtureDist,
    gaussian_kl_analytical,
    log_pdf,
    mc_js,
    mc_kl,
    sample,
)
from .divergence import ensemble_estimate, estimate_js, estimate_kl, js_from_loss, log_density_ratio
from .gmmfit import EMConfig, fit_gmm, log_likelihood

__version__ = "0.1.0"
