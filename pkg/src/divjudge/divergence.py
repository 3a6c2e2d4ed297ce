"""Density-ratio and divergence estimates from discriminator posteriors.

Under equal class priors the posterior odds equal the density ratio, so
``logit(D(x))`` estimates ``log p(x)/q(x)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logit

from .discriminator import DiscriminatorConfig, TrainedDiscriminator, train
from .distributions import LN2, LN4, DivergenceEstimate, GaussianDist, MixtureDist, sample
from .errors import DataError

log = logging.getLogger(__name__)


@dataclass
class RatioEstimate:
    log_ratio: np.ndarray
    source: str  # "class_p" or "class_q"

    def __post_init__(self):
        if self.source not in ("class_p", "class_q"):
            raise ValueError("source must be 'class_p' or 'class_q'")

    @property
    def ratio(self) -> np.ndarray:
        return np.exp(self.log_ratio)


def _nonempty(X, name):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError(f"{name} must be a non-empty 2-D matrix")
    return X


def log_density_ratio(disc: TrainedDiscriminator, X, source: str = "class_p") -> RatioEstimate:
    return RatioEstimate(logit(disc.predict_proba(X)), source)


def kl_from_posteriors(dp) -> float:
    """Mean logit of class-1 posteriors evaluated on draws from p."""
    return float(np.mean(logit(np.asarray(dp, dtype=np.float64))))


def js_from_posteriors(dp, dq) -> float:
    """ln 2 + mean(ln D(x)) / 2 + mean(ln(1 - D(x~))) / 2, x ~ p, x~ ~ q.

    Equivalent to averaging ln 2D and ln(2 - 2D); the ln 2 must stay or
    identical inputs would give -ln 2 instead of 0.
    """
    dp = np.asarray(dp, dtype=np.float64)
    dq = np.asarray(dq, dtype=np.float64)
    return LN2 + 0.5 * float(np.mean(np.log(dp))) + 0.5 * float(np.mean(np.log1p(-dq)))


def estimate_kl(disc: TrainedDiscriminator, X_p_eval) -> float:
    """Mean log-ratio over held-out draws from p."""
    X_p_eval = _nonempty(X_p_eval, "X_p_eval")
    return kl_from_posteriors(disc.predict_proba(X_p_eval))


def estimate_js(disc: TrainedDiscriminator, X_p_eval, X_q_eval, truncate: bool = True) -> float:
    """JS estimate from held-out draws of both classes.

    The raw value is bounded above by ln 2 through posterior clamping but
    can dip slightly below 0 for near-identical inputs; with ``truncate``
    it is floored at 0, the lower end of the divergence's range.
    """
    X_p_eval = _nonempty(X_p_eval, "X_p_eval")
    X_q_eval = _nonempty(X_q_eval, "X_q_eval")
    raw = js_from_posteriors(disc.predict_proba(X_p_eval), disc.predict_proba(X_q_eval))
    return max(raw, 0.0) if truncate else raw


def js_from_loss(final_loss: float) -> float:
    """JS implied by a converged two-class BCE: (ln 4 - loss) / 2."""
    return (LN4 - final_loss) / 2.0


def derive_seed(master: int, *key: int) -> np.random.SeedSequence:
    """Independent, reproducible stream for job (master, *key)."""
    return np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in key))


def seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def balance(X_p: np.ndarray, X_q: np.ndarray, rng) -> tuple:
    """Downsample the larger class to the minority size."""
    n = min(X_p.shape[0], X_q.shape[0])
    if X_p.shape[0] != X_q.shape[0]:
        log.warning("unequal class sizes %d vs %d; downsampling to %d", X_p.shape[0], X_q.shape[0], n)
        rng = np.random.default_rng(rng)
        if X_p.shape[0] > n:
            X_p = X_p[np.sort(rng.choice(X_p.shape[0], n, replace=False))]
        if X_q.shape[0] > n:
            X_q = X_q[np.sort(rng.choice(X_q.shape[0], n, replace=False))]
    return X_p, X_q


def _draw(source, M: int, L: int, rng: np.random.Generator, name: str):
    """(train, eval) rows from a distribution or a fixed matrix."""
    if isinstance(source, (GaussianDist, MixtureDist)):
        return sample(source, M, rng), sample(source, L, rng)
    X = np.asarray(source, dtype=np.float64)
    if X.shape[0] < M + L:
        raise DataError(f"{name} has {X.shape[0]} rows; a disjoint split needs M + L = {M + L}")
    perm = rng.permutation(X.shape[0])
    return X[perm[:M]], X[perm[M:M + L]]


@dataclass
class Replicate:
    """One seed's train/evaluate outcome."""

    seed: int
    kl: float
    js: float
    js_raw: float
    js_from_loss: float
    final_loss: float
    best_epoch: int
    train_loss_history: list
    holdout_loss_history: list
    eval_p: np.ndarray = field(repr=False, default=None)
    eval_q: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "kl": self.kl,
            "js": self.js,
            "js_raw": self.js_raw,
            "js_from_loss": self.js_from_loss,
            "final_loss": self.final_loss,
            "best_epoch": self.best_epoch,
            "train_loss_history": list(self.train_loss_history),
            "holdout_loss_history": list(self.holdout_loss_history),
        }


def run_replicate(p_source, q_source, config: DiscriminatorConfig, M: int, L: int,
                  seed: np.random.SeedSequence, keep_eval: bool = False) -> Replicate:
    """Draw M training + L evaluation rows per class, train, estimate."""
    data_ss, model_ss = seed.spawn(2)
    rng = np.random.default_rng(data_ss)
    if not isinstance(p_source, (GaussianDist, MixtureDist)) and not isinstance(q_source, (GaussianDist, MixtureDist)):
        p_source, q_source = balance(np.asarray(p_source), np.asarray(q_source), rng)
    tp, ep = _draw(p_source, M, L, rng, "p")
    tq, eq = _draw(q_source, M, L, rng, "q")
    mseed = seed_int(model_ss)
    disc = train(tp, tq, config.replace(seed=mseed))
    js_raw = estimate_js(disc, ep, eq, truncate=False)
    return Replicate(
        seed=mseed,
        kl=estimate_kl(disc, ep),
        js=max(js_raw, 0.0),
        js_raw=js_raw,
        js_from_loss=js_from_loss(disc.final_loss),
        final_loss=disc.final_loss,
        best_epoch=disc.best_epoch,
        train_loss_history=disc.train_loss_history,
        holdout_loss_history=disc.holdout_loss_history,
        eval_p=ep if keep_eval else None,
        eval_q=eq if keep_eval else None,
    )


def aggregate(replicates, meta: dict | None = None):
    """(kl, js) DivergenceEstimates as mean and sample sd over replicates."""
    meta = dict(meta or {})
    kl = DivergenceEstimate.from_values([r.kl for r in replicates], "discriminator", "kl", meta)
    js = DivergenceEstimate.from_values([r.js for r in replicates], "discriminator", "js", meta)
    return kl, js


def ensemble_estimate(p_source, q_source, config: DiscriminatorConfig | None = None, M: int = 2000,
                      L: int = 2000, n_seeds: int = 5, master_seed: int = 0):
    """Seed-ensemble discriminator KL and JS.

    Sources are distributions (fresh draws per seed) or fixed matrices
    (disjoint train/eval resampling per seed).
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    if M < 2 or L < 1:
        raise ValueError("need M >= 2 and L >= 1")
    config = config or DiscriminatorConfig()
    reps = [run_replicate(p_source, q_source, config, M, L, derive_seed(master_seed, r)) for r in range(n_seeds)]
    return aggregate(reps, {"M": M, "L": L, "n_seeds": n_seeds, "master_seed": master_seed})
