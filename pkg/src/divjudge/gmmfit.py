"""Diagonal-covariance Gaussian mixture fitted by expectation-maximization,
used as the generative model in the synthetic-data experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .distributions import GaussianDist, MixtureDist, log_pdf
from .errors import DataError


@dataclass(frozen=True)
class EMConfig:
    k: int = 2
    max_iters: int = 200
    tol: float = 1e-6
    reg: float = 1e-6
    n_init: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.reg < 0:
            raise ValueError("reg must be >= 0")
        if self.max_iters < 1 or self.n_init < 1:
            raise ValueError("max_iters and n_init must be positive")


@dataclass
class GMMFit:
    model: MixtureDist
    history: list  # log-likelihood at init and after every M-step
    init_model: MixtureDist
    converged: bool


def _to_mixture(weights, means, variances) -> MixtureDist:
    w = np.maximum(weights, 1e-300)
    w = w / w.sum()
    return MixtureDist([GaussianDist(m, np.diag(v)) for m, v in zip(means, variances)], w)


def _log_joint(x, weights, means, variances):
    # (n, k) matrix of log w_k + log N(x_n | mu_k, diag v_k)
    quad = ((x[:, None, :] - means[None]) ** 2 / variances[None]).sum(axis=2)
    norm = x.shape[1] * math.log(2 * math.pi) + np.log(variances).sum(axis=1)
    return np.log(np.maximum(weights, 1e-300)) - 0.5 * (norm[None] + quad)


def kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each new centre drawn with probability ~ D(x)^2."""
    n = x.shape[0]
    centres = [x[rng.integers(n)]]
    d2 = ((x - centres[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centres.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centres)


def _em_run(x, cfg: EMConfig, rng):
    n, d = x.shape
    means = kmeans_pp(x, cfg.k, rng)
    variances = np.tile(x.var(axis=0) + cfg.reg, (cfg.k, 1))
    variances = np.maximum(variances, cfg.reg if cfg.reg > 0 else 1e-12)
    weights = np.full(cfg.k, 1.0 / cfg.k)
    init = (weights.copy(), means.copy(), variances.copy())

    lj = _log_joint(x, weights, means, variances)
    lse = logsumexp(lj, axis=1)
    history = [float(lse.sum())]
    converged = False
    for _ in range(cfg.max_iters):
        resp = np.exp(lj - lse[:, None])
        nk_raw = resp.sum(axis=0)
        weights = nk_raw / n
        nk = nk_raw + 10 * np.finfo(float).eps
        means = resp.T @ x / nk[:, None]
        diff2 = (x[:, None, :] - means[None]) ** 2
        variances = np.einsum("nk,nkd->kd", resp, diff2) / nk[:, None] + cfg.reg
        if cfg.reg == 0:
            variances = np.maximum(variances, 1e-12)
        lj = _log_joint(x, weights, means, variances)
        lse = logsumexp(lj, axis=1)
        history.append(float(lse.sum()))
        if abs(history[-1] - history[-2]) < cfg.tol:
            converged = True
            break
    return (weights, means, variances), init, history, converged


def fit_gmm_with_history(data, config: EMConfig | None = None) -> GMMFit:
    cfg = config or EMConfig()
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise DataError("data must be a 2-D matrix")
    if x.shape[0] < cfg.k:
        raise DataError(f"{x.shape[0]} rows cannot support {cfg.k} components")
    if not np.all(np.isfinite(x)):
        raise DataError("data contains non-finite entries")
    best = None
    for ss in np.random.SeedSequence(cfg.seed).spawn(cfg.n_init):
        run = _em_run(x, cfg, np.random.default_rng(ss))
        if best is None or run[2][-1] > best[2][-1]:
            best = run
    params, init, history, converged = best
    return GMMFit(_to_mixture(*params), history, _to_mixture(*init), converged)


def fit_gmm(data, config: EMConfig | None = None) -> MixtureDist:
    """Best-of-``n_init`` EM fit as a mixture of diagonal Gaussians."""
    return fit_gmm_with_history(data, config).model


def log_likelihood(model, data) -> float:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ValueError(f"expected {model.dim} columns, got shape {x.shape}")
    return float(np.sum(log_pdf(model, x)))
