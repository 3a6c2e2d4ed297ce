"""Probabilistic discriminator: an MLP classifier trained on class-1 (p)
versus class-0 (q) samples, written directly on numpy.

Architecture is fixed across experiments: d -> 256 -> 64 -> 32 -> 1 with
Linear -> BatchNorm -> LeakyReLU -> Dropout per hidden layer and a sigmoid
head. Training is minibatch Adam on binary cross-entropy with early
stopping on a stratified holdout split.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DataError, NumericalError

FORMAT_VERSION = 1
BN_EPS = 1e-5
BN_MOMENTUM = 0.1
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class DiscriminatorConfig:
    hidden_sizes: tuple = (256, 64, 32)
    leaky_slope: float = 0.01
    dropout_rate: float = 0.2
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 1000
    patience: int = 10
    holdout_fraction: float = 0.2
    prob_clamp: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ValueError("hidden_sizes must be positive")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must be in (0, 1)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if not 0.0 < self.prob_clamp <= 0.01:
            raise ValueError("prob_clamp must be in (0, 0.01]")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be positive")

    def replace(self, **changes) -> "DiscriminatorConfig":
        d = asdict(self)
        d.update(changes)
        return DiscriminatorConfig(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d


def bce_loss(probs, labels) -> float:
    """-mean_{y=1} log D - mean_{y=0} log(1 - D).

    The two class-conditional means are summed, so chance-level output
    gives log 4 rather than log 2.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.shape != labels.shape:
        raise ValueError(f"length mismatch: {probs.shape} vs {labels.shape}")
    pos = labels == 1
    if not pos.any() or pos.all():
        raise ValueError("both classes must be present")
    return float(-np.mean(np.log(probs[pos])) - np.mean(np.log1p(-probs[~pos])))


def _bce_from_logits(s: np.ndarray, y: np.ndarray) -> float:
    # log sigma(s) = -logaddexp(0, -s); log(1 - sigma(s)) = -logaddexp(0, s)
    pos = y == 1
    return float(np.mean(np.logaddexp(0.0, -s[pos])) + np.mean(np.logaddexp(0.0, s[~pos])))


def _init_params(d: int, cfg: DiscriminatorConfig, rng: np.random.Generator):
    params, buffers = {}, {}
    fan_in = d
    gain = math.sqrt(2.0 / (1.0 + cfg.leaky_slope ** 2))
    for i, h in enumerate(cfg.hidden_sizes):
        params[f"W{i}"] = rng.standard_normal((fan_in, h)) * gain / math.sqrt(fan_in)
        params[f"b{i}"] = np.zeros(h)
        params[f"g{i}"] = np.ones(h)
        params[f"be{i}"] = np.zeros(h)
        buffers[f"rm{i}"] = np.zeros(h)
        buffers[f"rv{i}"] = np.ones(h)
        fan_in = h
    params["Wout"] = rng.standard_normal((fan_in, 1)) / math.sqrt(fan_in)
    params["bout"] = np.zeros(1)
    return params, buffers


def _n_hidden(params) -> int:
    return sum(1 for k in params if k.startswith("W")) - 1


def forward_eval(params, buffers, x: np.ndarray, slope: float) -> np.ndarray:
    """Logits in inference mode: running batch-norm stats, no dropout."""
    h = x
    for i in range(_n_hidden(params)):
        z = h @ params[f"W{i}"] + params[f"b{i}"]
        a = (z - buffers[f"rm{i}"]) / np.sqrt(buffers[f"rv{i}"] + BN_EPS)
        a = params[f"g{i}"] * a + params[f"be{i}"]
        h = np.where(a > 0, a, slope * a)
    return (h @ params["Wout"] + params["bout"])[:, 0]


def dropout_masks(n: int, cfg: DiscriminatorConfig, rng: np.random.Generator):
    if cfg.dropout_rate == 0:
        return [None] * len(cfg.hidden_sizes)
    keep = 1.0 - cfg.dropout_rate
    return [(rng.random((n, h)) < keep) / keep for h in cfg.hidden_sizes]


def loss_and_grads(params, x, y, masks, slope: float):
    """Training-mode forward and backward pass for mean per-sample BCE.

    Returns (logits, grads, batch_stats) where batch_stats holds the
    per-layer batch mean and unbiased variance for the running averages.
    """
    n = x.shape[0]
    caches = []
    stats = []
    h = x
    for i in range(_n_hidden(params)):
        z = h @ params[f"W{i}"] + params[f"b{i}"]
        mu = z.mean(axis=0)
        var = z.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (z - mu) * inv_std
        a = params[f"g{i}"] * xhat + params[f"be{i}"]
        act = np.where(a > 0, a, slope * a)
        out = act if masks[i] is None else act * masks[i]
        caches.append((h, xhat, inv_std, a))
        stats.append((mu, var * n / max(n - 1, 1)))
        h = out
    s = (h @ params["Wout"] + params["bout"])[:, 0]

    grads = {}
    ds = ((expit(s) - y) / n)[:, None]
    grads["Wout"] = h.T @ ds
    grads["bout"] = ds.sum(axis=0)
    dh = ds @ params["Wout"].T
    for i in reversed(range(len(caches))):
        h_prev, xhat, inv_std, a = caches[i]
        if masks[i] is not None:
            dh = dh * masks[i]
        da = dh * np.where(a > 0, 1.0, slope)
        grads[f"g{i}"] = np.sum(da * xhat, axis=0)
        grads[f"be{i}"] = da.sum(axis=0)
        dxhat = da * params[f"g{i}"]
        dz = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0))
        grads[f"W{i}"] = h_prev.T @ dz
        grads[f"b{i}"] = dz.sum(axis=0)
        dh = dz @ params[f"W{i}"].T
    return s, grads, stats


class _Adam:
    def __init__(self, params, lr: float):
        self.lr = lr
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        b1, b2 = ADAM_BETAS
        self.t += 1
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            m = self.m[k]
            v = self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def stratified_split(y: np.ndarray, fraction: float, rng: np.random.Generator):
    """Index arrays (train, holdout) keeping ``fraction`` of each class out,
    with at least one row per class on each side."""
    train, hold = [], []
    for cls in (1, 0):
        idx = rng.permutation(np.flatnonzero(y == cls))
        k = min(max(1, int(round(fraction * idx.size))), idx.size - 1)
        hold.append(idx[:k])
        train.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(hold))


def _check_matrix(x, name) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"{name} must be a 2-D matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError(f"{name} contains non-finite features")
    return x


@dataclass
class TrainedDiscriminator:
    """Frozen classifier; ``predict_proba`` gives P(y=1 | x) clamped to
    [eps, 1 - eps]."""

    params: dict
    buffers: dict
    x_mean: np.ndarray
    x_std: np.ndarray
    config: DiscriminatorConfig
    train_loss_history: list = field(default_factory=list)
    holdout_loss_history: list = field(default_factory=list)
    best_epoch: int = 0
    final_validation_loss: float = float("nan")

    @property
    def dim(self) -> int:
        return self.x_mean.shape[0]

    @property
    def final_loss(self) -> float:
        return self.final_validation_loss

    def logits(self, X) -> np.ndarray:
        X = _check_matrix(X, "X")
        if X.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} columns, got {X.shape[1]}")
        return forward_eval(self.params, self.buffers, (X - self.x_mean) / self.x_std, self.config.leaky_slope)

    def predict_proba(self, X) -> np.ndarray:
        eps = self.config.prob_clamp
        return np.clip(expit(self.logits(X)), eps, 1.0 - eps)

    def save(self, path) -> None:
        meta = {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "train_loss_history": self.train_loss_history,
            "holdout_loss_history": self.holdout_loss_history,
            "best_epoch": self.best_epoch,
            "final_validation_loss": self.final_validation_loss,
        }
        arrays = {f"param/{k}": v for k, v in self.params.items()}
        arrays.update({f"buffer/{k}": v for k, v in self.buffers.items()})
        with open(path, "wb") as fh:
            np.savez(fh, x_mean=self.x_mean, x_std=self.x_std, meta=np.array(json.dumps(meta)), **arrays)

    @classmethod
    def load(cls, path) -> "TrainedDiscriminator":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format_version") != FORMAT_VERSION:
                raise DataError(f"unsupported model format {meta.get('format_version')!r}")
            params = {k[6:]: z[k] for k in z.files if k.startswith("param/")}
            buffers = {k[7:]: z[k] for k in z.files if k.startswith("buffer/")}
            return cls(
                params=params,
                buffers=buffers,
                x_mean=z["x_mean"],
                x_std=z["x_std"],
                config=DiscriminatorConfig(**meta["config"]),
                train_loss_history=meta["train_loss_history"],
                holdout_loss_history=meta["holdout_loss_history"],
                best_epoch=meta["best_epoch"],
                final_validation_loss=meta["final_validation_loss"],
            )


def train(X_p, X_q, config: DiscriminatorConfig | None = None) -> TrainedDiscriminator:
    """Fit the discriminator with X_p labelled 1 and X_q labelled 0.

    Loss values recorded in the histories use the two-class-mean
    convention of :func:`bce_loss`; the optimiser itself minimises the
    per-sample mean BCE, which for balanced batches is half of it.
    """
    cfg = config or DiscriminatorConfig()
    X_p = _check_matrix(X_p, "X_p")
    X_q = _check_matrix(X_q, "X_q")
    if X_p.shape[1] != X_q.shape[1]:
        raise ValueError(f"dimension mismatch: {X_p.shape[1]} vs {X_q.shape[1]}")
    if X_p.shape[0] < 2 or X_q.shape[0] < 2:
        raise DataError("each class needs at least 2 rows")

    split_ss, init_ss, loop_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    X = np.vstack([X_p, X_q])
    y = np.concatenate([np.ones(X_p.shape[0]), np.zeros(X_q.shape[0])])
    tr, ho = stratified_split(y, cfg.holdout_fraction, np.random.default_rng(split_ss))

    x_mean = X[tr].mean(axis=0)
    x_std = X[tr].std(axis=0)
    x_std[x_std < 1e-12] = 1.0
    Z = (X - x_mean) / x_std
    Z_tr, y_tr = Z[tr], y[tr]
    Z_ho, y_ho = Z[ho], y[ho]

    params, buffers = _init_params(X.shape[1], cfg, np.random.default_rng(init_ss))
    opt = _Adam(params, cfg.learning_rate)
    rng = np.random.default_rng(loop_ss)
    slope = cfg.leaky_slope
    n = Z_tr.shape[0]
    n_batches = max(1, n // min(cfg.batch_size, n))

    best = (math.inf, 0, None, None)
    train_hist, hold_hist = [], []
    for epoch in range(cfg.max_epochs):
        perm = rng.permutation(n)
        logits_epoch = np.empty(n)
        for batch in np.array_split(perm, n_batches):
            xb, yb = Z_tr[batch], y_tr[batch]
            masks = dropout_masks(batch.size, cfg, rng)
            s, grads, stats = loss_and_grads(params, xb, yb, masks, slope)
            logits_epoch[batch] = s
            opt.step(params, grads)
            for i, (mu, var) in enumerate(stats):
                buffers[f"rm{i}"] = (1 - BN_MOMENTUM) * buffers[f"rm{i}"] + BN_MOMENTUM * mu
                buffers[f"rv{i}"] = (1 - BN_MOMENTUM) * buffers[f"rv{i}"] + BN_MOMENTUM * var
        train_loss = _bce_from_logits(logits_epoch, y_tr)
        hold_loss = _bce_from_logits(forward_eval(params, buffers, Z_ho, slope), y_ho)
        if not (math.isfinite(train_loss) and math.isfinite(hold_loss)):
            raise NumericalError(f"non-finite loss at epoch {epoch}")
        train_hist.append(train_loss)
        hold_hist.append(hold_loss)
        if hold_loss < best[0]:
            best = (hold_loss, epoch, {k: v.copy() for k, v in params.items()},
                    {k: v.copy() for k, v in buffers.items()})
        elif epoch - best[1] >= cfg.patience:
            break

    best_loss, best_epoch, best_params, best_buffers = best
    return TrainedDiscriminator(
        params=best_params,
        buffers=best_buffers,
        x_mean=x_mean,
        x_std=x_std,
        config=cfg,
        train_loss_history=train_hist,
        holdout_loss_history=hold_hist,
        best_epoch=best_epoch,
        final_validation_loss=best_loss,
    )


def predict_proba(disc: TrainedDiscriminator, X) -> np.ndarray:
    return disc.predict_proba(X)
