"""Reference distributions with exact sampling/log-density, and the
analytical and Monte-Carlo divergence oracles built on them.

All divergences are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import logsumexp

from .errors import NumericalError

LN2 = math.log(2.0)
LN4 = math.log(4.0)

METHODS = ("analytical", "mc", "discriminator")
KINDS = ("kl", "js")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class GaussianDist:
    """Multivariate normal with a cached lower Cholesky factor.

    Instances are immutable; the arrays they expose are read-only.
    """

    def __init__(self, mean, cov):
        mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
        d = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (d, d):
            raise ValueError(f"mean shape {mean.shape} incompatible with covariance shape {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("mean and covariance must be finite")
        if np.max(np.abs(cov - cov.T)) > 1e-10:
            raise ValueError("covariance is not symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            # no silent jitter: it would change the ground truth
            raise NumericalError("covariance is not positive definite") from exc
        self.mean = _frozen(mean)
        self.cov = _frozen(cov)
        self.chol = _frozen(chol)
        self._logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def logdet(self) -> float:
        return self._logdet

    def __repr__(self):
        return f"GaussianDist(dim={self.dim})"

    def __eq__(self, other):
        if not isinstance(other, GaussianDist):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)

    __hash__ = None

    def to_dict(self) -> dict:
        return {"type": "gaussian", "mean": self.mean.tolist(), "cov": self.cov.tolist()}


class MixtureDist:
    """Finite mixture of Gaussians sharing one dimension."""

    def __init__(self, components: Sequence[GaussianDist], weights):
        components = tuple(components)
        weights = np.atleast_1d(np.asarray(weights, dtype=np.float64))
        if not components:
            raise ValueError("a mixture needs at least one component")
        if weights.shape != (len(components),):
            raise ValueError("one weight per component is required")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise ValueError(f"components have different dimensions: {sorted(dims)}")
        self.components = components
        self.weights = _frozen(weights)
        self._log_weights = np.log(self.weights)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def k(self) -> int:
        return len(self.components)

    def __repr__(self):
        return f"MixtureDist(k={self.k}, dim={self.dim})"

    def __eq__(self, other):
        if not isinstance(other, MixtureDist):
            return NotImplemented
        return np.array_equal(self.weights, other.weights) and self.components == other.components

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "type": "mixture",
            "weights": self.weights.tolist(),
            "components": [c.to_dict() for c in self.components],
        }


Distribution = Union[GaussianDist, MixtureDist]


def dist_from_dict(d: dict) -> Distribution:
    if d["type"] == "gaussian":
        return GaussianDist(d["mean"], d["cov"])
    if d["type"] == "mixture":
        return MixtureDist([dist_from_dict(c) for c in d["components"]], d["weights"])
    raise ValueError(f"unknown distribution type {d['type']!r}")


def isotropic_mixture(means, variances, weights) -> MixtureDist:
    """Mixture whose k-th component is N(means[k], variances[k] * I)."""
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    d = means.shape[1]
    comps = [GaussianDist(m, v * np.eye(d)) for m, v in zip(means, variances)]
    return MixtureDist(comps, weights)


def sample(dist: Distribution, n: int, seed) -> np.ndarray:
    """Draw ``n`` rows from ``dist``.

    ``seed`` may be an int, a SeedSequence or a Generator; the same
    (dist, n, int seed) always yields bit-identical output.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(dist, GaussianDist):
        z = rng.standard_normal((n, dist.dim))
        return dist.mean + z @ dist.chol.T
    idx = rng.choice(dist.k, size=n, p=dist.weights)
    out = np.empty((n, dist.dim))
    for j, comp in enumerate(dist.components):
        rows = np.flatnonzero(idx == j)
        if rows.size:
            z = rng.standard_normal((rows.size, dist.dim))
            out[rows] = comp.mean + z @ comp.chol.T
    return out


def _gaussian_log_pdf(dist: GaussianDist, x: np.ndarray) -> np.ndarray:
    diff = x - dist.mean
    # L y = diff^T, so |y|^2 is the Mahalanobis term
    y = solve_triangular(dist.chol, diff.T, lower=True)
    maha = np.sum(y * y, axis=0)
    return -0.5 * (dist.dim * math.log(2 * math.pi) + dist.logdet + maha)


def log_pdf(dist: Distribution, x):
    """Log-density at a point ``(d,)`` (returns float) or rows ``(n, d)``."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.ndim != 2 or x2.shape[1] != dist.dim:
        raise ValueError(f"expected dimension {dist.dim}, got shape {x.shape}")
    if isinstance(dist, GaussianDist):
        out = _gaussian_log_pdf(dist, x2)
    else:
        terms = np.stack(
            [lw + _gaussian_log_pdf(c, x2) for lw, c in zip(dist._log_weights, dist.components)]
        )
        out = logsumexp(terms, axis=0)
    return float(out[0]) if single else out


def gaussian_kl_analytical(p: GaussianDist, q: GaussianDist) -> float:
    """Closed-form KL(p || q) between two multivariate normals."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    qf = (q.chol, True)
    trace = float(np.trace(cho_solve(qf, p.cov)))
    dm = q.mean - p.mean
    maha = float(dm @ cho_solve(qf, dm))
    kl = 0.5 * (trace + maha - p.dim + q.logdet - p.logdet)
    # rounding can leave -1e-16 for identical inputs
    return max(kl, 0.0)


def mc_kl(p: Distribution, q: Distribution, L: int, seed) -> float:
    """(1/L) sum log p(x)/q(x) with x ~ p."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    x = sample(p, L, seed)
    return float(np.mean(log_pdf(p, x) - log_pdf(q, x)))


def js_terms(p: Distribution, q: Distribution, xp: np.ndarray, xq: np.ndarray) -> float:
    """Two-sided JS estimate from given draws xp ~ p, xq ~ q."""
    lp_p, lq_p = log_pdf(p, xp), log_pdf(q, xp)
    lp_q, lq_q = log_pdf(p, xq), log_pdf(q, xq)
    a = lp_p - (np.logaddexp(lp_p, lq_p) - LN2)
    b = lq_q - (np.logaddexp(lp_q, lq_q) - LN2)
    return float(0.5 * np.mean(a) + 0.5 * np.mean(b))


def mc_js(p: Distribution, q: Distribution, L: int, seed) -> float:
    """MC Jensen-Shannon with L draws from each side, midpoint m = (p+q)/2."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    rng = np.random.default_rng(seed)
    xp = sample(p, L, rng)
    xq = sample(q, L, rng)
    return js_terms(p, q, xp, xq)


def random_gaussian(d: int, rng) -> GaussianDist:
    """Mean ~ U[0,1]^d, covariance A A^T + 0.5 I with A standard normal."""
    rng = np.random.default_rng(rng)
    mean = rng.uniform(0.0, 1.0, d)
    a = rng.standard_normal((d, d))
    cov = a @ a.T + 0.5 * np.eye(d)
    return GaussianDist(mean, 0.5 * (cov + cov.T))


def interpolate_gaussian(p: GaussianDist, q: GaussianDist, t: float) -> GaussianDist:
    """Point at fraction ``t`` on the straight line from p to q in (mean, cov)."""
    cov = (1 - t) * p.cov + t * q.cov
    return GaussianDist((1 - t) * p.mean + t * q.mean, 0.5 * (cov + cov.T))


def random_gaussian_pair(d: int, seed, target_kl: float | None = None, tol: float = 1e-10):
    """Draw a random pair (p, q).

    With ``target_kl`` set, q is pulled toward p along the (mean, cov) line
    until KL(p || q) equals the target (bisection). Redraws q if the raw
    pair is not separated enough to reach it.
    """
    rng = np.random.default_rng(seed)
    p = random_gaussian(d, rng)
    q = random_gaussian(d, rng)
    if target_kl is None:
        return p, q
    if target_kl <= 0:
        raise ValueError("target_kl must be positive")
    while gaussian_kl_analytical(p, q) < target_kl:
        q = random_gaussian(d, rng)
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gaussian_kl_analytical(p, interpolate_gaussian(p, q, mid)) < target_kl:
            lo = mid
        else:
            hi = mid
    return p, interpolate_gaussian(p, q, hi)


@dataclass
class DivergenceEstimate:
    """A divergence value in nats with its cross-seed spread."""

    value: float
    dispersion: float
    method: str
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not math.isfinite(self.value) or not math.isfinite(self.dispersion):
            raise NumericalError(f"non-finite {self.kind} estimate")
        if self.dispersion < 0:
            raise ValueError("dispersion must be >= 0")
        self.value = float(self.value)
        self.dispersion = float(self.dispersion)

    @classmethod
    def from_values(cls, values, method: str, kind: str, meta: dict | None = None):
        v = np.asarray(values, dtype=np.float64)
        sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        meta = dict(meta or {})
        meta.setdefault("n_seeds", int(v.size))
        return cls(float(np.mean(v)), sd, method, kind, meta)

    @property
    def bits(self) -> float:
        """JS on the base-2 scale where the upper bound is 1."""
        if self.kind != "js":
            raise AttributeError("only JS estimates expose a base-2 value")
        return self.value / LN2

    def to_dict(self) -> dict:
        d = {
            "value": self.value,
            "dispersion": self.dispersion,
            "method": self.method,
            "kind": self.kind,
            "meta": self.meta,
        }
        if self.kind == "js":
            d["bits"] = self.bits
        return d

    @classmethod
    def from_dict(cls, d: dict):
        return cls(d["value"], d["dispersion"], d["method"], d["kind"], dict(d.get("meta", {})))
