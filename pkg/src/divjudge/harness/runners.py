"""Experiment runners.

Every (cell, replicate) pair is an independent job whose random stream is
derived from (master seed, job tag, cell key, replicate), so results do not
depend on worker count or completion order.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from itertools import product

import numpy as np

from ..distributions import (
    DivergenceEstimate,
    GaussianDist,
    gaussian_kl_analytical,
    isotropic_mixture,
    js_terms,
    log_pdf,
    mc_js,
    mc_kl,
    random_gaussian_pair,
    sample,
)
from ..divergence import derive_seed, run_replicate, seed_int
from ..errors import DataError
from ..gmmfit import EMConfig, fit_gmm
from ..tabular import encode, infer_schema, load_csv
from .config import ExperimentConfig
from .results import Cell, RunResult

log = logging.getLogger(__name__)

# spawn-key tags keep the random streams of different roles apart
PAIR, JOB, ORACLE_KL, ORACLE_JS, GM_TRAIN, GM_FIT = range(6)


def exp2_pair():
    """Default mixtures: two isotropic components each, distinct weights.

    MC JS between them is about 0.42 nats and MC KL about 2.9 nats.
    """
    p = isotropic_mixture([[0.0, 0.0], [3.0, 3.0]], [1.0, 1.0], [0.3, 0.7])
    q = isotropic_mixture([[1.5, 0.0], [4.5, 0.0]], [0.5, 2.0], [0.6, 0.4])
    return p, q


def _job_replicate(p, q, disc_cfg, M, L, ss, with_mc):
    t0 = time.perf_counter()
    rep = run_replicate(p, q, disc_cfg, M, L, ss, keep_eval=with_mc)
    out = rep.to_dict()
    if with_mc:
        out["mc_kl"] = float(np.mean(log_pdf(p, rep.eval_p) - log_pdf(q, rep.eval_p)))
        out["mc_js"] = js_terms(p, q, rep.eval_p, rep.eval_q)
    return out, time.perf_counter() - t0


def _job_generative(truth, N, em_cfg, disc_cfg, M, L, oracle_L, master, n, r):
    t0 = time.perf_counter()
    rows = sample(truth, N, derive_seed(master, GM_TRAIN, n, r))
    fitted = fit_gmm(rows, EMConfig(**{**em_cfg, "seed": seed_int(derive_seed(master, GM_FIT, n, r))}))
    out = run_replicate(truth, fitted, disc_cfg, M, L, derive_seed(master, JOB, n, r)).to_dict()
    out["mc_kl"] = mc_kl(truth, fitted, oracle_L, derive_seed(master, ORACLE_KL, n, r))
    out["mc_js"] = mc_js(truth, fitted, oracle_L, derive_seed(master, ORACLE_JS, n, r))
    out["fitted"] = fitted.to_dict()
    return out, time.perf_counter() - t0


def _call(job):
    fn, args = job
    return fn(*args)


def _execute(jobs: dict, workers: int) -> dict:
    """Run {key: (fn, args)} and return {key: result} in key order."""
    keys = list(jobs)
    if workers == 1 or len(keys) == 1:
        results = [_call(jobs[k]) for k in keys]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_call, [jobs[k] for k in keys]))
    return dict(zip(keys, results))


def _estimate(values, method, kind, meta):
    return DivergenceEstimate.from_values(values, method, kind, meta)


def _collect(key, outs, meta, mc_method="mc"):
    """Aggregate replicate dicts of one cell into its estimates."""
    est = {
        "disc_kl": _estimate([o["kl"] for o in outs], "discriminator", "kl", meta),
        "disc_js": _estimate([o["js"] for o in outs], "discriminator", "js", meta),
        "loss_js": _estimate([o["js_from_loss"] for o in outs], "discriminator", "js", meta),
    }
    if "mc_kl" in outs[0]:
        est["mc_kl"] = _estimate([o["mc_kl"] for o in outs], mc_method, "kl", meta)
        est["mc_js"] = _estimate([o["mc_js"] for o in outs], mc_method, "js", meta)
    return Cell(dict(key), est, outs)


def _timings(t_start, cell_times):
    return {"total_seconds": time.perf_counter() - t_start, "cells": cell_times}


def _grid_run(cfg: ExperimentConfig, p, q, analytical: float | None, dists: dict) -> RunResult:
    t_start = time.perf_counter()
    disc_cfg = cfg.disc_config()
    oracle_kl = [mc_kl(p, q, cfg.mc_oracle_L, derive_seed(cfg.master_seed, ORACLE_KL, r)) for r in range(cfg.n_seeds)]
    oracle_js = [mc_js(p, q, cfg.mc_oracle_L, derive_seed(cfg.master_seed, ORACLE_JS, r)) for r in range(cfg.n_seeds)]
    cells_keys = list(product(cfg.M_grid, cfg.L_grid))
    jobs = {
        (M, L, r): (_job_replicate, (p, q, disc_cfg, M, L, derive_seed(cfg.master_seed, JOB, M, L, r), True))
        for (M, L) in cells_keys for r in range(cfg.n_seeds)
    }
    done = _execute(jobs, cfg.workers)
    result = RunResult(cfg.experiment, cfg.to_dict(), dists)
    cell_times = []
    for M, L in cells_keys:
        outs = [done[(M, L, r)][0] for r in range(cfg.n_seeds)]
        meta = {"M": M, "L": L, "n_seeds": cfg.n_seeds}
        cell = _collect({"M": M, "L": L}, outs, meta)
        ometa = {**meta, "L": cfg.mc_oracle_L}
        cell.estimates["mc_kl_oracle"] = _estimate(oracle_kl, "mc", "kl", ometa)
        cell.estimates["mc_js_oracle"] = _estimate(oracle_js, "mc", "js", ometa)
        if analytical is not None:
            cell.estimates["analytical_kl"] = DivergenceEstimate(analytical, 0.0, "analytical", "kl", dict(meta))
        result.cells.append(cell)
        cell_times.append({"M": M, "L": L, "seconds": [done[(M, L, r)][1] for r in range(cfg.n_seeds)]})
    result.timings = _timings(t_start, cell_times)
    result.check_finite()
    return result


def run_exp1(cfg: ExperimentConfig) -> RunResult:
    """Random d-dimensional Gaussian pair with known KL over the M x L grid."""
    p, q = random_gaussian_pair(cfg.d, derive_seed(cfg.master_seed, PAIR), target_kl=cfg.target_kl)
    analytical = gaussian_kl_analytical(p, q)
    return _grid_run(cfg, p, q, analytical, {"p": p.to_dict(), "q": q.to_dict()})


def run_exp2(cfg: ExperimentConfig) -> RunResult:
    """Two-component isotropic mixtures; MC oracles only."""
    p, q = exp2_pair()
    if cfg.d != p.dim:
        raise DataError(f"the default mixtures are {p.dim}-dimensional, got d={cfg.d}")
    return _grid_run(cfg, p, q, None, {"p": p.to_dict(), "q": q.to_dict()})


def run_exp3(cfg: ExperimentConfig) -> RunResult:
    """Fit a GMM on N truth samples, then compare truth with the fit."""
    t_start = time.perf_counter()
    truth, _ = exp2_pair()
    if cfg.d != truth.dim:
        raise DataError(f"the default truth mixture is {truth.dim}-dimensional, got d={cfg.d}")
    M, L = cfg.M_grid[0], cfg.L_grid[0]
    disc_cfg = cfg.disc_config()
    em = {"k": 2, **cfg.em}
    jobs = {
        (n, r): (_job_generative, (truth, n, em, disc_cfg, M, L, cfg.mc_oracle_L, cfg.master_seed, n, r))
        for n in cfg.N_grid for r in range(cfg.n_seeds)
    }
    done = _execute(jobs, cfg.workers)
    result = RunResult(cfg.experiment, cfg.to_dict(), {"truth": truth.to_dict()})
    cell_times = []
    for n in cfg.N_grid:
        outs = [done[(n, r)][0] for r in range(cfg.n_seeds)]
        meta = {"N": n, "M": M, "L": L, "n_seeds": cfg.n_seeds, "mc_L": cfg.mc_oracle_L}
        result.cells.append(_collect({"N": n}, outs, meta))
        cell_times.append({"N": n, "seconds": [done[(n, r)][1] for r in range(cfg.n_seeds)]})
    result.timings = _timings(t_start, cell_times)
    result.check_finite()
    return result


def sweep_pair(d: int, separation: float):
    """N(0, I) against N(separation * u, I) with u a unit vector."""
    u = np.ones(d) / math.sqrt(d)
    return GaussianDist(np.zeros(d), np.eye(d)), GaussianDist(separation * u, np.eye(d))


def run_sweep(cfg: ExperimentConfig) -> RunResult:
    """Ground truth against discriminator estimates as the mean offset grows."""
    t_start = time.perf_counter()
    M, L = cfg.M_grid[0], cfg.L_grid[0]
    disc_cfg = cfg.disc_config()
    pairs = [sweep_pair(cfg.d, s) for s in cfg.separations]
    jobs = {
        (i, r): (_job_replicate, (p, q, disc_cfg, M, L, derive_seed(cfg.master_seed, JOB, i, r), False))
        for i, (p, q) in enumerate(pairs) for r in range(cfg.n_seeds)
    }
    done = _execute(jobs, cfg.workers)
    result = RunResult(cfg.experiment, cfg.to_dict(), {"base": pairs[0][0].to_dict(),
                                                       "offset_direction": (np.ones(cfg.d) / math.sqrt(cfg.d)).tolist()})
    cell_times = []
    for i, (s, (p, q)) in enumerate(zip(cfg.separations, pairs)):
        outs = [done[(i, r)][0] for r in range(cfg.n_seeds)]
        meta = {"M": M, "L": L, "n_seeds": cfg.n_seeds}
        cell = _collect({"separation": s}, outs, meta)
        ometa = {"L": cfg.mc_oracle_L, "n_seeds": 1}
        cell.estimates["analytical_kl"] = DivergenceEstimate(gaussian_kl_analytical(p, q), 0.0, "analytical", "kl", {})
        cell.estimates["mc_kl_oracle"] = DivergenceEstimate(
            mc_kl(p, q, cfg.mc_oracle_L, derive_seed(cfg.master_seed, ORACLE_KL, i)), 0.0, "mc", "kl", dict(ometa))
        cell.estimates["mc_js_oracle"] = DivergenceEstimate(
            mc_js(p, q, cfg.mc_oracle_L, derive_seed(cfg.master_seed, ORACLE_JS, i)), 0.0, "mc", "js", dict(ometa))
        result.cells.append(cell)
        cell_times.append({"separation": s, "seconds": [done[(i, r)][1] for r in range(cfg.n_seeds)]})
    result.timings = _timings(t_start, cell_times)
    result.check_finite()
    return result


MIN_ROWS = 50


def scale_sizes(n: int, M: int, L: int) -> tuple:
    """Shrink (M, L) proportionally so that M + L <= n."""
    if M + L <= n:
        return M, L
    f = n / (M + L)
    M2, L2 = max(2, int(M * f)), max(1, int(L * f))
    log.warning("only %d rows per side; scaling M, L from (%d, %d) to (%d, %d)", n, M, L, M2, L2)
    return M2, L2


def run_compare(cfg: ExperimentConfig) -> RunResult:
    """Real CSV against synthetic CSV (label 1 = real, 0 = synthetic)."""
    t_start = time.perf_counter()
    if not cfg.real or not cfg.synthetic:
        raise DataError("compare needs both a real and a synthetic CSV")
    real = load_csv(cfg.real, cfg.missing_tokens)
    synth = load_csv(cfg.synthetic, cfg.missing_tokens)
    schema = infer_schema(real)
    X_r = encode(real, schema, "real")
    X_s = encode(synth, schema, "synthetic")
    n = min(len(X_r), len(X_s))
    if n < MIN_ROWS:
        raise DataError(f"need at least {MIN_ROWS} rows per side, got {len(X_r)} real and {len(X_s)} synthetic")
    M, L = scale_sizes(n, cfg.M_grid[0], cfg.L_grid[0])
    disc_cfg = cfg.disc_config()
    jobs = {
        r: (_job_replicate, (X_r.values, X_s.values, disc_cfg, M, L, derive_seed(cfg.master_seed, JOB, r), False))
        for r in range(cfg.n_seeds)
    }
    done = _execute(jobs, cfg.workers)
    outs = [done[r][0] for r in range(cfg.n_seeds)]
    meta = {"M": M, "L": L, "n_seeds": cfg.n_seeds}
    cell = _collect({"M": M, "L": L}, outs, meta)
    cell.extra = {
        "rows": {"real": len(X_r), "synthetic": len(X_s)},
        "encoded_width": X_r.shape[1],
        "encoding_report": {"real": X_r.report, "synthetic": X_s.report},
    }
    result = RunResult("compare", cfg.to_dict(), {"schema": schema.to_dict()}, [cell])
    result.timings = _timings(t_start, [{"M": M, "L": L, "seconds": [done[r][1] for r in range(cfg.n_seeds)]}])
    result.check_finite()
    return result


RUNNERS = {
    "exp1": run_exp1,
    "exp2": run_exp2,
    "exp3": run_exp3,
    "sweep": run_sweep,
    "compare": run_compare,
}


def run(cfg: ExperimentConfig) -> RunResult:
    return RUNNERS[cfg.experiment](cfg)

