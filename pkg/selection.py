"""
Dimension selection baselines for fixed-dimension GLNEMs with lambda ~ N(0, n I):
AIC, BIC, DIC, WAIC and K-fold cross-validation with the one-standard-error rule.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

import settings
from exceptions import ConfigError, DataError
from families import Family
from network_io import NetworkData
from postprocess import align_draws, summarize
from sampler import DrawStore, SamplerConfig, run_chains
from ssibp_prior import HyperParams


def num_parameters(n: int, d: int, p: int) -> int:
    return n * d + d + p


def aic(loglik_at_estimate: float, n: int, d: int, p: int) -> float:
    return -2.0 * loglik_at_estimate + 2.0 * num_parameters(n, d, p)


def bic(loglik_at_estimate: float, n: int, d: int, p: int) -> float:
    return -2.0 * loglik_at_estimate + num_parameters(n, d, p) * math.log(n * (n - 1) / 2.0)


def dic_complexity(draw_logliks, loglik_at_estimate: float) -> float:
    return 2.0 * (loglik_at_estimate - float(np.mean(draw_logliks)))


def dic(draws, loglik_at_estimate: float) -> float:
    """draws is a DrawStore or the vector of per-draw total log-likelihoods."""
    logliks = draws.loglik if isinstance(draws, DrawStore) else np.asarray(draws, dtype=float)
    if logliks.size == 0:
        raise DataError("dic needs at least one draw")
    return -2.0 * loglik_at_estimate + 2.0 * dic_complexity(logliks, loglik_at_estimate)


def waic_terms(per_dyad_loglik: np.ndarray, chunk: int = 1024) -> Tuple[float, float]:
    """
    (lppd, p_waic) from an S x D matrix, streaming over blocks of draws.

    log-mean-exp keeps a running max per dyad; the variance uses Welford updates merged
    block by block, with an S - 1 denominator.
    """
    ll = np.asarray(per_dyad_loglik, dtype=float)
    if ll.ndim != 2:
        raise DataError(f"waic needs a draws x dyads matrix, got shape {ll.shape}")
    S, D = ll.shape
    if S < 2:
        raise ConfigError(f"waic needs at least two draws, got {S}; raise sampler.draws")
    running_max = np.full(D, -np.inf)
    scaled_sum = np.zeros(D)
    count = 0
    mean = np.zeros(D)
    m2 = np.zeros(D)
    for start in range(0, S, chunk):
        block = ll[start:start + chunk]
        b = block.shape[0]
        new_max = np.maximum(running_max, block.max(axis=0))
        scaled_sum = scaled_sum * np.exp(running_max - new_max) + np.exp(block - new_max).sum(axis=0)
        running_max = new_max

        block_mean = block.mean(axis=0)
        block_m2 = ((block - block_mean) ** 2).sum(axis=0)
        delta = block_mean - mean
        total = count + b
        mean = mean + delta * b / total
        m2 = m2 + block_m2 + delta ** 2 * count * b / total
        count = total
    lppd = float(np.sum(running_max + np.log(scaled_sum) - math.log(S)))
    p_waic = float(np.sum(m2 / (S - 1)))
    return lppd, p_waic


def waic(per_dyad_loglik: np.ndarray) -> float:
    lppd, p_waic = waic_terms(per_dyad_loglik)
    return -2.0 * lppd + 2.0 * p_waic


def one_se_rule(d_grid: Sequence[int], means: Sequence[float], ses: Sequence[float]) -> Tuple[int, int]:
    """(best d, smallest d whose score is within one SE of the best); ties go to the smaller d."""
    order = np.argsort(np.asarray(d_grid), kind="stable")
    d_sorted = np.asarray(d_grid)[order]
    means = np.asarray(means, dtype=float)[order]
    ses = np.asarray(ses, dtype=float)[order]
    best = int(np.argmax(means))
    threshold = means[best] - ses[best]
    chosen = int(np.flatnonzero(means >= threshold)[0])
    return int(d_sorted[best]), int(d_sorted[chosen])


# ---------------------------------------------------------------------------
# Point estimates
# ---------------------------------------------------------------------------

def linear_predictor_draws(draws: DrawStore, data: NetworkData, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """S x D matrix of linear predictors at the given dyads."""
    covariates = data.X[:, rows, cols].T
    latent = np.einsum("sdh,sh,sdh->sd", draws.U[:, rows, :], draws.lam, draws.U[:, cols, :])
    return draws.beta @ covariates.T + latent


def point_loglik(data: NetworkData, family: Family, beta: np.ndarray, U: np.ndarray, lam: np.ndarray,
                 phi: float, power: float, rows: np.ndarray, cols: np.ndarray) -> float:
    eta = data.X[:, rows, cols].T @ beta + np.einsum("dh,h,dh->d", U[rows], lam, U[cols])
    mu = family.inverse_link(eta)
    return float(np.sum(family.log_density(data.Y[rows, cols], mu, phi, power)))


def loglik_at_estimate(draws: DrawStore, data: NetworkData, family: Family) -> float:
    """Log-likelihood at posterior means, with U at the Frechet mean of the aligned draws."""
    aligned = align_draws(draws)
    summary = summarize(aligned)
    U_hat = np.nan_to_num(summary.U_hat)
    return point_loglik(data, family, aligned.draws.beta.mean(axis=0), U_hat, aligned.draws.lam.mean(axis=0),
                        float(draws.phi.mean()), float(draws.power.mean()), draws.dyad_rows, draws.dyad_cols)


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------

def _quiet(config: SamplerConfig) -> SamplerConfig:
    return replace(config, progress=False, verbose=False)


def fit_fixed_dimension(data: NetworkData, family: Family, d: int, config: SamplerConfig,
                        hyper: Optional[HyperParams] = None) -> Dict[str, float]:
    """Fit the Gaussian-prior GLNEM of dimension d and score it with every information criterion."""
    hyper = replace(hyper or HyperParams(), d=d, a=None, kappa=None)
    draws = run_chains(data, family, hyper, replace(config, keep_dyad_loglik=True), prior="gaussian")
    ll_hat = loglik_at_estimate(draws, data, family)
    lppd, p_waic = waic_terms(draws.loglik_dyads)
    return {
        "d": d,
        "k": num_parameters(data.n, d, data.p),
        "loglik_hat": ll_hat,
        "aic": aic(ll_hat, data.n, d, data.p),
        "bic": bic(ll_hat, data.n, d, data.p),
        "p_dic": dic_complexity(draws.loglik, ll_hat),
        "dic": dic(draws, ll_hat),
        "lppd": lppd,
        "p_waic": p_waic,
        "waic": -2.0 * lppd + 2.0 * p_waic,
    }


def cv_partition(data: NetworkData, K: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """K disjoint folds covering the observed off-diagonal dyads; each fold is (rows, cols)."""
    if K < 2:
        raise ConfigError(f"select.folds must be at least 2, got {K}")
    rows, cols = data.offdiagonal_indices()
    order = np.random.default_rng(seed).permutation(rows.size)
    folds = np.array_split(order, K)
    if any(fold.size == 0 for fold in folds):
        raise ConfigError(f"{rows.size} observed dyads cannot fill {K} folds")
    return [(rows[fold], cols[fold]) for fold in folds]


def heldout_score(draws: DrawStore, data: NetworkData, family: Family, rows: np.ndarray, cols: np.ndarray) -> float:
    """Held-out log-likelihood at the posterior-mean linear predictor."""
    eta_hat = linear_predictor_draws(draws, data, rows, cols).mean(axis=0)
    mu = family.inverse_link(eta_hat)
    return float(np.sum(family.log_density(data.Y[rows, cols], mu, float(draws.phi.mean()),
                                           float(draws.power.mean()))))


def _fold_job(data: NetworkData, family: Family, d: int, fold: int, heldout: Tuple[np.ndarray, np.ndarray],
              config: SamplerConfig, hyper: HyperParams) -> Dict[str, float]:
    rows, cols = heldout
    mask = np.ones((data.n, data.n), dtype=bool) if data.mask is None else data.mask.copy()
    mask[rows, cols] = False
    mask[cols, rows] = False
    training = data.with_mask(mask)
    draws = run_chains(training, family, replace(hyper, d=d, a=None, kappa=None),
                       replace(config, keep_dyad_loglik=False), prior="gaussian")
    return {"d": d, "fold": fold, "heldout_dyads": int(rows.size),
            "score": heldout_score(draws, data, family, rows, cols)}


def kfold_cv(data: NetworkData, family: Family, d_grid: Sequence[int], K: int, config: SamplerConfig,
             hyper: Optional[HyperParams] = None) -> Tuple[pd.DataFrame, pd.DataFrame, Dict[str, int]]:
    """
    Returns (per-fold scores, per-d mean and SE, {"cv_best": d, "cv_1se": d}).
    Held-out dyads are masked out of the training likelihood.
    """
    hyper = hyper or HyperParams()
    folds = cv_partition(data, K, config.seed)
    jobs = [(d, k) for d in d_grid for k in range(K)]
    quiet = _quiet(config)
    with ThreadPoolExecutor(max_workers=min(len(jobs), settings.thread_cap())) as pool:
        futures = [pool.submit(_fold_job, data, family, d, k, folds[k], quiet, hyper) for d, k in jobs]
        rows = [f.result() for f in tqdm(futures, desc="Selection cv", disable=not config.progress)]
    scores = pd.DataFrame(rows).sort_values(["d", "fold"], ignore_index=True)
    grouped = scores.groupby("d")["score"]
    summary = pd.DataFrame({"cv_mean": grouped.mean(), "cv_se": grouped.std(ddof=1) / math.sqrt(K)}).reset_index()
    best, chosen = one_se_rule(summary["d"], summary["cv_mean"], summary["cv_se"])
    return scores, summary, {"cv_best": best, "cv_1se": chosen}


@dataclass
class CriterionReport:
    table: pd.DataFrame
    selected: Dict[str, int]
    cv_scores: Optional[pd.DataFrame] = None
    provenance: Dict[str, object] = field(default_factory=dict)


def criterion_report(data: NetworkData, family: Family, d_grid: Sequence[int], config: SamplerConfig,
                     hyper: Optional[HyperParams] = None, folds: int = 0) -> CriterionReport:
    """Information criteria for every d in the grid, plus K-fold CV when folds >= 2."""
    d_grid = sorted(int(d) for d in d_grid)
    if not d_grid or d_grid[0] < 0:
        raise ConfigError(f"candidate dimensions must be non-negative, got {d_grid}")
    quiet = _quiet(config)
    with ThreadPoolExecutor(max_workers=min(len(d_grid), settings.thread_cap())) as pool:
        futures = [pool.submit(fit_fixed_dimension, data, family, d, quiet, hyper) for d in d_grid]
        rows = [f.result() for f in tqdm(futures, desc="Selection fits", disable=not config.progress)]
    table = pd.DataFrame(rows)
    selected = {name: int(table.loc[table[name].idxmin(), "d"]) for name in ("aic", "bic", "dic", "waic")}

    cv_scores = None
    if folds:
        cv_scores, cv_summary, cv_selected = kfold_cv(data, family, d_grid, folds, config, hyper)
        table = table.merge(cv_summary, on="d", how="left")
        selected.update(cv_selected)
    if config.verbose:
        print("Selection: " + ", ".join(f"{k}={v}" for k, v in selected.items()))
    return CriterionReport(table=table, selected=selected, cv_scores=cv_scores,
                           provenance={"family": family.describe(), "d_grid": d_grid, "folds": folds,
                                       "seed": config.seed, "versions": settings.versions()})
