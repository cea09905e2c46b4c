"""
Synthetic GLNEM networks and the metrics used to score fits against the truth.

Generators draw latent positions from a two-cluster Gaussian mixture pushed through the
centered QR map, eigenvalues from a +-cn mixture, and an intercept plus four Unif[-1, 1]
dyadic covariates.
"""
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

import settings
from exceptions import ConfigError, DataError
from families import Family, get_family
from manifold import centered_orthogonalize
from network_io import NetworkData
from postprocess import align_draw, align_draws, latent_product_mean, summarize
from sampler import DrawStore, SamplerConfig, run_chains
from selection import criterion_report
from ssibp_prior import HyperParams

LAMBDA_LOCATION = {"bernoulli": 1.0, "gaussian": 1.0, "poisson": 0.5, "negbin": 0.5, "tweedie": 2.0}
DEFAULT_PHI = {"gaussian": 9.0, "negbin": 0.5, "tweedie": 10.0}
DEFAULT_POWER = 1.6
CLUSTER_SD = 0.1


@dataclass
class SimConfig:
    n: int = 100
    d0: int = 3
    family: str = "bernoulli"
    link: Optional[str] = None
    c: Optional[float] = None
    phi: Optional[float] = None
    power: Optional[float] = None
    beta0: Optional[Sequence[float]] = None
    zero_inflation: float = 0.0
    seed: int = 0

    def resolve(self) -> "SimConfig":
        family = get_family(self.family, self.link).name
        beta0 = self.beta0
        if beta0 is None:
            beta0 = (1.0 if family == "gaussian" else -1.0, -0.5, 0.5, 0.0, 0.0)
        resolved = replace(
            self,
            family=family,
            c=self.c if self.c is not None else LAMBDA_LOCATION[family],
            phi=self.phi if self.phi is not None else DEFAULT_PHI.get(family, 1.0),
            power=self.power if self.power is not None else (DEFAULT_POWER if family == "tweedie" else None),
            beta0=tuple(float(b) for b in beta0),
        )
        if resolved.d0 < 1:
            raise ConfigError(f"simulate.d0 must be at least 1, got {resolved.d0}")
        if resolved.n < resolved.d0 + 1:
            raise ConfigError(f"simulate.n must exceed d0, got n={resolved.n}, d0={resolved.d0}")
        if not 0.0 <= resolved.zero_inflation <= 1.0:
            raise ConfigError(f"simulate.zero_inflation must lie in [0, 1], got {resolved.zero_inflation}")
        return resolved

    def true_family(self) -> Family:
        cfg = self.resolve()
        return get_family(cfg.family, cfg.link, phi=cfg.phi, power=cfg.power)


@dataclass
class SimTruth:
    beta0: np.ndarray
    U0: np.ndarray
    lambda0: np.ndarray
    config: SimConfig

    @property
    def d0(self) -> int:
        return int(self.lambda0.shape[0])

    @property
    def latent_product(self) -> np.ndarray:
        return self.U0 @ np.diag(self.lambda0) @ self.U0.T

    def save(self, prefix: str) -> str:
        path = f"{prefix}.truth.npz"
        np.savez_compressed(path, beta0=self.beta0, U0=self.U0, lambda0=self.lambda0,
                            config=np.array(json.dumps(asdict(self.config))))
        return path


def _symmetric_uniform(n: int, rng: np.random.Generator) -> np.ndarray:
    upper = np.triu(rng.uniform(-1.0, 1.0, size=(n, n)))
    return upper + np.triu(upper, 1).T


def _latent_truth(cfg: SimConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    n, d0 = cfg.n, cfg.d0
    centre = np.ones(d0) / math.sqrt(d0)
    side = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    B = side[:, None] * centre + CLUSTER_SD * rng.standard_normal((n, d0))
    U0 = centered_orthogonalize(B)
    signs = np.where(rng.random(d0) < 0.5, 1.0, -1.0)
    lambda0 = signs * cfg.c * n + math.sqrt(n) * rng.standard_normal(d0)
    return U0, lambda0


def generate_glnem(cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> Tuple[NetworkData, SimTruth]:
    cfg = cfg.resolve()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    family = cfg.true_family()
    U0, lambda0 = _latent_truth(cfg, rng)
    p = len(cfg.beta0)
    X = np.empty((p, cfg.n, cfg.n))
    X[0] = 1.0
    for k in range(1, p):
        X[k] = _symmetric_uniform(cfg.n, rng)
    beta0 = np.asarray(cfg.beta0)
    eta = np.tensordot(beta0, X, axes=1) + U0 @ np.diag(lambda0) @ U0.T
    mu = np.asarray(family.inverse_link(eta))
    draws = family.sample(mu, family.phi, family.power, rng)
    Y = np.triu(draws) + np.triu(draws, 1).T
    names = ["intercept"] + [f"x{k + 1}" for k in range(1, p)]
    data = NetworkData(Y=Y, X=X, diagonal_observed=False, covariate_names=names)
    return data, SimTruth(beta0=beta0, U0=U0, lambda0=lambda0, config=cfg)


def generate_zip(cfg: SimConfig, pi: float, rng: Optional[np.random.Generator] = None
                 ) -> Tuple[NetworkData, SimTruth]:
    """Poisson GLNEM network with each dyad zeroed independently with probability pi."""
    if not 0.0 <= pi <= 1.0:
        raise ConfigError(f"zero-inflation probability must lie in [0, 1], got {pi}")
    cfg = replace(cfg, family="poisson", link="log", zero_inflation=pi).resolve()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    data, truth = generate_glnem(cfg, rng)
    zeros = np.triu(rng.random((cfg.n, cfg.n)) < pi)
    zeros = zeros | np.triu(zeros, 1).T
    return replace(data, Y=np.where(zeros, 0.0, data.Y)), truth


def generate(cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> Tuple[NetworkData, SimTruth]:
    cfg = cfg.resolve()
    if cfg.zero_inflation > 0:
        return generate_zip(cfg, cfg.zero_inflation, rng)
    return generate_glnem(cfg, rng)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def trace_correlation(U0: np.ndarray, U_hat: np.ndarray) -> float:
    U0, U_hat = np.asarray(U0, dtype=float), np.asarray(U_hat, dtype=float)
    if U0.shape != U_hat.shape:
        raise DataError(f"dimension mismatch: {U0.shape} vs {U_hat.shape}")
    return float(np.trace(U0.T @ U_hat) / U0.shape[1])


def relative_error(A0, A_hat) -> float:
    A0, A_hat = np.asarray(A0, dtype=float), np.asarray(A_hat, dtype=float)
    norm = float(np.sum(A0 ** 2))
    if norm == 0.0:
        raise DataError("relative error against a zero truth")
    return float(np.sum((A_hat - A0) ** 2) / norm)


def evaluate_fit(truth: SimTruth, draws: DrawStore) -> Dict[str, Any]:
    """
    Scores a fit against the truth. The d0 columns with the highest inclusion probabilities
    are aligned to U0 before the trace correlation and eigenvalue error are taken; the
    U Lambda U^T error uses every dimension.
    """
    aligned = align_draws(draws)
    summary = summarize(aligned)
    d0 = truth.d0
    if draws.d < d0:
        raise ConfigError(f"fit has d={draws.d} < d0={d0}; cannot score the top {d0} dimensions")
    top = np.argsort(-summary.inclusion, kind="stable")[:d0]
    lam_hat = aligned.draws.lam.mean(axis=0)
    U_top, lam_top, _, _ = align_draw(np.nan_to_num(summary.U_hat[:, top]), lam_hat[top], truth.U0)
    beta_hat = aligned.draws.beta.mean(axis=0)
    row: Dict[str, Any] = {
        "trace_correlation": trace_correlation(truth.U0, U_top),
        "lambda_rel_error": relative_error(truth.lambda0, lam_top),
        "latent_rel_error": relative_error(truth.latent_product, latent_product_mean(draws)),
        "beta_rel_error": relative_error(truth.beta0, beta_hat),
        "dimension_mode": summary.dimension_mode,
        "phi_mean": float(draws.phi.mean()),
        "power_mean": float(draws.power.mean()),
    }
    for k, (true_b, est_b) in enumerate(zip(truth.beta0, beta_hat)):
        row[f"beta.{k + 1}_abs_error"] = float(abs(est_b - true_b))
    for k, prob in enumerate(summary.dimension_pmf):
        row[f"pmf.{k}"] = float(prob)
    return row


# ---------------------------------------------------------------------------
# Replicated experiments
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    replicates: pd.DataFrame
    heatmap: pd.DataFrame
    provenance: Dict[str, Any] = field(default_factory=dict)

    def save(self, out_dir: str) -> List[str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = [os.path.join(out_dir, "replicates.csv"), os.path.join(out_dir, "heatmap.csv")]
        self.replicates.to_csv(paths[0], index=False)
        self.heatmap.to_csv(paths[1], index=False)
        return paths


def _replicate(cfg: SimConfig, replicate: int, fit_family: Optional[str], hyper: HyperParams,
               config: SamplerConfig, select_grid: Sequence[int], folds: int) -> Dict[str, Any]:
    cfg_r = replace(cfg, seed=cfg.seed + replicate)
    data, truth = generate(cfg_r)
    family = get_family(fit_family or cfg_r.resolve().family,
                        None if fit_family else cfg_r.link)
    config_r = replace(config, seed=config.seed + replicate, progress=False, verbose=False)
    draws = run_chains(data, family, hyper, config_r)
    row = {"replicate": replicate, "seed": cfg_r.seed, "fit_family": family.name, **evaluate_fit(truth, draws)}
    if select_grid:
        report = criterion_report(data, family, select_grid, config_r, hyper, folds=folds)
        row.update({f"selected.{name}": d for name, d in report.selected.items()})
    return row


def run_experiment(cfg: SimConfig, replicates: int, config: SamplerConfig, hyper: Optional[HyperParams] = None,
                   fit_family: Optional[str] = None, select_grid: Sequence[int] = (),
                   folds: int = 0) -> ExperimentResult:
    """
    Simulate `replicates` networks (seed cfg.seed + r), fit each with the spike-and-slab prior and
    optionally the fixed-dimension baselines, and tabulate metrics and selected dimensions.
    """
    if replicates < 1:
        raise ConfigError(f"simulate.replicates must be positive, got {replicates}")
    cfg = cfg.resolve()
    hyper = hyper or HyperParams()
    workers = 1 if config.reproducible else min(replicates, settings.thread_cap())
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_replicate, cfg, r, fit_family, hyper, config, select_grid, folds)
                   for r in range(replicates)]
        rows = [f.result() for f in tqdm(futures, desc="Experiment", disable=not config.progress)]
    table = pd.DataFrame(rows)

    methods = {"ssibp": "dimension_mode"}
    methods.update({c[len("selected."):]: c for c in table.columns if c.startswith("selected.")})
    counts = []
    for method, column in methods.items():
        for d, count in table[column].value_counts().sort_index().items():
            counts.append({"method": method, "d": int(d), "count": int(count),
                           "percent": 100.0 * count / replicates})
    heatmap = pd.DataFrame(counts, columns=["method", "d", "count", "percent"])
    if config.verbose:
        modes = table["dimension_mode"].tolist()
        print(f"Experiment: {replicates} replicates of {cfg.family} n={cfg.n}; posterior modes {modes}")
    return ExperimentResult(replicates=table, heatmap=heatmap,
                            provenance={"simulation": asdict(cfg), "sampler": asdict(config),
                                        "hyper": hyper.to_dict(), "fit_family": fit_family,
                                        "versions": settings.versions()})
