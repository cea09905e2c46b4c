"""
Posterior-predictive goodness of fit: transitivity and degree distributions of networks
simulated from posterior draws, plus in-sample fit diagnostics.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Union

import networkx as nx
import numpy as np
import pandas as pd
from scipy import stats
from sklearn.metrics import roc_auc_score

import settings
from exceptions import ConfigError, DataError
from families import Family
from network_io import NetworkData
from sampler import DrawStore

QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)


def _graph(Y: np.ndarray, binary: bool) -> nx.Graph:
    A = np.array(Y, dtype=float)
    np.fill_diagonal(A, 0.0)
    if binary:
        A = (A > 0).astype(float)
    return nx.from_numpy_array(A)


def transitivity(Y: np.ndarray) -> float:
    """3 x triangles / connected triples of the graph with an edge wherever y_ij > 0."""
    return float(nx.transitivity(_graph(Y, binary=True)))


def node_degrees(Y: np.ndarray, weighted: bool = True) -> np.ndarray:
    """Weighted degree sum_j y_ij, or the binary degree after thresholding at zero."""
    G = _graph(Y, binary=not weighted)
    return np.array([deg for _, deg in sorted(G.degree(weight="weight"))], dtype=float)


def degree_distribution(Y: np.ndarray, weighted: bool = False) -> pd.Series:
    """Number of nodes at each (weighted) degree value, indexed by degree."""
    degrees = node_degrees(Y, weighted=weighted)
    return pd.Series(degrees).value_counts().sort_index().rename("count").rename_axis("degree")


def mean_edge(Y: np.ndarray) -> float:
    upper = np.triu_indices(Y.shape[0], k=1)
    return float(np.mean(Y[upper]))


STATISTICS: Dict[str, Callable] = {
    "transitivity": transitivity,
    "degree": degree_distribution,
    "mean_edge": mean_edge,
}


@dataclass
class GofReport:
    statistic: str
    observed: Union[float, pd.Series]
    samples: pd.DataFrame
    quantiles: pd.DataFrame
    draw_indices: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def num_replicates(self) -> int:
        return int(self.draw_indices.size)

    def to_frame(self) -> pd.DataFrame:
        """Observed rows first (draw = -1), then one row per predictive replicate (and degree)."""
        if isinstance(self.observed, pd.Series):
            observed = self.observed.reset_index().assign(draw=-1, source="observed")
        else:
            observed = pd.DataFrame({"draw": [-1], "value": [self.observed], "source": ["observed"]})
        return pd.concat([observed, self.samples.assign(source="predictive")], ignore_index=True)


def simulate_network(draws: DrawStore, index: int, data: NetworkData, family: Family,
                     rng: np.random.Generator) -> np.ndarray:
    """One network from the fitted family at draw `index`; the diagonal is simulated only when observed."""
    U, lam = draws.U[index], draws.lam[index]
    eta = np.tensordot(draws.beta[index], data.X, axes=1) + (U * lam) @ U.T
    mu = np.asarray(family.inverse_link(eta))
    sampled = family.sample(mu, float(draws.phi[index]), float(draws.power[index]), rng)
    Y = np.triu(sampled) + np.triu(sampled, 1).T
    if not data.diagonal_observed:
        np.fill_diagonal(Y, 0.0)
    return Y


def posterior_predictive(draws: DrawStore, data: NetworkData, family: Family, statistic: str = "transitivity",
                         subsample: int = 200, rng: Optional[np.random.Generator] = None,
                         binary_degree: bool = False) -> GofReport:
    """Statistic of networks simulated at `subsample` randomly chosen draws, against its observed value."""
    if statistic not in STATISTICS:
        raise ConfigError(f"unknown statistic '{statistic}'; expected one of {', '.join(STATISTICS)}")
    if len(draws) == 0:
        raise DataError("no draws to summarize")
    if subsample < 1:
        raise ConfigError(f"gof.subsample must be positive, got {subsample}")
    rng = rng if rng is not None else np.random.default_rng(0)
    chosen = np.sort(rng.choice(len(draws), size=min(subsample, len(draws)), replace=False))
    seeds = rng.integers(0, 2 ** 63 - 1, size=chosen.size)

    if statistic == "degree":
        weighted = not binary_degree and family.name != "bernoulli"
        compute = lambda Y: degree_distribution(Y, weighted=weighted)  # noqa: E731
    else:
        compute = STATISTICS[statistic]

    def replicate(k: int):
        Y_rep = simulate_network(draws, int(chosen[k]), data, family, np.random.default_rng(seeds[k]))
        return compute(Y_rep)

    with ThreadPoolExecutor(max_workers=settings.thread_cap()) as pool:
        values = list(pool.map(replicate, range(chosen.size)))
    observed = compute(data.Y)

    if statistic == "degree":
        samples = pd.concat([v.reset_index().assign(draw=int(d)) for v, d in zip(values, chosen)], ignore_index=True)
        wide = samples.pivot_table(index="draw", columns="degree", values="count", fill_value=0)
        quantiles = wide.quantile(list(QUANTILES)).T.rename_axis("degree").reset_index()
    else:
        samples = pd.DataFrame({"draw": chosen, "value": np.asarray(values, dtype=float)})
        q = np.quantile(samples["value"], QUANTILES)
        quantiles = pd.DataFrame({"quantile": QUANTILES, "value": q})
        quantiles.attrs["p_value"] = float(np.mean(samples["value"] >= observed))
    return GofReport(statistic=statistic, observed=observed, samples=samples, quantiles=quantiles,
                     draw_indices=chosen, provenance={"family": family.describe(), "subsample": int(subsample),
                                                      "binary_degree": binary_degree})


# ---------------------------------------------------------------------------
# In-sample fit diagnostics
# ---------------------------------------------------------------------------

def fitted_means(draws: DrawStore, data: NetworkData, family: Family, chunk: int = 256):
    """Posterior means of mu and of P(Y = 0) over the observed dyads."""
    rows, cols = draws.dyad_rows, draws.dyad_cols
    covariates = data.X[:, rows, cols].T
    mu_sum = np.zeros(rows.size)
    zero_sum = np.zeros(rows.size)
    has_zero_mass = family.name != "gaussian"
    for start in range(0, len(draws), chunk):
        block = slice(start, start + chunk)
        eta = draws.beta[block] @ covariates.T + np.einsum(
            "sdh,sh,sdh->sd", draws.U[block][:, rows, :], draws.lam[block], draws.U[block][:, cols, :])
        mu = np.asarray(family.inverse_link(eta))
        mu_sum += mu.sum(axis=0)
        if has_zero_mass:
            zero = family.zero_probability(mu, draws.phi[block][:, None], draws.power[block][:, None])
            zero_sum += np.asarray(zero).sum(axis=0)
    S = len(draws)
    return mu_sum / S, (zero_sum / S if has_zero_mass else None)


def fit_diagnostics(draws: DrawStore, data: NetworkData, family: Family) -> Dict[str, float]:
    """
    Fraction of deviance explained against the constant-mean model, ROC AUC of the fitted
    P(Y = 0) for picking out zero-valued edges, and R^2 over the non-zero edges.
    """
    y = data.Y[draws.dyad_rows, draws.dyad_cols]
    mu_hat, zero_hat = fitted_means(draws, data, family)
    phi_hat, power_hat = float(draws.phi.mean()), float(draws.power.mean())
    deviance = float(np.sum(family.unit_deviance(y, mu_hat, phi_hat, power_hat)))
    null = float(np.sum(family.unit_deviance(y, np.full_like(y, y.mean()), phi_hat, power_hat)))
    out = {"deviance": deviance, "null_deviance": null,
           "deviance_explained": 1.0 - deviance / null if null > 0 else float("nan")}

    is_zero = y == 0
    if zero_hat is not None and 0 < is_zero.sum() < y.size:
        out["zero_auc"] = float(roc_auc_score(is_zero, zero_hat))
    else:
        out["zero_auc"] = float("nan")

    nonzero = ~is_zero
    if nonzero.sum() > 1:
        residual = np.sum((y[nonzero] - mu_hat[nonzero]) ** 2)
        total = np.sum((y[nonzero] - y[nonzero].mean()) ** 2)
        out["nonzero_r2"] = float(1.0 - residual / total) if total > 0 else float("nan")
    else:
        out["nonzero_r2"] = float("nan")
    return out


def degree_latent_correlation(Y: np.ndarray, positions: np.ndarray) -> float:
    """Pearson correlation between weighted degree and a one-dimensional latent coordinate."""
    return float(stats.pearsonr(node_degrees(Y, weighted=True), np.asarray(positions, dtype=float))[0])
