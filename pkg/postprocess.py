"""
Postprocessing of posterior draws.

The likelihood is invariant to relabelling and sign flips of the columns of U, so every draw
is aligned to the highest-posterior draw before anything is averaged across draws.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

from exceptions import DataError, DegenerateInputError
from manifold import frechet_mean
from sampler import DrawStore

INTERVAL = (0.025, 0.975)


@dataclass
class AlignedDraws:
    """Draws with U, lambda, Z and theta columns signed-permuted onto a reference."""

    draws: DrawStore
    reference: np.ndarray
    reference_index: int
    permutations: np.ndarray
    signs: np.ndarray


def align_draw(U_s: np.ndarray, lam_s: np.ndarray, U_ref: np.ndarray
               ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Signed permutation of the columns of U_s closest to U_ref.

    Returns (U', lambda', perm, signs) where column h of U' is signs[h] * U_s[:, perm[h]]
    and lambda'[h] = lam_s[perm[h]].
    """
    U_s = np.asarray(U_s, dtype=float)
    lam_s = np.asarray(lam_s, dtype=float)
    d = U_s.shape[1]
    if d == 0:
        return U_s, lam_s, np.zeros(0, dtype=int), np.zeros(0)
    cost = np.abs(U_ref.T @ U_s)
    _, perm = linear_sum_assignment(cost, maximize=True)
    permuted = U_s[:, perm]
    signs = np.sign(np.einsum("ih,ih->h", U_ref, permuted))
    signs[signs == 0] = 1.0
    return permuted * signs, lam_s[perm], perm, signs


def map_reference(draws: DrawStore) -> Tuple[np.ndarray, int]:
    """U of the draw with the highest log posterior (first one on ties)."""
    if len(draws) == 0:
        raise DataError("no draws to summarize")
    index = int(np.argmax(draws.log_posterior))
    return draws.U[index], index


def align_draws(draws: DrawStore, reference: Optional[np.ndarray] = None) -> AlignedDraws:
    if reference is None:
        reference, index = map_reference(draws)
    else:
        index = -1
    S, d = draws.lam.shape
    U = np.empty_like(draws.U)
    lam = np.empty_like(draws.lam)
    perms = np.empty((S, d), dtype=int)
    signs = np.empty((S, d))
    for s in range(S):
        U[s], lam[s], perms[s], signs[s] = align_draw(draws.U[s], draws.lam[s], reference)
    rows = np.arange(S)[:, None]
    aligned = replace(draws, U=U, lam=lam, Z=draws.Z[rows, perms], theta=draws.theta[rows, perms])
    return AlignedDraws(draws=aligned, reference=np.asarray(reference), reference_index=index,
                        permutations=perms, signs=signs)


def inclusion_probabilities(draws: DrawStore) -> np.ndarray:
    if len(draws) == 0:
        raise DataError("no draws to summarize")
    return draws.Z.mean(axis=0)


def dimension_posterior(draws: DrawStore) -> Tuple[np.ndarray, int]:
    """Empirical pmf of the number of active dimensions over 0..d, and its mode (smaller k on ties)."""
    if len(draws) == 0:
        raise DataError("no draws to summarize")
    counts = np.bincount(draws.Z.sum(axis=1).round().astype(int), minlength=draws.d + 1)
    pmf = counts / counts.sum()
    return pmf, int(np.argmax(pmf))


def latent_product_mean(draws: DrawStore) -> np.ndarray:
    """Posterior mean of U diag(lambda) U^T, which needs no alignment."""
    return np.einsum("sih,sh,sjh->ij", draws.U, draws.lam, draws.U) / len(draws)


def _interval_rows(name: str, samples: np.ndarray) -> Dict[str, Any]:
    low, high = np.quantile(samples, INTERVAL)
    return {"parameter": name, "mean": float(samples.mean()), "median": float(np.median(samples)),
            "sd": float(samples.std(ddof=1)) if samples.size > 1 else 0.0,
            "lower": float(low), "upper": float(high)}


@dataclass
class PosteriorSummary:
    table: pd.DataFrame
    U_hat: np.ndarray
    inclusion: np.ndarray
    dimension_pmf: np.ndarray
    dimension_mode: int
    reference_index: int
    provenance: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "parameters": self.table.to_dict(orient="records"),
            "inclusion_probabilities": self.inclusion.tolist(),
            "dimension_pmf": self.dimension_pmf.tolist(),
            "dimension_mode": self.dimension_mode,
            "reference_index": self.reference_index,
            "provenance": self.provenance,
        }


def summarize(aligned: AlignedDraws) -> PosteriorSummary:
    """Posterior means, medians and equal-tailed 95% intervals, plus the Frechet mean of U."""
    draws = aligned.draws
    rows: List[Dict[str, Any]] = []
    for k in range(draws.beta.shape[1]):
        rows.append(_interval_rows(f"beta.{k + 1}", draws.beta[:, k]))
    for h in range(draws.d):
        rows.append(_interval_rows(f"lambda.{h + 1}", draws.lam[:, h]))
    model = draws.metadata.get("model", {})
    if model.get("phi") is None and model.get("family") not in ("bernoulli", "poisson"):
        rows.append(_interval_rows("phi", draws.phi))
    if model.get("family") == "tweedie" and model.get("power") is None:
        rows.append(_interval_rows("power", draws.power))

    inclusion = inclusion_probabilities(draws)
    pmf, mode = dimension_posterior(draws)
    U_hat = _frechet_or_active(draws.U, inclusion)
    return PosteriorSummary(table=pd.DataFrame(rows), U_hat=U_hat, inclusion=inclusion,
                            dimension_pmf=pmf, dimension_mode=mode,
                            reference_index=aligned.reference_index, provenance=dict(draws.metadata))


def _frechet_or_active(U: np.ndarray, inclusion: np.ndarray) -> np.ndarray:
    try:
        return frechet_mean(U)
    except DegenerateInputError:
        active = np.flatnonzero(inclusion >= 0.5)
        print(f"Postprocess: mean of U is rank deficient; Frechet mean over {active.size} active columns only")
        U_hat = np.full(U.shape[1:], np.nan)
        if active.size:
            U_hat[:, active] = frechet_mean(U[:, :, active])
        return U_hat


def latent_summary(summary: PosteriorSummary, aligned: AlignedDraws) -> pd.DataFrame:
    """
    Two coordinates per node: sqrt(|lambda_h|)-weighted averages of the active columns of the
    Frechet mean, one over dimensions with positive (assortative) and one over dimensions with
    negative (disassortative) posterior-mean lambda_h.
    """
    lam_hat = aligned.draws.lam.mean(axis=0)
    active = summary.inclusion >= 0.5
    out = {"node": np.arange(summary.U_hat.shape[0])}
    for label, chosen in (("assortative", active & (lam_hat > 0)), ("disassortative", active & (lam_hat < 0))):
        idx = np.flatnonzero(chosen)
        if idx.size:
            out[label] = summary.U_hat[:, idx] @ np.sqrt(np.abs(lam_hat[idx])) / np.sqrt(idx.size)
        else:
            out[label] = np.zeros(summary.U_hat.shape[0])
    return pd.DataFrame(out)
