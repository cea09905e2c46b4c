"""
Centered semi-orthogonal matrices: n x d with orthonormal columns that each sum to zero.

`orthogonalize` is the differentiable map used inside the log posterior; the other
functions work on concrete numpy arrays.
"""
from typing import Sequence, Tuple

import settings  # noqa: F401
import jax.numpy as jnp
import numpy as np

from exceptions import DegenerateInputError

RANK_TOL = 1e-10


def orthogonalize(B):
    """
    Last d columns of Q in the QR decomposition of [1_n, B], with diag(R) made positive.

    Traceable by JAX; no rank check.
    """
    n, d = B.shape
    if d == 0:
        return jnp.zeros((n, 0), dtype=B.dtype)
    A = jnp.concatenate([jnp.ones((n, 1), dtype=B.dtype), B], axis=1)
    Q, R = jnp.linalg.qr(A)
    signs = jnp.sign(jnp.diagonal(R))
    signs = jnp.where(signs == 0, 1.0, signs)
    return (Q * signs)[:, 1:]


def centered_orthogonalize(B) -> np.ndarray:
    """Validated version of `orthogonalize` for concrete inputs."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise DegenerateInputError(f"expected an n x d matrix, got shape {B.shape}")
    n, d = B.shape
    if n < d + 1:
        raise DegenerateInputError(f"need n >= d + 1 for a centered basis, got n={n}, d={d}")
    if d == 0:
        return np.zeros((n, 0))
    A = np.concatenate([np.ones((n, 1)), B], axis=1)
    r_diag = np.abs(np.diag(np.linalg.qr(A, mode="r")))
    if r_diag.min() <= RANK_TOL * max(1.0, r_diag.max()):
        raise DegenerateInputError(
            f"[1_n, B] is rank deficient (smallest |R_kk| = {r_diag.min():.3e} at column {int(r_diag.argmin())})")
    return np.asarray(orthogonalize(jnp.asarray(B)))


def frechet_mean(draws: Sequence[np.ndarray]) -> np.ndarray:
    """Orthogonal polar factor of the element-wise mean of the draws."""
    stack = np.asarray(draws, dtype=float)
    if stack.ndim != 3 or stack.shape[0] == 0:
        raise DegenerateInputError("frechet_mean needs a nonempty sequence of n x d matrices")
    mean = stack.mean(axis=0)
    if mean.shape[1] == 0:
        return mean
    left, singular, right_t = np.linalg.svd(mean, full_matrices=False)
    if singular.min() <= RANK_TOL * max(1.0, singular.max()):
        raise DegenerateInputError(
            f"mean of the draws is rank deficient (singular values {np.round(singular, 12).tolist()})")
    return left @ right_t


def membership_residuals(U) -> Tuple[float, float]:
    """(max |U'U - I|, max |U'1|)."""
    U = np.asarray(U, dtype=float)
    d = U.shape[1]
    orth = np.abs(U.T @ U - np.eye(d)).max() if d else 0.0
    centre = np.abs(U.sum(axis=0)).max() if d else 0.0
    return float(orth), float(centre)


def is_member(U, tol: float = 1e-10) -> bool:
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] < U.shape[1] + 1 or not np.all(np.isfinite(U)):
        return False
    orth, centre = membership_residuals(U)
    return orth <= tol and centre <= tol
