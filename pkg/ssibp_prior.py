"""
Truncated non-homogeneous spike-and-slab IBP prior on the eigenvalues lambda_1..lambda_d.

Stick-breaking slab probabilities theta_h = nu_1 * ... * nu_h with nu_1 ~ Beta(a, kappa + 1)
and nu_h ~ Beta(a, 1), indicators Z_h ~ Bernoulli(theta_h), and a Laplace(b) slab written as
the scale mixture lambda_h = Z_h * sigma_h * lambda_tilde_h, sigma_h^2 ~ Exponential(1 / (2 b^2)).

The sampler works on the unconstrained block
    B, beta, lambda_tilde, eta_sigma = log sigma, eta_nu = logit nu, [eta_phi], [eta_power]
and conditions on Z, which it updates separately.
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

import settings  # noqa: F401
import jax.numpy as jnp
import numpy as np
from jax.nn import softplus

from exceptions import ConfigError
from families import POWER_BOUNDS


@dataclass
class HyperParams:
    """Prior settings. Unset fields take the defaults used for the simulation studies."""

    d: int = 8
    a: Optional[float] = None
    kappa: Optional[float] = None
    b_slab: Optional[float] = None
    v0: float = 0.0
    sigma_beta: float = 10.0

    def resolve(self, n: int) -> "HyperParams":
        """Fill defaults that depend on d and the node count n."""
        d = int(self.d)
        a = self.a if self.a is not None else (1.0 / d if d > 0 else 1.0)
        kappa = self.kappa if self.kappa is not None else (d ** 1.1 if d > 0 else 0.0)
        b_slab = self.b_slab if self.b_slab is not None else math.sqrt(n / 2.0)
        resolved = HyperParams(d=d, a=a, kappa=kappa, b_slab=b_slab, v0=self.v0, sigma_beta=self.sigma_beta)
        resolved.validate()
        return resolved

    def validate(self) -> None:
        if self.d < 0:
            raise ConfigError(f"prior.d must be non-negative, got {self.d}")
        if self.a is not None and not self.a > 0:
            raise ConfigError(f"prior.a must be positive, got {self.a}")
        if self.kappa is not None and not self.kappa >= 0:
            raise ConfigError(f"prior.kappa must be non-negative, got {self.kappa}")
        if self.b_slab is not None and not self.b_slab > 0:
            raise ConfigError(f"prior.b_slab must be positive, got {self.b_slab}")
        if self.v0 != 0.0:
            raise ConfigError(f"prior.v0 must be 0 (discrete spike), got {self.v0}")
        if not self.sigma_beta > 0:
            raise ConfigError(f"prior.sigma_beta must be positive, got {self.sigma_beta}")

    @property
    def delta(self) -> float:
        """log(kappa) / log(d) - 1."""
        if self.d < 2 or not self.kappa:
            raise ConfigError("delta needs d >= 2 and kappa > 0")
        return math.log(self.kappa) / math.log(self.d) - 1.0

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class LambdaState:
    """One (or a batch of) prior draws of the eigenvalue block; trailing axis is h."""

    nu: np.ndarray
    theta: np.ndarray
    Z: np.ndarray
    sigma2: np.ndarray
    lambda_tilde: np.ndarray
    lam: np.ndarray = field(init=False)

    def __post_init__(self):
        self.lam = self.Z * np.sqrt(self.sigma2) * self.lambda_tilde


def slab_probabilities(nu):
    return np.cumprod(np.asarray(nu, dtype=float), axis=-1)


def expected_slab_probabilities(hyper: HyperParams) -> np.ndarray:
    h = np.arange(1, hyper.d + 1)
    return (hyper.a / (hyper.a + hyper.kappa + 1.0)) * (hyper.a / (hyper.a + 1.0)) ** (h - 1)


def tail_bound(hyper: HyperParams, t) -> np.ndarray:
    """Upper bound 2 exp(-t (delta / 6) log d) on P(||lambda||_0 > t)."""
    t = np.asarray(t, dtype=float)
    return 2.0 * np.exp(-t * (hyper.delta / 6.0) * math.log(hyper.d))


def sample_prior(hyper: HyperParams, rng: np.random.Generator, size: Optional[int] = None) -> LambdaState:
    """Draw from the prior; `size` adds a leading batch axis."""
    if hyper.a is None or hyper.kappa is None or hyper.b_slab is None:
        raise ConfigError("sample_prior needs resolved hyperparameters (call HyperParams.resolve)")
    shape = (hyper.d,) if size is None else (size, hyper.d)
    nu = rng.beta(hyper.a, 1.0, size=shape)
    first = rng.beta(hyper.a, hyper.kappa + 1.0, size=shape[:-1])
    nu[..., 0] = first
    theta = slab_probabilities(nu)
    Z = (rng.random(shape) < theta).astype(float)
    sigma2 = rng.exponential(2.0 * hyper.b_slab ** 2, size=shape)
    lambda_tilde = rng.standard_normal(shape)
    return LambdaState(nu=nu, theta=theta, Z=Z, sigma2=sigma2, lambda_tilde=lambda_tilde)


# ---------------------------------------------------------------------------
# Log prior on the unconstrained scale (jax)
# ---------------------------------------------------------------------------

def log_theta(eta_nu):
    """log theta_h from logit sticks, computed without leaving log space."""
    return jnp.cumsum(-softplus(-eta_nu))


def scale_log_prior(eta_sigma, b_slab):
    """sigma^2 ~ Exponential(1/(2b^2)) on eta = log sigma, Jacobian included."""
    return jnp.sum(-jnp.exp(2.0 * eta_sigma) / (2.0 * b_slab ** 2) + 2.0 * eta_sigma)


def stick_log_prior(eta_nu, a, kappa):
    """Beta stick densities on eta = logit nu, Jacobian included."""
    log_nu = -softplus(-eta_nu)
    log_one_minus_nu = -softplus(eta_nu)
    beta_terms = kappa * log_one_minus_nu[0] + (a - 1.0) * jnp.sum(log_nu)
    return beta_terms + jnp.sum(log_nu + log_one_minus_nu)


def indicator_log_prior(eta_nu, Z):
    lt = log_theta(eta_nu)
    active = Z > 0.5
    # keep expm1 away from 0 on the branch that is not selected
    log_one_minus = jnp.log(-jnp.expm1(jnp.where(active, -1.0, lt)))
    return jnp.sum(jnp.where(active, lt, log_one_minus))


def dispersion_log_prior(eta_phi):
    """Half-Cauchy(1) on phi = exp(eta_phi), Jacobian included."""
    return math.log(2.0 / math.pi) - softplus(2.0 * eta_phi) + eta_phi


def power_log_prior(eta_power):
    """Uniform power on POWER_BOUNDS through a scaled logistic map, Jacobian included."""
    return -softplus(-eta_power) - softplus(eta_power)


def constrain_phi(eta_phi):
    return jnp.exp(eta_phi)


def constrain_power(eta_power):
    low, high = POWER_BOUNDS
    return low + (high - low) / (1.0 + jnp.exp(-eta_power))


def unconstrain_phi(phi: float) -> float:
    return math.log(phi)


def unconstrain_power(power: float) -> float:
    low, high = POWER_BOUNDS
    u = (power - low) / (high - low)
    return math.log(u / (1.0 - u))


def _shared_log_prior(params, hyper: HyperParams):
    lp = -0.5 * jnp.sum(params["beta"] ** 2) / hyper.sigma_beta ** 2
    if "B" in params:
        lp = lp - 0.5 * jnp.sum(params["B"] ** 2) - 0.5 * jnp.sum(params["lambda_tilde"] ** 2)
    if "eta_phi" in params:
        lp = lp + dispersion_log_prior(params["eta_phi"])
    if "eta_power" in params:
        lp = lp + power_log_prior(params["eta_power"])
    return lp


def log_prior_unconstrained(params, Z, hyper: HyperParams):
    """Log prior density of the unconstrained block given Z, up to an additive constant."""
    lp = _shared_log_prior(params, hyper)
    if hyper.d == 0:
        return lp
    lp = lp + scale_log_prior(params["eta_sigma"], hyper.b_slab)
    lp = lp + stick_log_prior(params["eta_nu"], hyper.a, hyper.kappa)
    return lp + indicator_log_prior(params["eta_nu"], Z)


def gaussian_log_prior(params, hyper: HyperParams):
    """Fixed-dimension baseline: lambda_h = sqrt(n) * lambda_tilde_h, i.e. lambda ~ N(0, n I)."""
    return _shared_log_prior(params, hyper)
