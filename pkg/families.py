"""
Exponential-dispersion families and link functions for network edge variables.

Densities are written in mean parameterisation, mu = g^{-1}(eta), with jax.numpy so the
sampler can differentiate them. Random variates use numpy Generators.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Type, Union

import settings  # noqa: F401  (float64 before jax)
import jax
import jax.numpy as jnp
import numpy as np
from jax.scipy.special import expit, gammaln, logit, logsumexp, ndtr, ndtri, xlogy
from scipy import special

from exceptions import ConfigError, DataError, NumericalError

POWER_BOUNDS = (1.01, 1.99)
ETA_CLAMP = 30.0
MU_CLAMP = 1e-12
SERIES_DROP = 37.0


# ---------------------------------------------------------------------------
# Links
# ---------------------------------------------------------------------------

class Link(ABC):
    """Strictly increasing map between the linear predictor and the mean."""

    name = "link"

    @abstractmethod
    def inverse(self, eta):
        pass

    @abstractmethod
    def link(self, mu):
        pass

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class IdentityLink(Link):
    name = "identity"

    def inverse(self, eta):
        return jnp.asarray(eta)

    def link(self, mu):
        return jnp.asarray(mu)


class LogLink(Link):
    name = "log"

    def inverse(self, eta):
        return jnp.exp(jnp.clip(eta, -ETA_CLAMP, ETA_CLAMP))

    def link(self, mu):
        return jnp.log(mu)


class LogitLink(Link):
    name = "logit"

    def inverse(self, eta):
        return expit(jnp.clip(eta, -ETA_CLAMP, ETA_CLAMP))

    def link(self, mu):
        return logit(mu)


class ProbitLink(Link):
    name = "probit"

    def inverse(self, eta):
        return jnp.clip(ndtr(jnp.clip(eta, -ETA_CLAMP, ETA_CLAMP)), MU_CLAMP, 1.0 - MU_CLAMP)

    def link(self, mu):
        return ndtri(mu)


class CLogLogLink(Link):
    name = "cloglog"

    def inverse(self, eta):
        mu = -jnp.expm1(-jnp.exp(jnp.clip(eta, -ETA_CLAMP, ETA_CLAMP)))
        return jnp.clip(mu, MU_CLAMP, 1.0 - MU_CLAMP)

    def link(self, mu):
        return jnp.log(-jnp.log1p(-mu))


LINKS: Dict[str, Type[Link]] = {
    "identity": IdentityLink,
    "log": LogLink,
    "logit": LogitLink,
    "probit": ProbitLink,
    "cloglog": CLogLogLink,
}


def get_link(name: str) -> Link:
    key = name.strip().lower()
    if key not in LINKS:
        raise ConfigError(f"unknown link '{name}'; expected one of {', '.join(LINKS)}")
    return LINKS[key]()


# ---------------------------------------------------------------------------
# Auxiliary parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuxParams:
    """Dispersion phi (> 0) and Tweedie power in (1.01, 1.99)."""

    phi: float = 1.0
    power: float = 1.5

    def __post_init__(self):
        if not np.isfinite(self.phi) or self.phi <= 0:
            raise ConfigError(f"dispersion phi must be positive, got {self.phi}")
        if not POWER_BOUNDS[0] <= self.power <= POWER_BOUNDS[1]:
            raise ConfigError(f"Tweedie power must lie in {POWER_BOUNDS}, got {self.power}")


# ---------------------------------------------------------------------------
# Tweedie series
# ---------------------------------------------------------------------------

def _tweedie_log_terms(j, y, phi, power):
    """log W_j of the compound Poisson-gamma series; j indexes the latent Poisson count."""
    alpha = (2.0 - power) / (1.0 - power)
    log_z = (-alpha * jnp.log(y) + alpha * jnp.log(power - 1.0)
             - (1.0 - alpha) * jnp.log(phi) - jnp.log(2.0 - power))
    return j * log_z - gammaln(j + 1.0) - gammaln(-j * alpha)


def _tweedie_dominant_index(y, phi, power):
    return jnp.maximum(1.0, jnp.round(y ** (2.0 - power) / (phi * (2.0 - power))))


def tweedie_series_log(y, phi, power, half_width: int = 128):
    """
    Fixed-window series log(sum_j W_j) for y > 0, differentiable in phi and power.

    The window holds 2*half_width+1 indices centred on the dominating term.
    """
    y = jnp.asarray(y)
    centre = jax.lax.stop_gradient(_tweedie_dominant_index(y, phi, power))
    offsets = jnp.arange(-half_width, half_width + 1, dtype=y.dtype)
    j = centre[..., None] + offsets
    valid = j >= 1.0
    j_safe = jnp.where(valid, j, 1.0)
    terms = _tweedie_log_terms(j_safe, y[..., None], phi, power)
    return logsumexp(jnp.where(valid, terms, -jnp.inf), axis=-1)


def _np_tweedie_log_terms(j, y, phi, power):
    alpha = (2.0 - power) / (1.0 - power)
    log_z = (-alpha * np.log(y) + alpha * np.log(power - 1.0)
             - (1.0 - alpha) * np.log(phi) - np.log(2.0 - power))
    return j * log_z - special.gammaln(j + 1.0) - special.gammaln(-j * alpha)


def tweedie_window_margin(y, phi: float, power: float, half_width: int) -> np.ndarray:
    """
    Log-units between the dominating term and the larger end of the fixed window, per y > 0.
    An end that would fall below j = 1 does not count.
    """
    y = np.asarray(y, dtype=float)
    centre = np.maximum(1.0, np.round(y ** (2.0 - power) / (phi * (2.0 - power))))
    peak = _np_tweedie_log_terms(centre, y, phi, power)
    high = _np_tweedie_log_terms(centre + half_width, y, phi, power)
    low_j = centre - half_width
    low = np.where(low_j >= 1.0, _np_tweedie_log_terms(np.maximum(low_j, 1.0), y, phi, power), -np.inf)
    return peak - np.maximum(low, high)


def tweedie_required_half_width(y, phi: float, power: float, start: int = 16) -> int:
    """Smallest power-of-two multiple of `start` whose window keeps every end SERIES_DROP below the peak."""
    width = start
    while np.any(tweedie_window_margin(y, phi, power, width) < SERIES_DROP):
        width *= 2
        if width > 1_000_000:
            raise NumericalError(f"tweedie: no series window under {width} terms (phi={phi}, power={power})")
    return width


def check_tweedie_window(y, phi: float, power: float, half_width: int) -> None:
    y = np.asarray(y, dtype=float).ravel()
    y = y[y > 0]
    if y.size == 0:
        return
    margin = tweedie_window_margin(y, phi, power, half_width)
    short = np.flatnonzero(~(margin >= SERIES_DROP))
    if short.size:
        worst = y[short[np.argmin(margin[short])]] if np.all(np.isfinite(margin[short])) else y[short[0]]
        needed = tweedie_required_half_width(y[short], phi, power)
        raise NumericalError(
            f"tweedie: series window of {half_width} terms each side truncates the density at y={worst:g} "
            f"(phi={phi:.4g}, power={power:.4g}); set family.series_terms >= {needed}")


def tweedie_log_normalizer(y: float, phi: float, power: float, max_terms: int = 1_000_000) -> float:
    """
    log k(y, phi) of the Tweedie density for y > 0, so that
    log f(y) = tweedie_log_normalizer(y) + (y*theta - kappa)/phi.

    Sums the series over the latent Poisson count, starting at the dominating index and
    widening the window until both ends fall SERIES_DROP log-units below the peak.
    """
    if not y > 0:
        raise DataError(f"tweedie: normalizer needs y > 0, got {y}")
    if not 1.0 < power < 2.0:
        raise ConfigError(f"tweedie: power must lie in (1, 2), got {power}")
    if not phi > 0:
        raise ConfigError(f"tweedie: phi must be positive, got {phi}")

    centre = max(1, int(round(y ** (2.0 - power) / (phi * (2.0 - power)))))
    width = 16
    while True:
        j = np.arange(max(1, centre - width), centre + width + 1, dtype=float)
        terms = _np_tweedie_log_terms(j, y, phi, power)
        peak = terms.max()
        if not np.isfinite(peak):
            raise NumericalError(
                f"tweedie: non-finite series term (y={y}, phi={phi}, power={power}, centre={centre})")
        low_done = j[0] == 1 or terms[0] < peak - SERIES_DROP
        high_done = terms[-1] < peak - SERIES_DROP
        if low_done and high_done:
            return float(special.logsumexp(terms) - np.log(y))
        width *= 2
        if 2 * width + 1 > max_terms:
            raise NumericalError(
                f"tweedie: series window did not converge within {max_terms} terms "
                f"(y={y}, phi={phi}, power={power}, centre={centre}, peak={peak:.3f}, "
                f"ends={terms[0]:.3f}/{terms[-1]:.3f})")


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

class Family(ABC):
    """
    A member of the exponential dispersion family with a chosen link.

    phi=None means the dispersion is unknown and sampled; families with
    dispersion_known fix it at 1. power=None on a Tweedie family means it is sampled.
    """

    name = "family"
    default_link = "identity"
    allowed_links: Tuple[str, ...] = ("identity",)
    dispersion_known = False
    has_power = False

    def __init__(self, link: Union[str, Link, None] = None, phi: Optional[float] = None,
                 power: Optional[float] = None, series_terms: int = 128):
        link = link or self.default_link
        self.link = get_link(link) if isinstance(link, str) else link
        if self.link.name not in self.allowed_links:
            raise ConfigError(
                f"{self.name}: link '{self.link.name}' not supported; use one of {', '.join(self.allowed_links)}")
        if phi is not None and not phi > 0:
            raise ConfigError(f"{self.name}: phi must be positive, got {phi}")
        if power is not None and not POWER_BOUNDS[0] <= power <= POWER_BOUNDS[1]:
            raise ConfigError(f"{self.name}: power must lie in {POWER_BOUNDS}, got {power}")
        self.phi = 1.0 if self.dispersion_known else phi
        self.power = power if self.has_power else None
        self.series_terms = int(series_terms)

    @property
    def samples_phi(self) -> bool:
        return self.phi is None

    @property
    def samples_power(self) -> bool:
        return self.has_power and self.power is None

    def inverse_link(self, eta):
        return self.link.inverse(eta)

    @abstractmethod
    def log_density(self, y, mu, phi=1.0, power=1.5):
        """Elementwise log density (or mass) of y at mean mu."""

    @abstractmethod
    def variance(self, mu, phi=1.0, power=1.5):
        pass

    @abstractmethod
    def sample(self, mu, phi, power, rng: np.random.Generator) -> np.ndarray:
        pass

    @abstractmethod
    def unit_deviance(self, y, mu, phi=1.0, power=1.5):
        pass

    def zero_probability(self, mu, phi=1.0, power=1.5):
        raise NotImplementedError(f"{self.name}: no point mass at zero")

    @abstractmethod
    def support_violation(self, y: np.ndarray) -> np.ndarray:
        """Boolean mask of entries outside the support."""

    def check_support(self, y) -> None:
        y = np.asarray(y, dtype=float)
        bad = np.flatnonzero(self.support_violation(y) | ~np.isfinite(y))
        if bad.size:
            idx = np.unravel_index(bad[0], y.shape) if y.ndim else ()
            raise DataError(
                f"{self.name}: value {y.flat[bad[0]]} at index {tuple(int(i) for i in idx)} "
                f"is outside the support ({bad.size} offending entries)")

    def check_series(self, y, phi: float, power: float) -> None:
        """Raise NumericalError when a truncated series would misstate the density at y."""

    def describe(self) -> Dict[str, object]:
        return {"family": self.name, "link": self.link.name, "phi": self.phi,
                "power": self.power, "series_terms": self.series_terms}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(link={self.link.name!r}, phi={self.phi}, power={self.power})"


class Bernoulli(Family):
    name = "bernoulli"
    default_link = "logit"
    allowed_links = ("logit", "probit", "cloglog")
    dispersion_known = True

    def log_density(self, y, mu, phi=1.0, power=1.5):
        return xlogy(y, mu) + xlogy(1.0 - y, 1.0 - mu)

    def variance(self, mu, phi=1.0, power=1.5):
        return mu * (1.0 - mu)

    def sample(self, mu, phi, power, rng):
        return rng.binomial(1, np.clip(np.asarray(mu, dtype=float), 0.0, 1.0)).astype(float)

    def unit_deviance(self, y, mu, phi=1.0, power=1.5):
        return -2.0 * self.log_density(y, mu)

    def zero_probability(self, mu, phi=1.0, power=1.5):
        return 1.0 - mu

    def support_violation(self, y):
        return (y != 0.0) & (y != 1.0)


class Gaussian(Family):
    """Normal edges; phi is the variance."""

    name = "gaussian"
    default_link = "identity"
    allowed_links = ("identity", "log")

    def log_density(self, y, mu, phi=1.0, power=1.5):
        return -0.5 * jnp.log(2.0 * jnp.pi * phi) - 0.5 * (y - mu) ** 2 / phi

    def variance(self, mu, phi=1.0, power=1.5):
        return phi * jnp.ones_like(jnp.asarray(mu, dtype=float))

    def sample(self, mu, phi, power, rng):
        mu = np.asarray(mu, dtype=float)
        return mu + np.sqrt(phi) * rng.standard_normal(mu.shape)

    def unit_deviance(self, y, mu, phi=1.0, power=1.5):
        return (y - mu) ** 2

    def support_violation(self, y):
        return np.zeros(y.shape, dtype=bool)


class Poisson(Family):
    name = "poisson"
    default_link = "log"
    allowed_links = ("log",)
    dispersion_known = True

    def log_density(self, y, mu, phi=1.0, power=1.5):
        return xlogy(y, mu) - mu - gammaln(y + 1.0)

    def variance(self, mu, phi=1.0, power=1.5):
        return mu

    def sample(self, mu, phi, power, rng):
        return rng.poisson(np.asarray(mu, dtype=float)).astype(float)

    def unit_deviance(self, y, mu, phi=1.0, power=1.5):
        return 2.0 * (xlogy(y, y) - xlogy(y, mu) - (y - mu))

    def zero_probability(self, mu, phi=1.0, power=1.5):
        return jnp.exp(-mu)

    def support_violation(self, y):
        return (y < 0) | (y != np.floor(y))


class NegativeBinomial(Family):
    """NB2 counts: Var = mu + phi * mu^2, size r = 1/phi."""

    name = "negbin"
    default_link = "log"
    allowed_links = ("log",)

    def log_density(self, y, mu, phi=1.0, power=1.5):
        r = 1.0 / phi
        return (gammaln(y + r) - gammaln(r) - gammaln(y + 1.0)
                + r * jnp.log(r) + xlogy(y, mu) - (y + r) * jnp.log(r + mu))

    def variance(self, mu, phi=1.0, power=1.5):
        return mu + phi * mu ** 2

    def sample(self, mu, phi, power, rng):
        mu = np.asarray(mu, dtype=float)
        r = 1.0 / phi
        return rng.negative_binomial(r, r / (r + mu)).astype(float)

    def unit_deviance(self, y, mu, phi=1.0, power=1.5):
        r = 1.0 / phi
        return 2.0 * (xlogy(y, y) - xlogy(y, mu) - (y + r) * (jnp.log(y + r) - jnp.log(mu + r)))

    def zero_probability(self, mu, phi=1.0, power=1.5):
        r = 1.0 / phi
        return jnp.exp(r * (jnp.log(r) - jnp.log(r + mu)))

    def support_violation(self, y):
        return (y < 0) | (y != np.floor(y))


class Tweedie(Family):
    """Compound Poisson-gamma edges with power variance phi * mu^power, 1 < power < 2."""

    name = "tweedie"
    default_link = "log"
    allowed_links = ("log",)
    has_power = True

    def log_density(self, y, mu, phi=1.0, power=1.5):
        y = jnp.asarray(y, dtype=float)
        positive = y > 0
        y_safe = jnp.where(positive, y, 1.0)
        theta = mu ** (1.0 - power) / (1.0 - power)
        kappa = mu ** (2.0 - power) / (2.0 - power)
        log_positive = (tweedie_series_log(y_safe, phi, power, self.series_terms)
                        - jnp.log(y_safe) + (y_safe * theta - kappa) / phi)
        return jnp.where(positive, log_positive, -kappa / phi)

    def check_series(self, y, phi: float, power: float) -> None:
        check_tweedie_window(y, phi, power, self.series_terms)

    def variance(self, mu, phi=1.0, power=1.5):
        return phi * mu ** power

    def sample(self, mu, phi, power, rng):
        mu = np.asarray(mu, dtype=float)
        rate = mu ** (2.0 - power) / (phi * (2.0 - power))
        counts = rng.poisson(rate)
        shape = counts * (2.0 - power) / (power - 1.0)
        scale = phi * (power - 1.0) * mu ** (power - 1.0)
        draws = rng.gamma(np.where(counts > 0, shape, 1.0), scale)
        return np.where(counts > 0, draws, 0.0)

    def unit_deviance(self, y, mu, phi=1.0, power=1.5):
        return 2.0 * (jnp.asarray(y, dtype=float) ** (2.0 - power) / ((1.0 - power) * (2.0 - power))
                      - y * mu ** (1.0 - power) / (1.0 - power)
                      + mu ** (2.0 - power) / (2.0 - power))

    def zero_probability(self, mu, phi=1.0, power=1.5):
        return jnp.exp(-mu ** (2.0 - power) / (phi * (2.0 - power)))

    def support_violation(self, y):
        return y < 0


FAMILIES: Dict[str, Type[Family]] = {
    "bernoulli": Bernoulli,
    "gaussian": Gaussian,
    "poisson": Poisson,
    "negbin": NegativeBinomial,
    "tweedie": Tweedie,
}
_ALIASES = {"negativebinomial": "negbin", "negative_binomial": "negbin", "nb": "negbin",
            "binary": "bernoulli", "normal": "gaussian"}


def get_family(name: str, link: Optional[str] = None, phi: Optional[float] = None,
               power: Optional[float] = None, series_terms: int = 128) -> Family:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in FAMILIES:
        raise ConfigError(f"unknown family '{name}'; expected one of {', '.join(FAMILIES)}")
    return FAMILIES[key](link=link, phi=phi, power=power, series_terms=series_terms)


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------

def inverse_link(link: Union[str, Link], eta):
    link = get_link(link) if isinstance(link, str) else link
    return link.inverse(eta)


def log_density(family: Family, y, mu, aux: AuxParams = AuxParams()):
    family.check_support(y)
    family.check_series(y, aux.phi, aux.power)
    return family.log_density(jnp.asarray(y, dtype=float), jnp.asarray(mu, dtype=float),
                              aux.phi, aux.power)


def variance(family: Family, mu, aux: AuxParams = AuxParams()):
    return family.variance(jnp.asarray(mu, dtype=float), aux.phi, aux.power)


def sample(family: Family, mu, aux: AuxParams, rng: np.random.Generator) -> np.ndarray:
    return family.sample(mu, aux.phi, aux.power, rng)
