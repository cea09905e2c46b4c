"""
Metropolis-within-Gibbs sampler for generalized linear network eigenmodels.

Each iteration
    1. moves the continuous block (B, beta, lambda_tilde, log sigma, logit nu, [log phi],
       [logit power]) with a NUTS transition targeting p(psi | Z, Y);
    2. sweeps the slab indicators Z_h in a fresh random order, each drawn from its full
       conditional with the others held fixed.

The NUTS kernel is NumPyro's functional `hmc` (dual-averaging step size, windowed diagonal
mass matrix). Its cached potential energy and gradient are refreshed after every Z sweep.
"""
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Tuple

import settings
import jax
import jax.numpy as jnp
import numpy as np
import pandas as pd
from jax import lax
from jax.flatten_util import ravel_pytree
from numpyro.infer.hmc import hmc
from numpyro.infer.hmc_util import euclidean_kinetic_energy, velocity_verlet
from tqdm.auto import tqdm

import ssibp_prior
from exceptions import ConfigError, DataError, InitializationError, NumericalError
from families import Family
from manifold import orthogonalize
from network_io import NetworkData
from ssibp_prior import HyperParams

PRIORS = ("ssibp", "gaussian")
INIT_RADIUS = 2.0
MAX_INIT_DIVERGENCE = 0.9


@dataclass
class SamplerConfig:
    warmup: int = 5000
    draws: int = 5000
    chains: int = 1
    seed: int = 0
    target_accept: float = 0.8
    max_tree_depth: int = 10
    init_iterations: int = 500
    thin: int = 1
    reproducible: bool = False
    progress: bool = True
    keep_dyad_loglik: bool = True
    verbose: bool = True

    def validate(self) -> None:
        if self.warmup < 0 or self.init_iterations < 0:
            raise ConfigError("sampler.warmup and sampler.init_iterations must be non-negative")
        if self.draws < 1 or self.chains < 1 or self.thin < 1:
            raise ConfigError("sampler.draws, sampler.chains and sampler.thin must be positive")
        if not 0.0 < self.target_accept < 1.0:
            raise ConfigError(f"sampler.target_accept must lie in (0, 1), got {self.target_accept}")
        if self.max_tree_depth < 1:
            raise ConfigError(f"sampler.max_tree_depth must be positive, got {self.max_tree_depth}")

    @property
    def kept_per_chain(self) -> int:
        return math.ceil(self.draws / self.thin)


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

class GLNEMModel:
    """
    Log posterior of a GLNEM on the unconstrained scale, conditional on the indicators Z.

    prior="ssibp" uses the spike-and-slab IBP prior; prior="gaussian" is the fixed-dimension
    baseline with lambda ~ N(0, n I) and no indicators.
    """

    def __init__(self, data: NetworkData, family: Family, hyper: HyperParams, prior: str = "ssibp"):
        if prior not in PRIORS:
            raise ConfigError(f"unknown prior '{prior}'; expected one of {', '.join(PRIORS)}")
        hyper = hyper.resolve(data.n)
        if hyper.d > 0 and data.n < hyper.d + 1:
            raise ConfigError(f"truncation d={hyper.d} needs at least d + 1 nodes, got n={data.n}")
        data.check_support(family)
        rows, cols = data.dyad_indices()
        if rows.size == 0:
            raise DataError("no observed dyads")

        self.data = data
        self.family = family
        self.hyper = hyper
        self.prior = prior
        self.n, self.p, self.d = data.n, data.p, hyper.d
        self.dyad_rows = rows
        self.dyad_cols = cols
        self.rows = jnp.asarray(rows)
        self.cols = jnp.asarray(cols)
        self.y = jnp.asarray(data.Y[rows, cols])
        self.y_observed = np.asarray(data.Y[rows, cols], dtype=float)
        self.X = jnp.asarray(data.dyad_covariates())

    @property
    def uses_indicators(self) -> bool:
        return self.prior == "ssibp" and self.d > 0

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes: Dict[str, Tuple[int, ...]] = {"beta": (self.p,)}
        if self.d > 0:
            shapes["B"] = (self.n, self.d)
            shapes["lambda_tilde"] = (self.d,)
            if self.prior == "ssibp":
                shapes["eta_sigma"] = (self.d,)
                shapes["eta_nu"] = (self.d,)
        if self.family.samples_phi:
            shapes["eta_phi"] = ()
        if self.family.samples_power:
            shapes["eta_power"] = ()
        return shapes

    def init_params(self, rng_key, radius: float = INIT_RADIUS) -> Dict[str, jnp.ndarray]:
        """Every unconstrained coordinate uniform on (-radius, radius)."""
        names = sorted(self.shapes())
        keys = jax.random.split(rng_key, len(names))
        return {name: jax.random.uniform(key, self.shapes()[name], minval=-radius, maxval=radius)
                for name, key in zip(names, keys)}

    # -- constrained views --------------------------------------------------

    def aux(self, params):
        phi = ssibp_prior.constrain_phi(params["eta_phi"]) if "eta_phi" in params else self.family.phi
        if "eta_power" in params:
            power = ssibp_prior.constrain_power(params["eta_power"])
        else:
            power = self.family.power if self.family.power is not None else 1.5
        return phi, power

    def latent_basis(self, params):
        if self.d == 0:
            return jnp.zeros((self.n, 0))
        return orthogonalize(params["B"])

    def slab_scales(self, params):
        """Eigenvalue each dimension takes when it is active."""
        if self.d == 0:
            return jnp.zeros(0)
        if self.prior == "gaussian":
            return math.sqrt(self.n) * params["lambda_tilde"]
        return jnp.exp(params["eta_sigma"]) * params["lambda_tilde"]

    def eigenvalues(self, params, Z):
        if self.prior == "gaussian":
            return self.slab_scales(params)
        return Z * self.slab_scales(params)

    def slab_probabilities(self, params):
        if self.prior == "gaussian" or self.d == 0:
            return jnp.ones(self.d)
        return jnp.exp(ssibp_prior.log_theta(params["eta_nu"]))

    # -- densities ----------------------------------------------------------

    def linear_predictor(self, params, Z):
        eta = self.X @ params["beta"]
        if self.d > 0:
            U = self.latent_basis(params)
            eta = eta + (U[self.rows] * U[self.cols]) @ self.eigenvalues(params, Z)
        return eta

    def dyad_log_likelihood(self, params, Z):
        phi, power = self.aux(params)
        mu = self.family.inverse_link(self.linear_predictor(params, Z))
        return self.family.log_density(self.y, mu, phi, power)

    def log_prior(self, params, Z):
        if self.prior == "gaussian":
            return ssibp_prior.gaussian_log_prior(params, self.hyper)
        return ssibp_prior.log_prior_unconstrained(params, Z, self.hyper)

    def log_posterior(self, params, Z):
        return jnp.sum(self.dyad_log_likelihood(params, Z)) + self.log_prior(params, Z)

    def potential_fn_gen(self, Z) -> Callable:
        return lambda params: -self.log_posterior(params, Z)

    def check_series(self, params) -> None:
        """NumericalError if the Tweedie series window truncates the density at these phi and power."""
        if not self.family.has_power:
            return
        phi, power = self.aux(params)
        self.family.check_series(self.y_observed, float(phi), float(power))

    def describe(self) -> Dict[str, Any]:
        return {"prior": self.prior, "hyper": self.hyper.to_dict(), **self.family.describe(),
                "data": self.data.describe()}


@dataclass
class ParamState:
    """Unconstrained parameters plus indicators, with constrained views."""

    model: GLNEMModel
    params: Dict[str, Any]
    Z: Any

    @property
    def U(self) -> np.ndarray:
        return np.asarray(self.model.latent_basis(self.params))

    @property
    def lam(self) -> np.ndarray:
        return np.asarray(self.model.eigenvalues(self.params, self.Z))

    @property
    def beta(self) -> np.ndarray:
        return np.asarray(self.params["beta"])

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.model.slab_probabilities(self.params))

    @property
    def sigma2(self) -> np.ndarray:
        if "eta_sigma" not in self.params:
            return np.full(self.model.d, float(self.model.n))
        return np.exp(2.0 * np.asarray(self.params["eta_sigma"]))

    @property
    def phi(self) -> float:
        return float(self.model.aux(self.params)[0])

    @property
    def power(self) -> float:
        return float(self.model.aux(self.params)[1])


# ---------------------------------------------------------------------------
# Concrete evaluations
# ---------------------------------------------------------------------------

def log_likelihood(model: GLNEMModel, params, Z) -> Tuple[float, np.ndarray]:
    """Total log-likelihood and the per-dyad vector, over observed dyads in row-major order."""
    model.check_series(params)
    per_dyad = np.asarray(model.dyad_log_likelihood(params, jnp.asarray(Z, dtype=float)))
    return float(per_dyad.sum()), per_dyad


def grad_log_posterior(model: GLNEMModel, params, Z) -> Dict[str, np.ndarray]:
    """Gradient of the log posterior over every unconstrained coordinate."""
    Z = jnp.asarray(Z, dtype=float)
    grads = jax.grad(model.log_posterior)({k: jnp.asarray(v, dtype=float) for k, v in params.items()}, Z)
    for name in sorted(grads):
        values = np.asarray(grads[name])
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            index = np.unravel_index(bad[0], values.shape) if values.ndim else ()
            raise NumericalError(f"non-finite gradient at coordinate {name}{list(map(int, index))}")
    return {k: np.asarray(v) for k, v in grads.items()}


# ---------------------------------------------------------------------------
# Indicator updates
# ---------------------------------------------------------------------------

def _indicator_terms(model: GLNEMModel, params, Z):
    phi, power = model.aux(params)
    U = model.latent_basis(params)
    contrib = (U[model.rows] * U[model.cols]) * model.slab_scales(params)
    eta = model.X @ params["beta"] + contrib @ Z
    lt = ssibp_prior.log_theta(params["eta_nu"])
    prior_log_odds = lt - jnp.log(-jnp.expm1(lt))

    def total_loglik(eta):
        return jnp.sum(model.family.log_density(model.y, model.family.inverse_link(eta), phi, power))

    return eta, contrib, prior_log_odds, total_loglik


def _toggle(Z, eta, contrib, h):
    """Linear predictors with Z_h switched off and on, by a rank-one update."""
    eta_off = eta - Z[h] * contrib[:, h]
    return eta_off, eta_off + contrib[:, h]


def inclusion_log_odds(model: GLNEMModel, params, Z) -> np.ndarray:
    """log P(Z_h = 1 | rest) - log P(Z_h = 0 | rest) for every h, others held at Z."""
    Z = jnp.asarray(Z, dtype=float)
    eta, contrib, prior_log_odds, total_loglik = _indicator_terms(model, params, Z)
    out = []
    for h in range(model.d):
        eta_off, eta_on = _toggle(Z, eta, contrib, h)
        out.append(total_loglik(eta_on) - total_loglik(eta_off) + prior_log_odds[h])
    return np.asarray(out)


def gibbs_update_Z(model: GLNEMModel, params, Z, rng_key):
    """One sweep over the indicators in a uniformly random order."""
    if not model.uses_indicators:
        return Z
    eta, contrib, prior_log_odds, total_loglik = _indicator_terms(model, params, Z)
    key_order, key_uniform = jax.random.split(rng_key)
    order = jax.random.permutation(key_order, model.d)
    log_u = jnp.log(jax.random.uniform(key_uniform, (model.d,)))

    def visit(k, carry):
        Z, eta = carry
        h = order[k]
        eta_off, eta_on = _toggle(Z, eta, contrib, h)
        log_odds = total_loglik(eta_on) - total_loglik(eta_off) + prior_log_odds[h]
        on = log_u[k] < jax.nn.log_sigmoid(log_odds)
        return Z.at[h].set(on.astype(Z.dtype)), jnp.where(on, eta_on, eta_off)

    Z, _ = lax.fori_loop(0, model.d, visit, (Z, eta))
    return Z


# ---------------------------------------------------------------------------
# HMC kernel
# ---------------------------------------------------------------------------

class HMCKernel:
    """
    NumPyro's functional HMC/NUTS kernel driven by a potential that depends on Z.

    potential_fn_gen(Z) must return params -> potential energy. Adaptation runs for the
    first num_warmup updates and is frozen afterwards.
    """

    def __init__(self, potential_fn_gen: Callable, num_warmup: int, target_accept: float = 0.8,
                 max_tree_depth: int = 10, algo: str = "NUTS", trajectory_length: Optional[float] = None,
                 step_size: float = 1.0, adapt: bool = True):
        self.potential_fn_gen = potential_fn_gen
        self.num_warmup = num_warmup
        self.target_accept = target_accept
        self.max_tree_depth = max_tree_depth
        self.algo = algo
        self.trajectory_length = trajectory_length
        self.step_size = step_size
        self.adapt = adapt
        self._init_kernel, self._sample_kernel = hmc(potential_fn_gen=potential_fn_gen, algo=algo)
        self._update = None
        self._refresh = None

    def init(self, params, Z, rng_key):
        kwargs = {}
        if self.algo == "HMC":
            kwargs["trajectory_length"] = self.trajectory_length if self.trajectory_length is not None else 2 * math.pi
        state = self._init_kernel(
            params,
            self.num_warmup,
            step_size=self.step_size,
            adapt_step_size=self.adapt,
            adapt_mass_matrix=self.adapt,
            dense_mass=False,
            target_accept_prob=self.target_accept,
            max_tree_depth=self.max_tree_depth,
            model_kwargs={"Z": Z},
            rng_key=rng_key,
            **kwargs,
        )
        sample_kernel = self._sample_kernel
        potential_fn_gen = self.potential_fn_gen
        self._update = jax.jit(lambda s, z_ind: sample_kernel(s, model_kwargs={"Z": z_ind}))

        def refresh(s, z_ind):
            energy, grad = jax.value_and_grad(potential_fn_gen(z_ind))(s.z)
            return s._replace(potential_energy=energy, z_grad=grad)

        self._refresh = jax.jit(refresh)
        return state

    def update(self, state, Z):
        """One transition targeting p(psi | Z, Y); divergent proposals are rejected and flagged."""
        if self._update is None:
            raise RuntimeError("HMCKernel.init must be called before update")
        if self.algo == "HMC" and self.trajectory_length == 0:
            # NumPyro always takes at least one leapfrog step
            return state
        return self._update(state, Z)

    def refresh(self, state, Z):
        """Recompute the cached potential energy and gradient after Z changed."""
        return self._refresh(state, Z)


def trajectory_energy_error(potential_fn: Callable, z, r, step_size: float, num_steps: int) -> float:
    """|H(end) - H(start)| of a leapfrog trajectory with identity mass."""
    vv_init, vv_update = velocity_verlet(potential_fn, euclidean_kinetic_energy)
    state = vv_init(z, r)
    flat, _ = ravel_pytree(z)
    inverse_mass = jnp.ones(flat.shape[0])
    start = state.potential_energy + euclidean_kinetic_energy(inverse_mass, state.r)
    for _ in range(num_steps):
        state = vv_update(step_size, inverse_mass, state)
    end = state.potential_energy + euclidean_kinetic_energy(inverse_mass, state.r)
    return float(jnp.abs(end - start))


# ---------------------------------------------------------------------------
# Draw storage
# ---------------------------------------------------------------------------

@dataclass
class DrawStore:
    """Kept posterior draws, one row per draw, chains stacked in order."""

    beta: np.ndarray
    lam: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    power: np.ndarray
    loglik: np.ndarray
    log_posterior: np.ndarray
    chain: np.ndarray
    dyad_rows: np.ndarray
    dyad_cols: np.ndarray
    loglik_dyads: Optional[np.ndarray] = None
    trace: Optional[pd.DataFrame] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    ARRAYS = ("beta", "lam", "Z", "U", "theta", "phi", "power", "loglik", "log_posterior", "chain",
              "dyad_rows", "dyad_cols")

    def __len__(self) -> int:
        return int(self.loglik.shape[0])

    @property
    def d(self) -> int:
        return int(self.lam.shape[1])

    def subset(self, index) -> "DrawStore":
        index = np.asarray(index)
        per_draw = {k: getattr(self, k)[index] for k in self.ARRAYS if k not in ("dyad_rows", "dyad_cols")}
        return DrawStore(**per_draw, dyad_rows=self.dyad_rows, dyad_cols=self.dyad_cols,
                         loglik_dyads=None if self.loglik_dyads is None else self.loglik_dyads[index],
                         trace=self.trace, metadata=dict(self.metadata))

    def to_frame(self) -> pd.DataFrame:
        """Columnar table: beta.k, lambda.h, Z.h, U.i.h, phi, power, loglik, log_posterior, chain."""
        S, n, d = self.U.shape
        columns: Dict[str, np.ndarray] = {"chain": self.chain}
        for k in range(self.beta.shape[1]):
            columns[f"beta.{k + 1}"] = self.beta[:, k]
        for h in range(d):
            columns[f"lambda.{h + 1}"] = self.lam[:, h]
        for h in range(d):
            columns[f"Z.{h + 1}"] = self.Z[:, h].astype(int)
        for h in range(d):
            columns[f"theta.{h + 1}"] = self.theta[:, h]
        for i in range(n):
            for h in range(d):
                columns[f"U.{i + 1}.{h + 1}"] = self.U[:, i, h]
        columns["phi"] = self.phi
        columns["power"] = self.power
        columns["loglik"] = self.loglik
        columns["log_posterior"] = self.log_posterior
        return pd.DataFrame(columns)

    def save(self, prefix: str) -> Tuple[str, str]:
        """Write `<prefix>.csv` and the complete `<prefix>.npz`; returns both paths."""
        csv_path, npz_path = f"{prefix}.csv", f"{prefix}.npz"
        self.to_frame().to_csv(csv_path, index=False, float_format="%.17g")
        arrays = {k: getattr(self, k) for k in self.ARRAYS}
        if self.loglik_dyads is not None:
            arrays["loglik_dyads"] = self.loglik_dyads
        arrays["metadata"] = np.array(json.dumps(self.metadata, default=str))
        np.savez_compressed(npz_path, **arrays)
        if self.trace is not None:
            self.trace.to_csv(f"{prefix}.trace.csv", index=False)
        return csv_path, npz_path

    @classmethod
    def load(cls, npz_path: str) -> "DrawStore":
        try:
            archive = np.load(npz_path, allow_pickle=False)
        except (OSError, ValueError) as e:
            raise DataError(f"{npz_path}: cannot read draws: {e}") from e
        with archive:
            missing = [k for k in cls.ARRAYS if k not in archive.files]
            if missing:
                raise DataError(f"{npz_path}: missing arrays {missing}")
            kwargs = {k: archive[k] for k in cls.ARRAYS}
            dyads = archive["loglik_dyads"] if "loglik_dyads" in archive.files else None
            metadata = json.loads(str(archive["metadata"])) if "metadata" in archive.files else {}
        trace_path = npz_path[:-len(".npz")] + ".trace.csv" if npz_path.endswith(".npz") else None
        trace = None
        if trace_path:
            try:
                trace = pd.read_csv(trace_path)
            except (OSError, pd.errors.EmptyDataError):
                trace = None
        return cls(**kwargs, loglik_dyads=dyads, trace=trace, metadata=metadata)

    @classmethod
    def concat(cls, stores: List["DrawStore"]) -> "DrawStore":
        if not stores:
            raise DataError("no draw stores to concatenate")
        first = stores[0]
        merged = {k: np.concatenate([getattr(s, k) for s in stores])
                  for k in cls.ARRAYS if k not in ("dyad_rows", "dyad_cols")}
        dyads = None
        if all(s.loglik_dyads is not None for s in stores):
            dyads = np.concatenate([s.loglik_dyads for s in stores])
        traces = [s.trace for s in stores if s.trace is not None]
        return cls(**merged, dyad_rows=first.dyad_rows, dyad_cols=first.dyad_cols, loglik_dyads=dyads,
                   trace=pd.concat(traces, ignore_index=True) if traces else None,
                   metadata=dict(first.metadata))


# ---------------------------------------------------------------------------
# Chains
# ---------------------------------------------------------------------------

def _record_fn(model: GLNEMModel):
    def record(params, Z):
        per_dyad = model.dyad_log_likelihood(params, Z)
        phi, power = model.aux(params)
        return {
            "beta": params["beta"],
            "lam": model.eigenvalues(params, Z),
            "U": model.latent_basis(params),
            "theta": model.slab_probabilities(params),
            "phi": jnp.asarray(phi, dtype=float),
            "power": jnp.asarray(power, dtype=float),
            "loglik_dyads": per_dyad,
            "loglik": jnp.sum(per_dyad),
            "log_posterior": jnp.sum(per_dyad) + model.log_prior(params, Z),
        }

    return jax.jit(record)


def initialize(model: GLNEMModel, config: SamplerConfig, rng_key, label: str = "Sampler") -> ParamState:
    """
    Uniform(-2, 2) start followed by config.init_iterations adapting NUTS transitions
    with every Z_h = 1.
    """
    key_start, key_kernel = jax.random.split(rng_key)
    params = model.init_params(key_start)
    Z = jnp.ones(model.d)
    iterations = config.init_iterations
    if iterations == 0:
        return ParamState(model, params, Z)

    kernel = HMCKernel(model.potential_fn_gen, num_warmup=iterations, target_accept=config.target_accept,
                       max_tree_depth=config.max_tree_depth)
    state = kernel.init(params, Z, key_kernel)
    divergences = 0
    with tqdm(range(iterations), desc=f"{label} init", disable=not config.progress, leave=False) as bar:
        for _ in bar:
            state = kernel.update(state, Z)
            divergences += int(state.diverging)
            model.check_series(state.z)
    if divergences > MAX_INIT_DIVERGENCE * iterations:
        raise InitializationError(
            f"{label}: {divergences} of {iterations} initialization transitions diverged")
    if config.verbose:
        print(f"{label}: initialized after {iterations} transitions "
              f"(step size {float(state.adapt_state.step_size):.4g}, {divergences} divergences)")
    return ParamState(model, state.z, Z)


def run_chain(data: NetworkData, family: Family, hyper: HyperParams, config: SamplerConfig,
              prior: str = "ssibp", chain: int = 0) -> DrawStore:
    """Run one chain with seed config.seed + chain and return its kept draws."""
    config.validate()
    model = GLNEMModel(data, family, hyper, prior=prior)
    label = f"Sampler[chain {chain}]"
    started = time.time()
    key_init, key_kernel, key_gibbs = jax.random.split(jax.random.PRNGKey(config.seed + chain), 3)

    start = initialize(model, config, key_init, label)
    Z = jnp.asarray(start.Z, dtype=float)
    kernel = HMCKernel(model.potential_fn_gen, num_warmup=config.warmup, target_accept=config.target_accept,
                       max_tree_depth=config.max_tree_depth)
    state = kernel.init(start.params, Z, key_kernel)
    gibbs = jax.jit(partial(gibbs_update_Z, model))
    record = _record_fn(model)

    total = config.warmup + config.draws
    kept: List[Dict[str, np.ndarray]] = []
    trace_rows: List[Dict[str, float]] = []
    with tqdm(range(total), desc=f"{label} warmup", disable=not config.progress, position=chain) as bar:
        for it in bar:
            state = kernel.update(state, Z)
            model.check_series(state.z)
            if model.uses_indicators:
                key_gibbs, key_sweep = jax.random.split(key_gibbs)
                Z = gibbs(state.z, Z, key_sweep)
                state = kernel.refresh(state, Z)
            log_post = -float(state.potential_energy)
            trace_rows.append({
                "chain": chain,
                "iteration": it,
                "phase": "warmup" if it < config.warmup else "sampling",
                "log_posterior": log_post,
                "accept_prob": float(state.accept_prob),
                "step_size": float(state.adapt_state.step_size),
                "num_steps": int(state.num_steps),
                "diverging": bool(state.diverging),
                "active_dims": int(jnp.sum(Z)) if model.prior == "ssibp" else model.d,
            })
            if it == config.warmup:
                bar.set_description(f"{label} sample")
            if it % 50 == 0:
                bar.set_postfix_str(f"{int(state.num_steps)} steps of size "
                                    f"{float(state.adapt_state.step_size):.2e}. "
                                    f"acc. prob={float(state.mean_accept_prob):.2f}", refresh=False)
            if it >= config.warmup and (it - config.warmup) % config.thin == 0:
                draw = {k: np.asarray(v) for k, v in record(state.z, Z).items()}
                if not np.isfinite(draw["log_posterior"]):
                    raise NumericalError(f"{label}: non-finite log posterior at iteration {it}")
                draw["Z"] = np.asarray(Z)
                kept.append(draw)

    trace = pd.DataFrame(trace_rows)
    sampling = trace[trace["phase"] == "sampling"]
    if config.verbose:
        print(f"{label}: {len(kept)} draws in {time.time() - started:.1f}s, "
              f"mean accept {sampling['accept_prob'].mean():.3f}, "
              f"{int(sampling['diverging'].sum())} divergences after warmup")

    stack = lambda key: np.stack([draw[key] for draw in kept])  # noqa: E731
    return DrawStore(
        beta=stack("beta").reshape(len(kept), model.p),
        lam=stack("lam").reshape(len(kept), model.d),
        Z=stack("Z").reshape(len(kept), model.d),
        U=stack("U").reshape(len(kept), model.n, model.d),
        theta=stack("theta").reshape(len(kept), model.d),
        phi=stack("phi"),
        power=stack("power"),
        loglik=stack("loglik"),
        log_posterior=stack("log_posterior"),
        chain=np.full(len(kept), chain, dtype=int),
        dyad_rows=model.dyad_rows,
        dyad_cols=model.dyad_cols,
        loglik_dyads=stack("loglik_dyads") if config.keep_dyad_loglik else None,
        trace=trace,
        metadata={
            "model": model.describe(),
            "sampler": asdict(config),
            "versions": settings.versions(),
        },
    )


def run_chains(data: NetworkData, family: Family, hyper: HyperParams, config: SamplerConfig,
               prior: str = "ssibp") -> DrawStore:
    """Run config.chains independent chains, concurrently unless config.reproducible is set."""
    config.validate()
    workers = 1 if config.reproducible else min(config.chains, settings.thread_cap())
    if workers == 1:
        stores = [run_chain(data, family, hyper, config, prior, chain) for chain in range(config.chains)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_chain, data, family, hyper, config, prior, chain)
                       for chain in range(config.chains)]
            stores = [future.result() for future in futures]
    return DrawStore.concat(stores)
