"""Shared helpers for the test scripts: small fixtures and the script-mode runner."""
import sys
import traceback
from typing import Dict, Optional

import numpy as np

from manifold import centered_orthogonalize
from network_io import NetworkData
from sampler import DrawStore, SamplerConfig
from simulate import SimConfig, generate

QUICK = SamplerConfig(warmup=30, draws=20, init_iterations=10, progress=False, verbose=False)


def small_network(family: str = "bernoulli", n: int = 10, d0: int = 1, seed: int = 0, **kwargs) -> NetworkData:
    data, _ = generate(SimConfig(n=n, d0=d0, family=family, seed=seed, **kwargs))
    return data


def random_basis(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    return centered_orthogonalize(rng.standard_normal((n, d)))


def make_draw_store(data: NetworkData, U: np.ndarray, lam: np.ndarray, beta: Optional[np.ndarray] = None,
                    Z: Optional[np.ndarray] = None, family: str = "bernoulli", phi: float = 1.0,
                    power: float = 1.5, log_posterior: Optional[np.ndarray] = None) -> DrawStore:
    """DrawStore built from given arrays; U is S x n x d and lam S x d."""
    U = np.asarray(U, dtype=float)
    lam = np.asarray(lam, dtype=float)
    S, _, d = U.shape
    rows, cols = data.dyad_indices()
    beta = np.zeros((S, data.p)) if beta is None else np.asarray(beta, dtype=float)
    Z = (lam != 0).astype(float) if Z is None else np.asarray(Z, dtype=float)
    return DrawStore(
        beta=beta, lam=lam, Z=Z, U=U, theta=np.full((S, d), 0.5),
        phi=np.full(S, float(phi)), power=np.full(S, float(power)),
        loglik=np.zeros(S), log_posterior=np.arange(S, dtype=float) if log_posterior is None else log_posterior,
        chain=np.zeros(S, dtype=int), dyad_rows=rows, dyad_cols=cols,
        metadata={"model": {"family": family, "phi": None, "power": None}},
    )


def run_all(namespace: Dict[str, object]) -> int:
    """Run every test_* function in a module namespace, printing one status line each."""
    tests = [(name, fn) for name, fn in namespace.items() if name.startswith("test_") and callable(fn)]
    failed = 0
    for name, fn in tests:
        try:
            fn()
            print(f"✅ {name}")
        except Exception as e:
            failed += 1
            print(f"❌ {name}: {e}")
            traceback.print_exc()
    print(f"\n{len(tests) - failed} passed, {failed} failed")
    return 0 if failed == 0 else 1


def main(namespace: Dict[str, object]) -> None:
    sys.exit(run_all(namespace))
