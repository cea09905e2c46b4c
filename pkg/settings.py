"""
Runtime settings shared by every module.

Importing this module (it must come before anything that imports jax) switches JAX to
float64 and applies the GLNEM_THREADS cap to XLA's CPU thread pool.
"""
import os
import platform
from typing import Dict

VERSION = "1.0.0"

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NUMERIC_ERROR = 4


def thread_cap() -> int:
    """Worker threads allowed for chains, folds and replicates (GLNEM_THREADS, default: cpu count)."""
    value = os.getenv("GLNEM_THREADS", "").strip()
    if not value:
        return max(1, os.cpu_count() or 1)
    try:
        return max(1, int(value))
    except ValueError:
        print(f"Settings: ignoring non-integer GLNEM_THREADS='{value}'")
        return max(1, os.cpu_count() or 1)


# one thread means one intra-op thread as well, so reductions run in a fixed order
if thread_cap() == 1 and "XLA_FLAGS" not in os.environ:
    os.environ["XLA_FLAGS"] = "--xla_cpu_multi_thread_eigen=false intra_op_parallelism_threads=1"

import numpyro  # noqa: E402

numpyro.enable_x64()


def versions() -> Dict[str, str]:
    """Package versions recorded in every summary file."""
    import jax
    import numpy
    import scipy

    return {
        "glnem": VERSION,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "jax": jax.__version__,
        "numpyro": numpyro.__version__,
    }
