"""
Network data container and the two on-disk formats.

edge-csv
    Optional leading `# key=value` lines (`n`, `diagonal_observed`), then a header
    `i,j,y,x1..xp[,observed]` with 0-based node ids. Each unordered pair appears at most
    once; pairs that are not listed have y = 0 and zero covariates.
dense-csv
    A manifest of `key=value` lines naming one headerless CSV matrix per entry:
    `y=...`, `x1=...`, ..., optional `mask=...` and `diagonal_observed=true|false`.
    Relative paths are resolved against the manifest's directory.
"""
import io
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from exceptions import DataError

FORMATS = ("edge-csv", "dense-csv")
EDGE_RESERVED = ("i", "j", "y", "observed")
SYMMETRY_TOL = 1e-12


def _parse_bool(value: str, where: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise DataError(f"{where}: expected a boolean, got '{value}'")


@dataclass
class NetworkData:
    """Symmetric n x n edge matrix Y and p symmetric covariate matrices X[k]."""

    Y: np.ndarray
    X: np.ndarray
    diagonal_observed: bool = False
    mask: Optional[np.ndarray] = None
    covariate_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        n = self.Y.shape[0]
        X = np.asarray(self.X, dtype=float)
        self.X = X.reshape((0, n, n)) if X.size == 0 else X
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
        if not self.covariate_names:
            self.covariate_names = [f"x{k + 1}" for k in range(self.X.shape[0])]
        self.validate()

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[0]

    def validate(self) -> None:
        n = self.n
        if self.Y.ndim != 2 or self.Y.shape != (n, n):
            raise DataError(f"Y must be square, got shape {self.Y.shape}")
        if self.X.ndim != 3 or self.X.shape[1:] != (n, n):
            raise DataError(f"X must have shape (p, {n}, {n}), got {self.X.shape}")
        if self.mask is not None and self.mask.shape != (n, n):
            raise DataError(f"mask must have shape ({n}, {n}), got {self.mask.shape}")
        _check_symmetric(self.Y, "Y")
        for k in range(self.p):
            _check_symmetric(self.X[k], self.covariate_names[k])
        if self.mask is not None and not np.array_equal(self.mask, self.mask.T):
            raise DataError("mask is not symmetric")

    def observed(self) -> np.ndarray:
        """Boolean n x n mask of dyads that enter the likelihood, upper triangle only."""
        keep = np.triu(np.ones((self.n, self.n), dtype=bool), k=0 if self.diagonal_observed else 1)
        if self.mask is not None:
            keep &= self.mask
        return keep

    def dyad_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """Row and column indices (i <= j) of the observed dyads, in row-major order."""
        return np.nonzero(self.observed())

    def offdiagonal_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        rows, cols = self.dyad_indices()
        off = rows != cols
        return rows[off], cols[off]

    def dyad_values(self) -> np.ndarray:
        rows, cols = self.dyad_indices()
        return self.Y[rows, cols]

    def dyad_covariates(self) -> np.ndarray:
        """(D, p) design matrix over the observed dyads."""
        rows, cols = self.dyad_indices()
        return self.X[:, rows, cols].T

    def with_mask(self, mask: Optional[np.ndarray]) -> "NetworkData":
        return replace(self, mask=None if mask is None else np.asarray(mask, dtype=bool))

    def check_support(self, family) -> None:
        """Raise DataError naming the family and the first observed dyad outside its support."""
        rows, cols = self.dyad_indices()
        values = self.Y[rows, cols]
        bad = np.flatnonzero(family.support_violation(values) | ~np.isfinite(values))
        if bad.size:
            k = bad[0]
            raise DataError(
                f"{family.name}: edge value {values[k]} at dyad ({rows[k]}, {cols[k]}) "
                f"is outside the support ({bad.size} offending dyads)")

    def describe(self) -> Dict[str, object]:
        return {"n": self.n, "p": self.p, "dyads": int(self.observed().sum()),
                "diagonal_observed": self.diagonal_observed,
                "covariates": list(self.covariate_names)}


def _check_symmetric(M: np.ndarray, name: str) -> None:
    gap = np.abs(M - M.T)
    if gap.size and gap.max() > SYMMETRY_TOL * max(1.0, np.abs(M).max()):
        i, j = np.unravel_index(int(gap.argmax()), gap.shape)
        raise DataError(f"{name} is not symmetric: entry ({i}, {j}) = {M[i, j]} but ({j}, {i}) = {M[j, i]} "
                        f"(line {i + 1})")


def with_intercept(data: NetworkData) -> NetworkData:
    """Prepend a constant covariate named 'intercept'."""
    ones = np.ones((1, data.n, data.n))
    return replace(data, X=np.concatenate([ones, data.X], axis=0),
                   covariate_names=["intercept"] + list(data.covariate_names))


# ---------------------------------------------------------------------------
# edge-csv
# ---------------------------------------------------------------------------

def _split_meta(lines: List[str]) -> Tuple[Dict[str, str], int]:
    meta: Dict[str, str] = {}
    k = 0
    while k < len(lines) and (lines[k].startswith("#") or not lines[k].strip()):
        text = lines[k].lstrip("#").strip()
        if "=" in text:
            key, value = text.split("=", 1)
            meta[key.strip().lower()] = value.strip()
        k += 1
    return meta, k


def _load_edge_csv(path: str, n: Optional[int]) -> NetworkData:
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    meta, skip = _split_meta(lines)
    if skip >= len(lines):
        raise DataError(f"{path}: no header line")
    frame = pd.read_csv(io.StringIO("\n".join(lines[skip:])), dtype=str, skipinitialspace=True)
    # reserved columns match in any case; covariate names keep theirs
    frame.columns = [c.strip().lower() if c.strip().lower() in EDGE_RESERVED else c.strip() for c in frame.columns]
    for column in ("i", "j", "y"):
        if column not in frame.columns:
            raise DataError(f"{path}: line {skip + 1}: missing column '{column}'")
    covariates = [c for c in frame.columns if c not in EDGE_RESERVED]
    # data row r sits on file line skip + 2 + r
    line_of = lambda r: skip + 2 + r  # noqa: E731

    numeric = frame[["i", "j", "y"] + covariates].apply(pd.to_numeric, errors="coerce")
    bad_rows = numeric.isna().any(axis=1).to_numpy()
    if bad_rows.any():
        r = int(np.flatnonzero(bad_rows)[0])
        raise DataError(f"{path}: line {line_of(r)}: non-numeric or missing value")
    numeric = frame[["i", "j", "y"] + covariates].astype(float)
    ids = numeric[["i", "j"]].to_numpy()
    if np.any(ids != np.floor(ids)) or np.any(ids < 0):
        r = int(np.flatnonzero((ids != np.floor(ids)).any(axis=1) | (ids < 0).any(axis=1))[0])
        raise DataError(f"{path}: line {line_of(r)}: node ids must be non-negative integers")
    ids = ids.astype(int)

    if n is None:
        n = int(meta["n"]) if "n" in meta else (int(ids.max()) + 1 if len(ids) else 0)
    out_of_range = (ids >= n).any(axis=1)
    if out_of_range.any():
        r = int(np.flatnonzero(out_of_range)[0])
        raise DataError(f"{path}: line {line_of(r)}: node id out of range for n={n}")

    lo, hi = ids.min(axis=1), ids.max(axis=1)
    pairs = lo * n + hi
    _, first_index = np.unique(pairs, return_index=True)
    if len(first_index) != len(pairs):
        seen = np.zeros(len(pairs), dtype=bool)
        seen[first_index] = True
        r = int(np.flatnonzero(~seen)[0])
        raise DataError(f"{path}: line {line_of(r)}: duplicate dyad ({lo[r]}, {hi[r]})")

    # self-loop rows are kept even when the diagonal is unobserved; the likelihood skips them
    has_diagonal = bool(np.any(lo == hi))
    diagonal_observed = _parse_bool(meta["diagonal_observed"], path) if "diagonal_observed" in meta else has_diagonal

    Y = np.zeros((n, n))
    X = np.zeros((len(covariates), n, n))
    values = numeric["y"].to_numpy()
    Y[lo, hi] = values
    Y[hi, lo] = values
    for k, column in enumerate(covariates):
        xs = numeric[column].to_numpy()
        X[k, lo, hi] = xs
        X[k, hi, lo] = xs

    mask = None
    if "observed" in frame.columns:
        mask = np.ones((n, n), dtype=bool)
        flags = np.array([_parse_bool(v, f"{path}: line {line_of(r)}") for r, v in enumerate(frame["observed"])])
        mask[lo, hi] = flags
        mask[hi, lo] = flags
    return NetworkData(Y=Y, X=X, diagonal_observed=diagonal_observed, mask=mask, covariate_names=covariates)


def _save_edge_csv(data: NetworkData, path: str) -> None:
    rows, cols = np.triu_indices(data.n)
    frame = pd.DataFrame({"i": rows, "j": cols, "y": data.Y[rows, cols]})
    for k, name in enumerate(data.covariate_names):
        frame[name] = data.X[k, rows, cols]
    if data.mask is not None:
        frame["observed"] = np.where(data.mask[rows, cols], "true", "false")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"# n={data.n}\n# diagonal_observed={str(data.diagonal_observed).lower()}\n")
        frame.to_csv(handle, index=False, float_format="%.17g")


# ---------------------------------------------------------------------------
# dense-csv
# ---------------------------------------------------------------------------

def _read_matrix(path: str) -> np.ndarray:
    try:
        frame = pd.read_csv(path, header=None, dtype=float, float_precision="round_trip")
    except (OSError, ValueError) as e:
        raise DataError(f"{path}: cannot read matrix: {e}") from e
    matrix = frame.to_numpy()
    if np.isnan(matrix).any():
        r = int(np.flatnonzero(np.isnan(matrix).any(axis=1))[0])
        raise DataError(f"{path}: line {r + 1}: missing value")
    return matrix


def _load_dense_csv(manifest_path: str) -> NetworkData:
    base = os.path.dirname(os.path.abspath(manifest_path))
    entries: Dict[str, str] = {}
    with open(manifest_path, "r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{manifest_path}: line {number}: expected key=value")
            key, value = line.split("=", 1)
            entries[key.strip().lower()] = value.strip()
    if "y" not in entries:
        raise DataError(f"{manifest_path}: manifest has no 'y' entry")

    resolve = lambda p: p if os.path.isabs(p) else os.path.join(base, p)  # noqa: E731
    Y = _read_matrix(resolve(entries["y"]))
    covariates = sorted((k for k in entries if k.startswith("x") and k[1:].isdigit()), key=lambda k: int(k[1:]))
    X = np.stack([_read_matrix(resolve(entries[k])) for k in covariates]) if covariates else np.zeros((0,) + Y.shape)
    mask = _read_matrix(resolve(entries["mask"])).astype(bool) if "mask" in entries else None
    diagonal_observed = _parse_bool(entries.get("diagonal_observed", "false"), manifest_path)
    names = [entries.get(f"name.{k}", k) for k in covariates]
    return NetworkData(Y=Y, X=X, diagonal_observed=diagonal_observed, mask=mask, covariate_names=names)


def _save_dense_csv(data: NetworkData, manifest_path: str) -> None:
    base = os.path.dirname(os.path.abspath(manifest_path))
    stem = os.path.splitext(os.path.basename(manifest_path))[0]
    lines = [f"diagonal_observed={str(data.diagonal_observed).lower()}"]

    def write(matrix: np.ndarray, key: str, fmt: str = "%.17g") -> None:
        name = f"{stem}.{key}.csv"
        np.savetxt(os.path.join(base, name), matrix, delimiter=",", fmt=fmt)
        lines.append(f"{key}={name}")

    write(data.Y, "y")
    for k in range(data.p):
        write(data.X[k], f"x{k + 1}")
        lines.append(f"name.x{k + 1}={data.covariate_names[k]}")
    if data.mask is not None:
        write(data.mask.astype(int), "mask", fmt="%d")
    with open(manifest_path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------

def load_network(path: str, fmt: str = "edge-csv", n: Optional[int] = None,
                 add_intercept: bool = False) -> NetworkData:
    if fmt not in FORMATS:
        raise DataError(f"unknown network format '{fmt}'; expected one of {', '.join(FORMATS)}")
    if not os.path.exists(path):
        raise DataError(f"{path}: no such file")
    data = _load_edge_csv(path, n) if fmt == "edge-csv" else _load_dense_csv(path)
    return with_intercept(data) if add_intercept else data


def save_network(data: NetworkData, path: str, fmt: str = "edge-csv") -> None:
    if fmt not in FORMATS:
        raise DataError(f"unknown network format '{fmt}'; expected one of {', '.join(FORMATS)}")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if fmt == "edge-csv":
        _save_edge_csv(data, path)
    else:
        _save_dense_csv(data, path)
