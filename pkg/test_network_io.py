#!/usr/bin/env python3
"""
Tests for network files: edge-csv, dense-csv manifests and NetworkData
"""
import os
import tempfile

import numpy as np

from exceptions import DataError
from families import get_family
from network_io import NetworkData, load_network, save_network, with_intercept


def _write(directory: str, name: str, text: str) -> str:
    path = os.path.join(directory, name)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
    return path


def _load_error(text: str, **kwargs) -> str:
    with tempfile.TemporaryDirectory() as tmp:
        try:
            load_network(_write(tmp, "net.csv", text), **kwargs)
        except DataError as e:
            return str(e)
    raise AssertionError("file was accepted")


def _random_network(n: int = 6, p: int = 2, seed: int = 0, **kwargs) -> NetworkData:
    rng = np.random.default_rng(seed)
    sym = lambda M: np.triu(M) + np.triu(M, 1).T  # noqa: E731
    Y = sym(rng.standard_normal((n, n)))
    X = np.stack([sym(rng.uniform(-1, 1, (n, n))) for _ in range(p)]) if p else np.zeros((0, n, n))
    return NetworkData(Y=Y, X=X, **kwargs)


def test_triangle_edge_list():
    with tempfile.TemporaryDirectory() as tmp:
        data = load_network(_write(tmp, "k3.csv", "i,j,y\n0,1,1\n1,2,1\n0,2,1\n"))
    assert np.array_equal(data.Y, np.ones((3, 3)) - np.eye(3))
    assert data.p == 0 and not data.diagonal_observed
    assert data.observed().sum() == 3


def test_duplicate_dyad_reports_line():
    message = _load_error("i,j,y\n0,1,1\n1,2,0\n1,0,1\n")
    assert "line 4" in message and "duplicate" in message


def test_bad_rows_report_lines():
    assert "line 4" in _load_error("# n=2\ni,j,y\n0,1,1\n0,2,1\n")
    assert "line 3" in _load_error("i,j,y\n0,1,1\n0,abc,1\n")
    assert "line 2" in _load_error("i,j,y\n-1,1,1\n")
    assert "missing column" in _load_error("i,y\n0,1\n")


def test_explicit_node_count_and_unlisted_pairs():
    with tempfile.TemporaryDirectory() as tmp:
        data = load_network(_write(tmp, "net.csv", "# n=5\ni,j,y,dist\n0,4,2.5,0.3\n"))
    assert data.n == 5 and data.p == 1
    assert data.Y[4, 0] == 2.5 and data.X[0, 0, 4] == 0.3
    assert data.Y.sum() == 5.0
    assert data.covariate_names == ["dist"]


def test_self_loops_mark_diagonal_observed():
    with tempfile.TemporaryDirectory() as tmp:
        data = load_network(_write(tmp, "net.csv", "i,j,y\n0,0,2\n0,1,1\n1,1,0\n"))
        assert data.diagonal_observed and data.Y[0, 0] == 2
        hidden = load_network(_write(tmp, "h.csv", "# diagonal_observed=false\ni,j,y\n0,0,2\n0,1,1\n"))
    assert not hidden.diagonal_observed and hidden.Y[0, 0] == 2
    rows, cols = hidden.dyad_indices()
    assert list(zip(rows, cols)) == [(0, 1)]


def test_edge_csv_roundtrip():
    mask = np.ones((6, 6), dtype=bool)
    mask[1, 4] = mask[4, 1] = False
    data = _random_network(diagonal_observed=True, mask=mask, covariate_names=["dist", "same_group"])
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "net.csv")
        save_network(data, path)
        loaded = load_network(path)
    assert np.array_equal(loaded.Y, data.Y) and np.array_equal(loaded.X, data.X)
    assert np.array_equal(loaded.mask, data.mask)
    assert loaded.diagonal_observed and loaded.covariate_names == data.covariate_names


def test_edge_csv_keeps_covariate_case():
    data = _random_network(covariate_names=["Dist", "sameGroup"])
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "net.csv")
        save_network(data, path)
        loaded = load_network(path)
        upper = load_network(_write(tmp, "upper.csv", "I,J,Y,Observed,DistKm\n0,1,1,true,2.0\n1,2,0,false,0.5\n"))
    assert loaded.covariate_names == ["Dist", "sameGroup"]
    assert np.array_equal(loaded.X, data.X)
    assert upper.covariate_names == ["DistKm"] and upper.X[0, 1, 0] == 2.0
    assert not upper.mask[1, 2] and upper.mask[0, 1]


def test_dense_manifest_roundtrip():
    data = _random_network(n=7, p=2, seed=1)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "net.manifest")
        save_network(data, path, "dense-csv")
        loaded = load_network(path, "dense-csv")
        assert sorted(os.listdir(tmp)) == ["net.manifest", "net.x1.csv", "net.x2.csv", "net.y.csv"]
    assert loaded.X.shape == (2, 7, 7)
    assert np.array_equal(loaded.Y, data.Y) and np.array_equal(loaded.X, data.X)
    assert not loaded.diagonal_observed


def test_dense_asymmetry_rejected():
    with tempfile.TemporaryDirectory() as tmp:
        _write(tmp, "y.csv", "0,1,0\n1,0,1\n0,2,0\n")
        manifest = _write(tmp, "net.manifest", "y=y.csv\n")
        try:
            load_network(manifest, "dense-csv")
        except DataError as e:
            assert "not symmetric" in str(e)
            return
    raise AssertionError("asymmetric matrix accepted")


def test_unknown_format_and_missing_file():
    for args in (("missing.csv",), ("missing.csv", "gml")):
        try:
            load_network(*args)
        except DataError:
            continue
        raise AssertionError(f"load_network{args} did not fail")


def test_dyad_indices_skip_masked_and_diagonal():
    mask = np.ones((4, 4), dtype=bool)
    mask[0, 2] = mask[2, 0] = False
    data = _random_network(n=4, p=1, mask=mask)
    rows, cols = data.dyad_indices()
    assert list(zip(rows.tolist(), cols.tolist())) == [(0, 1), (0, 3), (1, 2), (1, 3), (2, 3)]
    assert data.dyad_covariates().shape == (5, 1)
    assert np.array_equal(data.dyad_values(), data.Y[rows, cols])


def test_support_check_names_family_and_dyad():
    Y = np.zeros((3, 3))
    Y[0, 2] = Y[2, 0] = 1.5
    data = NetworkData(Y=Y, X=np.zeros((0, 3, 3)))
    try:
        data.check_support(get_family("poisson"))
    except DataError as e:
        assert "poisson" in str(e) and "(0, 2)" in str(e)
        return
    raise AssertionError("non-integer count accepted")


def test_with_intercept():
    data = with_intercept(_random_network(n=5, p=1, covariate_names=["dist"]))
    assert data.p == 2 and data.covariate_names == ["intercept", "dist"]
    assert np.all(data.X[0] == 1.0)


def test_asymmetric_matrix_rejected():
    try:
        NetworkData(Y=np.array([[0.0, 1.0], [0.0, 0.0]]), X=np.zeros((0, 2, 2)))
    except DataError:
        return
    raise AssertionError("asymmetric Y accepted")


if __name__ == "__main__":
    from testing import main

    main(globals())
