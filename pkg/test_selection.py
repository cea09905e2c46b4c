#!/usr/bin/env python3
"""
Tests for the information criteria, streaming WAIC, cross-validation folds and the 1SE rule
"""
import math

import numpy as np
from scipy.special import logsumexp

from exceptions import ConfigError, DataError
from families import get_family
from selection import aic, bic, criterion_report, cv_partition, dic, num_parameters, one_se_rule, waic, waic_terms
from testing import QUICK, small_network


def test_aic_and_bic():
    assert num_parameters(10, 2, 3) == 25
    assert aic(-100.0, 10, 2, 3) == 250.0
    assert math.isclose(bic(-100.0, 10, 2, 3), 200.0 + 25 * math.log(45.0))


def test_dic():
    logliks = np.array([-12.0, -10.0, -11.0])
    # p_dic = 2 * (-9 - (-11)) = 4
    assert math.isclose(dic(logliks, -9.0), 18.0 + 8.0)
    try:
        dic(np.zeros(0), 0.0)
    except DataError:
        return
    raise AssertionError("empty draws accepted")


def test_streaming_waic_matches_two_pass():
    rng = np.random.default_rng(0)
    ll = rng.normal(-2.0, 1.5, size=(203, 40)) - 50.0 * rng.random(40)
    lppd, p_waic = waic_terms(ll, chunk=7)
    expected_lppd = float(np.sum(logsumexp(ll, axis=0) - math.log(ll.shape[0])))
    expected_p = float(np.sum(ll.var(axis=0, ddof=1)))
    assert abs(lppd - expected_lppd) < 1e-8
    assert abs(p_waic - expected_p) < 1e-8
    assert math.isclose(waic(ll), -2 * expected_lppd + 2 * expected_p, rel_tol=1e-10)


def test_waic_needs_two_draws():
    try:
        waic_terms(np.zeros((1, 3)))
    except ConfigError:
        return
    raise AssertionError("single draw accepted")


def test_one_se_rule():
    assert one_se_rule([1, 2, 3, 4], [-10.0, -5.0, -4.5, -4.4], [0.1, 0.2, 0.3, 0.5]) == (4, 3)
    assert one_se_rule([3, 1, 2], [-1.0, -1.0, -5.0], [0.0, 0.0, 0.0]) == (1, 1)


def test_cv_partition():
    data = small_network(n=12)
    mask = np.ones((12, 12), dtype=bool)
    mask[0, 5] = mask[5, 0] = False
    data = data.with_mask(mask)
    folds = cv_partition(data, 5, seed=3)
    pairs = [(int(i), int(j)) for rows, cols in folds for i, j in zip(rows, cols)]
    assert len(pairs) == len(set(pairs)) == 12 * 11 // 2 - 1
    assert (0, 5) not in pairs and all(i < j for i, j in pairs)
    sizes = [rows.size for rows, _ in folds]
    assert max(sizes) - min(sizes) <= 1
    again = cv_partition(data, 5, seed=3)
    assert all(np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) for a, b in zip(folds, again))


def test_cv_partition_rejects_bad_fold_counts():
    data = small_network(n=4)
    for K in (1, 7):
        try:
            cv_partition(data, K, seed=0)
        except ConfigError:
            continue
        raise AssertionError(f"K={K} accepted")


def test_criterion_report_on_a_tiny_network():
    data = small_network(n=10, d0=1, seed=4)
    report = criterion_report(data, get_family("bernoulli"), [2, 1], QUICK, folds=2)
    assert report.table["d"].tolist() == [1, 2]
    for column in ("aic", "bic", "dic", "waic", "p_dic", "p_waic", "cv_mean", "cv_se"):
        assert np.all(np.isfinite(report.table[column])), column
    assert set(report.selected) == {"aic", "bic", "dic", "waic", "cv_best", "cv_1se"}
    assert all(d in (1, 2) for d in report.selected.values())
    assert len(report.cv_scores) == 4
    assert report.table["k"].tolist() == [num_parameters(10, d, data.p) for d in (1, 2)]


if __name__ == "__main__":
    from testing import main

    main(globals())
