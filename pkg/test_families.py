#!/usr/bin/env python3
"""
Tests for the exponential-dispersion families and links
"""
import numpy as np
from scipy import integrate, special, stats

from exceptions import ConfigError, DataError, NumericalError
from families import (LINKS, AuxParams, get_family, get_link, log_density, tweedie_log_normalizer,
                      tweedie_required_half_width, tweedie_window_margin)


def _f(value) -> float:
    return float(np.asarray(value))


def _tweedie_brute_force(y, mu, phi, power):
    """log density by summing over the latent Poisson count directly."""
    rate = mu ** (2.0 - power) / (phi * (2.0 - power))
    shape = (2.0 - power) / (power - 1.0)
    scale = phi * (power - 1.0) * mu ** (power - 1.0)
    N = np.arange(1, int(rate + 40 * np.sqrt(rate) + 400))
    terms = stats.poisson.logpmf(N, rate) + stats.gamma.logpdf(y, a=N * shape, scale=scale)
    return float(special.logsumexp(terms))


def test_link_roundtrip():
    eta = np.linspace(-3.0, 3.0, 25)
    for name in LINKS:
        link = get_link(name)
        mu = link.inverse(eta)
        assert np.allclose(np.asarray(link.link(mu)), eta, atol=1e-8), name


def test_unknown_family_and_link_rejected():
    for bad in (lambda: get_family("binomial-ish"), lambda: get_family("poisson", "logit"),
                lambda: get_link("sqrt"), lambda: get_family("gaussian", "probit")):
        try:
            bad()
        except ConfigError:
            continue
        raise AssertionError("expected ConfigError")
    assert get_family("bernoulli", "probit").link.name == "probit"
    assert get_family("nb").name == "negbin"


def test_known_dispersion_families():
    assert get_family("bernoulli", phi=3.0).phi == 1.0
    assert get_family("poisson").phi == 1.0
    assert get_family("gaussian").samples_phi
    tweedie = get_family("tweedie")
    assert tweedie.samples_phi and tweedie.samples_power
    assert not get_family("tweedie", phi=2.0, power=1.4).samples_power


def test_bernoulli_matches_scipy():
    family = get_family("bernoulli")
    y = np.array([0.0, 1.0, 1.0, 0.0])
    mu = np.array([0.2, 0.7, 0.01, 0.99])
    assert np.allclose(np.asarray(family.log_density(y, mu)), stats.bernoulli.logpmf(y, mu), atol=1e-12)


def test_count_and_gaussian_families_match_scipy():
    y = np.array([0.0, 1.0, 4.0, 11.0])
    mu = np.array([0.5, 2.0, 3.5, 9.0])
    poisson = get_family("poisson")
    assert np.allclose(np.asarray(poisson.log_density(y, mu)), stats.poisson.logpmf(y, mu), atol=1e-10)

    phi = 0.4
    r = 1.0 / phi
    negbin = get_family("negbin")
    expected = stats.nbinom.logpmf(y, r, r / (r + mu))
    assert np.allclose(np.asarray(negbin.log_density(y, mu, phi)), expected, atol=1e-10)
    assert np.allclose(np.asarray(negbin.variance(mu, phi)), stats.nbinom.var(r, r / (r + mu)), rtol=1e-10)

    gaussian = get_family("gaussian")
    z = np.array([-1.5, 0.0, 2.5, 7.0])
    assert np.allclose(np.asarray(gaussian.log_density(z, mu, 2.5)), stats.norm.logpdf(z, mu, np.sqrt(2.5)),
                       atol=1e-12)


def test_tweedie_matches_latent_count_sum():
    rng = np.random.default_rng(11)
    family = get_family("tweedie")
    for _ in range(50):
        y = rng.uniform(0.05, 15.0)
        mu = rng.uniform(0.3, 8.0)
        phi = rng.uniform(0.3, 4.0)
        power = rng.uniform(1.1, 1.9)
        got = _f(family.log_density(np.array([y]), mu, phi, power)[0])
        expected = _tweedie_brute_force(y, mu, phi, power)
        assert abs(got - expected) <= 1e-8 * max(1.0, abs(expected)), (y, mu, phi, power, got, expected)


def test_tweedie_zero_atom():
    family = get_family("tweedie")
    mu, phi, power = 2.0, 1.5, 1.3
    rate = mu ** (2.0 - power) / (phi * (2.0 - power))
    assert abs(_f(family.log_density(np.array([0.0]), mu, phi, power)[0]) + rate) < 1e-12
    assert abs(_f(family.zero_probability(mu, phi, power)) - np.exp(-rate)) < 1e-12


def test_tweedie_series_agrees_with_adaptive_normalizer():
    family = get_family("tweedie")
    for y, mu, phi, power in ((0.3, 1.0, 1.0, 1.5), (4.0, 2.5, 0.7, 1.2), (12.0, 6.0, 2.0, 1.8)):
        theta = mu ** (1.0 - power) / (1.0 - power)
        kappa = mu ** (2.0 - power) / (2.0 - power)
        expected = tweedie_log_normalizer(y, phi, power) + (y * theta - kappa) / phi
        assert abs(_f(family.log_density(np.array([y]), mu, phi, power)[0]) - expected) < 1e-9


def test_tweedie_window_is_checked_for_large_peaks():
    family = get_family("tweedie")
    log_density(family, np.array([0.0, 0.3, 12.0]), np.array([1.0, 1.0, 6.0]), AuxParams(phi=0.7, power=1.4))
    for y, phi, power in ((2000.0, 0.05, 1.2), (5000.0, 0.02, 1.5)):
        assert tweedie_window_margin(np.array([y]), phi, power, family.series_terms)[0] < 37.0
        try:
            log_density(family, np.array([y]), np.array([y]), AuxParams(phi=phi, power=power))
        except NumericalError as e:
            assert "series_terms" in str(e)
        else:
            raise AssertionError(f"truncated window accepted at y={y}")

        width = tweedie_required_half_width(np.array([y]), phi, power)
        assert width > family.series_terms
        wide = get_family("tweedie", series_terms=width)
        mu = 0.9 * y
        theta = mu ** (1.0 - power) / (1.0 - power)
        kappa = mu ** (2.0 - power) / (2.0 - power)
        expected = tweedie_log_normalizer(y, phi, power) + (y * theta - kappa) / phi
        got = _f(log_density(wide, np.array([y]), np.array([mu]), AuxParams(phi=phi, power=power))[0])
        assert abs(got - expected) <= 1e-8 * max(1.0, abs(expected)), (y, got, expected)


def test_tweedie_total_mass():
    mu, phi, power = 2.0, 1.0, 1.5
    theta = mu ** (1.0 - power) / (1.0 - power)
    kappa = mu ** (2.0 - power) / (2.0 - power)

    def density(y):
        return np.exp(tweedie_log_normalizer(y, phi, power) + (y * theta - kappa) / phi)

    continuous = integrate.quad(density, 0.0, 1.0, limit=200)[0] + integrate.quad(density, 1.0, 80.0, limit=200)[0]
    total = np.exp(-kappa / phi) + continuous
    assert abs(total - 1.0) < 1e-4, total


def test_tweedie_scale_invariance():
    family = get_family("tweedie")
    y, mu, phi, power, c = 3.0, 2.0, 1.2, 1.4, 2.5
    left = _f(family.log_density(np.array([c * y]), c * mu, c ** (2.0 - power) * phi, power)[0])
    right = _f(family.log_density(np.array([y]), mu, phi, power)[0]) - np.log(c)
    assert abs(left - right) < 1e-9


def test_normalizer_rejects_bad_arguments():
    for args, error in (((0.0, 1.0, 1.5), DataError), ((1.0, 1.0, 2.0), ConfigError), ((1.0, -1.0, 1.5), ConfigError)):
        try:
            tweedie_log_normalizer(*args)
        except error:
            continue
        raise AssertionError(f"expected {error.__name__} for {args}")


def test_support_errors_name_the_family():
    cases = (("poisson", [0.0, 1.5]), ("bernoulli", [0.0, 2.0]), ("tweedie", [1.0, -0.5]), ("negbin", [-1.0]))
    for name, values in cases:
        family = get_family(name)
        try:
            log_density(family, np.array(values), np.ones(len(values)))
        except DataError as e:
            assert name in str(e)
            continue
        raise AssertionError(f"{name} accepted out-of-support values")


def test_aux_params_validation():
    AuxParams(phi=2.0, power=1.3)
    for kwargs in ({"phi": -1.0}, {"phi": 0.0}, {"power": 2.5}, {"power": 1.0}):
        try:
            AuxParams(**kwargs)
        except ConfigError:
            continue
        raise AssertionError(f"AuxParams accepted {kwargs}")


def test_sample_moments():
    rng = np.random.default_rng(3)
    mu = np.full(200_000, 2.0)
    counts = get_family("poisson").sample(mu, 1.0, 1.5, rng)
    assert abs(counts.mean() - 2.0) < 0.02

    phi, power = 1.0, 1.5
    tweedie = get_family("tweedie").sample(mu, phi, power, rng)
    assert abs(tweedie.mean() - 2.0) < 0.03
    assert abs(tweedie.var() / (phi * 2.0 ** power) - 1.0) < 0.05
    assert abs(np.mean(tweedie == 0) - np.exp(-2.0 ** 0.5 / 0.5)) < 0.005

    nb = get_family("negbin").sample(mu, 0.5, 1.5, rng)
    assert abs(nb.var() / (2.0 + 0.5 * 4.0) - 1.0) < 0.05


def test_unit_deviance_vanishes_at_the_mean():
    y = np.array([0.5, 1.0, 3.0])
    for name in ("gaussian", "poisson", "negbin", "tweedie"):
        family = get_family(name)
        assert np.allclose(np.asarray(family.unit_deviance(y, y, 0.7, 1.4)), 0.0, atol=1e-12), name
    bernoulli = get_family("bernoulli")
    assert np.allclose(np.asarray(bernoulli.unit_deviance(np.array([0.0, 1.0]), np.array([0.0, 1.0]))), 0.0)


def test_zero_probability_matches_scipy():
    mu = np.array([0.5, 3.0])
    assert np.allclose(np.asarray(get_family("poisson").zero_probability(mu)), stats.poisson.pmf(0, mu))
    r = 1.0 / 0.4
    assert np.allclose(np.asarray(get_family("negbin").zero_probability(mu, 0.4)),
                       stats.nbinom.pmf(0, r, r / (r + mu)))


if __name__ == "__main__":
    from testing import main

    main(globals())
