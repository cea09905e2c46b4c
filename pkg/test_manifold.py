#!/usr/bin/env python3
"""
Tests for centered semi-orthogonal matrices and the Frechet mean
"""
import settings  # noqa: F401
import jax
import jax.numpy as jnp
import numpy as np

from exceptions import DegenerateInputError
from manifold import centered_orthogonalize, frechet_mean, is_member, membership_residuals, orthogonalize


def _raises(fn, error=DegenerateInputError) -> bool:
    try:
        fn()
    except error:
        return True
    return False


def test_centered_orthogonalize_is_member():
    rng = np.random.default_rng(0)
    for _ in range(200):
        d = int(rng.integers(1, 7))
        n = int(rng.integers(d + 1, 60))
        U = centered_orthogonalize(rng.standard_normal((n, d)) * rng.uniform(0.1, 10.0))
        orth, centre = membership_residuals(U)
        assert orth <= 1e-10 and centre <= 1e-10, (n, d, orth, centre)


def test_two_node_basis():
    expected = np.array([[-1.0], [1.0]]) / np.sqrt(2.0)
    B = np.array([[0.0], [1.0]])
    assert np.allclose(centered_orthogonalize(B), expected, atol=1e-12)
    assert np.allclose(np.asarray(orthogonalize(jnp.asarray(B))), expected, atol=1e-12)


def test_qr_map_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    B = rng.standard_normal((7, 3))
    W = rng.standard_normal((7, 3))
    f = jax.jit(lambda b: jnp.sum(jnp.asarray(W) * orthogonalize(b)))
    analytic = np.asarray(jax.grad(f)(jnp.asarray(B)))
    h = 1e-6
    for i in range(B.shape[0]):
        for j in range(B.shape[1]):
            step = np.zeros_like(B)
            step[i, j] = h
            numeric = (float(f(jnp.asarray(B + step))) - float(f(jnp.asarray(B - step)))) / (2 * h)
            assert abs(analytic[i, j] - numeric) <= 1e-6 * max(1.0, abs(numeric)), (i, j, analytic[i, j], numeric)


def test_span_of_centered_columns_is_preserved():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((15, 3))
    U = centered_orthogonalize(B)
    centered = B - B.mean(axis=0)
    assert np.allclose(centered - U @ (U.T @ centered), 0.0, atol=1e-10)


def test_sign_convention_is_stable():
    rng = np.random.default_rng(2)
    B = rng.standard_normal((12, 2))
    U = centered_orthogonalize(B)
    # positive diagonal of R: each column correlates positively with its own centered input column
    residual_first = B[:, 0] - B[:, 0].mean()
    assert residual_first @ U[:, 0] > 0
    assert np.allclose(centered_orthogonalize(B), U)


def test_member_input_is_a_fixed_point():
    rng = np.random.default_rng(3)
    U = centered_orthogonalize(rng.standard_normal((10, 3)))
    assert np.allclose(centered_orthogonalize(U), U, atol=1e-12)


def test_degenerate_inputs_raise():
    rng = np.random.default_rng(4)
    B = rng.standard_normal((8, 2))
    assert _raises(lambda: centered_orthogonalize(np.c_[B, B[:, 0]]))
    assert _raises(lambda: centered_orthogonalize(np.c_[B, np.full(8, 3.0)]))
    assert _raises(lambda: centered_orthogonalize(rng.standard_normal((3, 3))))
    assert _raises(lambda: centered_orthogonalize(np.zeros(5)))


def test_zero_dimensions():
    assert centered_orthogonalize(np.zeros((5, 0))).shape == (5, 0)
    assert frechet_mean(np.zeros((4, 5, 0))).shape == (5, 0)


def test_frechet_mean_of_identical_draws():
    rng = np.random.default_rng(5)
    U = centered_orthogonalize(rng.standard_normal((20, 4)))
    assert np.allclose(frechet_mean([U, U, U]), U, atol=1e-12)


def test_frechet_mean_is_member():
    rng = np.random.default_rng(6)
    U = centered_orthogonalize(rng.standard_normal((30, 3)))
    draws = [centered_orthogonalize(U + 0.05 * rng.standard_normal(U.shape)) for _ in range(40)]
    mean = frechet_mean(draws)
    assert is_member(mean)
    assert np.abs(mean - U).max() < 0.2


def test_frechet_mean_rank_deficient():
    rng = np.random.default_rng(7)
    U = centered_orthogonalize(rng.standard_normal((10, 2)))
    assert _raises(lambda: frechet_mean([U, -U]))
    assert _raises(lambda: frechet_mean(np.zeros((0, 10, 2))))


def test_is_member_rejects():
    assert not is_member(np.eye(5)[:, :2])
    assert not is_member(np.full((4, 1), np.nan))
    assert not is_member(np.zeros((2, 2)))


if __name__ == "__main__":
    from testing import main

    main(globals())
