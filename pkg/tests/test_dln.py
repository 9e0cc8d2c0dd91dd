import numpy as np
import pytest
from hypothesis import given, strategies as st

from acdln.dln import (combine_alpha, combine_beta, combine_theta, compute_coeffs, g_norm_pair,
                       g_stability_residual, linear_step, step_variability)

thetas = st.floats(0.0, 1.0)
steps = st.floats(1e-4, 1.0)


@given(theta=thetas, k1=steps, k0=steps)
def test_consistency_conditions(theta, k1, k0):
    c = compute_coeffs(theta, k1, k0)
    a, b = np.array(c.alpha), np.array(c.beta)
    assert abs(a.sum()) < 1e-15
    assert abs(b.sum() - 1.0) < 1e-14
    t = np.array([-k0, 0.0, k1])
    # first and second order: exact for t and t^2
    assert abs(a @ t - c.k_hat) < 1e-14 * max(1.0, c.k_hat)
    assert abs(a @ t ** 2 - 2 * c.k_hat * (b @ t)) < 1e-13 * max(k0, k1) ** 2
    assert c.k_hat > 0
    assert -1 < c.eps < 1


@given(theta=st.floats(0.0, 0.999), k1=steps, k0=steps)
def test_beta2_positive(theta, k1, k0):
    assert compute_coeffs(theta, k1, k0).beta[2] > 0


def test_theta_one_is_midpoint():
    c = compute_coeffs(1.0, 0.3, 0.7)
    assert c.alpha == (0.0, -1.0, 1.0)
    assert np.allclose(c.beta, (0.0, 0.5, 0.5))
    assert np.isclose(c.k_hat, 0.3)
    assert np.allclose(c.a, 0.0)


def test_theta_zero_equal_steps_is_two_interval_midpoint():
    c = compute_coeffs(0.0, 0.2, 0.2)
    assert np.allclose(c.alpha, (-0.5, 0.0, 0.5))
    assert np.allclose(c.beta, (0.5, 0.0, 0.5))
    assert np.isclose(c.k_hat, 0.2)


def test_step_variability():
    assert step_variability(1.0, 1.0) == 0.0
    assert np.isclose(step_variability(2.0, 1.0), 1 / 3)
    assert np.isclose(step_variability(1.0, 3.0), -0.5)


@pytest.mark.parametrize("args", [(-0.1, 1.0, 1.0), (1.1, 1.0, 1.0), (0.5, 0.0, 1.0), (0.5, 1.0, -1.0)])
def test_invalid_arguments(args):
    with pytest.raises(ValueError):
        compute_coeffs(*args)


def test_combinations_of_constant_sequence():
    c = compute_coeffs(0.3, 0.1, 0.05)
    z = np.arange(5.0)
    assert np.allclose(combine_alpha(z, z, z, c), 0.0)
    assert np.allclose(combine_beta(z, z, z, c), z)
    assert np.allclose(combine_theta(z, z, 0.3), z)
    with pytest.raises(ValueError):
        combine_alpha(z, z, z[:3], c)


@given(theta=thetas, k1=steps, k0=steps, seed=st.integers(0, 2 ** 31), n=st.integers(1, 20))
def test_g_stability_identity(theta, k1, k0, seed, n):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((3, n))
    c = compute_coeffs(theta, k1, k0)
    scale = max(1.0, float(np.sum(v * v)))
    assert g_stability_residual(v[0], v[1], v[2], c) <= 1e-12 * scale


def test_g_norm_with_mass_matrix():
    M = np.diag([1.0, 2.0])
    x, y = np.array([1.0, 1.0]), np.array([0.0, 1.0])
    assert np.isclose(g_norm_pair(x, y, 0.5, M), 0.375 * 3 + 0.125 * 2)
    with pytest.raises(ValueError):
        g_norm_pair(x, y, 2.0)


def midpoint(A, y0, k):
    n = len(y0)
    return np.linalg.solve(np.eye(n) - 0.5 * k * A, (np.eye(n) + 0.5 * k * A) @ y0)


@given(seed=st.integers(0, 2 ** 31), k=steps, kp=steps)
def test_linear_step_theta_one_matches_midpoint(seed, k, kp):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 4)) - 3 * np.eye(4)
    y_prev, y = rng.standard_normal(4), rng.standard_normal(4)
    got = linear_step(A, y_prev, y, k, kp, 1.0)
    assert np.allclose(got, midpoint(A, y, k), rtol=0, atol=1e-12 * (1 + np.abs(y).max()))


@given(seed=st.integers(0, 2 ** 31), k=steps)
def test_linear_step_theta_zero_matches_two_interval_midpoint(seed, k):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3)) - 2 * np.eye(3)
    y_prev, y = rng.standard_normal(3), rng.standard_normal(3)
    got = linear_step(A, y_prev, y, k, k, 0.0)
    ref = midpoint(A, y_prev, 2 * k)
    assert np.allclose(got, ref, rtol=0, atol=1e-12 * (1 + np.abs(y_prev).max()))


@pytest.mark.parametrize("theta", [0.0, 0.3, 0.8, 1.0])
def test_second_order_on_variable_grid(theta):
    # y' = -y + sin t on an irregular grid; global error must drop by ~4 per halving
    def run(n):
        rng = np.random.default_rng(7)
        base = 1.0 + 0.5 * rng.random(n)
        ts = np.concatenate([[0.0], np.cumsum(base / base.sum())])
        exact = lambda t: 1.5 * np.exp(-t) + 0.5 * (np.sin(t) - np.cos(t))
        A = np.array([[-1.0]])
        y = [np.array([exact(ts[0])]), np.array([exact(ts[1])])]
        for i in range(1, n):
            c = compute_coeffs(theta, ts[i + 1] - ts[i], ts[i] - ts[i - 1])
            tb = c.beta[0] * ts[i - 1] + c.beta[1] * ts[i] + c.beta[2] * ts[i + 1]
            y.append(linear_step(A, y[-2], y[-1], ts[i + 1] - ts[i], ts[i] - ts[i - 1], theta,
                                 g=[np.sin(tb)]))
        return abs(y[-1][0] - exact(1.0))

    errs = [run(n) for n in (40, 80, 160)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8), rates
