import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vplinear.volterra import residual, solve_columns, solve_richardson, solve_trapezoid


def test_exponential_kernel():
    # y = 1 + int_0^t (t-s) y(s) ds has y = cosh t.
    h = 0.01
    t = np.arange(0, 401) * h
    y = solve_trapezoid(t, np.ones_like(t), h)
    assert np.max(np.abs(y - np.cosh(t))) < 1e-3
    _, yr = solve_richardson(lambda s: s[:, None], lambda s: np.ones((len(s), 1)), 4.0, 0.04, levels=3)
    assert np.max(np.abs(yr[:, 0] - np.cosh(np.arange(101) * 0.04))) < 1e-9


def test_oscillator():
    # y = t - int (t-s) y(s) ds -> y = sin t.
    _, y, err = solve_richardson(lambda s: -s[:, None], lambda s: s[:, None], 20.0, 0.05, 4, return_error=True)
    t = np.arange(401) * 0.05
    assert np.max(np.abs(y[:, 0] - np.sin(t))) < 1e-10
    assert np.max(err) < 1e-8


def test_direct_sum_matches_fft_path():
    rng = np.random.default_rng(0)
    N, h = 300, 0.02
    K = rng.normal(size=N) * np.exp(-np.arange(N) * h)
    K[0] = 0
    f = rng.normal(size=N)
    y = solve_trapezoid(K, f, h)
    ref = np.zeros(N)
    ref[0] = f[0]
    for n in range(1, N):
        ref[n] = f[n] + h * (0.5 * K[n] * ref[0] + sum(K[n - j] * ref[j] for j in range(1, n)))
    assert np.allclose(y, ref, atol=1e-11)


def test_kernel_must_vanish_at_zero():
    with pytest.raises(ValueError):
        solve_trapezoid(np.ones(5), np.ones(5), 0.1)


def test_columns_match_single_solves():
    p = np.array([0.5, 1.0, 2.0])
    K = lambda s, q: -s[:, None] * np.exp(-(s[:, None] * q[None, :]) ** 2 / 2)  # noqa: E731
    f = lambda s, q: np.exp(-(s[:, None] * q[None, :]) ** 2)  # noqa: E731
    t, y, stop = solve_columns(K, f, p, 80.0, 0.08, levels=3, chunk=2, start=10.0)
    for j, q in enumerate(p):
        _, yj = solve_richardson(lambda s: K(s, np.array([q])), lambda s: f(s, np.array([q])), 80.0, 0.08, 3)
        assert np.allclose(y[:, j], yj[:, 0], atol=1e-14)


def test_residual_small():
    h = 0.01
    t = np.arange(1001) * h
    K = -t * np.exp(-t * t / 2)
    _, y = solve_richardson(lambda s: (-s * np.exp(-s * s / 2))[:, None], lambda s: (-s * np.exp(-s * s / 2))[:, None],
                            10.0, h, 3)
    assert np.max(residual(K, K, y[:, 0], h, range(10, 1001, 97))) < 1e-8


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.1, 3.0), b=st.floats(-2.0, 2.0))
def test_linearity_property(a, b):
    h = 0.05
    t = np.arange(200) * h
    K = -t * np.exp(-a * t)
    f1, f2 = np.cos(t), np.exp(-t)
    y = solve_trapezoid(K, f1 + b * f2, h)
    assert np.allclose(y, solve_trapezoid(K, f1, h) + b * solve_trapezoid(K, f2, h), atol=1e-10)
