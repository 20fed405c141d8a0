import numpy as np
import pytest

from vplinear.equilibrium import make_custom, two_stream_table
from vplinear.errors import ConfigError
from vplinear.evolution import (
    InitialData,
    decompose_density,
    density_reports,
    kernel_route_check,
    solve_density,
    source,
)


DATA = InitialData(amplitude=1.0, x_width=1.0, v_width=1.0)


def test_source_examples():
    xi = np.linspace(0, 3, 7)
    assert np.allclose(source(1, DATA, 0.0, xi), np.exp(-xi**2 / 2))
    t = 2.5
    assert np.allclose(np.abs(source(2, DATA, t, xi)), np.exp(-xi**2 / 2) * np.exp(-t * t * xi**2 / 2))
    shifted = InitialData(x_center=3.0)
    assert np.allclose(np.abs(source(1, shifted, 1.0, xi)), np.abs(source(1, DATA, 1.0, xi)))
    assert np.allclose(source(1, shifted, 1.0, -xi), np.conj(source(1, shifted, 1.0, xi)))
    with pytest.raises(ValueError):
        source(4, DATA, 0.0, xi)
    with pytest.raises(ValueError):
        InitialData(x_width=0.0)


def test_free_streaming_dispersive_bound(maxw):
    from vplinear.kernel import RadialInverter

    rho = np.linspace(0, 6, 1201)
    x = np.linspace(0, 60, 601)
    inv = RadialInverter(1, rho, x)
    t = np.array([1.0, 2.0, 4.0, 8.0])
    S = inv(source(1, DATA, t[:, None], rho[None, :]))
    lin = np.abs(S).max(axis=1)
    assert np.all(lin * t <= 1.05 * lin[0] * t[0] * 2)


@pytest.fixture(scope="module")
def small_run(maxw):
    t = np.arange(0, 501) * 0.08
    run = solve_density(maxw[1], DATA, t, n_xi=512, xi_max=8.0)
    return decompose_density(run, maxw[1], DATA, 0.1)


def test_kernel_off_gives_source(maxw):
    run = solve_density(maxw[1], DATA, np.arange(0, 11, 1.0), n_xi=64, xi_max=4.0, coupling=0.0)
    assert np.max(np.abs(run.rhohat - run.Shat)) < 1e-14


def test_initial_density(small_run):
    assert small_run.rho[0, 0].real == pytest.approx(1 / np.sqrt(2 * np.pi), rel=1e-8)


def test_zero_frequency_continuity(maxw):
    run = solve_density(maxw[1], DATA, np.arange(0, 126) * 0.08, n_xi=2, xi_max=1e-4)
    col = run.rhohat
    assert np.allclose(col[:, 0], np.cos(run.t_grid), atol=1e-9)
    assert np.max(np.abs(col[:, 1] - col[:, 0])) < 1e-6


def test_kernel_route(maxw, small_run):
    assert kernel_route_check(maxw[1], DATA, small_run, T=20.0) < 1e-4


def test_output_times_snap_to_step(small_run):
    assert np.allclose(small_run.t_grid / 0.08, np.rint(small_run.t_grid / 0.08))


def test_decomposition_sum(small_run):
    assert small_run.info["sum_residual"] < 1e-6
    assert small_run.info["realness_residual"] < 1e-12


def test_branch_grid_mismatch(maxw, small_run):
    from vplinear.kernel import branch_pair

    pair = branch_pair(maxw[1], np.linspace(0, 0.2, 5))
    with pytest.raises(ValueError):
        decompose_density(small_run, maxw[1], DATA, 0.1, pair=pair)


def test_refinement_convergence(maxw):
    t = np.array([0.0, 100.0])
    a = solve_density(maxw[1], DATA, t, n_xi=128, xi_max=8.0, h=0.01, levels=1)
    b = solve_density(maxw[1], DATA, t, n_xi=128, xi_max=8.0, h=0.005, levels=1)
    na, nb = a.norms["rho"]["Linf"][-1], b.norms["rho"]["Linf"][-1]
    assert abs(na - nb) < 0.01 * nb


def test_step_guard(maxw):
    with pytest.raises(ConfigError):
        solve_density(maxw[1], DATA, [0.0, 1.0], n_xi=16, h=0.08, levels=2)


def test_frequency_boundedness(maxw, small_run):
    ratio = np.abs(small_run.rhohat).max(axis=0) / np.abs(small_run.Shat).max(axis=0)
    assert np.all(np.isfinite(ratio)) and ratio.max() < 50


def test_two_stream_growth():
    s, F = two_stream_table()
    eq = make_custom(1, s, F, name="two_stream")
    run = solve_density(eq, DATA, np.arange(0, 61, 20.0), n_xi=64, xi_max=1.26, h=0.04, levels=3)
    low = np.abs(run.rhohat[:, np.argmin(np.abs(run.xi_grid - 0.2))])
    assert low[-1] > 20 * low[1]


def test_reports_need_window_samples(small_run):
    with pytest.raises(ValueError):
        density_reports(small_run, window=(30.0, 30.5))
