import numpy as np
import pytest

from oracles import landau_root
from vplinear.dispersion import (
    branch_quadratic_fit,
    count_zeros_box,
    damping_flatness_check,
    dispersion_function,
    track_branch,
)
from vplinear.symbols import m_ke, m_vp

LANDAU_K05 = complex(-0.15335946690960472, 1.415661888604537)


def test_oracle_root_value():
    assert landau_root(0.5) == pytest.approx(LANDAU_K05, abs=1e-12)


@pytest.fixture(scope="module")
def branch(maxw):
    return track_branch(maxw[1], 1, np.linspace(0.005, 0.5, 100), check_window=10)


def test_landau_root(branch):
    s = branch.samples[-1]
    assert s.r == pytest.approx(0.5)
    assert abs(s.Z - landau_root(0.5)) < 1e-6


def test_small_r_limit(branch):
    s = branch.samples[0]
    assert abs(s.Z - 1j) < 1e-4
    assert abs(s.a - 0.5j) < 1e-3


def test_roots_satisfy_both_forms(maxw, branch):
    for s in branch.samples[::11]:
        assert abs(s.Z**2 + 1 - complex(m_ke(maxw[1], s.Z, s.r))) < 1e-11
        assert abs(1 - complex(m_vp(maxw[1], s.Z, s.r))) < 1e-9
        g, _, _ = dispersion_function(maxw[1], s.Z, s.r)
        assert abs(g) < 1e-11


def test_damping_signs_and_flatness(branch):
    rep = damping_flatness_check(branch)
    assert rep["all_damped"] and rep["slope_ok"]
    big = [s for s in branch.samples if s.r >= 0.3]
    assert all(s.Gamma < 0 for s in big)


def test_classical_damping_asymptotics(branch):
    # |Gamma| ~ sqrt(pi/8) r^-3 exp(-1/(2 r^2) - 3/2): right order of magnitude at r = 0.3.
    s = min(branch.samples, key=lambda s: abs(s.r - 0.3))
    approx = np.sqrt(np.pi / 8) / s.r**3 * np.exp(-1 / (2 * s.r**2) - 1.5)
    assert 0.3 < abs(s.Gamma) / approx < 3


def test_conjugate_branch(maxw):
    r = np.linspace(0.05, 0.4, 8)
    p = track_branch(maxw[1], 1, r, check_window=False)
    m = track_branch(maxw[1], -1, r, check_window=False)
    for a, b in zip(p.samples, m.samples):
        assert abs(a.Z - b.Z.conjugate()) < 1e-12
        assert abs(a.a - b.a.conjugate()) < 1e-10


def test_window_uniqueness(branch):
    assert all(s.window_unique for s in branch.samples if s.window_unique is not None)
    assert branch.certified_radius > 0.4


def test_count_zeros(maxw):
    Z = LANDAU_K05
    assert count_zeros_box(maxw[1], 0.5, Z.real - 0.05, Z.real + 0.05, Z.imag - 0.05, Z.imag + 0.05) == 1
    assert count_zeros_box(maxw[1], 0.5, 0.1, 1.0, -2.0, 2.0) == 0


@pytest.mark.parametrize("d", [1, 2, 3])
def test_bohm_gross_maxwellian(maxw, d):
    b = track_branch(maxw[d], 1, np.linspace(0.005, 0.1, 20), check_window=False)
    fit = branch_quadratic_fit(b)
    assert fit["c2"] == pytest.approx(1.5, rel=0.01)


def test_fit_needs_samples(maxw):
    b = track_branch(maxw[1], 1, np.linspace(0.05, 0.1, 5), check_window=False)
    with pytest.raises(ValueError):
        branch_quadratic_fit(b)


def test_bad_grid(maxw):
    with pytest.raises(ValueError):
        track_branch(maxw[1], 1, [0.2, 0.1])
    with pytest.raises(ValueError):
        track_branch(maxw[1], 2, [0.1])
