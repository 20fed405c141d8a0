import math

import numpy as np
import pytest

from vplinear.equilibrium import (
    make_custom,
    make_maxwellian,
    make_power_law,
    moment,
    radial_fourier,
    two_stream_table,
)
from vplinear.errors import DivergentMomentError


def test_maxwellian_normalization_and_moments(maxw):
    assert float(maxw[1].M(0.0)) == pytest.approx(1.0, abs=1e-15)
    assert maxw[3].moments[1] == 1.0 and maxw[3].moments[2] == 3.0
    assert moment(maxw[3], 1) == pytest.approx(1.0, rel=1e-10)
    assert moment(maxw[1], 2) == pytest.approx(3.0, rel=1e-10)


def test_maxwellian_marginal(maxw):
    assert float(maxw[2].phi(0.0)) == pytest.approx((2 * math.pi) ** -0.5, rel=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_marginal_identity(maxw, d):
    # -int u^2 Phi'(u^2/2) du = 1
    from scipy import integrate

    val, _ = integrate.quad(lambda u: -u * u * float(maxw[d].dphi(u * u / 2)), -np.inf, np.inf)
    assert val == pytest.approx(1.0, rel=1e-10)


def test_unsupported_dimension():
    with pytest.raises(ValueError):
        make_maxwellian(4)


def test_cauchy_profile():
    eq = make_power_law(1, 1.0)
    assert float(eq.M(0.0)) == pytest.approx(1.0, rel=1e-12)
    assert float(eq.M(2.0)) == pytest.approx(math.exp(-2.0), rel=1e-10)
    with pytest.raises(DivergentMomentError):
        moment(eq, 1)


def test_divergent_fourth_moment():
    eq = make_power_law(1, 2.0)
    with pytest.raises(DivergentMomentError):
        moment(eq, 2)


def test_power_law_strict_precondition():
    with pytest.raises(ValueError):
        make_power_law(1, 4.0, strict=True)
    assert make_power_law(1, 5.0, strict=True).d == 1


@pytest.mark.parametrize("d", [1, 2, 3])
def test_power_law_moment_matches_curvature(plaw, d):
    eq = plaw[d]
    assert moment(eq, 1) == pytest.approx(-float(np.real(eq.M(0.0, 2))), rel=1e-8)
    assert float(np.real(eq.M(0.0, 1))) == pytest.approx(0.0, abs=1e-12)


def test_radial_fourier_maxwellian_d2():
    F = lambda s: np.exp(-s) / (2 * math.pi)  # noqa: E731
    assert radial_fourier(F, 2, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-10)
    assert radial_fourier(F, 2, 0.0) == pytest.approx(1.0, rel=1e-10)


def test_radial_fourier_maxwellian_range():
    F = lambda s: np.exp(-s) / math.sqrt(2 * math.pi)  # noqa: E731
    for r in np.linspace(0, 20, 11):
        assert radial_fourier(F, 1, r, strip=np.inf) == pytest.approx(math.exp(-r * r / 2), rel=1e-10)


def test_radial_fourier_cauchy():
    F = lambda s: 1 / (math.pi * (1 + 2 * s))  # noqa: E731
    assert radial_fourier(F, 1, 3.0) == pytest.approx(math.exp(-3.0), rel=1e-8)


def test_certified_bound(maxw, plaw):
    r = np.geomspace(1e-2, 50, 200)
    for eq in (maxw[1], plaw[1]):
        assert np.all(np.abs(np.real(eq.M(r))) <= eq.C0 * np.exp(-eq.R0 * r) * (1 + 1e-12))


def test_custom_table_reproduces_maxwellian():
    s = np.linspace(0, 60, 6001)
    eq = make_custom(1, s, np.exp(-s) / math.sqrt(2 * math.pi))
    r = np.array([0.0, 0.5, 1.0, 2.0])
    assert np.allclose(np.real(eq.M(r)), np.exp(-r * r / 2), atol=1e-8)


def test_two_stream_table_profile():
    s, F = two_stream_table()
    eq = make_custom(1, s, F, name="two_stream")
    r = np.array([0.1, 0.4])
    assert np.allclose(np.real(eq.M(r)), np.exp(-r * r / 2) * np.cos(2 * r), atol=1e-7)


def test_profile_key_shared_across_dimensions(maxw, plaw):
    assert maxw[1].profile_key() == maxw[3].profile_key()
    assert plaw[1].profile_key() != plaw[2].profile_key()
