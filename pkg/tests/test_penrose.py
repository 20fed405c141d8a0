import numpy as np
import pytest

from oracles import maxwell_mvp, right_half_plane_roots, two_stream_mvp
from vplinear.equilibrium import make_custom, two_stream_table
from vplinear.penrose import check_h1, check_h2, check_stability, winding_number


@pytest.fixture(scope="module")
def two_stream():
    s, F = two_stream_table()
    return make_custom(1, s, F, name="two_stream")


def test_winding_of_circle():
    circle = lambda t: np.exp(2j * np.pi * t)  # noqa: E731
    ang, _ = winding_number(lambda z: z**2, circle)
    assert ang / (2 * np.pi) == pytest.approx(2.0, abs=1e-9)


def test_maxwellian_h1(maxw):
    recs = check_h1(maxw[1], [0.2, 0.5, 1.0])
    assert [r.winding_number for r in recs] == [0, 0, 0]
    assert all(r.status == "certified" for r in recs)
    # Oracle: no right-half-plane zero of the closed form either.
    for r in (0.2, 0.5, 1.0):
        assert right_half_plane_roots(lambda z: 1 - maxwell_mvp(z, r)) == []


def test_two_stream_h1(two_stream):
    rec = check_h1(two_stream, [0.2])[0]
    roots = right_half_plane_roots(lambda z: 1 - two_stream_mvp(z, 0.2))
    assert rec.winding_number >= 1
    assert rec.winding_number == len(roots)


def test_winding_stable_under_larger_box(maxw, two_stream):
    assert check_h1(maxw[1], [0.5], gamma_max=30.0)[0].winding_number == 0
    assert check_h1(two_stream, [0.2], gamma_max=12.0, tau_max=8.0)[0].winding_number == \
        check_h1(two_stream, [0.2])[0].winding_number


@pytest.mark.parametrize("d", [1, 3])
def test_h2(maxw, d):
    rec = check_h2(maxw[d])
    assert rec.zero_locations == [0.0]
    assert abs(rec.dz_at_zero) < 1e-8
    assert rec.d2z_at_zero.real == pytest.approx(-2.0, rel=1e-6)
    assert rec.d2z_closed_form == pytest.approx(-2.0, rel=1e-6)
    assert rec.status == "pass"


def test_stability_verdicts(maxw, two_stream):
    assert check_stability(maxw[2], [0.1, 1.0, 5.0], workers=2).verdict == "stable"
    assert check_stability(two_stream, [0.2]).verdict == "unstable"


def test_workers_keep_order(maxw):
    radii = [0.3, 0.1, 2.0]
    a = check_h1(maxw[1], radii, workers=3)
    assert [r.xi_norm for r in a] == radii
