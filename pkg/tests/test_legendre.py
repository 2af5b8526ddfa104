import numpy as np
import pytest

from symswitch import fcs
from symswitch.errors import ConfigurationError


def poisson_curve(c=2.0, lo=-1.0, hi=1.0, n=201):
    s = np.linspace(lo, hi, n)
    return fcs.LdfCurve(tuple(s), tuple(c * np.expm1(-s)), (0.0,) * n), s


def poisson_G(q, c=2.0):
    return q - c + q * np.log(c / q)


def test_poisson_rate_function():
    curve, s = poisson_curve()
    ds = s[1] - s[0]
    q = np.linspace(0.9, 5.0, 300)
    gq = fcs.legendre(curve, q)
    # each exact minimiser is within ds/2 of a sample; the bias is quadratic in that offset
    err = np.abs(np.asarray(gq.G) - poisson_G(q))
    assert err.max() < 0.5 * (ds / 2) ** 2 * q.max()
    assert max(gq.G) == pytest.approx(0.0, abs=1e-12)
    assert gq.q[int(np.argmax(gq.G))] == pytest.approx(2.0, abs=q[1] - q[0])


def test_round_trip_within_grid_resolution():
    curve, s = poisson_curve()
    ds = s[1] - s[0]
    slopes = -np.diff(curve.theta) / ds
    q = np.linspace(slopes.min(), slopes.max(), 2001)
    dq = q[1] - q[0]
    gq = fcs.legendre(curve, q)
    back = fcs.legendre_inverse(gq, s)
    assert np.abs(back - np.asarray(curve.theta)).max() <= 2 * ds * dq
    assert np.all(back <= np.asarray(curve.theta) + 1e-15)


def test_G_nonpositive_and_zero_at_mean(models):
    curve = fcs.scan_theta(models["fig2_laser_on"], np.linspace(-0.2, 0.2, 41))
    q_mean = fcs.current_stats(models["fig2_laser_on"]).q_mean
    q = np.linspace(0.8 * q_mean, 1.2 * q_mean, 201)
    gq = fcs.legendre(curve, q)
    assert max(gq.G) <= 1e-18
    ds, dq = curve.s[1] - curve.s[0], q[1] - q[0]
    assert abs(max(gq.G)) <= ds * dq
    assert gq.nonrecoverable is None


def test_kink_flags_nonrecoverable_interval(models):
    m = models["fig3_laser_off"]
    curve = fcs.scan_theta(m, np.linspace(-0.1, 0.1, 21))
    cs = fcs.current_stats(m)
    left, right, kink = fcs.detect_kink(curve)
    assert kink
    gq = fcs.legendre(curve, np.linspace(cs.q_min, cs.q_max, 101))
    lo, hi = gq.nonrecoverable
    assert lo == pytest.approx(cs.q_min, rel=0.05)
    assert hi == pytest.approx(cs.q_max, rel=0.05)
    # G is linear in the gap: the sample at s = 0 is the minimiser throughout
    inside = [(q, G) for q, G in gq.rows() if lo < q < hi]
    assert max(abs(G) for _, G in inside) < 1e-15


def test_smooth_curve_has_no_kink(models):
    curve = fcs.scan_theta(models["fig2_laser_on"], np.linspace(-0.1, 0.1, 21))
    assert not fcs.detect_kink(curve)[2]


def test_out_of_range_q_is_clipped_with_warning():
    curve, _ = poisson_curve()
    with pytest.warns(UserWarning):
        gq = fcs.legendre(curve, np.linspace(0.1, 20.0, 50))
    assert gq.clipped
    assert min(gq.q) > 0.1 and max(gq.q) < 20.0


def test_grid_must_bracket_zero():
    curve, _ = poisson_curve(lo=0.1, hi=1.0)
    with pytest.raises(ConfigurationError):
        fcs.legendre(curve, [1.0])


def test_curve_validation():
    with pytest.raises(ValueError):
        fcs.LdfCurve((0.0, -1.0), (0.0, 0.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        fcs.LdfCurve((0.0, 1.0), (0.0,), (0.0, 0.0))
