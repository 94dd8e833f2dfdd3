import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morreylab.grid import (Ball, BallFamily, Domain, NonIntegrableWeightError, SampledFunction,
                            ball_integrals, ball_volume, default_family, integrate_ball,
                            make_ball_family, unit_ball_volume)
from morreylab.weights import Power


_GL_X, _GL_W = np.polynomial.legendre.leggauss(80)


def _power_on_positive(lo, hi, alpha):
    """int_lo^hi t^alpha for 0 <= lo < hi via t = u^m, which removes the singularity."""
    m = math.ceil(8.0 / (alpha + 1.0))  # integrand ~ u^7 or smoother at 0
    u0, u1 = lo ** (1.0 / m), hi ** (1.0 / m)
    u = 0.5 * (u1 - u0) * _GL_X + 0.5 * (u1 + u0)
    return 0.5 * (u1 - u0) * np.sum(_GL_W * m * u ** (m * (alpha + 1.0) - 1.0))


def _oracle_ball_integral(values, edges, alpha, a, b):
    """Cellwise Gauss-Legendre quadrature of g |x|^alpha over (a, b)."""
    total = 0.0
    for j, g in enumerate(values):
        lo, hi = max(a, edges[j]), min(b, edges[j + 1])
        if hi <= lo or g == 0:
            continue
        if lo >= 0:
            total += g * _power_on_positive(lo, hi, alpha)
        elif hi <= 0:
            total += g * _power_on_positive(-hi, -lo, alpha)
        else:
            total += g * (_power_on_positive(0, -lo, alpha) + _power_on_positive(0, hi, alpha))
    return total


# ------------------------------------------------------------------ Domain


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 200), R=st.floats(0.5, 10), log=st.booleans(),
       levels=st.integers(0, 30))
def test_domain_edges_invariants(m, R, log, levels):
    d = Domain(1, R, 2 * m, "origin_log" if log else "uniform", log_levels=levels if log else None)
    e = d.axis_edges
    assert len(e) == 2 * m + 1
    assert np.all(np.diff(e) > 0)
    assert e[0] == -R and e[-1] == R
    assert 0.0 in e  # origin is always a boundary, never a node
    assert np.allclose(e, -e[::-1])
    assert d.volumes.sum() == pytest.approx((2 * R) ** d.dim)


def test_origin_log_concentrates_toward_origin():
    u = Domain(1, 4.0, 64)
    g = Domain(1, 4.0, 64, "origin_log", log_levels=10)
    assert g.min_width < u.min_width / 500
    w = g.axis_widths[32:]
    assert np.all(np.diff(w[:11]) >= -1e-15)  # widths never shrink away from 0
    assert w[10] > 100 * w[0]


def test_origin_log_respects_floor():
    d = Domain(1, 1.0, 16, "origin_log", log_levels=200, min_cell=1e-6)
    assert d.min_width >= 1e-6


@pytest.mark.parametrize("kw", [dict(cells_per_axis=7), dict(cells_per_axis=0), dict(dim=3),
                                dict(half_width=-1.0), dict(refinement="cubic"),
                                dict(ratio=1.0)])
def test_domain_rejects_bad_fields(kw):
    with pytest.raises(ValueError):
        Domain(**kw)


def test_domain_2d_shapes():
    d = Domain(2, 1.0, 8)
    assert d.shape == (8, 8)
    assert d.midpoints.shape == (8, 8, 2)
    assert d.volumes.sum() == pytest.approx(4.0)


def test_locate_outside_is_negative():
    d = Domain(1, 1.0, 4)
    assert list(d.locate(np.array([-2.0, -0.9, 0.1, 0.99, 1.5]))) == [-1, 0, 2, 3, -1]


# ----------------------------------------------------------- SampledFunction


def test_sampled_function_validation():
    d = Domain(1, 1.0, 4)
    with pytest.raises(ValueError):
        SampledFunction(d, np.ones(5))
    with pytest.raises(ValueError):
        SampledFunction(d, np.array([1.0, np.inf, 0.0, 0.0]))
    f = SampledFunction(d, np.arange(4.0))
    with pytest.raises(ValueError):
        f.values[0] = 3.0


def test_sampled_function_zero_outside_and_arithmetic():
    d = Domain(1, 1.0, 4)
    f = SampledFunction.from_callable(d, lambda x: x)
    assert np.allclose(f.evaluate(np.array([-0.6, 0.3, 1.2])), [-0.75, 0.25, 0.0])
    g = 2 * abs(f) + f
    assert np.allclose(g.values, [0.75, 0.25, 0.75, 2.25])


# ------------------------------------------------------------ Ball / family


def test_ball_requires_positive_radius():
    with pytest.raises(ValueError):
        Ball((0.0,), 0.0)
    assert Ball((0.0, 0.0), 2.0).volume == pytest.approx(4 * math.pi)
    assert unit_ball_volume(1) == 2.0
    assert ball_volume(3.0, 1) == 6.0


def test_reduced_mode_drops_off_origin_large_balls():
    # reduced keeps origin-centred balls and those with r < |x|/4
    fam = BallFamily(np.array([[0.0], [1.0], [-2.0]]), np.array([0.1, 0.3, 1.0]), "reduced")
    kept = {(c, r) for c, r in zip(fam.pair_centers[:, 0], fam.pair_radii)}
    assert kept == {(0.0, 0.1), (0.0, 0.3), (0.0, 1.0), (1.0, 0.1), (-2.0, 0.1), (-2.0, 0.3)}


def test_family_contains_origin_and_dyadic_radii():
    d = Domain(1, 2.0, 8)
    fam = make_ball_family(d, 0.25, 3)
    assert np.allclose(fam.radii, [0.25, 0.5, 1.0, 2.0])
    assert any(np.all(c == 0) for c in fam.centers)
    assert len(fam) == (8 + 1) * 4


def test_family_radius_warning():
    d = Domain(1, 1.0, 4)
    with pytest.warns(UserWarning, match="radius range exceeds domain"):
        make_ball_family(d, 1.0, 5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        default_family(d)


def test_default_family_spans_cell_to_box():
    d = Domain(1, 4.0, 64, "origin_log", log_levels=6)
    fam = default_family(d)
    assert fam.radii[0] <= d.min_width < 2 * fam.radii[0]
    assert fam.radii[-1] >= 2 * d.half_width


# -------------------------------------------------------------- quadrature


def test_constant_times_linear_weight_is_r_squared():
    # [DERIVED] 2 r^(alpha+1)/(alpha+1) with alpha = 1
    d = Domain(1, 2.0, 16)
    one = SampledFunction.constant(d)
    for r in (0.3, 0.7, 1.0, 1.9):
        assert integrate_ball(one, Power(1.0), Ball((0.0,), r)) == pytest.approx(r * r, rel=1e-12)


def test_indicator_against_inverse_sqrt_weight_is_four():
    # [DERIVED] 2 r^(1/2) / (1/2) at r = 1
    d = Domain(1, 2.0, 16)
    f = SampledFunction.from_callable(d, lambda x: (np.abs(x) < 1).astype(float))
    assert integrate_ball(f, Power(-0.5), Ball((0.0,), 1.0)) == pytest.approx(4.0, rel=1e-12)
    assert integrate_ball(None, Power(-0.5), Ball((0.0,), 1.0)) == pytest.approx(4.0)


def test_non_integrable_weight_raises():
    d = Domain(1, 2.0, 16)
    with pytest.raises(NonIntegrableWeightError):
        integrate_ball(SampledFunction.constant(d), Power(-1.0), Ball((0.0,), 0.5))
    # a ball away from the singularity is fine
    assert math.isfinite(integrate_ball(SampledFunction.constant(d), Power(-1.0),
                                        Ball((1.0,), 0.5)))


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(-0.95, 2.0), c=st.floats(-1.5, 1.5), r=st.floats(0.01, 1.2),
       seed=st.integers(0, 2**16))
def test_ball_integrals_match_quadrature_oracle(alpha, c, r, seed):
    d = Domain(1, 2.0, 12, "origin_log", log_levels=3)
    g = np.random.default_rng(seed).random(12)
    got = ball_integrals(g, Power(alpha), d, np.array([[c]]), np.array([r]))[0]
    want = _oracle_ball_integral(g, d.axis_edges, alpha, c - r, c + r)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_ball_integrals_batched_matches_single():
    d = Domain(1, 2.0, 32)
    g = np.random.default_rng(0).random(32)
    centers = np.linspace(-1, 1, 7)[:, None]
    radii = np.linspace(0.1, 1.5, 7)
    batch = ball_integrals(g, Power(0.3), d, centers, radii)
    single = [ball_integrals(g, Power(0.3), d, c[None], np.array([r]))[0]
              for c, r in zip(centers, radii)]
    assert np.allclose(batch, single, rtol=1e-13)


def test_2d_singular_weight_mass():
    # [DERIVED] int_{|x|<1} |x|^-1 dx = 2 pi; polar rule near the singularity
    d = Domain(2, 2.0, 32)
    one = SampledFunction.constant(d)
    got = integrate_ball(one, Power(-1.0, (0.0, 0.0)), Ball((0.0, 0.0), 1.0))
    assert got == pytest.approx(2 * math.pi, rel=1e-2)
    assert integrate_ball(None, Power(-1.0, (0.0, 0.0)), Ball((0.0, 0.0), 1.0)) == \
        pytest.approx(2 * math.pi)


def test_2d_off_center_area():
    d = Domain(2, 2.0, 32)
    one = SampledFunction.constant(d)
    got = integrate_ball(one, Power(0.0, (0.0, 0.0)), Ball((0.37, -0.21), 1.0))
    assert got == pytest.approx(math.pi, rel=1e-3)
