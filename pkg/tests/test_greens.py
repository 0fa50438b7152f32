import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_legendre

from plasmodicke.geometry import SILVER, DrudeModel, Emitter, NanoSphere, NumericalControls
from plasmodicke.greens import (
    HBAR_C,
    ResonanceError,
    drude_permittivity,
    effective_dipole,
    free_projection,
    multipole_coefficient,
    multipole_coefficients,
    multipole_kernels,
    scattered_projection,
    total_projection,
    wavenumber,
)

SPHERE = NanoSphere(15.0)


def _potential(ra, rb, radius, n):
    """Independent oracle: R^(2n+1) P_n(cos g) / (|ra| |rb|)^(n+1) via scipy Legendre."""
    u, v = np.linalg.norm(ra), np.linalg.norm(rb)
    c = np.clip(ra @ rb / (u * v), -1, 1)
    return radius ** (2 * n + 1) * eval_legendre(n, c) / (u * v) ** (n + 1)


def _mixed_fd(ra, ea, rb, eb, radius, n, h=2e-2):
    """Central mixed difference with one Richardson step (error O(h^4))."""

    def central(step):
        tot = 0.0
        for sa in (1, -1):
            for sb in (1, -1):
                tot += sa * sb * _potential(ra + sa * step * ea, rb + sb * step * eb, radius, n)
        return tot / (4 * step * step)

    return (4 * central(h / 2) - central(h)) / 3


def _unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def test_drude_values():
    eps = drude_permittivity(SILVER, 2.77).value
    expected = 6.0 - 7.9**2 / (2.77**2 + 1j * 0.051 * 2.77)
    assert eps == pytest.approx(expected, rel=1e-15)
    assert eps.imag > 0


def test_drude_rejects_nonpositive():
    with pytest.raises(ValueError):
        drude_permittivity(SILVER, 0.0)


def test_multipole_coefficient_limits():
    # far below resonance the metal is a good conductor: Delta_n -> n(eps-1)/(n eps + n + 1) ~ 1
    low = multipole_coefficient(1, SPHERE, 0.05)
    assert abs(low - 1) < 0.05
    with pytest.raises(ValueError):
        multipole_coefficient(0, SPHERE, 2.0)


def test_lossless_resonance_raises():
    lossless = NanoSphere(15.0, DrudeModel(6.0, 7.9, 0.0))
    w1 = 7.9 / math.sqrt(8.0)
    with pytest.raises(ResonanceError):
        multipole_coefficient(1, lossless, w1)


def test_vectorised_coefficients_match_scalar():
    vec = multipole_coefficients(SPHERE, 2.9, 10)
    for n in range(1, 11):
        assert vec[n - 1] == pytest.approx(multipole_coefficient(n, SPHERE, 2.9), rel=1e-14)


def test_kernel_matches_finite_difference_oracle():
    rng = np.random.default_rng(7)
    for _ in range(20):
        ra = _unit(rng) * rng.uniform(18, 40)
        rb = _unit(rng) * rng.uniform(18, 40)
        ea, eb = _unit(rng), _unit(rng)
        ker = multipole_kernels(ra, ea, rb, eb, 15.0, 6)
        for n in range(1, 7):
            fd = _mixed_fd(ra, ea, rb, eb, 15.0, n)
            scale = max(abs(fd), abs(ker[n - 1]), 1e-12 * 15.0 ** (2 * n + 1) / 40 ** (2 * n + 4))
            assert abs(ker[n - 1] - fd) / scale < 1e-6


def test_image_dipole_closed_form():
    r = 35.0
    e = Emitter((0.0, 0.0, r), (0.0, 0.0, 1.0))
    w = 2.8
    val = scattered_projection(e, e, w, 1, sphere=SPHERE).value
    k0 = w / HBAR_C
    expected = 4 * multipole_coefficient(1, SPHERE, w) * 15.0**3 / r**6 / (4 * math.pi * k0**2)
    assert val == pytest.approx(expected, rel=1e-12)


def test_free_projection_series_oracle():
    k = wavenumber(2.77)
    r = 1.0 / k
    a = Emitter((0.0, 0.0, 30.0), (1.0, 0.0, 0.0))
    b = Emitter((0.0, 0.0, 30.0 + r), (1.0, 0.0, 0.0))
    val = free_projection(a, b, 2.77).value
    # exp(ix)(1 + (ix - 1)/x^2) / (4 pi r) at x = 1 from the Taylor series of exp
    x = 1.0
    series = sum((1j * x) ** m / math.factorial(m) for m in range(40))
    expected = series * (1 + (1j * x - 1) / x**2) / (4 * math.pi * r)
    assert val == pytest.approx(expected, rel=1e-12)


def test_free_coincident_value():
    e = Emitter((0.0, 0.0, 30.0), (0.0, 1.0, 0.0))
    k = wavenumber(2.77)
    assert free_projection(e, e, 2.77).value == pytest.approx(1j * k / (6 * math.pi))


def test_effective_dipole_branches():
    w = 2.77
    d1 = multipole_coefficient(1, SPHERE, w)
    r = 35.0
    rad = effective_dipole(Emitter((0.0, 0.0, r), (0.0, 0.0, 1.0)), SPHERE, w)
    np.testing.assert_allclose(rad, [0, 0, 1 + 2 * d1 * 15**3 / r**3], rtol=1e-14)
    tan = effective_dipole(Emitter((0.0, 0.0, r), (1.0, 0.0, 0.0)), SPHERE, w)
    np.testing.assert_allclose(tan, [1 - d1 * 15**3 / r**3, 0, 0], rtol=1e-14)


def test_emitter_inside_sphere_rejected():
    inside = Emitter((0.0, 0.0, 10.0), (0.0, 0.0, 1.0))
    outside = Emitter((0.0, 0.0, 30.0), (0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        scattered_projection(inside, outside, 2.77, sphere=SPHERE)


def test_mode_out_of_range():
    e = Emitter((0.0, 0.0, 30.0), (0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        scattered_projection(e, e, 2.77, 26, sphere=SPHERE)


def test_truncation_convergence():
    e1 = Emitter((0.0, 0.0, 35.0), (0.0, 0.0, 1.0))
    e2 = Emitter((35.0, 0.0, 0.0), (0.0, 0.0, 1.0))
    for a, b in ((e1, e1), (e1, e2), (e2, e2)):
        v25 = total_projection(a, b, 2.77, SPHERE, controls=NumericalControls(max_multipole=25)).value
        v50 = total_projection(a, b, 2.77, SPHERE, controls=NumericalControls(max_multipole=50)).value
        assert abs(v25.imag - v50.imag) / abs(v50.imag) < 1e-3


def test_large_order_kernel_is_finite():
    ker = multipole_kernels([0, 0, 15.01], [0, 0, 1], [0, 0, 15.01], [0, 0, 1], 15.0, 400)
    assert np.all(np.isfinite(ker))


positions = st.tuples(
    st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 1)
).map(lambda t: np.array(t) / np.linalg.norm(t))


@settings(max_examples=40, deadline=None)
@given(
    pa=positions,
    pb=positions,
    oa=positions,
    ob=positions,
    ha=st.floats(1.0, 30.0),
    hb=st.floats(1.0, 30.0),
    w=st.floats(2.0, 3.3),
)
def test_reciprocity(pa, pb, oa, ob, ha, hb, w):
    a = Emitter(tuple(pa * (15 + ha)), tuple(oa))
    b = Emitter(tuple(pb * (15 + hb)), tuple(ob))
    ab = total_projection(a, b, w, SPHERE).value
    ba = total_projection(b, a, w, SPHERE).value
    assert abs(ab - ba) <= 1e-12 * max(abs(ab), 1e-30)


@settings(max_examples=40, deadline=None)
@given(p=positions, o=positions, h=st.floats(1.0, 40.0), w=st.floats(1.5, 3.5))
def test_self_projection_absorbs(p, o, h, w):
    e = Emitter(tuple(p * (15 + h)), tuple(o))
    assert scattered_projection(e, e, w, sphere=SPHERE).value.imag > 0
