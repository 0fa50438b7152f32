import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plasmodicke.geometry import Emitter, EmitterSet, NanoSphere, SystemConfig, place_pair, place_ring
from plasmodicke.greens import multipole_coefficient
from plasmodicke.modes import COULOMB
from plasmodicke.rates import (
    brightness_report,
    classical_eigenstates,
    collective_rates,
    free_space_rate,
    gamma_delta_matrices_modes,
    gamma_matrix_green,
    radiative_matrix,
    route_discrepancy,
    single_emitter_rate,
)

SPHERE = NanoSphere(15.0)


def test_free_space_rate_formula():
    # omega^3 d^2 / (3 pi eps0 hbar c^3) written with e^2/(4 pi eps0) and hbar c
    w = 2.77
    expected = 4.0 / 3.0 * COULOMB * w**3 / 197.3269804**3
    assert free_space_rate(w) == pytest.approx(expected, rel=1e-15)


def test_vacuum_limit():
    tiny = NanoSphere(1e-6)
    cfg = SystemConfig(tiny, place_ring(3, 20.0, "radial", tiny))
    g = gamma_matrix_green(cfg).gamma
    np.testing.assert_allclose(np.diag(g), 1.0, rtol=1e-10)


def test_radiative_gram_limit():
    tiny = NanoSphere(1e-6)
    ems = place_ring(4, 20.0, "radial", tiny)
    rad = radiative_matrix(SystemConfig(tiny, ems)).gamma_rad
    np.testing.assert_allclose(rad, ems.orientations @ ems.orientations.T, atol=1e-12)


def test_radiative_single_radial():
    cfg = SystemConfig(SPHERE, place_ring(1, 20.0, "radial", SPHERE))
    d1 = multipole_coefficient(1, SPHERE, 2.77)
    expected = abs(1 + 2 * d1 * 15**3 / 35**3) ** 2
    assert radiative_matrix(cfg).gamma_rad[0, 0] == pytest.approx(expected, rel=1e-12)


def test_coincident_pair_is_ideal():
    cfg = SystemConfig(SPHERE, place_pair(0.0, 20.0, SPHERE, "radial", 2.771))
    g = gamma_matrix_green(cfg).gamma
    assert g[0, 1] == g[0, 0]


def test_polar_pair_anticorrelated(polar_pair):
    g = gamma_matrix_green(polar_pair).gamma
    assert -1.1 <= g[0, 1] / g[0, 0] <= -0.8


def test_rate_matrices_invariants(azimuthal_ring, radial_ring):
    for cfg in (azimuthal_ring, radial_ring):
        r = collective_rates(cfg)
        assert r.check() == []


def test_route_agreement(azimuthal_ring, radial_ring, polar_pair):
    for cfg in (azimuthal_ring, radial_ring, polar_pair):
        green = gamma_matrix_green(cfg)
        modes = gamma_delta_matrices_modes(cfg)
        assert route_discrepancy(green, modes).max() < 0.02


def test_table2_single_mode_ratios(azimuthal_ring):
    expected = {1: 6.0, 2: 3.0, 3: 2.25}
    for n, val in expected.items():
        top = classical_eigenstates(azimuthal_ring, n, fixed_orientation=True)[0]
        assert top.ratio_gamma1 == pytest.approx(val, abs=0.02)


def test_eigen_sum_rule_two_emitters(polar_pair):
    states = classical_eigenstates(polar_pair, fixed_orientation=True)
    assert sum(s.ratio_gamma1 for s in states) == pytest.approx(2.0, abs=1e-10)


def test_eigenvalues_match_gamma_for_ring(azimuthal_ring):
    # circulant coupling: the real and imaginary parts commute, so the
    # classical decay rates are the eigenvalues of the decay matrix
    g = gamma_matrix_green(azimuthal_ring).gamma
    ev = np.sort(np.linalg.eigvalsh(g))[::-1]
    states = classical_eigenstates(azimuthal_ring, fixed_orientation=True)
    np.testing.assert_allclose([s.gamma_tot for s in states], ev, rtol=1e-8)


def test_free_orientation_states(azimuthal_ring):
    states = classical_eigenstates(azimuthal_ring)
    assert len(states) == 18
    for s in states:
        assert np.linalg.norm(s.dipole_pattern) == pytest.approx(1.0)
    rows = brightness_report(states, azimuthal_ring, top=3)
    assert [r["rank"] for r in rows] == [1, 2, 3]
    assert rows[0]["gamma_over_gamma1"] >= rows[1]["gamma_over_gamma1"]
    assert len(rows[0]["pattern"]) == 6


def test_radial_ring_dark_state(radial_ring):
    states = classical_eigenstates(radial_ring, fixed_orientation=True)
    assert states[-1].ratio_gamma1 < 0.05


def test_single_emitter_rate_consistent(azimuthal_ring):
    g = gamma_matrix_green(azimuthal_ring).gamma
    assert single_emitter_rate(azimuthal_ring, 2) == pytest.approx(g[2, 2], rel=1e-12)


def test_brightness_report_empty():
    with pytest.raises(ValueError):
        brightness_report([])


@settings(max_examples=50, deadline=None)
@given(
    theta=st.floats(0.05, math.pi),
    h=st.floats(2.0, 40.0),
    orientation=st.sampled_from(["radial", "azimuthal", "perpendicular"]),
    omega0=st.floats(2.6, 3.1),
)
def test_two_emitter_sum_rule(theta, h, orientation, omega0):
    cfg = SystemConfig(SPHERE, place_pair(theta, h, SPHERE, orientation, omega0))
    states = classical_eigenstates(cfg, fixed_orientation=True)
    g = gamma_matrix_green(cfg).gamma
    total = sum(s.gamma_tot for s in states) / g[0, 0]
    assert abs(total - 2.0) < 1e-10


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    n=st.integers(2, 5),
)
def test_random_configs_psd(seed, n):
    rng = np.random.default_rng(seed)
    ems = []
    for _ in range(n):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        o = rng.normal(size=3)
        ems.append(Emitter.make(d * (15 + rng.uniform(2, 40)), o))
    cfg = SystemConfig(SPHERE, EmitterSet(tuple(ems), 2.77))
    r = gamma_matrix_green(cfg)
    np.testing.assert_allclose(r.gamma, r.gamma.T, rtol=1e-12)
    assert np.linalg.eigvalsh(r.gamma).min() > -1e-9 * np.abs(r.gamma).max()
