import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plasmodicke.geometry import Emitter, NanoSphere, NumericalControls, SystemConfig, place_pair, place_ring
from plasmodicke.modes import (
    CouplingSet,
    LSPMode,
    OverlapMatrix,
    coupling_strength,
    extract_modes,
    find_resonance,
    lowdin,
    overlap,
    weak_coupling_ratio,
)

SPHERE = NanoSphere(15.0)


def test_dipole_resonance_near_closed_form():
    mode = find_resonance(1, SPHERE)
    assert mode.omega_n == pytest.approx(7.9 / math.sqrt(8.0), rel=1e-4)
    assert mode.gamma_n == pytest.approx(0.051, rel=0.05)
    assert not mode.flagged


def test_resonances_increase_with_order():
    w = [find_resonance(n, SPHERE).omega_n for n in (1, 2, 3, 10)]
    assert np.all(np.diff(w) > 0)
    assert w[-1] < 7.9 / math.sqrt(7.0)


def test_bad_order():
    with pytest.raises(ValueError):
        find_resonance(0, SPHERE)


def test_radial_couples_twice_azimuthal():
    mode = find_resonance(1, SPHERE)
    rad = place_ring(1, 20.0, "radial", SPHERE)[0]
    az = place_ring(1, 20.0, "azimuthal", SPHERE)[0]
    assert coupling_strength(mode, rad, SPHERE) == pytest.approx(2 * coupling_strength(mode, az, SPHERE), rel=1e-10)


def test_coupling_linear_in_dipole():
    mode = find_resonance(2, SPHERE)
    e1 = Emitter((0.0, 0.0, 35.0), (0.0, 0.0, 1.0), 1.0)
    e3 = Emitter((0.0, 0.0, 35.0), (0.0, 0.0, 1.0), 3.0)
    assert coupling_strength(mode, e3, SPHERE) == pytest.approx(3 * coupling_strength(mode, e1, SPHERE), rel=1e-12)


def test_overlap_same_position_is_one():
    mode = find_resonance(3, SPHERE)
    e = Emitter((0.0, 0.0, 35.0), (0.0, 0.0, 1.0))
    assert overlap(mode, e, e, SPHERE) == pytest.approx(1.0, abs=1e-14)


def test_polar_overlap_alternates():
    ems = place_pair(math.pi, 2.0, SPHERE, "radial", 2.964)
    for n in range(1, 8):
        mode = find_resonance(n, SPHERE)
        assert overlap(mode, ems[0], ems[1], SPHERE) == pytest.approx((-1) ** n, abs=1e-10)


def test_overlap_vanishing_self_coupling():
    mode = find_resonance(1, SPHERE)
    a = Emitter((0.0, 0.0, 35.0), (0.0, 0.0, 1.0))
    zero = Emitter((0.0, 0.0, 35.0), (0.0, 0.0, 1.0), 1e-200)
    with pytest.raises(ValueError):
        overlap(mode, zero, a, SPHERE)


def _random_overlap(rng, n):
    vecs = rng.normal(size=(n, max(1, n - 1)))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return vecs @ vecs.T


def test_lowdin_reconstruction():
    rng = np.random.default_rng(3)
    mode = LSPMode(1, 2.79, 0.05, 0.0)
    for n in (2, 3, 6):
        mu = _random_overlap(rng, n)
        g = rng.uniform(0.01, 0.1, size=n)
        lt = lowdin(OverlapMatrix(1, mu), CouplingSet(mode, g))
        rec = lt.cross_couplings @ lt.cross_couplings.conj().T
        np.testing.assert_allclose(rec, np.outer(g, g) * mu, atol=1e-10 * g.max() ** 2)
        assert lt.n_independent == n - 1


def test_lowdin_identical_emitters_single_mode():
    mode = LSPMode(1, 2.79, 0.05, 0.0)
    lt = lowdin(OverlapMatrix(1, np.ones((3, 3))), CouplingSet(mode, np.full(3, 0.02)))
    assert lt.n_independent == 1
    assert lt.eigenvalues[0] == pytest.approx(3.0)


def test_lowdin_rejects_indefinite():
    mode = LSPMode(1, 2.79, 0.05, 0.0)
    with pytest.raises(ValueError):
        lowdin(OverlapMatrix(1, np.array([[1.0, 2.0], [2.0, 1.0]])), CouplingSet(mode, np.ones(2)))


def test_extract_modes_shapes(azimuthal_ring):
    cfg = azimuthal_ring.with_controls(max_multipole=5)
    ms = extract_modes(cfg)
    assert ms.g.shape == (5, 6) and ms.mu.shape == (5, 6, 6)
    for k in range(5):
        np.testing.assert_allclose(np.diag(ms.mu[k]), 1.0)
        assert np.linalg.eigvalsh(ms.mu[k]).min() > -1e-10


def test_weak_coupling_ratio_values(azimuthal_ring):
    ms = extract_modes(azimuthal_ring)
    assert weak_coupling_ratio(azimuthal_ring, ms) < 0.3
    close = SystemConfig(SPHERE, place_pair(math.pi, 2.0, SPHERE, "radial", 2.964))
    with pytest.warns(UserWarning, match="weak-coupling"):
        weak_coupling_ratio(close, extract_modes(close))


def test_kappa_profile_peaks_at_resonance():
    mode = LSPMode(1, 2.79, 0.05, 0.0)
    cs = CouplingSet(mode, np.array([0.1]))
    w = np.linspace(2.6, 3.0, 401)
    k = np.abs(cs.kappa(w))[:, 0]
    assert w[np.argmax(k)] == pytest.approx(2.79, abs=1e-3)


@settings(max_examples=20, deadline=None)
@given(h=st.floats(2.0, 60.0), n=st.integers(1, 6))
def test_coupling_decays_with_distance(h, n):
    mode = find_resonance(n, SPHERE, NumericalControls())
    near = Emitter((0.0, 0.0, 15 + h), (0.0, 0.0, 1.0))
    far = Emitter((0.0, 0.0, 15 + 2 * h), (0.0, 0.0, 1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert coupling_strength(mode, far, SPHERE) < coupling_strength(mode, near, SPHERE)
