import math

import numpy as np
from numpy.testing import assert_allclose

from moclab.fields import ScalarField1D, ScalarField2D, dealias_cutoff


def test_from_function_and_norms():
    f = ScalarField1D.from_function(256, np.sin)
    assert f.linf() == 1.0  # N divisible by 4 puts a node at pi/2
    assert_allclose(f.l2(), math.sqrt(math.pi), rtol=1e-12)
    assert abs(f.mean()) < 1e-15
    assert_allclose(f.grad_linf(), 1.0, rtol=1e-10)


def test_derivative_is_spectral():
    f = ScalarField1D.from_function(128, np.sin)
    assert_allclose(f.derivative().values, np.cos(f.grid), atol=1e-12)


def test_evaluate_at_is_trig_interpolation():
    f = ScalarField1D.from_function(64, lambda x: np.sin(3.0 * x))
    pts = np.array([0.1234, 2.5, 6.0])
    assert_allclose(f.evaluate_at(pts), np.sin(3.0 * pts), atol=1e-12)


def test_apply_multiplier_pure_mode():
    f = ScalarField1D.from_function(64, lambda x: np.sin(3.0 * x))
    g = f.apply_multiplier(lambda k: k)
    assert_allclose(g.values, 3.0 * f.values, atol=1e-12)


def test_random_band_limited_contract():
    f = ScalarField1D.random_band_limited(256, kmax=20, amplitude=0.7, seed=5)
    assert_allclose(f.linf(), 0.7, rtol=1e-14)  # sup normalized to amplitude
    k = np.abs(np.fft.fftfreq(256, d=1.0 / 256))
    spec = np.fft.fft(f.values)
    assert np.max(np.abs(spec[k > 20])) < 1e-12 * np.max(np.abs(spec))
    again = ScalarField1D.random_band_limited(256, kmax=20, amplitude=0.7, seed=5)
    assert np.array_equal(f.values, again.values)
    other = ScalarField1D.random_band_limited(256, kmax=20, amplitude=0.7, seed=6)
    assert not np.array_equal(f.values, other.values)


def test_random_band_limited_odd():
    f = ScalarField1D.random_band_limited(128, kmax=8, amplitude=1.0, seed=0,
                                          odd=True)
    assert f.is_odd()
    v = f.values
    assert_allclose(v[1:], -v[1:][::-1], atol=1e-12)


def test_spectral_tail_fraction_band_limited():
    f = ScalarField1D.random_band_limited(256, kmax=10, amplitude=1.0, seed=3)
    assert f.spectral_tail_fraction() < 1e-12


def test_dealias_cutoff():
    assert dealias_cutoff(768) == 256
    assert dealias_cutoff(64) == 21


def test_2d_basics():
    f = ScalarField2D.from_function(
        64, lambda x, y: np.sin(x) * np.cos(2.0 * y))
    assert_allclose(f.linf(), 1.0, rtol=1e-12)
    g = ScalarField1D.grid_of(64)
    gx, _ = f.gradient()
    assert_allclose(gx.values, np.cos(g)[:, None] * np.cos(2.0 * g)[None, :],
                    atol=1e-12)
    pts = np.array([[0.3, 1.1], [4.0, 0.2]])
    assert_allclose(f.evaluate_at(pts),
                    np.sin(pts[:, 0]) * np.cos(2.0 * pts[:, 1]), atol=1e-12)


def test_2d_random_band_limited():
    f = ScalarField2D.random_band_limited(32, kmax=8, amplitude=0.7, seed=1)
    assert_allclose(f.linf(), 0.7, rtol=1e-14)
    assert f.spectral_tail_fraction() < 1e-12
    kk = f.wavenumber_modulus()
    spec = f.spec
    assert np.max(np.abs(spec[kk > 8.0 * math.sqrt(2.0) + 1e-9])) \
        < 1e-12 * np.max(np.abs(spec))
