import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from moclab.quadrature import (
    SmoothCutoff,
    gauss_legendre,
    graded_edges,
    integrate_panels,
    oscillation_resolved_edges,
    panel_nodes,
    quad_decaying,
    quad_log,
)


def test_gauss_legendre_polynomial_exactness():
    # order-n rule must integrate degree 2n-1 exactly
    x, w = gauss_legendre(8)
    for deg in range(0, 16):
        exact = (1.0 - (-1.0) ** (deg + 1)) / (deg + 1)
        assert_allclose(np.dot(w, x ** deg), exact, atol=1e-14)


def test_gauss_legendre_cached_identity():
    assert gauss_legendre(12)[0] is gauss_legendre(12)[0]


def test_panel_nodes_sin():
    edges = np.array([0.0, 1.5, math.pi])
    x, w = panel_nodes(edges, 16)
    assert x.size == 32
    assert_allclose(np.dot(w, np.sin(x)), 2.0, rtol=1e-14)


def test_integrate_panels_matches_panel_nodes():
    edges = np.linspace(0.0, 2.0, 7)
    val = integrate_panels(np.exp, edges, order=12)
    assert_allclose(val, math.expm1(2.0), rtol=1e-13)


def test_graded_edges_geometric_toward_left():
    e = graded_edges(0.0, 1.0, 4)
    assert_allclose(e, [0.0625, 0.125, 0.25, 0.5, 1.0])
    # leftmost edge sits span/2^levels from a; the open core is the caller's
    assert e[0] > 0.0


def test_quad_log_endpoint_singularity():
    val, err = quad_log(lambda x: math.log(1.0 / x), 1e-30, 1.0)
    assert_allclose(val, 1.0, rtol=1e-12)
    assert err < 1e-10


def test_quad_decaying_exponential_tail():
    val, err = quad_decaying(lambda r: math.exp(-r), 1.0)
    assert_allclose(val, math.exp(-1.0), rtol=1e-11)


def test_smooth_cutoff_shape():
    c = SmoothCutoff(1.0, 2.0)
    assert c(0.5) == 1.0 and c(1.0) == 1.0
    assert c(2.0) == 0.0 and c(3.0) == 0.0
    assert_allclose(c(1.5), 0.5, atol=1e-14)
    r = np.linspace(1.0, 2.0, 101)
    v = np.asarray(c(r))
    assert np.all(np.diff(v) <= 1e-15)


def test_oscillation_resolved_edges_resolve_period():
    freq = 10.0
    e = oscillation_resolved_edges(1.0, 5.0, freq, panels_per_period=4.0)
    assert e[0] == 1.0 and e[-1] == pytest.approx(5.0)
    assert np.max(np.diff(e)) <= 2.0 * math.pi / freq / 4.0 + 1e-12
