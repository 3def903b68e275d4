import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import catalog_metric, connection, diag_metric_jet, diffeo, flat, metric
from ehverify.catalog import CatalogSpec, closed_form
from ehverify.covariance import pullback_metric, transform_connection, transform_tensor_12
from ehverify.geometry import (
    ConnectionJet,
    MetricJet,
    christoffel,
    count_signature,
    difference_tensor,
    inverse_metric,
    metricity,
    pair_scalar_curvature,
    scalar_curvature,
    volume_density,
)
from ehverify.jets import (
    JetPoly,
    OrderError,
    SingularityError,
    StructureError,
    common,
    contract,
    gradient,
    max_abs,
    reciprocal,
    space,
)
from ehverify.oracles import pair_scalar_from_ricci, scalar_curvature_fd

seeds = st.integers(min_value=0, max_value=10_000)


def x(n, order, i):
    return JetPoly.variable(space(n, order), i)


def test_inverse_minkowski():
    g = catalog_metric("minkowski")
    np.testing.assert_array_equal(inverse_metric(g).coeffs, g.g.coeffs)


def test_inverse_geometric_series():
    g = diag_metric_jet([1 + 2 * x(3, 4, 0), 1.0, 1.0], 4)
    inv = inverse_metric(g)
    ref = reciprocal(1 + 2 * x(3, 4, 0))
    np.testing.assert_allclose(inv[0, 0].coeffs, ref.coeffs, rtol=0, atol=1e-13)
    assert inv[0, 0].coefficient((3, 0, 0)) == pytest.approx(-8.0)


@given(seeds, st.booleans())
def test_inverse_self_consistent(seed, lorentzian):
    g = metric(seed, 4, lorentzian)
    a, b = common(g.g, inverse_metric(g))
    prod = contract("ij,jk->ik", a, b)
    assert max_abs(prod - JetPoly.constant(prod.space, np.eye(4))) <= 1e-12


def test_volume_density_flat():
    assert max_abs(volume_density(catalog_metric("euclidean", 3)) - 1.0) == 0.0
    assert max_abs(volume_density(catalog_metric("minkowski")) - 1.0) == 0.0


@given(seeds, st.booleans())
def test_density_derivative_identity(seed, lorentzian):
    g = metric(seed, 3, lorentzian)
    rho = volume_density(g)
    d_rho = gradient(rho)
    dg = gradient(g.g)
    ginv = inverse_metric(g)
    d_rho, rho, dg, ginv = common(d_rho, rho, dg, ginv)
    rhs = contract("rs,rsi->i", ginv, dg) * JetPoly(rho.space, rho.coeffs[None] * 0.5)
    assert max_abs(d_rho - rhs) <= 1e-11


def test_degenerate_metric_rejected():
    sp = space(2, 2)
    c = np.zeros((2, 2, sp.size))
    c[0, 0, 0] = 1.0
    with pytest.raises(SingularityError):
        MetricJet(JetPoly(sp, c), (2, 0))


def test_signature_mismatch_rejected():
    sp = space(2, 1)
    c = np.zeros((2, 2, sp.size))
    c[0, 0, 0], c[1, 1, 0] = 1.0, -1.0
    with pytest.raises(StructureError):
        MetricJet(JetPoly(sp, c), (2, 0))


def test_asymmetric_metric_rejected():
    sp = space(2, 1)
    c = np.zeros((2, 2, sp.size))
    c[0, 0, 0] = c[1, 1, 0] = 1.0
    c[0, 1, 1] = 0.1
    with pytest.raises(StructureError):
        MetricJet(JetPoly(sp, c), (2, 0))


def test_constant_metric_has_zero_christoffel():
    g = diag_metric_jet([2.0, 3.0, -1.0], 3)
    assert max_abs(christoffel(g).gamma) == 0.0


def test_christoffel_of_stretched_axis():
    x1 = x(3, 4, 0)
    g = diag_metric_jet([1 + 2 * x1, 1.0, 1.0], 4)
    G = christoffel(g).gamma
    assert G[0, 0, 0].value == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(G[0, 0, 0].coeffs, reciprocal(1 + 2 * x(3, 3, 0)).coeffs, rtol=0, atol=1e-13)


def test_polar_flat_has_curvature_free_connection():
    g = catalog_metric("polar_flat", 2)
    assert max_abs(christoffel(g).gamma) > 0.5
    assert abs(float(scalar_curvature(g).value)) <= 1e-13
    # all of the curvature jet vanishes, not just its value
    assert max_abs(scalar_curvature(g)) <= 1e-12


def test_scalar_curvature_minkowski():
    assert max_abs(scalar_curvature(catalog_metric("minkowski"))) == 0.0


def test_scalar_curvature_schwarzschild_vacuum():
    g = catalog_metric("schwarzschild")
    assert abs(float(scalar_curvature(g).value)) <= 1e-9
    spec = CatalogSpec("schwarzschild", dim=4)
    assert abs(scalar_curvature_fd(closed_form(spec), g.base_point)) <= 1e-6


@pytest.mark.parametrize("radius", [1.0, 0.5, 3.0])
def test_scalar_curvature_sphere(radius):
    g = catalog_metric("sphere", 2, radius=radius)
    s = float(scalar_curvature(g).value)
    assert s == pytest.approx(2 / radius**2, rel=1e-12)
    fd = scalar_curvature_fd(closed_form(CatalogSpec("sphere", {"radius": radius}, dim=2)), g.base_point)
    assert fd == pytest.approx(s, rel=1e-6)


@pytest.mark.parametrize("n", [3, 4])
def test_scalar_curvature_de_sitter_matches_fd(n):
    g = catalog_metric("de_sitter", n, H=0.7)
    s = float(scalar_curvature(g).value)
    assert s == pytest.approx(n * (n - 1) * 0.49, rel=1e-12)
    fd = scalar_curvature_fd(closed_form(CatalogSpec("de_sitter", {"H": 0.7}, dim=n)), g.base_point)
    assert fd == pytest.approx(s, rel=1e-6)


def test_scalar_curvature_needs_order_two():
    with pytest.raises(OrderError):
        scalar_curvature(metric(0, 3, order=1))


def test_difference_tensor_of_levi_civita_vanishes():
    g = metric(3, 4)
    assert max_abs(difference_tensor(g, christoffel(g))) == 0.0


def test_difference_tensor_flat_is_christoffel():
    g = metric(4, 3)
    T = difference_tensor(g, flat(3))
    lc, T = common(christoffel(g).gamma, T)
    np.testing.assert_array_equal(T.coeffs, lc.coeffs)


def test_difference_tensor_shape_mismatch():
    with pytest.raises(StructureError):
        difference_tensor(metric(0, 3), connection(0, 4))


@given(seeds)
def test_difference_tensor_is_tensorial(seed):
    g, nab = metric(seed, 3), connection(seed, 3)
    phi = diffeo(seed, 3, quadratic=0.0)
    left = difference_tensor(pullback_metric(phi, g), transform_connection(phi, nab))
    right = transform_tensor_12(phi, difference_tensor(g, nab))
    left, right = common(left, right)
    assert max_abs(left - right) <= 1e-10


def test_pair_scalar_flat_connection_vanishes():
    assert max_abs(pair_scalar_curvature(metric(1, 4), flat(4))) == 0.0


@given(seeds, st.booleans())
def test_pair_scalar_of_levi_civita(seed, lorentzian):
    g = metric(seed, 4, lorentzian)
    a = float(pair_scalar_curvature(g, christoffel(g)).value)
    b = float(scalar_curvature(g).value)
    assert abs(a - b) <= 1e-11 * max(1.0, abs(b))


@given(seeds)
def test_pair_scalar_matches_ricci_contraction(seed):
    g, nab = metric(seed, 4, seed % 2 == 1), connection(seed, 4)
    a = float(pair_scalar_curvature(g, nab).value)
    b = pair_scalar_from_ricci(g, nab.gamma)
    assert abs(a - b) <= 1e-10 * max(1.0, abs(b))


def test_metricity_of_levi_civita():
    g = metric(8, 4, True)
    assert max_abs(metricity(g, christoffel(g))) <= 1e-13
    assert max_abs(metricity(g, connection(8, 4))) > 1e-3


def test_connection_symmetry_enforced():
    sp = space(3, 1)
    c = np.zeros((3, 3, 3, sp.size))
    c[0, 1, 2, 0] = 1.0
    with pytest.raises(StructureError):
        ConnectionJet(JetPoly(sp, c))


def test_count_signature():
    assert count_signature(np.diag([1.0, -2.0, 3.0])) == (2, 1)
    assert math.isclose(float(volume_density(diag_metric_jet([4.0, -1.0], 2)).value), 2.0)
