import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import catalog_metric, connection, diffeo, flat, metric, random_jet
from ehverify.catalog import CatalogSpec, make_diffeo
from ehverify.covariance import (
    DiffeoJet,
    density_jacobian_residual,
    levi_civita_pullback_residual,
    naturality_residual,
    palatini_variation,
    pullback_metric,
    scalar_invariance_residual,
    transform_connection,
    transform_tensor_12,
)
from ehverify.geometry import ConnectionJet, christoffel, difference_tensor
from ehverify.jets import JetPoly, OrderError, StructureError, common, max_abs, space
from ehverify.lagrangians import l_prime

seeds = st.integers(min_value=0, max_value=10_000)


def symmetric_tensor(seed, n, order):
    A = random_jet(np.random.default_rng(seed), n, order, shape=(n, n, n))
    return JetPoly(A.space, 0.5 * (A.coeffs + np.swapaxes(A.coeffs, 1, 2)))


# diffeomorphism action


def test_identity_pullback():
    g = metric(0, 3)
    out = pullback_metric(DiffeoJet.identity(3, 4), g)
    a, b = common(out.g, g.g)
    assert max_abs(a - b) <= 1e-15


def test_scaling_pullback():
    phi = make_diffeo(CatalogSpec("scaling_diffeo", {"factor": 2.0}, dim=3))
    out = pullback_metric(phi, catalog_metric("euclidean", 3))
    np.testing.assert_array_equal(out.g.value, 4 * np.eye(3))
    assert max_abs(out.g - out.g.value) == 0.0


def test_pullback_dimension_mismatch():
    with pytest.raises(StructureError):
        pullback_metric(DiffeoJet.identity(3, 4), metric(0, 4))


@given(seeds, st.booleans())
def test_scalar_curvature_invariant(seed, lorentzian):
    assert scalar_invariance_residual(diffeo(seed, 4), metric(seed, 4, lorentzian)) <= 1e-9


def test_identity_transform_of_connection():
    nab = connection(1, 3)
    out = transform_connection(DiffeoJet.identity(3, 4), nab)
    a, b = common(out.gamma, nab.gamma)
    assert max_abs(a - b) <= 1e-15


def test_flat_connection_through_quadratic_map():
    # Gamma' = J^-1 d d phi, which is 2 Q at the base point where J = 1
    rng = np.random.default_rng(3)
    Q = rng.normal(size=(3, 3, 3)) * 0.2
    Q = 0.5 * (Q + np.swapaxes(Q, 1, 2))
    phi = DiffeoJet.from_polynomial(np.eye(3), Q, order=4)
    out = transform_connection(phi, flat(3))
    np.testing.assert_allclose(out.gamma.value, 2 * Q, rtol=0, atol=1e-15)


def test_transform_connection_needs_second_jets():
    phi = DiffeoJet.from_polynomial(np.eye(3), order=1)
    with pytest.raises(OrderError):
        transform_connection(phi, flat(3))


@given(seeds, st.booleans())
def test_levi_civita_is_natural(seed, lorentzian):
    assert levi_civita_pullback_residual(diffeo(seed, 3), metric(seed, 3, lorentzian)) <= 1e-9


@given(seeds)
def test_density_transforms_with_jacobian(seed):
    assert density_jacobian_residual(diffeo(seed, 4), metric(seed, 4, seed % 2 == 1)) <= 1e-10


@given(seeds)
def test_diffeo_inverse(seed):
    phi = diffeo(seed, 3)
    both = phi.inverse().after(phi)
    assert max_abs(both.phi - DiffeoJet.identity(3, both.order).phi) <= 1e-12


# naturality of L'


def test_naturality_levi_civita():
    g = metric(2, 4, True)
    assert naturality_residual(diffeo(2, 4), g, christoffel(g)) <= 1e-12


@given(seeds)
def test_naturality_linear(seed):
    assert naturality_residual(diffeo(seed, 3, quadratic=0.0), metric(seed, 3), connection(seed, 3)) <= 1e-9


@given(seeds, st.booleans())
def test_naturality_nonlinear(seed, lorentzian):
    assert naturality_residual(diffeo(seed, 4), metric(seed, 4, lorentzian), connection(seed, 4)) <= 1e-8


def test_naturality_fails_for_non_tensorial_transport():
    # moving the connection as a tensor drops the d d phi term and breaks the identity
    g, nab, phi = metric(1, 3), connection(1, 3), diffeo(1, 3)
    T = transform_tensor_12(phi, nab.gamma)
    wrong = ConnectionJet(JetPoly(T.space, 0.5 * (T.coeffs + np.swapaxes(T.coeffs, 1, 2))))
    before = l_prime(g, nab).at_base()
    after = l_prime(pullback_metric(phi, g), wrong).at_base()
    assert abs(before - after) > 1e-3


# divergence form of the connection variation


def test_palatini_zero_variation():
    res = palatini_variation(metric(0, 3), JetPoly.zeros(space(3, 3), (3, 3, 3)))
    assert max_abs(res.integrand) == 0.0
    assert res.div_residual == 0.0


@given(seeds)
def test_palatini_random_tensor(seed):
    assert palatini_variation(metric(seed, 3), symmetric_tensor(seed, 3, 3)).div_residual <= 1e-9


@given(seeds, st.booleans())
def test_palatini_difference_tensor(seed, lorentzian):
    g = metric(seed, 4, lorentzian)
    T = difference_tensor(g, connection(seed, 4))
    res = palatini_variation(g, T)
    assert res.div_residual <= 1e-9
    assert abs(float(res.integrand.value)) > 1e-6


def test_palatini_shape_errors():
    g = metric(0, 3)
    with pytest.raises(StructureError):
        palatini_variation(g, JetPoly.zeros(space(3, 3), (3, 3)))
    A = symmetric_tensor(0, 3, 3)
    A.coeffs[0, 1, 2, 0] += 1.0
    with pytest.raises(StructureError):
        palatini_variation(g, A)
    with pytest.raises(OrderError):
        palatini_variation(metric(0, 3, order=1), symmetric_tensor(0, 3, 3))
