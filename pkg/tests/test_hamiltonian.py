import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import catalog_metric, connection, diag_metric_jet, flat, metric
from ehverify.catalog import CatalogSpec, make_connection, make_metric
from ehverify.geometry import christoffel, scalar_curvature, volume_density
from ehverify.hamiltonian import (
    AdaptedPointError,
    UnsupportedDimensionError,
    canonical_residuals,
    congruence_frame,
    covariant_hamiltonian,
    covariant_hamiltonian_residual,
    first_jet_index,
    hamiltonian_h,
    hessian_closed_form,
    hessian_directional,
    hessian_numeric,
    legendre_invert_adapted,
    legendre_invert_general,
    momenta,
    momenta_at,
    pack,
    regularity_check,
)
from ehverify.jets import OrderError, gradient
from ehverify.lagrangians import FirstOrderNabla, l_nabla
from ehverify.variational import JetCoordinateView, finite_difference_partial

seeds = st.integers(min_value=0, max_value=10_000)


def adapted(seed, n=4, lorentzian=True):
    sig = (n - 1, 1) if lorentzian else (n, 0)
    g = make_metric(CatalogSpec("random_metric", {"seed": seed, "adapted": True}, dim=n, order=2, signature=sig))
    nab = make_connection(CatalogSpec("random_connection", {"seed": seed, "vanish_at_base": True}, dim=n, order=2))
    return g, nab


def rel_max(a, b):
    return float(np.abs(a - b).max()) / max(1.0, float(np.abs(b).max()))


# momenta


def test_momenta_vanish_for_constant_metric_and_flat_connection():
    p = momenta(diag_metric_jet([1.0, 2.0, -1.0], 3), flat(3))
    assert np.all(p.values == 0.0)
    assert p.values.shape == (18,)


@given(seeds, st.booleans())
def test_euler_relation_without_connection(seed, lorentzian):
    # L^nabla is quadratic in y_ij,k when Gamma = 0
    g = metric(seed, 3, lorentzian)
    p = momenta(g, flat(3))
    y1 = gradient(g.g).value
    L = l_nabla(g, flat(3)).at_base()
    assert abs(p.values @ pack(y1) - 2 * L) <= 1e-12 * max(1.0, abs(L))


@pytest.mark.parametrize("seed", range(3))
def test_momenta_match_finite_differences(seed):
    g, nab = metric(seed, 3, seed == 1), connection(seed, 3)
    p = momenta(g, nab)
    view = JetCoordinateView.from_metric(g, 0, second=False)
    lag = FirstOrderNabla(nab.gamma.truncate(1))
    for i, (a, b, c) in enumerate(first_jet_index(3)):
        fd = finite_difference_partial(lag, view, ("y1", a, b, c))
        assert abs(p.values[i] - fd) <= 1e-7 * max(1.0, abs(fd))
    assert p.get(1, 0, 2) == p.get(0, 1, 2)


# fiber Hessian


def test_hessian_hand_entries():
    H = hessian_closed_form(np.eye(3))
    assert H.entry((0, 0, 0), (0, 0, 0)) == 0.0
    assert H.entry((0, 1, 2), (0, 1, 2)) == pytest.approx(-1.0, abs=1e-15)


@given(seeds, st.booleans())
def test_hessian_symmetric(seed, lorentzian):
    M = hessian_closed_form(metric(seed, 4, lorentzian).g.value).matrix
    assert np.abs(M - M.T).max() <= 1e-12 * np.abs(M).max()


@pytest.mark.parametrize("n,lorentzian", [(3, False), (3, True), (4, False), (4, True), (5, True)])
def test_regularity(n, lorentzian):
    y0 = metric(n, n, lorentzian).g.value
    sig = (n - 1, 1) if lorentzian else (n, 0)
    reg = regularity_check(y0, sig)
    assert reg.invertible
    assert abs(reg.det) >= 1e-10


def test_regularity_rejects_two_dimensions():
    with pytest.raises(UnsupportedDimensionError):
        regularity_check(np.eye(2))
    with pytest.raises(UnsupportedDimensionError):
        legendre_invert_general(momenta(catalog_metric("polar_flat", 2), flat(2)))


@given(seeds, st.booleans())
def test_numeric_hessian_matches_closed_form(seed, lorentzian):
    g, nab = metric(seed, 3, lorentzian), connection(seed, 3)
    a = hessian_closed_form(g.g.value).matrix
    assert rel_max(hessian_numeric(g, nab).matrix, a) <= 1e-8


def test_hessian_independent_of_connection_and_first_jets():
    g = metric(3, 3)
    a = hessian_numeric(g, connection(3, 3)).matrix
    b = hessian_numeric(g, flat(3), y1=np.zeros((3, 3, 3))).matrix
    assert rel_max(a, b) <= 1e-10


def test_directional_hessian_matches_full():
    g, nab = metric(5, 4, True), connection(5, 4)
    M = hessian_numeric(g, nab).matrix
    rng = np.random.default_rng(0)
    U, V = rng.standard_normal((2, 6, len(M)))
    got = hessian_directional(g, nab, U, V)
    ref = np.einsum("ki,ij,kj->k", U, M, V)
    assert rel_max(got, ref) <= 1e-12


# Legendre inversion


def test_adapted_inversion_of_zero():
    g, nab = adapted(0)
    # Gamma(0) = 0 and a constant metric give zero momenta
    y0 = g.g.value
    p = momenta_at(y0, np.zeros((4, 4, 4)), nab)
    assert np.all(legendre_invert_adapted(p) == 0.0)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("n,lorentzian", [(3, False), (4, True), (5, True)])
def test_adapted_round_trip(seed, n, lorentzian):
    g, nab = adapted(seed, n, lorentzian)
    p = momenta(g, nab)
    y1 = gradient(g.g).value
    assert rel_max(legendre_invert_adapted(p), y1) <= 1e-10
    assert rel_max(legendre_invert_adapted(p), legendre_invert_general(p, nab=nab)) <= 1e-9


def test_as_printed_formulas_do_not_round_trip():
    g, nab = adapted(1)
    p = momenta(g, nab)
    y1 = gradient(g.g).value
    assert rel_max(legendre_invert_adapted(p, formulas="as_printed"), y1) > 1e-3
    with pytest.raises(ValueError):
        legendre_invert_adapted(p, formulas="other")


def test_adapted_inversion_needs_adapted_point():
    with pytest.raises(AdaptedPointError):
        legendre_invert_adapted(momenta(metric(0, 4), flat(4)))
    g, _ = adapted(0)
    with pytest.raises(AdaptedPointError):
        legendre_invert_adapted(momenta(g, connection(0, 4)))


@given(seeds, st.booleans())
def test_general_round_trip(seed, lorentzian):
    g, nab = metric(seed, 4, lorentzian), connection(seed, 4)
    y1 = gradient(g.g).value
    assert rel_max(legendre_invert_general(momenta(g, nab), g, nab), y1) <= 1e-9


def test_schwarzschild_recovery():
    g, nab = catalog_metric("schwarzschild"), connection(1, 4)
    y1 = gradient(g.g).value
    assert rel_max(legendre_invert_general(momenta(g, nab), g, nab), y1) <= 1e-9


# Hamiltonians


def test_h_vanishes_for_constant_metric():
    assert hamiltonian_h(diag_metric_jet([1.0, 1.0, -1.0], 2), flat(3)) == 0.0


@given(seeds)
def test_h_equals_lagrangian_without_connection(seed):
    g = metric(seed, 3)
    L = l_nabla(g, flat(3)).at_base()
    assert abs(hamiltonian_h(g, flat(3)) - L) <= 1e-12 * max(1.0, abs(L))


@given(seeds)
def test_covariant_hamiltonian_reduces_for_flat_connection(seed):
    g = metric(seed, 4, True)
    a, b = covariant_hamiltonian(g, flat(4)), hamiltonian_h(g, flat(4))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(b))


@given(seeds, st.booleans())
def test_covariant_hamiltonian_identity(seed, lorentzian):
    assert covariant_hamiltonian_residual(metric(seed, 4, lorentzian), connection(seed, 4)) <= 1e-9


def test_covariant_hamiltonian_levi_civita():
    g = metric(2, 4, True)
    nab = christoffel(g)
    rho = float(volume_density(g).value)
    s = float(scalar_curvature(g).value)
    ref = l_nabla(g, nab).at_base() - 2 * rho * s
    assert abs(covariant_hamiltonian(g, nab) - ref) <= 1e-10 * max(1.0, abs(ref))


# canonical equations


@pytest.mark.parametrize("seed", range(3))
def test_kinematic_equation(seed):
    res = canonical_residuals(metric(seed, 4, True), connection(seed, 4), dynamic=False)
    assert res.r2 <= 1e-6
    assert res.r2_gamma <= 1e-6
    assert np.isnan(res.r1)


def test_dynamic_equation_schwarzschild():
    res = canonical_residuals(catalog_metric("schwarzschild"), flat(4))
    assert res.r1 <= 1e-5
    assert res.r2 <= 1e-6
    # no connection: the covariant variant is the same computation
    assert res.r1 == res.r1_gamma and res.r2 == res.r2_gamma
    assert canonical_residuals(catalog_metric("schwarzschild"), connection(0, 4)).r1_gamma <= 1e-5


def test_dynamic_equation_fails_off_shell():
    res = canonical_residuals(metric(0, 4, True), flat(4))
    assert res.r1 > 1e-3


def test_canonical_needs_order_two():
    with pytest.raises(OrderError):
        canonical_residuals(metric(0, 4, order=1), flat(4))


@pytest.mark.parametrize("lorentzian", [False, True])
def test_congruence_frame(lorentzian):
    y0 = metric(4, 4, lorentzian).g.value
    E, eps = congruence_frame(y0)
    np.testing.assert_allclose(E.T @ y0 @ E, np.diag(eps), rtol=0, atol=1e-12)
    assert list(eps) == ([1.0, 1.0, 1.0, -1.0] if lorentzian else [1.0] * 4)


def test_momenta_table_serialises():
    d = momenta(metric(0, 3), connection(0, 3)).to_dict()
    assert d["n"] == 3 and len(d["p"]) == len(d["index"]) == 18
    assert hessian_closed_form(np.eye(3)).to_dict()["n"] == 3
