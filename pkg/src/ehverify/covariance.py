"""Diffeomorphism action on metric and connection jets, naturality of ``L'``,
and the divergence form of the connection-variation integrand.

A :class:`DiffeoJet` maps offsets from its source base point to offsets
from its target base point, so every component has zero constant term and
composes directly with jets based at the target.

On the connection variation: pointwise, ``rho c(alt_23(nabla^g A)^sharp)``
equals ``D_j(rho V^j)`` with ``V^j = g^jr A^i_ri - g^ir A^j_ri``, so on a
closed manifold the first variation of the action with respect to the
connection vanishes for every ``A``.  This module verifies the pointwise
identity only; it takes no position on the claim that an independent
connection variation leads to a contradiction.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .geometry import (
    ConnectionJet,
    MetricJet,
    christoffel,
    determinant,
    inverse_matrix,
    scalar_curvature,
    volume_density,
)
from .jets import (
    JetPoly,
    OrderError,
    SingularityError,
    StructureError,
    common,
    compose,
    contract,
    gradient,
    identity_map,
    max_abs,
    space,
    stack,
)
from .lagrangians import alt23_contraction, l_eh_christoffel, l_prime, residual_scale


@dataclass(frozen=True)
class DiffeoJet:
    """``phi[a]`` = jet of the a-th component of the map, as offsets."""

    phi: JetPoly
    source_point: tuple | None = None
    target_point: tuple | None = None

    def __post_init__(self):
        phi = self.phi
        if phi.shape != (phi.n,):
            raise StructureError(f"diffeo jet needs shape ({phi.n},), got {phi.shape}")
        if phi.space.nil != 0:
            raise StructureError("diffeo jets are plain jets")
        if phi.order < 1:
            raise OrderError("diffeo jet needs usable order >= 1")
        if np.any(phi.value != 0):
            raise StructureError("diffeo components must vanish at the source base point")
        if abs(np.linalg.det(self.linear_part)) < 1e-12:
            raise SingularityError("Jacobian of the diffeomorphism is singular at the base point")

    @classmethod
    def from_polynomial(cls, A, Q=None, order: int = 5, source_point=None, target_point=None) -> "DiffeoJet":
        """``phi^a(x) = A^a_b x^b + Q^a_bc x^b x^c``."""
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        sp = space(n, order)
        c = np.zeros((n, sp.size))
        for b in range(n):
            e = [0] * n
            e[b] = 1
            c[:, sp.index(e)] += A[:, b]
        if Q is not None and order >= 2:
            Q = np.asarray(Q, dtype=float)
            for b in range(n):
                for cc in range(n):
                    e = [0] * n
                    e[b] += 1
                    e[cc] += 1
                    c[:, sp.index(e)] += Q[:, b, cc]
        return cls(JetPoly(sp, c), source_point, target_point)

    @classmethod
    def identity(cls, n: int, order: int) -> "DiffeoJet":
        return cls(stack(identity_map(n, order)))

    @property
    def n(self) -> int:
        return self.phi.n

    @property
    def order(self) -> int:
        return self.phi.order

    @property
    def linear_part(self) -> np.ndarray:
        return gradient(self.phi).primal().value

    @functools.cached_property
    def jacobian(self) -> JetPoly:
        """``J[a, b] = d_b phi^a`` (usable order one less than ``phi``)."""
        return gradient(self.phi)

    def components(self) -> list[JetPoly]:
        return [self.phi[a] for a in range(self.n)]

    def after(self, other: "DiffeoJet") -> "DiffeoJet":
        """``self o other``."""
        return DiffeoJet(compose(self.phi, other.components()), other.source_point, self.target_point)

    def inverse(self) -> "DiffeoJet":
        """Order-by-order inverse by the fixed point ``psi = A^-1 (y - N(psi))``."""
        n, D = self.n, self.order
        A_inv = np.linalg.inv(self.linear_part)
        psi = contract("ab,b->a", A_inv, stack(identity_map(n, 1)))
        # each pass fixes one more order, so it runs at that order only
        for k in range(2, D + 1):
            y = stack(identity_map(n, k))
            nonlin = self.phi.truncate(k) - contract("ab,b->a", self.linear_part, y)
            prev = JetPoly(space(n, k), np.zeros((n, space(n, k).size)))
            prev.coeffs[:, : psi.space.size] = psi.coeffs
            N = compose(nonlin, [prev[a] for a in range(n)])
            psi = contract("ab,b->a", A_inv, y - N)
        return DiffeoJet(psi, self.target_point, self.source_point)


def _g(g) -> JetPoly:
    return g.g if isinstance(g, MetricJet) else g


def _gamma(nab) -> JetPoly:
    return nab.gamma if isinstance(nab, ConnectionJet) else nab


def pullback_metric(phi: DiffeoJet, g) -> MetricJet:
    """``(phi^* g)_ab = (g_cd o phi) J^c_a J^d_b`` as a jet at the source point."""
    gj = _g(g)
    if gj.n != phi.n:
        raise StructureError("diffeo and metric dimensions differ")
    if isinstance(g, MetricJet) and phi.target_point is not None and g.base_point is not None:
        if not np.allclose(phi.target_point, g.base_point, rtol=0, atol=1e-12):
            raise StructureError("metric is not based at the target point of the diffeomorphism")
    moved = compose(gj, phi.components())
    moved, J = common(moved, phi.jacobian)
    out = contract("cd,ca,db->ab", moved, J, J)
    out = JetPoly(out.space, 0.5 * (out.coeffs + np.swapaxes(out.coeffs, -2, -3)))
    signature = g.signature if isinstance(g, MetricJet) else None
    if signature is None:
        from .geometry import count_signature

        signature = count_signature(out.primal().value)
    return MetricJet(out, tuple(signature), phi.source_point)


def transform_connection(phi: DiffeoJet, nab) -> ConnectionJet:
    """Coefficients of the pulled-back connection at the source point.

    ``G'^i_jk = (J^-1)^i_l (G^l_mn(phi) J^m_j J^n_k + d_j d_k phi^l)``.
    """
    G = _gamma(nab)
    if G.n != phi.n:
        raise StructureError("diffeo and connection dimensions differ")
    if phi.order < 2:
        raise OrderError("transforming a connection consumes two derivatives of the diffeomorphism")
    hess = gradient(phi.jacobian)  # hess[l, j, k] = d_k d_j phi^l
    moved = compose(G, phi.components())
    moved, J, hess = common(moved, phi.jacobian, hess)
    Jinv = inverse_matrix(J)
    inner = contract("lmn,mj,nk->ljk", moved, J, J) + hess
    out = contract("il,ljk->ijk", Jinv, inner)
    return ConnectionJet(JetPoly(out.space, 0.5 * (out.coeffs + np.swapaxes(out.coeffs, -2, -3))))


def transform_tensor_12(phi: DiffeoJet, T: JetPoly) -> JetPoly:
    """Tensorial law for a (1,2) tensor ``T[h, a, b]``: ``J^-1 (T o phi) J J``."""
    moved = compose(T, phi.components())
    moved, J = common(moved, phi.jacobian)
    return contract("il,lmn,mj,nk->ijk", inverse_matrix(J), moved, J, J)


def naturality_residual(phi: DiffeoJet, g, nab) -> float:
    """``|L'(g, nab)`` at the target ``- L'(phi^* g, phi^-1 . nab)`` at the source``|``, scale-normalised."""
    gj = _g(g)
    before = l_prime(gj, nab, "geometric").at_base()
    g2 = pullback_metric(phi, g)
    nab2 = transform_connection(phi, nab)
    after = l_prime(g2, nab2, "geometric").at_base()
    return abs(before - after) / residual_scale(l_eh_christoffel(gj).at_base(), before)


def scalar_invariance_residual(phi: DiffeoJet, g) -> float:
    """``|s^g - s^{phi^* g}|`` at corresponding base points."""
    s1 = float(scalar_curvature(_g(g)).primal().value)
    s2 = float(scalar_curvature(pullback_metric(phi, g)).primal().value)
    return abs(s1 - s2) / max(1.0, abs(s1))


def density_jacobian_residual(phi: DiffeoJet, g) -> float:
    """Max coefficient of ``rho(phi^* g) - |det J| (rho o phi)`` relative to ``rho``."""
    gj = _g(g)
    rho = volume_density(gj)
    left = volume_density(pullback_metric(phi, g))
    detJ = determinant(phi.jacobian)
    moved, detJ = common(compose(rho, phi.components()), detJ)
    right = moved * detJ * float(np.sign(detJ.value))
    left, right = common(left, right)
    return max_abs(left - right) / max(1.0, float(abs(rho.value)))


@dataclass(frozen=True)
class PalatiniResult:
    integrand: JetPoly
    divergence: JetPoly
    div_residual: float


def palatini_vector(g, A: JetPoly) -> JetPoly:
    """``rho V^j`` with ``V^j = g^jr A^i_ri - g^ir A^j_ri``."""
    gj = _g(g)
    ginv = inverse_matrix(gj)
    rho = volume_density(gj)
    ginv, rho, A = common(ginv, rho, A)
    V = contract("jr,iri->j", ginv, A) - contract("ir,jri->j", ginv, A)
    return V * JetPoly(rho.space, rho.coeffs[..., None, :])


def palatini_variation(g, A) -> PalatiniResult:
    """Integrand ``rho c(alt_23(nabla^g A)^sharp)`` of the connection variation and its divergence form."""
    gj = _g(g)
    A = _gamma(A)
    if A.shape[-3:] != (gj.n,) * 3:
        raise StructureError(f"variation tensor needs shape ({gj.n}, {gj.n}, {gj.n}), got {A.shape}")
    if not np.allclose(A.coeffs, np.swapaxes(A.coeffs, -2, -3), rtol=0, atol=0):
        raise StructureError("variation tensor must be symmetric in its lower indices")
    if gj.order < 2 or A.order < 1:
        raise OrderError("the variation integrand needs metric order >= 2 and tensor order >= 1")
    c, rho = common(alt23_contraction(gj, A), volume_density(gj))
    integrand = c * rho
    W = palatini_vector(gj, A)
    div = sum((W[j].partial(j) for j in range(gj.n)), start=JetPoly.zeros(space(gj.n, W.order - 1)))
    scale = max(1.0, float(abs(integrand.value)))
    return PalatiniResult(integrand, div, abs(float(integrand.value) - float(div.value)) / scale)


def levi_civita_pullback_residual(phi: DiffeoJet, g) -> float:
    """``phi^-1 . nabla^g`` against ``nabla^{phi^* g}``, max coefficient difference."""
    a = transform_connection(phi, christoffel(g)).gamma
    b = christoffel(pullback_metric(phi, g)).gamma
    a, b = common(a, b)
    return max_abs(a - b)
