"""Metric-level differential geometry on jets.

Index conventions: ``g[..., i, j] = g_ij``; connection coefficients are
stored as ``gamma[..., i, j, k] = Gamma^i_jk`` (upper index first); a
derivative index is appended last, so ``dg[i, j, k] = d_k g_ij``.
All indices are 0-based in code.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .jets import (
    JetPoly,
    OrderError,
    SingularityError,
    StructureError,
    common,
    contract,
    gradient,
    sqrt_jet,
)


def signature_signs(signature: tuple[int, int]) -> np.ndarray:
    """``eps_h = +1`` for the first ``n+`` slots, ``-1`` afterwards."""
    npos, nneg = signature
    return np.array([1.0] * npos + [-1.0] * nneg)


def count_signature(m: np.ndarray) -> tuple[int, int]:
    ev = np.linalg.eigvalsh(m)
    return int(np.sum(ev > 0)), int(np.sum(ev < 0))


@dataclass(frozen=True)
class MetricJet:
    """Jet of a symmetric nondegenerate metric; ``g`` may carry batch axes."""

    g: JetPoly
    signature: tuple[int, int]
    base_point: tuple[float, ...] | None = None

    def __post_init__(self):
        g = self.g
        if len(g.shape) < 2 or g.shape[-1] != g.shape[-2] or g.shape[-1] != g.n:
            raise StructureError(f"metric jet needs shape (..., {g.n}, {g.n}), got {g.shape}")
        if sum(self.signature) != g.n:
            raise StructureError(f"signature {self.signature} does not sum to n={g.n}")
        c = g.coeffs
        if not np.array_equal(c, np.swapaxes(c, -2, -3)):
            raise StructureError("metric jet is not symmetric")
        g0 = g.primal().value.reshape((-1, g.n, g.n))
        if np.any(np.abs(np.linalg.det(g0)) < 1e-300):
            raise SingularityError("degenerate metric at the base point")
        ev = np.linalg.eigvalsh(g0)
        found = np.stack([np.sum(ev > 0, axis=-1), np.sum(ev < 0, axis=-1)], axis=-1)
        bad = np.any(found != np.asarray(self.signature), axis=-1)
        if np.any(bad):
            got = tuple(int(v) for v in found[np.argmax(bad)])
            raise StructureError(f"base-point signature {got} != declared {tuple(self.signature)}")

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def order(self) -> int:
        return self.g.order

    @property
    def signs(self) -> np.ndarray:
        return signature_signs(self.signature)

    def truncate(self, order: int) -> "MetricJet":
        return MetricJet(self.g.truncate(order), self.signature, self.base_point)


@dataclass(frozen=True)
class ConnectionJet:
    """Jet of a symmetric linear connection, ``gamma[i, j, k] = Gamma^i_jk``."""

    gamma: JetPoly

    def __post_init__(self):
        G = self.gamma
        n = G.n
        if G.shape[-3:] != (n, n, n):
            raise StructureError(f"connection jet needs shape (..., {n}, {n}, {n}), got {G.shape}")
        c = G.coeffs
        if not np.array_equal(c, np.swapaxes(c, -2, -3)):
            raise StructureError("connection is not symmetric in its lower indices")

    @property
    def n(self) -> int:
        return self.gamma.n

    @property
    def order(self) -> int:
        return self.gamma.order

    def truncate(self, order: int) -> "ConnectionJet":
        return ConnectionJet(self.gamma.truncate(order))


def _as_jet(g) -> JetPoly:
    return g.g if isinstance(g, MetricJet) else g


def _as_gamma(nab) -> JetPoly:
    return nab.gamma if isinstance(nab, ConnectionJet) else nab


# determinants and inverses -------------------------------------------------


def _perm_tables(n: int):
    perms = list(itertools.permutations(range(n)))
    signs = []
    for p in perms:
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if p[i] > p[j])
        signs.append(-1.0 if inv % 2 else 1.0)
    return np.array(perms), np.array(signs)


def determinant(m: JetPoly) -> JetPoly:
    """Determinant of a square jet matrix by permutation expansion."""
    n = m.shape[-1]
    perms, signs = _perm_tables(n)
    sp = m.space
    # factor i has shape (..., P, size): m[..., i, perm[:, i]]
    prod = JetPoly(sp, m.coeffs[..., 0, perms[:, 0], :])
    for i in range(1, n):
        prod = prod * JetPoly(sp, m.coeffs[..., i, perms[:, i], :])
    return JetPoly(sp, np.einsum("...pZ,p->...Z", prod.coeffs, signs))


def inverse_matrix(m: JetPoly) -> JetPoly:
    """Inverse of a square jet matrix.

    With ``m = m0 + N`` and ``N`` nilpotent, ``m^-1 = sum_k (-m0^-1 N)^k m0^-1``;
    the sum is evaluated in Horner form and terminates exactly.
    """
    sp = m.space
    m0 = m.coeffs[..., 0]
    try:
        inv0 = np.linalg.inv(m0)
    except np.linalg.LinAlgError:
        raise SingularityError("singular matrix at the base point") from None
    if not np.all(np.isfinite(inv0)) or np.any(np.linalg.det(m0) == 0):
        raise SingularityError("singular matrix at the base point")
    nil_part = m.coeffs.copy()
    nil_part[..., 0] = 0.0
    step = JetPoly(sp, -np.einsum("...ij,...jkZ->...ikZ", inv0, nil_part))
    first = JetPoly.constant(sp, inv0)
    out = first
    for _ in range(sp.order + sp.nil):
        out = first + contract("ij,jk->ik", step, out)
    return out


def inverse_metric(g) -> JetPoly:
    """``g^{ij}`` as a jet matrix of the same usable order."""
    return inverse_matrix(_as_jet(g))


def volume_density(g) -> JetPoly:
    """``rho = sqrt(|det g_ij|)``."""
    det = determinant(_as_jet(g))
    d0 = det.primal().value
    if np.any(d0 == 0):
        raise SingularityError("degenerate metric")
    return sqrt_jet(det * np.sign(d0))


def metric_derivatives(g) -> JetPoly:
    """``dg[i, j, k] = d_k g_ij``."""
    return gradient(_as_jet(g))


def christoffel(g) -> ConnectionJet:
    """Levi-Civita coefficients ``1/2 g^is (d_j g_ks + d_k g_js - d_s g_jk)``."""
    gj = _as_jet(g)
    if gj.order < 1:
        raise OrderError("Christoffel symbols need usable order >= 1")
    dg = gradient(gj)
    lowered = 0.5 * (dg.permute("ksj->sjk") + dg.permute("jsk->sjk") - dg.permute("jks->sjk"))
    ginv = inverse_metric(gj.truncate(dg.order))
    return ConnectionJet(contract("is,sjk->ijk", ginv, lowered))


def _curvature_trace(ginv: JetPoly, gamma: JetPoly) -> JetPoly:
    # g^jk { d_i G^i_jk - d_j G^i_ik + G^l_jk G^i_il - G^l_ik G^i_jl }
    dG = gradient(gamma)  # dG[i, j, k, l] = d_l G^i_jk
    dG, ginv, gamma = common(dG, ginv, gamma)
    bracket = (
        dG.permute("ijki->jk")
        - dG.permute("iikj->jk")
        + contract("ljk,iil->jk", gamma, gamma)
        - contract("lik,ijl->jk", gamma, gamma)
    )
    return contract("jk,jk->", ginv, bracket)


def scalar_curvature(g, levi_civita=None) -> JetPoly:
    """``s^g``; ``levi_civita`` may pass precomputed Christoffel symbols of ``g``."""
    gj = _as_jet(g)
    if gj.order < 2:
        raise OrderError("scalar curvature needs usable order >= 2")
    gamma = christoffel(gj).gamma if levi_civita is None else _as_gamma(levi_civita)
    return _curvature_trace(inverse_metric(gj.truncate(gj.order - 2)), gamma)


def difference_tensor(g, nab, levi_civita=None) -> JetPoly:
    """``T^h_ij = (Gamma^g)^h_ij - Gamma^h_ij``."""
    lc = christoffel(g).gamma if levi_civita is None else _as_gamma(levi_civita)
    gamma = _as_gamma(nab)
    if gamma.n != lc.n:
        raise StructureError("metric and connection dimensions differ")
    lc, gamma = common(lc, gamma)
    return lc - gamma


def pair_scalar_curvature(g, nab) -> JetPoly:
    """Trace with ``g`` of the Ricci tensor of an arbitrary symmetric connection."""
    gamma = _as_gamma(nab)
    if gamma.order < 1:
        raise OrderError("connection needs usable order >= 1")
    gj = _as_jet(g)
    if gj.n != gamma.n:
        raise StructureError("metric and connection dimensions differ")
    return _curvature_trace(inverse_metric(gj.truncate(min(gj.order, gamma.order - 1))), gamma)


def riemann_tensor(nab) -> JetPoly:
    """``R[i, l, k, j] = R^i_lkj`` with ``R(d_k, d_j) d_l = R^i_lkj d_i``."""
    gamma = _as_gamma(nab)
    dG = gradient(gamma)  # d_m G^i_jk at [i, j, k, m]
    G = gamma.truncate(dG.order)
    # d_k G^i_jl - d_j G^i_kl + G^i_km G^m_jl - G^i_jm G^m_kl
    return (
        dG.permute("ijlk->ilkj")
        - dG.permute("iklj->ilkj")
        + contract("ikm,mjl->ilkj", G, G)
        - contract("ijm,mkl->ilkj", G, G)
    )


def ricci_tensor(nab) -> JetPoly:
    """``S(X, Y) = trace(Z -> R(Z, X) Y)``, i.e. ``S[j, l] = R^k_lkj``."""
    return riemann_tensor(nab).permute("klkj->jl")


def covariant_derivative_12(tensor: JetPoly, nab) -> JetPoly:
    """``W[h, a, b, s] = nabla_s T^h_ab`` for a (1,2) tensor ``T[h, a, b]``."""
    gamma = _as_gamma(nab)
    dT = gradient(tensor)
    dT, T, G = common(dT, tensor, gamma)
    return (
        dT
        + contract("hsl,lab->habs", G, T)
        - contract("lsa,hlb->habs", G, T)
        - contract("lsb,hal->habs", G, T)
    )


def metricity(g, nab) -> JetPoly:
    """``(nabla g)[i, j, k] = d_k g_ij - G^l_ki g_lj - G^l_kj g_il``."""
    gj = _as_jet(g)
    gamma = _as_gamma(nab)
    dg = gradient(gj)
    dg, gl, G = common(dg, gj, gamma)
    return dg - contract("lki,lj->ijk", G, gl) - contract("lkj,il->ijk", G, gl)
