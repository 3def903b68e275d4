"""Einstein-Hilbert and first-order Lagrangians, the boundary current and
the divergence identity relating them.

Two families of evaluators live here:

* field routes take a :class:`MetricJet` (and a :class:`ConnectionJet`) and
  build every quantity from jet partials of the fields;
* coordinate routes take a :class:`JetCoordinateView` and evaluate the local
  formulas in ``y_ij, y_ij,k, y_ij,kl``.  They accept nilpotent-seeded views,
  which is how momenta and Euler-Lagrange expressions are differentiated.

Every function returns jets in x, so total derivatives are jet partials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    ConnectionJet,
    MetricJet,
    christoffel,
    covariant_derivative_12,
    difference_tensor,
    inverse_matrix,
    scalar_curvature,
    volume_density,
)
from .jets import JetPoly, OrderError, common, contract, gradient
from .variational import JetCoordinateView

ROUTES_PRIME = ("geometric", "local", "rewritten")
ROUTES_NABLA = ("first_order_local", "second_order_geometric")


@dataclass(frozen=True)
class LagrangianValue:
    value: JetPoly
    route: str

    def at_base(self) -> float:
        return float(self.value.primal().value)


def _g(g) -> JetPoly:
    return g.g if isinstance(g, MetricJet) else g


def _gamma(nab) -> JetPoly:
    return nab.gamma if isinstance(nab, ConnectionJet) else nab


# coordinate-level building blocks ------------------------------------------


def coordinate_inverse_density(view: JetCoordinateView):
    """``(y^ij, rho)`` for a (possibly seeded) coordinate view."""
    return inverse_matrix(view.y), volume_density(view.y)


def coordinate_christoffel(view: JetCoordinateView, yinv: JetPoly) -> JetPoly:
    """``G^i_rj = 1/2 y^is (y_rs,j + y_js,r - y_rj,s)`` stored as ``G[i, r, j]``."""
    y1 = view.y1
    lowered = y1.permute("rsj->srj") + y1.permute("jsr->srj") - y1.permute("rjs->srj")
    return 0.5 * contract("is,srj->irj", yinv, lowered)


def connection_at(nab, view: JetCoordinateView) -> tuple[JetPoly, JetPoly]:
    """``Gamma`` and ``dGamma[i, j, k, l] = d_l Gamma^i_jk`` truncated to the view's order."""
    G = _gamma(nab)
    if G.order < view.order + 1:
        raise OrderError(
            f"connection of order {G.order} too short for a coordinate view of order {view.order}"
        )
    dG = gradient(G).truncate(view.order)
    return G.truncate(view.order), dG


def eh_coordinates(view: JetCoordinateView) -> JetPoly:
    """``rho (y^ac y^bd - y^ab y^cd) y_ab,cd + L0``."""
    if view.y2 is None:
        raise OrderError("the Einstein-Hilbert Lagrangian reads second-order coordinates")
    yinv, rho = coordinate_inverse_density(view)
    G = coordinate_christoffel(view, yinv)
    y1, y2 = view.y1, view.y2
    second = contract("ac,bd,abcd->", yinv, yinv, y2) - contract("ab,cd,abcd->", yinv, yinv, y2)
    L0 = (
        contract("ij,hm,mrj,rih->", yinv, yinv, y1, G)
        - contract("ij,hm,mrh,rij->", yinv, yinv, y1, G)
        + contract("ij,mij,hhm->", yinv, G, G)
        - contract("ij,mih,hjm->", yinv, G, G)
    )
    return rho * (second + L0)


def eh_second_order_coefficient(y: JetPoly) -> JetPoly:
    """``K[a, b, c, d] = rho (y^ac y^bd - y^ab y^cd)``, the coefficient of ``y_ab,cd``."""
    yinv = inverse_matrix(y)
    rho = volume_density(y)
    K = contract("ac,bd->abcd", yinv, yinv) - contract("ab,cd->abcd", yinv, yinv)
    return K * JetPoly(rho.space, rho.coeffs[..., None, None, None, None, :])


def lnabla_coordinates(view: JetCoordinateView, nab) -> JetPoly:
    """First-order local expression of ``L^nabla`` (reads ``y_ij`` and ``y_ij,k`` only)."""
    yinv, rho = coordinate_inverse_density(view)
    G = coordinate_christoffel(view, yinv)
    Gam, dGam = connection_at(nab, view)
    T = G - Gam
    bracket = (
        contract("jr,aji,ira->", yinv, G, T)
        - contract("jr,aai,irj->", yinv, G, T)
        + contract("jr,ajr,iai->", yinv, G, Gam)
        - contract("jr,air,iaj->", yinv, G, Gam)
        - contract("jr,irij->", yinv, dGam)
        + contract("jr,irji->", yinv, dGam)
    )
    return rho * bracket


def l1_coordinates(view: JetCoordinateView) -> JetPoly:
    """``rho y^jk (G^l_ij G^i_kl - G^l_jk G^i_il)``, the non-invariant first-order Lagrangian."""
    yinv, rho = coordinate_inverse_density(view)
    G = coordinate_christoffel(view, yinv)
    return rho * (contract("jk,lij,ikl->", yinv, G, G) - contract("jk,ljk,iil->", yinv, G, G))


def lprime_rewritten(view: JetCoordinateView, nab) -> JetPoly:
    """``L'`` written in terms of the metric derivatives and the connection only."""
    if view.y2 is None:
        raise OrderError("L' reads second-order coordinates")
    h = inverse_matrix(view.y)
    y1, y2 = view.y1, view.y2
    Gam, dGam = connection_at(nab, view)
    second = contract("js,ir,risj->", h, h, y2) - contract("jr,is,risj->", h, h, y2)
    # 1/2 { ... } g_ab,j g_rs,i
    quad = (
        2 * contract("ir,jb,as,abj,rsi->", h, h, h, y1, y1)
        - contract("bi,rj,as,abj,rsi->", h, h, h, y1, y1)
        - contract("br,ij,as,abj,rsi->", h, h, h, y1, y1)
        + contract("ar,ib,js,abj,rsi->", h, h, h, y1, y1)
        + contract("bi,ra,js,abj,rsi->", h, h, h, y1, y1)
        - 2 * contract("ir,ab,js,abj,rsi->", h, h, h, y1, y1)
        - contract("sr,jb,ai,abj,rsi->", h, h, h, y1, y1)
        + contract("br,sj,ai,abj,rsi->", h, h, h, y1, y1)
        - contract("ar,sb,ij,abj,rsi->", h, h, h, y1, y1)
        + contract("sr,ab,ij,abj,rsi->", h, h, h, y1, y1)
    )
    dpart = contract("jr,irij->", h, dGam) - contract("jr,irji->", h, dGam)
    mixed = (
        2 * contract("js,ar,rjs,iai->", h, h, y1, Gam)
        - contract("jr,as,rjs,iai->", h, h, y1, Gam)
        + contract("jr,ab,abi,irj->", h, h, y1, Gam)
        - 2 * contract("ar,jb,abi,irj->", h, h, y1, Gam)
    )
    return second + 0.5 * quad - dpart + 0.5 * mixed


class EinsteinHilbert:
    """Second-order coordinate evaluator of ``L_EH``."""

    order = 2
    name = "L_EH"

    def __call__(self, view: JetCoordinateView) -> JetPoly:
        return eh_coordinates(view)


class FirstOrderNabla:
    """First-order coordinate evaluator of ``L^nabla`` for a fixed connection."""

    order = 1
    name = "L_nabla"

    def __init__(self, nab):
        self.nab = nab

    def __call__(self, view: JetCoordinateView) -> JetPoly:
        return lnabla_coordinates(view, self.nab)


class FlatL1:
    order = 1
    name = "L_1"

    def __call__(self, view: JetCoordinateView) -> JetPoly:
        return l1_coordinates(view)


# field routes ---------------------------------------------------------------


def l_eh_christoffel(g) -> LagrangianValue:
    """``sqrt|det g| g^jk {d_i G^i_jk - d_j G^i_ik + G^l_jk G^i_il - G^l_ik G^i_jl}``."""
    gj = _g(g)
    if gj.order < 2:
        raise OrderError("L_EH needs metric usable order >= 2")
    Gam = christoffel(gj).gamma
    dGam = gradient(Gam)
    ginv = inverse_matrix(gj)
    rho = volume_density(gj)
    dGam, Gam, ginv, rho = common(dGam, Gam, ginv, rho)
    term = np.zeros(())  # placeholder replaced below
    term = (
        contract("jk,ijki->", ginv, dGam)
        - contract("jk,iikj->", ginv, dGam)
        + contract("jk,ljk,iil->", ginv, Gam, Gam)
        - contract("jk,lik,ijl->", ginv, Gam, Gam)
    )
    return LagrangianValue(rho * term, "christoffel")


def l_eh_jet_coordinates(g) -> LagrangianValue:
    gj = _g(g)
    if gj.order < 2:
        raise OrderError("L_EH needs metric usable order >= 2")
    view = JetCoordinateView.from_metric(gj, gj.order - 2)
    return LagrangianValue(eh_coordinates(view), "jet_coordinates")


def alt23_contraction(g, tensor: JetPoly, levi_civita=None) -> JetPoly:
    """``c((alt_23(nabla^g A))^sharp)`` for a (1,2) tensor ``A[h, a, b] = A^h_ab``.

    The covariant derivative occupies the third covariant slot; alternation
    swaps the second and third slots, the third is raised with ``g`` and the
    total contraction pairs covariant slots 1, 2 with contravariant 1, 2.
    """
    gj = _g(g)
    lc = christoffel(gj) if levi_civita is None else levi_civita
    W = covariant_derivative_12(tensor, lc)  # W[h, a, b, s] = nabla_s A^h_ab
    alt = W.permute("habs->absh") - W.permute("hasb->absh")
    ginv = inverse_matrix(gj.truncate(min(gj.order, alt.order)))
    alt, ginv = common(alt, ginv)
    raised = contract("cs,absh->abch", ginv, alt)
    return raised.permute("abab->")


def _lprime_local(g, nab) -> JetPoly:
    gj = _g(g)
    T = difference_tensor(gj, nab)
    dT = gradient(T)  # dT[i, r, k, l] = d_l T^i_rk
    lc = christoffel(gj).gamma
    ginv = inverse_matrix(gj)
    dT, T, lc, ginv = common(dT, T, lc, ginv)
    bracket = (
        dT.permute("irij->jr")
        - dT.permute("irji->jr")
        + contract("aji,ira->jr", lc, T)
        - contract("ajr,iai->jr", lc, T)
        + contract("air,iaj->jr", lc, T)
        - contract("aai,irj->jr", lc, T)
    )
    return contract("jr,jr->", ginv, bracket)


def l_prime(g, nab, route: str = "geometric") -> LagrangianValue:
    """The second-order scalar ``L'^nabla`` by one of three formulas."""
    gj = _g(g)
    if gj.order < 2:
        raise OrderError("L' needs metric usable order >= 2")
    if route == "geometric":
        lc = christoffel(gj)
        value = alt23_contraction(gj, difference_tensor(gj, nab, lc), lc)
    elif route == "local":
        value = _lprime_local(gj, nab)
    elif route == "rewritten":
        view = JetCoordinateView.from_metric(gj, gj.order - 2)
        value = lprime_rewritten(view, nab)
    else:
        raise ValueError(f"unknown route {route!r}; expected one of {ROUTES_PRIME}")
    return LagrangianValue(value, route)


def l_nabla(g, nab, route: str = "first_order_local") -> LagrangianValue:
    gj = _g(g)
    if route == "second_order_geometric":
        if gj.order < 2:
            raise OrderError("geometric route needs metric usable order >= 2")
        lc = christoffel(gj)
        s = scalar_curvature(gj, lc)
        lp = alt23_contraction(gj, difference_tensor(gj, nab, lc), lc)
        rho = volume_density(gj.truncate(min(s.order, lp.order)))
        s, lp, rho = common(s, lp, rho)
        return LagrangianValue(rho * (s + lp), route)
    if route == "first_order_local":
        if gj.order < 1:
            raise OrderError("local route needs metric usable order >= 1")
        k = min(gj.order - 1, _gamma(nab).order - 1)
        view = JetCoordinateView.from_metric(gj, k, second=False)
        return LagrangianValue(lnabla_coordinates(view, nab), route)
    raise ValueError(f"unknown route {route!r}; expected one of {ROUTES_NABLA}")


def l1(g) -> LagrangianValue:
    gj = _g(g)
    view = JetCoordinateView.from_metric(gj, gj.order - 1, second=False)
    return LagrangianValue(l1_coordinates(view), "L_1")


def expanded_l_prime_rhs(g, nab) -> JetPoly:
    """Expanded right-hand side of ``rho L' + L_EH`` in Christoffel symbols of both connections."""
    gj = _g(g)
    lc = christoffel(gj).gamma
    Gam = _gamma(nab)
    dGam = gradient(Gam)
    ginv = inverse_matrix(gj)
    rho = volume_density(gj)
    dGam, Gam, lc, ginv, rho = common(dGam, Gam, lc, ginv, rho)
    quad = contract("jr,aji,ira->", ginv, lc, lc) - contract("jr,aai,irj->", ginv, lc, lc)
    lin = (
        contract("jr,irij->", ginv, dGam)
        - contract("jr,irji->", ginv, dGam)
        + contract("jr,aji,ira->", ginv, lc, Gam)
        - contract("jr,ajr,iai->", ginv, lc, Gam)
        + contract("jr,air,iaj->", ginv, lc, Gam)
        - contract("jr,aai,irj->", ginv, lc, Gam)
    )
    return rho * (quad - lin)


def canonical_second_partials(K: JetPoly) -> JetPoly:
    """Sum ``K[c, r, i, b]`` over the distinct symmetric copies of ``y_cr,ib``.

    This is ``dL/dy_cr,ib`` for the canonical coordinate when ``K`` is the
    unsymmetrised coefficient of ``y_ab,cd`` in a Lagrangian linear in them.
    """
    n = K.shape[-1]
    off = 1.0 - np.eye(n)
    S1 = K + K.permute("crib->rcib") * off[:, :, None, None]
    return S1 + S1.permute("crib->crbi") * off[None, None, :, :]


def boundary_current(g, nab) -> JetPoly:
    """Components ``(L_EH)^i_nabla`` of the vector density whose divergence is ``L_EH - L^nabla``."""
    gj = _g(g)
    n = gj.n
    if gj.order < 1:
        raise OrderError("boundary current needs metric usable order >= 1")
    Gam = _gamma(nab)
    dg = gradient(gj)  # dg[c, r, b] = y_cr,b
    K = eh_second_order_coefficient(gj)
    P = canonical_second_partials(K)  # P[c, r, i, b] = dL_EH / dy_cr,ib
    dg, P, Gam, y = common(dg, P, Gam, gj)
    # y_cr,b - (G^a_bc y_ar + G^a_br y_ac)
    shifted = dg - contract("abc,ar->crb", Gam, y) - contract("abr,ac->crb", Gam, y)
    upper = np.triu(np.ones((n, n)))
    weight = 1.0 / (2.0 - np.eye(n))
    return contract("cr,ib,crib,crb->i", upper, weight, P, shifted)


def current_divergence(g, nab) -> JetPoly:
    cur = boundary_current(g, nab)
    return sum((cur[i].partial(i) for i in range(cur.n)), start=JetPoly.zeros(cur.partial(0).space))


def residual_scale(*values: float) -> float:
    return max([1.0] + [abs(float(v)) for v in values])


def lemma2_residual(g, nab) -> float:
    """Scale-normalised ``|L^nabla - L_EH + D_i (L_EH)^i_nabla|`` at the base point."""
    gj = _g(g)
    if gj.order < 2:
        raise OrderError("the divergence identity needs metric usable order >= 2")
    ln = l_nabla(gj, nab, "first_order_local").at_base()
    leh = l_eh_christoffel(gj).at_base()
    div = float(current_divergence(gj, nab).value)
    return abs(ln - leh + div) / residual_scale(leh, ln)


def perturb_second_jets(g, coords, delta: float) -> MetricJet:
    """Batch of metrics, entry ``k`` with ``y_ab,cd`` shifted by ``delta`` for ``coords[k] = (a, b, c, d)``.

    Lower-order jet coordinates are untouched.
    """
    gj = _g(g)
    if gj.order < 2:
        raise OrderError("second-order jet coordinates need usable order >= 2")
    sp = gj.space
    c = np.broadcast_to(gj.coeffs, (len(coords),) + gj.coeffs.shape).copy()
    for k, (a, b, i, j) in enumerate(coords):
        alpha = [0] * gj.n
        alpha[i] += 1
        alpha[j] += 1
        step = delta / 2.0 if i == j else delta
        idx = sp.index(alpha)
        c[k, a, b, idx] += step
        if a != b:
            c[k, b, a, idx] += step
    signature = g.signature if isinstance(g, MetricJet) else None
    if signature is None:
        from .geometry import count_signature

        signature = count_signature(gj.primal().value)
    return MetricJet(JetPoly(sp, c), tuple(signature))


def lemma1_residuals(g, nab, delta: float = 1e-2, local: bool = True) -> dict:
    """Largest change of ``L^nabla`` when any single ``y_ab,cd`` moves by ``+-delta``.

    Returns scale-normalised changes for the second-order geometric route
    (must be round-off) and for the first-order local route (exactly zero).
    """
    gj = _g(g).truncate(2)
    G = _gamma(nab).truncate(1)
    n = gj.n
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    coords = [(a, b, c, d) for a, b in pairs for c, d in pairs]
    # entry 0 is the unperturbed metric so that all values share one evaluation
    plus = perturb_second_jets(gj, coords, delta)
    minus = perturb_second_jets(gj, coords, -delta)
    c = np.concatenate([gj.coeffs[None], plus.g.coeffs, minus.g.coeffs])
    batch = MetricJet(JetPoly(gj.space, c), plus.signature)
    geo = l_nabla(batch, G, "second_order_geometric").value.value
    scale = residual_scale(l_eh_christoffel(gj).at_base(), geo[0])
    out = {"geometric": float(np.abs(geo[1:] - geo[0]).max()) / scale, "count": 2 * len(coords)}
    if local:
        loc = l_nabla(batch, G, "first_order_local").value.value
        out["local"] = float(np.abs(loc[1:] - loc[0]).max()) / scale
    return out
