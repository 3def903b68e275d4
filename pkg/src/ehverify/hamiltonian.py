"""Momenta, fiber Hessian, Legendre inversion and Hamiltonians of ``L^nabla``.

First-derivative coordinates are flattened lexicographically over
``((u, v), w)`` with ``u <= v``; momenta ``p^uv_w`` use the same order and
are partial derivatives with respect to the canonical coordinate ``y_uv,w``
(so an off-diagonal momentum accounts for both ``y_uv,w`` and ``y_vu,w``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .geometry import (
    ConnectionJet,
    MetricJet,
    count_signature,
    pair_scalar_curvature,
    signature_signs,
    volume_density,
)
from .jets import JetPoly, OrderError, SingularityError, StructureError, gradient, space
from .lagrangians import FirstOrderNabla, l_eh_christoffel, lnabla_coordinates, residual_scale
from .variational import JetCoordinateView, coordinate_ids, lagrangian_gradient, lagrangian_hessian


class UnsupportedDimensionError(ValueError):
    """The regularity and inversion formulas divide by ``n - 2``."""


class AdaptedPointError(ValueError):
    """The base point is not in adapted coordinates or ``Gamma(0) != 0``."""


def first_jet_index(n: int) -> list[tuple[int, int, int]]:
    return [(u, v, w) for u in range(n) for v in range(u, n) for w in range(n)]


def _index_arrays(n: int):
    return tuple(np.array(first_jet_index(n)).T)


def pack(full: np.ndarray) -> np.ndarray:
    """Canonical flat vector(s) from ``(..., n, n, n)`` arrays symmetric in the first two slots."""
    full = np.asarray(full, dtype=float)
    u, v, w = _index_arrays(full.shape[-1])
    return full[..., u, v, w]


def unpack(flat: np.ndarray, n: int) -> np.ndarray:
    flat = np.asarray(flat, dtype=float)
    u, v, w = _index_arrays(n)
    out = np.zeros(flat.shape[:-1] + (n, n, n))
    out[..., u, v, w] = flat
    out[..., v, u, w] = flat
    return out


@dataclass(frozen=True)
class MomentaTable:
    """``p^ij_k`` (``i <= j``) at one point, with the base data they depend on."""

    values: np.ndarray
    y0: np.ndarray
    rho0: float
    signs: np.ndarray
    gamma0: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.y0.shape[-1]

    def full(self) -> np.ndarray:
        """``P[u, v, w] = p^uv_w`` symmetric in ``(u, v)``."""
        return unpack(self.values, self.n)

    def get(self, u: int, v: int, w: int) -> float:
        u, v = min(u, v), max(u, v)
        return float(self.values[first_jet_index(self.n).index((u, v, w))])

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "index": [list(t) for t in first_jet_index(self.n)],
            "p": self.values.tolist(),
            "y0": self.y0.tolist(),
            "rho0": self.rho0,
            "signs": self.signs.tolist(),
        }


@dataclass(frozen=True)
class HessianMatrix:
    """Rows ``(uv, w)``, columns ``(ab, c)``, both in :func:`first_jet_index` order."""

    matrix: np.ndarray
    n: int

    @property
    def index(self) -> list[tuple[int, int, int]]:
        return first_jet_index(self.n)

    def entry(self, row: tuple, col: tuple) -> float:
        idx = self.index
        return float(self.matrix[idx.index(tuple(row)), idx.index(tuple(col))])

    def to_dict(self) -> dict:
        return {"n": self.n, "index": [list(t) for t in self.index], "matrix": self.matrix.tolist()}


@dataclass(frozen=True)
class UpsilonTable:
    """``U[r, s, q] = ((1 + delta_rs) / rho) p^rs_q eps_r eps_s eps_q``."""

    values: np.ndarray
    signs: np.ndarray


@dataclass(frozen=True)
class Regularity:
    det: float
    invertible: bool
    log_abs_det: float


def _metric(g) -> JetPoly:
    return g.g if isinstance(g, MetricJet) else g


def _signs_of(g, y0) -> np.ndarray:
    if isinstance(g, MetricJet):
        return g.signs
    return signature_signs(count_signature(y0))


def _connection_point(nab, n: int) -> JetPoly:
    """Connection truncated to order 1 so a point view can read ``Gamma(0)`` and ``dGamma(0)``."""
    G = nab.gamma if isinstance(nab, ConnectionJet) else nab
    if G.order < 1:
        raise OrderError("momenta need the connection to usable order >= 1")
    if G.n != n:
        raise StructureError("metric and connection dimensions differ")
    return G.truncate(1)


def _momenta_values(y0, y1, G: JetPoly) -> np.ndarray:
    """Flat momenta for (possibly batched) point coordinates; batch axes lead."""
    n = y0.shape[-1]
    view = JetCoordinateView.from_arrays(y0, y1)
    p = lagrangian_gradient(FirstOrderNabla(G), view, coordinate_ids(n, "y1")).value
    return np.moveaxis(p, 0, -1).copy()


def momenta_at(y0, y1, nab, signs=None) -> MomentaTable:
    """Momenta at explicit point coordinates ``y_ij = y0``, ``y_ij,k = y1``."""
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    n = y0.shape[-1]
    G = _connection_point(nab, n)
    p = _momenta_values(y0, y1, G)
    s = signature_signs(count_signature(y0)) if signs is None else np.asarray(signs, dtype=float)
    return MomentaTable(p, y0, float(np.sqrt(abs(np.linalg.det(y0)))), s, G.primal().value.copy())


def momenta(g, nab) -> MomentaTable:
    """``p^ij_k = dL^nabla / dy_ij,k`` on the first jet of ``g`` at the base point."""
    gj = _metric(g)
    if gj.order < 1:
        raise OrderError("momenta need metric usable order >= 1")
    y0 = gj.primal().value
    y1 = gradient(gj).primal().value
    return momenta_at(y0, y1, nab, _signs_of(g, y0))


def hessian_closed_form(y0, signature=None) -> HessianMatrix:
    """Second derivatives of ``L^nabla`` in the first-derivative coordinates; reads ``y_ij`` only."""
    y0 = np.asarray(y0, dtype=float)
    n = y0.shape[-1]
    det = np.linalg.det(y0)
    if abs(det) < 1e-300:
        raise SingularityError("degenerate base metric")
    if signature is not None and count_signature(y0) != tuple(signature):
        raise StructureError(f"base metric signature {count_signature(y0)} != {tuple(signature)}")
    h = np.linalg.inv(y0)
    h = 0.5 * (h + h.T)
    rho = np.sqrt(abs(det))
    e = np.einsum
    T = (
        e("bw,au,cv->abcuvw", h, h, h)
        + e("bw,av,cu->abcuvw", h, h, h)
        + e("aw,bu,cv->abcuvw", h, h, h)
        + e("aw,bv,cu->abcuvw", h, h, h)
        - e("ab,cu,vw->abcuvw", h, h, h)
        - e("ab,cv,uw->abcuvw", h, h, h)
        - e("uv,aw,bc->abcuvw", h, h, h)
        - e("uv,ac,bw->abcuvw", h, h, h)
        - e("ua,vb,wc->abcuvw", h, h, h)
        - e("ub,va,wc->abcuvw", h, h, h)
        + 2 * e("ab,uv,wc->abcuvw", h, h, h)
    )
    u, v, w = np.array(first_jet_index(n)).T
    weight = 1.0 / (1.0 + (u == v))
    M = T[u[None, :], v[None, :], w[None, :], u[:, None], v[:, None], w[:, None]]
    return HessianMatrix(rho * M * weight[:, None] * weight[None, :], n)


def _require_dimension(n: int):
    if n <= 2:
        raise UnsupportedDimensionError(
            f"regularity of L^nabla needs n >= 3 (the inversion divides by n - 2), got n = {n}"
        )


def regularity_check(y0, signature=None) -> Regularity:
    y0 = np.asarray(y0, dtype=float)
    _require_dimension(y0.shape[-1])
    M = hessian_closed_form(y0, signature).matrix
    sign, logdet = np.linalg.slogdet(M)
    scale = max(1.0, float(np.abs(M).max()))
    det = float(sign * np.exp(logdet))
    invertible = bool(sign != 0 and logdet > np.log(1e-10) + len(M) * np.log(scale))
    return Regularity(det, invertible, float(logdet))


def hessian_numeric(g, nab, y1=None) -> HessianMatrix:
    """Mixed second derivatives of ``L^nabla`` by hyper-dual seeding.

    ``y1`` overrides the first-derivative coordinates of ``g`` (point level).
    """
    gj = _metric(g)
    n = gj.n
    y0 = gj.primal().value
    if y1 is None:
        y1 = gradient(gj).primal().value
    view = JetCoordinateView.from_arrays(y0, y1)
    ids = coordinate_ids(n, "y1")
    H = lagrangian_hessian(FirstOrderNabla(_connection_point(nab, n)), view, ids, ids)
    return HessianMatrix(H, n)


def hessian_directional(g, nab, U, V, y1=None) -> np.ndarray:
    """``u_k^T M v_k`` for rows of ``U`` and ``V`` (packed directions), by hyper-dual seeding."""
    gj = _metric(g)
    n = gj.n
    y0 = gj.primal().value
    if y1 is None:
        y1 = gradient(gj).primal().value
    U = np.atleast_2d(np.asarray(U, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    sp = space(n, 0, 2)
    c = np.zeros((len(U), n, n, n, sp.size))
    c[..., 0] = y1
    c[..., sp.index((0,) * n, 1)] = unpack(U, n)
    c[..., sp.index((0,) * n, 2)] = unpack(V, n)
    view = JetCoordinateView(JetPoly.constant(sp, y0), JetPoly(sp, c))
    value = FirstOrderNabla(_connection_point(nab, n))(view)
    return np.broadcast_to(value.coeffs[..., sp.index((0,) * n, 3)], (len(U),)).copy()


def upsilon(p: MomentaTable) -> UpsilonTable:
    P = p.full()
    n = p.n
    eps = p.signs
    U = np.einsum("rsq,r,s,q->rsq", P * (1 + np.eye(n))[:, :, None] / p.rho0, eps, eps, eps)
    return UpsilonTable(U, eps)


def _check_adapted(p: MomentaTable):
    n = p.n
    _require_dimension(n)
    if not np.array_equal(p.y0, np.diag(p.signs)):
        raise AdaptedPointError("base metric is not diag(eps) in adapted coordinates")
    if p.gamma0 is not None and np.any(p.gamma0 != 0):
        raise AdaptedPointError("the adapted inversion assumes Gamma(0) = 0")


def legendre_invert_adapted(p: MomentaTable, formulas: str = "corrected") -> np.ndarray:
    """Recover ``y_ab,c`` (full ``(n, n, n)`` array) from momenta at an adapted point.

    Pairwise distinct indices use ``y_qr,s = (U_rsq + U_qsr) / 2``.  For the
    remaining coordinates, fixing ``q`` and writing ``t = sum_a eps_a y_aa,q``,
    ``u = sum_a eps_a y_qa,a``, the equations for ``U_rqr`` (``r != q``),
    ``U_rrq`` (``r != q``) and ``U_qqq`` form a closed linear system whose
    solution is

        t = 2 (sum_a eps_a U_aaq - (n - 2) sum_a eps_a U_aqa) / ((n - 1)(n - 2))
        y_rr,q = U_rqr + eps_r t / 2                        (r != q)
        y_qq,q = eps_q ((3 - n) t / 2 - sum_{a != q} eps_a U_aqa)
        y_qr,r = (U_rrq + y_rr,q - eps_r (t - u)) / 2       (r != q)

    with ``u = eps_q (y_qq,q - U_qqq)``.  ``formulas="as_printed"`` uses the
    closed forms published for the same steps instead; those sum the
    ``U_rsr`` relation over ``r = s`` as well and do not round-trip.
    """
    _check_adapted(p)
    n = p.n
    U = upsilon(p).values
    eps = p.signs
    Y = np.zeros((n, n, n))
    for q in range(n):
        for r in range(n):
            for s in range(n):
                if len({q, r, s}) == 3:
                    Y[q, r, s] = 0.5 * (U[r, s, q] + U[q, s, r])
    S_aaq = np.einsum("a,aaq->q", eps, U)
    S_aqa = np.einsum("a,aqa->q", eps, U)
    if formulas == "corrected":
        for q in range(n):
            t = 2.0 * (S_aaq[q] - (n - 2) * S_aqa[q]) / ((n - 1) * (n - 2))
            A = S_aqa[q] - eps[q] * U[q, q, q]
            z = 0.5 * (3 - n) * t - A
            Y[q, q, q] = eps[q] * z
            u = z - eps[q] * U[q, q, q]
            for r in range(n):
                if r != q:
                    Y[r, r, q] = U[r, q, r] + 0.5 * eps[r] * t
            for r in range(n):
                if r != q:
                    Y[q, r, r] = Y[r, q, r] = 0.5 * (U[r, r, q] + Y[r, r, q] - eps[r] * (t - u))
    elif formulas == "as_printed":
        for s in range(n):
            for r in range(n):
                if r != s:
                    Y[r, r, s] = U[r, s, r] + eps[r] / (2 - n) * S_aqa[s]
        for q in range(n):
            for r in range(n):
                if r == q:
                    continue
                rest_aqa = S_aqa[q] - eps[r] * U[r, q, r]
                rest_aaq = S_aaq[q] - eps[r] * U[r, r, q]
                Y[q, r, r] = Y[r, q, r] = (
                    0.5 * (n - 1) / (n - 2) * U[r, r, q]
                    + 0.5 * (1 - n / (n - 2) ** 2) * U[r, q, r]
                    - n * eps[r] / (2 * (n - 2) ** 2) * rest_aqa
                    + eps[r] / (2 * (n - 2)) * rest_aaq
                )
        for r in range(n):
            Y[r, r, r] = (
                U[r, r, r]
                + eps[r] / (n - 2) * S_aaq[r]
                - 2 * eps[r] * (n - 1) / (n - 2) ** 2 * S_aqa[r]
            )
    else:
        raise ValueError(f"unknown formulas {formulas!r}")
    return Y


class _AffineLegendre:
    """``p = M y_, + b`` at fixed ``y0`` and connection, factorised once."""

    def __init__(self, y0, gamma_point, b=None):
        n = y0.shape[-1]
        _require_dimension(n)
        self.n = n
        M = hessian_closed_form(y0).matrix
        self.b = _momenta_values(y0, np.zeros((n, n, n)), gamma_point) if b is None else b
        try:
            with np.errstate(all="raise"):
                self.lu = scipy.linalg.lu_factor(M)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            raise SingularityError(f"fiber Hessian is singular at a nondegenerate point: {exc}") from exc
        if np.any(np.diag(self.lu[0]) == 0):
            raise SingularityError("fiber Hessian is singular at a nondegenerate point")

    def invert(self, p_flat) -> np.ndarray:
        """First-derivative coordinates for momenta ``p_flat`` of shape ``(N,)`` or ``(B, N)``."""
        rhs = np.asarray(p_flat, dtype=float) - self.b
        x = scipy.linalg.lu_solve(self.lu, rhs.T).T
        return unpack(x, self.n)


def _solve_first_jet(y0, p_flat, gamma_point) -> np.ndarray:
    return _AffineLegendre(y0, gamma_point).invert(p_flat)


def legendre_invert_general(p: MomentaTable, g=None, nab=None) -> np.ndarray:
    """Solve ``p = M(y0) y_, + b(y0, Gamma)`` for the first-derivative coordinates.

    ``g`` supplies ``y0`` (defaults to the table's), ``nab`` the connection;
    ``None`` means the flat connection.
    """
    y0 = p.y0 if g is None else _metric(g).primal().value
    n = y0.shape[-1]
    G = JetPoly.zeros(space(n, 1), (n, n, n)) if nab is None else _connection_point(nab, n)
    return _solve_first_jet(y0, p.values, G)


def _lnabla_at(y0, y1, G) -> float:
    return float(lnabla_coordinates(JetCoordinateView.from_arrays(y0, y1), G).value)


def hamiltonian_h(g, nab) -> float:
    """``H^nabla = sum_{i<=j} p^ij_k y_ij,k - L^nabla`` at the base point."""
    gj = _metric(g)
    y0 = gj.primal().value
    y1 = gradient(gj).primal().value
    G = _connection_point(nab, gj.n)
    p = momenta_at(y0, y1, G)
    return float(p.values @ pack(y1)) - _lnabla_at(y0, y1, G)


def ehresmann_gamma(y0, gamma0) -> np.ndarray:
    """``gamma[k, l, j] = -(Gamma^a_jk y_al + Gamma^a_jl y_ak)``."""
    return -(np.einsum("ajk,...al->...klj", gamma0, y0) + np.einsum("ajl,...ak->...klj", gamma0, y0))


def covariant_hamiltonian(g, nab) -> float:
    """``H^gamma = sum_{k<=l} (y_kl,j + gamma_kl,j) p^kl_j - L^nabla``."""
    gj = _metric(g)
    y0 = gj.primal().value
    y1 = gradient(gj).primal().value
    G = _connection_point(nab, gj.n)
    p = momenta_at(y0, y1, G)
    shift = pack(y1 + ehresmann_gamma(y0, G.primal().value))
    return float(p.values @ shift) - _lnabla_at(y0, y1, G)


def covariant_hamiltonian_residual(g, nab) -> float:
    """Scale-normalised ``|H^gamma - (L^nabla - 2 rho s^{g,nabla})|`` at the base point."""
    gj = _metric(g)
    if gj.order < 2:
        raise OrderError("the identity needs metric usable order >= 2")
    G = nab.gamma if isinstance(nab, ConnectionJet) else nab
    hg = covariant_hamiltonian(gj, G)
    ln = _lnabla_at(gj.primal().value, gradient(gj).primal().value, _connection_point(G, gj.n))
    rho = float(volume_density(gj).primal().value)
    s = float(pair_scalar_curvature(gj, G).primal().value)
    leh = l_eh_christoffel(gj).at_base()
    return abs(hg - (ln - 2.0 * rho * s)) / residual_scale(leh, ln)


@dataclass(frozen=True)
class CanonicalResiduals:
    r1: float
    r2: float
    r1_gamma: float
    r2_gamma: float

    def as_dict(self) -> dict:
        return {"r1": self.r1, "r2": self.r2, "r1_gamma": self.r1_gamma, "r2_gamma": self.r2_gamma}


def _sym_unit(n, a, b) -> np.ndarray:
    u = np.zeros((n, n))
    u[a, b] = u[b, a] = 1.0
    return u


def canonical_residuals(g, nab, step: float = 1e-5, dynamic: bool = True) -> CanonicalResiduals:
    """Residuals of the Hamilton-Cartan equations along the first jet of ``g``.

    ``H(y, p)`` at the base point is evaluated by inverting the Legendre map
    with :func:`legendre_invert_general`; its partials are central
    differences of step ``step * scale``.  Total derivatives of the momenta
    come from the jet of ``g``.

    * ``r2 = max |d_w y_uv - dH/dp^uv_w|`` (kinematic)
    * ``r1 = max |sum_k D_k p^ab_k + dH/dy_ab|`` (dynamic, vanishes on solutions)

    The ``_gamma`` variants use ``H^gamma = H + sum gamma p`` with the
    matching corrections ``-gamma`` and ``+ sum (dgamma/dy_ab) p``.
    ``dynamic=False`` skips the ``r1`` pair (reported as NaN).
    """
    gj = _metric(g)
    n = gj.n
    _require_dimension(n)
    if gj.order < 2:
        raise OrderError("canonical residuals need metric usable order >= 2")
    Gfull = nab.gamma if isinstance(nab, ConnectionJet) else nab
    if Gfull.order < 2:
        raise OrderError("canonical residuals need connection usable order >= 2")
    G = _connection_point(Gfull, n)
    gamma0 = G.primal().value
    y0 = gj.primal().value
    y1 = gradient(gj).primal().value
    signs = _signs_of(g, y0)
    p = momenta_at(y0, y1, G, signs).values

    gam0 = pack(ehresmann_gamma(y0, gamma0))
    leh = l_eh_christoffel(gj).at_base()
    h = step * residual_scale(leh, _lnabla_at(y0, y1, G))
    N = len(p)

    # dH/dp: all 2N shifted momenta share one Legendre map
    shifts = h * np.eye(N)
    P = np.concatenate([p + shifts, p - shifts])
    Y1 = _AffineLegendre(y0, G).invert(P)
    L = lnabla_coordinates(JetCoordinateView.from_arrays(np.broadcast_to(y0, (2 * N, n, n)), Y1), G).value
    Hp = np.einsum("bk,bk->b", P, pack(Y1)) - L
    Hgp = Hp + P @ gam0
    dHdp = (Hp[:N] - Hp[N:]) / (2 * h)
    dHgdp = (Hgp[:N] - Hgp[N:]) / (2 * h)
    kin = pack(y1)
    r2 = float(np.abs(kin - dHdp).max())
    r2g = float(np.abs(kin + gam0 - dHgdp).max())
    if not dynamic:
        return CanonicalResiduals(float("nan"), r2, float("nan"), r2g)

    # divergence of the momenta along j^1 g
    view = JetCoordinateView.from_metric(gj, 1, second=False)
    Pj = lagrangian_gradient(FirstOrderNabla(Gfull.truncate(2)), view, coordinate_ids(n, "y1"))
    pairs = [(a, b) for a in range(n) for b in range(a, n)]
    div = np.zeros(len(pairs))
    for i, (a, b, k) in enumerate(first_jet_index(n)):
        div[pairs.index((a, b))] += float(Pj[i].partial(k).value)

    # dH/dy: one Legendre map per shifted metric, one batched Lagrangian evaluation
    units = np.stack([_sym_unit(n, a, b) for a, b in pairs])
    Ys = np.concatenate([y0 + h * units, y0 - h * units])
    B = _momenta_values(Ys, np.zeros((len(Ys), n, n, n)), G)
    Y1s = np.stack([_AffineLegendre(yy, G, b).invert(p) for yy, b in zip(Ys, B)])
    L = lnabla_coordinates(JetCoordinateView.from_arrays(Ys, Y1s), G).value
    Hy = pack(Y1s) @ p - L
    Hgy = Hy + pack(ehresmann_gamma(Ys, gamma0)) @ p
    m = len(pairs)
    dHdy = (Hy[:m] - Hy[m:]) / (2 * h)
    dHgdy = (Hgy[:m] - Hgy[m:]) / (2 * h)
    dgam = pack(ehresmann_gamma(units, gamma0)) @ p  # gamma is linear in y
    r1 = float(np.abs(div + dHdy).max())
    r1g = float(np.abs(div + dHgdy - dgam).max())
    return CanonicalResiduals(r1, r2, r1g, r2g)


def congruence_frame(y0) -> tuple[np.ndarray, np.ndarray]:
    """Frame ``E`` with ``E^T y0 E = diag(eps)`` (positive signs first), via pivoted LDL^T.

    Diagnostic only: momenta are not transformed by it.
    """
    y0 = np.asarray(y0, dtype=float)
    lu, d, perm = scipy.linalg.ldl(y0, lower=True)
    w, V = np.linalg.eigh(d)  # d is block diagonal with 1x1 / 2x2 blocks
    order = np.argsort(-np.sign(w), kind="stable")
    w, V = w[order], V[:, order]
    E = np.linalg.solve(lu.T, V) / np.sqrt(np.abs(w))
    return E, np.sign(w)
