"""Derivatives of Lagrangians with respect to jet coordinates, and the
Euler-Lagrange operator.

Jet coordinates are addressed canonically: ``("y", i, j)`` with ``i <= j``,
``("y1", i, j, k)`` with ``i <= j`` and ``("y2", i, j, k, l)`` with
``i <= j, k <= l``.  A canonical coordinate stands for every symmetric copy
of the component, so perturbing ``("y", 0, 1)`` moves both ``g_01`` and
``g_10``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import MetricJet
from .jets import JetPoly, OrderError, StructureError, gradient, space


@dataclass(frozen=True)
class JetCoordinateView:
    """Values of ``y_ij``, ``y_ij,k`` and (optionally) ``y_ij,kl``.

    Components are jets in x: order 0 for evaluation at a point, higher when
    a Lagrangian has to be expanded along the base so that total derivatives
    become jet partials.
    """

    y: JetPoly
    y1: JetPoly
    y2: JetPoly | None = None

    @property
    def n(self) -> int:
        return self.y.n

    @property
    def order(self) -> int:
        return self.y.order

    @classmethod
    def from_metric(cls, g, order: int, second: bool = True) -> "JetCoordinateView":
        gj = g.g if isinstance(g, MetricJet) else g
        need = order + (2 if second else 1)
        if gj.order < need:
            raise OrderError(f"metric jet of order {gj.order} cannot give coordinates at order {order}")
        dg = gradient(gj)
        y2 = gradient(dg).truncate(order) if second else None
        return cls(gj.truncate(order), dg.truncate(order), y2)

    @classmethod
    def from_arrays(cls, y, y1, y2=None) -> "JetCoordinateView":
        y = np.asarray(y, dtype=float)
        n = y.shape[-1]
        sp = space(n, 0)
        mk = lambda a: None if a is None else JetPoly.constant(sp, np.asarray(a, dtype=float))
        return cls(mk(y), mk(y1), mk(y2))

    def point(self) -> "JetCoordinateView":
        """The same coordinates frozen at the base point (order 0 jets)."""
        return JetCoordinateView(
            self.y.truncate(0), self.y1.truncate(0), None if self.y2 is None else self.y2.truncate(0)
        )

    def arrays(self) -> tuple:
        return (
            self.y.primal().value,
            self.y1.primal().value,
            None if self.y2 is None else self.y2.primal().value,
        )

    def replace_y1(self, y1) -> "JetCoordinateView":
        y1 = np.asarray(y1, dtype=float)
        if self.order != 0:
            raise OrderError("replacing first derivatives is defined for point views only")
        return JetCoordinateView(self.y, JetPoly.constant(self.y.space, y1), self.y2)

    def replace_y(self, y) -> "JetCoordinateView":
        y = np.asarray(y, dtype=float)
        if self.order != 0:
            raise OrderError("replacing metric values is defined for point views only")
        return JetCoordinateView(JetPoly.constant(self.y.space, y), self.y1, self.y2)


def coordinate_ids(n: int, kind: str) -> list[tuple]:
    """Canonical coordinates of one kind in lexicographic order."""
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    if kind == "y":
        return [("y", i, j) for i, j in pairs]
    if kind == "y1":
        return [("y1", i, j, k) for i, j in pairs for k in range(n)]
    if kind == "y2":
        return [("y2", i, j, k, l) for i, j in pairs for k, l in pairs]
    raise StructureError(f"unknown coordinate kind {kind!r}")


def _unit(cid: tuple, n: int) -> tuple[str, np.ndarray]:
    kind = cid[0]
    idx = cid[1:]
    if kind == "y":
        i, j = idx
        u = np.zeros((n, n))
        u[i, j] = u[j, i] = 1.0
    elif kind == "y1":
        i, j, k = idx
        u = np.zeros((n, n, n))
        u[i, j, k] = u[j, i, k] = 1.0
    elif kind == "y2":
        i, j, k, l = idx
        u = np.zeros((n, n, n, n))
        for a, b in ((i, j), (j, i)):
            for c, d in ((k, l), (l, k)):
                u[a, b, c, d] = 1.0
    else:
        raise StructureError(f"unknown coordinate {cid!r}")
    return kind, u


def seed(view: JetCoordinateView, directions: Sequence[Sequence[tuple]]) -> JetCoordinateView:
    """Attach nilpotent tangents along canonical coordinates.

    ``directions[k]`` is a list of coordinates seeded on nilpotent ``e_k``;
    the result carries batch axes ``(len(directions[0]), len(directions[1]), ...)``
    ahead of the tensor axes, so one evaluation yields all requested (mixed)
    partial derivatives.
    """
    m = len(directions)
    n = view.n
    sp = space(n, view.order, m)
    comps = {"y": view.y, "y1": view.y1, "y2": view.y2}
    out = {}
    for name, jet in comps.items():
        if jet is None:
            out[name] = None
            continue
        if jet.space.nil != 0:
            raise StructureError("view is already seeded")
        # unseeded batch axes stay of length one and broadcast
        batch = tuple(len(d) if any(c[0] == name for c in d) else 1 for d in directions)
        c = np.zeros(batch + jet.shape + (sp.size,))
        c[..., : jet.space.size] = jet.coeffs
        out[name] = c
    for k, ids in enumerate(directions):
        mask = 1 << k
        for b, cid in enumerate(ids):
            kind, u = _unit(cid, n)
            if out[kind] is None:
                raise StructureError(f"view has no {kind} component to seed")
            sel = tuple(slice(None) if a != k else b for a in range(m))
            out[kind][sel + (Ellipsis, mask * sp.nx)] += u
    mk = lambda c: None if c is None else JetPoly(sp, c)
    return JetCoordinateView(mk(out["y"]), mk(out["y1"]), mk(out["y2"]))


def lagrangian_gradient(L: Callable, view: JetCoordinateView, ids: Sequence[tuple]) -> JetPoly:
    """``dL/dc`` for every coordinate ``c`` in ``ids``, as jets in x (batch axis first)."""
    value = L(seed(view, [ids])).nil_part(1)
    c = value.coeffs
    return JetPoly(value.space, np.broadcast_to(c, (len(ids),) + c.shape[1:]).copy())


def lagrangian_partial(L: Callable, view: JetCoordinateView, which: tuple) -> float:
    """First derivative of ``L`` along one canonical coordinate, at the base point."""
    return float(lagrangian_gradient(L, view.point(), [which]).value[0])


def lagrangian_hessian(L: Callable, view: JetCoordinateView, rows: Sequence[tuple], cols: Sequence[tuple]) -> np.ndarray:
    """Mixed second derivatives ``d2L / d(row) d(col)`` at the base point (hyper-dual)."""
    value = L(seed(view.point(), [rows, cols])).nil_part(3).value
    return np.broadcast_to(value, (len(rows), len(cols)) + value.shape[2:]).copy()


def finite_difference_partial(L: Callable, view: JetCoordinateView, which: tuple, step: float = 1e-6) -> float:
    """Central difference with one Richardson step; oracle for :func:`lagrangian_partial`."""
    pv = view.point()
    kind, u = _unit(which, pv.n)

    def at(h):
        comps = {"y": pv.y, "y1": pv.y1, "y2": pv.y2}
        comps[kind] = comps[kind] + h * u
        return float(L(JetCoordinateView(comps["y"], comps["y1"], comps["y2"])).value)

    d1 = (at(step) - at(-step)) / (2 * step)
    d2 = (at(2 * step) - at(-2 * step)) / (4 * step)
    return (4 * d1 - d2) / 3


def euler_lagrange(L: Callable, g) -> np.ndarray:
    """Symmetric variational derivative ``E_ab`` at the base point.

    ``L.order`` (1 or 2) selects which total-derivative terms are formed.
    Canonical partials are divided by ``2 - delta_ab`` so that
    ``delta S = int sum_ab E_ab delta g_ab`` for symmetric variations.
    """
    gj = g.g if isinstance(g, MetricJet) else g
    n = gj.n
    order = getattr(L, "order", 2)
    if order not in (1, 2):
        raise StructureError(f"Lagrangian order must be 1 or 2, got {order}")
    need = 2 + order
    if gj.order < need:
        raise OrderError(f"Euler-Lagrange of an order-{order} Lagrangian needs metric order {need}, got {gj.order}")
    second = order == 2
    pairs = [(i, j) for i in range(n) for j in range(i, n)]

    E = np.zeros(len(pairs))
    # d L / d y_ab at the point
    v0 = JetCoordinateView.from_metric(gj, 0, second)
    E += lagrangian_gradient(L, v0, coordinate_ids(n, "y")).value

    # - D_k (d L / d y_ab,k)
    v1 = JetCoordinateView.from_metric(gj, 1, second)
    ids1 = coordinate_ids(n, "y1")
    P1 = lagrangian_gradient(L, v1, ids1)
    div1 = np.zeros(len(pairs))
    for b, (_, i, j, k) in enumerate(ids1):
        div1[pairs.index((i, j))] += float(P1[b].partial(k).value)
    E -= div1

    if second:
        v2 = JetCoordinateView.from_metric(gj, 2, True)
        ids2 = coordinate_ids(n, "y2")
        P2 = lagrangian_gradient(L, v2, ids2)
        div2 = np.zeros(len(pairs))
        for b, (_, i, j, k, l) in enumerate(ids2):
            div2[pairs.index((i, j))] += float(P2[b].partial(k).partial(l).value)
        E += div2

    out = np.zeros((n, n))
    for p, (i, j) in enumerate(pairs):
        w = 1.0 if i == j else 0.5
        out[i, j] = out[j, i] = w * E[p]
    return out


def jet_coordinate_grid(n: int) -> list[tuple]:
    """Every canonical coordinate of a second-order jet, in a fixed order."""
    return list(itertools.chain(coordinate_ids(n, "y"), coordinate_ids(n, "y1"), coordinate_ids(n, "y2")))
