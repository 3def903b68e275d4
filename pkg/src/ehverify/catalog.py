"""Reproducible generators of metric, connection and diffeomorphism jets.

Closed-form metrics are written once as functions of a coordinate list and
evaluated either on floats (for finite-difference oracles) or on jets seeded
at ``base_point + x`` (for Taylor expansion).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import jets
from .geometry import ConnectionJet, MetricJet, christoffel, signature_signs
from .jets import JetError, JetPoly, space

DEFAULT_ORDER = 4


class CatalogError(ValueError):
    """Invalid catalog request: unknown kind, bad parameters, base point outside the chart."""


@dataclass(frozen=True)
class CatalogSpec:
    kind: str
    params: dict = field(default_factory=dict)
    base_point: tuple | None = None
    dim: int = 4
    order: int = DEFAULT_ORDER
    signature: tuple | None = None
    ref: "CatalogSpec | None" = None

    def with_params(self, **kw) -> "CatalogSpec":
        return replace(self, params={**self.params, **kw})

    def describe(self) -> dict:
        out = {"kind": self.kind, "params": dict(sorted(self.params.items()))}
        if self.base_point is not None:
            out["base_point"] = [float(v) for v in self.base_point]
        if self.signature is not None:
            out["signature"] = list(self.signature)
        if self.ref is not None:
            out["ref"] = self.ref.describe()
        return out


# closed-form metrics --------------------------------------------------------


def _diag(entries):
    n = len(entries)
    return [[entries[i] if i == j else 0.0 for j in range(n)] for i in range(n)]


def _time_slot(n, params):
    return 0 if params.get("time_first") else n - 1


def _minkowski(x, params):
    n = len(x)
    d = [1.0] * n
    d[_time_slot(n, params)] = -1.0
    return _diag(d)


def _euclidean(x, params):
    return _diag([1.0] * len(x))


def _schwarzschild(x, params):
    m = params["m"]
    if params.get("time_first"):
        t, r, th, ph = x
    else:
        r, th, ph, t = x
    f = 1 - 2 * m / r
    s = jets.sin(th)
    d = [1 / f, r * r, r * r * s * s, -f]
    if params.get("time_first"):
        d = [d[3]] + d[:3]
    return _diag(d)


def _de_sitter(x, params):
    # conformal chart: (H tau)^-2 (dx^2 - dtau^2), tau < 0
    H = params["H"]
    n = len(x)
    k = _time_slot(n, params)
    tau = x[k]
    w = 1 / (H * H * tau * tau)
    d = [w] * n
    d[k] = -w
    return _diag(d)


def _polar_flat(x, params):
    d = [1.0] * len(x)
    d[1] = (1 + x[0]) * (1 + x[0])
    return _diag(d)


def _sphere(x, params):
    R = params["radius"]
    th = x[0]
    s = jets.sin(th)
    return _diag([R * R, R * R * s * s])


@dataclass(frozen=True)
class _Kind:
    category: str
    defaults: dict
    doc: str
    form: Callable | None = None
    dims: tuple | None = None


KINDS: dict[str, _Kind] = {
    "minkowski": _Kind("metric", {"time_first": False}, "flat Lorentzian metric, time slot last by default", _minkowski),
    "euclidean": _Kind("metric", {}, "identity metric", _euclidean),
    "schwarzschild": _Kind(
        "metric",
        {"m": 1.0, "time_first": False},
        "Schwarzschild vacuum, coordinates (r, theta, phi, t); base point must have r > 2m",
        _schwarzschild,
        (4,),
    ),
    "de_sitter": _Kind(
        "metric",
        {"H": 1.0, "time_first": False},
        "de Sitter in conformal time tau < 0 (last slot); scalar curvature n(n-1)H^2",
        _de_sitter,
    ),
    "polar_flat": _Kind("metric", {}, "flat metric diag(1, (1+x1)^2, 1, ...)", _polar_flat),
    "sphere": _Kind("metric", {"radius": 1.0}, "round 2-sphere diag(R^2, R^2 sin^2 theta)", _sphere, (2,)),
    "random_metric": _Kind(
        "metric",
        {"seed": 0, "amplitude": 0.2, "decay": 0.5, "adapted": False},
        "diag(eps) plus seeded perturbation uniform in [-A, A] * decay^|alpha|",
    ),
    "flat_connection": _Kind("connection", {}, "all Christoffel symbols zero"),
    "levi_civita_of": _Kind("connection", {}, "Levi-Civita connection of the referenced metric spec"),
    "random_connection": _Kind(
        "connection",
        {"seed": 0, "amplitude": 0.5, "decay": 0.5, "vanish_at_base": False},
        "seeded symmetric coefficients uniform in [-A, A] * decay^|alpha|",
    ),
    "identity_diffeo": _Kind("diffeo", {}, "x -> x"),
    "scaling_diffeo": _Kind("diffeo", {"factor": 2.0}, "x -> factor * x"),
    "random_diffeo": _Kind(
        "diffeo",
        {"seed": 0, "linear": 0.2, "quadratic": 0.1, "volume_preserving": False},
        "x -> A x + Q(x, x); A = I + uniform[-linear, linear], |Q| <= quadratic",
    ),
}


def default_base_point(kind: str, n: int, params: dict) -> tuple:
    if kind == "schwarzschild":
        if params.get("time_first"):
            return (0.0, 3.0, math.pi / 3, 0.0)
        return (3.0, math.pi / 3, 0.0, 0.0)
    if kind == "de_sitter":
        p = [0.0] * n
        p[_time_slot(n, params)] = -1.0 / params["H"]
        return tuple(p)
    if kind == "sphere":
        return (math.pi / 3, 0.0)
    return tuple([0.0] * n)


def default_signature(kind: str, n: int) -> tuple:
    if kind in ("minkowski", "schwarzschild", "de_sitter"):
        return (n - 1, 1)
    return (n, 0)


def _resolve(spec: CatalogSpec, category: str) -> tuple[_Kind, dict]:
    kind = KINDS.get(spec.kind)
    if kind is None:
        raise CatalogError(f"unknown catalog kind {spec.kind!r}")
    if kind.category != category:
        raise CatalogError(f"{spec.kind!r} is a {kind.category} generator, not a {category}")
    unknown = set(spec.params) - set(kind.defaults)
    if unknown:
        raise CatalogError(f"unknown parameters for {spec.kind}: {sorted(unknown)}")
    if kind.dims is not None and spec.dim not in kind.dims:
        raise CatalogError(f"{spec.kind} is defined for n in {kind.dims}, got {spec.dim}")
    if spec.dim < 2:
        raise CatalogError("dimension must be at least 2")
    return kind, {**kind.defaults, **spec.params}


def _check_chart(kind: str, point, params):
    if kind == "schwarzschild":
        r = point[1] if params.get("time_first") else point[0]
        th = point[2] if params.get("time_first") else point[1]
        if r <= 2 * params["m"]:
            raise CatalogError(f"base point r={r} is not outside the horizon r=2m={2 * params['m']}")
        if abs(math.sin(th)) < 1e-8:
            raise CatalogError("base point on the polar axis")
    elif kind == "de_sitter":
        tau = point[_time_slot(len(point), params)]
        if tau >= 0:
            raise CatalogError("de Sitter conformal chart needs tau < 0")
    elif kind == "polar_flat":
        if 1 + point[0] == 0:
            raise CatalogError("polar_flat degenerates at x1 = -1")
    elif kind == "sphere":
        if abs(math.sin(point[0])) < 1e-8:
            raise CatalogError("sphere chart degenerates at the poles")


def closed_form(spec: CatalogSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Float evaluator ``x -> g_ij(x)`` of a closed-form catalog metric."""
    kind, params = _resolve(spec, "metric")
    if kind.form is None:
        raise CatalogError(f"{spec.kind} has no closed form")

    def g(x):
        rows = kind.form([float(v) for v in x], params)
        return np.array(rows, dtype=float)

    return g


def _assemble(rows, sp) -> JetPoly:
    n = len(rows)
    out = np.zeros((n, n, sp.size))
    for i in range(n):
        for j in range(n):
            e = rows[i][j]
            if isinstance(e, JetPoly):
                out[i, j] = e.coeffs
            else:
                out[i, j, 0] = float(e)
    return JetPoly(sp, out)


def make_metric(spec: CatalogSpec) -> MetricJet:
    kind, params = _resolve(spec, "metric")
    n, D = spec.dim, spec.order
    sp = space(n, D)
    signature = tuple(spec.signature) if spec.signature else default_signature(spec.kind, n)
    point = tuple(spec.base_point) if spec.base_point is not None else default_base_point(spec.kind, n, params)
    if len(point) != n:
        raise CatalogError(f"base point has {len(point)} entries, need {n}")

    if spec.kind == "random_metric":
        rng = np.random.default_rng(int(params["seed"]))
        A, decay = float(params["amplitude"]), float(params["decay"])
        P = rng.uniform(-A, A, size=(n, n, sp.size)) * decay ** sp.degree
        if params["adapted"]:
            P[..., 0] = 0.0
        P = np.triu(np.ones((n, n)))[..., None] * P
        P = P + np.swapaxes(P, 0, 1) * (1 - np.eye(n))[..., None]
        P[..., 0] += np.diag(signature_signs(signature))
        g = JetPoly(sp, P)
    else:
        _check_chart(spec.kind, point, params)
        xs = [JetPoly.variable(sp, i, value=point[i]) for i in range(n)]
        g = _assemble(kind.form(xs, params), sp)
        g = JetPoly(sp, 0.5 * (g.coeffs + np.swapaxes(g.coeffs, 0, 1)))
    try:
        return MetricJet(g, signature, point)
    except JetError as exc:
        raise CatalogError(f"{spec.kind}: {exc}") from exc


def make_connection(spec: CatalogSpec) -> ConnectionJet:
    kind, params = _resolve(spec, "connection")
    n, D = spec.dim, spec.order
    sp = space(n, D)
    if spec.kind == "flat_connection":
        return ConnectionJet(JetPoly.zeros(sp, (n, n, n)))
    if spec.kind == "levi_civita_of":
        ref = spec.ref
        if ref is None:
            raise CatalogError("levi_civita_of needs a referenced metric spec")
        if ref.dim != n:
            raise CatalogError("referenced metric has a different dimension")
        # one extra order so the connection keeps the requested usable order
        try:
            g = make_metric(replace(ref, order=D + 1))
        except CatalogError as exc:
            raise CatalogError(f"invalid reference: {exc}") from exc
        return christoffel(g)
    rng = np.random.default_rng(int(params["seed"]))
    A, decay = float(params["amplitude"]), float(params["decay"])
    Q = rng.uniform(-A, A, size=(n, n, n, sp.size)) * decay ** sp.degree
    if params["vanish_at_base"]:
        Q[..., 0] = 0.0
    upper = np.triu(np.ones((n, n)))[None, :, :, None]
    Q = Q * upper
    Q = Q + np.swapaxes(Q, 1, 2) * (1 - np.eye(n))[None, :, :, None]
    return ConnectionJet(JetPoly(sp, Q))


def make_diffeo(spec: CatalogSpec):
    """Diffeomorphism jet with polynomial components; stored at order + 2 so that
    transformed connections keep the requested usable order."""
    from .covariance import DiffeoJet

    kind, params = _resolve(spec, "diffeo")
    n, D = spec.dim, spec.order
    source = tuple(spec.base_point) if spec.base_point is not None else tuple([0.0] * n)
    if spec.kind == "identity_diffeo":
        A, Q = np.eye(n), np.zeros((n, n, n))
    elif spec.kind == "scaling_diffeo":
        A, Q = float(params["factor"]) * np.eye(n), np.zeros((n, n, n))
    else:
        rng = np.random.default_rng(int(params["seed"]))
        lin, quad = float(params["linear"]), float(params["quadratic"])
        A = np.eye(n) + rng.uniform(-lin, lin, size=(n, n))
        Q = rng.uniform(-quad, quad, size=(n, n, n)) if quad > 0 else np.zeros((n, n, n))
        Q = np.triu(np.ones((n, n)))[None] * Q
        if params["volume_preserving"]:
            A = A / abs(np.linalg.det(A)) ** (1.0 / n)
    if abs(np.linalg.det(A)) < 0.1:
        raise CatalogError(f"near-singular linear part, |det| = {abs(np.linalg.det(A)):.3g} < 0.1")
    return DiffeoJet.from_polynomial(A, Q, order=D + 2, source_point=source, target_point=source)


def levi_civita_spec(metric: CatalogSpec) -> CatalogSpec:
    return CatalogSpec("levi_civita_of", dim=metric.dim, order=metric.order, ref=metric)


def list_kinds() -> list[dict]:
    return [
        {"kind": name, "category": k.category, "defaults": dict(k.defaults), "dims": list(k.dims) if k.dims else None, "doc": k.doc}
        for name, k in KINDS.items()
    ]
