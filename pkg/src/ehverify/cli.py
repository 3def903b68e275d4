"""Batch verification runner.

``ehverify verify`` runs named check suites over seeded catalog objects and
emits one :class:`CheckReport` per (suite, check, n, seed).  ``catalog``
lists the generators, ``dump`` prints one object as JSON.

Config file (INI)::

    [run]
    suites = lemma1, lemma2        # default: all suites
    dims = 3, 4
    seeds = 50                     # a count, a range "0-9" or a list "1, 5, 7"
    seed_offset = 0
    order = 4
    tol_multiplier = 1.0
    format = json
    jobs = 1

    [catalog]
    random_metric.amplitude = 0.3  # kind.param = value
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import __version__
from .catalog import (
    DEFAULT_ORDER,
    KINDS,
    CatalogError,
    CatalogSpec,
    closed_form,
    default_base_point,
    levi_civita_spec,
    list_kinds,
    make_connection,
    make_diffeo,
    make_metric,
)
from .covariance import (
    DiffeoJet,
    density_jacobian_residual,
    levi_civita_pullback_residual,
    naturality_residual,
    palatini_variation,
    scalar_invariance_residual,
)
from .geometry import (
    christoffel,
    difference_tensor,
    inverse_metric,
    metricity,
    pair_scalar_curvature,
    scalar_curvature,
    volume_density,
)
from .hamiltonian import (
    UnsupportedDimensionError,
    canonical_residuals,
    covariant_hamiltonian,
    covariant_hamiltonian_residual,
    hamiltonian_h,
    hessian_closed_form,
    hessian_directional,
    hessian_numeric,
    legendre_invert_adapted,
    legendre_invert_general,
    momenta,
    momenta_at,
    regularity_check,
)
from .jets import JetPoly, common, contract, gradient, max_abs
from .lagrangians import (
    EinsteinHilbert,
    FirstOrderNabla,
    expanded_l_prime_rhs,
    l_eh_christoffel,
    l_eh_jet_coordinates,
    l_nabla,
    l_prime,
    lemma1_residuals,
    lemma2_residual,
    residual_scale,
)
from .oracles import KAPPA, einstein_density_upper, pair_scalar_from_ricci, scalar_curvature_fd
from .variational import euler_lagrange

SUITES = (
    "lemma1",
    "lemma2",
    "el_equivalence",
    "regularity",
    "legendre",
    "covariant_hamiltonian",
    "canonical",
    "naturality",
    "palatini",
    "geometry_oracles",
)
FORMATS = ("json", "csv", "human")
FIELDS = ("suite", "check", "inputs", "residual", "tolerance", "pass", "runtime_ms")

CONNECTION_SEED_OFFSET = 1_000_000
DIFFEO_SEED_OFFSET = 2_000_000

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(ValueError):
    """Bad command line or config file."""


# reports ----------------------------------------------------------------------


@dataclass
class CheckReport:
    suite: str
    check: str
    inputs: dict
    residual: float
    tolerance: float
    passed: bool
    runtime_ms: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        out = {
            "suite": self.suite,
            "check": self.check,
            "inputs": self.inputs,
            "residual": _json_float(self.residual),
            "tolerance": _json_float(self.tolerance),
            "pass": self.passed,
            "runtime_ms": self.runtime_ms,
        }
        if self.error is not None:
            out["error"] = self.error
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CheckReport":
        return cls(
            d["suite"],
            d["check"],
            d["inputs"],
            _parse_float(d["residual"]),
            _parse_float(d["tolerance"]),
            bool(d["pass"]),
            d.get("runtime_ms"),
            d.get("error"),
        )

    def sort_key(self) -> tuple:
        return (
            SUITES.index(self.suite) if self.suite in SUITES else len(SUITES),
            self.check,
            self.inputs.get("n") or 0,
            self.inputs.get("seed") if self.inputs.get("seed") is not None else -1,
        )


def _json_float(x):
    # NaN and inf are not JSON; encode them as strings
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _parse_float(x) -> float:
    return float(x)


def emit(reports: list[CheckReport], fmt: str = "json") -> bytes:
    """Serialise reports; ``human`` ends with a pass/fail summary line."""
    if fmt == "json":
        lines = [json.dumps(r.to_dict(), separators=(", ", ": ")) for r in reports]
        return "".join(line + "\n" for line in lines).encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FIELDS + ("error",))
        for r in reports:
            d = r.to_dict()
            w.writerow(
                [d["suite"], d["check"], json.dumps(d["inputs"], sort_keys=True), d["residual"], d["tolerance"],
                 str(d["pass"]).lower(), "" if d["runtime_ms"] is None else d["runtime_ms"], d.get("error", "")]
            )
        return buf.getvalue().encode()
    if fmt == "human":
        return _human(reports).encode()
    raise UsageError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def parse_json_reports(data: bytes | str) -> list[CheckReport]:
    text = data.decode() if isinstance(data, bytes) else data
    return [CheckReport.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


def summary_line(reports: list[CheckReport]) -> str:
    failures = sum(not r.passed for r in reports)
    return f"{len(reports)} checks, {failures} failures"


def _human(reports: list[CheckReport]) -> str:
    rows = [("suite", "check", "n", "seed", "residual", "tolerance", "result")]
    for r in reports:
        seed = r.inputs.get("seed")
        rows.append(
            (
                r.suite,
                r.check,
                str(r.inputs.get("n", "")),
                "" if seed is None else str(seed),
                f"{r.residual:.3e}",
                f"{r.tolerance:.1e}",
                "pass" if r.passed else ("ERROR" if r.error else "FAIL"),
            )
        )
    out = []
    if reports:
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        for row in rows:
            out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        for r in reports:
            if r.error:
                out.append(f"error in {r.suite}/{r.check}: {r.error}")
    out.append(summary_line(reports))
    return "\n".join(out) + "\n"


# config -------------------------------------------------------------------------


@dataclass(frozen=True)
class Config:
    suites: tuple = SUITES
    dims: tuple = (3, 4)
    seeds: tuple = tuple(range(50))
    order: int = DEFAULT_ORDER
    tol_multiplier: float = 1.0
    format: str = "json"
    output: str | None = None
    jobs: int = 1
    timing: bool = False
    overrides: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)  # "suite.check" -> base tolerance


def parse_seeds(text: str, offset: int = 0) -> tuple:
    """``"50"`` is a count, ``"3-7"`` an inclusive range, ``"1,5,9"`` a list."""
    text = str(text).strip()
    try:
        if "," in text:
            seeds = [int(s) for s in text.split(",") if s.strip()]
        elif "-" in text.lstrip("-"):
            lo, hi = text.split("-", 1)
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            count = int(text)
            if count < 0:
                raise ValueError
            seeds = list(range(offset, offset + count))
    except ValueError:
        raise UsageError(f"cannot parse seeds {text!r}") from None
    if any(s < 0 for s in seeds):
        raise UsageError("seeds must be non-negative")
    return tuple(seeds)


def _int_list(text: str, what: str) -> tuple:
    try:
        return tuple(int(v) for v in str(text).replace(",", " ").split())
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r}") from None


def parse_suites(text) -> tuple:
    items = text if isinstance(text, (list, tuple)) else str(text).replace(",", " ").split()
    if not items or list(items) == ["all"]:
        return SUITES
    unknown = [s for s in items if s not in SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s) {unknown}; known: {', '.join(SUITES)}")
    return tuple(s for s in SUITES if s in items)


def _parse_value(text: str):
    low = text.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return float(text) if any(c in low for c in ".e") or low in ("inf", "nan") else int(text)
    except ValueError:
        raise UsageError(f"catalog override value {text!r} is not a number or boolean") from None


def load_config(path: str | None) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    unknown_sections = set(parser.sections()) - {"run", "catalog", "tolerances"}
    if unknown_sections:
        raise UsageError(f"unknown config sections {sorted(unknown_sections)}")
    kw: dict = {}
    if parser.has_section("run"):
        run = parser["run"]
        known = {"suites", "dims", "seeds", "seed_offset", "order", "tol_multiplier", "format", "jobs"}
        unknown = set(run) - known
        if unknown:
            raise UsageError(f"unknown [run] keys {sorted(unknown)}")
        try:
            offset = int(run.get("seed_offset", "0"))
            if "suites" in run:
                kw["suites"] = parse_suites(run["suites"])
            if "dims" in run:
                kw["dims"] = _int_list(run["dims"], "dims")
            if "seeds" in run or "seed_offset" in run:
                kw["seeds"] = parse_seeds(run.get("seeds", "50"), offset)
            if "order" in run:
                kw["order"] = int(run["order"])
            if "tol_multiplier" in run:
                kw["tol_multiplier"] = float(run["tol_multiplier"])
            if "format" in run:
                kw["format"] = run["format"].strip()
            if "jobs" in run:
                kw["jobs"] = int(run["jobs"])
        except ValueError as exc:
            raise UsageError(f"bad [run] value: {exc}") from None
    if parser.has_section("catalog"):
        overrides: dict = {}
        for key, value in parser["catalog"].items():
            kind, _, param = key.partition(".")
            if kind not in KINDS or not param:
                raise UsageError(f"catalog override {key!r} must be kind.param with a known kind")
            if param not in KINDS[kind].defaults or param == "seed":
                raise UsageError(f"{kind} has no overridable parameter {param!r}")
            overrides.setdefault(kind, {})[param] = _parse_value(value)
        kw["overrides"] = overrides
    if parser.has_section("tolerances"):
        known = {f"{suite}.{c.name}" for suite, checks in REGISTRY.items() for c in checks}
        tolerances: dict = {}
        for key, value in parser["tolerances"].items():
            if key not in known:
                raise UsageError(f"tolerance override {key!r} must be suite.check for a known check")
            try:
                tolerances[key] = float(value)
            except ValueError:
                raise UsageError(f"bad tolerance for {key}: {value!r}") from None
            if not tolerances[key] >= 0:
                raise UsageError(f"tolerance for {key} must be >= 0")
        kw["tolerances"] = tolerances
    return validate(replace(cfg, **kw))


def validate(cfg: Config) -> Config:
    if not cfg.dims or any(n < 3 for n in cfg.dims):
        raise UsageError("dims must be integers >= 3")
    if cfg.order < 4:
        raise UsageError("order must be >= 4 (Euler-Lagrange of L_EH consumes four derivatives)")
    if cfg.order > 8:
        raise UsageError("order must be <= 8")
    if cfg.format not in FORMATS:
        raise UsageError(f"unknown format {cfg.format!r}; expected one of {FORMATS}")
    if not cfg.tol_multiplier > 0:
        raise UsageError("tolerance multiplier must be positive")
    if cfg.jobs < 1:
        raise UsageError("jobs must be >= 1")
    return cfg


# suites ---------------------------------------------------------------------------


@dataclass
class Context:
    n: int
    seed: int
    order: int
    overrides: dict
    once: bool
    cache: dict = field(default_factory=dict)

    def memo(self, key, fn: Callable):
        """Share an expensive result between checks of one (suite, n, seed) task."""
        if key not in self.cache:
            self.cache[key] = fn()
        return self.cache[key]

    def spec(self, kind: str, seed_offset: int = 0, dim: int | None = None, **params) -> CatalogSpec:
        merged = {**self.overrides.get(kind, {}), **params}
        if "seed" in KINDS[kind].defaults:
            merged["seed"] = self.seed + seed_offset
        return CatalogSpec(kind, merged, dim=dim or self.n, order=self.order)

    def signature(self, lorentzian: bool) -> tuple:
        return (self.n - 1, 1) if lorentzian else (self.n, 0)

    def random_metric(self, lorentzian: bool | None = None, **params) -> CatalogSpec:
        lorentzian = bool(self.seed % 2) if lorentzian is None else lorentzian
        return replace(self.spec("random_metric", **params), signature=self.signature(lorentzian))

    def random_connection(self, **params) -> CatalogSpec:
        return self.spec("random_connection", CONNECTION_SEED_OFFSET, **params)

    def random_diffeo(self, **params) -> CatalogSpec:
        return self.spec("random_diffeo", DIFFEO_SEED_OFFSET, **params)

    def vacuum(self) -> CatalogSpec:
        """Schwarzschild for n = 4, a curvilinear flat chart otherwise."""
        return self.spec("schwarzschild") if self.n == 4 else self.spec("polar_flat")


@dataclass
class Check:
    name: str
    tolerance: float
    fn: Callable  # ctx -> (residual, inputs)
    once: bool = False
    dims: tuple | None = None


def _inputs(ctx: Context, metric=None, connection=None, diffeo=None, seeded: bool = True) -> dict:
    base = None
    if metric is not None:
        kind = KINDS[metric.kind]
        base = metric.base_point or default_base_point(metric.kind, metric.dim, {**kind.defaults, **metric.params})
    return {
        "metric": None if metric is None else metric.describe(),
        "connection": None if connection is None else connection.describe(),
        "diffeo": None if diffeo is None else diffeo.describe(),
        "seed": ctx.seed if seeded else None,
        "n": metric.dim if metric is not None else ctx.n,
        "order": ctx.order,
        "base_point": None if base is None else [float(v) for v in base],
    }


def _rel(a: float, b: float, *scale) -> float:
    return abs(a - b) / residual_scale(a, b, *scale)


# lemma1


def _lemma1_pair(ctx):
    ms, cs = ctx.random_metric(), ctx.random_connection()
    g = ctx.memo(("metric", ms.describe().__repr__()), lambda: make_metric(ms))
    nab = ctx.memo(("connection", cs.describe().__repr__()), lambda: make_connection(cs))
    return g, nab, _inputs(ctx, ms, cs)


def _el(ctx, g, L, key):
    return ctx.memo(("el", key), lambda: euler_lagrange(L, g))


def lemma1_geometric(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    return lemma1_residuals(g, nab, local=False)["geometric"], inputs


def lemma1_local(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    return lemma1_residuals(g, nab, local=True)["local"], inputs


def lemma1_routes(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    a = l_nabla(g, nab, "first_order_local").at_base()
    b = l_nabla(g, nab, "second_order_geometric").at_base()
    return _rel(a, b, l_eh_christoffel(g).at_base()), inputs


# lemma2


def lemma2_divergence(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    return lemma2_residual(g, nab), inputs


def lemma2_vacuum(ctx):
    ms, cs = ctx.vacuum(), ctx.random_connection()
    return lemma2_residual(make_metric(ms), make_connection(cs)), _inputs(ctx, ms, cs)


def lemma2_routes_eh(ctx):
    ms = ctx.random_metric()
    g = make_metric(ms)
    return _rel(l_eh_christoffel(g).at_base(), l_eh_jet_coordinates(g).at_base()), _inputs(ctx, ms)


def lemma2_routes_prime(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    vals = [l_prime(g, nab, r).at_base() for r in ("geometric", "local", "rewritten")]
    scale = residual_scale(*vals, l_eh_christoffel(g).at_base())
    return (max(vals) - min(vals)) / scale, inputs


def lemma2_expanded(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    rho = float(volume_density(g).value)
    leh = l_eh_christoffel(g).at_base()
    lhs = rho * l_prime(g, nab).at_base() + leh
    return _rel(lhs, float(expanded_l_prime_rhs(g, nab).value), leh), inputs


# el_equivalence


def _el_scale(*arrays) -> float:
    return max([1.0] + [float(np.abs(a).max()) for a in arrays])


def el_nabla_vs_eh(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    a = _el(ctx, g, FirstOrderNabla(nab), "nabla")
    b = _el(ctx, g, EinsteinHilbert(), "eh")
    return float(np.abs(a - b).max()) / _el_scale(a, b), inputs


def el_connection_independence(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    c2 = ctx.spec("flat_connection")
    a = _el(ctx, g, FirstOrderNabla(nab), "nabla")
    b = euler_lagrange(FirstOrderNabla(make_connection(c2)), g)
    inputs["reference_connection"] = c2.describe()
    return float(np.abs(a - b).max()) / _el_scale(a, b), inputs


def el_einstein_oracle(ctx):
    g, _, _ = _lemma1_pair(ctx)
    ms = ctx.random_metric()
    e = _el(ctx, g, EinsteinHilbert(), "eh")
    ref = KAPPA * einstein_density_upper(g)
    inputs = _inputs(ctx, ms)
    inputs["kappa"] = KAPPA
    return float(np.abs(e - ref).max()) / _el_scale(e, ref), inputs


def el_vacuum(ctx):
    ms = ctx.vacuum()
    g = make_metric(ms)
    return float(np.abs(euler_lagrange(EinsteinHilbert(), g)).max()), _inputs(ctx, ms, seeded=False)


def el_vacuum_nabla(ctx):
    ms, cs = ctx.vacuum(), ctx.random_connection()
    g = make_metric(ms)
    return float(np.abs(euler_lagrange(FirstOrderNabla(make_connection(cs)), g)).max()), _inputs(ctx, ms, cs)


# regularity


def _random_base_metric(ctx, lorentzian: bool) -> tuple:
    ms = replace(ctx.random_metric(lorentzian), order=1)
    return make_metric(ms).g.value, ms


def _det_check(lorentzian: bool):
    def fn(ctx):
        y0, ms = _random_base_metric(ctx, lorentzian)
        reg = regularity_check(y0, ctx.signature(lorentzian))
        inputs = _inputs(ctx, ms)
        inputs["det"] = reg.det
        # residual <= 1 iff |det| >= 1e-10 and the Hessian is numerically invertible
        residual = 1e-10 / abs(reg.det) if reg.det != 0 else math.inf
        return (residual if reg.invertible else max(residual, 2.0)), inputs

    return fn


def reg_hessian_agreement(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    a = hessian_closed_form(g.g.value, g.signature).matrix
    b = ctx.memo("hessian_numeric", lambda: hessian_numeric(g, nab)).matrix
    return float(np.abs(a - b).max()) / _el_scale(a), inputs


def reg_hessian_symmetry(ctx):
    y0, ms = _random_base_metric(ctx, bool(ctx.seed % 2))
    M = hessian_closed_form(y0).matrix
    return float(np.abs(M - M.T).max()) / _el_scale(M), _inputs(ctx, ms)


def reg_gamma_independence(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    flat = make_connection(ctx.spec("flat_connection"))
    rng = np.random.default_rng(ctx.seed)
    N = ctx.n * ctx.n * (ctx.n + 1) // 2
    U, V = rng.standard_normal((2, 16, N))
    a = hessian_directional(g, nab, U, V)
    b = hessian_directional(g, flat, U, V)
    return float(np.abs(a - b).max()) / _el_scale(a), inputs


def reg_rejects_n2(ctx):
    inputs = _inputs(ctx, seeded=False)
    inputs["n"] = 2
    try:
        regularity_check(np.eye(2))
    except UnsupportedDimensionError:
        return 0.0, inputs
    return 1.0, inputs


# legendre


def _adapted_point(ctx):
    ms = replace(ctx.random_metric(adapted=True), order=2)
    cs = replace(ctx.random_connection(vanish_at_base=True), order=2)
    g = make_metric(ms)
    return g, make_connection(cs), _inputs(ctx, ms, cs)


def leg_adapted_round_trip(ctx):
    g, nab, inputs = _adapted_point(ctx)
    p = momenta(g, nab)
    y1 = gradient(g.g).value
    return float(np.abs(legendre_invert_adapted(p) - y1).max()) / _el_scale(y1), inputs


def leg_adapted_vs_general(ctx):
    g, nab, inputs = _adapted_point(ctx)
    p = momenta(g, nab)
    a = legendre_invert_adapted(p)
    b = legendre_invert_general(p, nab=nab)
    return float(np.abs(a - b).max()) / _el_scale(a), inputs


def leg_general_round_trip(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    y1 = gradient(g.g).value
    got = legendre_invert_general(momenta(g, nab), g, nab)
    return float(np.abs(got - y1).max()) / _el_scale(y1), inputs


def leg_vacuum_recovery(ctx):
    ms, cs = ctx.vacuum(), ctx.random_connection()
    g, nab = make_metric(ms), make_connection(cs)
    y1 = gradient(g.g).value
    got = legendre_invert_general(momenta(g, nab), g, nab)
    return float(np.abs(got - y1).max()) / _el_scale(y1), _inputs(ctx, ms, cs)


# covariant_hamiltonian


def ch_random(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    return covariant_hamiltonian_residual(g, nab), inputs


def _catalog_metrics(ctx) -> list[CatalogSpec]:
    specs = [ctx.spec(k) for k in ("minkowski", "euclidean", "de_sitter", "polar_flat")]
    if ctx.n == 4:
        specs.append(ctx.spec("schwarzschild"))
    return specs


def ch_catalog(ctx):
    worst, worst_inputs = -1.0, None
    for ms in _catalog_metrics(ctx):
        for cs in (ctx.spec("flat_connection"), ctx.random_connection(), levi_civita_spec(ms)):
            r = covariant_hamiltonian_residual(make_metric(ms), make_connection(cs))
            if r > worst:
                worst, worst_inputs = r, _inputs(ctx, ms, cs)
    worst_inputs["pairs"] = 3 * len(_catalog_metrics(ctx))
    return worst, worst_inputs


def ch_flat_reduction(ctx):
    ms, cs = ctx.random_metric(), ctx.spec("flat_connection")
    g, nab = make_metric(ms), make_connection(cs)
    a, b = covariant_hamiltonian(g, nab), hamiltonian_h(g, nab)
    return _rel(a, b), _inputs(ctx, ms, cs)


# canonical


def can_kinematic(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    return canonical_residuals(g, nab, dynamic=False).r2, inputs


def _vacuum_canonical(ctx, random_connection: bool):
    ms = ctx.vacuum()
    cs = ctx.random_connection() if random_connection else ctx.spec("flat_connection")
    res = canonical_residuals(make_metric(ms), make_connection(cs))
    return res, _inputs(ctx, ms, cs)


def can_dynamic(ctx):
    res, inputs = _vacuum_canonical(ctx, False)
    return res.r1, inputs


def can_gamma_zero(ctx):
    res, inputs = _vacuum_canonical(ctx, False)
    same = res.r1 == res.r1_gamma and res.r2 == res.r2_gamma
    return (0.0 if same else math.inf), inputs


def can_dynamic_gamma(ctx):
    res, inputs = _vacuum_canonical(ctx, True)
    return res.r1_gamma, inputs


# naturality


def _triple(ctx, quadratic: bool):
    ms, cs = ctx.random_metric(), ctx.random_connection()
    ds = ctx.random_diffeo() if quadratic else ctx.random_diffeo(quadratic=0.0)
    return make_metric(ms), make_connection(cs), make_diffeo(ds), _inputs(ctx, ms, cs, ds)


def nat_nonlinear(ctx):
    g, nab, phi, inputs = _triple(ctx, True)
    return naturality_residual(phi, g, nab), inputs


def nat_linear(ctx):
    g, nab, phi, inputs = _triple(ctx, False)
    return naturality_residual(phi, g, nab), inputs


def nat_rho(ctx):
    g, _, phi, inputs = _triple(ctx, True)
    return density_jacobian_residual(phi, g), inputs


def nat_scalar(ctx):
    g, _, phi, inputs = _triple(ctx, True)
    return scalar_invariance_residual(phi, g), inputs


def nat_levi_civita(ctx):
    g, _, phi, inputs = _triple(ctx, True)
    return levi_civita_pullback_residual(phi, g), inputs


def nat_inverse(ctx):
    ds = ctx.random_diffeo()
    full = make_diffeo(ds)
    phi = DiffeoJet(full.phi.truncate(ctx.order), full.source_point, full.target_point)
    both = phi.inverse().after(phi)
    ident = DiffeoJet.identity(phi.n, both.order)
    return max_abs(both.phi - ident.phi), _inputs(ctx, diffeo=ds)


# palatini


def pal_random(ctx):
    ms, cs = ctx.random_metric(), ctx.random_connection()
    g = make_metric(ms)
    A = make_connection(cs).gamma
    inputs = _inputs(ctx, ms)
    inputs["tensor"] = cs.describe()
    return palatini_variation(g, A).div_residual, inputs


def pal_difference(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    return palatini_variation(g, difference_tensor(g, nab)).div_residual, inputs


# geometry_oracles


def _curvature_value(kind: str, expected: Callable, dim: int | None = None):
    def fn(ctx):
        n = dim or ctx.n
        ms = ctx.spec(kind, dim=n)
        s = float(scalar_curvature(make_metric(ms)).value)
        params = {**KINDS[kind].defaults, **ms.params}
        ref = expected(n, params)
        inputs = _inputs(ctx, ms, seeded=False)
        inputs["expected"] = ref
        return abs(s - ref) / max(1.0, abs(ref)), inputs

    return fn


def geo_fd_oracle(ctx):
    worst, worst_inputs = -1.0, None
    for ms in _catalog_metrics(ctx):
        g = make_metric(ms)
        x = _inputs(ctx, ms)["base_point"]
        s = float(scalar_curvature(g).value)
        ref = scalar_curvature_fd(closed_form(ms), x)
        r = abs(s - ref) / max(1.0, abs(ref))
        if r > worst:
            worst, worst_inputs = r, _inputs(ctx, ms, seeded=False)
    return worst, worst_inputs


def geo_metricity(ctx):
    ms = ctx.random_metric()
    g = make_metric(ms)
    return max_abs(metricity(g, christoffel(g))), _inputs(ctx, ms)


def geo_inverse(ctx):
    ms = ctx.random_metric()
    g = make_metric(ms)
    a, b = common(g.g, inverse_metric(g))
    prod = contract("ij,jk->ik", a, b)
    ident = JetPoly.constant(prod.space, np.eye(ctx.n))
    return max_abs(prod - ident), _inputs(ctx, ms)


def geo_pair_vs_ricci(ctx):
    g, nab, inputs = _lemma1_pair(ctx)
    a = float(pair_scalar_curvature(g, nab).value)
    b = pair_scalar_from_ricci(g, nab.gamma)
    return _rel(a, b), inputs


def geo_pair_levi_civita(ctx):
    ms = ctx.random_metric()
    g = make_metric(ms)
    a = float(pair_scalar_curvature(g, christoffel(g)).value)
    b = float(scalar_curvature(g).value)
    return _rel(a, b), _inputs(ctx, ms)


def geo_density_derivative(ctx):
    ms = ctx.random_metric()
    g = make_metric(ms)
    rho = volume_density(g)
    lc = christoffel(g).gamma
    d_rho = gradient(rho).value
    ref = float(rho.value) * np.einsum("iik->k", lc.value)
    return float(np.abs(d_rho - ref).max()) / _el_scale(ref), _inputs(ctx, ms)


def geo_difference_zero(ctx):
    ms = ctx.random_metric()
    g = make_metric(ms)
    return max_abs(difference_tensor(g, christoffel(g))), _inputs(ctx, ms)


REGISTRY: dict[str, list[Check]] = {
    "lemma1": [
        Check("first_order_geometric", 1e-12, lemma1_geometric),
        Check("first_order_local", 0.0, lemma1_local),
        Check("route_agreement_l_nabla", 1e-10, lemma1_routes),
    ],
    "lemma2": [
        Check("divergence_identity", 1e-9, lemma2_divergence),
        Check("divergence_vacuum", 1e-9, lemma2_vacuum),
        Check("routes_l_eh", 1e-10, lemma2_routes_eh),
        Check("routes_l_prime", 1e-10, lemma2_routes_prime),
        Check("expanded_l_prime", 1e-10, lemma2_expanded),
    ],
    "el_equivalence": [
        Check("nabla_vs_eh", 1e-7, el_nabla_vs_eh),
        Check("connection_independence", 1e-7, el_connection_independence),
        Check("einstein_oracle", 1e-7, el_einstein_oracle),
        Check("vacuum_eh", 1e-7, el_vacuum, once=True),
        Check("vacuum_nabla", 1e-7, el_vacuum_nabla, once=True),
    ],
    "regularity": [
        Check("det_riemannian", 1.0, _det_check(False)),
        Check("det_lorentzian", 1.0, _det_check(True)),
        Check("hessian_agreement", 1e-8, reg_hessian_agreement),
        Check("hessian_symmetry", 1e-12, reg_hessian_symmetry),
        Check("connection_independence", 1e-10, reg_gamma_independence),
        Check("rejects_n2", 0.0, reg_rejects_n2, once=True),
    ],
    "legendre": [
        Check("adapted_round_trip", 1e-10, leg_adapted_round_trip),
        Check("adapted_vs_general", 1e-9, leg_adapted_vs_general),
        Check("general_round_trip", 1e-9, leg_general_round_trip),
        Check("vacuum_recovery", 1e-9, leg_vacuum_recovery, once=True),
    ],
    "covariant_hamiltonian": [
        Check("identity_random", 1e-9, ch_random),
        Check("identity_catalog", 1e-9, ch_catalog, once=True),
        Check("flat_reduction", 1e-12, ch_flat_reduction),
    ],
    "canonical": [
        Check("kinematic_r2", 1e-6, can_kinematic),
        Check("dynamic_r1_vacuum", 1e-5, can_dynamic, once=True),
        Check("gamma_zero_bitwise", 0.0, can_gamma_zero, once=True),
        Check("dynamic_r1_gamma_vacuum", 1e-5, can_dynamic_gamma, once=True),
    ],
    "naturality": [
        Check("nonlinear_diffeo", 1e-8, nat_nonlinear),
        Check("linear_diffeo", 1e-9, nat_linear),
        Check("density_jacobian", 1e-10, nat_rho),
        Check("scalar_invariance", 1e-9, nat_scalar),
        Check("levi_civita_compatibility", 1e-9, nat_levi_civita),
        Check("diffeo_inverse", 1e-12, nat_inverse),
    ],
    "palatini": [
        Check("divergence_random_tensor", 1e-9, pal_random),
        Check("divergence_difference_tensor", 1e-9, pal_difference),
    ],
    "geometry_oracles": [
        Check("curvature_minkowski", 1e-12, _curvature_value("minkowski", lambda n, p: 0.0), once=True),
        Check("curvature_polar_flat", 1e-12, _curvature_value("polar_flat", lambda n, p: 0.0), once=True),
        Check(
            "curvature_de_sitter",
            1e-10,
            _curvature_value("de_sitter", lambda n, p: n * (n - 1) * p["H"] ** 2),
            once=True,
        ),
        Check("curvature_schwarzschild", 1e-10, _curvature_value("schwarzschild", lambda n, p: 0.0), once=True, dims=(4,)),
        Check(
            "curvature_sphere",
            1e-10,
            _curvature_value("sphere", lambda n, p: 2.0 / p["radius"] ** 2, dim=2),
            once=True,
            dims=(3,),
        ),
        Check("finite_difference_oracle", 1e-6, geo_fd_oracle, once=True),
        Check("metricity", 1e-10, geo_metricity),
        Check("inverse_metric", 1e-10, geo_inverse),
        Check("pair_scalar_vs_ricci", 1e-9, geo_pair_vs_ricci),
        Check("pair_scalar_levi_civita", 1e-9, geo_pair_levi_civita),
        Check("density_derivative", 1e-10, geo_density_derivative),
        Check("difference_tensor_zero", 1e-12, geo_difference_zero),
    ],
}


# execution --------------------------------------------------------------------------


def _run_check(suite: str, check: Check, ctx: Context, tol_multiplier: float, timing: bool,
               base_tol: float | None = None) -> CheckReport:
    tol = (check.tolerance if base_tol is None else base_tol) * tol_multiplier
    t0 = time.perf_counter()
    try:
        residual, inputs = check.fn(ctx)
        residual = float(residual)
        error = None
        passed = bool(residual <= tol)
    except Exception as exc:  # reported, never swallowed
        inputs = _inputs(ctx)
        residual, passed = math.nan, False
        error = f"{type(exc).__name__}: {exc}"
        if "EHVERIFY_TRACEBACK" in os.environ:
            traceback.print_exc()
    ms = round((time.perf_counter() - t0) * 1e3, 3) if timing else None
    return CheckReport(suite, check.name, inputs, residual, tol, passed, ms, error)


def _run_task(task: tuple) -> list[CheckReport]:
    suite, n, seed, first, cfg = task
    ctx = Context(n, seed, cfg.order, cfg.overrides, first)
    out = []
    for check in REGISTRY[suite]:
        if check.once and not first:
            continue
        if check.dims is not None and n not in check.dims:
            continue
        base = cfg.tolerances.get(f"{suite}.{check.name}")
        out.append(_run_check(suite, check, ctx, cfg.tol_multiplier, cfg.timing, base))
    return out


def run(cfg: Config) -> list[CheckReport]:
    """Execute the configured suites; reports are sorted by suite, check, n, seed."""
    cfg = validate(cfg)
    tasks = [
        (suite, n, seed, i == 0, cfg)
        for suite in cfg.suites
        for n in cfg.dims
        for i, seed in enumerate(cfg.seeds)
    ]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * cfg.jobs))))
    else:
        chunks = [_run_task(t) for t in tasks]
    reports = [r for chunk in chunks for r in chunk]
    reports.sort(key=CheckReport.sort_key)
    return reports


def exit_code(reports: list[CheckReport]) -> int:
    if any(r.error for r in reports):
        return EXIT_INTERNAL
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# dump -----------------------------------------------------------------------------------


def _jet_dict(jet: JetPoly) -> dict:
    sp = jet.space
    return {
        "n": sp.n,
        "order": sp.order,
        "shape": list(jet.shape),
        "monomials": [list(m) for m in sp.monomials],
        "coefficients": np.moveaxis(jet.coeffs, -1, 0).tolist(),
    }


def dump(what: str, ctx: Context, metric_kind: str, connection_kind: str) -> dict:
    ms = ctx.random_metric() if metric_kind == "random_metric" else ctx.spec(metric_kind)
    g = make_metric(ms)
    if connection_kind == "levi_civita_of":
        cs = levi_civita_spec(ms)
    elif connection_kind == "random_connection":
        cs = ctx.random_connection()
    else:
        cs = ctx.spec(connection_kind)
    out: dict = {"metric": ms.describe(), "n": ms.dim, "order": ms.order}
    if what == "metric":
        out["signature"] = list(g.signature)
        out["base_point"] = [float(v) for v in g.base_point] if g.base_point is not None else None
        out["jet"] = _jet_dict(g.g)
        return out
    nab = make_connection(cs)
    out["connection"] = cs.describe()
    if what == "connection":
        out["jet"] = _jet_dict(nab.gamma)
    elif what == "hessian":
        out["hessian"] = hessian_closed_form(g.g.value, g.signature).to_dict()
    elif what == "momenta":
        out["momenta"] = momenta(g, nab).to_dict()
    else:
        raise UsageError(f"unknown dump target {what!r}")
    return out


# entry point -------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ehverify", description="Pointwise verification of L^nabla and its Hamiltonian formulation.")
    p.add_argument("--version", action="version", version=f"ehverify {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="run check suites")
    v.add_argument("--config", help="INI config file")
    v.add_argument("--suite", action="append", help="suite name (repeatable or comma separated); 'all' for every suite")
    v.add_argument("--n", help="dimensions, e.g. '3,4'")
    v.add_argument("--seeds", help="seed count, range 'a-b' or list 'a,b,c'")
    v.add_argument("--seed", type=int, help="a single seed")
    v.add_argument("--tol", type=float, help="global tolerance multiplier")
    v.add_argument("--order", type=int, help="jet order")
    v.add_argument("--format", choices=FORMATS)
    v.add_argument("--output", help="write the report here instead of stdout")
    v.add_argument("--jobs", type=int, help="worker processes")
    v.add_argument("--timing", action="store_true", help="record runtime_ms (breaks byte-identical output)")

    c = sub.add_parser("catalog", help="list generators and parameters")
    c.add_argument("--format", choices=("json", "human"), default="human")

    d = sub.add_parser("dump", help="print a jet, Hessian or momenta table as JSON")
    d.add_argument("what", choices=("metric", "connection", "hessian", "momenta"))
    d.add_argument("--metric", default="random_metric", help="metric kind")
    d.add_argument("--connection", default="random_connection", help="connection kind")
    d.add_argument("--n", type=int, default=4)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--order", type=int, default=DEFAULT_ORDER)
    return p


def config_from_args(args) -> Config:
    cfg = load_config(args.config)
    kw: dict = {}
    if args.suite:
        kw["suites"] = parse_suites([s for item in args.suite for s in item.replace(",", " ").split()])
    if args.n:
        kw["dims"] = _int_list(args.n, "--n")
    if args.seeds is not None and args.seed is not None:
        raise UsageError("--seed and --seeds are mutually exclusive")
    if args.seeds is not None:
        kw["seeds"] = parse_seeds(args.seeds)
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("seeds must be non-negative")
        kw["seeds"] = (args.seed,)
    if args.tol is not None:
        kw["tol_multiplier"] = args.tol
    if args.order is not None:
        kw["order"] = args.order
    if args.format:
        kw["format"] = args.format
    if args.output:
        kw["output"] = args.output
    if args.jobs is not None:
        kw["jobs"] = args.jobs
    if args.timing:
        kw["timing"] = True
    return validate(replace(cfg, **kw))


def _write(data: bytes, path: str | None):
    if path is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "catalog":
            kinds = list_kinds()
            if args.format == "json":
                _write((json.dumps(kinds, indent=2) + "\n").encode(), None)
            else:
                lines = []
                for k in kinds:
                    params = ", ".join(f"{p}={v}" for p, v in k["defaults"].items()) or "-"
                    dims = f" (n in {k['dims']})" if k["dims"] else ""
                    lines.append(f"{k['kind']:<18} {k['category']:<10} {params}{dims}\n    {k['doc']}")
                _write(("\n".join(lines) + "\n").encode(), None)
            return EXIT_OK
        if args.command == "dump":
            if args.n < 2 or not 1 <= args.order <= 8:
                raise UsageError("dump needs n >= 2 and 1 <= order <= 8")
            ctx = Context(args.n, args.seed, args.order, {}, True)
            try:
                out = dump(args.what, ctx, args.metric, args.connection)
            except (CatalogError, KeyError) as exc:
                raise UsageError(str(exc)) from None
            _write((json.dumps(out) + "\n").encode(), None)
            return EXIT_OK
        cfg = config_from_args(args)
    except UsageError as exc:
        print(f"ehverify: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)

    try:
        reports = run(cfg)
    except Exception as exc:
        print(f"ehverify: internal fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    _write(emit(reports, cfg.format), cfg.output)
    if cfg.output is not None or cfg.format != "human":
        print(summary_line(reports), file=sys.stderr)
    for r in reports:
        if r.error:
            print(f"ehverify: internal fault in {r.suite}/{r.check} (n={r.inputs.get('n')}, seed={r.inputs.get('seed')}): {r.error}", file=sys.stderr)
    return exit_code(reports)


if __name__ == "__main__":
    sys.exit(main())
