import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ehverify.catalog import CatalogSpec, make_connection, make_diffeo, make_metric
from ehverify.jets import JetPoly, space

settings.register_profile(
    "ehverify",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ehverify")


def random_jet(rng, n, order, shape=(), scale=1.0, const=None):
    sp = space(n, order)
    c = rng.uniform(-scale, scale, size=tuple(shape) + (sp.size,))
    if const is not None:
        c[..., 0] = const
    return JetPoly(sp, c)


def metric(seed, n=4, lorentzian=False, order=4, **params):
    sig = (n - 1, 1) if lorentzian else (n, 0)
    return make_metric(CatalogSpec("random_metric", {"seed": seed, **params}, dim=n, order=order, signature=sig))


def connection(seed, n=4, order=4, **params):
    return make_connection(CatalogSpec("random_connection", {"seed": seed, **params}, dim=n, order=order))


def diffeo(seed, n=4, order=4, **params):
    return make_diffeo(CatalogSpec("random_diffeo", {"seed": seed, **params}, dim=n, order=order))


def catalog_metric(kind, n=4, order=4, **params):
    return make_metric(CatalogSpec(kind, params, dim=n, order=order))


def flat(n=4, order=4):
    return make_connection(CatalogSpec("flat_connection", dim=n, order=order))


def diag_metric_jet(entries, order):
    """``MetricJet`` with diagonal jets ``entries`` (scalars or jets)."""
    from ehverify.geometry import MetricJet, count_signature

    n = len(entries)
    sp = space(n, order)
    c = np.zeros((n, n, sp.size))
    for i, e in enumerate(entries):
        if isinstance(e, JetPoly):
            c[i, i] = e.coeffs
        else:
            c[i, i, 0] = e
    return MetricJet(JetPoly(sp, c), count_signature(c[..., 0]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, name: str, passed: bool, detail: str) -> str:
    line = f"[{number}] {name}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
