"""Reference computations that share no code with the jet-based routes.

They serve as oracles in the verification suites and in the tests.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .geometry import MetricJet, christoffel, ricci_tensor
from .jets import JetPoly

# sign relating E_ab(L_EH) to the Einstein density with raised indices; fixed once empirically
KAPPA = -1.0


def fd_metric_derivatives(g: Callable, x, h: float = 1e-4) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``g(x)``, ``dg[i, j, k] = d_k g_ij`` and ``ddg[i, j, k, l]`` by central differences."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    g0 = g(x)
    dg = np.zeros((n, n, n))
    ddg = np.zeros((n, n, n, n))
    E = np.eye(n) * h
    for k in range(n):
        dg[:, :, k] = (g(x + E[k]) - g(x - E[k])) / (2 * h)
        ddg[:, :, k, k] = (g(x + E[k]) - 2 * g0 + g(x - E[k])) / h**2
        for l in range(k + 1, n):
            v = (
                g(x + E[k] + E[l]) - g(x + E[k] - E[l]) - g(x - E[k] + E[l]) + g(x - E[k] - E[l])
            ) / (4 * h**2)
            ddg[:, :, k, l] = ddg[:, :, l, k] = v
    return g0, dg, ddg


def scalar_curvature_fd(g: Callable, x, h: float = 1e-4) -> float:
    """Scalar curvature of a closed-form metric from finite-difference derivatives."""
    g0, dg, ddg = fd_metric_derivatives(g, x, h)
    gi = np.linalg.inv(g0)
    # lowered symbols L[s, j, k] = 1/2 (d_j g_ks + d_k g_js - d_s g_jk) and their derivatives
    low = 0.5 * (np.einsum("ksj->sjk", dg) + np.einsum("jsk->sjk", dg) - np.einsum("jks->sjk", dg))
    dlow = 0.5 * (
        np.einsum("ksjl->sjkl", ddg) + np.einsum("jskl->sjkl", ddg) - np.einsum("jksl->sjkl", ddg)
    )
    dgi = -np.einsum("ia,abl,bs->isl", gi, dg, gi)
    Gam = np.einsum("is,sjk->ijk", gi, low)
    dGam = np.einsum("isl,sjk->ijkl", dgi, low) + np.einsum("is,sjkl->ijkl", gi, dlow)
    ric = (
        np.einsum("ijki->jk", dGam)
        - np.einsum("iikj->jk", dGam)
        + np.einsum("iil,ljk->jk", Gam, Gam)
        - np.einsum("ijl,lik->jk", Gam, Gam)
    )
    return float(np.einsum("jk,jk->", gi, ric))


def _jet(g) -> JetPoly:
    return g.g if isinstance(g, MetricJet) else g


def einstein_density_upper(g) -> np.ndarray:
    """``rho (R^ab - s g^ab / 2)`` at the base point from the Riemann tensor of ``nabla^g``."""
    g = _jet(g)
    g0 = g.primal().value
    gi = np.linalg.inv(g0)
    ric = ricci_tensor(christoffel(g)).primal().value
    ric = 0.5 * (ric + ric.T)
    s = float(np.einsum("jk,jk->", gi, ric))
    rho = np.sqrt(abs(np.linalg.det(g0)))
    return rho * (gi @ ric @ gi - 0.5 * s * gi)


def pair_scalar_from_ricci(g, gamma: JetPoly) -> float:
    """``g^jl S_jl`` with ``S`` the Ricci tensor of an arbitrary symmetric connection."""
    g = _jet(g)
    gi = np.linalg.inv(g.primal().value)
    return float(np.einsum("jl,jl->", gi, ricci_tensor(gamma).primal().value))
