"""Independent reference implementations used only by the tests.

None of these share code paths with the package: E1 comes from an
arbitrary-precision series (mpmath) cross-checked by float quadrature, and
LPs are solved by enumerating every vertex.
"""

from __future__ import annotations

import itertools
import math

import mpmath as mp
import numpy as np
from scipy.integrate import quad


def _e1_series(t, dps: int):
    # Terms peak near exp(t) while the sum is about exp(-t): the cancellation
    # costs roughly 2 t / ln(10) digits.
    extra = int(2 * t / 2.302585) + 10
    with mp.workdps(dps + extra):
        t = mp.mpf(t)
        acc = mp.mpf(0)
        term = mp.mpf(1)
        k = 1
        eps = mp.mpf(10) ** (-(dps + extra) + 5)
        while True:
            term *= -t / k
            add = term / k
            acc += add
            if k > t and abs(add) < eps:
                break
            k += 1
        val = -mp.euler - mp.log(t) - acc
        return val, val * mp.exp(t)


def e1_series_mp(t: float, dps: int = 60) -> float:
    """E1(t) = -gamma - ln t - sum (-t)^k / (k k!), summed in high precision."""
    val, _ = _e1_series(t, dps)
    return float(val)


def e1_quadrature(t: float) -> float:
    val, _ = quad(lambda u: math.exp(-u) / u, t, math.inf, limit=200, epsabs=0, epsrel=1e-13)
    return val


def kernel_mp(x: float) -> float:
    """exp(1/x) E1(1/x) via the high-precision series."""
    _, scaled = _e1_series(1.0 / x, 60)
    return float(scaled)


def lp_vertex_enumeration(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol=1e-9):
    """Brute-force max c.x over {A_ub x <= b_ub, A_eq x = b_eq, x >= 0}.

    Returns (status, objective) with status 'Optimal' or 'Infeasible'.  Only
    valid for bounded feasible regions.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    G = [-np.eye(n)]
    h = [np.zeros(n)]
    if A_ub is not None and len(b_ub):
        G.append(np.asarray(A_ub, dtype=float))
        h.append(np.asarray(b_ub, dtype=float))
    G = np.vstack(G)
    h = np.concatenate(h)
    E = np.asarray(A_eq, dtype=float).reshape(-1, n) if A_eq is not None else np.zeros((0, n))
    e = np.asarray(b_eq, dtype=float) if b_eq is not None else np.zeros(0)

    # Any n independent rows of the combined system define a candidate vertex;
    # this also copes with redundant or all-zero equality rows.
    K = np.vstack([E, G])
    k = np.concatenate([e, h])
    best = None
    for rows in itertools.combinations(range(K.shape[0]), n):
        M = K[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, k[list(rows)])
        if (G @ x <= h + tol * (1 + np.abs(h))).all() and (np.abs(E @ x - e) <= tol * (1 + np.abs(e))).all():
            val = float(c @ x)
            if best is None or val > best:
                best = val
    if best is None:
        return "Infeasible", None
    return "Optimal", best


def polytope_vertices(A, b, tol=1e-12):
    """Every vertex of the bounded polytope {A x <= b} by brute force.

    Feasibility is judged on the residual relative to each row's magnitude,
    so tiny right-hand sides are not swamped by an absolute tolerance.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    out = []
    for rows in itertools.combinations(range(A.shape[0]), n):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, b[list(rows)])
        if (A @ x - b <= tol * (np.abs(A) @ np.abs(x) + np.abs(b))).all():
            out.append(x)
    return out


def fractional_vertex_max(a, d, s, A, b):
    """max a.x / (d.x + s) over {A x <= b}, with d.x + s > 0, by vertex enumeration."""
    verts = polytope_vertices(A, b)
    if not verts:
        return None
    return max(float(a @ x) / (float(d @ x) + s) for x in verts)
