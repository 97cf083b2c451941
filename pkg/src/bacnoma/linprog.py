"""Dense two-phase simplex for small linear programs.

Problems are stated as::

    maximize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

Pivoting uses Bland's rule, so the returned vertex is a deterministic
function of the input.  Inputs are expected to be reasonably scaled
(entries within a few orders of magnitude of 1); the allocator rescales
before calling in.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-11
COST_TOL = 1e-11
FEAS_TOL = 1e-9


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = c.size
        object.__setattr__(self, "c", c)
        for a_name, b_name in (("A_ub", "b_ub"), ("A_eq", "b_eq")):
            A, b = getattr(self, a_name), getattr(self, b_name)
            if A is None and b is None:
                A, b = np.zeros((0, n)), np.zeros(0)
            elif A is None or b is None:
                raise ValueError(f"{a_name} and {b_name} must be given together")
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if A.size == 0:
                A = A.reshape(b.size, n)
            if A.shape[1] != n:
                raise ValueError(f"{a_name} has {A.shape[1]} columns, expected {n}")
            if A.shape[0] != b.size:
                raise ValueError(f"{a_name} has {A.shape[0]} rows but {b_name} has {b.size}")
            object.__setattr__(self, a_name, A)
            object.__setattr__(self, b_name, b)

    @property
    def n(self) -> int:
        return self.c.size

    def with_objective(self, c) -> "LpProblem":
        return LpProblem(c, self.A_ub, self.b_ub, self.A_eq, self.b_eq)

    def is_feasible(self, x, rtol: float = 1e-8) -> bool:
        """Post-hoc check of ``x`` against every constraint."""
        x = np.asarray(x, dtype=float)
        if (x < -1e-10).any():
            return False
        if (self.A_ub @ x > self.b_ub + rtol * (1 + np.abs(self.b_ub))).any():
            return False
        return bool((np.abs(self.A_eq @ x - self.b_eq) <= rtol * (1 + np.abs(self.b_eq))).all())


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective_value: float | None = None
    iterations: int = 0
    basis: tuple[int, ...] = field(default=(), repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    f = T[:, col].copy()
    f[row] = 0.0
    T -= f[:, None] * T[row]


def _run(T: np.ndarray, basis: list[int], allowed: int, max_iter: int) -> tuple[str, int]:
    """Bland-rule simplex on tableau ``T`` (last row holds reduced costs).

    Only columns ``< allowed`` may enter.  Returns (outcome, iterations).
    """
    m = T.shape[0] - 1
    ratios = np.empty(m)
    for it in range(max_iter):
        neg = T[m, :allowed] < -COST_TOL
        col = int(neg.argmax())
        if not neg[col]:
            return "optimal", it
        colv = T[:m, col]
        mask = colv > PIVOT_TOL
        if not mask.any():
            return "unbounded", it
        ratios.fill(np.inf)
        np.divide(T[:m, -1], colv, out=ratios, where=mask)
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + 1e-12 * (1.0 + abs(rmin)))
        row = int(ties[0]) if ties.size == 1 else min(ties.tolist(), key=basis.__getitem__)
        _pivot(T, row, col)
        basis[row] = col
    raise RuntimeError("simplex iteration limit reached")


def solve(p: LpProblem, max_iter: int | None = None) -> LpSolution:
    """Solve ``p`` and return a basic optimal solution, or the failure status."""
    n = p.n
    m_ub, m_eq = p.b_ub.size, p.b_eq.size
    m = m_ub + m_eq

    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = p.A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = p.A_eq
    b = np.concatenate([p.b_ub, p.b_eq])
    neg = b < 0
    A[neg] *= -1.0
    b = np.where(neg, -b, b)

    # Rows whose slack cannot start basic get an artificial variable.
    needs_art = np.ones(m, dtype=bool)
    needs_art[:m_ub] = neg[:m_ub]
    art_rows = np.flatnonzero(needs_art)
    n_std = n + m_ub
    n_art = art_rows.size
    ncols = n_std + n_art

    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n_std] = A
    T[art_rows, n_std + np.arange(n_art)] = 1.0
    T[:m, -1] = b
    basis = [n + i if i < m_ub and not neg[i] else -1 for i in range(m)]
    for k, r in enumerate(art_rows):
        basis[r] = n_std + k

    if max_iter is None:
        max_iter = 50 * (m + ncols + 1)
    iters = 0

    if n_art:
        # Phase 1: maximize -sum(artificials); reduced costs = -sum of art rows.
        T[m, :] = -T[art_rows].sum(axis=0)
        T[m, n_std:ncols] = 0.0
        _, k = _run(T, basis, ncols, max_iter)
        iters += k
        # T[m, -1] is the phase-1 value, i.e. -(sum of artificials).
        if -T[m, -1] > FEAS_TOL * (1.0 + np.abs(b).max()):
            return LpSolution(LpStatus.INFEASIBLE, iterations=iters)
        # Drive zero-level artificials out of the basis; drop redundant rows.
        keep = []
        for r in range(m):
            if basis[r] >= n_std:
                nz = np.flatnonzero(np.abs(T[r, :n_std]) > PIVOT_TOL)
                if nz.size == 0:
                    continue
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
            keep.append(r)
        if len(keep) < m:
            T = np.vstack([T[keep], T[m:]])
            basis = [basis[r] for r in keep]
            A, b = A[keep], b[keep]
            m = len(keep)
        T = np.delete(T, np.s_[n_std:ncols], axis=1)

    # Phase 2 on a normalized objective so tolerances are scale-free.
    cmax = np.abs(p.c).max() if n else 0.0
    cs = np.zeros(n_std)
    if cmax > 0:
        cs[:n] = p.c / cmax
    cb = cs[basis]
    T[m, :n_std] = cb @ T[:m, :n_std] - cs
    T[m, -1] = cb @ T[:m, -1]
    outcome, k = _run(T, basis, n_std, max_iter)
    iters += k
    if outcome == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, iterations=iters)

    # Re-solve the final basis against the original data to shed pivot drift.
    xb = T[:m, -1]
    if m:
        try:
            B = A[:, basis]
            xb = np.linalg.solve(B, b)
            # One refinement step: rows with tiny rhs lose digits to the big ones.
            xb = xb + np.linalg.solve(B, b - B @ xb)
        except np.linalg.LinAlgError:
            pass
    x_std = np.zeros(n_std)
    x_std[basis] = np.maximum(xb, 0.0)
    x = x_std[:n]
    return LpSolution(LpStatus.OPTIMAL, x, float(p.c @ x), iters, tuple(basis))


def random_vertex(constraints: LpProblem, rng: np.random.Generator) -> LpSolution:
    """Vertex of the feasible region picked by a uniformly random direction.

    The objective of ``constraints`` is ignored and replaced by a unit vector
    drawn uniformly from the sphere using ``rng``.
    """
    v = rng.standard_normal(constraints.n)
    v /= np.linalg.norm(v)
    return solve(constraints.with_objective(v))
