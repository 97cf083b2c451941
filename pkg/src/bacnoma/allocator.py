"""Resource allocation for BAC-NOMA uplink/downlink spectrum sharing.

The decision vector is ``p = [P0, P1, ..., PM]`` with ``Pm = eta_m * P0``.
Maximizing the average uplink sum rate under the downlink QoS constraint
reduces, because the rate kernel is increasing, to the linear-fractional
program

    maximize  a.p / (d.p + sigma2)   subject to  A p <= b,

which the Charnes-Cooper substitution ``y = p / (d.p + sigma2)``,
``z = 1 / (d.p + sigma2)`` turns into an LP.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import linprog
from .model import LOG2E, Allocation, ChannelRealization, SystemParams, average_sum_rate
from .specfun import avg_rate_kernel, avg_rate_kernel_derivative

Z_MIN = 1e-12


class AllocStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


class SolverError(RuntimeError):
    """The LP solver failed on a problem that should be solvable."""


@dataclass(frozen=True)
class CompactProblem:
    """Vectors and matrices of the compact problem, in watts.

    ``A`` rows: QoS row, ``-P_m <= 0``, ``P_m - P0 <= 0``, ``-P0 <= 0``,
    ``P0 <= p_max``.  The ``*_scale`` fields record the normalization used
    when the problem is handed to the simplex.
    """

    a: np.ndarray
    d: np.ndarray
    a1: np.ndarray
    A: np.ndarray
    b: np.ndarray
    sigma2: float
    p_max: float
    row_scale: np.ndarray
    gain_scale: float
    den_scale: float

    @property
    def M(self) -> int:
        return self.a.size - 1

    def ratio(self, p) -> float:
        """The fractional objective ``a.p / (d.p + sigma2)``."""
        p = np.asarray(p, dtype=float)
        return float(self.a @ p) / (float(self.d @ p) + self.sigma2)

    def scaled(self):
        """Return ``(A_hat, b_hat, a_hat, d_hat, s_hat)`` for ``q = p / p_max``."""
        A_hat = self.A / self.row_scale[:, None]
        b_hat = self.b / (self.p_max * self.row_scale)
        a_hat = self.a / self.gain_scale if self.gain_scale > 0 else self.a.copy()
        d_hat = self.d / self.den_scale
        s_hat = self.sigma2 / (self.p_max * self.den_scale)
        return A_hat, b_hat, a_hat, d_hat, s_hat

    def residual(self, p) -> np.ndarray:
        """``A p - b``, relative to each row's magnitude (positive = violated)."""
        p = np.asarray(p, dtype=float)
        mag = np.abs(self.A) @ np.abs(p) + np.abs(self.b)
        mag = np.where(mag > 0, mag, 1.0)
        return (self.A @ p - self.b) / mag


def build_compact(ch: ChannelRealization, alpha: float, sigma2: float, eps0: float, p_max: float) -> CompactProblem:
    if eps0 < 0:
        raise ValueError("eps0 must be >= 0")
    M = ch.M
    a = np.concatenate([[0.0], ch.h_sq**2])
    d = np.zeros(M + 1)
    d[0] = alpha * ch.hsi_sq
    a1 = eps0 * ch.g_sq * ch.h_sq

    A = np.zeros((2 * M + 3, M + 1))
    A[0, 0] = -ch.h0_sq
    A[0, 1:] = a1
    A[1 : M + 1, 1:] = -np.eye(M)
    A[M + 1 : 2 * M + 1, 0] = -1.0
    A[M + 1 : 2 * M + 1, 1:] = np.eye(M)
    A[2 * M + 1, 0] = -1.0
    A[2 * M + 2, 0] = 1.0
    b = np.zeros(2 * M + 3)
    b[0] = -eps0 * sigma2
    b[-1] = p_max

    row_scale = np.abs(A).max(axis=1)
    row_scale[row_scale == 0] = 1.0
    gain_scale = float(a.max())
    den_scale = max(float(d.max()), sigma2 / p_max)
    return CompactProblem(a, d, a1, A, b, sigma2, p_max, row_scale, gain_scale, den_scale)


@dataclass(frozen=True)
class AllocationResult:
    status: AllocStatus
    allocation: Allocation | None = None
    p_vector: np.ndarray | None = None
    objective_ratio: float | None = None
    p_star: float | None = None
    # LP-side diagnostics (Charnes-Cooper schemes only).
    lp_ratio: float | None = None
    z_star: float | None = None

    @property
    def feasible(self) -> bool:
        return self.status is AllocStatus.OPTIMAL

    @property
    def eta(self) -> np.ndarray:
        return self.allocation.eta

    @property
    def p0(self) -> float:
        return self.allocation.p0

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            return v

        out = {"status": self.status.value}
        if self.allocation is not None:
            out["allocation"] = {"p0": self.allocation.p0, "eta": self.allocation.eta.tolist()}
        for name in ("p_vector", "objective_ratio", "p_star", "lp_ratio", "z_star"):
            v = getattr(self, name)
            if v is not None:
                out[name] = conv(v)
        return out


INFEASIBLE = AllocationResult(AllocStatus.INFEASIBLE)


def qos_attainable(ch: ChannelRealization, params: SystemParams) -> bool:
    """Whether the downlink target is reachable at all (with every eta = 0)."""
    return params.p_max * ch.h0_sq >= params.eps0 * params.sigma2


def _result_from_p(cp: CompactProblem, ch: ChannelRealization, params: SystemParams, p, **extra) -> AllocationResult:
    p = np.asarray(p, dtype=float).copy()
    p[0] = min(max(p[0], 0.0), params.p_max)
    p[1:] = np.clip(p[1:], 0.0, p[0])
    eta = p[1:] / p[0] if p[0] > 0 else np.zeros(ch.M)
    alloc = Allocation(p[0], eta)
    ratio = cp.ratio(p)
    return AllocationResult(
        AllocStatus.OPTIMAL,
        alloc,
        p,
        ratio,
        LOG2E * avg_rate_kernel(ratio),
        **extra,
    )


def _solve_fractional(ch: ChannelRealization, params: SystemParams, objective_scale: float) -> AllocationResult:
    if not qos_attainable(ch, params):
        return INFEASIBLE
    cp = build_compact(ch, params.alpha, params.sigma2, params.eps0, params.p_max)
    if cp.gain_scale == 0:
        # No uplink gain: every allocation yields zero rate.
        p = np.zeros(ch.M + 1)
        p[0] = params.p_max
        return _result_from_p(cp, ch, params, p)

    A_hat, b_hat, a_hat, d_hat, s_hat = cp.scaled()
    n = ch.M + 1
    lp = linprog.LpProblem(
        c=np.concatenate([objective_scale * a_hat, [0.0]]),
        A_ub=np.hstack([A_hat, -b_hat[:, None]]),
        b_ub=np.zeros(A_hat.shape[0]),
        A_eq=np.concatenate([d_hat, [s_hat]])[None, :],
        b_eq=np.ones(1),
    )
    sol = linprog.solve(lp)
    if sol.status is linprog.LpStatus.INFEASIBLE:
        return INFEASIBLE
    if not sol.optimal:
        raise SolverError(f"Charnes-Cooper LP returned {sol.status.value}")
    y, z = sol.x[:n], sol.x[n]
    if z <= Z_MIN:
        raise SolverError(f"Charnes-Cooper LP returned z* = {z:.3e}; cannot recover p")
    p = params.p_max * y / z
    lp_ratio = cp.gain_scale / cp.den_scale * float(a_hat @ y)
    return _result_from_p(cp, ch, params, p, lp_ratio=lp_ratio, z_star=float(z))


def solve_optimal(ch: ChannelRealization, params: SystemParams) -> AllocationResult:
    """Average-sum-rate optimal allocation via the Charnes-Cooper LP."""
    return _solve_fractional(ch, params, 1.0)


def solve_instantaneous(ch: ChannelRealization, params: SystemParams, s0_sq: float) -> AllocationResult:
    """Allocation maximizing the sum rate at a known excitation power ``|s0|^2``.

    Only the LP objective changes (scaled by ``s0_sq``), so the argmax
    coincides with :func:`solve_optimal`.
    """
    if not s0_sq > 0:
        raise ValueError("s0_sq must be > 0")
    return _solve_fractional(ch, params, float(s0_sq))


def closed_form_two_user(ch: ChannelRealization, params: SystemParams) -> AllocationResult:
    """High-SNR two-device solution by vertex enumeration, with ``P0 = p_max``.

    Maximizes ``eta1 |h1|^4 + eta2 |h2|^4`` over the unit square cut by
    ``eta1 c1 + eta2 c2 <= |h0|^2 / eps0`` with ``cm = |gm|^2 |hm|^2``.
    """
    if ch.M != 2:
        raise ValueError(f"closed form needs exactly two devices, got M = {ch.M}")
    c1, c2 = ch.g_sq * ch.h_sq
    w1, w2 = ch.h_sq**2
    budget = ch.h0_sq / params.eps0 if params.eps0 > 0 else math.inf

    cands = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
    if c2 > 0:
        cands += [(0.0, budget / c2), (1.0, (budget - c1) / c2)]
    if c1 > 0:
        cands += [(budget / c1, 0.0), ((budget - c2) / c1, 1.0)]

    def feasible(e1, e2):
        return 0 <= e1 <= 1 and 0 <= e2 <= 1 and e1 * c1 + e2 * c2 <= budget * (1 + 1e-12)

    pts = [(e1, e2) for e1, e2 in cands if feasible(e1, e2)]
    best = max(w1 * e1 + w2 * e2 for e1, e2 in pts)
    tol = 1e-12 * max(best, 1e-300)
    eta = max((e for e in pts if w1 * e[0] + w2 * e[1] >= best - tol), key=lambda e: (e[0], e[1]))

    cp = build_compact(ch, params.alpha, params.sigma2, params.eps0, params.p_max)
    p = params.p_max * np.array([1.0, eta[0], eta[1]])
    return _result_from_p(cp, ch, params, p)


def random_allocation(ch: ChannelRealization, params: SystemParams, rng: np.random.Generator) -> AllocationResult:
    """A feasible allocation found as a random vertex of the constraint set."""
    if not qos_attainable(ch, params):
        return INFEASIBLE
    cp = build_compact(ch, params.alpha, params.sigma2, params.eps0, params.p_max)
    A_hat, b_hat, *_ = cp.scaled()
    sol = linprog.random_vertex(linprog.LpProblem(np.zeros(ch.M + 1), A_hat, b_hat), rng)
    if sol.status is linprog.LpStatus.INFEASIBLE:
        return INFEASIBLE
    if not sol.optimal:
        raise SolverError(f"feasibility LP returned {sol.status.value}")
    return _result_from_p(cp, ch, params, params.p_max * sol.x)


def oma_allocation(ch: ChannelRealization, params: SystemParams, device_index: int) -> AllocationResult:
    """Optimal allocation when only device ``device_index`` (1-based) is served."""
    if not 1 <= device_index <= ch.M:
        raise ValueError(f"device_index must be in 1..{ch.M}")
    single = solve_optimal(ch.subset([device_index - 1]), params)
    if not single.feasible:
        return single
    eta = np.zeros(ch.M)
    eta[device_index - 1] = single.eta[0]
    p = np.zeros(ch.M + 1)
    p[0] = single.p0
    p[device_index] = single.p_vector[1]
    return AllocationResult(
        AllocStatus.OPTIMAL,
        Allocation(single.p0, eta),
        p,
        single.objective_ratio,
        single.p_star,
        single.lp_ratio,
        single.z_star,
    )


def grid_oracle(ch: ChannelRealization, params: SystemParams, p0_fixed: float, steps: int) -> AllocationResult:
    """Exhaustive search over an eta grid with spacing ``1/steps`` at fixed ``P0``.

    Grid points violating the downlink QoS constraint are skipped.  The
    returned ``p_star`` is the best average sum rate found.
    """
    M = ch.M
    if M > 3:
        raise ValueError("grid oracle is limited to M <= 3")
    if steps < 100:
        raise ValueError("grid oracle needs steps >= 100")
    if not 0 < p0_fixed <= params.p_max:
        raise ValueError("p0_fixed must lie in (0, p_max]")

    axis = np.arange(steps + 1) / steps
    grids = np.meshgrid(*([axis] * M), indexing="ij")
    etas = np.stack([g.ravel() for g in grids], axis=1)

    interference = p0_fixed * (etas @ (ch.g_sq * ch.h_sq))
    ok = p0_fixed * ch.h0_sq >= params.eps0 * (interference + params.sigma2)
    if not ok.any():
        return INFEASIBLE
    etas = etas[ok]
    x = p0_fixed * (etas @ ch.h_sq**2) / (params.alpha * p0_fixed * ch.hsi_sq + params.sigma2)
    rates = LOG2E * np.asarray(avg_rate_kernel(x))
    k = int(np.argmax(rates))

    cp = build_compact(ch, params.alpha, params.sigma2, params.eps0, params.p_max)
    p = np.concatenate([[p0_fixed], p0_fixed * etas[k]])
    return AllocationResult(AllocStatus.OPTIMAL, Allocation(p0_fixed, etas[k]), p, cp.ratio(p), float(rates[k]))


def grid_slack(ch: ChannelRealization, params: SystemParams, p0: float, steps: int, x_opt: float) -> float:
    """Upper bound on the rate the grid can lose against a continuous optimum.

    ``x_opt`` is the optimum's SINR scale at the same ``P0``.  Rounding each
    eta down to the grid keeps the QoS constraint satisfied and lowers the
    SINR scale by less than ``dx = P0 sum|hm|^4 / (alpha P0 |h_SI|^2 + sigma2)
    / steps``.  The kernel is concave with ``f'(0+) = 1``, so the loss is at
    most ``log2(e) f'(max(x_opt - dx, 0)) dx``.
    """
    den = params.alpha * p0 * ch.hsi_sq + params.sigma2
    dx = p0 * float(np.sum(ch.h_sq**2)) / den / steps
    x_lo = x_opt - dx
    slope = avg_rate_kernel_derivative(x_lo) if x_lo > 0 else 1.0
    return LOG2E * slope * dx


def achieved_rate(ch: ChannelRealization, params: SystemParams, res: AllocationResult) -> float:
    """Average sum rate (BPCU) of a result's allocation, ``nan`` if infeasible."""
    if not res.feasible:
        return math.nan
    return average_sum_rate(ch, res.allocation, params.alpha, params.sigma2)
