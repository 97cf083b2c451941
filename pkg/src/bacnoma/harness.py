"""Monte Carlo experiments: the deterministic two-device study and sweeps.

Every scheme runs on the same channel draw within a trial (paired
comparison).  Per-trial seeds depend only on ``(master_seed, sweep_value,
trial_index)``, so results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .allocator import (
    AllocationResult,
    closed_form_two_user,
    grid_oracle,
    grid_slack,
    oma_allocation,
    random_allocation,
    solve_optimal,
)
from .model import Allocation, ScenarioConfig, average_sum_rate, two_device_scenario, sample_channels

SCHEMES = ("noma_optimal", "noma_random", "oma_roundrobin")
SWEEPS = ("none", "M", "alpha")
DEFAULT_SEED = 0xBAC0A
DEFAULT_TRIALS = 5000
REPORTED_P0 = 0.043
CSV_HEADER = ("sweep_value", "scheme", "mean_bpcu", "stderr_bpcu", "infeasible", "trials")


@dataclass(frozen=True)
class ExperimentSpec:
    base: ScenarioConfig
    sweep: str = "none"
    values: tuple = ()
    trials: int = DEFAULT_TRIALS
    schemes: tuple[str, ...] = SCHEMES
    master_seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise ValueError(f"sweep must be one of {SWEEPS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown or not self.schemes:
            raise ValueError(f"unknown schemes: {sorted(unknown)}" if unknown else "no schemes given")
        if self.sweep != "none" and not self.values:
            raise ValueError("sweep values must be non-empty")
        object.__setattr__(self, "values", tuple(self.values))
        # Validate every sweep point up front.
        for v in self.sweep_values():
            self.scenario_for(v)

    def sweep_values(self) -> tuple:
        return self.values if self.sweep != "none" else (float("nan"),)

    def scenario_for(self, value) -> ScenarioConfig:
        if self.sweep == "M":
            if int(value) != value:
                raise ValueError("device counts must be integers")
            return self.base.replace(M=int(value))
        if self.sweep == "alpha":
            return self.base.replace(alpha=float(value))
        return self.base

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "sweep": self.sweep,
            "values": list(self.values),
            "trials": self.trials,
            "schemes": list(self.schemes),
            "master_seed": self.master_seed,
        }


@dataclass(frozen=True)
class SweepRow:
    sweep_value: float
    scheme: str
    mean_bpcu: float | None
    stderr_bpcu: float | None
    infeasible: int
    trials: int


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    # Per-trial rates keyed by (sweep_value, scheme); nan marks infeasible.
    samples: dict = field(default_factory=dict, repr=False)

    def row(self, value, scheme: str) -> SweepRow:
        for r in self.rows:
            if r.scheme == scheme and (r.sweep_value == value or (math.isnan(r.sweep_value) and math.isnan(value))):
                return r
        raise KeyError((value, scheme))

    def series(self, scheme: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(values, means, stderrs) for one scheme, in sweep order."""
        rows = [r for r in self.rows if r.scheme == scheme]
        nanf = lambda v: math.nan if v is None else v  # noqa: E731
        return (
            np.array([r.sweep_value for r in rows]),
            np.array([nanf(r.mean_bpcu) for r in rows]),
            np.array([nanf(r.stderr_bpcu) for r in rows]),
        )


def _value_key(value) -> int:
    return int.from_bytes(struct.pack("<d", float(value)), "little")


def trial_rng(master_seed: int, sweep_value, trial_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(master_seed), _value_key(sweep_value), int(trial_index)])
    return np.random.default_rng(ss)


def _rate(res: AllocationResult) -> float:
    return res.p_star if res.feasible else math.nan


def run_trial(cfg: ScenarioConfig, schemes, master_seed: int, sweep_value, trial_index: int) -> dict[str, float]:
    """Rates (BPCU) of every scheme on one channel draw; ``nan`` if infeasible."""
    rng = trial_rng(master_seed, sweep_value, trial_index)
    ch = sample_channels(cfg, rng)
    params = cfg.params
    out = {}
    for s in schemes:
        if s == "noma_optimal":
            out[s] = _rate(solve_optimal(ch, params))
        elif s == "noma_random":
            out[s] = _rate(random_allocation(ch, params, rng))
        else:
            out[s] = _rate(oma_allocation(ch, params, trial_index % cfg.M + 1))
    return out


def _run_chunk(args) -> np.ndarray:
    cfg, schemes, master_seed, value, start, stop = args
    block = np.empty((stop - start, len(schemes)))
    for k, t in enumerate(range(start, stop)):
        r = run_trial(cfg, schemes, master_seed, value, t)
        block[k] = [r[s] for s in schemes]
    return block


def _summarize(rates: np.ndarray) -> tuple[float | None, float | None, int]:
    ok = rates[~np.isnan(rates)]
    infeasible = int(rates.size - ok.size)
    if ok.size == 0:
        return None, None, infeasible
    mean = float(ok.mean())
    se = float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else 0.0
    return mean, se, infeasible


def run_sweep(spec: ExperimentSpec, jobs: int = 1, chunk: int = 250) -> SweepResult:
    tasks, owners = [], []
    for i, v in enumerate(spec.sweep_values()):
        cfg = spec.scenario_for(v)
        for start in range(0, spec.trials, chunk):
            tasks.append((cfg, spec.schemes, spec.master_seed, v, start, min(start + chunk, spec.trials)))
            owners.append(i)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(_run_chunk, tasks))
    else:
        blocks = [_run_chunk(t) for t in tasks]

    result = SweepResult()
    for i, v in enumerate(spec.sweep_values()):
        rates = np.vstack([b for b, o in zip(blocks, owners) if o == i])
        for j, s in enumerate(spec.schemes):
            col = rates[:, j].copy()
            mean, se, inf = _summarize(col)
            result.rows.append(SweepRow(float(v), s, mean, se, inf, spec.trials))
            result.samples[(float(v), s)] = col
    return result


def _fmt(v) -> str:
    if v is None:
        return ""
    return f"{v:.9g}"


def emit_csv(result: SweepResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in result.rows:
            w.writerow([_fmt(r.sweep_value), r.scheme, _fmt(r.mean_bpcu), _fmt(r.stderr_bpcu), r.infeasible, r.trials])


def read_csv(path: str | Path) -> SweepResult:
    result = SweepResult()
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header}")
        for rec in rd:
            opt = lambda s: float(s) if s else None  # noqa: E731
            result.rows.append(
                SweepRow(float(rec[0]), rec[1], opt(rec[2]), opt(rec[3]), int(rec[4]), int(rec[5]))
            )
    return result


def write_metadata(spec: ExperimentSpec, path: str | Path, wall_time: float, notes: list[str] | None = None) -> None:
    meta = {
        "spec": spec.to_dict(),
        "versions": {
            "bacnoma": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "wall_time_s": wall_time,
        "notes": notes or [],
    }
    Path(path).write_text(json.dumps(meta, indent=2) + "\n")


def linear_trend(x, mean, se) -> tuple[float, float]:
    """Weighted least-squares slope of ``mean`` on ``x`` and its standard error."""
    x, mean, se = map(np.asarray, (x, mean, se))
    w = 1.0 / se**2
    xb = np.sum(w * x) / np.sum(w)
    sxx = np.sum(w * (x - xb) ** 2)
    slope = float(np.sum(w * (x - xb) * mean) / sxx)
    return slope, float(math.sqrt(1.0 / sxx))


@dataclass(frozen=True)
class DeterministicReport:
    lp: AllocationResult
    closed_form: AllocationResult
    grid_at_lp_p0: AllocationResult
    grid_at_reported_p0: AllocationResult
    rate_lp: float
    rate_closed_form: float
    rate_at_reported_p0: float
    p0_flatness: float
    grid_slack: float
    max_discrepancy: float
    steps: int

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("lp", "closed_form", "grid_at_lp_p0", "grid_at_reported_p0"):
            d[k] = getattr(self, k).to_dict()
        return d


def run_deterministic_study(cfg: ScenarioConfig | None = None, steps: int = 1000, reported_p0: float = REPORTED_P0) -> DeterministicReport:
    """LP, closed form and exhaustive search on the fixed two-device geometry."""
    cfg = cfg if cfg is not None else two_device_scenario()
    if cfg.fading or cfg.M != 2 or cfg.device_positions is None:
        raise ValueError("deterministic study needs M = 2, explicit placements and no fading")
    ch = sample_channels(cfg, np.random.default_rng(cfg.seed))
    params = cfg.params

    lp = solve_optimal(ch, params)
    if not lp.feasible:
        raise ValueError("deterministic instance is infeasible")
    cf = closed_form_two_user(ch, params)
    g_lp = grid_oracle(ch, params, lp.p0, steps)
    g_reported = grid_oracle(ch, params, reported_p0, steps)

    rate = lambda a: average_sum_rate(ch, a, params.alpha, params.sigma2)  # noqa: E731
    r_lp = rate(lp.allocation)
    r_cf = rate(cf.allocation)
    r_reported = rate(Allocation(reported_p0, lp.eta))
    objectives = [r_lp, r_cf, g_lp.p_star, g_reported.p_star]
    return DeterministicReport(
        lp=lp,
        closed_form=cf,
        grid_at_lp_p0=g_lp,
        grid_at_reported_p0=g_reported,
        rate_lp=r_lp,
        rate_closed_form=r_cf,
        rate_at_reported_p0=r_reported,
        p0_flatness=abs(r_reported - r_lp) / r_lp,
        grid_slack=grid_slack(ch, params, lp.p0, steps, lp.objective_ratio),
        max_discrepancy=max(objectives) - min(objectives),
        steps=steps,
    )


def default_sweep_spec(kind: str, trials: int = DEFAULT_TRIALS, seed: int = DEFAULT_SEED, **overrides) -> ExperimentSpec:
    """Device-count or self-interference sweep with the standard defaults."""
    if kind == "M":
        base = ScenarioConfig(M=2, alpha=0.01, r0=1.0, fading=True)
        values = overrides.pop("values", tuple(range(2, 9)))
    elif kind == "alpha":
        base = ScenarioConfig(M=overrides.pop("M", 4), alpha=0.01, r0=3.0, fading=True)
        values = overrides.pop("values", (0.01, 0.02, 0.05, 0.1, 0.2, 0.5))
    else:
        raise ValueError("kind must be 'M' or 'alpha'")
    if overrides:
        base = base.replace(**overrides)
    return ExperimentSpec(base, kind, tuple(values), trials, SCHEMES, seed)
