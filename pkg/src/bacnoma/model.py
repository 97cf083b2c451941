"""Scenario description, channel sampling and rate formulas.

Rates are reported in bits per channel use (BPCU).  Channel gains are
linear power gains ``|h|^2``; the uplink signal traverses the device link
twice so the sum rate uses ``|h_m|^4``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .specfun import avg_rate_kernel

LOG2E = math.log2(math.e)


class ConfigError(ValueError):
    """Invalid or incomplete scenario configuration."""


def dbm_to_watts(v):
    out = 10.0 ** ((np.asarray(v, dtype=float) - 30.0) / 10.0)
    return float(out) if out.ndim == 0 else out


def watts_to_dbm(w):
    arr = np.asarray(w, dtype=float)
    if (arr <= 0).any():
        raise ValueError("power must be positive to express in dBm")
    out = 10.0 * np.log10(arr) + 30.0
    return float(out) if out.ndim == 0 else out


def epsilon0(r0: float) -> float:
    """SINR threshold equivalent to a target rate of ``r0`` BPCU."""
    if r0 < 0:
        raise ValueError("target rate must be >= 0")
    return 2.0**r0 - 1.0


@dataclass(frozen=True)
class SystemParams:
    """The scalar parameters every allocation scheme needs."""

    alpha: float
    sigma2: float
    r0: float
    p_max: float

    @property
    def eps0(self) -> float:
        return epsilon0(self.r0)


@dataclass(frozen=True)
class ScenarioConfig:
    M: int = 2
    bs_position: tuple[float, float] = (0.0, 0.0)
    user_position: tuple[float, float] = (3.0, 0.0)
    # Explicit coordinates, or None for uniform placement in a square.
    device_positions: tuple[tuple[float, float], ...] | None = None
    square_edge: float = 5.0
    path_loss_exponent: float = 3.0
    alpha: float = 0.01
    sigma2: float = dbm_to_watts(-94.0)
    p_max: float = dbm_to_watts(20.0)
    r0: float = 1.0
    fading: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.device_positions is not None:
            pos = tuple((float(x), float(y)) for x, y in self.device_positions)
            object.__setattr__(self, "device_positions", pos)
            if len(pos) != self.M:
                raise ConfigError(f"device_placement lists {len(pos)} positions but M = {self.M}")
        object.__setattr__(self, "bs_position", tuple(map(float, self.bs_position)))
        object.__setattr__(self, "user_position", tuple(map(float, self.user_position)))
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if self.path_loss_exponent <= 0:
            raise ConfigError("path_loss_exponent must be > 0")
        if not 0 <= self.alpha < 1:
            raise ConfigError("alpha must lie in [0, 1)")
        if self.sigma2 <= 0:
            raise ConfigError("sigma2 must be > 0")
        if self.p_max <= 0:
            raise ConfigError("p_max must be > 0")
        if self.r0 <= 0:
            raise ConfigError("r0 must be > 0")
        if self.device_positions is None and self.square_edge <= 0:
            raise ConfigError("square edge must be > 0")

    @property
    def params(self) -> SystemParams:
        return SystemParams(self.alpha, self.sigma2, self.r0, self.p_max)

    def replace(self, **changes) -> "ScenarioConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        if "M" in changes and "device_positions" not in changes and d["device_positions"] is not None:
            raise ConfigError("changing M requires new device positions")
        return ScenarioConfig(**d)

    def to_dict(self) -> dict:
        placement = (
            [list(p) for p in self.device_positions]
            if self.device_positions is not None
            else {"uniform_square": self.square_edge}
        )
        return {
            "M": self.M,
            "bs_position": list(self.bs_position),
            "user_position": list(self.user_position),
            "device_placement": placement,
            "path_loss_exponent": self.path_loss_exponent,
            "alpha": self.alpha,
            "sigma2": self.sigma2,
            "p_max": self.p_max,
            "r0": self.r0,
            "fading": self.fading,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        kw = {}
        for name in ("sigma2", "p_max"):
            if name in d:
                kw[name] = float(d.pop(name))
            elif name + "_dbm" in d:
                kw[name] = dbm_to_watts(float(d.pop(name + "_dbm")))
            else:
                raise ConfigError(f"missing field: {name} (or {name}_dbm)")
        required = ("M", "bs_position", "user_position", "device_placement",
                    "path_loss_exponent", "alpha", "r0", "fading")
        for name in required:
            if name not in d:
                raise ConfigError(f"missing field: {name}")
        placement = d.pop("device_placement")
        if isinstance(placement, dict):
            if "uniform_square" not in placement:
                raise ConfigError("device_placement object must have 'uniform_square'")
            kw["square_edge"] = float(placement["uniform_square"])
            kw["device_positions"] = None
        else:
            kw["device_positions"] = tuple(tuple(p) for p in placement)
        unknown = set(d) - set(required) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown fields: {sorted(unknown)}")
        try:
            return cls(
                M=int(d["M"]),
                bs_position=tuple(d["bs_position"]),
                user_position=tuple(d["user_position"]),
                path_loss_exponent=float(d["path_loss_exponent"]),
                alpha=float(d["alpha"]),
                r0=float(d["r0"]),
                fading=bool(d["fading"]),
                seed=int(d.get("seed", 0)),
                **kw,
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class ChannelRealization:
    h0_sq: float
    h_sq: np.ndarray
    g_sq: np.ndarray
    hsi_sq: float = 1.0

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.h_sq, dtype=float))
        g = np.atleast_1d(np.asarray(self.g_sq, dtype=float))
        if h.shape != g.shape or h.ndim != 1:
            raise ValueError("h_sq and g_sq must be vectors of equal length")
        vals = np.concatenate([h, g, [self.h0_sq, self.hsi_sq]])
        if not np.isfinite(vals).all() or (vals < 0).any():
            raise ValueError("channel gains must be finite and >= 0")
        object.__setattr__(self, "h_sq", h)
        object.__setattr__(self, "g_sq", g)
        object.__setattr__(self, "h0_sq", float(self.h0_sq))
        object.__setattr__(self, "hsi_sq", float(self.hsi_sq))

    @property
    def M(self) -> int:
        return self.h_sq.size

    def subset(self, indices: Sequence[int]) -> "ChannelRealization":
        """Restrict to the devices at 0-based ``indices``."""
        idx = list(indices)
        return ChannelRealization(self.h0_sq, self.h_sq[idx], self.g_sq[idx], self.hsi_sq)


@dataclass(frozen=True)
class Allocation:
    p0: float
    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eta", np.atleast_1d(np.asarray(self.eta, dtype=float)))
        object.__setattr__(self, "p0", float(self.p0))

    @property
    def powers(self) -> np.ndarray:
        """Reflected powers ``P_m = eta_m * P_0``."""
        return self.eta * self.p0

    def is_valid(self, p_max: float, tol: float = 1e-12) -> bool:
        return (
            -tol <= self.p0 <= p_max * (1 + tol)
            and bool((self.eta >= -tol).all())
            and bool((self.eta <= 1 + tol).all())
        )


@dataclass(frozen=True)
class RateReport:
    avg_sum_rate: float
    inst_sum_rate: float
    downlink_rate: float


def _placement_distances(points: np.ndarray, ref) -> np.ndarray:
    return np.hypot(points[:, 0] - ref[0], points[:, 1] - ref[1])


def sample_channels(s: ScenarioConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw one channel realization (path loss times optional Rayleigh fading)."""
    bs = np.asarray(s.bs_position)
    ue = np.asarray(s.user_position)
    if s.device_positions is not None:
        pts = np.asarray(s.device_positions, dtype=float)
        d_h = _placement_distances(pts, bs)
        d_g = _placement_distances(pts, ue)
        if (d_h == 0).any() or (d_g == 0).any():
            raise ConfigError("a device is colocated with the base station or the user")
    else:
        half = s.square_edge / 2.0
        pts = bs + rng.uniform(-half, half, size=(s.M, 2))
        d_h = _placement_distances(pts, bs)
        d_g = _placement_distances(pts, ue)
        while (d_h == 0).any() or (d_g == 0).any():
            bad = (d_h == 0) | (d_g == 0)
            pts[bad] = bs + rng.uniform(-half, half, size=(int(bad.sum()), 2))
            d_h = _placement_distances(pts, bs)
            d_g = _placement_distances(pts, ue)
    d_0 = float(np.hypot(*(ue - bs)))
    if d_0 == 0:
        raise ConfigError("user is colocated with the base station")

    nu = s.path_loss_exponent
    h0_sq = d_0**-nu
    h_sq = d_h**-nu
    g_sq = d_g**-nu
    hsi_sq = 1.0
    if s.fading:
        # |CN(0,1)|^2 per link: h0, h_1..h_M, g_1..g_M, h_SI.
        z = (rng.standard_normal(2 * s.M + 2) + 1j * rng.standard_normal(2 * s.M + 2)) / math.sqrt(2.0)
        fade = np.abs(z) ** 2
        h0_sq *= fade[0]
        h_sq = h_sq * fade[1 : s.M + 1]
        g_sq = g_sq * fade[s.M + 1 : 2 * s.M + 1]
        hsi_sq = float(fade[-1])
    return ChannelRealization(h0_sq, h_sq, g_sq, hsi_sq)


def sinr_scale(ch: ChannelRealization, a: Allocation, alpha: float, sigma2: float) -> float:
    """Uplink SINR per unit ``|s0|^2``: ``sum P_m |h_m|^4 / (alpha P0 |h_SI|^2 + sigma2)``."""
    num = float(np.dot(a.powers, ch.h_sq**2))
    return num / (alpha * a.p0 * ch.hsi_sq + sigma2)


def instantaneous_sum_rate(ch: ChannelRealization, a: Allocation, s0_sq, alpha: float, sigma2: float):
    """Uplink sum rate conditioned on the excitation power ``|s0|^2``."""
    x = sinr_scale(ch, a, alpha, sigma2)
    out = np.log2(1.0 + x * np.asarray(s0_sq, dtype=float))
    return float(out) if out.ndim == 0 else out


def average_sum_rate(ch: ChannelRealization, a: Allocation, alpha: float, sigma2: float) -> float:
    """Uplink sum rate averaged over ``|s0|^2 ~ Exp(1)``."""
    return LOG2E * avg_rate_kernel(sinr_scale(ch, a, alpha, sigma2))


def downlink_sinr(ch: ChannelRealization, a: Allocation, sigma2: float) -> float:
    interference = float(np.dot(a.powers, ch.g_sq * ch.h_sq))
    return a.p0 * ch.h0_sq / (interference + sigma2)


def downlink_rate(ch: ChannelRealization, a: Allocation, sigma2: float) -> float:
    return math.log2(1.0 + downlink_sinr(ch, a, sigma2))


def rate_report(ch: ChannelRealization, a: Allocation, alpha: float, sigma2: float, s0_sq: float = 1.0) -> RateReport:
    return RateReport(
        average_sum_rate(ch, a, alpha, sigma2),
        instantaneous_sum_rate(ch, a, s0_sq, alpha, sigma2),
        downlink_rate(ch, a, sigma2),
    )


def two_device_scenario(**overrides) -> ScenarioConfig:
    """The deterministic two-device geometry (no fading)."""
    base = dict(
        M=2,
        device_positions=((-2.0, 0.0), (2.0, 0.0)),
        alpha=0.005,
        r0=1.0,
        fading=False,
    )
    base.update(overrides)
    return ScenarioConfig(**base)
