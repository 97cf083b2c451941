"""Exponential integral and the average-rate kernel.

The kernel ``f(x) = -exp(1/x) * Ei(-1/x)`` is the expectation of
``ln(1 + x*X)`` for ``X ~ Exp(1)``.  All outputs are in nats.

Every public function accepts a float or an ndarray and returns the same
shape (a plain ``float`` for scalar input).
"""

from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061

# E1 series for t <= 1 and continued fraction for t > 1.
_SWITCHOVER = 1.0
_SERIES_TERMS = 30
_CF_MAX_ITER = 500
_CF_TOL = 1e-16


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _as_array(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if np.isnan(arr).any():
        raise DomainError(f"{name} must not be NaN")
    return arr


def _out(arr: np.ndarray):
    return float(arr) if arr.ndim == 0 else arr


def _e1_series(t: np.ndarray) -> np.ndarray:
    # E1(t) = -gamma - ln t - sum_{k>=1} (-t)^k / (k * k!)
    acc = np.zeros_like(t)
    term = np.ones_like(t)
    for k in range(1, _SERIES_TERMS + 1):
        term = term * (-t) / k
        acc += term / k
    return -EULER_GAMMA - np.log(t) - acc


def _e1_scaled_cf(t: np.ndarray) -> np.ndarray:
    """exp(t) * E1(t) for t > 1 by modified Lentz on the continued fraction."""
    tiny = 1e-300
    b = t + 1.0
    c = np.full_like(t, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _CF_MAX_ITER + 1):
        a = -float(i * i)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if np.all(np.abs(delta - 1.0) < _CF_TOL):
            break
    return h


def _e1_series_scalar(t: float) -> float:
    acc = 0.0
    term = 1.0
    for k in range(1, _SERIES_TERMS + 1):
        term *= -t / k
        acc += term / k
        if abs(term) < 1e-17 * abs(acc):
            break
    return -EULER_GAMMA - math.log(t) - acc


def _e1_scaled_cf_scalar(t: float) -> float:
    tiny = 1e-300
    b = t + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITER + 1):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            break
    return h


def _check_scalar(t: float) -> float:
    t = float(t)
    if not t > 0:
        raise DomainError("E1 requires t > 0" if not math.isnan(t) else "t must not be NaN")
    return t


def e1_scaled(t):
    """Return ``exp(t) * E1(t)`` for t > 0 without overflow for large t."""
    if np.ndim(t) == 0:
        t = _check_scalar(t)
        return math.exp(t) * _e1_series_scalar(t) if t <= _SWITCHOVER else _e1_scaled_cf_scalar(t)
    arr = _as_array(t, "t")
    if (arr <= 0).any():
        raise DomainError("E1 requires t > 0")
    out = np.empty_like(arr)
    lo = arr <= _SWITCHOVER
    if lo.any():
        out[lo] = np.exp(arr[lo]) * _e1_series(arr[lo])
    if (~lo).any():
        out[~lo] = _e1_scaled_cf(arr[~lo])
    return _out(out)


def e1(t):
    """Exponential integral ``E1(t) = int_t^inf exp(-u)/u du`` for t > 0."""
    if np.ndim(t) == 0:
        t = _check_scalar(t)
        return _e1_series_scalar(t) if t <= _SWITCHOVER else math.exp(-t) * _e1_scaled_cf_scalar(t)
    arr = _as_array(t, "t")
    if (arr <= 0).any():
        raise DomainError("E1 requires t > 0")
    out = np.empty_like(arr)
    lo = arr <= _SWITCHOVER
    if lo.any():
        out[lo] = _e1_series(arr[lo])
    if (~lo).any():
        hi = arr[~lo]
        out[~lo] = np.exp(-hi) * _e1_scaled_cf(hi)
    return _out(out)


def ei_neg(t):
    """``Ei(-t)`` for t > 0; always negative."""
    return _out(-np.asarray(e1(t)))


def avg_rate_kernel(x):
    """``f(x) = -exp(1/x) Ei(-1/x)`` in nats, with ``f(0) = 0``.

    Evaluated as ``e1_scaled(1/x)`` so small ``x`` never overflows ``exp(1/x)``.
    """
    if np.ndim(x) == 0:
        x = float(x)
        if math.isnan(x) or x < 0:
            raise DomainError("kernel argument must be >= 0")
        return e1_scaled(1.0 / x) if x > 0 else 0.0
    arr = _as_array(x, "x")
    if (arr < 0).any():
        raise DomainError("kernel argument must be >= 0")
    out = np.zeros_like(arr)
    pos = arr > 0
    if pos.any():
        out[pos] = e1_scaled(1.0 / arr[pos])
    return _out(out)


def avg_rate_kernel_derivative(x):
    """Closed-form ``f'(x) = exp(1/x) Ei(-1/x) / x**2 + 1/x`` for x > 0."""
    arr = _as_array(x, "x")
    if (arr <= 0).any():
        raise DomainError("derivative requires x > 0")
    f = np.asarray(avg_rate_kernel(arr))
    return _out(1.0 / arr - f / arr**2)


def slope_witness(x):
    """``g(x) = Ei(-1/x) + x exp(-1/x)``.

    ``f'(x) = exp(1/x) g(x) / x**2``, so ``g >= 0`` everywhere is what makes
    the kernel increasing.  ``g(x) -> 0`` as ``x -> 0+``.
    """
    arr = _as_array(x, "x")
    if (arr <= 0).any():
        raise DomainError("g requires x > 0")
    t = 1.0 / arr
    return _out(np.exp(-t) * (arr - np.asarray(e1_scaled(t))))
