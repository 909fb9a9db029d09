"""Finite-horizon checks of the generalized Gronwall lemma.

For ``y' + alpha y <= beta`` the lemma needs, over windows of a fixed
length ``T``: a positive liminf of the mean of ``alpha``, a finite limsup
of the mean of ``alpha^-`` and a vanishing mean of ``beta^+``. Limits at
infinity are replaced by min/max over windows that start in the last
``tail_fraction`` of the sampled horizon.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline


class SeriesError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.shape != v.shape or t.ndim != 1 or len(t) < 2:
            raise SeriesError("times and values must be 1D arrays of equal length >= 2")
        if not np.all(np.isfinite(v)):
            raise SeriesError("series contains non-finite values")
        steps = np.diff(t)
        if np.any(steps <= 0) or np.abs(steps - steps[0]).max() > 1e-12 * max(1.0, abs(t[-1])):
            raise SeriesError("times must be uniformly spaced and increasing")

    @classmethod
    def sample(cls, fn: Callable[[np.ndarray], np.ndarray], t_end: float, dt: float,
               t0: float = 0.0) -> "TimeSeries":
        n = int(round((t_end - t0) / dt))
        t = t0 + dt * np.arange(n + 1)
        return cls(t, np.broadcast_to(fn(t), t.shape).astype(float))

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def __len__(self) -> int:
        return len(self.times)


def window_averages(times: np.ndarray, values: np.ndarray, T: float):
    """Trapezoid means over every sample-aligned window of ``round(T/dt)`` steps.

    Returns (window start times, means).
    """
    times = np.asarray(times, dtype=float)
    dt = times[1] - times[0]
    nw = max(1, int(round(T / dt)))
    if len(times) <= nw:
        raise SeriesError(f"series of {len(times)} samples shorter than a window of {nw} steps")
    cum = cumulative_trapezoid(values, times, initial=0.0)
    return times[:-nw], (cum[nw:] - cum[:-nw]) / (times[nw:] - times[:-nw])


@dataclass(frozen=True)
class GronwallReport:
    T: float
    m: float
    M: float
    beta_plus_limit: float
    tol_beta: float
    hypotheses_met: tuple[bool, bool, bool]
    y_tail: np.ndarray | None = field(default=None, repr=False)

    @property
    def all_met(self) -> bool:
        return all(self.hypotheses_met)


def check_hypotheses(alpha: TimeSeries, beta: TimeSeries, T: float,
                     tail_fraction: float = 0.5, tol_beta: float | None = None,
                     y: TimeSeries | None = None, min_windows: int = 5) -> GronwallReport:
    if T <= 0:
        raise SeriesError("window length must be positive")
    if not np.array_equal(alpha.times, beta.times):
        raise SeriesError("alpha and beta must share their sample times")
    t = alpha.times
    t_tail = t[0] + (1.0 - tail_fraction) * (t[-1] - t[0])
    if t[-1] - t_tail < min_windows * T - 1e-9 * T:
        raise SeriesError(
            f"tail [{t_tail:g}, {t[-1]:g}] holds fewer than {min_windows} windows of T={T:g}"
        )
    starts, a_avg = window_averages(t, alpha.values, T)
    _, aminus_avg = window_averages(t, np.maximum(-alpha.values, 0.0), T)
    _, bplus_avg = window_averages(t, np.maximum(beta.values, 0.0), T)
    tail = starts >= t_tail
    m = float(a_avg[tail].min())
    M = float(aminus_avg[tail].max())
    limit = float(bplus_avg[-1])
    if tol_beta is None:
        tol_beta = 1e-3 * float(np.abs(beta.values).max())
    met = (m > 0.0, bool(np.isfinite(M)), limit <= tol_beta)
    y_tail = None
    if y is not None:
        y_tail = y.values[int(0.9 * len(y)):]
    return GronwallReport(T, m, M, limit, tol_beta, met, y_tail)


def _as_samples(fn_or_series, t: np.ndarray, t_mid: np.ndarray):
    if isinstance(fn_or_series, TimeSeries):
        if len(fn_or_series.times) != len(t) or not np.allclose(fn_or_series.times, t):
            raise SeriesError("series must share the integration grid")
        spline = CubicSpline(fn_or_series.times, fn_or_series.values)
        return fn_or_series.values, spline(t_mid)
    if callable(fn_or_series):
        return (np.broadcast_to(fn_or_series(t), t.shape),
                np.broadcast_to(fn_or_series(t_mid), t_mid.shape))
    raise TypeError("expected a TimeSeries or a callable of time")


def integrate_inequality(alpha, beta, y0: float, times: np.ndarray | None = None) -> TimeSeries:
    """Classical RK4 for y' = -alpha y + beta on the sample grid.

    ``alpha`` and ``beta`` are TimeSeries (midpoint values from a cubic
    spline) or callables of time (evaluated exactly; then ``times`` is
    required unless one of the two is a TimeSeries).
    """
    if y0 < 0:
        raise ValueError("y0 must be non-negative")
    if times is None:
        ref = alpha if isinstance(alpha, TimeSeries) else beta
        if not isinstance(ref, TimeSeries):
            raise SeriesError("times are required when alpha and beta are both callables")
        times = ref.times
    t = np.asarray(times, dtype=float)
    h = np.diff(t)
    t_mid = t[:-1] + 0.5 * h
    a, am = _as_samples(alpha, t, t_mid)
    b, bm = _as_samples(beta, t, t_mid)
    y = np.empty(len(t))
    y[0] = y0
    yn = float(y0)
    for n in range(len(t) - 1):
        hn = h[n]
        k1 = b[n] - a[n] * yn
        k2 = bm[n] - am[n] * (yn + 0.5 * hn * k1)
        k3 = bm[n] - am[n] * (yn + 0.5 * hn * k2)
        k4 = b[n + 1] - a[n + 1] * (yn + hn * k3)
        yn = yn + hn / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        y[n + 1] = yn
    return TimeSeries(t, y)


@dataclass(frozen=True)
class ConclusionReport:
    decayed: bool
    first_window_max: float
    final_window_max: float
    tol: float

    def __bool__(self) -> bool:
        return self.decayed


def verify_conclusion(y: TimeSeries, window: float,
                      tol_conclusion: float | None = None) -> ConclusionReport:
    """Decay test: final-window max below ``tol`` and below 10% of the first-window max."""
    v = y.values
    if np.any(v < -1e-14 * max(1.0, np.abs(v).max())):
        raise SeriesError("y must be non-negative")
    nw = max(1, int(round(window / y.dt)))
    first = float(v[: nw + 1].max())
    final = float(v[-(nw + 1):].max())
    if tol_conclusion is None:
        tol_conclusion = 1e-6 * abs(float(v[0])) if v[0] != 0 else 1e-6 * first
    decayed = final < tol_conclusion and final < 0.1 * first
    return ConclusionReport(bool(decayed), first, final, float(tol_conclusion))
