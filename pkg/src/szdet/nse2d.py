"""Pseudo-spectral solver for du/dt + nu A u + B(u, u) = f on the 2D torus.

Time stepping is second-order exponential time differencing (Cox-Matthews
ETDRK2): the viscous term is integrated exactly through ``exp(-nu |k|^2 dt)``
and ``-B(u, u) + f`` is treated explicitly. Constant forcing is integrated
exactly, so steady states of the linear problem are fixed points of the
scheme. Nonlinear products use the 2/3 rule; pressure never appears since
``B`` already carries the Leray projection.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import forms
from .gronwall import window_averages
from .spectral import SpectralField, SpectralGrid, convective, random_field, single_mode

__all__ = [
    "SpectralField",
    "SpectralGrid",
    "CFLError",
    "BlowUpError",
    "Stepper",
    "step",
    "SimConfig",
    "TrajectoryRecord",
    "simulate",
    "verify_apriori_bound",
    "energy_identity_residual",
    "taylor_green_exact",
]

Forcing = Callable[[float], SpectralField]


class CFLError(RuntimeError):
    pass


class BlowUpError(RuntimeError):
    pass


def _phi(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """phi1(z) = (e^z - 1)/z and phi2(z) = (e^z - 1 - z)/z^2, stable near 0."""
    phi1 = np.ones_like(z)
    phi2 = np.full_like(z, 0.5)
    big = np.abs(z) > 1e-3
    zb = z[big]
    phi1[big] = np.expm1(zb) / zb
    phi2[big] = (np.expm1(zb) - zb) / zb**2
    zs = z[~big]
    phi1[~big] = 1 + zs / 2 + zs**2 / 6 + zs**3 / 24 + zs**4 / 120
    phi2[~big] = 0.5 + zs / 6 + zs**2 / 24 + zs**3 / 120 + zs**4 / 720
    return phi1, phi2


def nonlinear(u: SpectralField) -> np.ndarray:
    """Coefficients of B(u, u) = P[(u . grad) u], dealiased."""
    return u.grid.leray(convective(u, u))


def _rotational(grid: SpectralGrid, c: np.ndarray) -> tuple[np.ndarray, float]:
    """P[omega z x u] (equal to B(u, u) after projection) and max |u| on the grid."""
    c = c * grid.dealias
    ux, uy = grid.to_physical(c)
    omega = grid.to_physical(1j * (grid.k[0] * c[1] - grid.k[1] * c[0]))
    prod = grid.to_spectral(np.stack([-omega * uy, omega * ux])) * grid.dealias
    return grid.leray(prod), float(np.sqrt(ux**2 + uy**2).max())


def max_speed(u: SpectralField) -> float:
    return float(np.sqrt((u.physical() ** 2).sum(axis=0)).max())


class Stepper:
    """ETDRK2 stepper with cached exponential factors for a fixed (nu, dt)."""

    def __init__(self, grid: SpectralGrid, nu: float, dt: float, c_cfl: float = 0.4):
        if nu <= 0 or dt <= 0:
            raise ValueError("nu and dt must be positive")
        self.grid, self.nu, self.dt, self.c_cfl = grid, nu, dt, c_cfl
        z = -nu * grid.k2 * dt
        self.E = np.exp(z)
        self.phi1, self.phi2 = _phi(z)

    def check_cfl(self, u: SpectralField) -> None:
        umax = max_speed(u)
        if umax > 0 and self.dt > self.c_cfl * self.grid.dx / umax:
            raise CFLError(
                f"dt={self.dt:g} exceeds CFL limit {self.c_cfl * self.grid.dx / umax:g}"
            )

    def __call__(self, u: SpectralField, f_now: SpectralField | None,
                 f_next: SpectralField | None = None, check: bool = True) -> SpectralField:
        g = self.grid
        fn = f_now.coeffs if f_now is not None else 0.0
        fn1 = f_next.coeffs if f_next is not None else fn
        b0, umax = _rotational(g, u.coeffs)
        if check and umax > 0 and self.dt > self.c_cfl * g.dx / umax:
            raise CFLError(f"dt={self.dt:g} exceeds CFL limit {self.c_cfl * g.dx / umax:g}")
        n0 = fn - b0
        a = self.E * u.coeffs + self.dt * self.phi1 * n0
        n1 = fn1 - _rotational(g, a)[0]
        out = g.leray(a + self.dt * self.phi2 * (n1 - n0))
        if not np.all(np.isfinite(out)):
            raise BlowUpError("non-finite coefficients after step")
        return SpectralField(g, out)


def step(state: SpectralField, f_at_t: SpectralField | None, nu: float, dt: float,
         c_cfl: float = 0.4) -> SpectralField:
    """One ETDRK2 step (builds the exponential factors each call)."""
    return Stepper(state.grid, nu, dt, c_cfl)(state, f_at_t)


def taylor_green(grid: SpectralGrid) -> SpectralField:
    x, y = grid.x
    phys = np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])
    return SpectralField.from_physical(grid, phys)


def taylor_green_exact(t: float, nu: float, grid: SpectralGrid | None = None) -> SpectralField:
    """exp(-2 nu t) (sin x cos y, -cos x sin y) on [0, 2 pi]^2."""
    grid = grid or SpectralGrid(2, 64)
    return taylor_green(grid) * math.exp(-2 * nu * t)


# ---------------------------------------------------------------- simulate


@dataclass
class SimConfig:
    nu: float = 0.1
    M: int = 64
    L: float = 2 * math.pi
    dt: float = 1e-3
    t_end: float = 1.0
    forcing_kind: str = "none"  # none | kolmogorov | single_mode
    forcing_amplitude: float = 0.0
    forcing_k: int = 4
    init_kind: str = "random"  # random | taylor_green | single_mode | zero
    init_amplitude: float = 1.0
    init_kmax: float = 8.0
    seed: int = 0
    record_stride: int = 10
    checkpoint_stride: int = 0
    c_cfl: float = 0.4

    @property
    def grid(self) -> SpectralGrid:
        return SpectralGrid(2, self.M, self.L)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def make_forcing(cfg: SimConfig) -> SpectralField | None:
    g = cfg.grid
    if cfg.forcing_kind == "none" or cfg.forcing_amplitude == 0:
        return None
    if cfg.forcing_kind == "kolmogorov":
        # A sin(k y) x-hat
        ky = cfg.forcing_k * 2 * math.pi / g.L
        phys = np.stack([cfg.forcing_amplitude * np.sin(ky * g.x[1]), np.zeros_like(g.x[1])])
        return SpectralField.from_physical(g, phys)
    if cfg.forcing_kind == "single_mode":
        return single_mode(g, (cfg.forcing_k, 0), cfg.forcing_amplitude)
    raise ValueError(f"unknown forcing kind {cfg.forcing_kind!r}")


def make_initial(cfg: SimConfig, rng: np.random.Generator | None = None) -> SpectralField:
    g = cfg.grid
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    if cfg.init_kind == "zero":
        return SpectralField.zeros(g)
    if cfg.init_kind == "taylor_green":
        return taylor_green(g) * cfg.init_amplitude
    if cfg.init_kind == "single_mode":
        return single_mode(g, (cfg.forcing_k, 0), cfg.init_amplitude)
    if cfg.init_kind == "random":
        u = random_field(g, rng, kmax=cfg.init_kmax)
        return u * (cfg.init_amplitude / forms.l2(u))
    raise ValueError(f"unknown init kind {cfg.init_kind!r}")


@dataclass
class TrajectoryRecord:
    times: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    enstrophy: list[float] = field(default_factory=list)
    grad_linf: list[float] = field(default_factory=list)
    f_vprime: list[float] = field(default_factory=list)
    forcing_work: list[float] = field(default_factory=list)
    checkpoints: list[tuple[float, SpectralField]] = field(default_factory=list)
    final: SpectralField | None = None

    def append(self, t: float, u: SpectralField, f: SpectralField | None) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("record times must increase")
        l2sq = forms.l2(u) ** 2
        h1sq = forms.h1_semi(u) ** 2
        if not (math.isfinite(l2sq) and math.isfinite(h1sq)):
            raise BlowUpError(f"non-finite norms at t={t:g}")
        self.times.append(t)
        self.energy.append(0.5 * l2sq)
        self.enstrophy.append(h1sq)
        self.grad_linf.append(forms.grad_linf(u))
        self.f_vprime.append(forms.vprime(f) if f is not None else 0.0)
        self.forcing_work.append(forms.inner(f, u) if f is not None else 0.0)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "t": np.array(self.times),
            "energy": np.array(self.energy),
            "enstrophy": np.array(self.enstrophy),
            "grad_linf": np.array(self.grad_linf),
            "f_vprime": np.array(self.f_vprime),
        }

    def to_csv_rows(self) -> list[str]:
        a = self.arrays()
        rows = ["t,energy,enstrophy,grad_linf,f_vprime"]
        for i in range(len(a["t"])):
            rows.append(",".join(f"{a[c][i]:.17g}" for c in a))
        return rows


def simulate(cfg: SimConfig, u0: SpectralField | None = None,
             forcing: Forcing | SpectralField | None = None,
             checkpoint_dir: str | Path | None = None) -> TrajectoryRecord:
    """Integrate to ``t_end`` recording norms every ``record_stride`` steps.

    ``forcing`` may be a fixed field or a callable of time; by default it is
    built from the config.
    """
    g = cfg.grid
    u = u0 if u0 is not None else make_initial(cfg)
    if forcing is None:
        forcing = make_forcing(cfg)
    f_of_t = forcing if callable(forcing) else (lambda t, _f=forcing: _f)
    stepper = Stepper(g, cfg.nu, cfg.dt, cfg.c_cfl)
    rec = TrajectoryRecord()
    t = 0.0
    f_now = f_of_t(t)
    rec.append(t, u, f_now)
    for n in range(1, cfg.n_steps + 1):
        t_next = n * cfg.dt
        f_next = f_of_t(t_next)
        try:
            u = stepper(u, f_now, f_next)
        except (CFLError, BlowUpError) as exc:
            raise type(exc)(f"t={t:g}: {exc}") from exc
        t, f_now = t_next, f_next
        if n % cfg.record_stride == 0:
            rec.append(t, u, f_now)
        if cfg.checkpoint_stride and n % cfg.checkpoint_stride == 0:
            rec.checkpoints.append((t, u.copy()))
            if checkpoint_dir is not None:
                d = Path(checkpoint_dir)
                d.mkdir(parents=True, exist_ok=True)
                np.save(d / f"u_{n:08d}.npy", u.coeffs)
    rec.final = u
    return rec


def state_digest(u: SpectralField) -> str:
    return hashlib.sha256(np.ascontiguousarray(u.coeffs).tobytes()).hexdigest()


# ------------------------------------------------------------ a priori bound


@dataclass(frozen=True)
class AprioriReport:
    T: float
    max_window_average: float
    bound: float
    ratio: float
    passed: bool
    window_averages: np.ndarray


def energy_identity_residual(record: TrajectoryRecord, nu: float) -> tuple[float, float]:
    """Max of |dE/dt + nu ||u||^2 - <f, u>| from central differences of the record.

    Returns (max residual, max of nu ||u||^2 + |<f, u>|), the second being
    the natural scale of the terms.
    """
    t = np.array(record.times)
    E = np.array(record.energy)
    dEdt = np.gradient(E, t, edge_order=2)
    diss = nu * np.array(record.enstrophy)
    work = np.array(record.forcing_work)
    res = dEdt + diss - work
    return float(np.abs(res).max()), float((diss + np.abs(work)).max())


def verify_apriori_bound(record: TrajectoryRecord, nu: float,
                         forcing_vprime_series=None, rho: float = 1.0,
                         tail_fraction: float = 0.5, min_windows: int = 10,
                         decay_rtol: float = 1e-3) -> AprioriReport:
    """Late-time window averages of ||u||^2 against (2/nu^2) (late max ||f||_V')^2.

    The limsup is approximated by the maximum over windows starting in the
    final ``tail_fraction`` of the record. When the bound is zero (no
    forcing) the check passes if the late averages are below ``decay_rtol``
    times the first window average.
    """
    a = record.arrays()
    t, ens = a["t"], a["enstrophy"]
    fv = a["f_vprime"] if forcing_vprime_series is None else np.asarray(forcing_vprime_series)
    T = rho**2 / nu
    if t[-1] - t[0] < min_windows * T:
        raise ValueError(f"record spans {t[-1] - t[0]:g} < {min_windows} windows of T={T:g}")
    starts, avg = window_averages(t, ens, T)
    t_tail = t[0] + (1 - tail_fraction) * (t[-1] - t[0])
    tail = starts >= t_tail
    late_avg = float(avg[tail].max())
    F = float(fv[t >= t_tail].max())
    bound = 2.0 / nu**2 * F**2
    if bound > 0:
        ratio = late_avg / bound
        passed = ratio <= 1.0
    else:
        ratio = late_avg / avg[0] if avg[0] > 0 else 0.0
        passed = ratio <= decay_rtol
    return AprioriReport(T, late_avg, bound, float(ratio), bool(passed), avg)
