"""Determining-projection thresholds and twin-trajectory experiments.

Two solutions ``u`` and ``v`` are advanced in lockstep; their difference
``w`` is projected with the Scott-Zhang interpolant ``R_N = I_h`` on a
triangulation of the periodic box. Along the run we record every
ingredient of the energy inequality for ``|w|^2``

    d/dt |w|^2 + alpha |w|^2 <= beta,
    alpha = nu N^{2 gamma} / (2 C1^2) - (2/nu) ||u||^2,
    beta  = (2/nu) ||f - g||_{V'}^2 + (nu N^{2 gamma} / C1^2) ||R_N w||^2,

and check it, together with the split bound
``|w|^2 <= 2 N^{-2 gamma} C1^2 ||w||^2 + 2 ||R_N w||^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import forms
from .gronwall import GronwallReport, TimeSeries, check_hypotheses, window_averages
from .mesh import SimplicialMesh, build_box_mesh, metrics, refine
from .nse2d import SimConfig, Stepper, make_forcing, make_initial
from .spectral import SpectralField, SpectralGrid, random_field, single_mode
from .szinterp import ScottZhangOperator, l2_error


# --------------------------------------------------------------- thresholds


@dataclass(frozen=True)
class ThresholdReport:
    gamma: float
    C1_empirical: float
    nu: float
    F: float
    epsilon_quantity: float
    epsilon_inf: float
    N_threshold_2d: float
    h_threshold_2d: float
    N_threshold_3d: float
    h_threshold_3d: float
    grashof: float

    def rows(self) -> list[tuple[str, float]]:
        return [(k, getattr(self, k)) for k in self.__dataclass_fields__]


def _positive(**kw):
    for name, value in kw.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")


def h_from_N(N: float, dim: int, domain_measure: float, mesh_constant: float) -> float:
    """Largest h whose family guarantees at least N vertices: N = c |Omega| h^-d."""
    return (mesh_constant * domain_measure / N) ** (1.0 / dim)


def threshold_2d(nu: float, F: float, gamma: float = 0.5, C1: float = 1.0,
                 mesh_constant: float | None = None,
                 domain_measure: float = (2 * math.pi) ** 2) -> tuple[float, float]:
    """N with N^{2 gamma} = 8 C1^2 (F / nu^2)^2, and the matching h."""
    _positive(nu=nu, F=F, gamma=gamma, C1=C1)
    N = (8.0 * C1**2 * (F / nu**2) ** 2) ** (1.0 / (2.0 * gamma))
    c = mesh_constant if mesh_constant is not None else kuhn_bracket(2)[0]
    return N, h_from_N(N, 2, domain_measure, c)


def epsilon_quantity(grad_linf: TimeSeries, T_grid: Sequence[float],
                     tail_fraction: float = 0.5) -> float:
    """min over T of the late-time max window mean of ||grad u||_inf."""
    if len(T_grid) == 0:
        raise ValueError("T_grid is empty")
    t = grad_linf.times
    t_tail = t[0] + (1 - tail_fraction) * (t[-1] - t[0])
    best = math.inf
    for T in T_grid:
        starts, avg = window_averages(t, grad_linf.values, T)
        tail = starts >= t_tail
        if not tail.any():
            raise ValueError(f"series too short for a tail window of T={T:g}")
        best = min(best, float(avg[tail].max()))
    return best


def threshold_3d(nu: float, grad_linf: TimeSeries, gamma: float = 1.0 / 3.0,
                 C1: float = 1.0, T_grid: Sequence[float] = (1.0,),
                 mesh_constant: float | None = None,
                 domain_measure: float = (2 * math.pi) ** 3,
                 tail_fraction: float = 0.5) -> tuple[float, float, float]:
    """N with N^{2 gamma} = (4 C1^2 / nu) * eps, the matching h, and eps."""
    _positive(nu=nu, gamma=gamma, C1=C1)
    eps = epsilon_quantity(grad_linf, T_grid, tail_fraction)
    N = (4.0 * C1**2 / nu * eps) ** (1.0 / (2.0 * gamma))
    c = mesh_constant if mesh_constant is not None else kuhn_bracket(3)[0]
    h = h_from_N(N, 3, domain_measure, c) if N > 0 else math.inf
    return N, h, eps


def threshold_report(nu: float, F: float, C1: float, grad_linf: TimeSeries | None = None,
                     T_grid: Sequence[float] = (1.0,), lambda1: float = 1.0) -> ThresholdReport:
    N2, h2 = threshold_2d(nu, F, 0.5, C1)
    if grad_linf is not None:
        N3, h3, eps = threshold_3d(nu, grad_linf, 1.0 / 3.0, C1, T_grid)
    else:
        N3 = h3 = eps = math.nan
    return ThresholdReport(
        gamma=0.5, C1_empirical=C1, nu=nu, F=F, epsilon_quantity=eps,
        epsilon_inf=nu * eps, N_threshold_2d=N2, h_threshold_2d=h2,
        N_threshold_3d=N3, h_threshold_3d=h3, grashof=forms.grashof(F, lambda1, nu),
    )


def box_family(dim: int, levels: int, n0: int = 2, extent: float = 1.0) -> list[SimplicialMesh]:
    mesh = build_box_mesh(dim, extent, n0)
    family = [mesh]
    for _ in range(levels - 1):
        mesh = refine(mesh)
        family.append(mesh)
    return family


def kuhn_bracket(dim: int, n0: int = 2) -> tuple[float, float]:
    """Exact [inf, sup] of N h^d / |Omega| over Kuhn box meshes with n >= n0 cells per axis.

    With N = (n+1)^d and h = sqrt(d) L / n the ratio is d^(d/2) ((n+1)/n)^d,
    decreasing in n, so the infimum is the n -> infinity limit.
    """
    base = dim ** (dim / 2)
    return base, base * ((n0 + 1) / n0) ** dim


def family_bracket(dim: int, levels: int = 4, n0: int = 2) -> tuple[float, float]:
    """Observed [min, max] of N h^d / |Omega| over a uniform refinement family."""
    c = [metrics(m).c_lower for m in box_family(dim, levels, n0)]
    return min(c), max(c)


# --------------------------------------------------------------- C1 estimate


@dataclass(frozen=True)
class C1Estimate:
    value: float
    corpus_id: str
    table: np.ndarray  # (levels, fields) ratios


def field_corpus(count: int = 10, seed: int = 0, kmax: float = 8.0, M: int = 32,
                 L: float = 2 * math.pi) -> list[SpectralField]:
    grid = SpectralGrid(2, M, L)
    rng = np.random.default_rng(seed)
    return [random_field(grid, rng, kmax=kmax) for _ in range(count)]


def estimate_C1(mesh_family: Sequence[SimplicialMesh | ScottZhangOperator],
                corpus: Sequence[SpectralField], gamma: float = 0.5,
                floor: float = 1e-12, corpus_id: str = "") -> C1Estimate:
    """max over corpus and levels of ||u - I_h u|| N^gamma / ||grad u||."""
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    ops = [m if isinstance(m, ScottZhangOperator) else ScottZhangOperator(m) for m in mesh_family]
    table = np.zeros((len(ops), len(corpus)))
    for j, u in enumerate(corpus):
        sampler = u.sampler()
        grad = forms.h1_semi(u)
        for i, op in enumerate(ops):
            err = l2_error(op, sampler)
            table[i, j] = err * op.n**gamma / grad if err > floor * max(grad, 1.0) else 0.0
    return C1Estimate(float(table.max()), corpus_id, table)


# ------------------------------------------------------- spectral projector


class SpectralSZ:
    """I_h applied to spectral fields through a precomputed linear map.

    Nodal coefficients are ``Re(G @ c)`` with ``G[n, k] = sum_q w_nq exp(i k.x_nq)``
    over the dealiased modes.
    """

    def __init__(self, op: ScottZhangOperator, grid: SpectralGrid):
        if op.mesh.dim != grid.dim:
            raise ValueError("mesh and grid dimensions differ")
        self.op, self.grid = op, grid
        K = int(np.ceil(grid.M / 3)) - 1
        idx = np.arange(-K, K + 1)
        self.sl = np.ix_(*[idx % grid.M] * grid.dim)
        kk = idx * (2 * np.pi / grid.L)
        pts = op.sample_points  # (n, q, dim)
        Ex = np.exp(1j * pts[..., 0, None] * kk)
        Ey = np.exp(1j * pts[..., 1, None] * kk)
        G = np.einsum("nq,nqa,nqb->nab", op.sample_weights, Ex, Ey)
        self.G = G.reshape(op.n, -1)

    def coefficients(self, field: SpectralField) -> np.ndarray:
        c = np.stack([comp[self.sl].ravel() for comp in field.coeffs], axis=1)
        return (self.G @ c).real

    def l2sq(self, field: SpectralField) -> float:
        return self.op.l2_norm(self.coefficients(field)) ** 2


# ------------------------------------------------------------ twin runs


@dataclass
class TwinConfig:
    nu: float = 1.0
    M: int = 64
    L: float = 2 * math.pi
    dt: float = 5e-3
    t_end: float = 20.0
    record_every: float = 1e-2
    forcing_kind: str = "kolmogorov"
    forcing_amplitude: float = 0.5
    forcing_k: int = 2
    # g = f + eps exp(-t / tau) * mode(diff_k)
    diff_amplitude: float = 0.0
    diff_tau: float = 1.0
    diff_k: int = 1
    init_amplitude: float = 1.0
    init_kmax: float = 8.0
    seed_u: int = 1
    seed_v: int = 2
    v_kind: str = "random"  # random | same | perturb
    perturb_k: int = 4
    perturb_amplitude: float = 0.1
    mesh_n: int = 16
    gamma: float = 0.5
    C1: float = 0.0  # <= 0: estimate from the corpus on the mesh family
    corpus_size: int = 10
    corpus_seed: int = 0
    c_cfl: float = 0.4


@dataclass
class TwinDiagnostics:
    times: np.ndarray
    w_l2sq: np.ndarray
    w_h1sq: np.ndarray
    rnw_l2sq: np.ndarray
    u_h1sq: np.ndarray
    grad_linf: np.ndarray
    fg_vprime_sq: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    residual: np.ndarray
    nu: float
    N: int
    gamma: float
    C1: float
    dt_record: float

    COLUMNS = ("t", "w_l2sq", "w_h1sq", "rnw_l2sq", "u_h1sq", "grad_linf",
               "alpha", "beta", "residual")

    def to_csv_rows(self) -> list[str]:
        cols = [self.times, self.w_l2sq, self.w_h1sq, self.rnw_l2sq, self.u_h1sq,
                self.grad_linf, self.alpha, self.beta, self.residual]
        rows = [",".join(self.COLUMNS)]
        for i in range(len(self.times)):
            rows.append(",".join(f"{c[i]:.17g}" for c in cols))
        return rows

    def series(self, name: str) -> TimeSeries:
        return TimeSeries(self.times, getattr(self, name))


def assemble_alpha_beta(nu, N, gamma, C1, u_h1sq, fg_vprime_sq, rnw_l2sq):
    scale = nu * N ** (2 * gamma) / C1**2
    alpha = 0.5 * scale - (2.0 / nu) * np.asarray(u_h1sq)
    beta = (2.0 / nu) * np.asarray(fg_vprime_sq) + scale * np.asarray(rnw_l2sq)
    return alpha, beta


def residual_series(times, w_l2sq, alpha, beta) -> np.ndarray:
    """d/dt |w|^2 + alpha |w|^2 - beta with second-order finite differences."""
    dwdt = np.gradient(w_l2sq, times, edge_order=2)
    return dwdt + alpha * w_l2sq - beta


def twin_mesh(cfg: TwinConfig) -> SimplicialMesh:
    return build_box_mesh(2, cfg.L, cfg.mesh_n)


def twin_C1(cfg: TwinConfig) -> C1Estimate:
    """C1 over the corpus on the levels n, n/2, n/4 ending at the twin mesh."""
    levels = [n for n in (cfg.mesh_n // 4, cfg.mesh_n // 2, cfg.mesh_n) if n >= 1]
    family = [build_box_mesh(2, cfg.L, n) for n in levels]
    corpus = field_corpus(cfg.corpus_size, cfg.corpus_seed, cfg.init_kmax, M=32, L=cfg.L)
    return estimate_C1(family, corpus, cfg.gamma,
                       corpus_id=f"bandlimited-k{cfg.init_kmax:g}-seed{cfg.corpus_seed}-n{cfg.corpus_size}")


def _sim_config(cfg: TwinConfig) -> SimConfig:
    return SimConfig(nu=cfg.nu, M=cfg.M, L=cfg.L, dt=cfg.dt, t_end=cfg.t_end,
                     forcing_kind=cfg.forcing_kind, forcing_amplitude=cfg.forcing_amplitude,
                     forcing_k=cfg.forcing_k, init_kind="random",
                     init_amplitude=cfg.init_amplitude, init_kmax=cfg.init_kmax,
                     seed=cfg.seed_u, c_cfl=cfg.c_cfl)


def twin_experiment(cfg: TwinConfig) -> TwinDiagnostics:
    sim = _sim_config(cfg)
    grid = sim.grid
    u = make_initial(sim)
    if cfg.v_kind == "same":
        v = u.copy()
    elif cfg.v_kind == "random":
        v = make_initial(replace(sim, seed=cfg.seed_v))
    elif cfg.v_kind == "perturb":
        v = u + single_mode(grid, (cfg.perturb_k, 0), cfg.perturb_amplitude)
    else:
        raise ValueError(f"unknown v_kind {cfg.v_kind!r}")

    f = make_forcing(sim) or SpectralField.zeros(grid)
    diff_mode = single_mode(grid, (cfg.diff_k, 1), 1.0) if cfg.diff_amplitude else None

    def g_of(t):
        if diff_mode is None:
            return f
        return f + diff_mode * (cfg.diff_amplitude * math.exp(-t / cfg.diff_tau))

    C1 = cfg.C1 if cfg.C1 > 0 else twin_C1(cfg).value
    op = ScottZhangOperator(twin_mesh(cfg))
    proj = SpectralSZ(op, grid)
    N = op.n

    stride = int(round(cfg.record_every / cfg.dt))
    if stride < 1 or abs(stride * cfg.dt - cfg.record_every) > 1e-9:
        raise ValueError("record_every must be a positive multiple of dt")
    n_steps = int(round(cfg.t_end / cfg.dt))
    stepper = Stepper(grid, cfg.nu, cfg.dt, cfg.c_cfl)

    rec: dict[str, list[float]] = {k: [] for k in
                                   ("t", "w_l2sq", "w_h1sq", "rnw", "u_h1sq", "grad", "fg")}

    def record(t, u, v, g):
        w = u - v
        rec["t"].append(t)
        rec["w_l2sq"].append(forms.l2(w) ** 2)
        rec["w_h1sq"].append(forms.h1_semi(w) ** 2)
        rec["rnw"].append(proj.l2sq(w))
        rec["u_h1sq"].append(forms.h1_semi(u) ** 2)
        rec["grad"].append(forms.grad_linf(u))
        rec["fg"].append(forms.vprime(f - g) ** 2)

    t = 0.0
    g_now = g_of(t)
    record(t, u, v, g_now)
    for n in range(1, n_steps + 1):
        t_next = n * cfg.dt
        g_next = g_of(t_next)
        u = stepper(u, f, f)
        v = stepper(v, g_now, g_next)
        t, g_now = t_next, g_next
        if n % stride == 0:
            record(t, u, v, g_now)

    times = np.array(rec["t"])
    w_l2sq = np.array(rec["w_l2sq"])
    rnw = np.array(rec["rnw"])
    u_h1sq = np.array(rec["u_h1sq"])
    fg = np.array(rec["fg"])
    alpha, beta = assemble_alpha_beta(cfg.nu, N, cfg.gamma, C1, u_h1sq, fg, rnw)
    return TwinDiagnostics(
        times=times, w_l2sq=w_l2sq, w_h1sq=np.array(rec["w_h1sq"]), rnw_l2sq=rnw,
        u_h1sq=u_h1sq, grad_linf=np.array(rec["grad"]), fg_vprime_sq=fg,
        alpha=alpha, beta=beta, residual=residual_series(times, w_l2sq, alpha, beta),
        nu=cfg.nu, N=N, gamma=cfg.gamma, C1=C1, dt_record=cfg.record_every,
    )


@dataclass(frozen=True)
class InequalityCheck:
    split_holds: bool
    split_max_ratio: float
    residual_holds: bool
    max_residual_excess: float
    max_residual: float

    @property
    def passed(self) -> bool:
        return self.split_holds and self.residual_holds


def split_bound(diag: TwinDiagnostics, C1: float | None = None) -> np.ndarray:
    C1 = diag.C1 if C1 is None else C1
    return 2 * diag.N ** (-2 * diag.gamma) * C1**2 * diag.w_h1sq + 2 * diag.rnw_l2sq


def verify_differential_inequality(diag: TwinDiagnostics, c_tol: float = 10.0,
                                   C1: float | None = None,
                                   max_stride: float = 1e-2) -> InequalityCheck:
    """(a) split bound at every sample; (b) r(t) <= c_tol * dt_record * scale(t).

    ``scale`` is the size of the terms that enter r, so the tolerance only
    absorbs the finite-difference error of d/dt |w|^2. A different ``C1``
    re-assembles alpha and beta before both checks.
    """
    if diag.dt_record > max_stride * (1 + 1e-12):
        raise ValueError(f"record stride {diag.dt_record:g} coarser than {max_stride:g}")
    C1 = diag.C1 if C1 is None else C1
    bound = split_bound(diag, C1)
    w2 = diag.w_l2sq
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, w2 / bound, np.where(w2 > 0, np.inf, 0.0))
    split_ok = bool(np.all(w2 <= bound * (1 + 1e-12) + 1e-300))

    alpha, beta = assemble_alpha_beta(diag.nu, diag.N, diag.gamma, C1,
                                      diag.u_h1sq, diag.fg_vprime_sq, diag.rnw_l2sq)
    r = residual_series(diag.times, w2, alpha, beta)
    dwdt = np.gradient(w2, diag.times, edge_order=2)
    scale = np.abs(dwdt) + np.abs(alpha) * w2 + np.abs(beta)
    tol = c_tol * diag.dt_record * scale
    excess = r - tol
    return InequalityCheck(
        split_holds=split_ok,
        split_max_ratio=float(ratio.max()),
        residual_holds=bool(np.all(excess <= 0)),
        max_residual_excess=float(excess.max()),
        max_residual=float(r.max()),
    )


def gronwall_on_twin(diag: TwinDiagnostics, rho: float = 1.0,
                     tail_fraction: float = 0.5) -> GronwallReport:
    """Gronwall hypotheses on the assembled alpha, beta with T = rho^2 / nu."""
    return check_hypotheses(diag.series("alpha"), diag.series("beta"), rho**2 / diag.nu,
                            tail_fraction, y=diag.series("w_l2sq"))


def decay_ratio(series: np.ndarray) -> float:
    """final / initial of a non-negative series (on the norm, not its square)."""
    s = np.sqrt(np.asarray(series))
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0
