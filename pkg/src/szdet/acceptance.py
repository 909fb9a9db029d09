"""The ten acceptance criteria as functions returning structured results.

Both the ``pipeline`` subcommand and the test suite call these, so a
criterion is evaluated the same way wherever it is reported.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import forms, gronwall
from .determining import (TwinConfig, box_family, decay_ratio, gronwall_on_twin, kuhn_bracket,
                          threshold_2d, threshold_3d, twin_experiment,
                          verify_differential_inequality)
from .mesh import build_box_mesh, metrics, refine
from .nse2d import (SimConfig, energy_identity_residual, simulate, taylor_green,
                    taylor_green_exact, verify_apriori_bound)
from .spectral import SpectralGrid, single_mode
from .szinterp import (ScottZhangOperator, biorthogonality_defect, dual_basis,
                       l2_error_and_rate, model_field)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"  [{status}] {self.name}: measured={self.measured:.6g} tolerance {self.tolerance}"


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, tuple[str, list[str]]] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, name: str, passed, measured, tolerance: str) -> None:
        self.checks.append(Check(name, bool(passed), float(measured), tolerance))

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} {status}  {self.title} ({self.seconds:.1f} s)"

    def report(self) -> str:
        return "\n".join([self.summary()] + [c.line() for c in self.checks])


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _fmt(*values) -> str:
    return ",".join(v if isinstance(v, str) else f"{v:.17g}" for v in values)


# ------------------------------------------------------------------ 1-3


def sz_family(dim: int, n0: int, levels: int) -> list[ScottZhangOperator]:
    mesh = build_box_mesh(dim, 1.0, n0)
    ops = []
    for _ in range(levels):
        ops.append(ScottZhangOperator(mesh))
        mesh = refine(mesh)
    return ops


def convergence_rows(table) -> list[str]:
    rows = []
    for i, s in enumerate(table.running_slopes):
        rows.append(_fmt(str(i), table.h[i], str(int(table.N[i])), table.errors[i], s))
    return rows


CONVERGENCE_HEADER = "level,h,N,l2_error,running_slope"


@_timed
def criterion_1(levels: int = 5, n0: int = 4) -> CriterionResult:
    """L2 interpolation rates on uniformly refined unit squares."""
    res = CriterionResult(1, "Scott-Zhang approximation order in 2D")
    ops = sz_family(2, n0, levels)
    smooth = l2_error_and_rate(ops, model_field("smooth", 2), "smooth")
    rough = l2_error_and_rate(ops, model_field("rough", 2), "rough")
    linear = l2_error_and_rate(ops, model_field("linear", 2), "linear")
    res.add("smooth slope", abs(smooth.slope - 2.0) <= 0.15, smooth.slope, "2.0 +- 0.15")
    res.add("rough r^0.6 slope", rough.slope >= 0.85, rough.slope, ">= 0.85")
    res.add("levels", levels >= 4, levels, ">= 4")
    lin_err = float(linear.errors.max())
    res.add("linear reproduction L2 error", lin_err < 1e-12, lin_err, "< 1e-12")
    for tag, tb in (("smooth", smooth), ("rough", rough), ("linear", linear)):
        res.tables[f"sz_rates_{tag}"] = (CONVERGENCE_HEADER, convergence_rows(tb))
    return res


def _zero_trace(dim: int):
    return lambda p: np.prod(p[:, :dim] * (1 - p[:, :dim]), axis=1)


@_timed
def criterion_2(meshes_2d=(1, 2, 4, 8), meshes_3d=(1, 2, 4), seed: int = 0) -> CriterionResult:
    """Dual-basis defect, idempotence and trace preservation on every vertex."""
    res = CriterionResult(2, "bi-orthogonality, idempotence, zero trace")
    rng = np.random.default_rng(seed)
    worst = {"defect": 0.0, "idem": 0.0, "trace": 0.0}
    rows = []
    for dim, ns in ((2, meshes_2d), (3, meshes_3d)):
        for n in ns:
            mesh = build_box_mesh(dim, 1.0, n)
            op = ScottZhangOperator(mesh)
            defect = max(biorthogonality_defect(mesh, dual_basis(mesh, f))
                         for f in np.unique(op.faces))
            c = rng.standard_normal(op.n)
            idem = float(np.abs(op.interpolate_p1(c) - c).max() / np.abs(c).max())
            coeffs = op.interpolate(_zero_trace(dim))
            trace = float(np.abs(coeffs[mesh.boundary_vertex]).max())
            worst["defect"] = max(worst["defect"], defect)
            worst["idem"] = max(worst["idem"], idem)
            worst["trace"] = max(worst["trace"], trace)
            rows.append(_fmt(str(dim), str(n), str(op.n), defect, idem, trace))
    res.add("max dual-basis defect", worst["defect"] < 1e-12, worst["defect"], "< 1e-12")
    res.add("idempotence defect", worst["idem"] < 1e-12, worst["idem"], "< 1e-12")
    res.add("boundary coefficients of zero-trace field", worst["trace"] < 1e-12,
            worst["trace"], "< 1e-12")
    res.tables["sz_projection"] = ("dim,n,N,dual_defect,idempotence,boundary_coeff", rows)
    return res


@_timed
def criterion_3(levels: int = 4, n0: int = 2) -> CriterionResult:
    """N h^d / |Omega| stays in a bracket [c, c'] with c'/c < 4."""
    res = CriterionResult(3, "vertex count versus mesh size bracket")
    rows = []
    for dim in (2, 3):
        cs = []
        for lvl, mesh in enumerate(box_family(dim, levels, n0)):
            m = metrics(mesh)
            cs.append(m.c_lower)
            rows.append(_fmt(str(dim), str(lvl), str(m.N), m.h, m.c_lower, m.shape_regularity))
        ratio = max(cs) / min(cs)
        res.add(f"{dim}D bracket ratio c'/c over {levels} levels", ratio < 4.0, ratio, "< 4")
        lo, hi = kuhn_bracket(dim, n0)
        outside = max(max(lo - c, c - hi, 0.0) for c in cs)
        res.add(f"{dim}D measured constants inside [{lo:.4g}, {hi:.4g}]", outside <= 1e-12 * hi,
                outside, "distance <= 1e-12 relative")
    res.tables["mesh_bracket"] = ("dim,level,N,h,N_hd_over_volume,shape_regularity", rows)
    return res


# ------------------------------------------------------------------ 4-5


@_timed
def criterion_4(count: int = 100, seed: int = 0) -> CriterionResult:
    """Trilinear-form bounds and antisymmetry on seeded random triples."""
    res = CriterionResult(4, "trilinear inequality suite")
    rows = []
    holder_max = 0.0
    anti = 0.0
    for dim, M in ((2, 32), (3, 16)):
        triples = list(forms.random_triples(dim, count, seed + dim, M=M, kmax=M / 3 - 1))
        report = forms.verify_ladyzhenskaya(triples, dim)
        lady = "lady2d" if dim == 2 else "lady3d"
        r = report.max_ratio(lady)
        res.add(f"{dim}D Ladyzhenskaya max ratio ({count} triples)", r <= 1 + 1e-9, r, "<= 1 + 1e-9")
        holder_max = max(holder_max, report.max_ratio("holder"))
        for u, v, w in triples:
            scale = forms.ladyzhenskaya_rhs(u, v, w, dim)
            a = abs(forms.trilinear_b(u, v, w) + forms.trilinear_b(u, w, v)) / scale
            s = abs(forms.trilinear_b(u, u, u)) / forms.ladyzhenskaya_rhs(u, u, u, dim)
            anti = max(anti, a, s)
        rows += [_fmt(f"{row[0]}", str(row[1]), *row[2:]) for row in report.rows]
    res.add(f"Holder bound max ratio ({2 * count} triples)", holder_max <= 1 + 1e-9, holder_max,
            "<= 1 + 1e-9")
    res.add("antisymmetry and b(u,u,u)=0 (relative)", anti <= 1e-10, anti, "<= 1e-10")
    res.tables["forms_suite"] = ("inequality,sample,lhs,rhs,ratio", rows)
    return res


@_timed
def criterion_5() -> CriterionResult:
    """Smallest Laplacian eigenvalue on the torus and on the Dirichlet unit square."""
    res = CriterionResult(5, "Poincare constants")
    torus = forms.poincare_constant(forms.DomainConfig(kind="torus", dim=2))
    res.add("torus lambda1 (mode check)", torus.lambda1 == 1.0, torus.lambda1, "== 1")
    box = forms.poincare_constant(forms.DomainConfig(kind="dirichlet_box", dim=2, L=1.0))
    rel = abs(box.lambda1 / (2 * math.pi**2) - 1)
    res.add("Dirichlet unit square lambda1 vs 2 pi^2 (relative)", rel <= 1e-4, rel, "<= 1e-4")
    return res


# ------------------------------------------------------------------ 6-7


@_timed
def criterion_6() -> CriterionResult:
    """Taylor-Green, steady single mode and the discrete energy identity."""
    res = CriterionResult(6, "solver verification")
    nu = 0.1
    cfg = SimConfig(nu=nu, M=64, dt=1e-3, t_end=1.0, record_stride=1000)
    grid = cfg.grid
    rec = simulate(cfg, u0=taylor_green(grid), forcing=None)
    exact = taylor_green_exact(1.0, nu, grid)
    err = forms.l2(rec.final - exact) / forms.l2(exact)
    res.add("Taylor-Green relative L2 error at t=1", err < 1e-6, err, "< 1e-6")

    cfg = SimConfig(nu=nu, M=16, dt=1e-2, t_end=10.0, record_stride=1000)
    grid = cfg.grid
    mode = single_mode(grid, (2, 1), 1.0)
    f = mode * (nu * 5.0)
    rec = simulate(cfg, u0=mode, forcing=f)
    drift = forms.l2(rec.final - mode) / forms.l2(mode)
    res.add("forced single mode drift over 1000 steps", drift < 1e-8, drift, "< 1e-8")

    worst = 0.0
    for kw in ({}, {"forcing_kind": "kolmogorov", "forcing_amplitude": 1.0, "forcing_k": 2}):
        cfg = SimConfig(nu=nu, M=32, dt=1e-3, t_end=1.0, record_stride=1, **kw)
        r, scale = energy_identity_residual(simulate(cfg), nu)
        worst = max(worst, r / scale / cfg.dt)
    res.add("energy identity residual / (term scale * dt)", worst <= 10.0, worst, "<= 10")
    return res


def kolmogorov_config() -> SimConfig:
    return SimConfig(nu=0.05, M=32, dt=1e-2, t_end=220.0, forcing_kind="kolmogorov",
                     forcing_amplitude=2.25, forcing_k=4, init_kind="random",
                     init_amplitude=1.0, seed=0, record_stride=10)


@_timed
def criterion_7(kolmogorov: SimConfig | None = None) -> CriterionResult:
    """Window-averaged enstrophy against (2/nu^2) F^2 for three flow regimes."""
    res = CriterionResult(7, "a priori enstrophy bound")
    rows = []
    rho = forms.poincare_constant().rho

    nu = 0.5
    cfg = SimConfig(nu=nu, M=32, dt=5e-3, t_end=24.0, record_stride=2, seed=3)
    rep = verify_apriori_bound(simulate(cfg), nu, rho=rho)
    res.add("decaying run: late/first window average", rep.passed, rep.ratio, "<= 1e-3 (bound 0)")
    rows.append(_fmt("decaying", rep.T, rep.max_window_average, rep.bound, rep.ratio))

    nu = 1.0
    cfg = SimConfig(nu=nu, M=16, dt=1e-2, t_end=12.0, record_stride=1)
    mode = single_mode(cfg.grid, (2, 1), 1.0)
    rep = verify_apriori_bound(simulate(cfg, u0=mode, forcing=mode * (nu * 5.0)), nu, rho=rho)
    res.add("steady single mode: ratio", abs(rep.ratio - 0.5) <= 1e-6, rep.ratio, "0.5 +- 1e-6")
    rows.append(_fmt("steady", rep.T, rep.max_window_average, rep.bound, rep.ratio))

    cfg = kolmogorov or kolmogorov_config()
    rec = simulate(cfg)
    gr = forms.grashof(max(rec.f_vprime), 1.0, cfg.nu)
    rep = verify_apriori_bound(rec, cfg.nu, rho=rho)
    res.add(f"Kolmogorov run (Gr={gr:.4g}): ratio", rep.passed, rep.ratio, "<= 1")
    rows.append(_fmt("kolmogorov", rep.T, rep.max_window_average, rep.bound, rep.ratio))
    res.tables["apriori"] = ("case,T,max_late_window_average,bound,ratio", rows)
    return res


# ------------------------------------------------------------------ 8


def random_gronwall_case(rng: np.random.Generator, dt: float = 1e-2):
    """alpha with positive mean and beta+ decaying; returns (alpha, beta, y0, window)."""
    a0 = rng.uniform(0.5, 2.0)
    a1 = rng.uniform(0.0, 2.0) * a0
    omega = rng.uniform(1.0, 3.0)
    phase = rng.uniform(0, 2 * np.pi)
    tau = rng.uniform(0.5, 2.0)
    b0 = rng.uniform(0.0, 1.0)
    y0 = rng.uniform(0.1, 10.0)
    rate = min(a0, 1.0 / tau)
    window = 2 * np.pi / omega
    # long enough to decay by ~e^-50 and to hold 5 windows in the tail half
    t_end = max(50.0 / rate, 12 * window)
    alpha = gronwall.TimeSeries.sample(lambda t: a0 + a1 * np.sin(omega * t + phase), t_end, dt)
    beta = gronwall.TimeSeries.sample(
        lambda t: b0 * y0 * np.exp(-t / tau) * (1 + np.sin(3 * t)), t_end, dt)
    return alpha, beta, y0, window


def closed_form_cases(dt: float = 1e-3):
    """(name, alpha, beta, y0, exact solution on the grid)."""
    def ts(fn, t_end):
        return gronwall.TimeSeries.sample(fn, t_end, dt)

    out = []
    a = ts(lambda t: np.ones_like(t), 10.0)
    out.append(("exp_forced", a, ts(lambda t: np.exp(-t), 10.0), 1.0,
                np.exp(-a.times) * (1 + a.times)))
    out.append(("exp_free", a, ts(lambda t: 0 * t, 10.0), 1.0, np.exp(-a.times)))
    a = ts(lambda t: 1 + np.sin(t), 20.0)
    out.append(("oscillatory", a, ts(lambda t: 0 * t, 20.0), 1.0,
                np.exp(-a.times - 1 + np.cos(a.times))))
    return out


def violating_cases(dt: float = 1e-2):
    """(name, alpha, beta, index of the hypothesis that must fail)."""
    def ts(fn):
        return gronwall.TimeSeries.sample(fn, 80.0, dt)

    zero = ts(lambda t: 0 * t)
    return [
        ("alpha_zero", zero, zero, 0),
        ("alpha_negative_mean", ts(lambda t: -0.5 + np.sin(t)), zero, 0),
        ("beta_persistent", ts(lambda t: 1 + 0 * t), ts(lambda t: 1 + 0 * t), 2),
        ("beta_growing_pulses", ts(lambda t: 1 + 0 * t), ts(lambda t: np.maximum(np.sin(t), 0)), 2),
    ]


@_timed
def criterion_8(count: int = 200, seed: int = 0) -> CriterionResult:
    """Random envelopes decay, closed forms match, violations are flagged."""
    res = CriterionResult(8, "generalized Gronwall suite")
    rng = np.random.default_rng(seed)
    failures = 0
    hyp_failures = 0
    rows = []
    for i in range(count):
        alpha, beta, y0, T = random_gronwall_case(rng)
        rep = gronwall.check_hypotheses(alpha, beta, T)
        y = gronwall.integrate_inequality(alpha, beta, y0)
        concl = gronwall.verify_conclusion(y, T)
        failures += not concl.decayed
        hyp_failures += not rep.all_met
        rows.append(_fmt(str(i), rep.m, rep.M, rep.beta_plus_limit,
                         concl.first_window_max, concl.final_window_max, str(int(concl.decayed))))
    res.add(f"random cases failing the conclusion (of {count})", failures == 0, failures, "== 0")
    res.add(f"random cases failing the hypotheses (of {count})", hyp_failures == 0, hyp_failures,
            "== 0")
    worst = 0.0
    for _name, a, b, y0, exact in closed_form_cases():
        y = gronwall.integrate_inequality(a, b, y0)
        worst = max(worst, float(np.abs(y.values - exact).max()))
    res.add("closed-form max abs error", worst <= 1e-8, worst, "<= 1e-8")
    flagged = 0
    cases = violating_cases()
    for _name, a, b, idx in cases:
        rep = gronwall.check_hypotheses(a, b, 2 * np.pi)
        flagged += not rep.hypotheses_met[idx]
    res.add("violating cases flagged", flagged == len(cases), flagged, f"== {len(cases)}")
    res.tables["gronwall_random"] = ("case,m,M,beta_plus_limit,first_window_max,"
                                     "final_window_max,decayed", rows)
    return res


# ------------------------------------------------------------------ 9-10


@_timed
def criterion_9(cfg: TwinConfig | None = None) -> CriterionResult:
    """Laminar twin run: decay of |w| and ||R_N w||, split bound and residual."""
    res = CriterionResult(9, "twin experiment and proof inequality")
    cfg = cfg or TwinConfig()
    diag = twin_experiment(cfg)
    w_decay = decay_ratio(diag.w_l2sq)
    r_decay = decay_ratio(diag.rnw_l2sq)
    res.add("|w| final/initial", w_decay < 1e-6, w_decay, "< 1e-6")
    res.add("||R_N w|| final/initial", r_decay < 1e-6, r_decay, "< 1e-6")
    check = verify_differential_inequality(diag)
    res.add(f"split inequality max ratio (C1={diag.C1:.4g}, N={diag.N})", check.split_holds,
            check.split_max_ratio, "<= 1 at every sample")
    res.add("residual minus tolerance model (max)", check.residual_holds,
            check.max_residual_excess, "<= 0 at every sample")
    gr = gronwall_on_twin(diag)
    res.add("Gronwall hypotheses on assembled alpha, beta (mean alpha)", gr.all_met, gr.m, "> 0")
    res.tables["twin"] = (",".join(diag.COLUMNS), diag.to_csv_rows()[1:])
    return res


@_timed
def criterion_10(sweep=((1.0, 1.0), (0.5, 1.0), (0.1, 1.0), (1.0, 10.0), (0.2, 0.5))) -> CriterionResult:
    """Threshold formulas at unit data and the h-N consistency on a sweep."""
    res = CriterionResult(10, "threshold formulas")
    N2, _ = threshold_2d(1.0, 1.0, gamma=0.5, C1=1.0)
    res.add("threshold_2d(nu=1, F=1, gamma=1/2, C1=1)", N2 == 8.0, N2, "== 8")
    ones = gronwall.TimeSeries(np.linspace(0.0, 10.0, 1001), np.ones(1001))
    N3, _, _ = threshold_3d(1.0, ones, gamma=1.0 / 3.0, C1=1.0)
    res.add("threshold_3d(nu=1, grad series 1, gamma=1/3, C1=1)", abs(N3 - 8.0) <= 1e-12, N3,
            "== 8 (to rounding)")
    lo, hi = kuhn_bracket(2)
    n_ok = 0
    rows = []
    vol = (2 * math.pi) ** 2
    for nu, F in sweep:
        N, h = threshold_2d(nu, F)
        c = N * h**2 / vol
        inside = lo * (1 - 1e-12) <= c <= hi * (1 + 1e-12)
        # the coarsest Kuhn mesh of the box with cell diameter <= h
        n_axis = math.ceil(2 * math.pi * math.sqrt(2) / h)
        N_mesh = (n_axis + 1) ** 2
        ok = inside and N_mesh >= N
        n_ok += ok
        rows.append(_fmt(nu, F, N, h, c, str(N_mesh), str(int(ok))))
    res.add(f"h^2 N / |Omega| in [{lo:.4g}, {hi:.4g}] and realized mesh has >= N vertices",
            n_ok == len(sweep), n_ok, f"== {len(sweep)} cases")
    res.tables["thresholds"] = ("nu,F,N,h,N_h2_over_volume,N_mesh,consistent", rows)
    return res


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


__all__ = ["Check", "CriterionResult", "CRITERIA"] + [
    f"criterion_{i}" for i in CRITERIA
]
