import math
from dataclasses import replace

import numpy as np
import pytest

from szdet import forms
from szdet.determining import (SpectralSZ, ThresholdReport, TwinConfig, assemble_alpha_beta,
                               box_family, epsilon_quantity, estimate_C1, family_bracket,
                               field_corpus, h_from_N, kuhn_bracket, split_bound, threshold_2d,
                               threshold_3d, threshold_report, twin_experiment,
                               verify_differential_inequality)
from szdet.gronwall import TimeSeries
from szdet.mesh import build_box_mesh, metrics
from szdet.spectral import SpectralGrid, random_field
from szdet.szinterp import ScottZhangOperator


def ones(t_end=10.0, value=1.0):
    t = np.linspace(0.0, t_end, 1001)
    return TimeSeries(t, np.full_like(t, value))


def test_unit_thresholds():
    N2, h2 = threshold_2d(1.0, 1.0, gamma=0.5, C1=1.0)
    assert N2 == 8.0
    N3, h3, eps = threshold_3d(1.0, ones(), gamma=1 / 3, C1=1.0)
    assert eps == pytest.approx(1.0, abs=1e-15)
    assert N3 == pytest.approx(8.0, rel=1e-14)


def test_threshold_scalings():
    # N^{2 gamma} proportional to C1^2 F^2 / nu^4
    base, _ = threshold_2d(0.5, 2.0, gamma=0.5, C1=1.5)
    assert base == pytest.approx(8 * 1.5**2 * (2.0 / 0.25) ** 2)
    assert threshold_2d(0.5, 4.0, gamma=0.5, C1=1.5)[0] == pytest.approx(4 * base)
    assert threshold_2d(0.5, 2.0, gamma=0.25, C1=1.5)[0] == pytest.approx(base**2)
    with pytest.raises(ValueError):
        threshold_2d(0.0, 1.0)
    with pytest.raises(ValueError):
        threshold_2d(1.0, 1.0, gamma=-1)


def test_h_from_N_inverts_counting_relation():
    for dim, vol in ((2, 4.0), (3, 8.0)):
        c = kuhn_bracket(dim)[0]
        h = h_from_N(500.0, dim, vol, c)
        assert 500.0 * h**dim / vol == pytest.approx(c)


def test_kuhn_bracket_matches_meshes():
    for dim in (2, 3):
        lo, hi = kuhn_bracket(dim, 2)
        for mesh in box_family(dim, 3, 2):
            assert lo < metrics(mesh).c_lower <= hi * (1 + 1e-12)
        assert family_bracket(dim, 3)[1] == pytest.approx(hi)


def test_epsilon_quantity_monotone_and_min_over_windows():
    t = np.arange(2001) * (2 * math.pi / 200)  # windows of 2 pi are sample-aligned
    small = TimeSeries(t, 1 + 0.5 * np.sin(t))
    large = TimeSeries(t, 2 + 0.5 * np.sin(t))
    assert epsilon_quantity(small, [1.0]) < epsilon_quantity(large, [1.0])
    e1, e2 = epsilon_quantity(small, [1.0]), epsilon_quantity(small, [2 * math.pi])
    assert epsilon_quantity(small, [1.0, 2 * math.pi]) == min(e1, e2)
    assert e2 == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        epsilon_quantity(small, [])


def test_threshold_report_fields():
    rep = threshold_report(nu=0.5, F=1.0, C1=1.0, grad_linf=ones(value=2.0))
    assert isinstance(rep, ThresholdReport)
    assert rep.grashof == pytest.approx(4.0)
    assert rep.epsilon_inf == pytest.approx(0.5 * 2.0)
    assert dict(rep.rows())["N_threshold_2d"] == rep.N_threshold_2d


def test_alpha_beta_assembly():
    nu, N, gamma, C1 = 0.7, 81, 0.5, 1.3
    u = np.array([1.0, 2.0])
    fg = np.array([0.1, 0.0])
    rnw = np.array([0.3, 0.05])
    alpha, beta = assemble_alpha_beta(nu, N, gamma, C1, u, fg, rnw)
    np.testing.assert_allclose(alpha, nu * N / (2 * C1**2) - 2 / nu * u)
    np.testing.assert_allclose(beta, 2 / nu * fg + nu * N / C1**2 * rnw)


@pytest.fixture(scope="module")
def sz_setup():
    grid = SpectralGrid(2, 32)
    op = ScottZhangOperator(build_box_mesh(2, grid.L, 8))
    return grid, op


def test_spectral_projector_matches_sampling(sz_setup, rng):
    grid, op = sz_setup
    u = random_field(grid, rng, kmax=6)
    proj = SpectralSZ(op, grid)
    np.testing.assert_allclose(proj.coefficients(u), op.interpolate(u.sampler()), atol=1e-12)
    assert proj.l2sq(u) == pytest.approx(op.l2_norm(op.interpolate(u.sampler())) ** 2)


def test_C1_estimate_bounds_corpus_and_split(sz_setup):
    grid, op = sz_setup
    corpus = field_corpus(4, seed=3, kmax=6, M=32)
    est = estimate_C1([op], corpus, gamma=0.5)
    assert est.table.shape == (1, 4) and est.value == est.table.max()
    proj = SpectralSZ(op, grid)
    for w in corpus:
        bound = 2 * op.n ** -1.0 * est.value**2 * forms.h1_semi(w) ** 2 + 2 * proj.l2sq(w)
        assert forms.l2(w) ** 2 <= bound


SMALL_TWIN = TwinConfig(M=32, t_end=1.0, mesh_n=8, C1=1.5)


def test_twin_identical_trajectories():
    diag = twin_experiment(replace(SMALL_TWIN, v_kind="same"))
    assert np.all(diag.w_l2sq == 0) and np.all(diag.rnw_l2sq == 0)


def test_twin_diagnostics_consistent():
    diag = twin_experiment(SMALL_TWIN)
    assert diag.N == 81
    assert diag.to_csv_rows()[0] == "t,w_l2sq,w_h1sq,rnw_l2sq,u_h1sq,grad_linf,alpha,beta,residual"
    assert len(diag.times) == 101
    # Poincare on the torus
    assert np.all(diag.w_h1sq >= diag.w_l2sq)
    alpha, beta = assemble_alpha_beta(diag.nu, diag.N, diag.gamma, diag.C1, diag.u_h1sq,
                                      diag.fg_vprime_sq, diag.rnw_l2sq)
    np.testing.assert_array_equal(alpha, diag.alpha)
    np.testing.assert_array_equal(beta, diag.beta)
    again = twin_experiment(SMALL_TWIN)
    assert again.to_csv_rows() == diag.to_csv_rows()


def test_twin_with_forcing_difference():
    cfg = replace(SMALL_TWIN, v_kind="same", diff_amplitude=0.5, diff_tau=0.5)
    diag = twin_experiment(cfg)
    assert diag.fg_vprime_sq[0] == pytest.approx(0.25 / 2, rel=1e-12)  # |(1,1)|^2 = 2
    assert diag.fg_vprime_sq[-1] == pytest.approx(0.25 / 2 * math.exp(-4.0), rel=1e-9)
    assert diag.w_l2sq[-1] > 0


def test_undersized_C1_is_detected():
    """A high-wavenumber difference on a coarse mesh breaks the split bound for small C1."""
    cfg = TwinConfig(M=32, t_end=0.5, mesh_n=4, v_kind="perturb", perturb_k=4, C1=0.5)
    diag = twin_experiment(cfg)
    bad = verify_differential_inequality(diag)
    assert not bad.split_holds and bad.split_max_ratio > 1
    good = verify_differential_inequality(diag, C1=2.0)
    assert good.split_holds
    ratio = diag.w_l2sq / split_bound(diag, 2.0)
    assert ratio.max() == pytest.approx(good.split_max_ratio)


def test_residual_check_rejects_coarse_stride():
    diag = twin_experiment(replace(SMALL_TWIN, record_every=2e-2, t_end=0.4))
    with pytest.raises(ValueError):
        verify_differential_inequality(diag)
