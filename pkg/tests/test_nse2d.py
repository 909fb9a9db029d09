import math

import numpy as np
import pytest

from szdet import forms
from szdet.nse2d import (CFLError, SimConfig, Stepper, energy_identity_residual, make_forcing,
                         nonlinear, simulate, state_digest, step, taylor_green,
                         taylor_green_exact, verify_apriori_bound)
from szdet.spectral import SpectralGrid, random_field, single_mode


def test_taylor_green_energy_closed_form():
    for t, nu in ((0.0, 0.1), (1.0, 0.1), (2.0, 0.3)):
        u = taylor_green_exact(t, nu, SpectralGrid(2, 16))
        assert 0.5 * forms.l2(u) ** 2 == pytest.approx(math.pi**2 * math.exp(-4 * nu * t), rel=1e-13)
    g = SpectralGrid(2, 16)
    np.testing.assert_array_equal(taylor_green_exact(5.0, 0.0, g).coeffs, taylor_green(g).coeffs)


def test_taylor_green_nonlinearity_is_a_gradient():
    g = SpectralGrid(2, 32)
    assert np.abs(g.leray(nonlinear(taylor_green(g)))).max() < 1e-14


def test_taylor_green_solution():
    cfg = SimConfig(nu=0.1, M=32, dt=1e-3, t_end=0.5, record_stride=100)
    rec = simulate(cfg, u0=taylor_green(cfg.grid))
    exact = taylor_green_exact(0.5, 0.1, cfg.grid)
    assert forms.l2(rec.final - exact) / forms.l2(exact) < 1e-6


def test_unforced_energy_decreases_and_stays_solenoidal():
    cfg = SimConfig(nu=0.05, M=32, dt=5e-3, t_end=1.0, record_stride=1, seed=4)
    rec = simulate(cfg)
    assert np.all(np.diff(rec.energy) < 0)
    assert rec.final.divergence_defect() < 1e-12
    assert np.abs(rec.final.mean()).max() < 1e-15


def test_steady_single_mode():
    g = SpectralGrid(2, 16)
    nu = 0.1
    mode = single_mode(g, (2, 1), 1.0)
    stepper = Stepper(g, nu, 1e-2)
    u = mode
    f = mode * (nu * 5.0)
    for _ in range(200):
        u = stepper(u, f)
    assert forms.l2(u - mode) < 1e-12


def test_time_step_convergence_order():
    g = SpectralGrid(2, 32)
    u0 = random_field(g, np.random.default_rng(2), kmax=6)
    u0 = u0 * (2.0 / forms.l2(u0))
    f = single_mode(g, (1, 2), 1.0)
    t_end = 0.5

    def run(dt):
        cfg = SimConfig(nu=0.05, M=32, dt=dt, t_end=t_end, record_stride=10**6)
        return simulate(cfg, u0=u0, forcing=f).final

    ref = run(0.5e-3)
    errs = [forms.l2(run(dt) - ref) for dt in (8e-3, 4e-3, 2e-3)]
    slopes = np.diff(np.log(errs)) / np.log(0.5)
    assert np.all(slopes >= 2 - 0.2), slopes


def test_energy_identity():
    cfg = SimConfig(nu=0.1, M=32, dt=1e-3, t_end=0.5, record_stride=1, forcing_kind="kolmogorov",
                    forcing_amplitude=1.0, forcing_k=2)
    res, scale = energy_identity_residual(simulate(cfg), cfg.nu)
    assert res <= 10 * cfg.dt * scale


def test_determinism(tmp_path):
    cfg = SimConfig(nu=0.1, M=32, dt=1e-2, t_end=0.3, record_stride=2, checkpoint_stride=10,
                    forcing_kind="kolmogorov", forcing_amplitude=0.5, seed=11)
    a = simulate(cfg, checkpoint_dir=tmp_path / "a")
    b = simulate(cfg, checkpoint_dir=tmp_path / "b")
    assert a.to_csv_rows() == b.to_csv_rows()
    assert state_digest(a.final) == state_digest(b.final)
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == ["u_00000010.npy", "u_00000020.npy", "u_00000030.npy"]
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cfl_violation():
    g = SpectralGrid(2, 32)
    u = taylor_green(g) * 50.0
    with pytest.raises(CFLError):
        step(u, None, 0.1, 0.1)
    cfg = SimConfig(nu=0.1, M=32, dt=0.5, t_end=1.0, init_amplitude=50.0)
    with pytest.raises(CFLError, match="t="):
        simulate(cfg)


def test_kolmogorov_forcing_shape():
    cfg = SimConfig(M=16, forcing_kind="kolmogorov", forcing_amplitude=2.0, forcing_k=3)
    f = make_forcing(cfg)
    x, y = cfg.grid.x
    np.testing.assert_allclose(f.physical()[0], 2.0 * np.sin(3 * y), atol=1e-13)
    # ||f||_V' = A |sin(k y)| / k over the box: A * sqrt(2 pi^2) / k
    assert forms.vprime(f) == pytest.approx(2.0 * math.sqrt(2) * math.pi / 3, rel=1e-13)
    with pytest.raises(ValueError):
        make_forcing(SimConfig(forcing_kind="gusty", forcing_amplitude=1.0))


def test_apriori_steady_ratio_is_half():
    nu = 1.0
    cfg = SimConfig(nu=nu, M=16, dt=1e-2, t_end=12.0, record_stride=1)
    mode = single_mode(cfg.grid, (2, 1), 1.0)
    rep = verify_apriori_bound(simulate(cfg, u0=mode, forcing=mode * (nu * 5.0)), nu)
    assert rep.ratio == pytest.approx(0.5, abs=1e-6)
    assert rep.passed


def test_apriori_decaying_and_too_short():
    cfg = SimConfig(nu=1.0, M=16, dt=1e-2, t_end=12.0, record_stride=5)
    rep = verify_apriori_bound(simulate(cfg), 1.0)
    assert rep.bound == 0.0 and rep.passed
    short = SimConfig(nu=1.0, M=16, dt=1e-2, t_end=3.0)
    with pytest.raises(ValueError):
        verify_apriori_bound(simulate(short), 1.0)
