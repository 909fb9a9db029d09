import numpy as np
import pytest

from szdet.spectral import (GridMismatch, SpectralField, SpectralGrid, convective, random_field,
                            single_mode)


def _embed(field: SpectralField, fine: SpectralGrid) -> SpectralField:
    """Same Fourier series on a finer grid (zero padding)."""
    g = field.grid
    out = SpectralField.zeros(fine)
    idx = np.fft.fftfreq(g.M, 1.0 / g.M).round().astype(int)
    src = np.ix_(*[np.arange(g.M)] * g.dim)
    dst = np.ix_(*[idx % fine.M] * g.dim)
    for c in range(g.dim):
        out.coeffs[c][dst] = field.coeffs[c][src]
    return out


def _restrict(coeffs: np.ndarray, coarse: SpectralGrid, fine_M: int) -> np.ndarray:
    idx = np.fft.fftfreq(coarse.M, 1.0 / coarse.M).round().astype(int)
    sl = np.ix_(*[idx % fine_M] * coarse.dim)
    return np.stack([c[sl] for c in coeffs])


@pytest.mark.parametrize("dim,M", [(2, 24), (3, 12)])
def test_parseval(dim, M, rng):
    g = SpectralGrid(dim, M)
    u = random_field(g, rng, kmax=M / 3 - 1)
    grid_sum = (u.physical() ** 2).sum() * g.dx**dim
    spectral = g.volume * (np.abs(u.coeffs) ** 2).sum()
    assert grid_sum == pytest.approx(spectral, rel=1e-12)


def test_leray_projection(rng):
    g = SpectralGrid(2, 16)
    phys = rng.standard_normal((2, 16, 16))
    u = SpectralField.from_physical(g, phys)
    assert u.divergence_defect() < 1e-14
    np.testing.assert_allclose(g.leray(u.coeffs), u.coeffs, atol=1e-15)
    assert np.abs(u.mean()).max() == 0.0
    # a pure gradient is removed entirely
    x, y = g.x
    grad = np.stack([np.cos(x) * np.cos(2 * y), -2 * np.sin(x) * np.sin(2 * y)])
    assert np.abs(SpectralField.from_physical(g, grad).coeffs).max() < 1e-15


@pytest.mark.parametrize("dim,M", [(2, 16), (3, 8)])
def test_fourier_sampler(dim, M, rng):
    g = SpectralGrid(dim, M)
    u = random_field(g, rng, kmax=M / 3 - 1)
    s = u.sampler()
    pts = g.x.reshape(dim, -1).T
    np.testing.assert_allclose(s(pts), u.physical().reshape(dim, -1).T, atol=1e-12)


def test_sampler_off_grid_matches_closed_form():
    g = SpectralGrid(2, 16)
    x, y = g.x
    u = SpectralField.from_physical(g, np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)]))
    p = np.array([[0.3, 1.7], [2.9, 5.1]])
    exact = np.stack([np.sin(p[:, 0]) * np.cos(p[:, 1]), -np.cos(p[:, 0]) * np.sin(p[:, 1])], axis=1)
    np.testing.assert_allclose(u.sampler()(p), exact, atol=1e-13)


@pytest.mark.parametrize("kmax_fraction", [1 / 6, 1 / 3])
def test_dealiasing_against_finer_grid(kmax_fraction, rng):
    M = 24
    g = SpectralGrid(2, M)
    band = M * kmax_fraction - (1 if kmax_fraction == 1 / 3 else 0)
    u = random_field(g, rng, kmax=band)
    v = random_field(g, rng, kmax=band)
    fine = SpectralGrid(2, 2 * M)
    ref = convective(_embed(u, fine), _embed(v, fine))
    got = convective(u, v)
    ref_on_coarse = _restrict(ref, g, fine.M) * g.dealias
    np.testing.assert_allclose(got, ref_on_coarse, atol=1e-12 * np.abs(ref).max())


def test_single_mode_normalization():
    g = SpectralGrid(2, 16)
    m = single_mode(g, (2, 1), 3.0)
    assert np.sqrt(g.volume * (np.abs(m.coeffs) ** 2).sum()) == pytest.approx(3.0)
    assert m.divergence_defect() < 1e-15
    m3 = single_mode(SpectralGrid(3, 8), (1, 0, 2), 1.0)
    assert m3.divergence_defect() < 1e-15


def test_grid_mismatch_and_validation():
    a = SpectralField.zeros(SpectralGrid(2, 8))
    b = SpectralField.zeros(SpectralGrid(2, 16))
    with pytest.raises(GridMismatch):
        a + b
    with pytest.raises(ValueError):
        SpectralGrid(2, 7)
    with pytest.raises(ValueError):
        SpectralGrid(4, 8)


def test_random_field_is_seeded():
    g = SpectralGrid(2, 16)
    a = random_field(g, np.random.default_rng(5))
    b = random_field(g, np.random.default_rng(5))
    np.testing.assert_array_equal(a.coeffs, b.coeffs)
