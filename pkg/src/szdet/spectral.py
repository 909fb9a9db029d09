"""Divergence-free velocity fields on the periodic box ``[0, L]^d``.

Fields are stored as Fourier-series coefficients ``c_k`` (``u(x) = sum c_k
exp(i k.x)``), i.e. ``fftn(u) / M**d``. Integrals are physical, so
``|u|^2 = L^d sum |c_k|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SpectralGrid:
    dim: int
    M: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.M < 4 or self.M % 2:
            raise ValueError("M must be an even integer >= 4")

    @cached_property
    def n(self) -> np.ndarray:
        """Integer wave indices, shape (dim, M, ..., M)."""
        idx = np.fft.fftfreq(self.M, 1.0 / self.M).round().astype(int)
        return np.stack(np.meshgrid(*[idx] * self.dim, indexing="ij"))

    @cached_property
    def k(self) -> np.ndarray:
        return self.n * (2 * np.pi / self.L)

    @cached_property
    def k2(self) -> np.ndarray:
        return (self.k**2).sum(axis=0)

    @cached_property
    def inv_k2(self) -> np.ndarray:
        out = np.zeros_like(self.k2)
        nz = self.k2 > 0
        out[nz] = 1.0 / self.k2[nz]
        return out

    @cached_property
    def dealias(self) -> np.ndarray:
        """2/3-rule mask: every |n_j| < M/3."""
        return np.all(np.abs(self.n) < self.M / 3, axis=0)

    @property
    def volume(self) -> float:
        return self.L**self.dim

    @property
    def dx(self) -> float:
        return self.L / self.M

    @cached_property
    def x(self) -> np.ndarray:
        """Collocation points, shape (dim, M, ..., M)."""
        pts = np.arange(self.M) * self.dx
        return np.stack(np.meshgrid(*[pts] * self.dim, indexing="ij"))

    def to_spectral(self, phys: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return sfft.fftn(phys, axes=axes) / self.M**self.dim

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return sfft.ifftn(coeffs * self.M**self.dim, axes=axes).real

    def leray(self, coeffs: np.ndarray) -> np.ndarray:
        """Mode-wise projection onto the plane orthogonal to k; kills the mean."""
        kdotc = (self.k * coeffs).sum(axis=0)
        out = coeffs - self.k * (kdotc * self.inv_k2)
        out[(slice(None),) + (0,) * self.dim] = 0.0
        return out


@dataclass(eq=False)
class SpectralField:
    grid: SpectralGrid
    coeffs: np.ndarray

    @classmethod
    def from_physical(cls, grid: SpectralGrid, phys: np.ndarray, project: bool = True):
        c = grid.to_spectral(np.asarray(phys, dtype=float))
        return cls(grid, grid.leray(c) if project else c)

    @classmethod
    def zeros(cls, grid: SpectralGrid):
        return cls(grid, np.zeros((grid.dim,) + (grid.M,) * grid.dim, dtype=complex))

    def physical(self) -> np.ndarray:
        return self.grid.to_physical(self.coeffs)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise GridMismatch(f"{self.grid} vs {other.grid}")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, a: float):
        return SpectralField(self.grid, self.coeffs * a)

    __rmul__ = __mul__

    def divergence_defect(self) -> float:
        """max_k |k . c_k| relative to max_k |k| |c_k|."""
        kdotc = np.abs((self.grid.k * self.coeffs).sum(axis=0)).max()
        scale = (np.sqrt(self.grid.k2) * np.abs(self.coeffs).max(axis=0)).max()
        return float(kdotc / scale) if scale > 0 else 0.0

    def mean(self) -> np.ndarray:
        return self.coeffs[(slice(None),) + (0,) * self.grid.dim]

    def gradient(self) -> np.ndarray:
        """Physical d u_i / d x_j, shape (dim, dim, M, ..., M)."""
        g = self.grid
        return g.to_physical(1j * g.k[None, :] * self.coeffs[:, None])

    def sampler(self):
        """Pointwise evaluation of the Fourier series at arbitrary points."""
        return FourierSampler(self)


class FourierSampler:
    """Evaluates ``sum c_k exp(i k.x)`` at scattered points (nonzero modes only)."""

    def __init__(self, field: SpectralField):
        g = field.grid
        active = np.abs(field.coeffs).max(axis=0) > 0
        if not active.any():
            self.kmax = 0
        else:
            self.kmax = int(np.abs(g.n[:, active]).max())
        K = self.kmax
        idx = np.arange(-K, K + 1)
        sl = np.ix_(*[idx % g.M] * g.dim)
        self.idx = idx * (2 * np.pi / g.L)
        self.c = np.stack([c[sl] for c in field.coeffs])  # (dim, 2K+1, ...)
        self.dim = g.dim

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        E = [np.exp(1j * points[:, j, None] * self.idx[None, :]) for j in range(self.dim)]
        out = np.empty((len(points), len(self.c)))
        for comp, c in enumerate(self.c):
            if self.dim == 2:
                v = np.einsum("pa,ab,pb->p", E[0], c, E[1], optimize=True)
            else:
                t = (E[0] @ c.reshape(c.shape[0], -1)).reshape(len(points), *c.shape[1:])
                v = np.einsum("pbc,pb,pc->p", t, E[1], E[2], optimize=True)
            out[:, comp] = v.real
        return out


def random_field(
    grid: SpectralGrid, rng: np.random.Generator, kmax: float = 8.0, kmin: float = 0.0,
    spectrum_slope: float = 0.0,
) -> SpectralField:
    """Seeded band-limited divergence-free field with |n| in (kmin, kmax]."""
    shape = (grid.dim,) + (grid.M,) * grid.dim
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    nmag = np.sqrt((grid.n**2).sum(axis=0))
    band = (nmag <= kmax) & (nmag > kmin) & grid.dealias
    amp = np.where(band, np.maximum(nmag, 1.0) ** spectrum_slope, 0.0)
    c = grid.leray(c * amp)
    # real part symmetrises the coefficients
    return SpectralField.from_physical(grid, grid.to_physical(c))


def single_mode(grid: SpectralGrid, n: tuple[int, ...], amplitude: float = 1.0,
                direction: np.ndarray | None = None) -> SpectralField:
    """``a * e * cos(k.x)`` with ``e`` orthogonal to ``k``, scaled to L2 norm ``a``."""
    n = np.asarray(n, dtype=float)
    if direction is None:
        if grid.dim == 2:
            direction = np.array([-n[1], n[0]])
        else:
            trial = np.eye(3)[np.argmin(np.abs(n))]
            direction = np.cross(n, trial)
    e = np.asarray(direction, dtype=float)
    e = e - n * (e @ n) / (n @ n)
    e /= np.linalg.norm(e)
    x = grid.x
    phase = np.tensordot(n * (2 * np.pi / grid.L), x, axes=(0, 0))
    phys = e.reshape((-1,) + (1,) * grid.dim) * np.cos(phase)[None]
    f = SpectralField.from_physical(grid, phys)
    norm = np.sqrt(grid.volume * (np.abs(f.coeffs) ** 2).sum())
    return f * (amplitude / norm)


def convective(u: SpectralField, v: SpectralField) -> np.ndarray:
    """Dealiased coefficients of ``(u . grad) v`` (no projection)."""
    u._check(v)
    g = u.grid
    mask = g.dealias
    uphys = g.to_physical(u.coeffs * mask)
    grad = g.to_physical(1j * g.k[None, :] * (v.coeffs * mask)[:, None])
    prod = np.einsum("j...,ij...->i...", uphys, grad)
    return g.to_spectral(prod) * mask
