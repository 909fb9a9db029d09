"""Scott-Zhang interpolation onto continuous piecewise-linear elements.

Every vertex ``x_i`` owns a face ``sigma_i`` (see :func:`szdet.mesh.select_face`)
and the dual function ``psi_i`` of that face. The nodal coefficient of the
interpolant is the face average ``l_i(u) = int_{sigma_i} psi_i u``, which is
well defined for traces of H^1 functions, reproduces linear functions and
keeps homogeneous Dirichlet data.

Samplers are callables taking points of shape (P, dim) and returning values
of shape (P,) for scalars or (P, ncomp) for vector fields.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .mesh import MeshError, SimplicialMesh, simplex_measures
from .quadrature import simplex_rule

Sampler = Callable[[np.ndarray], np.ndarray]

DEFAULT_FACE_POINTS = 5  # exact to degree 9 on faces
DEFAULT_CELL_POINTS = 5  # exact to degree 9 on cells


@dataclass(frozen=True)
class DualBasis:
    """Dual basis of a face in the P1 nodal basis of that face.

    Row ``j`` of ``coefficients`` expands ``psi_j`` in the nodal functions
    ``phi_k`` of ``face_vertices`` (same order).
    """

    face_index: int
    face_vertices: tuple[int, ...]
    coefficients: np.ndarray
    face_measure: float

    def reordered(self, first: int) -> np.ndarray:
        """Coefficients with vertex ``first`` moved to position 0."""
        order = [self.face_vertices.index(first)]
        order += [j for j in range(len(self.face_vertices)) if j != order[0]]
        return self.coefficients[np.ix_(order, order)]


def p1_mass_matrix(k: int, measure: float) -> np.ndarray:
    """Exact P1 mass matrix on a k-simplex."""
    m = np.ones((k + 1, k + 1)) + np.eye(k + 1)
    return measure / ((k + 1) * (k + 2)) * m


def dual_basis(mesh: SimplicialMesh, face_index: int) -> DualBasis:
    verts = mesh.faces[face_index]
    measure = float(simplex_measures(mesh.vertices[verts][None])[0])
    scale = max(mesh.extents) ** (mesh.dim - 1) if mesh.extents else 1.0
    if not measure > 1e-14 * scale:
        raise MeshError(f"degenerate face {face_index} (measure {measure:g})")
    coeffs = np.linalg.inv(p1_mass_matrix(mesh.dim - 1, measure))
    return DualBasis(int(face_index), tuple(int(v) for v in verts), coeffs, measure)


def biorthogonality_defect(
    mesh: SimplicialMesh, basis: DualBasis, n_points: int = DEFAULT_FACE_POINTS
) -> float:
    """max_{j,k} |int psi_j phi_k - delta_jk| evaluated by face quadrature."""
    bary, w = simplex_rule(mesh.dim - 1, n_points)
    psi = bary @ basis.coefficients.T
    gram = basis.face_measure * np.einsum("q,qj,qk->jk", w, psi, bary)
    return float(np.abs(gram - np.eye(len(gram))).max())


class ScottZhangOperator:
    """The Scott-Zhang interpolant ``I_h`` on a fixed mesh."""

    def __init__(self, mesh: SimplicialMesh, face_points: int = DEFAULT_FACE_POINTS):
        self.mesh = mesh
        self.face_points = face_points
        d = mesh.dim
        n = mesh.n_vertices
        self.faces = mesh.selected_faces

        self.face_vertices = np.empty((n, d), dtype=np.int64)
        self.psi = np.empty((n, d))
        self.face_measures = np.empty(n)
        cache: dict[int, DualBasis] = {}
        for i, f in enumerate(self.faces):
            basis = cache.get(f) or cache.setdefault(f, dual_basis(mesh, f))
            others = [v for v in basis.face_vertices if v != i]
            self.face_vertices[i] = [i, *others]
            self.psi[i] = basis.reordered(i)[0]
            self.face_measures[i] = basis.face_measure

        bary, w = simplex_rule(d - 1, face_points)
        corners = mesh.vertices[self.face_vertices]  # (n, d, dim)
        self.sample_points = np.einsum("qj,njx->nqx", bary, corners)
        psi_q = self.psi @ bary.T  # (n, q)
        self.sample_weights = self.face_measures[:, None] * w[None, :] * psi_q

    @property
    def n(self) -> int:
        return self.mesh.n_vertices

    def functional(self, vertex_index: int, sampler: Sampler) -> np.ndarray:
        values = np.asarray(sampler(self.sample_points[vertex_index]))
        return np.tensordot(self.sample_weights[vertex_index], values, axes=(0, 0))

    def interpolate(self, sampler: Sampler) -> np.ndarray:
        n, q, dim = self.sample_points.shape
        values = np.asarray(sampler(self.sample_points.reshape(n * q, dim)))
        values = values.reshape((n, q) + values.shape[1:])
        return np.einsum("nq,nq...->n...", self.sample_weights, values)

    def interpolate_p1(self, coeffs: np.ndarray) -> np.ndarray:
        """I_h of the P1 function with nodal values ``coeffs`` (exact on faces)."""
        bary, _ = simplex_rule(self.mesh.dim - 1, self.face_points)
        c = np.asarray(coeffs)
        vals = np.einsum("qj,nj...->nq...", bary, c[self.face_vertices])
        return np.einsum("nq,nq...->n...", self.sample_weights, vals)

    @cached_property
    def mass_matrix(self) -> sp.csr_matrix:
        return assemble_mass(self.mesh)

    def l2_norm(self, coeffs: np.ndarray) -> float:
        """Exact L2 norm of the P1 function with nodal coefficients ``coeffs``."""
        c = np.asarray(coeffs).reshape(self.n, -1)
        return float(np.sqrt(np.einsum("ic,ic->", c, self.mass_matrix @ c)))


def functional(op: ScottZhangOperator, vertex_index: int, sampler: Sampler):
    return op.functional(vertex_index, sampler)


def interpolate(op: ScottZhangOperator, sampler: Sampler) -> np.ndarray:
    return op.interpolate(sampler)


def p1_sampler(mesh: SimplicialMesh, coeffs: np.ndarray) -> Sampler:
    """Pointwise evaluation of a P1 function by brute-force point location.

    Points are located by testing barycentric coordinates against every
    cell, so this is meant for tests on small meshes.
    """
    x = mesh.vertices[mesh.cells]
    T = np.transpose(x[:, 1:, :] - x[:, :1, :], (0, 2, 1))
    Tinv = np.linalg.inv(T)
    coeffs = np.asarray(coeffs)

    def sample(points: np.ndarray) -> np.ndarray:
        rel = points[:, None, :] - x[None, :, 0, :]
        lam = np.einsum("cij,pcj->pci", Tinv, rel)
        lam = np.concatenate([1 - lam.sum(-1, keepdims=True), lam], axis=-1)
        cell = np.argmax(lam.min(axis=-1), axis=1)
        lam_p = lam[np.arange(len(points)), cell]
        return np.einsum("pj,pj...->p...", lam_p, coeffs[mesh.cells[cell]])

    return sample


def assemble_mass(mesh: SimplicialMesh) -> sp.csr_matrix:
    d = mesh.dim
    local = p1_mass_matrix(d, 1.0)
    k = d + 1
    rows = np.repeat(mesh.cells, k, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, k)).ravel()
    data = (mesh.cell_measures[:, None] * local.ravel()[None, :]).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def l2_error(
    op: ScottZhangOperator,
    sampler: Sampler,
    coeffs: np.ndarray | None = None,
    n_points: int = DEFAULT_CELL_POINTS,
) -> float:
    """||u - I_h u||_{L2} by composite cell quadrature."""
    mesh = op.mesh
    if coeffs is None:
        coeffs = op.interpolate(sampler)
    bary, w = simplex_rule(mesh.dim, n_points)
    x = mesh.vertices[mesh.cells]
    pts = np.einsum("qj,cjx->cqx", bary, x)
    nc, q, dim = pts.shape
    exact = np.asarray(sampler(pts.reshape(nc * q, dim)))
    exact = exact.reshape((nc, q) + exact.shape[1:])
    approx = np.einsum("qj,cj...->cq...", bary, coeffs[mesh.cells])
    sq = (exact - approx) ** 2
    if sq.ndim > 2:
        sq = sq.reshape(nc, q, -1).sum(-1)
    return float(np.sqrt(np.sum(mesh.cell_measures[:, None] * w[None, :] * sq)))


def l2_norm_sampler(mesh: SimplicialMesh, sampler: Sampler, n_points=DEFAULT_CELL_POINTS) -> float:
    bary, w = simplex_rule(mesh.dim, n_points)
    pts = np.einsum("qj,cjx->cqx", bary, mesh.vertices[mesh.cells])
    nc, q, dim = pts.shape
    vals = np.asarray(sampler(pts.reshape(nc * q, dim))).reshape(nc, q, -1)
    return float(np.sqrt(np.sum(mesh.cell_measures[:, None] * w[None, :] * (vals**2).sum(-1))))


@dataclass(frozen=True)
class ConvergenceTable:
    h: np.ndarray
    N: np.ndarray
    errors: np.ndarray
    slope: float
    tag: str = ""

    @property
    def running_slopes(self) -> np.ndarray:
        """Pairwise slopes between consecutive levels (NaN for the first)."""
        s = np.full(len(self.h), np.nan)
        s[1:] = np.diff(np.log(self.errors)) / np.diff(np.log(self.h))
        return s


def l2_error_and_rate(
    op_family: Sequence[ScottZhangOperator], sampler: Sampler, smoothness_tag: str = ""
) -> ConvergenceTable:
    """Interpolation error on each level and the least-squares log-log slope."""
    if len(op_family) < 2:
        raise ValueError("a convergence rate needs at least two levels")
    from .mesh import cell_diameters

    h = np.array([cell_diameters(op.mesh).max() for op in op_family])
    N = np.array([op.n for op in op_family])
    errors = np.array([l2_error(op, sampler) for op in op_family])
    positive = errors > 0
    if positive.sum() >= 2:
        slope = float(np.polyfit(np.log(h[positive]), np.log(errors[positive]), 1)[0])
    else:
        slope = float("nan")
    return ConvergenceTable(h, N, errors, slope, smoothness_tag)


_ROUGH_CENTER = np.array([1 / 3, 0.41, 0.29])
_ROUGH_RADIUS = 0.3


def model_field(kind: str, dim: int) -> Sampler:
    """Scalar test fields on the unit box used by the convergence studies.

    ``smooth`` is a product of sines, ``linear`` an affine function and
    ``rough`` is r^0.6 around an off-grid point, cut off smoothly at r = 0.3
    (in H^s for s < 1.6 in 2D).
    """
    if kind == "smooth":
        return lambda p: np.prod(np.sin(np.pi * p[:, :dim]), axis=1)
    if kind == "linear":
        slope = np.array([2.0, -3.0, 0.5])[:dim]
        return lambda p: 1.0 + p[:, :dim] @ slope
    if kind == "rough":
        x0 = _ROUGH_CENTER[:dim]

        def rough(p):
            r = np.linalg.norm(p - x0, axis=1)
            cut = np.where(r < _ROUGH_RADIUS, np.cos(np.pi * r / (2 * _ROUGH_RADIUS)) ** 2, 0.0)
            return r**0.6 * cut

        return rough
    raise ValueError(f"unknown field kind {kind!r}")
