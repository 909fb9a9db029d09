"""Structured simplicial meshes of boxes in two and three dimensions.

Meshes are built from a uniform grid by splitting each square into two
triangles or each cube into the six Kuhn tetrahedra, and refined by
quadra-section (2D) or red octa-section (3D). Both families are
self-similar, so ``h`` halves exactly at every level and the constants
relating ``N`` and ``h`` stay fixed.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class MeshError(ValueError):
    """Raised for invalid construction arguments or corrupt mesh data."""


@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    """Conforming simplicial triangulation of a box.

    ``faces`` holds the (dim-1)-simplices as sorted vertex tuples in
    lexicographic order; ``face_boundary`` flags those owned by a single
    cell.
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    faces: np.ndarray
    face_boundary: np.ndarray
    boundary_vertex: np.ndarray
    domain_measure: float
    extents: tuple[float, ...] = field(default=())

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @cached_property
    def cell_measures(self) -> np.ndarray:
        return np.abs(signed_measures(self.vertices, self.cells))

    @cached_property
    def vertex_cells(self) -> sp.csr_matrix:
        """Vertex-to-cell incidence as a sparse 0/1 matrix (N x ncells)."""
        nc, k = self.cells.shape
        rows = self.cells.ravel()
        cols = np.repeat(np.arange(nc), k)
        data = np.ones(rows.size, dtype=np.int8)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_vertices, nc))

    @cached_property
    def vertex_faces(self) -> sp.csr_matrix:
        nf, k = self.faces.shape
        rows = self.faces.ravel()
        cols = np.repeat(np.arange(nf), k)
        data = np.ones(rows.size, dtype=np.int8)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_vertices, nf))

    @cached_property
    def selected_faces(self) -> np.ndarray:
        """The face chosen for every vertex by :func:`select_face`."""
        return np.array([select_face(self, i) for i in range(self.n_vertices)])


@dataclass(frozen=True)
class MeshMetrics:
    h: float
    h_min: float
    N: int
    shape_regularity: float
    quasi_uniformity: float
    c_lower: float
    c_upper: float


def signed_measures(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Signed d-volume of each cell (positive for the reference orientation)."""
    x = vertices[cells]
    edges = x[:, 1:, :] - x[:, :1, :]
    d = cells.shape[1] - 1
    return np.linalg.det(edges) / math.factorial(d)


def simplex_measures(points: np.ndarray) -> np.ndarray:
    """Unsigned measure of k-simplices embedded in R^n, shape (m, k+1, n)."""
    edges = points[:, 1:, :] - points[:, :1, :]
    k = edges.shape[1]
    if k == 0:
        return np.ones(len(points))
    gram = np.einsum("mik,mjk->mij", edges, edges)
    return np.sqrt(np.clip(np.linalg.det(gram), 0.0, None)) / math.factorial(k)


def _orient(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    cells = cells.copy()
    neg = signed_measures(vertices, cells) < 0
    cells[neg, -2], cells[neg, -1] = cells[neg, -1], cells[neg, -2].copy()
    return cells


def _assemble(dim, vertices, cells, domain_measure, extents=()) -> SimplicialMesh:
    cells = _orient(vertices, np.asarray(cells, dtype=np.int64))
    local = list(itertools.combinations(range(dim + 1), dim))
    all_faces = np.sort(cells[:, local].reshape(-1, dim), axis=1)
    faces, counts = np.unique(all_faces, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("non-manifold mesh: a face is shared by more than two cells")
    face_boundary = counts == 1
    boundary_vertex = np.zeros(len(vertices), dtype=bool)
    boundary_vertex[faces[face_boundary].ravel()] = True
    return SimplicialMesh(
        dim=dim,
        vertices=vertices,
        cells=cells,
        faces=faces,
        face_boundary=face_boundary,
        boundary_vertex=boundary_vertex,
        domain_measure=float(domain_measure),
        extents=tuple(float(e) for e in extents),
    )


def build_box_mesh(dim: int, extents=1.0, n_per_axis: int = 1) -> SimplicialMesh:
    """Uniform triangulation of ``[0, extents[0]] x ... `` with Kuhn splits."""
    if dim not in (2, 3):
        raise MeshError(f"dim must be 2 or 3, got {dim}")
    if n_per_axis < 1:
        raise MeshError("n_per_axis must be >= 1")
    ext = np.broadcast_to(np.asarray(extents, dtype=float), (dim,)).copy()
    if np.any(ext <= 0):
        raise MeshError("extents must be positive")

    n = n_per_axis
    axes = [np.linspace(0.0, e, n + 1) for e in ext]
    grid = np.meshgrid(*axes, indexing="ij")
    # vertex (i, j[, k]) -> i + (n+1) j + (n+1)^2 k
    vertices = np.stack([g.transpose().ravel() for g in grid], axis=1)
    vertices = vertices[:, :dim]

    stride = (n + 1) ** np.arange(dim)
    origins = np.stack(
        np.meshgrid(*[np.arange(n)] * dim, indexing="ij"), axis=-1
    ).reshape(-1, dim)
    base = origins @ stride

    cells = []
    for perm in itertools.permutations(range(dim)):
        path = [np.zeros(dim, dtype=int)]
        for axis in perm:
            step = path[-1].copy()
            step[axis] = 1
            path.append(step)
        offsets = np.array([p @ stride for p in path])
        cells.append(base[:, None] + offsets[None, :])
    cells = np.concatenate(cells, axis=0)
    return _assemble(dim, vertices, cells, np.prod(ext), ext)


def _bey_children(c: np.ndarray, mid) -> list[list[int]]:
    x0, x1, x2, x3 = c
    m01, m02, m03 = mid(x0, x1), mid(x0, x2), mid(x0, x3)
    m12, m13, m23 = mid(x1, x2), mid(x1, x3), mid(x2, x3)
    return [
        [x0, m01, m02, m03],
        [m01, x1, m12, m13],
        [m02, m12, x2, m23],
        [m03, m13, m23, x3],
        [m01, m02, m03, m13],
        [m01, m02, m12, m13],
        [m02, m03, m13, m23],
        [m02, m12, m13, m23],
    ]


def refine(mesh: SimplicialMesh) -> SimplicialMesh:
    """Uniform refinement: 4 children per triangle, 8 per tetrahedron.

    Tetrahedra are split with Bey's rule after ordering each cell's
    vertices by coordinate sum, which recovers the Kuhn path order of
    the box meshes, so all children are again Kuhn simplices.
    """
    dim = mesh.dim
    cells = mesh.cells
    edge_pairs = np.sort(
        cells[:, list(itertools.combinations(range(dim + 1), 2))].reshape(-1, 2),
        axis=1,
    )
    edges = np.unique(edge_pairs, axis=0)
    nv = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.concatenate([mesh.vertices, midpoints], axis=0)
    edge_id = {(int(a), int(b)): nv + k for k, (a, b) in enumerate(edges)}

    def mid(a, b):
        return edge_id[(a, b) if a < b else (b, a)]

    children = []
    if dim == 2:
        for a, b, c in cells.tolist():
            mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
            children += [[a, mab, mca], [mab, b, mbc], [mca, mbc, c], [mab, mbc, mca]]
    else:
        key = mesh.vertices.sum(axis=1)
        for c in cells.tolist():
            c = sorted(c, key=lambda v: (key[v], v))
            children += _bey_children(c, mid)
    return _assemble(dim, vertices, np.array(children), mesh.domain_measure, mesh.extents)


def cell_diameters(mesh: SimplicialMesh) -> np.ndarray:
    x = mesh.vertices[mesh.cells]
    diff = x[:, :, None, :] - x[:, None, :, :]
    return np.sqrt((diff**2).sum(-1)).max(axis=(1, 2))


def inradii(mesh: SimplicialMesh) -> np.ndarray:
    d = mesh.dim
    x = mesh.vertices[mesh.cells]
    surface = np.zeros(mesh.n_cells)
    for skip in range(d + 1):
        keep = [j for j in range(d + 1) if j != skip]
        surface += simplex_measures(x[:, keep, :])
    return d * mesh.cell_measures / surface


def regular_simplex_shape(dim: int) -> float:
    """diameter / inradius of the regular simplex: 2*sqrt(3) or 2*sqrt(6)."""
    return {2: 2 * math.sqrt(3.0), 3: 2 * math.sqrt(6.0)}[dim]


def metrics(mesh: SimplicialMesh) -> MeshMetrics:
    diam = cell_diameters(mesh)
    h, h_min = float(diam.max()), float(diam.min())
    c = mesh.n_vertices * h**mesh.dim / mesh.domain_measure
    return MeshMetrics(
        h=h,
        h_min=h_min,
        N=mesh.n_vertices,
        shape_regularity=float((diam / inradii(mesh)).max()),
        quasi_uniformity=h / h_min,
        c_lower=c,
        c_upper=c,
    )


def select_face(mesh: SimplicialMesh, vertex_index: int) -> int:
    """Lowest-index face containing the vertex; a boundary face for boundary vertices."""
    if not 0 <= vertex_index < mesh.n_vertices:
        raise IndexError(f"vertex {vertex_index} out of range")
    vf = mesh.vertex_faces
    candidates = np.sort(vf.indices[vf.indptr[vertex_index]:vf.indptr[vertex_index + 1]])
    if mesh.boundary_vertex[vertex_index]:
        candidates = candidates[mesh.face_boundary[candidates]]
    if candidates.size == 0:
        raise MeshError(f"no admissible face for vertex {vertex_index}")
    return int(candidates[0])


def support_region(mesh: SimplicialMesh, cell_index: int) -> set[int]:
    """Cells whose closure meets the closure of the given cell (itself included)."""
    vc = mesh.vertex_cells
    touched = vc[mesh.cells[cell_index]].indices
    return {int(c) for c in touched}


def write_mesh(mesh: SimplicialMesh, path) -> None:
    lines = [f"{mesh.dim} {mesh.n_vertices} {mesh.n_cells}"]
    lines += [" ".join(repr(float(x)) for x in row) for row in mesh.vertices]
    lines += [" ".join(str(int(v)) for v in row) for row in mesh.cells]
    lines.append("".join("1" if b else "0" for b in mesh.boundary_vertex))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mesh(path) -> SimplicialMesh:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    try:
        dim, nv, nc = (int(t) for t in lines[0].split())
        vertices = np.array([[float(t) for t in ln.split()] for ln in lines[1:1 + nv]])
        cells = np.array([[int(t) for t in ln.split()] for ln in lines[1 + nv:1 + nv + nc]])
        mask = lines[1 + nv + nc].strip()
    except (ValueError, IndexError) as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    measure = float(np.abs(signed_measures(vertices, cells)).sum())
    mesh = _assemble(dim, vertices, cells, measure)
    stored = np.array([ch == "1" for ch in mask])
    if stored.shape != mesh.boundary_vertex.shape or np.any(stored != mesh.boundary_vertex):
        raise MeshError("boundary mask does not match mesh topology")
    return mesh
