import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from szdet.mesh import build_box_mesh, refine, support_region
from szdet.szinterp import (ScottZhangOperator, assemble_mass, biorthogonality_defect, dual_basis,
                            l2_error, l2_error_and_rate, l2_norm_sampler, model_field,
                            p1_mass_matrix, p1_sampler)


@pytest.fixture(scope="module")
def op2():
    return ScottZhangOperator(build_box_mesh(2, 1.0, 4))


@pytest.fixture(scope="module")
def op3():
    return ScottZhangOperator(build_box_mesh(3, 1.0, 2))


def _edge_mesh():
    # a mesh whose face 0 is the unit edge from (0,0) to (1,0)
    return build_box_mesh(2, 1.0, 1)


def test_edge_dual_basis_is_4_minus_6s():
    mesh = _edge_mesh()
    f = next(j for j, face in enumerate(mesh.faces)
             if np.allclose(sorted(mesh.vertices[face][:, 1]), [0, 0]))
    basis = dual_basis(mesh, f)
    assert basis.face_measure == pytest.approx(1.0)
    a, b = basis.face_vertices
    s = np.linspace(0, 1, 7)
    # psi_a expanded in (phi_a, phi_b) = (1 - s, s), s measured from vertex a
    psi_a = basis.coefficients[0, 0] * (1 - s) + basis.coefficients[0, 1] * s
    np.testing.assert_allclose(psi_a, 4 - 6 * s, atol=1e-13)


def test_triangle_dual_basis():
    A = 0.37
    inv = np.linalg.inv(p1_mass_matrix(2, A))
    expected = 3 / A * (4 * np.eye(3) - np.ones((3, 3)))
    np.testing.assert_allclose(inv, expected, rtol=1e-13)
    assert expected[0].tolist() == pytest.approx([9 / A, -3 / A, -3 / A])


@pytest.mark.parametrize("dim", [2, 3])
def test_biorthogonality_every_face(dim):
    mesh = build_box_mesh(dim, 1.0, 2)
    for f in range(len(mesh.faces)):
        assert biorthogonality_defect(mesh, dual_basis(mesh, f)) < 1e-12


def test_edge_functional_against_gauss_legendre(op2):
    mesh = op2.mesh

    def u(p):
        return np.exp(p[:, 0]) * np.sin(3 * p[:, 1]) + p[:, 0] ** 5

    x, wq = np.polynomial.legendre.leggauss(10)
    s = 0.5 * (x + 1)
    for i in range(op2.n):
        a, b = mesh.vertices[op2.face_vertices[i]]
        length = np.linalg.norm(b - a)
        pts = a + s[:, None] * (b - a)
        psi = op2.psi[i][0] * (1 - s) + op2.psi[i][1] * s
        oracle = 0.5 * length * np.sum(wq * psi * u(pts))
        assert op2.functional(i, u) == pytest.approx(oracle, abs=1e-10)


def test_linear_reproduction(op2, op3):
    for op, dim in ((op2, 2), (op3, 3)):
        u = model_field("linear", dim)
        coeffs = op.interpolate(u)
        np.testing.assert_allclose(coeffs, u(op.mesh.vertices), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_affine_reproduction_property(c):
    op = ScottZhangOperator(build_box_mesh(2, 1.0, 3))

    def u(p):
        return c[0] + c[1] * p[:, 0] + c[2] * p[:, 1]

    np.testing.assert_allclose(op.interpolate(u), u(op.mesh.vertices), atol=1e-12)


def test_vector_valued_interpolation(op2):
    def u(p):
        return np.stack([p[:, 0], 2 - p[:, 1]], axis=1)

    coeffs = op2.interpolate(u)
    assert coeffs.shape == (op2.n, 2)
    np.testing.assert_allclose(coeffs, u(op2.mesh.vertices), atol=1e-12)


def test_idempotent(op2, op3, rng):
    for op in (op2, op3):
        c = rng.standard_normal(op.n)
        np.testing.assert_allclose(op.interpolate_p1(c), c, atol=1e-12)
        # the same through pointwise evaluation of the P1 function
        np.testing.assert_allclose(op.interpolate(p1_sampler(op.mesh, c)), c, atol=1e-12)


def test_zero_trace_preserved(op3):
    mesh = op3.mesh

    def u(p):
        return np.prod(p * (1 - p), axis=1) * np.exp(p[:, 0])

    coeffs = op3.interpolate(u)
    assert np.abs(coeffs[mesh.boundary_vertex]).max() < 1e-14
    assert np.abs(coeffs[~mesh.boundary_vertex]).max() > 1e-3


def test_locality(op2):
    """I_h u on a cell only sees u on the cells touching it."""
    mesh = op2.mesh
    cell = 0
    region = support_region(mesh, cell)
    region_pts = mesh.vertices[mesh.cells[sorted(region)]].reshape(-1, 2)
    lo, hi = region_pts.min(axis=0), region_pts.max(axis=0)

    def base(p):
        return np.cos(p[:, 0] + 2 * p[:, 1])

    def perturbed(p):
        outside = np.any((p < lo - 1e-12) | (p > hi + 1e-12), axis=1)
        return base(p) + outside * 7.0

    c0 = op2.interpolate(base)[mesh.cells[cell]]
    c1 = op2.interpolate(perturbed)[mesh.cells[cell]]
    np.testing.assert_array_equal(c0, c1)
    # and the perturbation does change vertices far away
    assert not np.allclose(op2.interpolate(base), op2.interpolate(perturbed))


def test_mass_matrix_and_norms(op2, rng):
    mesh = op2.mesh
    M = assemble_mass(mesh)
    assert M.sum() == pytest.approx(1.0, rel=1e-13)
    c = rng.standard_normal(op2.n)
    via_quadrature = l2_norm_sampler(mesh, p1_sampler(mesh, c))
    assert op2.l2_norm(c) == pytest.approx(via_quadrature, rel=1e-12)
    assert l2_error(op2, p1_sampler(mesh, c)) < 1e-12


def test_smooth_rate_in_3d():
    mesh = build_box_mesh(3, 1.0, 2)
    ops = [ScottZhangOperator(mesh), ScottZhangOperator(refine(mesh))]
    ops.append(ScottZhangOperator(refine(ops[1].mesh)))
    table = l2_error_and_rate(ops, model_field("smooth", 3), "smooth")
    assert table.slope == pytest.approx(2.0, abs=0.15)
    assert np.isnan(table.running_slopes[0])


def test_rate_needs_two_levels(op2):
    with pytest.raises(ValueError):
        l2_error_and_rate([op2], model_field("smooth", 2))
    with pytest.raises(ValueError):
        model_field("bumpy", 2)
