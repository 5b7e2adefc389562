import math

import numpy as np
import pytest

from chemofv.mesh import (
    DiscreteField,
    MeshError,
    approximate_gradient,
    build_from_triangulation,
    build_uniform_1d,
    check_admissibility,
    discrete_seminorm,
    dump_mesh,
    lebesgue_norm,
    mean_value,
    project_cell_averages,
)
from conftest import build_1d_from_breakpoints, equilateral_mesh, hexagon_mesh


def quartic(x):
    return 15.0 * x ** 2 * (1.0 - x) ** 2


class TestBuildUniform1d:
    def test_cells_and_tau(self):
        m = build_uniform_1d(0, 1, 50)
        assert np.allclose(m.cell_volumes, 0.02)
        assert np.allclose(m.int_tau, 50.0)
        assert m.domain_measure == pytest.approx(1.0, rel=1e-15)

    def test_centers(self):
        m = build_uniform_1d(-1, 1, 4)
        assert np.allclose(m.cell_centers.ravel(), [-0.75, -0.25, 0.25, 0.75])

    def test_reference_resolution(self):
        m = build_uniform_1d(0, 1, 3200)
        assert m.size == pytest.approx(1 / 3200)
        assert m.n_cells == 3200

    def test_errors(self):
        with pytest.raises(MeshError):
            build_uniform_1d(0, 1, 1)
        with pytest.raises(MeshError):
            build_uniform_1d(1, 0, 4)
        with pytest.raises(MeshError):
            build_uniform_1d(0, math.inf, 4)

    def test_interior_edges_counted_twice(self):
        m = build_uniform_1d(0, 1, 6)
        counts = np.zeros(m.n_edges)
        for k in range(m.n_cells):
            for e in m.cell_edges(k):
                counts[e] += 1
        assert np.all(counts[m.interior_edges] == 2)
        assert np.all(counts[m.boundary_edges] == 1)


class TestBuildFromTriangulation:
    def test_split_square_degenerate(self):
        verts = [[0, 0], [1, 0], [1, 1], [0, 1]]
        with pytest.raises(MeshError, match="degenerate"):
            build_from_triangulation(verts, [[0, 1, 2], [0, 2, 3]])

    def test_single_equilateral(self):
        m = equilateral_mesh()
        assert m.n_cells == 1
        assert len(m.boundary_edges) == 3
        assert m.cell_volumes[0] == pytest.approx(np.sqrt(3) / 4, rel=1e-14)

    def test_zero_area_triangle(self):
        with pytest.raises(MeshError, match="zero-area"):
            build_from_triangulation([[0, 0], [1, 0], [2, 0]], [[0, 1, 2]])

    def test_non_conforming(self):
        verts = [[0, 0], [1, 0], [0.5, 1], [0.5, -1], [0.5, 0.5]]
        tris = [[0, 1, 2], [0, 1, 3], [0, 1, 4]]
        with pytest.raises(MeshError, match="non-conforming"):
            build_from_triangulation(verts, tris)

    def test_orthogonality_and_tau(self):
        m = hexagon_mesh()
        for e in m.interior_edges:
            k, ell = m.edge_cells[e]
            dvec = m.cell_centers[ell] - m.cell_centers[k]
            assert abs(np.dot(dvec, m.edge_normal[e])) == pytest.approx(
                np.linalg.norm(dvec), rel=1e-12
            )
        assert np.allclose(m.edge_tau, m.edge_measure / m.edge_distance)

    def test_diamonds_partition_domain(self):
        for m in (hexagon_mesh(), equilateral_mesh(), build_uniform_1d(0, 2, 5)):
            assert m.diamond_volume.sum() == pytest.approx(m.domain_measure, rel=1e-12)

    def test_cell_volumes_sum_to_domain_measure(self):
        m = hexagon_mesh()
        assert m.cell_volumes.sum() == pytest.approx(6 * np.sqrt(3) / 4, rel=1e-12)


class TestAdmissibility:
    def test_uniform_interior_ratio_half(self):
        m = build_uniform_1d(0, 1, 10)
        rep = check_admissibility(m, 0.5)
        assert rep.ok
        assert rep.worst_ratio == pytest.approx(0.5, rel=1e-14)

    def test_equilateral_ratio_half(self):
        # circumcenter-to-edge distance over center distance is exactly 1/2
        m = hexagon_mesh()
        rep = check_admissibility(m, 0.4)
        assert rep.ok
        assert rep.worst_ratio == pytest.approx(0.5, rel=1e-12)

    def test_obtuse_triangle_fails(self):
        # obtuse apex pushes the circumcenter outside the triangle
        verts = [[0, 0], [1, 0], [0.5, 0.15]]
        m = build_from_triangulation(verts, [[0, 1, 2]])
        rep = check_admissibility(m, 0.1)
        assert not rep.ok
        assert rep.worst_ratio < 0
        assert rep.offending_edges

    def test_zeta_domain(self):
        m = build_uniform_1d(0, 1, 4)
        with pytest.raises(ValueError):
            check_admissibility(m, 0.0)
        with pytest.raises(ValueError):
            check_admissibility(m, 1.5)


class TestProjection:
    def test_constant(self, small_meshes):
        for m in small_meshes:
            f = (lambda x: np.full_like(x, 3.25)) if m.dim == 1 else (
                lambda x, y: np.full_like(x, 3.25)
            )
            u = project_cell_averages(f, m)
            assert np.allclose(u.values, 3.25, rtol=1e-14)

    def test_quartic_mean(self):
        # integral of 15 x^2 (1-x)^2 over [0,1] is exactly 1/2
        for n in (7, 50, 128):
            m = build_uniform_1d(0, 1, n)
            u = project_cell_averages(quartic, m)
            assert mean_value(u) == pytest.approx(0.5, rel=1e-13)

    def test_linear_exact(self):
        m = build_uniform_1d(0, 1, 9)
        u = project_cell_averages(lambda x: x, m)
        assert np.allclose(u.values, m.cell_centers[:, 0], rtol=1e-14)

    def test_quartic_monomial_2d(self):
        # mean of x^2 y^2 over the unit equilateral triangle is exactly 1/30
        m = equilateral_mesh()
        u = project_cell_averages(lambda x, y: x ** 2 * y ** 2, m, quadrature_order=4)
        assert u.values[0] == pytest.approx(1 / 30, rel=1e-13)

    def test_jensen_contraction(self, rng):
        # projection contracts the L2 norm; reference by fine quadrature
        m = build_uniform_1d(0, 1, 13)
        for _ in range(5):
            a, b, c = rng.uniform(-2, 2, 3)
            f = lambda x: a + b * np.sin(2 * np.pi * x) + c * x ** 3
            u = project_cell_averages(f, m, quadrature_order=5)
            xs = np.linspace(0, 1, 20001)
            ref_l2 = np.sqrt(np.trapezoid(f(xs) ** 2, xs))
            assert lebesgue_norm(u, 2) <= ref_l2 + 1e-12

    @pytest.mark.filterwarnings("ignore:invalid value encountered")
    def test_nonfinite_sample(self):
        m = build_uniform_1d(0, 1, 4)
        with pytest.raises(ValueError, match="non-finite"):
            project_cell_averages(lambda x: np.log(x - 0.5), m)


class TestMeansAndNorms:
    def test_mean_constant(self, small_meshes):
        for m in small_meshes:
            assert mean_value(m.constant_field(2.5)) == pytest.approx(2.5, rel=1e-14)

    def test_mean_two_cells(self):
        m = build_uniform_1d(0, 1, 2)
        assert mean_value(m.field([1.0, 3.0])) == pytest.approx(2.0, rel=1e-15)

    def test_seminorm_constant_zero(self, small_meshes):
        for m in small_meshes:
            assert discrete_seminorm(m.constant_field(4.0), 2) == 0.0

    def test_seminorm_single_edge(self):
        # two unit-width cells: one interior edge with tau = 1
        m = build_uniform_1d(0, 2, 2)
        w = m.field([0.0, 1.0])
        assert discrete_seminorm(w, 2) == pytest.approx(1.0, rel=1e-14)

    def test_seminorm_linear_closed_form(self):
        # slope s on a uniform grid: |w|^2 = s^2 (b-a) (n-1)/n
        slope = 1.7
        for n in (4, 32, 256):
            m = build_uniform_1d(0, 1, n)
            w = m.field(slope * m.cell_centers[:, 0])
            expected = slope * math.sqrt((n - 1) / n)
            assert discrete_seminorm(w, 2) == pytest.approx(expected, rel=1e-12)

    def test_lebesgue_norms(self):
        m = build_uniform_1d(0, 1, 2)
        w = m.field([3.0, -4.0])
        assert lebesgue_norm(w, 2) == pytest.approx(math.sqrt(12.5), rel=1e-14)
        assert lebesgue_norm(w, np.inf) == 4.0
        with pytest.raises(ValueError):
            lebesgue_norm(w, 0.5)


class TestGradient:
    def test_constant_zero(self, small_meshes):
        for m in small_meshes:
            assert np.all(approximate_gradient(m.constant_field(1.0)) == 0)

    def test_linear_1d_slope(self):
        m = build_uniform_1d(0, 1, 8)
        w = m.field(3.0 * m.cell_centers[:, 0])
        grad = approximate_gradient(w)
        assert np.allclose(grad[m.interior_edges, 0], 3.0, rtol=1e-12)
        assert np.all(grad[m.boundary_edges] == 0)

    def test_l2_identity(self, small_meshes, rng):
        # sum over diamonds of m(T)|grad|^2 equals dim * sum tau (D w)^2
        for m in small_meshes:
            w = m.field(rng.standard_normal(m.n_cells))
            grad = approximate_gradient(w)
            lhs = float(np.sum(m.diamond_volume * (grad ** 2).sum(axis=1)))
            rhs = m.dim * discrete_seminorm(w, 2) ** 2
            assert lhs == pytest.approx(rhs, rel=1e-12)


class TestDiscreteIntegrationByParts:
    def test_identity(self, small_meshes, rng):
        # sum_K a_K sum_sigma tau D_{K,sigma} z == -sum_int tau (Da)(Dz)
        for m in small_meshes:
            for _ in range(3):
                a = rng.standard_normal(m.n_cells)
                z = rng.standard_normal(m.n_cells)
                da = a[m.int_L] - a[m.int_K]
                dz = z[m.int_L] - z[m.int_K]
                lhs = 0.0
                for k in range(m.n_cells):
                    acc = 0.0
                    for e in m.cell_edges(k):
                        kk, ll = m.edge_cells[e]
                        if ll < 0:
                            continue
                        other = ll if kk == k else kk
                        acc += m.edge_tau[e] * (z[other] - z[k])
                    lhs += a[k] * acc
                rhs = -float(np.sum(m.int_tau * da * dz))
                scale = max(abs(lhs), abs(rhs), 1.0)
                assert abs(lhs - rhs) <= 1e-12 * scale


class TestFieldSafety:
    def test_mesh_mismatch(self):
        m1 = build_uniform_1d(0, 1, 4)
        m2 = build_uniform_1d(0, 1, 4)
        with pytest.raises(ValueError, match="different meshes"):
            _ = m1.constant_field(1.0) + m2.constant_field(1.0)

    def test_nonfinite_rejected(self):
        m = build_uniform_1d(0, 1, 4)
        with pytest.raises(ValueError, match="non-finite"):
            DiscreteField([1.0, np.nan, 1.0, 1.0], m)

    def test_length_mismatch(self):
        m = build_uniform_1d(0, 1, 4)
        with pytest.raises(ValueError, match="length"):
            DiscreteField([1.0, 2.0], m)


def test_dump_golden(tmp_path):
    m = build_uniform_1d(0.0, 1.0, 2)
    path = tmp_path / "mesh.txt"
    dump_mesh(m, path)
    expected = (
        "dim 1\n"
        "cells 2\n"
        "0 0.5 0.25\n"
        "1 0.5 0.75\n"
        "edges 3\n"
        "0 0 1 1.0 0.5 2.0\n"
        "1 0 -1 1.0 0.25 4.0\n"
        "2 1 -1 1.0 0.25 4.0\n"
    )
    assert path.read_text() == expected


def test_nonuniform_1d_helper_consistency():
    m = build_1d_from_breakpoints([0.0, 0.3, 0.7, 1.0])
    assert m.domain_measure == pytest.approx(1.0, rel=1e-15)
    assert m.n_cells == 3
    assert np.allclose(m.edge_tau, m.edge_measure / m.edge_distance)
