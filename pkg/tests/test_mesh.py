"""Tests for the meshers, mesh validation and the mesh text format."""

import math

import numpy as np
import pytest

from fluxgap.core.errors import ContractError, MeshFormatError, MeshResolutionError, MeshValidationError
from fluxgap.models import OUTER_TAG, TriMesh
from fluxgap.services import mesh

from tests.helpers import omega


def test_polar_annulus_counts():
    m = mesh.mesh_polar_annulus(1.0, 2.0, 4, 32)
    assert m.n_vertices == 5 * 32
    assert m.n_triangles == 2 * 4 * 32
    assert mesh.euler_characteristic(m) == 0
    assert int(np.sum(m.boundary_tags == OUTER_TAG)) == 32
    assert int(np.sum(m.boundary_tags == 0)) == 32


def test_polar_annulus_area_matches_inscribed_polygons():
    m = mesh.mesh_polar_annulus(1.0, 2.0, 4, 32)
    expected = 0.5 * 32 * math.sin(2 * math.pi / 32) * (4.0 - 1.0)
    assert mesh.mesh_area(m) == pytest.approx(expected, rel=1e-12)


def test_polar_annulus_contract():
    with pytest.raises(ContractError):
        mesh.mesh_polar_annulus(2.0, 1.0, 4, 32)
    with pytest.raises(ContractError):
        mesh.mesh_polar_annulus(1.0, 2.0, 4, 4)


def test_polar_resolution():
    assert mesh.polar_resolution(1.0, 2.0, 0.25) == (4, 40)


def test_rect_diff_resolves_a_thin_gap():
    m = mesh.mesh_rect_diff((-4, 0, 4, 4), (-3, 0.1, 3, 2), 0.5, extra_x=(-2, -1, 1, 2))
    assert mesh.mesh_area(m) == pytest.approx(32.0 - 6 * 1.9)
    assert mesh.euler_characteristic(m) == 0
    # three element layers across the gap
    ys = np.unique(m.vertices[:, 1])
    assert int(np.sum((ys > 0) & (ys < 0.1))) == 2
    assert np.any(np.isclose(m.vertices[:, 0], 1.0))


def test_rect_diff_grading_keeps_the_area():
    m = mesh.mesh_rect_diff((-4, 0, 4, 4), (-3, 0.05, 3, 2), 0.5, grading=1.5)
    assert mesh.mesh_area(m) == pytest.approx(32.0 - 6 * 1.95)
    assert mesh.quality(m).tags_complete


def test_rect_diff_needs_a_strictly_inner_rectangle():
    with pytest.raises(ContractError):
        mesh.mesh_rect_diff((0, 0, 1, 1), (0, 0.2, 0.5, 0.5), 0.1)


def test_fitted_annulus(annulus):
    m = mesh.mesh_fitted(annulus, 0.2)
    assert m.mesher == "fitted"
    assert mesh.euler_characteristic(m) == 0
    assert mesh.mesh_area(m) == pytest.approx(3 * math.pi, rel=2e-2)
    assert mesh.quality(m).tags_complete


def test_fitted_mesh_needs_small_h_around_disks(annulus):
    with pytest.raises(MeshResolutionError):
        mesh.mesh_fitted(annulus, 0.5)


def test_staircase_frame(square_frame):
    m = mesh.mesh_staircase(square_frame, 0.2)
    assert m.mesher == "staircase"
    assert mesh.euler_characteristic(m) == 0
    assert 10.0 <= mesh.mesh_area(m) <= 12.0 + 1e-9


def test_staircase_rejects_coarse_h():
    with pytest.raises(MeshResolutionError):
        mesh.mesh_staircase(omega(0.1), 0.05)


def test_quality_report():
    q = mesh.quality(mesh.mesh_polar_annulus(1.0, 2.0, 4, 32))
    assert q.n_triangles == 256
    assert q.untagged_edges == 0
    assert 0 < q.min_angle_deg < 90


def test_inverted_triangle_rejected():
    bad = TriMesh(
        vertices=[[0, 0], [0, 1], [1, 0]],
        triangles=[[0, 1, 2]],
        boundary_edges=[[0, 1], [1, 2], [2, 0]],
        boundary_tags=[-1, -1, -1],
    )
    with pytest.raises(MeshValidationError, match="inverted"):
        mesh.validate_mesh(bad)


def test_untagged_boundary_rejected():
    bare = TriMesh(vertices=[[0, 0], [1, 0], [0, 1]], triangles=[[0, 1, 2]])
    with pytest.raises(MeshValidationError, match="untagged"):
        mesh.validate_mesh(bare)


def test_mesh_text_round_trip(tmp_path):
    m = mesh.mesh_polar_annulus(1.0, 2.0, 2, 8)
    path = tmp_path / "annulus.mesh"
    mesh.export_mesh(m, path)
    back = mesh.import_mesh(path)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.triangles, m.triangles)
    np.testing.assert_array_equal(back.boundary_tags, m.boundary_tags)
    assert back.mesher == "polar"


def test_bad_tag_reports_line():
    text = "vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\nboundary 3\n0 1 outer\n1 2 rim\n2 0 outer\n"
    with pytest.raises(MeshFormatError, match="line 9"):
        mesh.parse_mesh(text)


def test_truncated_section_reported():
    with pytest.raises(MeshFormatError, match="truncated"):
        mesh.parse_mesh("vertices 3\n0 0\n1 0\n")
