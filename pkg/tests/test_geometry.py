"""Tests for shape invariants, distances and ray widths."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from fluxgap.core.errors import ContractError, NoInnerBoundaryError, UnsupportedShapeError
from fluxgap.models import ConvexShape, PlanarDomain, disk, pole, polygon, rectangle
from fluxgap.services import geometry

from tests.helpers import omega


def test_disk_invariants():
    d = disk((0.0, 0.0), 1.0)
    assert geometry.area(d) == pytest.approx(math.pi)
    assert geometry.perimeter(d) == pytest.approx(2 * math.pi)
    assert geometry.diameter(d) == pytest.approx(2.0)


def test_rectangle_invariants():
    r = rectangle(-4, 0, 4, 4)
    assert geometry.area(r) == pytest.approx(32.0)
    assert geometry.perimeter(r) == pytest.approx(24.0)
    assert geometry.diameter(r) == pytest.approx(4 * math.sqrt(5))


def test_rounded_shape_uses_steiner_terms():
    """Area P r + pi r^2 and perimeter 2 pi r are added to the core polygon."""
    shape = ConvexShape.model_validate({"rounded": {"core": [[0, 0], [1, 0], [1, 1], [0, 1]], "r": 0.2}})
    assert geometry.area(shape) == pytest.approx(1.0 + 4 * 0.2 + math.pi * 0.04)
    assert geometry.perimeter(shape) == pytest.approx(4.0 + 2 * math.pi * 0.2)
    assert geometry.diameter(shape) == pytest.approx(math.sqrt(2) + 0.4)


def test_point_has_no_area():
    with pytest.raises(UnsupportedShapeError):
        geometry.area(pole((0.0, 0.0)))


def test_clockwise_polygon_is_reoriented():
    shape = polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert geometry.area(shape) == pytest.approx(1.0)


def test_collinear_vertex_is_merged():
    shape = polygon([(0, 0), (0.5, 0), (1, 0), (1, 1), (0, 1)])
    assert len(shape.vertices) == 4


def test_nonconvex_polygon_rejected():
    with pytest.raises(ValidationError):
        polygon([(0, 0), (2, 0), (1, 0.5), (2, 2), (0, 2)])


def test_hole_touching_outer_rejected():
    with pytest.raises(ValidationError):
        PlanarDomain(outer=rectangle(0, 0, 4, 4), holes=(rectangle(0, 1, 1, 2),))


def test_overlapping_holes_rejected():
    with pytest.raises(ValidationError):
        PlanarDomain(outer=disk((0.0, 0.0), 5.0), holes=(disk((-0.5, 0.0), 1.0), disk((0.5, 0.0), 1.0)))


def test_point_hole_needs_pole_radius():
    with pytest.raises(ValidationError):
        PlanarDomain(outer=disk((0.0, 0.0), 1.0), holes=(pole((0.0, 0.0)),))


def test_domain_from_compact_json():
    domain = PlanarDomain.model_validate(
        {
            "outer": {"polygon": [[-4, 0], [4, 0], [4, 4], [-4, 4]]},
            "holes": [{"disk": {"center": [0, 2], "r": 1}}, {"point": [3, 3]}],
            "pole_radius": 0.1,
        }
    )
    assert domain.has_poles
    realized = domain.realized_holes()
    assert realized[1].kind == "disk"
    assert realized[1].radius == pytest.approx(0.1)


def test_distance_outside_disk():
    result = geometry.distance_to_shape((3.0, 0.0), disk((0.0, 0.0), 1.0))
    assert result.distance == pytest.approx(2.0)
    np.testing.assert_allclose(result.gradient, (1.0, 0.0), atol=1e-12)
    assert not result.inside


def test_distance_inside_square_is_negative():
    result = geometry.distance_to_shape((0.5, 0.0), rectangle(-1, -1, 1, 1))
    assert result.distance == pytest.approx(-0.5)
    assert result.inside


def test_distance_at_vertex_is_degenerate():
    result = geometry.distance_to_shape((1.0, 1.0), rectangle(-1, -1, 1, 1))
    assert result.distance == 0.0
    assert result.degenerate


def test_normal_cone_of_square_corner():
    cone = geometry.normal_cone(rectangle(-1, -1, 1, 1), 2)
    assert cone.vertex == (1.0, 1.0)
    assert cone.angle == pytest.approx(math.pi / 2)


def test_flux_distance():
    assert geometry.flux_distance(0.25) == pytest.approx(0.25)
    assert geometry.flux_distance(0.75) == pytest.approx(0.25)
    assert geometry.flux_distance(1.5) == pytest.approx(0.5)
    assert geometry.flux_distance(-0.25) == pytest.approx(0.25)
    assert geometry.flux_distance(3.0) == 0.0


def test_flux_distance_rejects_nan():
    with pytest.raises(ContractError):
        geometry.flux_distance(float("nan"))


def test_concentric_annulus_widths(annulus):
    report = geometry.widths(annulus)
    assert report.beta == pytest.approx(1.0, abs=1e-9)
    assert report.B == pytest.approx(1.0, abs=1e-9)
    assert report.beta_tilde == pytest.approx(1.0)


def test_square_frame_widths(square_frame):
    """The corner fan reaches the outer corner; the per-point minimum stays at 1."""
    report = geometry.widths(square_frame)
    assert report.beta == pytest.approx(1.0, abs=1e-9)
    assert report.B == pytest.approx(math.sqrt(2), rel=1e-9)
    assert report.B_literal == pytest.approx(1.0, abs=1e-9)
    assert report.beta_lo <= report.beta
    assert report.B_hi >= report.B


def test_thin_gap_widths():
    report = geometry.widths(omega(0.1))
    assert report.beta == pytest.approx(0.1, rel=1e-9)
    assert report.B == pytest.approx(math.sqrt(5), rel=1e-9)
    assert report.B_literal == pytest.approx(2.0, rel=1e-9)
    assert report.beta_tilde == pytest.approx(0.1)


def test_widths_need_a_hole():
    with pytest.raises(NoInnerBoundaryError):
        geometry.widths(PlanarDomain(outer=disk((0.0, 0.0), 1.0)))


def test_widths_need_enough_samples(annulus):
    with pytest.raises(ContractError):
        geometry.widths(annulus, n_boundary_samples=16)


def test_injectivity_radius():
    assert geometry.injectivity_radius(disk((0.0, 0.0), 1.0)) == pytest.approx(1.0)
    assert geometry.injectivity_radius(rectangle(0, 0, 1, 1)) == 0.0
    rounded = ConvexShape.model_validate({"rounded": {"core": [[0, 0], [1, 0], [1, 1], [0, 1]], "r": 0.2}})
    assert geometry.injectivity_radius(rounded) == pytest.approx(0.2, abs=1e-2)


def test_geometry_report(annulus):
    report = geometry.geometry_report(annulus)
    assert report.area == pytest.approx(4 * math.pi)
    assert report.boundary_length == pytest.approx(6 * math.pi)
    assert report.widths is not None


def test_transformed_domain_keeps_widths(square_frame):
    moved = square_frame.transformed(angle=0.3, shift=(5.0, -2.0))
    assert geometry.widths(moved).B == pytest.approx(math.sqrt(2), rel=1e-6)


def test_scaling_scales_widths(square_frame):
    scaled = square_frame.transformed(scale=2.0)
    report = geometry.widths(scaled)
    assert report.beta == pytest.approx(2.0, rel=1e-9)
    assert report.B == pytest.approx(2 * math.sqrt(2), rel=1e-9)
