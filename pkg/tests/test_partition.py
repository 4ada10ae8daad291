"""Tests for annuli partitions, wedges, equidistant curves and cells."""

import math

import numpy as np
import pytest
from shapely import affinity

from fluxgap.core.errors import ContractError, PartitionError
from fluxgap.models import ClosedPotential, PlanarDomain, Pole, disk, pole, polygon, rectangle
from fluxgap.services import geometry, partition


@pytest.fixture
def two_disks() -> PlanarDomain:
    return PlanarDomain(outer=rectangle(-4, -2, 4, 2), holes=(disk((-2.0, 0.0), 0.5), disk((2.0, 0.0), 0.5)))


def test_annulus_is_a_single_piece(annulus):
    pieces = partition.annuli_partition(annulus)
    assert len(pieces) == 1
    assert pieces[0].region.area == pytest.approx(geometry.domain_geometry(annulus).area, rel=1e-9)


def test_square_frame_pieces(square_frame):
    pieces = partition.annuli_partition(square_frame)
    assert [p.index for p in pieces] == [1, 2]
    union = pieces[0].region.union(pieces[1].region)
    assert union.area == pytest.approx(12.0, rel=1e-9)
    assert all(p.widths is not None for p in pieces)
    assert pieces[0].widths.B == pytest.approx(1.0, rel=1e-2)


def test_piece_membership(square_frame):
    pieces = partition.annuli_partition(square_frame)
    pts = np.array([[1.5, 0.0], [1.9, 1.9], [0.0, 1.2]])
    first = partition.piece_contains(square_frame, pieces[0], len(pieces), pts)
    assert first.tolist() == [True, False, True]
    assert partition.piece_contains(square_frame, pieces[1], len(pieces), pts).all()


def test_partition_needs_one_hole(two_disks):
    with pytest.raises(ContractError):
        partition.annuli_partition(two_disks)


def test_hole_corner_wedges(square_frame):
    pieces = partition.annuli_partition(square_frame)
    wedges = partition.wedge_report(square_frame, pieces[0])
    assert len(wedges) == 4
    assert {w.kind for w in wedges} == {0}
    assert all(w.satisfied for w in wedges)
    assert all(w.cone_angle == pytest.approx(np.pi / 2) for w in wedges)


def test_equal_disks_are_split_by_the_bisector(two_disks):
    a, b = two_disks.holes
    curve = partition.equidistant_curve(a, b, (-4.0, -2.0, 4.0, 2.0), 0.05)
    assert curve.max_residual < 1e-8
    assert curve.line_residual < 1e-8
    np.testing.assert_allclose(curve.points[:, 0], 0.0, atol=1e-8)


def test_unequal_disks_give_a_curved_set():
    a, b = disk((-2.0, 0.0), 0.5), disk((2.0, 0.0), 1.0)
    curve = partition.equidistant_curve(a, b, (-4.0, -2.0, 4.0, 2.0), 0.05)
    assert curve.max_residual < 1e-8
    assert curve.line_residual is None


def test_intersecting_shapes_have_no_equidistant_set():
    with pytest.raises(PartitionError):
        partition.equidistant_curve(disk((0.0, 0.0), 1.0), disk((1.0, 0.0), 1.0), (-3, -3, 3, 3), 0.1)


def test_cells_of_two_equal_disks(two_disks):
    found = partition.cells(two_disks)
    assert len(found) == 2
    assert all(c.exact for c in found)
    assert found[0].perimeter == pytest.approx(16.0, rel=1e-9)
    assert found[0].gamma[1] == pytest.approx(4.0, rel=1e-6)
    assert found[1].gamma[0] == pytest.approx(4.0, rel=1e-6)
    assert all(c.star.m > 0.6 for c in found)


def test_star_cosine_of_concentric_annulus(annulus):
    from fluxgap.models import Cell

    region = geometry.domain_geometry(annulus)
    star = partition.star_cosine(Cell(index=0, region=region, perimeter=region.exterior.length, exact=True))
    assert star.m == pytest.approx(1.0, abs=1e-3)
    assert star.beta == pytest.approx(1.0, rel=1e-3)


@pytest.mark.slow
def test_overlapping_partition_inequality(square_frame):
    A = ClosedPotential(poles=(Pole(at=(0.0, 0.0), flux=0.5),))
    pieces = partition.annuli_partition(square_frame)
    check = partition.partition_eigen_check(square_frame, A, [p.region for p in pieces], "overlapping")
    assert check.n == 2
    assert check.holds


@pytest.mark.slow
def test_disjoint_partition_inequality(two_disks):
    A = ClosedPotential(poles=(Pole(at=(-2.0, 0.0), flux=0.5), Pole(at=(2.0, 0.0), flux=0.5)))
    found = partition.cells(two_disks)
    check = partition.partition_eigen_check(two_disks, A, [c.region for c in found], "disjoint", h=0.1)
    assert check.n == 2
    assert check.holds


@pytest.fixture
def triangle_minus_disk() -> PlanarDomain:
    """Triangle of inradius 1.6 around the unit disk; beta = 0.6 and B = 2.2."""
    turn = 0.5 * math.pi + 0.3
    corners = [
        (3.2 * math.cos(turn + 2 * math.pi * j / 3), 3.2 * math.sin(turn + 2 * math.pi * j / 3)) for j in range(3)
    ]
    return PlanarDomain(outer=polygon(corners), holes=(disk((0.0, 0.0), 1.0),))


@pytest.fixture
def three_poles() -> PlanarDomain:
    centers = [(math.cos(a), math.sin(a)) for a in (0.5 * math.pi + 2 * math.pi * j / 3 for j in range(3))]
    return PlanarDomain(outer=disk((0.0, 0.0), 2.0), holes=tuple(pole(c) for c in centers), pole_radius=0.1)


def test_triangle_widths(triangle_minus_disk):
    report = geometry.widths(triangle_minus_disk)
    assert report.beta == pytest.approx(0.6, abs=1e-4)
    assert 2.15 < report.B <= 2.2 + 1e-9


@pytest.mark.parametrize("name", ["square_frame", "triangle_minus_disk"])
def test_pieces_keep_the_width_and_shrink_the_outer_boundary(name, request):
    domain = request.getfixturevalue(name)
    report = geometry.widths(domain)
    pieces = partition.annuli_partition(domain)
    assert len(pieces) == math.ceil(report.B / report.beta - 1e-9)
    assert len(pieces) <= 2 * report.B / report.beta
    outer_perimeter = geometry.perimeter(domain.outer)
    for piece in pieces:
        assert abs(piece.widths.beta - report.beta) <= 1e-3
        assert piece.outer_perimeter <= outer_perimeter * (1 + 1e-9)


@pytest.mark.parametrize(
    "name, kinds", [("square_frame", {0, 2}), ("triangle_minus_disk", {1, 2})]
)
def test_wedge_ratios(name, kinds, request):
    domain = request.getfixturevalue(name)
    floor = {
        1: 1 / math.sqrt(2),
        2: geometry.area(domain.outer) / (4 * geometry.diameter(domain.outer) ** 2),
    }
    seen = set()
    for piece in partition.annuli_partition(domain):
        for w in partition.wedge_report(domain, piece):
            seen.add(w.kind)
            assert w.satisfied
            if w.kind in floor:
                assert w.ratio >= floor[w.kind] - 1e-3
    assert seen == kinds


@pytest.mark.parametrize("name", ["two_disks", "three_poles"])
def test_cell_perimeter_and_star_cosine_bounds(name, request):
    domain = request.getfixturevalue(name)
    holes = domain.realized_holes()
    for cell in partition.cells(domain):
        beta, B = cell.star.beta, cell.star.B
        hole_perimeter = geometry.perimeter(holes[cell.index])
        assert cell.perimeter <= 2 * B / beta * (hole_perimeter + 2 * math.pi * B)
        assert cell.star.m >= beta / (2 * B)


def test_symmetric_poles_give_congruent_cells(three_poles):
    found = partition.cells(three_poles)
    assert len(found) == 3
    assert all(c.exact for c in found)
    area = found[0].region.area
    for j, cell in enumerate(found):
        assert cell.region.area == pytest.approx(area, rel=1e-3)
        turned = affinity.rotate(cell.region, 120, origin=(0, 0))
        assert turned.symmetric_difference(found[(j + 1) % 3].region).area <= 1e-3 * area
        for k, length in cell.gamma.items():
            assert k != j
            assert length == pytest.approx(2.0, rel=1e-3)
        assert len(cell.gamma) == 2
