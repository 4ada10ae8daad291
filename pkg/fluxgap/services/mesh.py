"""Conforming triangulations: polar annuli, rectangle differences, boundary-fitted and staircase meshes."""

import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import shapely
from scipy.spatial import Delaunay
from shapely.geometry import Polygon
from shapely.geometry.polygon import orient

from fluxgap.config import get_settings
from fluxgap.core.errors import (
    ContractError,
    MeshFormatError,
    MeshResolutionError,
    MeshValidationError,
)
from fluxgap.models import OUTER_TAG, ConvexShape, MeshQuality, PlanarDomain, TriMesh, rectangle
from fluxgap.services import geometry
from fluxgap.utils.logging import get_logger

logger = get_logger(__name__)

Rect = tuple[float, float, float, float]


# --- Topology helpers ---


def _all_edges(triangles: np.ndarray) -> np.ndarray:
    return np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])


def boundary_edges(triangles: np.ndarray) -> np.ndarray:
    """Edges used by exactly one triangle, oriented as in that triangle."""
    e = _all_edges(triangles)
    key = np.sort(e, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return e[counts[inverse.reshape(-1)] == 1]


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def euler_characteristic(mesh: TriMesh) -> int:
    n_edges = len(np.unique(np.sort(_all_edges(mesh.triangles), axis=1), axis=0))
    used = len(np.unique(mesh.triangles))
    return used - n_edges + mesh.n_triangles


def _compact(vertices: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop vertices not referenced by any triangle."""
    used, inverse = np.unique(triangles, return_inverse=True)
    return vertices[used], inverse.reshape(triangles.shape)


def _orient_ccw(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    flip = signed_areas(vertices, triangles) < 0
    triangles = triangles.copy()
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


def _tag_by_components(vertices: np.ndarray, edges: np.ndarray, components: Sequence) -> np.ndarray:
    """Tag each edge by the nearest boundary component; components[0] is the outer one."""
    mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    pts = shapely.points(mid)
    dist = np.stack([shapely.distance(pts, c) for c in components], axis=1)
    nearest = np.argmin(dist, axis=1)
    return np.where(nearest == 0, OUTER_TAG, nearest - 1)


def _shape_components(outer: ConvexShape, holes: Iterable[ConvexShape]) -> list:
    return [geometry.to_geometry(s).exterior for s in [outer, *holes]]


def _finish(vertices: np.ndarray, triangles: np.ndarray, components: Sequence, mesher: str) -> TriMesh:
    vertices, triangles = _compact(vertices, triangles)
    triangles = _orient_ccw(vertices, triangles)
    edges = boundary_edges(triangles)
    tags = _tag_by_components(vertices, edges, components)
    mesh = TriMesh(vertices=vertices, triangles=triangles, boundary_edges=edges, boundary_tags=tags, mesher=mesher)
    if get_settings().debug_mesh_checks:
        validate_mesh(mesh)
    return mesh


def _grid_triangles(nx: int, ny: int, keep: np.ndarray) -> np.ndarray:
    """Split kept cells of an nx-by-ny grid into two triangles, diagonals alternating."""
    i, j = np.nonzero(keep)
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + (nx + 1)
    v11 = v01 + 1
    even = (i + j) % 2 == 0
    t1 = np.where(even[:, None], np.stack([v00, v10, v11], axis=1), np.stack([v00, v10, v01], axis=1))
    t2 = np.where(even[:, None], np.stack([v00, v11, v01], axis=1), np.stack([v10, v11, v01], axis=1))
    return np.concatenate([t1, t2])


# --- Structured meshers ---


def mesh_polar_annulus(
    r1: float, r2: float, nr: int, ntheta: int, center: tuple[float, float] = (0.0, 0.0)
) -> TriMesh:
    """Concentric annulus with (nr+1)*ntheta vertices and 2*nr*ntheta triangles."""
    if not (0 < r1 < r2):
        raise ContractError(f"expected 0 < r1 < r2, got r1={r1}, r2={r2}")
    if nr < 2 or ntheta < 8:
        raise ContractError(f"expected nr >= 2 and ntheta >= 8, got nr={nr}, ntheta={ntheta}")
    radii = np.linspace(r1, r2, nr + 1)
    theta = 2 * math.pi * np.arange(ntheta) / ntheta
    rr, tt = np.meshgrid(radii, theta, indexing="ij")
    vertices = np.stack([center[0] + rr.ravel() * np.cos(tt.ravel()), center[1] + rr.ravel() * np.sin(tt.ravel())], axis=1)

    i, j = np.meshgrid(np.arange(nr), np.arange(ntheta), indexing="ij")
    i, j = i.ravel(), j.ravel()
    v00 = i * ntheta + j
    v01 = i * ntheta + (j + 1) % ntheta
    v10 = v00 + ntheta
    v11 = v01 + ntheta
    even = (i + j) % 2 == 0
    t1 = np.where(even[:, None], np.stack([v00, v10, v11], axis=1), np.stack([v00, v10, v01], axis=1))
    t2 = np.where(even[:, None], np.stack([v00, v11, v01], axis=1), np.stack([v10, v11, v01], axis=1))
    triangles = np.concatenate([t1, t2])

    k = np.arange(ntheta)
    inner = np.stack([(k + 1) % ntheta, k], axis=1)
    outer = np.stack([nr * ntheta + k, nr * ntheta + (k + 1) % ntheta], axis=1)
    mesh = TriMesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=np.concatenate([outer, inner]),
        boundary_tags=np.concatenate([np.full(ntheta, OUTER_TAG), np.zeros(ntheta, dtype=np.int64)]),
        mesher="polar",
    )
    if get_settings().debug_mesh_checks:
        validate_mesh(mesh)
    return mesh


def polar_resolution(r1: float, r2: float, h: float) -> tuple[int, int]:
    """Ring and sector counts giving spacing h radially and at the mid radius."""
    nr = max(2, math.ceil((r2 - r1) / h - 1e-9))
    ntheta = max(8, 4 * math.ceil(math.pi * (r1 + r2) / (4 * h) - 1e-9))
    return nr, ntheta


def _graded_breaks(a: float, b: float, h: float, start_lo: float, start_hi: float, grading: float) -> np.ndarray:
    """Nodes on [a, b] growing geometrically from the end spacings up to h; at least 3 intervals."""
    length = b - a
    if grading <= 1.0 or (start_lo >= h and start_hi >= h):
        m = max(3, math.ceil(length / h - 1e-9))
        return np.linspace(a, b, m + 1)

    def march(start: float) -> list[float]:
        nodes, s = [0.0], min(start, h)
        while nodes[-1] + s < 0.5 * length:
            nodes.append(nodes[-1] + s)
            s = min(h, s * grading)
        return nodes

    lo = march(start_lo)
    hi = march(start_hi)
    nodes = sorted(set(lo) | {length - t for t in hi})
    merged = [nodes[0]]
    floor = 0.5 * min(start_lo, start_hi, h)
    for t in nodes[1:]:
        if t - merged[-1] >= floor:
            merged.append(t)
    merged[-1] = length
    if len(merged) < 4:
        return np.linspace(a, b, 4)
    return a + np.asarray(merged)


def _axis_breaks(breaks: list[float], h: float, grading: float) -> np.ndarray:
    lengths = np.diff(breaks)
    thin = [L / 3.0 if L < 3 * h else h for L in lengths]
    nodes: list[np.ndarray] = []
    for k, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])):
        start_lo = thin[k - 1] if k > 0 else h
        start_hi = thin[k + 1] if k + 1 < len(lengths) else h
        if lengths[k] < 3 * h:
            seg = np.linspace(a, b, 4)
        else:
            seg = _graded_breaks(a, b, h, start_lo, start_hi, grading)
        nodes.append(seg if k == 0 else seg[1:])
    return np.concatenate(nodes)


def mesh_rect_diff(
    outer: Rect,
    inner: Rect,
    target_h: float,
    grading: float = 1.0,
    extra_x: Sequence[float] = (),
    extra_y: Sequence[float] = (),
) -> TriMesh:
    """Boundary-fitted tensor grid on an axis-parallel rectangle minus an inner rectangle.

    Grid lines pass through all inner-rectangle coordinates and the extra lines; every
    interval between consecutive lines carries at least 3 element layers.
    """
    ox0, oy0, ox1, oy1 = outer
    ix0, iy0, ix1, iy1 = inner
    if not (ox0 < ix0 < ix1 < ox1 and oy0 < iy0 < iy1 < oy1):
        raise ContractError("inner rectangle must lie strictly inside the outer rectangle")
    if target_h <= 0:
        raise ContractError("target_h must be positive")

    xb = sorted({ox0, ix0, ix1, ox1, *[x for x in extra_x if ox0 < x < ox1]})
    yb = sorted({oy0, iy0, iy1, oy1, *[y for y in extra_y if oy0 < y < oy1]})
    xs = _axis_breaks(xb, target_h, grading)
    ys = _axis_breaks(yb, target_h, grading)

    nx, ny = len(xs) - 1, len(ys) - 1
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.stack([gx.ravel(), gy.ravel()], axis=1)
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    in_hole = ((cx[:, None] > ix0) & (cx[:, None] < ix1)) & ((cy[None, :] > iy0) & (cy[None, :] < iy1))
    triangles = _grid_triangles(nx, ny, ~in_hole)
    components = _shape_components(rectangle(*outer), [rectangle(*inner)])
    return _finish(vertices, triangles, components, "rect_diff")


# --- General meshers ---


def _ring_points(shape: ConvexShape, h: float) -> np.ndarray:
    """Boundary points of a shape with spacing at most h, polygon corners included."""
    if shape.kind == "polygon":
        v = np.asarray(shape.vertices)
        out = []
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            m = max(1, math.ceil(np.linalg.norm(b - a) / h - 1e-9))
            s = np.arange(m) / m
            out.append(a + s[:, None] * (b - a))
        return np.concatenate(out)
    n = max(8, math.ceil(geometry.perimeter(shape) / h - 1e-9))
    return geometry.boundary_samples(shape, n).points


def _lattice(bounds: tuple[float, float, float, float], h: float) -> np.ndarray:
    x0, y0, x1, y1 = bounds
    dy = h * math.sqrt(3) / 2
    rows = np.arange(y0, y1 + dy, dy)
    pts = []
    for k, y in enumerate(rows):
        xs = np.arange(x0 + (0.5 * h if k % 2 else 0.0), x1 + h, h)
        pts.append(np.stack([xs, np.full(len(xs), y)], axis=1))
    return np.concatenate(pts)


def mesh_fitted(domain: PlanarDomain, h: float, rings: Optional[int] = None) -> TriMesh:
    """Boundary-fitted mesh: Delaunay of boundary samples, a background lattice and polar patches.

    Disk holes and point poles (disks of radius pole_radius) get a polar patch of `rings`
    rings of spacing h/2; their radius must be at least 4h.
    """
    rings = rings or get_settings().polar_rings
    holes = domain.realized_holes()
    points = [_ring_points(domain.outer, h)]
    keep_out: list[tuple[ConvexShape, float]] = []
    for hole in holes:
        if hole.kind == "disk":
            if hole.radius < 4 * h - 1e-12:
                raise MeshResolutionError(f"disk hole of radius {hole.radius} needs h <= {hole.radius / 4}")
            dr = 0.5 * h
            ntheta = 4 * math.ceil(2 * math.pi * (hole.radius + 0.5 * rings * dr) / (4 * h))
            theta = 2 * math.pi * np.arange(ntheta) / ntheta
            for i in range(rings + 1):
                rad = hole.radius + i * dr
                points.append(np.stack([hole.center[0] + rad * np.cos(theta), hole.center[1] + rad * np.sin(theta)], axis=1))
            keep_out.append((hole, rings * dr + 0.5 * h))
        else:
            points.append(_ring_points(hole, h))
            keep_out.append((hole, 0.5 * h))

    outer_geom = geometry.to_geometry(domain.outer)
    background = _lattice(outer_geom.bounds, h)
    mask = geometry.signed_distance(background, domain.outer) < -0.5 * h
    for hole, margin in keep_out:
        mask &= geometry.signed_distance(background, hole) > margin
    points.append(background[mask])

    vertices = np.concatenate(points)
    triangles = Delaunay(vertices).simplices.astype(np.int64)
    centroids = vertices[triangles].mean(axis=1)
    inside = geometry.signed_distance(centroids, domain.outer) < 0
    for hole in holes:
        inside &= geometry.signed_distance(centroids, hole) > 0
    triangles = triangles[inside]
    triangles = triangles[np.abs(signed_areas(vertices, triangles)) > 1e-14 * h * h]

    mesh = _finish(vertices, triangles, _shape_components(domain.outer, holes), "fitted")
    expected = 1 - len(holes)
    if euler_characteristic(mesh) != expected:
        raise MeshValidationError(
            f"fitted mesh has Euler characteristic {euler_characteristic(mesh)}, expected {expected}"
        )
    return mesh


def mesh_region(region: Polygon, h: float, components: Optional[Sequence] = None, mesher: str = "staircase") -> TriMesh:
    """Staircase mesh: grid cells of spacing h lying entirely inside the region."""
    if h <= 0:
        raise ContractError("h must be positive")
    region = orient(region, sign=1.0)
    x0, y0, x1, y1 = region.bounds
    nx = max(1, math.ceil((x1 - x0) / h))
    ny = max(1, math.ceil((y1 - y0) / h))
    xs = x0 + h * np.arange(nx + 1)
    ys = y0 + h * np.arange(ny + 1)
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    boxes = shapely.box(xs[ii], ys[jj], xs[ii + 1], ys[jj + 1])
    shapely.prepare(region)
    keep = shapely.contains(region, boxes)
    if not keep.any():
        raise MeshResolutionError("no grid cell fits inside the region")

    gx, gy = np.meshgrid(xs, ys)
    vertices = np.stack([gx.ravel(), gy.ravel()], axis=1)
    triangles = _grid_triangles(nx, ny, keep)
    if components is None:
        components = [region.exterior, *region.interiors]
    mesh = _finish(vertices, triangles, components, mesher)
    expected = 2 - len(components)
    if euler_characteristic(mesh) != expected:
        raise MeshResolutionError(
            f"staircase mesh does not resolve the region topology (Euler characteristic "
            f"{euler_characteristic(mesh)}, expected {expected})"
        )
    return mesh


def mesh_staircase(domain: PlanarDomain, h: float) -> TriMesh:
    """Uniform staircase mesh of a planar domain; requires h < beta_tilde / 4."""
    gap = geometry.beta_tilde(domain) if domain.holes else math.inf
    if not h < gap / 4:
        raise MeshResolutionError(f"h={h} does not resolve the domain: need h < {gap / 4}")
    holes = domain.realized_holes()
    return mesh_region(
        geometry.domain_geometry(domain),
        h,
        components=_shape_components(domain.outer, holes),
    )


# --- Validation and quality ---


def validate_mesh(mesh: TriMesh) -> None:
    """Check index ranges, orientation, conformity and boundary tagging."""
    if mesh.n_triangles == 0:
        raise MeshValidationError("mesh has no triangles")
    if mesh.triangles.min() < 0 or mesh.triangles.max() >= mesh.n_vertices:
        raise MeshValidationError("triangle references a missing vertex")
    areas = signed_areas(mesh.vertices, mesh.triangles)
    if np.any(areas <= 0):
        raise MeshValidationError(f"inverted triangle {int(np.flatnonzero(areas <= 0)[0])}")

    key = np.sort(_all_edges(mesh.triangles), axis=1)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshValidationError("non-conforming mesh: an edge is shared by more than two triangles")

    free = {tuple(e) for e in uniq[counts == 1].tolist()}
    tagged = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    if free - tagged:
        raise MeshValidationError(f"{len(free - tagged)} boundary edges are untagged")
    if tagged - free:
        raise MeshValidationError(f"{len(tagged - free)} tagged edges are not on the boundary")


def mesh_area(mesh: TriMesh) -> float:
    return float(signed_areas(mesh.vertices, mesh.triangles).sum())


def quality(mesh: TriMesh) -> MeshQuality:
    """Minimum angle, size, tag completeness and Euler characteristic."""
    p = mesh.vertices[mesh.triangles]
    angles = []
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        cos = (u * v).sum(axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
    free = boundary_edges(mesh.triangles)
    tagged = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    untagged = sum(1 for e in np.sort(free, axis=1).tolist() if tuple(e) not in tagged)
    return MeshQuality(
        min_angle_deg=float(np.min(angles)),
        h=mesh.h,
        n_vertices=mesh.n_vertices,
        n_triangles=mesh.n_triangles,
        n_boundary_edges=len(free),
        untagged_edges=untagged,
        euler_characteristic=euler_characteristic(mesh),
        area=mesh_area(mesh),
    )


# --- Text format ---


def _format_tag(tag: int) -> str:
    return TriMesh.tag_name(int(tag))


def _parse_tag(token: str, lineno: int) -> int:
    if token == "outer":
        return OUTER_TAG
    if token.startswith("hole:"):
        try:
            j = int(token[5:])
        except ValueError:
            j = -1
        if j >= 0:
            return j
    raise MeshFormatError(f"line {lineno}: bad boundary tag {token!r}")


def format_mesh(mesh: TriMesh) -> str:
    lines = ["# fluxgap mesh", f"mesher {mesh.mesher}", f"vertices {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"boundary {len(mesh.boundary_edges)}")
    lines += [f"{a} {b} {_format_tag(t)}" for (a, b), t in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist())]
    return "\n".join(lines) + "\n"


def export_mesh(mesh: TriMesh, path: str | Path) -> None:
    Path(path).write_text(format_mesh(mesh), encoding="utf-8")


def parse_mesh(text: str) -> TriMesh:
    """Parse the line-based mesh format and validate the result."""
    rows = [
        (lineno, line.split())
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    pos = 0
    mesher = "imported"

    def section(name: str) -> int:
        nonlocal pos
        if pos >= len(rows):
            raise MeshFormatError(f"unexpected end of file, expected '{name} <count>'")
        lineno, tokens = rows[pos]
        if len(tokens) != 2 or tokens[0] != name:
            raise MeshFormatError(f"line {lineno}: expected '{name} <count>'")
        try:
            count = int(tokens[1])
        except ValueError as e:
            raise MeshFormatError(f"line {lineno}: bad count {tokens[1]!r}") from e
        pos += 1
        if pos + count > len(rows):
            raise MeshFormatError(f"line {lineno}: section '{name}' is truncated")
        return count

    def take(count: int, width: int, kind: type) -> list[list]:
        nonlocal pos
        out = []
        for lineno, tokens in rows[pos : pos + count]:
            if len(tokens) != width:
                raise MeshFormatError(f"line {lineno}: expected {width} fields, got {len(tokens)}")
            try:
                out.append([kind(t) for t in tokens] if kind is not str else tokens)
            except ValueError as e:
                raise MeshFormatError(f"line {lineno}: {e}") from e
        pos += count
        return out

    if rows and rows[0][1][:1] == ["mesher"]:
        mesher = rows[0][1][1] if len(rows[0][1]) > 1 else mesher
        pos = 1
    vertices = take(section("vertices"), 2, float)
    triangles = take(section("triangles"), 3, int)
    boundary_start = pos
    raw_boundary = take(section("boundary"), 3, str)
    if pos != len(rows):
        raise MeshFormatError(f"line {rows[pos][0]}: trailing content")

    edges, tags = [], []
    for (lineno, _), (a, b, t) in zip(rows[boundary_start + 1 :], raw_boundary):
        try:
            edges.append([int(a), int(b)])
        except ValueError as e:
            raise MeshFormatError(f"line {lineno}: {e}") from e
        tags.append(_parse_tag(t, lineno))

    mesh = TriMesh(
        vertices=np.asarray(vertices, dtype=float).reshape(-1, 2),
        triangles=np.asarray(triangles, dtype=np.int64).reshape(-1, 3),
        boundary_edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        boundary_tags=np.asarray(tags, dtype=np.int64),
        mesher=mesher,
    )
    validate_mesh(mesh)
    return mesh


def import_mesh(path: str | Path) -> TriMesh:
    return parse_mesh(Path(path).read_text(encoding="utf-8"))
