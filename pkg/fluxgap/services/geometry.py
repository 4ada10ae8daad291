"""Computational geometry of convex planar shapes: invariants, distances, normal cones, widths."""

import math
from typing import NamedTuple, Optional

import numpy as np
import shapely
from shapely.geometry import LinearRing, Point as ShapelyPoint, Polygon
from shapely.geometry.polygon import orient

from fluxgap.config import get_settings
from fluxgap.core.errors import (
    ContractError,
    DomainError,
    NoInnerBoundaryError,
    RayCastError,
    UnsupportedShapeError,
)
from fluxgap.models import (
    ConvexShape,
    DistanceResult,
    GeometryReport,
    NormalCone,
    PlanarDomain,
    Point,
    WidthReport,
)
from fluxgap.utils.logging import get_logger

logger = get_logger(__name__)

_BISECTION_STEPS = 80
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class BoundarySamples(NamedTuple):
    """Boundary points in traversal order with outward unit normals and arc-length spacing."""

    points: np.ndarray
    normals: np.ndarray
    spacing: np.ndarray


class RayFan(NamedTuple):
    """Rays in boundary order with their lengths inside the domain."""

    origins: np.ndarray
    directions: np.ndarray
    lengths: np.ndarray


class RegionHits(NamedTuple):
    lengths: np.ndarray
    normals: np.ndarray  # outward normal of the region boundary at the hit
    exterior: np.ndarray  # hit lies on the exterior ring


# --- Shape algebra: every shape is a convex core (point or polygon) dilated by a radius ---


def _core(shape: ConvexShape) -> tuple[np.ndarray, float]:
    if shape.kind in ("polygon", "rounded"):
        return np.asarray(shape.vertices, dtype=float), shape.radius if shape.kind == "rounded" else 0.0
    return np.asarray([shape.center], dtype=float), shape.radius if shape.kind == "disk" else 0.0


def edge_normals(vertices: np.ndarray) -> np.ndarray:
    """Outward unit normals of the edges v_i -> v_{i+1} of a CCW polygon."""
    e = np.roll(vertices, -1, axis=0) - vertices
    n = np.stack([e[:, 1], -e[:, 0]], axis=1)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def _segment_projection(points: np.ndarray, vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Distance from points to a closed polygonal ring: (dist, nearest, edge index, edge param)."""
    a = vertices[None, :, :]
    e = (np.roll(vertices, -1, axis=0) - vertices)[None, :, :]
    rel = points[:, None, :] - a
    t = np.clip((rel * e).sum(axis=2) / (e * e).sum(axis=2), 0.0, 1.0)
    q = a + t[:, :, None] * e
    d = np.linalg.norm(points[:, None, :] - q, axis=2)
    idx = np.argmin(d, axis=1)
    rows = np.arange(len(points))
    return d[rows, idx], q[rows, idx], idx, t[rows, idx]


def _halfplane_max(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    normals = edge_normals(vertices)
    return (((points[:, None, :] - vertices[None, :, :]) * normals[None, :, :]).sum(axis=2)).max(axis=1)


def _core_distance(points: np.ndarray, core: np.ndarray) -> np.ndarray:
    if len(core) == 1:
        return np.linalg.norm(points - core[0], axis=1)
    dist, _, _, _ = _segment_projection(points, core)
    m = _halfplane_max(points, core)
    return np.where(m > 0, dist, m)


def signed_distance(points: np.ndarray, shape: ConvexShape) -> np.ndarray:
    """Signed distance to the shape boundary, negative inside."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    core, r = _core(shape)
    return _core_distance(pts, core) - r


def nearest_boundary_point(points: np.ndarray, shape: ConvexShape) -> np.ndarray:
    """Closest point of the shape boundary for each point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    core, r = _core(shape)
    if len(core) == 1:
        rel = pts - core[0]
        norm = np.linalg.norm(rel, axis=1, keepdims=True)
        u = np.where(norm > 0, rel / np.where(norm > 0, norm, 1.0), np.array([1.0, 0.0]))
        return core[0] + r * u
    dist, q, idx, _ = _segment_projection(pts, core)
    if r == 0.0:
        return q
    inside = _halfplane_max(pts, core) <= 0
    normals = edge_normals(core)[idx]
    away = (pts - q) / np.where(dist > 0, dist, 1.0)[:, None]
    u = np.where((inside | (dist <= 0))[:, None], normals, away)
    return q + r * u


def contains(points: np.ndarray, shape: ConvexShape, strict: bool = True) -> np.ndarray:
    sd = signed_distance(points, shape)
    return sd < 0 if strict else sd <= 0


def distance_to_shape(x: Point, shape: ConvexShape) -> DistanceResult:
    """Distance from x to the shape and the unit gradient of the distance function."""
    p = np.asarray([x], dtype=float)
    sd = float(signed_distance(p, shape)[0])
    q = nearest_boundary_point(p, shape)[0]
    scale = max(1.0, diameter(shape)) if shape.kind != "point" else 1.0
    core, _ = _core(shape)

    if shape.kind == "point" and sd <= 1e-15:
        return DistanceResult(distance=0.0, gradient=None, degenerate=True)

    degenerate = False
    if len(core) > 2:
        # Ties between edges mark the medial axis (inside) or a vertex region (outside).
        a = core[None, :, :]
        e = (np.roll(core, -1, axis=0) - core)[None, :, :]
        t = np.clip(((p[:, None, :] - a) * e).sum(axis=2) / (e * e).sum(axis=2), 0.0, 1.0)
        d = np.sort(np.linalg.norm(p[:, None, :] - (a + t[:, :, None] * e), axis=2)[0])
        degenerate = sd < 0 and d[1] - d[0] <= 1e-12 * scale

    if abs(sd) <= 1e-12 * scale:
        normal = _boundary_normal(q, shape)
        on_vertex = shape.kind == "polygon" and bool(np.any(np.linalg.norm(core - q, axis=1) <= 1e-12 * scale))
        return DistanceResult(distance=0.0, gradient=normal, degenerate=on_vertex)

    direction = p[0] - q if sd > 0 else q - p[0]
    g = direction / np.linalg.norm(direction)
    return DistanceResult(
        distance=sd,
        gradient=(float(g[0]), float(g[1])),
        inside=sd < 0,
        degenerate=degenerate,
    )


def _boundary_normal(q: np.ndarray, shape: ConvexShape) -> Point:
    core, r = _core(shape)
    if len(core) == 1:
        u = q - core[0]
        u = u / np.linalg.norm(u)
        return (float(u[0]), float(u[1]))
    _, nearest, idx, t = _segment_projection(q[None, :], core)
    normals = edge_normals(core)
    if r > 0:
        u = q - nearest[0]
        norm = np.linalg.norm(u)
        u = normals[idx[0]] if norm == 0 else u / norm
        return (float(u[0]), float(u[1]))
    i = int(idx[0])
    if t[0] >= 1.0:
        n = normals[i] + normals[(i + 1) % len(core)]
    elif t[0] <= 0.0:
        n = normals[i] + normals[i - 1]
    else:
        n = normals[i]
    n = n / np.linalg.norm(n)
    return (float(n[0]), float(n[1]))


# --- Invariants ---


def _require_extended(shape: ConvexShape) -> None:
    if shape.kind == "point":
        raise UnsupportedShapeError("operation not defined for a point shape")


def _polygon_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _polygon_perimeter(v: np.ndarray) -> float:
    return float(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).sum())


def area(shape: ConvexShape) -> float:
    """Area; a rounded shape adds the Steiner terms P r + pi r^2."""
    _require_extended(shape)
    core, r = _core(shape)
    if len(core) == 1:
        return math.pi * r * r
    return _polygon_area(core) + _polygon_perimeter(core) * r + math.pi * r * r


def perimeter(shape: ConvexShape) -> float:
    _require_extended(shape)
    core, r = _core(shape)
    if len(core) == 1:
        return 2 * math.pi * r
    return _polygon_perimeter(core) + 2 * math.pi * r


def diameter(shape: ConvexShape) -> float:
    """Maximal pairwise boundary distance, computed over polygon vertices."""
    _require_extended(shape)
    core, r = _core(shape)
    if len(core) == 1:
        return 2 * r
    d = np.linalg.norm(core[:, None, :] - core[None, :, :], axis=2)
    return float(d.max()) + 2 * r


def normal_cone(shape: ConvexShape, index: int) -> NormalCone:
    """Normal cone at a polygon vertex; smooth shapes give a degenerate cone."""
    if shape.kind != "polygon":
        _require_extended(shape)
        samples = boundary_samples(shape, 64)
        vertex, normal = samples.points[0], (float(samples.normals[0][0]), float(samples.normals[0][1]))
        return NormalCone(
            vertex=(float(vertex[0]), float(vertex[1])),
            dir_lo=normal,
            dir_hi=normal,
            angle=0.0,
            degenerate=True,
        )
    v = np.asarray(shape.vertices)
    if not 0 <= index < len(v):
        raise ContractError(f"vertex index {index} out of range for {len(v)} vertices")
    normals = edge_normals(v)
    lo, hi = normals[index - 1], normals[index]
    angle = math.atan2(lo[0] * hi[1] - lo[1] * hi[0], float(np.dot(lo, hi)))
    return NormalCone(
        vertex=(float(v[index][0]), float(v[index][1])),
        dir_lo=(float(lo[0]), float(lo[1])),
        dir_hi=(float(hi[0]), float(hi[1])),
        angle=angle,
    )


def boundary_samples(shape: ConvexShape, n: int) -> BoundarySamples:
    """Boundary points with outward normals, in CCW order. Polygon vertices are excluded."""
    _require_extended(shape)
    core, r = _core(shape)
    if len(core) == 1:
        theta = 2 * math.pi * (np.arange(n) + 0.5) / n
        u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return BoundarySamples(core[0] + r * u, u, np.full(n, 2 * math.pi * r / n))

    normals = edge_normals(core)
    edges = np.roll(core, -1, axis=0) - core
    lengths = np.linalg.norm(edges, axis=1)
    turn = np.array([_turn_angle(normals[i - 1], normals[i]) for i in range(len(core))])
    total = perimeter(shape)

    points, out_normals, spacing = [], [], []
    for i in range(len(core)):
        if r > 0:
            m = max(1, int(round(n * r * turn[i] / total)))
            angles = math.atan2(normals[i - 1][1], normals[i - 1][0]) + turn[i] * (np.arange(m) + 0.5) / m
            u = np.stack([np.cos(angles), np.sin(angles)], axis=1)
            points.append(core[i] + r * u)
            out_normals.append(u)
            spacing.append(np.full(m, r * turn[i] / m))
        m = max(1, int(round(n * lengths[i] / total)))
        s = (np.arange(m) + 0.5) / m
        points.append(core[i] + s[:, None] * edges[i] + r * normals[i])
        out_normals.append(np.repeat(normals[i][None, :], m, axis=0))
        spacing.append(np.full(m, lengths[i] / m))
    return BoundarySamples(np.concatenate(points), np.concatenate(out_normals), np.concatenate(spacing))


def _turn_angle(a: np.ndarray, b: np.ndarray) -> float:
    return math.atan2(a[0] * b[1] - a[1] * b[0], float(np.dot(a, b)))


def _core_geometry(shape: ConvexShape):
    core, _ = _core(shape)
    return ShapelyPoint(core[0]) if len(core) == 1 else Polygon(core)


def shape_gap(a: ConvexShape, b: ConvexShape) -> float:
    """Distance between two convex shapes; zero or negative when they meet."""
    core_a, ra = _core(a)
    core_b, rb = _core(b)
    # Between disjoint convex polygons the gap is realized at a vertex of one of them.
    gap = min(float(_core_distance(core_a, core_b).min()), float(_core_distance(core_b, core_a).min()))
    if _core_geometry(a).intersects(_core_geometry(b)):
        gap = min(gap, 0.0)
    return gap - ra - rb


def boundary_gap(hole: ConvexShape, outer: ConvexShape) -> float:
    """Distance from a hole to the outer boundary; non-positive unless the hole is strictly inside."""
    core, r = _core(hole)
    return float((-signed_distance(core, outer)).min()) - r


def check_domain_layout(outer: ConvexShape, holes: list[ConvexShape]) -> None:
    """Holes must lie in the open outer shape with pairwise disjoint closures."""
    for j, hole in enumerate(holes):
        if boundary_gap(hole, outer) <= 0:
            raise DomainError(f"hole {j} is not contained in the open interior of the outer shape")
    for j in range(len(holes)):
        for k in range(j + 1, len(holes)):
            if shape_gap(holes[j], holes[k]) <= 0:
                raise DomainError(f"holes {j} and {k} overlap or touch")


def to_geometry(shape: ConvexShape, quad_segs: Optional[int] = None):
    """Shapely realization of a shape; arcs become polylines."""
    quad_segs = quad_segs or get_settings().arc_segments
    core, r = _core(shape)
    geom = _core_geometry(shape)
    if r > 0:
        geom = geom.buffer(r, quad_segs=quad_segs)
    return geom


def domain_geometry(domain: PlanarDomain, quad_segs: Optional[int] = None) -> Polygon:
    """Shapely polygon of the domain with one interior ring per hole."""
    outer = to_geometry(domain.outer, quad_segs)
    holes = [to_geometry(h, quad_segs) for h in domain.realized_holes()]
    return Polygon(outer.exterior.coords, [h.exterior.coords for h in holes])


def geometry_report(domain: PlanarDomain) -> GeometryReport:
    """Invariant table of the outer shape, plus widths when the domain has holes."""
    holes = domain.realized_holes()
    hole_perimeters = [perimeter(h) for h in holes]
    report = GeometryReport(
        area=area(domain.outer),
        perimeter=perimeter(domain.outer),
        diameter=diameter(domain.outer),
        boundary_length=perimeter(domain.outer) + sum(hole_perimeters),
        hole_perimeters=hole_perimeters,
        injectivity_radius=injectivity_radius(domain.outer),
        widths=widths(domain) if holes else None,
    )
    return report


def flux_distance(phi: float) -> float:
    """Distance from phi to the nearest integer."""
    if math.isnan(phi):
        raise ContractError("flux must not be NaN")
    if math.isinf(phi):
        raise ContractError("flux must be finite")
    return abs(math.remainder(phi, 1.0))


# --- Ray casting ---


def _exit_distance(origins: np.ndarray, dirs: np.ndarray, outer: ConvexShape) -> np.ndarray:
    """Distance along each ray to the boundary of the outer shape, rays starting inside."""
    core, r = _core(outer)
    if r == 0.0:
        normals = edge_normals(core)
        nd = dirs @ normals.T
        gap = ((core[None, :, :] - origins[:, None, :]) * normals[None, :, :]).sum(axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(nd > 1e-15, gap / nd, np.inf)
        return t.min(axis=1)
    if len(core) == 1:
        rel = origins - core[0]
        b = (rel * dirs).sum(axis=1)
        c = (rel * rel).sum(axis=1) - r * r
        return -b + np.sqrt(np.maximum(b * b - c, 0.0))
    lo = np.zeros(len(origins))
    hi = np.full(len(origins), 2.0 * diameter(outer) + np.linalg.norm(origins - core.mean(axis=0), axis=1).max())
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        inside = signed_distance(origins + mid[:, None] * dirs, outer) <= 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


def _entry_distance(origins: np.ndarray, dirs: np.ndarray, obstacle: ConvexShape) -> np.ndarray:
    """Distance along each ray to a convex obstacle, inf when missed."""
    core, r = _core(obstacle)
    if r == 0.0 and len(core) > 1:
        normals = edge_normals(core)
        nd = dirs @ normals.T
        num = ((origins[:, None, :] - core[None, :, :]) * normals[None, :, :]).sum(axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -num / nd
        t_enter = np.where(nd < -1e-15, t, -np.inf).max(axis=1)
        t_leave = np.where(nd > 1e-15, t, np.inf).min(axis=1)
        parallel_out = ((np.abs(nd) <= 1e-15) & (num > 0)).any(axis=1)
        hit = (t_enter <= t_leave) & (t_leave > 0) & ~parallel_out
        return np.where(hit, np.maximum(t_enter, 0.0), np.inf)
    if len(core) == 1:
        rel = origins - core[0]
        b = (rel * dirs).sum(axis=1)
        c = (rel * rel).sum(axis=1) - r * r
        disc = b * b - c
        t = -b - np.sqrt(np.maximum(disc, 0.0))
        return np.where((disc > 0) & (t > 0), t, np.inf)

    # Rounded obstacle: the signed distance is convex along the ray.
    span = np.linalg.norm(origins - core.mean(axis=0), axis=1) + diameter(obstacle)
    a, b = np.zeros(len(origins)), span
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    for _ in range(_BISECTION_STEPS):
        fc = signed_distance(origins + c[:, None] * dirs, obstacle)
        fd = signed_distance(origins + d[:, None] * dirs, obstacle)
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
    t_min = 0.5 * (a + b)
    hit = signed_distance(origins + t_min[:, None] * dirs, obstacle) < 0
    lo, hi = np.zeros(len(origins)), t_min
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        outside = signed_distance(origins + mid[:, None] * dirs, obstacle) > 0
        lo = np.where(outside, mid, lo)
        hi = np.where(outside, hi, mid)
    return np.where(hit, hi, np.inf)


def _critical_points(domain: PlanarDomain, source: int) -> np.ndarray:
    """Vertices where the ray length changes slope: outer corners and other polygon corners."""
    pts = []
    if domain.outer.kind == "polygon":
        pts.append(np.asarray(domain.outer.vertices))
    for k, hole in enumerate(domain.realized_holes()):
        if k != source and hole.kind == "polygon":
            pts.append(np.asarray(hole.vertices))
    return np.concatenate(pts) if pts else np.zeros((0, 2))


def _hole_rays(
    hole: ConvexShape, critical: np.ndarray, n_samples: int, n_cone: int
) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal rays leaving a hole, in boundary order."""
    if hole.kind != "polygon":
        samples = boundary_samples(hole, n_samples)
        return samples.points, samples.normals

    v = np.asarray(hole.vertices)
    normals = edge_normals(v)
    edges = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(edges, axis=1)
    total = lengths.sum()
    origins, dirs = [], []
    for i in range(len(v)):
        lo, hi = normals[i - 1], normals[i]
        alpha = _turn_angle(lo, hi)
        theta_lo = math.atan2(lo[1], lo[0])
        thetas = theta_lo + alpha * np.linspace(0.0, 1.0, n_cone)
        if len(critical):
            rel = critical - v[i]
            extra = np.mod(np.arctan2(rel[:, 1], rel[:, 0]) - theta_lo, 2 * math.pi)
            thetas = np.sort(np.concatenate([thetas, theta_lo + extra[(extra > 0) & (extra < alpha)]]))
        origins.append(np.repeat(v[i][None, :], len(thetas), axis=0))
        dirs.append(np.stack([np.cos(thetas), np.sin(thetas)], axis=1))

        m = max(1, int(round(n_samples * lengths[i] / total)))
        s = (np.arange(m) + 0.5) / m
        if len(critical):
            proj = ((critical - v[i]) @ edges[i]) / lengths[i] ** 2
            s = np.sort(np.concatenate([s, proj[(proj > 0) & (proj < 1)]]))
        origins.append(v[i] + s[:, None] * edges[i])
        dirs.append(np.repeat(hi[None, :], len(s), axis=0))
    return np.concatenate(origins), np.concatenate(dirs)


def cast_hole_rays(
    domain: PlanarDomain,
    source: int,
    n_samples: Optional[int] = None,
    n_cone: Optional[int] = None,
    require_outer_hit: bool = False,
) -> RayFan:
    """Orthogonal rays from hole `source`, truncated at their first exit from the domain."""
    settings = get_settings()
    n_samples = n_samples or settings.boundary_samples
    n_cone = n_cone or settings.cone_samples
    holes = domain.realized_holes()
    origins, dirs = _hole_rays(holes[source], _critical_points(domain, source), n_samples, n_cone)
    lengths = _exit_distance(origins, dirs, domain.outer)
    if not require_outer_hit:
        for k, other in enumerate(holes):
            if k != source:
                lengths = np.minimum(lengths, _entry_distance(origins, dirs, other))
    bad = ~np.isfinite(lengths) | (lengths <= 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise RayCastError(f"ray from {origins[i].tolist()} in direction {dirs[i].tolist()} did not exit the domain")
    return RayFan(origins, dirs, lengths)


def _padded_extremes(fans: list[RayFan]) -> tuple[float, int, int, float, int, int, float, float]:
    """Extremal ray lengths with the neighbouring-sample jump used as conservative padding."""
    beta, B = math.inf, -math.inf
    beta_at = B_at = (0, 0)
    for f, fan in enumerate(fans):
        i_min, i_max = int(np.argmin(fan.lengths)), int(np.argmax(fan.lengths))
        if fan.lengths[i_min] < beta:
            beta, beta_at = float(fan.lengths[i_min]), (f, i_min)
        if fan.lengths[i_max] > B:
            B, B_at = float(fan.lengths[i_max]), (f, i_max)

    def jump(at: tuple[int, int]) -> float:
        lengths = fans[at[0]].lengths
        i = at[1]
        return float(max(abs(lengths[i] - lengths[i - 1]), abs(lengths[(i + 1) % len(lengths)] - lengths[i])))

    return beta, beta_at[0], beta_at[1], B, B_at[0], B_at[1], jump(beta_at), jump(B_at)


def _segment(fan: RayFan, i: int) -> tuple[Point, Point]:
    a = fan.origins[i]
    b = a + fan.lengths[i] * fan.directions[i]
    return ((float(a[0]), float(a[1])), (float(b[0]), float(b[1])))


def _sup_of_point_minima(fans: list[RayFan]) -> float:
    """sup over boundary points p of beta(p), the minimum over the rays leaving p."""
    best = -math.inf
    for fan in fans:
        _, groups = np.unique(fan.origins, axis=0, return_inverse=True)
        groups = groups.reshape(-1)
        minima = np.full(groups.max() + 1, np.inf)
        np.minimum.at(minima, groups, fan.lengths)
        best = max(best, float(minima.max()))
    return best


def _width_report(fans: list[RayFan], beta_tilde: float, n_samples: int, n_cone: int, termination: str) -> WidthReport:
    beta, fb, ib, B, fB, iB, pad_beta, pad_B = _padded_extremes(fans)
    return WidthReport(
        B_literal=_sup_of_point_minima(fans),
        beta=beta,
        B=B,
        beta_ray=_segment(fans[fb], ib),
        B_ray=_segment(fans[fB], iB),
        beta_tilde=beta_tilde,
        beta_lo=max(beta - pad_beta, 0.5 * beta),
        B_hi=B + pad_B,
        n_samples=n_samples,
        n_cone_samples=n_cone,
        n_rays=sum(len(f.lengths) for f in fans),
        termination=termination,
    )


def beta_tilde(domain: PlanarDomain) -> float:
    """Smallest distance between distinct boundary components."""
    holes = domain.realized_holes()
    gaps = [boundary_gap(h, domain.outer) for h in holes]
    gaps += [shape_gap(holes[j], holes[k]) for j in range(len(holes)) for k in range(j + 1, len(holes))]
    return min(gaps)


def widths(
    domain: PlanarDomain,
    n_boundary_samples: Optional[int] = None,
    n_cone_samples: Optional[int] = None,
    require_outer_hit: bool = False,
) -> WidthReport:
    """Minimal and maximal length of rays leaving the inner boundary orthogonally.

    beta is the minimum over all sampled rays, B the supremum of the per-point maxima;
    rays stop at the first exit from the domain unless require_outer_hit is set.
    """
    settings = get_settings()
    n_samples = n_boundary_samples or settings.boundary_samples
    n_cone = n_cone_samples or settings.cone_samples
    if n_samples < 64:
        raise ContractError("at least 64 boundary samples are required")
    if not domain.holes:
        raise NoInnerBoundaryError("domain has no inner boundary")

    fans = [
        cast_hole_rays(domain, j, n_samples, n_cone, require_outer_hit)
        for j in range(len(domain.holes))
    ]
    report = _width_report(
        fans,
        beta_tilde(domain),
        n_samples,
        n_cone,
        "outer_hit" if require_outer_hit else "first_exit",
    )
    logger.debug(
        "Widths computed",
        extra={"extra_data": {"beta": report.beta, "B": report.B, "rays": report.n_rays}},
    )
    return report


def injectivity_radius(shape: ConvexShape, n_samples: Optional[int] = None, tol: Optional[float] = None) -> float:
    """Largest r such that an interior ball of radius r is tangent at every sampled boundary point."""
    _require_extended(shape)
    if shape.kind == "polygon":
        return 0.0
    settings = get_settings()
    n_samples = n_samples or settings.injectivity_samples
    tol = tol or settings.injectivity_tol
    samples = boundary_samples(shape, n_samples)
    slack = 1e-9 * max(1.0, diameter(shape))

    def fits(r: float) -> bool:
        centers = samples.points - r * samples.normals
        return bool(np.all(signed_distance(centers, shape) <= -r + slack))

    lo, hi = 0.0, 0.5 * diameter(shape)
    if fits(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return lo


# --- Rays inside general polygonal regions (partition pieces and cells) ---


def _ring_segments(region: Polygon) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    region = orient(region, sign=1.0)
    starts, ends, on_exterior = [], [], []
    for ring, is_exterior in [(region.exterior, True)] + [(r, False) for r in region.interiors]:
        c = np.asarray(ring.coords)[:, :2]
        starts.append(c[:-1])
        ends.append(c[1:])
        on_exterior.append(np.full(len(c) - 1, is_exterior))
    return np.concatenate(starts), np.concatenate(ends), np.concatenate(on_exterior)


def cast_region_rays(origins: np.ndarray, dirs: np.ndarray, region: Polygon, chunk: int = 512) -> RegionHits:
    """First boundary crossing of each ray inside a polygonal region, with the outward normal there."""
    a, b, on_exterior = _ring_segments(region)
    e = b - a
    seg_normals = np.stack([e[:, 1], -e[:, 0]], axis=1)
    seg_normals /= np.linalg.norm(seg_normals, axis=1, keepdims=True)
    scale = max(1.0, math.sqrt(region.area))
    eps = 1e-9 * scale

    lengths = np.empty(len(origins))
    idx = np.empty(len(origins), dtype=np.int64)
    for start in range(0, len(origins), chunk):
        o = origins[start : start + chunk]
        d = dirs[start : start + chunk]
        denom = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]
        rel = a[None, :, :] - o[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (rel[:, :, 0] * e[None, :, 1] - rel[:, :, 1] * e[None, :, 0]) / denom
            s = (rel[:, :, 0] * d[:, None, 1] - rel[:, :, 1] * d[:, None, 0]) / denom
        valid = (np.abs(denom) > 1e-15) & (t > eps) & (s >= -1e-12) & (s <= 1 + 1e-12)
        t = np.where(valid, t, np.inf)
        j = np.argmin(t, axis=1)
        lengths[start : start + chunk] = t[np.arange(len(o)), j]
        idx[start : start + chunk] = j
    if not np.all(np.isfinite(lengths)):
        raise RayCastError("ray did not leave the region")
    return RegionHits(lengths, seg_normals[idx], on_exterior[idx])


def inner_ring_rays(region: Polygon, n_samples: int, n_cone: int, ring: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Rays leaving an interior ring of a region orthogonally, fans at the convex corners of the hole."""
    region = orient(region, sign=1.0)
    coords = np.asarray(region.interiors[ring].coords)[:-1, :2]
    edges = np.roll(coords, -1, axis=0) - coords
    lengths = np.linalg.norm(edges, axis=1)
    keep = lengths > 1e-14
    coords, edges, lengths = coords[keep], edges[keep], lengths[keep]
    # Interior rings run clockwise, so the left normal points into the region.
    normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1) / lengths[:, None]
    total = lengths.sum()

    origins, dirs = [], []
    for i in range(len(coords)):
        lo, hi = normals[i - 1], normals[i]
        turn = _turn_angle(lo, hi)
        if turn < -1e-12:
            # Convex corner of the hole seen from the region.
            m = max(2, int(math.ceil(n_cone * abs(turn) / (0.5 * math.pi))))
            thetas = math.atan2(lo[1], lo[0]) + turn * np.linspace(0.0, 1.0, m)
            origins.append(np.repeat(coords[i][None, :], m, axis=0))
            dirs.append(np.stack([np.cos(thetas), np.sin(thetas)], axis=1))
        m = max(1, int(round(n_samples * lengths[i] / total)))
        s = (np.arange(m) + 0.5) / m
        origins.append(coords[i] + s[:, None] * edges[i])
        dirs.append(np.repeat(hi[None, :], m, axis=0))
    return np.concatenate(origins), np.concatenate(dirs)


def region_widths(region: Polygon, n_samples: Optional[int] = None, n_cone: Optional[int] = None) -> WidthReport:
    """Widths of a polygonal annulus, rays leaving its interior ring."""
    settings = get_settings()
    n_samples = n_samples or settings.boundary_samples
    n_cone = n_cone or settings.cone_samples
    if len(region.interiors) != 1:
        raise NoInnerBoundaryError(f"expected an annulus, got {len(region.interiors)} interior rings")
    origins, dirs = inner_ring_rays(region, n_samples, n_cone)
    hits = cast_region_rays(origins, dirs, region)
    fan = RayFan(origins, dirs, hits.lengths)
    gap = float(region.exterior.distance(LinearRing(region.interiors[0].coords)))
    return _width_report([fan], gap, n_samples, n_cone, "first_exit")


def sample_points(region, n: int, seed: int) -> np.ndarray:
    """Uniform random points of a shapely region (rejection from its bounding box)."""
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = region.bounds
    shapely.prepare(region)
    out: list[np.ndarray] = []
    count = 0
    while count < n:
        pts = rng.uniform((x0, y0), (x1, y1), size=(2 * n, 2))
        pts = pts[shapely.contains_xy(region, pts[:, 0], pts[:, 1])]
        out.append(pts)
        count += len(pts)
    return np.concatenate(out)[:n]
