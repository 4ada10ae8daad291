"""Overlapping annuli for one hole, equidistant cells for several holes, and their invariants."""

import math
from typing import Optional, Sequence

import numpy as np
import shapely
from scipy.optimize import brentq
from shapely.geometry import LineString, Point as ShapelyPoint, Polygon, box
from shapely.geometry.polygon import orient
from shapely.ops import split

from fluxgap.config import get_settings
from fluxgap.core.errors import CellResolutionError, ContractError, PartitionError, RayCastError
from fluxgap.core.executor import run_ordered
from fluxgap.core.retry import retry_on_failure
from fluxgap.models import (
    AnnulusPiece,
    Cell,
    ClosedPotential,
    ConvexShape,
    EquidistantCurve,
    PartitionCheck,
    PlanarDomain,
    SpectralProblem,
    StarCosine,
    Wedge,
)
from fluxgap.services import geometry, mesh, solver
from fluxgap.utils.logging import get_logger

logger = get_logger(__name__)


# --- Overlapping annuli (one hole) ---


def _as_annulus(geom, what: str) -> Polygon:
    if geom.geom_type != "Polygon" or len(geom.interiors) != 1:
        raise PartitionError(f"{what} is not an annulus ({geom.geom_type}, {len(getattr(geom, 'interiors', []))} holes)")
    return orient(geom, sign=1.0)


def _piece_regions(F: Polygon, G: Polygon, beta: float, n: int) -> list[tuple[Polygon, Polygon]]:
    inner_F = F.buffer(-beta)
    regions = []
    for k in range(1, n + 1):
        outer = F if k == n else G.buffer(k * beta).intersection(F)
        inner = G if k == 1 else G.union(G.buffer((k - 1) * beta).intersection(inner_F))
        _as_annulus(outer.difference(inner), f"piece {k}")
        regions.append((outer, inner))
    return regions


def annuli_partition(domain: PlanarDomain, n_samples: Optional[int] = None) -> list[AnnulusPiece]:
    """Pieces {rho1 < k beta} minus closure{rho1 < (k-1) beta, rho2 > beta}, k = 1..ceil(B/beta)."""
    holes = domain.realized_holes()
    if len(holes) != 1:
        raise ContractError(f"annuli_partition needs exactly one hole, got {len(holes)}")
    report = geometry.widths(domain, n_boundary_samples=n_samples)
    beta, B = report.beta, report.B
    n = max(1, math.ceil(B / beta - 1e-9))
    if n > 2 * B / beta:
        logger.warning("Piece count exceeds 2B/beta", extra={"extra_data": {"n": n, "ratio": B / beta}})

    F = geometry.to_geometry(domain.outer)
    G = geometry.to_geometry(holes[0])
    nudge = get_settings().level_set_nudge

    def build(attempt: int) -> list[tuple[Polygon, Polygon]]:
        # Non-regular levels of the offset curves are avoided by a tiny shrink of beta.
        return _piece_regions(F, G, beta * (1 - attempt * nudge), n)

    regions = retry_on_failure(build, max_attempts=3, retry_on=(PartitionError,))
    pieces = []
    for k, (outer, inner) in enumerate(regions, start=1):
        region = _as_annulus(outer.difference(inner), f"piece {k}")
        pieces.append(
            AnnulusPiece(
                index=k,
                beta=beta,
                outer_region=outer,
                inner_region=inner,
                widths=geometry.region_widths(region, n_samples=n_samples),
                outer_perimeter=float(outer.exterior.length),
            )
        )
    logger.info("Annuli partition", extra={"extra_data": {"n": n, "beta": beta, "B": B}})
    return pieces


def piece_contains(domain: PlanarDomain, piece: AnnulusPiece, n_pieces: int, points: np.ndarray) -> np.ndarray:
    """Exact membership of points in a piece, from the defining distance inequalities."""
    pts = np.atleast_2d(points)
    hole = domain.realized_holes()[0]
    rho1 = geometry.signed_distance(pts, hole)
    rho2 = -geometry.signed_distance(pts, domain.outer)
    k, beta = piece.index, piece.beta
    inside = (rho2 > 0) & (rho1 > 0)
    if k < n_pieces:
        inside &= rho1 < k * beta
    if k >= 2:
        inside &= ~((rho1 <= (k - 1) * beta) & (rho2 >= beta))
    return inside


def _ring_fan(region: Polygon, vertex: np.ndarray, n_cone: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Rays through the normal cone at the interior-ring vertex nearest to `vertex`."""
    coords = np.asarray(orient(region, sign=1.0).interiors[0].coords)[:-1, :2]
    i = int(np.argmin(np.linalg.norm(coords - vertex, axis=1)))
    prev_edge = coords[i] - coords[i - 1]
    next_edge = coords[(i + 1) % len(coords)] - coords[i]
    lo = np.array([-prev_edge[1], prev_edge[0]]) / np.linalg.norm(prev_edge)
    hi = np.array([-next_edge[1], next_edge[0]]) / np.linalg.norm(next_edge)
    turn = math.atan2(lo[0] * hi[1] - lo[1] * hi[0], float(np.dot(lo, hi)))
    m = max(2, int(math.ceil(n_cone * abs(turn) / (0.5 * math.pi))))
    thetas = math.atan2(lo[1], lo[0]) + turn * np.linspace(0.0, 1.0, m)
    dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
    return np.repeat(coords[i][None, :], m, axis=0), dirs, abs(turn)


def _corner_points(ring_coords: np.ndarray, min_turn: float) -> np.ndarray:
    c = ring_coords[:-1, :2]
    e1 = c - np.roll(c, 1, axis=0)
    e2 = np.roll(c, -1, axis=0) - c
    turn = np.abs(np.arctan2(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0], (e1 * e2).sum(axis=1)))
    return c[turn > min_turn]


def wedge_report(domain: PlanarDomain, piece: AnnulusPiece, n_cone: Optional[int] = None) -> list[Wedge]:
    """Classify the corners of the piece's inner boundary and report beta / B(p) at each."""
    settings = get_settings()
    n_cone = n_cone or settings.cone_samples
    hole = domain.realized_holes()[0]
    region = _as_annulus(piece.region, f"piece {piece.index}")
    beta, k = piece.beta, piece.index
    tol = settings.geometry_tol * beta
    arc_turn = 1.5 * (0.5 * math.pi / settings.arc_segments)

    candidates: list[tuple[np.ndarray, int, float]] = []
    if k == 1:
        if hole.kind == "polygon":
            ratio_target = beta / geometry.widths(domain).B
            candidates += [(np.asarray(v), 0, ratio_target) for v in hole.vertices]
    else:
        F = geometry.to_geometry(domain.outer)
        G = geometry.to_geometry(hole)
        inner_F = F.buffer(-beta)
        offset = G.buffer((k - 1) * beta)
        meet = offset.exterior.intersection(inner_F.exterior)
        if not meet.is_empty:
            pts = np.asarray([(p.x, p.y) for p in getattr(meet, "geoms", [meet]) if p.geom_type == "Point"])
            candidates += [(p, 1, 1 / math.sqrt(2)) for p in pts]
        corners = _corner_points(np.asarray(inner_F.exterior.coords), arc_turn)
        if len(corners):
            inside_offset = geometry.signed_distance(corners, hole) < (k - 1) * beta - tol
            target = geometry.area(domain.outer) / (4 * geometry.diameter(domain.outer) ** 2)
            candidates += [(p, 2, target) for p in corners[inside_offset]]

    wedges = []
    ring = region.interiors[0]
    for p, kind, target in candidates:
        if ring.distance(ShapelyPoint(p)) > tol:
            continue
        origins, dirs, angle = _ring_fan(region, p, n_cone)
        try:
            hits = geometry.cast_region_rays(origins, dirs, region)
        except RayCastError as e:
            raise PartitionError(
                f"wedge classification failed at {tuple(p)} (kind {kind}, piece {k}): {e}"
            ) from e
        B_p = float(hits.lengths.max())
        wedges.append(
            Wedge(
                vertex=(float(p[0]), float(p[1])),
                kind=kind,
                cone_angle=angle,
                B_p=B_p,
                ratio=beta / B_p,
                target=target - settings.geometry_tol,
            )
        )
    return wedges


# --- Equidistant sets and cells (several holes) ---


def _rho_difference(points: np.ndarray, a: ConvexShape, b: ConvexShape) -> np.ndarray:
    return geometry.signed_distance(points, a) - geometry.signed_distance(points, b)


def _is_circular(shape: ConvexShape) -> bool:
    return shape.kind in ("disk", "point")


def equidistant_curve(
    a: ConvexShape,
    b: ConvexShape,
    bbox: tuple[float, float, float, float],
    resolution: float,
) -> EquidistantCurve:
    """Zero set of rho_a - rho_b, one root per scan line parallel to the axis through the two shapes."""
    if geometry.shape_gap(a, b) <= 0:
        raise PartitionError("shapes intersect, the equidistant set is undefined")
    tol = get_settings().equidistant_tol
    ca, cb = np.asarray(a.anchor), np.asarray(b.anchor)
    u = cb - ca
    u = u / np.linalg.norm(u)
    w = np.array([-u[1], u[0]])
    x0, y0, x1, y1 = bbox
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    mid = 0.5 * (ca + cb)
    s_lo, s_hi = ((corners - mid) @ w).min(), ((corners - mid) @ w).max()
    t_lo, t_hi = ((corners - mid) @ u).min(), ((corners - mid) @ u).max()
    offsets = np.arange(s_lo, s_hi + resolution, resolution)
    ts = np.linspace(t_lo, t_hi, max(8, int(math.ceil((t_hi - t_lo) / resolution))) + 1)

    def f(t: float, base: np.ndarray) -> float:
        return float(_rho_difference((base + t * u)[None, :], a, b)[0])

    points, prev = [], None
    for s in offsets:
        base = mid + s * w
        values = _rho_difference(base[None, :] + ts[:, None] * u[None, :], a, b)
        roots = []
        for i in np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0):
            if values[i] == 0:
                roots.append(ts[i])
            elif values[i + 1] != 0:
                roots.append(brentq(f, ts[i], ts[i + 1], args=(base,), xtol=tol * 1e-3))
        if not roots:
            continue
        t = min(roots, key=lambda r: abs(r) if prev is None else abs(r - prev))
        prev = t
        points.append(base + t * u)

    if len(points) < 2:
        raise CellResolutionError("equidistant set not resolved inside the bounding box")
    pts = np.asarray(points)
    residual = float(np.abs(_rho_difference(pts, a, b)).max())
    line_residual = None
    if _is_circular(a) and _is_circular(b) and abs(a.radius - b.radius) <= 1e-12:
        centered = pts - pts.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        line_residual = float(np.abs(centered @ vt[-1]).max())
    return EquidistantCurve(points=pts, max_residual=residual, line_residual=line_residual)


def _half_plane(pi: np.ndarray, pj: np.ndarray, extent: float) -> Polygon:
    """Closed half-plane of points nearer to pi than to pj, as a large polygon."""
    n = pi - pj
    n = n / np.linalg.norm(n)
    mid = 0.5 * (pi + pj)
    d = np.array([-n[1], n[0]])
    p1, p2 = mid + extent * d, mid - extent * d
    return Polygon([tuple(p1), tuple(p2), tuple(p2 + extent * n), tuple(p1 + extent * n)])


def _side_of_curve(curve: EquidistantCurve, frame: Polygon, anchor: tuple[float, float]) -> Polygon:
    pts = curve.points
    extent = 2 * math.hypot(frame.bounds[2] - frame.bounds[0], frame.bounds[3] - frame.bounds[1])
    start_dir = pts[0] - pts[1]
    end_dir = pts[-1] - pts[-2]
    line = LineString(
        [tuple(pts[0] + extent * start_dir / np.linalg.norm(start_dir)), *map(tuple, pts),
         tuple(pts[-1] + extent * end_dir / np.linalg.norm(end_dir))]
    )
    target = ShapelyPoint(anchor)
    for part in split(frame, line).geoms:
        if part.contains(target):
            return part
    raise CellResolutionError("equidistant curve does not separate the holes")


def _pick_component(geom, hole: Polygon) -> Polygon:
    parts = getattr(geom, "geoms", [geom])
    for part in parts:
        if part.geom_type == "Polygon" and part.contains(hole.representative_point()):
            return part
    raise PartitionError("cell does not contain its hole")


def _equal_circular(holes: Sequence[ConvexShape]) -> bool:
    return all(_is_circular(h) for h in holes) and max(h.radius for h in holes) - min(h.radius for h in holes) <= 1e-12


def cells(domain: PlanarDomain, resolution: Optional[float] = None, n_check: int = 20000) -> list[Cell]:
    """Cells F_j = {x in F : d(x, G_j) < d(x, G_k) for all k != j}, minus the hole G_j."""
    holes = domain.realized_holes()
    if len(holes) < 2:
        raise ContractError(f"cells need at least two holes, got {len(holes)}")
    F = geometry.to_geometry(domain.outer)
    scale = geometry.diameter(domain.outer)
    resolution = resolution or scale / 256
    exact = _equal_circular(holes)
    frame = box(*F.buffer(scale).bounds)
    hole_geoms = [geometry.to_geometry(h) for h in holes]

    regions = []
    for j, hole in enumerate(holes):
        region = frame
        for k, other in enumerate(holes):
            if k == j:
                continue
            if exact:
                half = _half_plane(np.asarray(hole.center), np.asarray(other.center), 4 * scale)
            else:
                curve = equidistant_curve(hole, other, frame.bounds, resolution)
                half = _side_of_curve(curve, frame, hole.anchor)
            region = region.intersection(half)
        region = _pick_component(region.intersection(F), hole_geoms[j]).difference(hole_geoms[j])
        regions.append(_as_annulus(region, f"cell {j}"))

    _check_cells(domain, regions, resolution, n_check)

    out = []
    pad = 1e-9 * scale
    for j, region in enumerate(regions):
        gamma = {}
        for k, other in enumerate(regions):
            if k != j:
                shared = region.exterior.intersection(other.buffer(max(pad, 1e-6 * resolution))).length
                if shared > 0:
                    gamma[k] = float(shared)
        cell = Cell(index=j, region=region, gamma=gamma, perimeter=float(region.exterior.length), exact=exact)
        out.append(cell.model_copy(update={"star": star_cosine(cell)}))
    logger.info("Cells built", extra={"extra_data": {"n": len(out), "exact": exact}})
    return out


def _check_cells(domain: PlanarDomain, regions: list[Polygon], resolution: float, n_check: int) -> None:
    """Replay the nearest-hole definition on random points, ignoring a band around cell borders."""
    settings = get_settings()
    pts = geometry.sample_points(geometry.domain_geometry(domain), n_check, settings.seed)
    dist = np.stack([geometry.signed_distance(pts, h) for h in domain.realized_holes()], axis=1)
    order = np.sort(dist, axis=1)
    clear = order[:, 1] - order[:, 0] > 2 * resolution
    owner = np.argmin(dist, axis=1)
    member = np.stack([shapely.contains_xy(r, pts[:, 0], pts[:, 1]) for r in regions], axis=1)
    for j in range(len(regions)):
        if not member[:, j].any():
            raise CellResolutionError(f"cell {j} received no samples; refine the resolution")
    wrong = clear & ~member[np.arange(len(pts)), owner]
    double = member.sum(axis=1) > 1
    if wrong.any() or double.any():
        raise PartitionError(
            f"cells disagree with the nearest-hole rule at {int(wrong.sum())} points, overlap at {int(double.sum())}"
        )


def star_cosine(cell: Cell, n_samples: Optional[int] = None, n_cone: Optional[int] = None) -> StarCosine:
    """Minimal cosine between rays leaving the hole orthogonally and the outer normal where they exit."""
    settings = get_settings()
    n_samples = n_samples or settings.boundary_samples
    n_cone = n_cone or settings.cone_samples
    origins, dirs = geometry.inner_ring_rays(cell.region, n_samples, n_cone)
    hits = geometry.cast_region_rays(origins, dirs, cell.region)
    if not hits.exterior.all():
        raise PartitionError(f"ray leaves cell {cell.index} through its own hole")
    cos = (dirs * hits.normals).sum(axis=1)
    return StarCosine(
        m=float(cos.min()),
        beta=float(hits.lengths.min()),
        B=float(hits.lengths.max()),
        n_rays=len(origins),
    )


# --- Numerical check of the partition inequality ---


def _lowest(args: tuple[Polygon, float, ClosedPotential, Optional[list], int]) -> float:
    region, h, potential, components, seed = args
    m = mesh.mesh_region(region, h, components=components)
    return solver.solve_problem(SpectralProblem(mesh=m, potential=potential), seed=seed).lambda1


def partition_eigen_check(
    domain: PlanarDomain,
    potential: ClosedPotential,
    regions: Sequence[Polygon],
    kind: str,
    h: Optional[float] = None,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
) -> PartitionCheck:
    """lambda(Omega) >= max_k lambda(Omega_k) / n (overlapping) or >= min_j lambda(Omega_j) (disjoint)."""
    if kind not in ("overlapping", "disjoint"):
        raise ContractError(f"unknown partition kind {kind!r}")
    settings = get_settings()
    seed = settings.seed if seed is None else seed
    if h is None:
        beta = geometry.widths(domain).beta
        h = min(settings.piece_h_factor * beta, geometry.beta_tilde(domain) / 4.01)

    holes = domain.realized_holes()
    omega_components = [geometry.to_geometry(s).exterior for s in [domain.outer, *holes]]
    items = [(geometry.domain_geometry(domain), h, potential, omega_components, seed)]
    items += [(orient(r, sign=1.0), h, potential, None, seed) for r in regions]
    lambdas = run_ordered(_lowest, items, jobs)
    lam_omega, pieces = lambdas[0], lambdas[1:]

    n = len(pieces)
    if kind == "overlapping":
        best = int(np.argmax(pieces))
        rhs = pieces[best] / n
    else:
        best = int(np.argmin(pieces))
        rhs = pieces[best]
    margin = lam_omega / rhs if rhs > 0 else math.inf
    tolerance = settings.partition_check_tol
    check = PartitionCheck(
        kind=kind,
        lambda_omega=lam_omega,
        piece_lambdas=pieces,
        n=n,
        best_index=best,
        margin=margin,
        tolerance=tolerance,
        holds=margin >= 1 - tolerance,
    )
    logger.info("Partition check", extra={"extra_data": check.model_dump()})
    return check
