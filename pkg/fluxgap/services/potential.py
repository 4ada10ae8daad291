"""Closed one-forms with prescribed fluxes: pole potentials, exact line integrals, gauge scalars."""

import math
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from fluxgap.core.errors import ContractError, FluxMatchError, PoleSingularityError, TopologyError
from fluxgap.models import ClosedPotential, PlanarDomain, Point, PolynomialGauge, TriMesh
from fluxgap.utils.logging import get_logger

logger = get_logger(__name__)

SINGULARITY_TOL = 1e-12


def _pole_arrays(A: ClosedPotential) -> tuple[np.ndarray, np.ndarray]:
    if not A.poles:
        return np.zeros((0, 2)), np.zeros(0)
    return np.asarray([p.at for p in A.poles], dtype=float), np.asarray([p.flux for p in A.poles], dtype=float)


def gauge_value(gauge: Optional[PolynomialGauge], points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(points)
    if gauge is None:
        return np.zeros(len(pts))
    c0, c1, c2, c3, c4, c5 = gauge.coefficients
    x, y = pts[:, 0], pts[:, 1]
    return c0 + c1 * x + c2 * y + c3 * x * x + c4 * x * y + c5 * y * y


def gauge_gradient(gauge: Optional[PolynomialGauge], points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(points)
    if gauge is None:
        return np.zeros_like(pts)
    _, c1, c2, c3, c4, c5 = gauge.coefficients
    x, y = pts[:, 0], pts[:, 1]
    return np.stack([c1 + 2 * c3 * x + c4 * y, c2 + c4 * x + 2 * c5 * y], axis=1)


def evaluate_many(A: ClosedPotential, points: np.ndarray) -> np.ndarray:
    """Covector A(x) = sum_j flux_j * (-(y - a_j2), x - a_j1) / |x - a_j|^2 plus the exact part."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    centers, fluxes = _pole_arrays(A)
    out = gauge_gradient(A.gauge, pts)
    if len(centers):
        rel = pts[:, None, :] - centers[None, :, :]
        r2 = (rel * rel).sum(axis=2)
        if np.any(r2 <= SINGULARITY_TOL**2):
            raise PoleSingularityError("potential evaluated at a pole")
        w = fluxes[None, :] / r2
        out = out + np.stack([(-rel[:, :, 1] * w).sum(axis=1), (rel[:, :, 0] * w).sum(axis=1)], axis=1)
    return out


def evaluate(A: ClosedPotential, x: Point) -> tuple[float, float]:
    v = evaluate_many(A, np.asarray([x]))[0]
    return (float(v[0]), float(v[1]))


def _subtended_angles(a: np.ndarray, b: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Signed angle under which each segment a->b is seen from each center, shape (segments, centers)."""
    ra = a[:, None, :] - centers[None, :, :]
    rb = b[:, None, :] - centers[None, :, :]
    cross = ra[:, :, 0] * rb[:, :, 1] - ra[:, :, 1] * rb[:, :, 0]
    dot = (ra * rb).sum(axis=2)

    # Reject segments passing through a pole.
    e = (b - a)[:, None, :]
    t = np.clip(-(ra * e).sum(axis=2) / np.maximum((e * e).sum(axis=2), 1e-300), 0.0, 1.0)
    closest = ra + t[:, :, None] * e
    if np.any((closest * closest).sum(axis=2) <= SINGULARITY_TOL**2):
        raise PoleSingularityError("segment passes through a pole")
    return np.arctan2(cross, dot)


def line_integral(A: ClosedPotential, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact integral of A along the straight segments a[i] -> b[i]."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    centers, fluxes = _pole_arrays(A)
    total = gauge_value(A.gauge, b) - gauge_value(A.gauge, a)
    if len(centers):
        total = total + _subtended_angles(a, b, centers) @ fluxes
    return total


def flux_around(A: ClosedPotential, loop: np.ndarray) -> float:
    """(1/2 pi) times the circulation of A around a closed polyline."""
    pts = np.asarray(loop, dtype=float)
    if len(pts) < 3:
        raise ContractError("a loop needs at least 3 points")
    if not np.array_equal(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[:1]])
    centers, fluxes = _pole_arrays(A)
    if not len(centers):
        return 0.0
    # The exact part integrates to zero around a closed loop.
    angles = _subtended_angles(pts[:-1], pts[1:], centers).sum(axis=0)
    return float(np.dot(angles, fluxes) / (2 * math.pi))


def fluxes_by_hole(domain: PlanarDomain, A: ClosedPotential) -> list[float]:
    """Flux around each hole, matching poles to holes by containment (one pole per hole)."""
    from fluxgap.services.geometry import signed_distance

    holes = domain.realized_holes()
    owner: list[int] = []
    for pole in A.poles:
        inside = [j for j, h in enumerate(holes) if signed_distance(np.asarray([pole.at]), h)[0] < 0]
        if len(inside) != 1:
            raise FluxMatchError(f"pole at {pole.at} lies in {len(inside)} holes")
        owner.append(inside[0])
    fluxes: list[float] = []
    for j in range(len(holes)):
        matched = [A.poles[i].flux for i, o in enumerate(owner) if o == j]
        if len(matched) != 1:
            raise FluxMatchError(f"hole {j} carries {len(matched)} poles, expected exactly one")
        fluxes.append(matched[0])
    return fluxes


def _region_edges(triangles: np.ndarray) -> np.ndarray:
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def poles_in_triangles(A: ClosedPotential, vertices: np.ndarray, triangles: np.ndarray) -> list[int]:
    """Indices of poles lying in the closed union of the given triangles."""
    centers, _ = _pole_arrays(A)
    found = []
    p = vertices[triangles]
    for i, c in enumerate(centers):
        v0, v1, v2 = p[:, 0], p[:, 1], p[:, 2]
        d = (v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (v1[:, 1] - v0[:, 1]) * (v2[:, 0] - v0[:, 0])
        l1 = ((c[0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (c[1] - v0[:, 1]) * (v2[:, 0] - v0[:, 0])) / d
        l2 = ((v1[:, 0] - v0[:, 0]) * (c[1] - v0[:, 1]) - (v1[:, 1] - v0[:, 1]) * (c[0] - v0[:, 0])) / d
        tol = -1e-12
        if np.any((l1 >= tol) & (l2 >= tol) & (1 - l1 - l2 >= tol)):
            found.append(i)
    return found


def gauge_scalar(A: ClosedPotential, mesh: TriMesh, region: np.ndarray) -> np.ndarray:
    """Scalar f with df = A on a simply connected set of triangles; NaN off the region.

    f is integrated along a breadth-first spanning tree of region edges from the lowest vertex.
    """
    region = np.asarray(region, dtype=np.int64).reshape(-1)
    if len(region) == 0:
        raise ContractError("region is empty")
    tris = mesh.triangles[region]
    edges = _region_edges(tris)
    used = np.unique(tris)
    euler = len(used) - len(edges) + len(tris)
    if euler != 1:
        raise TopologyError(f"region is not simply connected (Euler characteristic {euler})")
    if poles_in_triangles(A, mesh.vertices, tris):
        raise TopologyError("region contains a pole")

    n = mesh.n_vertices
    graph = coo_matrix(
        (np.ones(2 * len(edges)), (np.concatenate([edges[:, 0], edges[:, 1]]), np.concatenate([edges[:, 1], edges[:, 0]]))),
        shape=(n, n),
    ).tocsr()
    root = int(used[0])
    order, pred = breadth_first_order(graph, root, directed=False, return_predecessors=True)
    if len(order) != len(used):
        raise TopologyError("region is not connected")

    child = order[1:]
    parent = pred[child]
    steps = line_integral(A, mesh.vertices[parent], mesh.vertices[child])
    f = np.full(n, np.nan)
    f[root] = 0.0
    step_of = dict(zip(child.tolist(), steps.tolist()))
    for v in child.tolist():
        f[v] = f[pred[v]] + step_of[v]
    return f
