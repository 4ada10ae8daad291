"""Input validation and normalization utilities."""

import math
from typing import Any, Optional

import numpy as np

from fluxgap.core.errors import ShapeError


def parse_point(value: Any) -> tuple[float, float]:
    """Parse [x, y] into a finite float pair."""
    try:
        x, y = (float(c) for c in value)
    except (TypeError, ValueError) as e:
        raise ShapeError(f"expected a point [x, y], got {value!r}") from e
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ShapeError(f"point coordinates must be finite, got {value!r}")
    return (x, y)


def normalize_convex_polygon(
    vertices: Any, tol: Optional[float] = None
) -> tuple[tuple[float, float], ...]:
    """Dedupe, merge collinear edges, orient CCW and check strict convexity."""
    if tol is None:
        from fluxgap.config import get_settings

        tol = get_settings().convexity_tol
    if not vertices:
        raise ShapeError("polygon needs vertices")
    pts = [parse_point(v) for v in vertices]

    # Consecutive duplicates, including the closing vertex of a closed ring.
    deduped: list[tuple[float, float]] = []
    for p in pts:
        if not deduped or math.dist(p, deduped[-1]) > tol:
            deduped.append(p)
    while len(deduped) > 1 and math.dist(deduped[0], deduped[-1]) <= tol:
        deduped.pop()

    arr = np.asarray(deduped, dtype=float)
    if len(arr) >= 3:
        x, y = arr[:, 0], arr[:, 1]
        signed_area = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
        if signed_area < 0:
            arr = arr[::-1]

    changed = True
    while changed and len(arr) >= 3:
        changed = False
        prev = np.roll(arr, 1, axis=0)
        nxt = np.roll(arr, -1, axis=0)
        e1 = arr - prev
        e2 = nxt - arr
        cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        scale = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
        collinear = np.abs(cross) <= tol * np.maximum(scale, 1.0)
        forward = (e1 * e2).sum(axis=1) > 0
        if np.any(collinear & ~forward):
            raise ShapeError("polygon folds back on itself")
        if np.any(collinear):
            drop = int(np.flatnonzero(collinear)[0])
            arr = np.delete(arr, drop, axis=0)
            changed = True

    if len(arr) < 3:
        raise ShapeError("polygon needs at least 3 non-collinear vertices")

    prev = np.roll(arr, 1, axis=0)
    nxt = np.roll(arr, -1, axis=0)
    e1 = arr - prev
    e2 = nxt - arr
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(cross <= 0):
        raise ShapeError("polygon is not strictly convex")
    # Total turning of a simple convex polygon is exactly 2 pi.
    turning = np.arctan2(cross, (e1 * e2).sum(axis=1)).sum()
    if abs(turning - 2 * math.pi) > 1e-6:
        raise ShapeError("polygon is self-intersecting")
    return tuple((float(px), float(py)) for px, py in arr)
