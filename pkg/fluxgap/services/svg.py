"""Hand-written SVG figures of domains, partition pieces and cells."""

from typing import Iterable, Optional, Sequence

import numpy as np

from fluxgap.config import get_settings
from fluxgap.models import AnnulusPiece, Cell, EquidistantCurve, PlanarDomain, Wedge
from fluxgap.services import geometry

PALETTE = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#ff9da7"]


class Canvas:
    """Square viewport with a y-up auto-fit transform onto [margin, size - margin]."""

    def __init__(self, bounds: tuple[float, float, float, float], size: Optional[int] = None, margin: float = 20.0):
        self.size = size or get_settings().svg_size
        x0, y0, x1, y1 = bounds
        span = max(x1 - x0, y1 - y0, 1e-12)
        self.scale = (self.size - 2 * margin) / span
        self.x0, self.y1 = x0, y1
        self.margin = margin
        self.items: list[str] = []

    def xy(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.stack(
            [self.margin + (pts[:, 0] - self.x0) * self.scale, self.margin + (self.y1 - pts[:, 1]) * self.scale], axis=1
        )

    def _path(self, rings: Iterable[np.ndarray]) -> str:
        parts = []
        for ring in rings:
            p = self.xy(np.asarray(ring)[:, :2])
            parts.append("M" + " L".join(f"{x:.3f},{y:.3f}" for x, y in p) + " Z")
        return " ".join(parts)

    def polygon(self, geom, fill: str = "none", stroke: str = "#333", opacity: float = 1.0, width: float = 1.0) -> None:
        for g in getattr(geom, "geoms", [geom]):
            if g.is_empty or g.geom_type != "Polygon":
                continue
            rings = [np.asarray(g.exterior.coords)] + [np.asarray(r.coords) for r in g.interiors]
            self.items.append(
                f'<path d="{self._path(rings)}" fill="{fill}" fill-opacity="{opacity}" '
                f'stroke="{stroke}" stroke-width="{width}" fill-rule="evenodd"/>'
            )

    def polyline(self, pts: np.ndarray, stroke: str = "#000", width: float = 1.5, dash: str = "") -> None:
        p = self.xy(pts)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        coords = " ".join(f"{x:.3f},{y:.3f}" for x, y in p)
        self.items.append(f'<polyline points="{coords}" fill="none" stroke="{stroke}" stroke-width="{width}"{dash_attr}/>')

    def dot(self, pt: Sequence[float], color: str = "#000", r: float = 3.0) -> None:
        x, y = self.xy(np.asarray(pt))[0]
        self.items.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{r}" fill="{color}"/>')

    def text(self, pt: Sequence[float], label: str, size: int = 14) -> None:
        x, y = self.xy(np.asarray(pt))[0]
        self.items.append(f'<text x="{x:.3f}" y="{y:.3f}" font-size="{size}" font-family="sans-serif">{label}</text>')

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.size}" height="{self.size}" '
            f'viewBox="0 0 {self.size} {self.size}">'
        )
        return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *self.items, "</svg>"]) + "\n"


def render_partition(
    domain: PlanarDomain,
    pieces: Sequence[AnnulusPiece] = (),
    cells: Sequence[Cell] = (),
    curves: Sequence[EquidistantCurve] = (),
    wedges: Sequence[Wedge] = (),
) -> str:
    """Domain outline with pieces (outer-to-inner, translucent), cells, equidistant curves and wedges."""
    omega = geometry.domain_geometry(domain)
    canvas = Canvas(omega.bounds)
    for piece in sorted(pieces, key=lambda p: -p.index):
        color = PALETTE[(piece.index - 1) % len(PALETTE)]
        canvas.polygon(piece.region, fill=color, opacity=0.35, stroke=color)
        canvas.text(piece.region.representative_point().coords[0], f"{piece.index}")
    for cell in cells:
        color = PALETTE[cell.index % len(PALETTE)]
        canvas.polygon(cell.region, fill=color, opacity=0.35, stroke=color)
        canvas.text(cell.region.representative_point().coords[0], f"F{cell.index}")
    for curve in curves:
        canvas.polyline(curve.points, dash="6,4")
    for w in wedges:
        canvas.dot(w.vertex, color="#d62728" if w.kind == 2 else "#1f77b4")
    canvas.polygon(omega, stroke="#000", width=2.0)
    return canvas.render()
