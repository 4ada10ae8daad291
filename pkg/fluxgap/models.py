"""Pydantic models for domain descriptions, meshes, solver results and reports."""

import math
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from fluxgap.core.errors import DomainError, ShapeError
from fluxgap.utils.validators import normalize_convex_polygon, parse_point

Point = tuple[float, float]
Segment = tuple[Point, Point]

OUTER_TAG = -1


# --- Geometry ---


class ConvexShape(BaseModel):
    """Convex planar shape: polygon, disk, point pole, or polygon rounded by a disk."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["polygon", "disk", "point", "rounded"]
    vertices: tuple[Point, ...] = ()
    center: Optional[Point] = None
    radius: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def parse_compact_form(cls, data: Any) -> Any:
        """Accept the JSON forms {"polygon": [...]}, {"disk": {...}}, {"point": [...]}, {"rounded": {...}}."""
        if not isinstance(data, dict):
            return data
        if "polygon" in data:
            data = {"kind": "polygon", "vertices": data["polygon"]}
        elif "disk" in data:
            disk = data["disk"] or {}
            data = {
                "kind": "disk",
                "center": disk.get("center"),
                "radius": disk.get("r", disk.get("radius")),
            }
        elif "point" in data:
            data = {"kind": "point", "center": data["point"]}
        elif "rounded" in data:
            rounded = data["rounded"] or {}
            data = {
                "kind": "rounded",
                "vertices": rounded.get("core", rounded.get("vertices")),
                "radius": rounded.get("r", rounded.get("radius")),
            }
        else:
            data = dict(data)

        kind = data.get("kind")
        if kind in ("polygon", "rounded"):
            data["vertices"] = normalize_convex_polygon(data.get("vertices"))
        if data.get("center") is not None:
            data["center"] = parse_point(data["center"])
        return data

    @model_validator(mode="after")
    def check_variant(self) -> "ConvexShape":
        if self.kind in ("disk", "point") and self.center is None:
            raise ShapeError(f"{self.kind} requires a center")
        if self.kind in ("disk", "rounded") and not (self.radius > 0 and math.isfinite(self.radius)):
            raise ShapeError(f"{self.kind} radius must be positive, got {self.radius}")
        return self

    @property
    def is_smooth(self) -> bool:
        return self.kind in ("disk", "rounded")

    @property
    def anchor(self) -> Point:
        """A point strictly inside the shape (its center or vertex centroid)."""
        if self.center is not None:
            return self.center
        arr = np.asarray(self.vertices)
        return (float(arr[:, 0].mean()), float(arr[:, 1].mean()))

    def to_json(self) -> dict[str, Any]:
        """Compact JSON form."""
        if self.kind == "polygon":
            return {"polygon": [list(v) for v in self.vertices]}
        if self.kind == "disk":
            return {"disk": {"center": list(self.center), "r": self.radius}}
        if self.kind == "point":
            return {"point": list(self.center)}
        return {"rounded": {"core": [list(v) for v in self.vertices], "r": self.radius}}

    def transformed(self, angle: float = 0.0, shift: Point = (0.0, 0.0), scale: float = 1.0) -> "ConvexShape":
        """Image under x -> scale * R(angle) x + shift."""
        c, s = math.cos(angle), math.sin(angle)

        def move(p: Point) -> list[float]:
            return [scale * (c * p[0] - s * p[1]) + shift[0], scale * (s * p[0] + c * p[1]) + shift[1]]

        data: dict[str, Any] = {"kind": self.kind, "radius": self.radius * scale}
        if self.vertices:
            data["vertices"] = [move(v) for v in self.vertices]
        if self.center is not None:
            data["center"] = move(self.center)
        return ConvexShape.model_validate(data)


def disk(center: Point, radius: float) -> ConvexShape:
    return ConvexShape(kind="disk", center=center, radius=radius)


def polygon(vertices: list[Point]) -> ConvexShape:
    return ConvexShape.model_validate({"polygon": vertices})


def rectangle(x0: float, y0: float, x1: float, y1: float) -> ConvexShape:
    return polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def pole(center: Point) -> ConvexShape:
    return ConvexShape(kind="point", center=center)


class PlanarDomain(BaseModel):
    """Outer convex shape minus disjoint convex holes or point poles."""

    model_config = ConfigDict(frozen=True)

    outer: ConvexShape
    holes: tuple[ConvexShape, ...] = ()
    pole_radius: Optional[float] = None

    @field_validator("holes", mode="before")
    @classmethod
    def normalize_holes(cls, v: Any) -> Any:
        """Handle null holes."""
        return () if v is None else v

    @model_validator(mode="after")
    def check_layout(self) -> "PlanarDomain":
        if self.outer.kind == "point":
            raise DomainError("outer shape cannot be a point")
        if any(h.kind == "point" for h in self.holes):
            if self.pole_radius is None or not self.pole_radius > 0:
                raise DomainError("pole_radius must be positive when a hole is a point")
        from fluxgap.services.geometry import check_domain_layout

        check_domain_layout(self.outer, self.realized_holes())
        return self

    def realized_holes(self) -> list[ConvexShape]:
        """Holes with point poles replaced by disks of radius pole_radius."""
        return [
            disk(h.center, self.pole_radius) if h.kind == "point" else h
            for h in self.holes
        ]

    @property
    def has_poles(self) -> bool:
        return any(h.kind == "point" for h in self.holes)

    def with_pole_radius(self, delta: float) -> "PlanarDomain":
        return PlanarDomain(outer=self.outer, holes=self.holes, pole_radius=delta)

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "outer": self.outer.to_json(),
            "holes": [h.to_json() for h in self.holes],
        }
        if self.pole_radius is not None:
            data["pole_radius"] = self.pole_radius
        return data

    def transformed(self, angle: float = 0.0, shift: Point = (0.0, 0.0), scale: float = 1.0) -> "PlanarDomain":
        return PlanarDomain(
            outer=self.outer.transformed(angle, shift, scale),
            holes=tuple(h.transformed(angle, shift, scale) for h in self.holes),
            pole_radius=None if self.pole_radius is None else self.pole_radius * scale,
        )


class NormalCone(BaseModel):
    """Wedge of outward directions at a boundary vertex."""

    vertex: Point
    dir_lo: Point
    dir_hi: Point
    angle: float
    degenerate: bool = False


class DistanceResult(BaseModel):
    """Distance from a point to a shape with the gradient of the distance function."""

    distance: float
    gradient: Optional[Point]
    inside: bool = False
    degenerate: bool = False


class WidthReport(BaseModel):
    """Minimal and maximal orthogonal-ray widths of a domain."""

    beta: float
    B: float
    beta_ray: Segment
    B_ray: Segment
    beta_tilde: float
    beta_lo: float
    B_hi: float
    n_samples: int
    n_cone_samples: int
    n_rays: int = 0
    termination: Literal["first_exit", "outer_hit"] = "first_exit"
    B_literal: Optional[float] = None  # sup of beta(p); reported only

    @model_validator(mode="after")
    def check_order(self) -> "WidthReport":
        if not (self.beta > 0 and self.beta <= self.B * (1 + 1e-12)):
            raise ValueError(f"expected 0 < beta <= B, got beta={self.beta}, B={self.B}")
        return self


class GeometryReport(BaseModel):
    """Invariant table of a planar domain."""

    area: float
    perimeter: float
    diameter: float
    boundary_length: float
    hole_perimeters: list[float] = Field(default_factory=list)
    injectivity_radius: float
    widths: Optional[WidthReport] = None


# --- Potential ---


class Pole(BaseModel):
    """Aharonov-Bohm pole with its flux."""

    model_config = ConfigDict(frozen=True)

    at: Point
    flux: float

    @field_validator("at", mode="before")
    @classmethod
    def normalize_at(cls, v: Any) -> Point:
        return parse_point(v)

    @field_validator("flux")
    @classmethod
    def check_flux(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("flux must be finite")
        return v


class PolynomialGauge(BaseModel):
    """Exact part df with f = c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2."""

    model_config = ConfigDict(frozen=True)

    coefficients: tuple[float, float, float, float, float, float]

    @model_validator(mode="before")
    @classmethod
    def accept_list(cls, data: Any) -> Any:
        if isinstance(data, (list, tuple)):
            return {"coefficients": tuple(data)}
        return data

    def transformed(self, angle: float = 0.0, shift: Point = (0.0, 0.0), scale: float = 1.0) -> "PolynomialGauge":
        """Gauge g with g(T x) = f(x) for T x = scale * R(angle) x + shift."""
        c0, c1, c2, c3, c4, c5 = self.coefficients
        c, s = math.cos(angle), math.sin(angle)
        # x = P (y - shift) with P = R^T / scale
        P = np.array([[c, s], [-s, c]]) / scale
        Q = P.T @ np.array([[c3, 0.5 * c4], [0.5 * c4, c5]]) @ P
        g = P.T @ np.array([c1, c2])
        b = np.asarray(shift, dtype=float)
        linear = g - 2 * Q @ b
        constant = c0 - g @ b + b @ Q @ b
        return PolynomialGauge(
            coefficients=(
                float(constant),
                float(linear[0]),
                float(linear[1]),
                float(Q[0, 0]),
                float(2 * Q[0, 1]),
                float(Q[1, 1]),
            )
        )


class ClosedPotential(BaseModel):
    """Sum of pole potentials with prescribed fluxes, plus an optional exact part."""

    model_config = ConfigDict(frozen=True)

    poles: tuple[Pole, ...] = ()
    gauge: Optional[PolynomialGauge] = None

    @field_validator("poles", mode="before")
    @classmethod
    def normalize_poles(cls, v: Any) -> Any:
        """Handle null poles."""
        return () if v is None else v

    @property
    def fluxes(self) -> list[float]:
        return [p.flux for p in self.poles]

    @property
    def all_integer(self) -> bool:
        return all(float(p.flux).is_integer() for p in self.poles)

    def with_fluxes(self, flux: float) -> "ClosedPotential":
        return ClosedPotential(
            poles=tuple(Pole(at=p.at, flux=flux) for p in self.poles), gauge=self.gauge
        )

    def transformed(self, angle: float = 0.0, shift: Point = (0.0, 0.0), scale: float = 1.0) -> "ClosedPotential":
        c, s = math.cos(angle), math.sin(angle)
        poles = tuple(
            Pole(
                at=(scale * (c * p.at[0] - s * p.at[1]) + shift[0], scale * (s * p.at[0] + c * p.at[1]) + shift[1]),
                flux=p.flux,
            )
            for p in self.poles
        )
        gauge = None if self.gauge is None else self.gauge.transformed(angle, shift, scale)
        return ClosedPotential(poles=poles, gauge=gauge)

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {"poles": [{"at": list(p.at), "flux": p.flux} for p in self.poles]}
        if self.gauge is not None:
            data["gauge"] = list(self.gauge.coefficients)
        return data


# --- Mesh ---


class TriMesh(BaseModel):
    """Conforming triangulation with tagged boundary edges.

    Tags: -1 is the outer boundary, j >= 0 is hole j. Arrays are read-only after construction.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    h: float = 0.0
    mesher: str = "imported"

    @model_validator(mode="before")
    @classmethod
    def coerce_arrays(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        vertices = np.ascontiguousarray(data["vertices"], dtype=float).reshape(-1, 2)
        triangles = np.ascontiguousarray(data["triangles"], dtype=np.int64).reshape(-1, 3)
        edges = np.ascontiguousarray(data.get("boundary_edges", []), dtype=np.int64).reshape(-1, 2)
        tags = np.ascontiguousarray(data.get("boundary_tags", []), dtype=np.int64).reshape(-1)
        if len(tags) != len(edges):
            raise ValueError("boundary_edges and boundary_tags differ in length")
        for arr in (vertices, triangles, edges, tags):
            arr.setflags(write=False)
        data.update(vertices=vertices, triangles=triangles, boundary_edges=edges, boundary_tags=tags)
        if not data.get("h"):
            data["h"] = _max_edge_length(vertices, triangles)
        return data

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_holes(self) -> int:
        return int(self.boundary_tags.max()) + 1 if len(self.boundary_tags) else 0

    @staticmethod
    def tag_name(tag: int) -> str:
        return "outer" if tag == OUTER_TAG else f"hole:{tag}"


def _max_edge_length(vertices: np.ndarray, triangles: np.ndarray) -> float:
    if len(triangles) == 0:
        return 0.0
    p = vertices[triangles]
    lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
    return float(lengths.max())


class MeshQuality(BaseModel):
    """Mesh quality report."""

    min_angle_deg: float
    h: float
    n_vertices: int
    n_triangles: int
    n_boundary_edges: int
    untagged_edges: int
    euler_characteristic: int
    area: float

    @property
    def tags_complete(self) -> bool:
        return self.untagged_edges == 0


# --- Solver ---


class SpectralProblem(BaseModel):
    """Magnetic Neumann eigenproblem on a mesh."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mesh: TriMesh
    potential: ClosedPotential
    discretization: Literal["gauge", "quadrature"] = "gauge"


class EigenResult(BaseModel):
    """Lowest eigenpairs of the discrete problem."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    eigenvalues: list[float]
    residuals: list[float]
    dof: int
    h: float = 0.0
    iterations: int = 0
    exact_zero: bool = False
    method: str = "shift_invert"
    discretization: str = "gauge"
    mesher: str = ""
    vectors: Optional[np.ndarray] = Field(default=None, exclude=True, repr=False)

    @field_validator("eigenvalues")
    @classmethod
    def check_sorted(cls, v: list[float]) -> list[float]:
        if any(b < a for a, b in zip(v, v[1:])):
            raise ValueError("eigenvalues must be ascending")
        return v

    @property
    def lambda1(self) -> float:
        return self.eigenvalues[0]


class Extrapolation(BaseModel):
    """Richardson extrapolation over a three-level refinement."""

    lambda_inf: float
    order: Optional[float]
    levels: list[float]
    hs: list[float]
    extrapolated: bool
    flags: list[str] = Field(default_factory=list)


class OracleMode(BaseModel):
    k: int
    eigenvalue: float


class OracleResult(BaseModel):
    """Lowest eigenvalue of a concentric annulus from the radial shooting oracle."""

    r1: float
    r2: float
    phi: float
    eigenvalue: float
    mode: int
    modes: list[OracleMode]


# --- Partition ---


class AnnulusPiece(BaseModel):
    """Annular piece {rho1 < k beta} minus {rho1 <= (k-1) beta, rho2 > beta} of a one-hole domain."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int
    beta: float
    outer_region: Any  # shapely Polygon realizing F_k
    inner_region: Any  # shapely Polygon realizing G_k
    widths: Optional[WidthReport] = None
    outer_perimeter: float = 0.0

    @property
    def region(self) -> Any:
        return self.outer_region.difference(self.inner_region)


class Wedge(BaseModel):
    """Classified vertex of a piece's inner boundary."""

    vertex: Point
    kind: Literal[0, 1, 2]
    cone_angle: float
    B_p: float
    ratio: float
    target: float

    @property
    def satisfied(self) -> bool:
        return self.ratio >= self.target


class EquidistantCurve(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    points: np.ndarray
    max_residual: float
    line_residual: Optional[float] = None


class StarCosine(BaseModel):
    """Minimal cosine between orthogonal rays and the outer normal of a cell."""

    m: float
    beta: float
    B: float
    n_rays: int


class Cell(BaseModel):
    """Region of points closer to hole j than to any other hole."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int
    region: Any  # shapely Polygon with one interior ring (the hole)
    gamma: dict[int, float] = Field(default_factory=dict)
    perimeter: float
    exact: bool
    star: Optional[StarCosine] = None


class PartitionCheck(BaseModel):
    """Numerical check of the partition eigenvalue inequality."""

    kind: Literal["overlapping", "disjoint"]
    lambda_omega: float
    piece_lambdas: list[float]
    n: int
    best_index: int
    margin: float
    tolerance: float
    holds: bool


# --- Bounds ---


class Invariants(BaseModel):
    """Geometric and flux invariants feeding the bound formulas."""

    area: float
    perimeter: float
    boundary_length: float
    diameter: float
    n_holes: int
    beta: Optional[float] = None
    B: Optional[float] = None
    beta_lo: Optional[float] = None
    B_hi: Optional[float] = None
    beta_tilde: Optional[float] = None
    injectivity_radius: float = 0.0
    fluxes: list[float] = Field(default_factory=list)
    gamma: float = 0.0
    beta_P: Optional[float] = None
    B_P: Optional[float] = None
    outer_smooth: bool = False
    all_points: bool = False
    equal_disks: bool = False
    star_cosines: list[StarCosine] = Field(default_factory=list)
    cell_perimeters: list[float] = Field(default_factory=list)


class BoundValue(BaseModel):
    """One bound evaluated from invariants."""

    name: str
    rhs: float
    applicable: bool
    hypotheses: dict[str, bool] = Field(default_factory=dict)
    stated_value: Optional[float] = None  # variant coefficient reported alongside, never used for PASS
    margin: Optional[float] = None
    status: Literal["PASS", "FAIL", "N/A", "NOT_COMPUTED"] = "NOT_COMPUTED"
    note: str = ""


class BoundReport(BaseModel):
    """All bounds for one domain/potential pair against the computed eigenvalue."""

    invariants: Invariants
    bounds: list[BoundValue]
    lambda1: Optional[float] = None
    h: Optional[float] = None
    mesher: Optional[str] = None
    residual: Optional[float] = None
    extrapolation: Optional[Extrapolation] = None
    rhs_scale: float = 1.0

    @property
    def passed(self) -> bool:
        return all(b.status != "FAIL" for b in self.bounds)


# --- Harness ---


class MeshSpec(BaseModel):
    """Mesher choice and resolution ladder."""

    kind: Literal["polar", "rect_diff", "fitted", "staircase"]
    ladder: list[float] = Field(min_length=1)
    grading: float = 1.0
    extra_x: list[float] = Field(default_factory=list)  # rect_diff grid lines
    extra_y: list[float] = Field(default_factory=list)

    @field_validator("ladder")
    @classmethod
    def check_ladder(cls, v: list[float]) -> list[float]:
        if any(h <= 0 for h in v):
            raise ValueError("mesh sizes must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("resolution ladder must be strictly decreasing")
        return v


class SolverOptions(BaseModel):
    tol: float = 1e-8
    seed: int = 0x5EED
    k: int = Field(default=1, ge=1)
    method: Literal["shift_invert", "lobpcg"] = "shift_invert"
    discretization: Literal["gauge", "quadrature"] = "gauge"


class SweepSpec(BaseModel):
    axis: Literal["flux", "epsilon", "delta", "none"] = "none"
    values: list[float] = Field(default_factory=list)

    @field_validator("values")
    @classmethod
    def sort_values(cls, v: list[float]) -> list[float]:
        if not all(math.isfinite(x) for x in v):
            raise ValueError("sweep grid must be finite")
        return sorted(v)


class OutputSpec(BaseModel):
    csv: Optional[str] = None
    json_path: Optional[str] = Field(default=None, alias="json")
    svg: Optional[str] = None

    model_config = ConfigDict(populate_by_name=True)


class Scenario(BaseModel):
    """Experiment description loaded from one JSON document."""

    name: str = "scenario"
    domain: PlanarDomain
    potential: ClosedPotential
    mesh: MeshSpec
    solver: SolverOptions = Field(default_factory=SolverOptions)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    outputs: OutputSpec = Field(default_factory=OutputSpec)
    extrapolate: bool = False
    rhs_scale: float = 1.0


class SweepPoint(BaseModel):
    """One row of a sweep."""

    value: Optional[float] = None
    status: Literal["ok", "failed"] = "ok"
    lambda1: Optional[float] = None
    residual: Optional[float] = None
    h: Optional[float] = None
    mesher: str = ""
    rhs: dict[str, float] = Field(default_factory=dict)
    margins: dict[str, float] = Field(default_factory=dict)
    symmetry_residual: Optional[float] = None
    error: Optional[str] = None


class RunRecord(BaseModel):
    """Persisted result of one scenario run."""

    scenario_hash: str
    scenario_name: str
    axis: str
    points: list[SweepPoint]
    versions: dict[str, str]
    timing: Optional[dict[str, float]] = None
