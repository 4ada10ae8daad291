"""Scenario loading, mesh ladders, sweeps and deterministic result files."""

import csv
import hashlib
import io
import json
import math
import time
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import ValidationError

import fluxgap
from fluxgap.config import get_settings
from fluxgap.core.errors import FluxgapError, ScenarioError
from fluxgap.core.executor import run_ordered
from fluxgap.models import (
    BoundReport,
    ClosedPotential,
    ConvexShape,
    EigenResult,
    Extrapolation,
    MeshSpec,
    PlanarDomain,
    RunRecord,
    Scenario,
    SpectralProblem,
    SweepPoint,
    TriMesh,
)
from fluxgap.services import bounds, mesh, solver
from fluxgap.utils.logging import get_logger

logger = get_logger(__name__)


# --- Loading ---


def read_json(path: Path) -> Any:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"{path}: {e.strerror}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: line {e.lineno}: {e.msg}") from e


def load_domain(path: str | Path) -> PlanarDomain:
    return PlanarDomain.model_validate(read_json(Path(path)))


def load_potential(path: str | Path) -> ClosedPotential:
    return ClosedPotential.model_validate(read_json(Path(path)))


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario JSON; domain and potential may be inline objects or paths relative to it."""
    path = Path(path)
    data = read_json(path)
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: scenario must be a JSON object")
    for key in ("domain", "potential"):
        if isinstance(data.get(key), str):
            data[key] = read_json(path.parent / data[key])
    return Scenario.model_validate(data)


def scenario_hash(scenario: Scenario) -> str:
    canonical = json.dumps(scenario.model_dump(mode="json", by_alias=True), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# --- Meshing and solving ---


def _axis_rectangle(shape: ConvexShape) -> Optional[tuple[float, float, float, float]]:
    if shape.kind != "polygon" or len(shape.vertices) != 4:
        return None
    v = np.asarray(shape.vertices)
    xs, ys = np.unique(v[:, 0]), np.unique(v[:, 1])
    if len(xs) != 2 or len(ys) != 2:
        return None
    return float(xs[0]), float(ys[0]), float(xs[1]), float(ys[1])


def build_mesh(domain: PlanarDomain, spec: MeshSpec, h: float) -> TriMesh:
    """Mesh the domain with the scenario's mesher at spacing h."""
    if spec.kind == "polar":
        if len(domain.holes) != 1 or domain.outer.kind != "disk" or domain.holes[0].kind != "disk":
            raise ScenarioError("polar mesher needs a disk with one disk hole")
        outer, hole = domain.outer, domain.holes[0]
        if math.dist(outer.center, hole.center) > 1e-12:
            raise ScenarioError("polar mesher needs concentric disks")
        nr, ntheta = mesh.polar_resolution(hole.radius, outer.radius, h)
        return mesh.mesh_polar_annulus(hole.radius, outer.radius, nr, ntheta, center=outer.center)
    if spec.kind == "rect_diff":
        outer = _axis_rectangle(domain.outer)
        inner = _axis_rectangle(domain.holes[0]) if len(domain.holes) == 1 else None
        if outer is None or inner is None:
            raise ScenarioError("rect_diff mesher needs an axis-parallel rectangle with one rectangular hole")
        return mesh.mesh_rect_diff(outer, inner, h, spec.grading, spec.extra_x, spec.extra_y)
    if spec.kind == "fitted":
        return mesh.mesh_fitted(domain, h)
    return mesh.mesh_staircase(domain, h)


def solve_levels(
    domain: PlanarDomain,
    potential: ClosedPotential,
    scenario: Scenario,
    seed: Optional[int] = None,
) -> tuple[list[EigenResult], Optional[Extrapolation]]:
    """Solve on the finest level, or on the whole ladder when extrapolating."""
    opts = scenario.solver
    seed = opts.seed if seed is None else seed
    ladder = scenario.mesh.ladder if scenario.extrapolate else scenario.mesh.ladder[-1:]

    def solve_at(h: float) -> EigenResult:
        m = build_mesh(domain, scenario.mesh, h)
        problem = SpectralProblem(mesh=m, potential=potential, discretization=opts.discretization)
        return solver.solve_problem(problem, k=opts.k, tol=opts.tol, seed=seed, method=opts.method)

    if scenario.extrapolate:
        ext, results = solver.refine_extrapolate(solve_at, ladder)
        return results, ext
    return [solve_at(ladder[0])], None


def verify_scenario(scenario: Scenario, seed: Optional[int] = None) -> BoundReport:
    results, ext = solve_levels(scenario.domain, scenario.potential, scenario, seed)
    return bounds.compose_report(
        scenario.domain, scenario.potential, results[-1], ext, rhs_scale=scenario.rhs_scale
    )


# --- Sweeps ---


def _move_hole_bottom(domain: PlanarDomain, gap: float) -> PlanarDomain:
    """Lift or lower the bottom side of the single rectangular hole so that it sits `gap` above the outer bottom."""
    if len(domain.holes) != 1 or _axis_rectangle(domain.holes[0]) is None:
        raise ScenarioError("epsilon sweeps need one axis-parallel rectangular hole")
    outer_bottom = min(y for _, y in _polygon_vertices(domain.outer))
    x0, y0, x1, y1 = _axis_rectangle(domain.holes[0])
    hole = ConvexShape.model_validate({"polygon": [[x0, outer_bottom + gap], [x1, outer_bottom + gap], [x1, y1], [x0, y1]]})
    return PlanarDomain(outer=domain.outer, holes=(hole,), pole_radius=domain.pole_radius)


def _polygon_vertices(shape: ConvexShape) -> list[tuple[float, float]]:
    if shape.kind not in ("polygon", "rounded"):
        raise ScenarioError("expected a polygonal outer shape")
    return list(shape.vertices)


def apply_sweep_value(scenario: Scenario, value: Optional[float]) -> tuple[PlanarDomain, ClosedPotential]:
    axis = scenario.sweep.axis
    domain, potential = scenario.domain, scenario.potential
    if value is None or axis == "none":
        return domain, potential
    if axis == "flux":
        return domain, potential.with_fluxes(value)
    if axis == "epsilon":
        return _move_hole_bottom(domain, value), potential
    return domain.with_pole_radius(value), potential


def run_point(scenario: Scenario, value: Optional[float], seed: Optional[int] = None) -> SweepPoint:
    """One sweep point; failures become a row instead of aborting the sweep."""
    try:
        domain, potential = apply_sweep_value(scenario, value)
        results, ext = solve_levels(domain, potential, scenario, seed)
        report = bounds.compose_report(domain, potential, results[-1], ext, rhs_scale=scenario.rhs_scale)
    except (FluxgapError, ValidationError) as e:
        logger.warning("Sweep point failed", extra={"extra_data": {"value": value, "error": str(e)[:200]}})
        return SweepPoint(value=value, status="failed", error=str(e).splitlines()[0])

    finest = results[-1]
    applicable = [b for b in report.bounds if b.applicable]
    point = SweepPoint(
        value=value,
        lambda1=report.lambda1,
        residual=max(finest.residuals),
        h=finest.h,
        mesher=finest.mesher,
        rhs={b.name: b.rhs for b in applicable},
        margins={b.name: b.margin for b in applicable if b.margin is not None},
    )
    logger.info("Sweep point", extra={"extra_data": {"value": value, "lambda1": point.lambda1}})
    return point


def _with_symmetry(points: list[SweepPoint]) -> list[SweepPoint]:
    """Attach |lambda(phi) - lambda(1 - phi)| where both fluxes were swept."""
    by_value = {round(p.value, 12): p for p in points if p.value is not None and p.lambda1 is not None}
    out = []
    for p in points:
        mirror = by_value.get(round(1.0 - p.value, 12)) if p.value is not None else None
        if mirror is not None and p.lambda1 is not None:
            p = p.model_copy(update={"symmetry_residual": abs(p.lambda1 - mirror.lambda1)})
        out.append(p)
    return out


def run_sweep(scenario: Scenario, jobs: Optional[int] = None, seed: Optional[int] = None) -> RunRecord:
    """Run every sweep point (in parallel when jobs > 1) and gather them sorted by axis value."""
    start = time.perf_counter()
    values: list[Optional[float]] = list(scenario.sweep.values) if scenario.sweep.axis != "none" else [None]
    points = run_ordered(lambda v: run_point(scenario, v, seed), values, jobs)
    points.sort(key=lambda p: (p.value is None, p.value if p.value is not None else 0.0))
    if scenario.sweep.axis == "flux":
        points = _with_symmetry(points)
    elapsed = time.perf_counter() - start
    logger.info("Sweep finished", extra={"extra_data": {"points": len(points), "elapsed": elapsed}})
    return RunRecord(
        scenario_hash=scenario_hash(scenario),
        scenario_name=scenario.name,
        axis=scenario.sweep.axis,
        points=points,
        versions=versions(),
        timing={"total_seconds": elapsed} if get_settings().persist_timing else None,
    )


def versions() -> dict[str, str]:
    import pydantic
    import scipy
    import shapely

    return {
        "fluxgap": fluxgap.__version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "shapely": shapely.__version__,
        "pydantic": pydantic.VERSION,
    }


# --- Output files ---


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(record: RunRecord) -> str:
    """CSV with one row per sweep point; bound columns in sorted name order."""
    names = sorted({name for p in record.points for name in p.rhs})
    header = ["value", "status", "lambda1", "residual", "h", "mesher", "symmetry_residual"]
    header += [f"rhs_{n}" for n in names] + [f"margin_{n}" for n in names] + ["error"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for p in record.points:
        row = [p.value, p.status, p.lambda1, p.residual, p.h, p.mesher, p.symmetry_residual]
        row += [p.rhs.get(n) for n in names] + [p.margins.get(n) for n in names] + [p.error]
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def to_json(model: Any) -> str:
    return model.model_dump_json(indent=2, by_alias=True) + "\n"
