"""Lower-bound formulas evaluated from geometric invariants, and the pass/fail report."""

import itertools
import math
from typing import Callable, Optional

from fluxgap.config import get_settings
from fluxgap.models import (
    BoundReport,
    BoundValue,
    Cell,
    ClosedPotential,
    EigenResult,
    Extrapolation,
    Invariants,
    PlanarDomain,
)
from fluxgap.services import geometry, partition, potential
from fluxgap.utils.logging import get_logger

logger = get_logger(__name__)

PI2 = math.pi**2


# --- Invariants ---


def _pole_widths(domain: PlanarDomain) -> tuple[float, float]:
    """Min and max over pairwise pole distances and pole-to-boundary distances."""
    poles = [h for h in domain.holes if h.kind == "point"]
    values = [math.dist(a.center, b.center) for a, b in itertools.combinations(poles, 2)]
    values += [geometry.boundary_gap(p, domain.outer) for p in poles]
    return min(values), max(values)


def _star_cosines(domain: PlanarDomain) -> tuple[list, list[float]]:
    if len(domain.holes) == 1:
        region = geometry.domain_geometry(domain)
        cell = Cell(index=0, region=region, perimeter=float(region.exterior.length), exact=True)
        return [partition.star_cosine(cell)], [cell.perimeter]
    found = partition.cells(domain)
    return [c.star for c in found], [c.perimeter for c in found]


def compute_invariants(domain: PlanarDomain, A: ClosedPotential, with_cells: bool = True) -> Invariants:
    """Every quantity the bound formulas read, computed once."""
    outer = domain.outer
    fluxes = potential.fluxes_by_hole(domain, A)
    all_points = bool(domain.holes) and all(h.kind == "point" for h in domain.holes)
    any_points = domain.has_poles
    data: dict = {
        "area": geometry.area(outer),
        "perimeter": geometry.perimeter(outer),
        "boundary_length": geometry.perimeter(outer)
        + sum(geometry.perimeter(h) for h in domain.holes if h.kind != "point"),
        "diameter": geometry.diameter(outer),
        "n_holes": len(domain.holes),
        "injectivity_radius": geometry.injectivity_radius(outer),
        "fluxes": fluxes,
        "gamma": min((geometry.flux_distance(f) for f in fluxes), default=0.0),
        "outer_smooth": outer.is_smooth,
        "all_points": all_points,
        "equal_disks": bool(domain.holes)
        and all(h.kind == "disk" for h in domain.holes)
        and max(h.radius for h in domain.holes) - min(h.radius for h in domain.holes) <= 1e-12,
    }
    if all_points:
        data["beta_P"], data["B_P"] = _pole_widths(domain)
    elif domain.holes:
        report = geometry.widths(domain)
        data.update(
            beta=report.beta,
            B=report.B,
            beta_lo=report.beta_lo,
            B_hi=report.B_hi,
            beta_tilde=report.beta_tilde,
        )
        if with_cells and not any_points:
            stars, perimeters = _star_cosines(domain)
            data.update(star_cosines=stars, cell_perimeters=perimeters)
    inv = Invariants(**data)
    logger.info(
        "Invariants computed",
        extra={"extra_data": inv.model_dump(exclude={"star_cosines", "cell_perimeters"})},
    )
    return inv


# --- Bound formulas ---


def _single(inv: Invariants) -> bool:
    return inv.n_holes == 1 and not inv.all_points and inv.beta_lo is not None


def _d(inv: Invariants) -> float:
    return geometry.flux_distance(inv.fluxes[0]) if inv.fluxes else 0.0


def bound_single_hole_width(inv: Invariants) -> BoundValue:
    """(4 pi^2 / |dF|^2) (beta / B)^2 d^2 for one convex hole."""
    ok = _single(inv)
    rhs = 4 * PI2 / inv.perimeter**2 * (inv.beta_lo / inv.B_hi) ** 2 * _d(inv) ** 2 if ok else 0.0
    return BoundValue(name="single_hole_width", rhs=rhs, applicable=ok, hypotheses={"one_convex_hole": ok})


def bound_single_hole_area(inv: Invariants) -> BoundValue:
    """(pi^2 / 8) |F|^2 / (|dF|^2 D^4) (beta / B) d^2; the D^2 variant is reported as stated_value."""
    ok = _single(inv)
    if not ok:
        return BoundValue(name="single_hole_area", rhs=0.0, applicable=False, hypotheses={"one_convex_hole": False})
    core = PI2 / 8 * inv.area**2 / inv.perimeter**2 * (inv.beta_lo / inv.B_hi) * _d(inv) ** 2
    return BoundValue(
        name="single_hole_area",
        rhs=core / inv.diameter**4,
        applicable=True,
        hypotheses={"one_convex_hole": True},
        stated_value=core / inv.diameter**2,
        note="stated_value uses D(F)^2 in place of D(F)^4",
    )


def bound_smooth_single_hole(inv: Invariants) -> BoundValue:
    """(pi^2 / |dF|^2) (beta / B) d^2 when the outer boundary is smooth and beta < Inj."""
    single = _single(inv)
    below_inj = single and inv.beta_lo < inv.injectivity_radius
    hyp = {"one_convex_hole": single, "smooth_outer": inv.outer_smooth, "beta_below_injectivity": below_inj}
    ok = all(hyp.values())
    rhs = PI2 / inv.perimeter**2 * (inv.beta_lo / inv.B_hi) * _d(inv) ** 2 if ok else 0.0
    return BoundValue(name="smooth_single_hole", rhs=rhs, applicable=ok, hypotheses=hyp)


def bound_multi_hole(inv: Invariants) -> BoundValue:
    """pi^2 / (2 (|dF| + 2 pi B)^2) (beta / B)^4 gamma^2 for any number of convex holes."""
    ok = inv.n_holes >= 1 and not inv.all_points and inv.beta_lo is not None
    rhs = 0.0
    if ok:
        rhs = PI2 / (2 * (inv.perimeter + 2 * math.pi * inv.B_hi) ** 2) * (inv.beta_lo / inv.B_hi) ** 4 * inv.gamma**2
    return BoundValue(name="multi_hole", rhs=rhs, applicable=ok, hypotheses={"convex_holes": ok})


def bound_punctured(inv: Invariants) -> BoundValue:
    """(4 pi^2 / |dOmega|^2) (beta(P) / B(P))^2 gamma^2 for a set of poles."""
    ok = inv.all_points and inv.beta_P is not None and inv.beta_P > 0
    rhs = 4 * PI2 / inv.boundary_length**2 * (inv.beta_P / inv.B_P) ** 2 * inv.gamma**2 if ok else 0.0
    return BoundValue(name="punctured", rhs=rhs, applicable=ok, hypotheses={"distinct_poles": ok})


def bound_equal_disks(inv: Invariants) -> BoundValue:
    """(4 pi^2 / |dF|^2) (beta / B)^2 gamma^2 for disk holes of one radius."""
    ok = inv.equal_disks and inv.beta_lo is not None
    rhs = 4 * PI2 / inv.perimeter**2 * (inv.beta_lo / inv.B_hi) ** 2 * inv.gamma**2 if ok else 0.0
    return BoundValue(name="equal_disks", rhs=rhs, applicable=ok, hypotheses={"equal_disks": ok})


def bound_starlike(inv: Invariants) -> BoundValue:
    """(4 pi^2 / |dF_j|^2) (beta_j m_j / B_j) d_j^2, minimized over cells (one cell for one hole)."""
    tol = get_settings().geometry_tol
    stars = inv.star_cosines
    ok = bool(stars) and not inv.all_points and all(s.m > tol for s in stars)
    hyp = {"star_shaped": ok}
    if not ok:
        return BoundValue(name="starlike", rhs=0.0, applicable=False, hypotheses=hyp)
    values = []
    for j, (star, perim) in enumerate(zip(stars, inv.cell_perimeters)):
        if len(stars) == 1:
            beta, B = inv.beta_lo, inv.B_hi
        else:
            beta, B = star.beta * (1 - tol), star.B * (1 + tol)
        d = geometry.flux_distance(inv.fluxes[j])
        values.append(4 * PI2 / perim**2 * (beta * (star.m - tol) / B) * d**2)
    return BoundValue(name="starlike", rhs=min(values), applicable=True, hypotheses=hyp)


BOUNDS: list[Callable[[Invariants], BoundValue]] = [
    bound_single_hole_width,
    bound_single_hole_area,
    bound_smooth_single_hole,
    bound_multi_hole,
    bound_punctured,
    bound_equal_disks,
    bound_starlike,
]


def evaluate_bounds(inv: Invariants) -> list[BoundValue]:
    return [f(inv) for f in BOUNDS]


# --- Report ---


def compose_report(
    domain: PlanarDomain,
    A: ClosedPotential,
    result: Optional[EigenResult] = None,
    extrapolation: Optional[Extrapolation] = None,
    rhs_scale: float = 1.0,
    invariants: Optional[Invariants] = None,
) -> BoundReport:
    """Evaluate every bound and compare against lambda_1 (extrapolated when available)."""
    inv = invariants or compute_invariants(domain, A)
    lam: Optional[float] = None
    if extrapolation is not None and extrapolation.extrapolated:
        lam = extrapolation.lambda_inf
    elif result is not None:
        lam = result.lambda1

    bounds = []
    for b in evaluate_bounds(inv):
        rhs = b.rhs * rhs_scale
        if not b.applicable:
            status, margin = "N/A", None
        elif lam is None:
            status, margin = "NOT_COMPUTED", None
        elif rhs == 0:
            status, margin = "PASS", None
        else:
            margin = lam / rhs
            status = "PASS" if margin >= 1 else "FAIL"
        bounds.append(b.model_copy(update={"rhs": rhs, "status": status, "margin": margin}))

    report = BoundReport(
        invariants=inv,
        bounds=bounds,
        lambda1=lam,
        h=result.h if result else None,
        mesher=result.mesher if result else None,
        residual=max(result.residuals) if result else None,
        extrapolation=extrapolation,
        rhs_scale=rhs_scale,
    )
    logger.info(
        "Bound report",
        extra={"extra_data": {"lambda1": lam, "status": {b.name: b.status for b in bounds}}},
    )
    return report
