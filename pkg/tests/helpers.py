"""Reference domains used across test modules."""

from fluxgap.models import ClosedPotential, PlanarDomain, Pole, rectangle


def omega(eps: float) -> PlanarDomain:
    """[-4, 4] x [0, 4] minus [-3, 3] x [eps, 2]: the hole sits eps above the outer bottom."""
    return PlanarDomain(outer=rectangle(-4, 0, 4, 4), holes=(rectangle(-3, eps, 3, 2),))


def flux_at(at: tuple[float, float], flux: float) -> ClosedPotential:
    return ClosedPotential(poles=(Pole(at=at, flux=flux),))
