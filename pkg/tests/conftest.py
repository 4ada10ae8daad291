"""Shared fixtures: reference domains and potentials."""

import pytest

from fluxgap.config import get_settings
from fluxgap.core.executor import reset_executor
from fluxgap.models import ClosedPotential, PlanarDomain, disk, rectangle

from tests.helpers import flux_at


@pytest.fixture(autouse=True)
def fresh_settings():
    """Each test sees settings rebuilt from its own environment."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
    reset_executor()


@pytest.fixture
def annulus() -> PlanarDomain:
    return PlanarDomain(outer=disk((0.0, 0.0), 2.0), holes=(disk((0.0, 0.0), 1.0),))


@pytest.fixture
def square_frame() -> PlanarDomain:
    return PlanarDomain(outer=rectangle(-2, -2, 2, 2), holes=(rectangle(-1, -1, 1, 1),))


@pytest.fixture
def half_flux() -> ClosedPotential:
    return flux_at((0.0, 0.0), 0.5)
