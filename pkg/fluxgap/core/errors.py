"""Typed errors raised by the toolkit."""

from typing import Optional


class FluxgapError(ValueError):
    """Base class for every toolkit error."""


class ShapeError(FluxgapError):
    """Invalid convex shape description."""


class UnsupportedShapeError(ShapeError):
    """Operation not defined for this shape variant."""


class DomainError(FluxgapError):
    """Invalid planar domain (overlapping holes, hole outside outer shape, ...)."""


class NoInnerBoundaryError(DomainError):
    """Domain has no holes, so widths are undefined."""


class RayCastError(FluxgapError):
    """A ray failed to exit the domain."""


class PoleSingularityError(FluxgapError):
    """Evaluation point coincides with a pole."""


class TopologyError(FluxgapError):
    """Region is not simply connected or contains a pole."""


class MeshFormatError(FluxgapError):
    """Malformed mesh file."""


class MeshValidationError(FluxgapError):
    """Mesh violates conformity, orientation or tagging."""


class MeshResolutionError(FluxgapError):
    """Mesh spacing too coarse to resolve the domain topology."""


class PoleInsideMeshError(FluxgapError):
    """A pole lies inside the meshed region."""


class EigenSolverError(FluxgapError):
    """Eigensolver failed to converge."""

    def __init__(self, message: str, residual_history: Optional[list[list[float]]] = None):
        super().__init__(message)
        self.residual_history = residual_history or []


class ContractError(FluxgapError):
    """Caller violated an operation precondition."""


class OracleBracketError(FluxgapError):
    """Shooting oracle could not bracket an eigenvalue."""


class PartitionError(FluxgapError):
    """Partition construction or classification failed."""


class CellResolutionError(PartitionError):
    """Sampling resolution too coarse for a cell."""


class FluxMatchError(FluxgapError):
    """Poles do not match holes one to one."""


class ScenarioError(FluxgapError):
    """Invalid scenario description."""
