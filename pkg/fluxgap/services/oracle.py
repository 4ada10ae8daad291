"""Radial shooting oracle for concentric annuli, independent of the finite element path."""

from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from fluxgap.config import get_settings
from fluxgap.core.errors import ContractError, OracleBracketError
from fluxgap.core.retry import retry_on_failure
from fluxgap.models import OracleMode, OracleResult
from fluxgap.utils.logging import get_logger

logger = get_logger(__name__)

_SCAN_POINTS = 64


def _shoot(lam: float, nu: float, r1: float, r2: float, rtol: float) -> float:
    """R'(r2) for -R'' - R'/r + (nu^2/r^2) R = lam R with R(r1) = 1, R'(r1) = 0."""

    def rhs(r: float, y: np.ndarray) -> list[float]:
        return [y[1], -y[1] / r + (nu * nu / (r * r) - lam) * y[0]]

    sol = solve_ivp(rhs, (r1, r2), [1.0, 0.0], method="RK45", rtol=rtol, atol=1e-12)
    if not sol.success:
        raise OracleBracketError(f"radial integration failed at lam={lam}: {sol.message}")
    return float(sol.y[1, -1])


def radial_eigenvalue(r1: float, r2: float, nu: float, rtol: Optional[float] = None) -> float:
    """Lowest Neumann eigenvalue of the radial problem with angular frequency nu."""
    settings = get_settings()
    rtol = rtol or settings.oracle_rtol
    if nu == 0:
        return 0.0
    upper0 = 1.5 * nu * nu / (r1 * r1) + 1.0

    def bracket(attempt: int) -> float:
        upper = upper0 * 4**attempt
        grid = np.linspace(0.0, upper, _SCAN_POINTS * (attempt + 1) + 1)
        prev_lam, prev_g = grid[0], _shoot(grid[0], nu, r1, r2, rtol)
        for lam in grid[1:]:
            g = _shoot(lam, nu, r1, r2, rtol)
            if prev_g == 0.0:
                return float(prev_lam)
            if prev_g * g < 0:
                return float(brentq(_shoot, prev_lam, lam, args=(nu, r1, r2, rtol), xtol=1e-14, rtol=4 * np.finfo(float).eps))
            prev_lam, prev_g = lam, g
        raise OracleBracketError(f"no sign change of R'(r2) on [0, {upper:.6g}] for nu={nu}")

    return retry_on_failure(bracket, max_attempts=settings.oracle_bracket_attempts, retry_on=(OracleBracketError,))


def annulus_oracle(r1: float, r2: float, phi: float, k_max: int = 3, rtol: Optional[float] = None) -> OracleResult:
    """Lowest eigenvalue of the concentric annulus with flux phi, minimized over angular modes k."""
    if not (0 < r1 < r2):
        raise ContractError(f"expected 0 < r1 < r2, got r1={r1}, r2={r2}")
    if k_max < 0:
        raise ContractError("k_max must be non-negative")
    center = round(phi)
    modes = []
    for k in range(center - k_max, center + k_max + 1):
        nu = abs(k - phi)
        modes.append(OracleMode(k=k, eigenvalue=radial_eigenvalue(r1, r2, nu, rtol)))
    best = min(modes, key=lambda m: (m.eigenvalue, abs(m.k - phi)))
    logger.info(
        "Annulus oracle",
        extra={"extra_data": {"r1": r1, "r2": r2, "phi": phi, "eigenvalue": best.eigenvalue, "mode": best.k}},
    )
    return OracleResult(r1=r1, r2=r2, phi=phi, eigenvalue=best.eigenvalue, mode=best.k, modes=modes)
