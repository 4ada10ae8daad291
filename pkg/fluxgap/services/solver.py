"""Assembly and solution of the discrete magnetic Neumann eigenproblem."""

import math
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix, csr_matrix, diags
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, lobpcg, splu

from fluxgap.config import get_settings
from fluxgap.core.errors import ContractError, EigenSolverError, PoleInsideMeshError
from fluxgap.core.retry import retry_on_failure
from fluxgap.models import EigenResult, Extrapolation, SpectralProblem, TriMesh
from fluxgap.services import potential
from fluxgap.utils.logging import get_logger

logger = get_logger(__name__)

# Basis values at the three edge midpoints; edge k joins local vertices k and k+1.
_MIDPOINT_BASIS = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])

# Dense fallback for meshes too small for ARPACK.
_DENSE_LIMIT = 64


# --- Assembly ---


def _element_geometry(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Opposite-edge vectors, areas and P1 gradients per triangle."""
    p = mesh.vertices[mesh.triangles]
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    area = 0.5 * (e[:, 1, 0] * e[:, 2, 1] - e[:, 1, 1] * e[:, 2, 0])
    grads = np.stack([-e[:, :, 1], e[:, :, 0]], axis=2) / (2 * area[:, None, None])
    return e, area, grads


def _scatter(mesh: TriMesh, local: np.ndarray) -> csr_matrix:
    n = mesh.n_vertices
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    # coo -> csr sums duplicates in index order, so the reduction is deterministic.
    return coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _edge_phases(problem: SpectralProblem) -> np.ndarray:
    """Integral of A along every local edge a -> b, shape (triangles, 3, 3)."""
    tri = problem.mesh.triangles
    pairs = np.stack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]], axis=1).reshape(-1, 2)
    key = np.sort(pairs, axis=1)
    unique, inverse = np.unique(key, axis=0, return_inverse=True)
    v = problem.mesh.vertices
    per_edge = potential.line_integral(problem.potential, v[unique[:, 0]], v[unique[:, 1]])
    sign = np.where(pairs[:, 0] == key[:, 0], 1.0, -1.0)
    theta = (sign * per_edge[inverse.reshape(-1)]).reshape(-1, 3)

    out = np.zeros((len(tri), 3, 3))
    for k, (a, b) in enumerate([(0, 1), (1, 2), (2, 0)]):
        out[:, a, b] = theta[:, k]
        out[:, b, a] = -theta[:, k]
    return out


def _check_poles(problem: SpectralProblem) -> None:
    mesh = problem.mesh
    inside = potential.poles_in_triangles(problem.potential, mesh.vertices, mesh.triangles)
    if inside:
        raise PoleInsideMeshError(f"pole at {problem.potential.poles[inside[0]].at} lies inside the mesh")
    factor = get_settings().pole_warning_factor
    for pole in problem.potential.poles:
        gap = float(np.min(np.linalg.norm(mesh.vertices - np.asarray(pole.at), axis=1)))
        if gap < factor * mesh.h:
            logger.warning(
                "Pole close to the meshed region",
                extra={"extra_data": {"pole": pole.at, "distance": gap, "h": mesh.h}},
            )


def assemble(problem: SpectralProblem) -> tuple[csr_matrix, csr_matrix]:
    """Hermitian stiffness K of the magnetic form and the real consistent mass matrix M."""
    mesh = problem.mesh
    _check_poles(problem)
    e, area, grads = _element_geometry(mesh)
    stiffness = np.einsum("mai,mbi->mab", e, e) / (4 * area[:, None, None])
    mass = (area[:, None, None] / 12.0) * (np.ones((3, 3)) + np.eye(3))

    if not problem.potential.poles and problem.potential.gauge is None:
        local = stiffness.astype(complex)
    elif problem.discretization == "gauge":
        local = stiffness * np.exp(-1j * _edge_phases(problem))
    else:
        p = mesh.vertices[mesh.triangles]
        mids = 0.5 * (p + np.roll(p, -1, axis=1))
        A = potential.evaluate_many(problem.potential, mids.reshape(-1, 2)).reshape(-1, 3, 2)
        ag = np.einsum("mki,mbi->mkb", A, grads)
        w = (area / 3.0)[:, None, None]
        cross = np.einsum("ka,mkb->mab", _MIDPOINT_BASIS, ag)
        a2 = (A * A).sum(axis=2)
        local = (
            stiffness
            + 1j * w * (cross - cross.transpose(0, 2, 1))
            + w * np.einsum("mk,ka,kb->mab", a2, _MIDPOINT_BASIS, _MIDPOINT_BASIS)
        )
    K = _scatter(mesh, local)
    M = _scatter(mesh, mass)
    return K, M


def dump_matrices(K: csr_matrix, M: csr_matrix, path: str | Path) -> None:
    """Coordinate-format text dump: a header per matrix, then 'row col re im' lines."""
    lines = ["# fluxgap matrices: sections 'K n nnz' and 'M n nnz', entries 'row col re im'"]
    for name, mat in (("K", K), ("M", M)):
        coo = mat.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines.append(f"{name} {mat.shape[0]} {coo.nnz}")
        data = coo.data.astype(complex)
        for i in order:
            lines.append(f"{coo.row[i]} {coo.col[i]} {data[i].real!r} {data[i].imag!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- Eigensolvers ---


def rayleigh(K: csr_matrix, M: csr_matrix, u: np.ndarray) -> float:
    u = np.asarray(u)
    den = float(np.vdot(u, M @ u).real)
    if den <= 0:
        raise ContractError("Rayleigh quotient of a zero vector")
    return float(np.vdot(u, K @ u).real) / den


def _diag_scale(K: csr_matrix, M: csr_matrix) -> float:
    ratio = np.abs(K.diagonal()) / M.diagonal().real
    s = float(np.mean(ratio))
    return s if s > 0 else 1.0


def residual_norms(K: csr_matrix, M: csr_matrix, values: np.ndarray, vectors: np.ndarray) -> list[float]:
    """Relative residuals ||Kx - lam Mx||_{M_L^-1} / (||x||_M (|lam| + s)) with M_L the lumped mass."""
    lumped = np.asarray(M.sum(axis=1)).ravel()
    scale = _diag_scale(K, M)
    out = []
    for lam, x in zip(values, vectors.T):
        r = K @ x - lam * (M @ x)
        rn = math.sqrt(float(np.sum(np.abs(r) ** 2 / lumped)))
        xn = math.sqrt(float(np.vdot(x, M @ x).real))
        out.append(rn / (xn * (abs(lam) + scale)))
    return out


def _start_vector(n: int, seed: int, complex_: bool, width: Optional[int] = None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    shape = (n,) if width is None else (n, width)
    v = rng.standard_normal(shape)
    if complex_:
        v = v + 1j * rng.standard_normal(shape)
    return v


def _normalize(M: csr_matrix, vectors: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->j", vectors.conj(), M @ vectors).real)
    return vectors / norms


def _solve_dense(K: csr_matrix, M: csr_matrix, k: int) -> tuple[np.ndarray, np.ndarray, int]:
    values, vectors = scipy.linalg.eigh(K.toarray(), M.toarray(), subset_by_index=[0, k - 1])
    return values, vectors, 1


def _solve_shift_invert(
    K: csr_matrix, M: csr_matrix, k: int, tol: float, seed: int, max_iterations: int, attempt: int
) -> tuple[np.ndarray, np.ndarray, int]:
    n = K.shape[0]
    sigma = 1e-3 * _diag_scale(K, M)
    lu = splu((K + sigma * M).tocsc())
    count = [0]

    def apply(x: np.ndarray) -> np.ndarray:
        count[0] += 1
        return lu.solve(np.asarray(x, dtype=K.dtype))

    op_inv = LinearOperator(K.shape, matvec=apply, dtype=K.dtype)
    ncv = min(n - 1, max(2 * k + 1, 20) * (attempt + 1))
    values, vectors = eigsh(
        K,
        k,
        M,
        sigma=-sigma,
        OPinv=op_inv,
        v0=_start_vector(n, seed, np.iscomplexobj(K.data)),
        ncv=ncv,
        maxiter=max_iterations,
        tol=0.01 * tol if attempt == 0 else 0.0,
    )
    return np.real(values), vectors, count[0]


def _solve_lobpcg(
    K: csr_matrix, M: csr_matrix, k: int, tol: float, seed: int, max_iterations: int, attempt: int
) -> tuple[np.ndarray, np.ndarray, int, list[list[float]]]:
    n = K.shape[0]
    sigma = 1e-3 * _diag_scale(K, M)
    shifted = (K + sigma * M).tocsr()
    precond = diags(1.0 / shifted.diagonal().real)
    block = max(4, k + 2) + 2 * attempt
    X = _start_vector(n, seed, np.iscomplexobj(K.data), width=block)
    values, vectors, history = lobpcg(
        shifted,
        X,
        B=M,
        M=precond,
        tol=0.01 * tol,
        maxiter=max_iterations,
        largest=False,
        retResidualNormsHistory=True,
    )
    hist = [list(map(float, np.atleast_1d(h))) for h in history]
    return np.real(values) - sigma, vectors, len(hist), hist


def solve_lowest(
    K: csr_matrix,
    M: csr_matrix,
    k: int = 1,
    tol: Optional[float] = None,
    seed: Optional[int] = None,
    method: Optional[str] = None,
    max_iterations: Optional[int] = None,
) -> EigenResult:
    """Smallest k eigenpairs of K x = lam M x, deterministic for a given seed."""
    settings = get_settings()
    tol = tol if tol is not None else settings.solver_tol
    seed = seed if seed is not None else settings.seed
    method = method or settings.eigensolver
    max_iterations = max_iterations or settings.solver_max_iterations
    if k < 1 or tol <= 0:
        raise ContractError(f"expected k >= 1 and tol > 0, got k={k}, tol={tol}")
    n = K.shape[0]
    if k > n:
        raise ContractError(f"requested {k} eigenpairs of a {n}-dimensional problem")

    history: list[list[float]] = []

    def attempt_solve(attempt: int) -> EigenResult:
        used = "dense" if n <= _DENSE_LIMIT else method
        try:
            if used == "dense":
                values, vectors, iterations = _solve_dense(K, M, k)
            elif used == "lobpcg":
                values, vectors, iterations, hist = _solve_lobpcg(K, M, k, tol, seed, max_iterations, attempt)
                history.extend(hist)
            else:
                values, vectors, iterations = _solve_shift_invert(K, M, k, tol, seed, max_iterations, attempt)
        except ArpackNoConvergence as e:
            raise EigenSolverError(f"ARPACK did not converge: {e}", history) from e

        order = np.argsort(values)[:k]
        values = values[order]
        vectors = _normalize(M, np.asarray(vectors)[:, order])
        residuals = residual_norms(K, M, values, vectors)
        history.append(residuals)
        if max(residuals) > tol:
            raise EigenSolverError(
                f"{used} residual {max(residuals):.3e} exceeds tolerance {tol:.1e}", history
            )
        return EigenResult(
            eigenvalues=[float(v) for v in values],
            residuals=residuals,
            dof=n,
            iterations=iterations,
            method=used,
            vectors=vectors,
        )

    result = retry_on_failure(attempt_solve, max_attempts=2, retry_on=(EigenSolverError,))
    logger.info(
        "Eigenproblem solved",
        extra={
            "extra_data": {
                "dof": n,
                "method": result.method,
                "iterations": result.iterations,
                "lambda1": result.lambda1,
                "residual": max(result.residuals),
            }
        },
    )
    return result


def solve_problem(
    problem: SpectralProblem,
    k: int = 1,
    tol: Optional[float] = None,
    seed: Optional[int] = None,
    method: Optional[str] = None,
) -> EigenResult:
    """Assemble and solve; snaps the lowest eigenvalue to zero for integer fluxes."""
    K, M = assemble(problem)
    result = solve_lowest(K, M, k=k, tol=tol, seed=seed, method=method)
    values = list(result.eigenvalues)
    exact_zero = False
    if problem.potential.all_integer and abs(values[0]) <= get_settings().zero_eigenvalue_tol:
        values[0] = 0.0
        exact_zero = True
    return result.model_copy(
        update={
            "eigenvalues": values,
            "exact_zero": exact_zero,
            "h": problem.mesh.h,
            "mesher": problem.mesh.mesher,
            "discretization": problem.discretization,
        }
    )


# --- Upper bounds by excision ---


def excise_rectangle(mesh: TriMesh, rect: tuple[float, float, float, float]) -> np.ndarray:
    """Indices of triangles whose centroid lies outside the open rectangle."""
    x0, y0, x1, y1 = rect
    c = mesh.vertices[mesh.triangles].mean(axis=1)
    cut = (c[:, 0] > x0) & (c[:, 0] < x1) & (c[:, 1] > y0) & (c[:, 1] < y1)
    return np.flatnonzero(~cut)


def gap_test_function(vertices: np.ndarray, gap: float, cut: float = 1.0, ramp: float = 1.0) -> np.ndarray:
    """Test function vanishing on the cut |x| <= cut of the strip 0 <= y <= gap and ramping to 1 over `ramp`."""
    x, y = vertices[:, 0], vertices[:, 1]
    in_strip = y <= gap * (1 + 1e-12)
    ramped = np.clip((np.abs(x) - cut) / ramp, 0.0, 1.0)
    return np.where(in_strip, ramped, 1.0)


def excision_upper(problem: SpectralProblem, region: np.ndarray, phi: np.ndarray) -> float:
    """Rayleigh quotient of phi * exp(i f) on a simply connected set of triangles, zero elsewhere.

    phi must vanish wherever the region touches the rest of the mesh; the value is then an
    upper bound for the discrete lowest eigenvalue.
    """
    mesh = problem.mesh
    region = np.asarray(region, dtype=np.int64).reshape(-1)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (mesh.n_vertices,):
        raise ContractError("phi must give one value per mesh vertex")

    f = potential.gauge_scalar(problem.potential, mesh, region)
    inside = np.zeros(mesh.n_triangles, dtype=bool)
    inside[region] = True
    in_region = np.unique(mesh.triangles[inside])
    outside = np.unique(mesh.triangles[~inside])
    interface = np.intersect1d(in_region, outside)
    if len(interface) and np.max(np.abs(phi[interface])) > 1e-12:
        raise ContractError(
            f"test function is nonzero on {int(np.sum(np.abs(phi[interface]) > 1e-12))} Dirichlet vertices"
        )

    u = np.zeros(mesh.n_vertices, dtype=complex)
    u[in_region] = phi[in_region] * np.exp(1j * f[in_region])
    K, M = assemble(problem)
    value = rayleigh(K, M, u)
    logger.info("Excision upper bound", extra={"extra_data": {"value": value, "triangles": len(region)}})
    return value


# --- Refinement ---


def extrapolate(levels: Sequence[float], hs: Sequence[float]) -> Extrapolation:
    """Order-2 Richardson extrapolation from the last three refinement levels."""
    levels = [float(v) for v in levels]
    hs = [float(h) for h in hs]
    if len(levels) != len(hs):
        raise ContractError("levels and hs differ in length")
    if len(levels) < 3:
        return Extrapolation(
            lambda_inf=levels[-1], order=None, levels=levels, hs=hs, extrapolated=False, flags=["too_few_levels"]
        )
    (l0, l1, l2), (h0, h1, h2) = levels[-3:], hs[-3:]
    d01, d12 = l0 - l1, l1 - l2
    scale = max(abs(l2), 1e-300)
    if abs(d01) <= 1e-12 * scale and abs(d12) <= 1e-12 * scale:
        return Extrapolation(lambda_inf=l2, order=None, levels=levels, hs=hs, extrapolated=False, flags=["identical"])
    if d01 * d12 <= 0:
        logger.warning("Non-monotone refinement triplet", extra={"extra_data": {"levels": levels[-3:]}})
        return Extrapolation(lambda_inf=l2, order=None, levels=levels, hs=hs, extrapolated=False, flags=["non_monotone"])

    order = math.log(d01 / d12) / math.log(h0 / h1)
    r = h1 / h2
    flags = []
    if order < 1.5:
        flags.append("low_order")
        logger.warning("Low observed convergence order", extra={"extra_data": {"order": order}})
    return Extrapolation(
        lambda_inf=l2 + (l2 - l1) / (r * r - 1.0),
        order=order,
        levels=levels,
        hs=hs,
        extrapolated=True,
        flags=flags,
    )


def refine_extrapolate(solve_at: Callable[[float], EigenResult], hs: Sequence[float]) -> tuple[Extrapolation, list[EigenResult]]:
    """Solve on each spacing of a refinement ladder and extrapolate lambda_1."""
    results = [solve_at(h) for h in hs]
    ext = extrapolate([r.lambda1 for r in results], [r.h or h for r, h in zip(results, hs)])
    return ext, results
