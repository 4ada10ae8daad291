"""Tests for assembly, the eigensolvers, excision upper bounds and extrapolation."""

import numpy as np
import pytest

from fluxgap.core.errors import ContractError, PoleInsideMeshError
from fluxgap.models import ClosedPotential, SpectralProblem
from fluxgap.services import mesh, oracle, solver

from tests.helpers import flux_at


def _polar_problem(phi, nr=8, ntheta=64, discretization="gauge"):
    m = mesh.mesh_polar_annulus(1.0, 2.0, nr, ntheta)
    return SpectralProblem(mesh=m, potential=flux_at((0.0, 0.0), phi), discretization=discretization)


def test_assembled_matrices_are_hermitian():
    K, M = solver.assemble(_polar_problem(0.5))
    assert abs(K - K.conj().T).max() < 1e-12
    assert abs(M - M.T).max() < 1e-15
    assert np.all(M.diagonal() > 0)


def test_constants_are_in_the_free_kernel():
    problem = SpectralProblem(mesh=mesh.mesh_polar_annulus(1.0, 2.0, 4, 32), potential=ClosedPotential())
    K, M = solver.assemble(problem)
    assert solver.rayleigh(K, M, np.ones(problem.mesh.n_vertices)) == pytest.approx(0.0, abs=1e-12)


def test_zero_flux_snaps_to_zero():
    result = solver.solve_problem(_polar_problem(0.0))
    assert result.lambda1 == 0.0
    assert result.exact_zero


def test_integer_flux_is_gauge_trivial():
    result = solver.solve_problem(_polar_problem(1.0))
    assert result.lambda1 == 0.0
    assert result.exact_zero


@pytest.mark.parametrize("phi", [0.0, 1.0, 2.0])
def test_integer_flux_vanishes_on_the_fine_polar_mesh(phi):
    nr, ntheta = mesh.polar_resolution(1.0, 2.0, 1 / 32)
    assert nr == 32
    result = solver.solve_problem(_polar_problem(phi, nr=nr, ntheta=ntheta))
    assert result.lambda1 <= 1e-7


def test_half_flux_matches_radial_oracle():
    result = solver.solve_problem(_polar_problem(0.5, nr=16, ntheta=128))
    expected = oracle.annulus_oracle(1.0, 2.0, 0.5).eigenvalue
    assert result.lambda1 == pytest.approx(expected, rel=2e-2)
    assert not result.exact_zero
    assert max(result.residuals) <= 1e-8


def test_discretizations_agree():
    gauge = solver.solve_problem(_polar_problem(0.25, nr=16, ntheta=128))
    quadrature = solver.solve_problem(_polar_problem(0.25, nr=16, ntheta=128, discretization="quadrature"))
    assert quadrature.discretization == "quadrature"
    assert gauge.lambda1 == pytest.approx(quadrature.lambda1, rel=5e-2)


def test_flux_symmetry():
    low = solver.solve_problem(_polar_problem(0.25))
    high = solver.solve_problem(_polar_problem(0.75))
    assert low.lambda1 == pytest.approx(high.lambda1, rel=1e-8)


def test_small_problems_use_the_dense_path():
    result = solver.solve_problem(_polar_problem(0.5, nr=2, ntheta=8), k=3)
    assert result.method == "dense"
    assert result.eigenvalues == sorted(result.eigenvalues)
    assert len(result.eigenvalues) == 3


def test_same_seed_same_answer():
    first = solver.solve_problem(_polar_problem(0.5), seed=7)
    second = solver.solve_problem(_polar_problem(0.5), seed=7)
    assert first.lambda1 == second.lambda1


def test_lobpcg_agrees_with_shift_invert():
    problem = _polar_problem(0.5)
    reference = solver.solve_problem(problem, tol=1e-5)
    block = solver.solve_problem(problem, tol=1e-5, method="lobpcg")
    assert block.method == "lobpcg"
    assert block.lambda1 == pytest.approx(reference.lambda1, rel=1e-4)


def test_too_many_eigenpairs_rejected():
    K, M = solver.assemble(_polar_problem(0.5, nr=2, ntheta=8))
    with pytest.raises(ContractError):
        solver.solve_lowest(K, M, k=K.shape[0] + 1)


def test_pole_inside_mesh_rejected():
    m = mesh.mesh_rect_diff((-2, -2, 2, 2), (-1, -1, 1, 1), 0.5)
    with pytest.raises(PoleInsideMeshError):
        solver.assemble(SpectralProblem(mesh=m, potential=flux_at((1.5, 0.1), 0.5)))


def test_matrix_dump(tmp_path):
    K, M = solver.assemble(_polar_problem(0.5, nr=2, ntheta=8))
    path = tmp_path / "matrices.txt"
    solver.dump_matrices(K, M, path)
    headers = [line for line in path.read_text().splitlines() if line[:2] in ("K ", "M ")]
    assert headers == [f"K 24 {K.nnz}", f"M 24 {M.nnz}"]


def test_gap_test_function():
    pts = np.array([[0.0, 0.05], [1.5, 0.05], [3.0, 0.05], [0.0, 1.0]])
    np.testing.assert_allclose(solver.gap_test_function(pts, 0.1), [0.0, 0.5, 1.0, 1.0])


def _gap_problem(eps, h=0.25):
    m = mesh.mesh_rect_diff((-4, 0, 4, 4), (-3, eps, 3, 2), h, extra_x=(-2, -1, 1, 2))
    return SpectralProblem(mesh=m, potential=flux_at((0.0, 1.0), 0.5))


def test_excision_bounds_the_lowest_eigenvalue():
    problem = _gap_problem(0.1)
    region = solver.excise_rectangle(problem.mesh, (-1.0, 0.0, 1.0, 0.1))
    phi = solver.gap_test_function(problem.mesh.vertices, 0.1)
    upper = solver.excision_upper(problem, region, phi)
    assert solver.solve_problem(problem).lambda1 <= upper * (1 + 1e-9)
    assert upper < 0.05


def test_excision_needs_phi_to_vanish_on_the_cut():
    problem = _gap_problem(0.1)
    region = solver.excise_rectangle(problem.mesh, (-1.0, 0.0, 1.0, 0.1))
    with pytest.raises(ContractError):
        solver.excision_upper(problem, region, np.ones(problem.mesh.n_vertices))


def test_extrapolation_of_quadratic_convergence():
    hs = [0.4, 0.2, 0.1]
    ext = solver.extrapolate([1 + h * h for h in hs], hs)
    assert ext.extrapolated
    assert ext.order == pytest.approx(2.0)
    assert ext.lambda_inf == pytest.approx(1.0)
    assert ext.flags == []


def test_extrapolation_flags():
    hs = [0.4, 0.2, 0.1]
    assert solver.extrapolate([1.0, 1.0, 1.0], hs).flags == ["identical"]
    assert solver.extrapolate([1.0, 1.2, 1.1], hs).flags == ["non_monotone"]
    assert solver.extrapolate([1.2, 1.1], hs[:2]).flags == ["too_few_levels"]
    low = solver.extrapolate([1 + h for h in hs], hs)
    assert low.extrapolated and "low_order" in low.flags


def test_refine_extrapolate_on_polar_ladder():
    def solve_at(h):
        nr, ntheta = mesh.polar_resolution(1.0, 2.0, h)
        m = mesh.mesh_polar_annulus(1.0, 2.0, nr, ntheta)
        return solver.solve_problem(SpectralProblem(mesh=m, potential=flux_at((0.0, 0.0), 0.5)))

    ext, results = solver.refine_extrapolate(solve_at, [0.4, 0.2, 0.1])
    assert len(results) == 3
    assert ext.hs == [r.h for r in results]
    expected = oracle.annulus_oracle(1.0, 2.0, 0.5).eigenvalue
    assert abs(ext.lambda_inf - expected) <= abs(results[-1].lambda1 - expected) + 1e-6
