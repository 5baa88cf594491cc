import cvxpy as cp
import numpy as np
import pytest

import robustness
from errors import BracketError, InvalidInputError, SolverError
from finite import (DiscretePovm, MeasurementAssemblage, assemblage_from_state, random_bipartite_state,
                    random_povm, random_unitary, steering_equivalent_observables)
from robustness import (AffineExpr, ConicProgram, bisect_critical_noise, consistent_steering_robustness,
                        incompatibility_robustness, incompatibility_robustness_bisection,
                        is_jointly_measurable, solve, solve_incompatibility_robustness)

Z_PLUS, Z_MINUS = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
X_PLUS = np.array([[1.0, 1.0], [1.0, 1.0]]) / 2
X_MINUS = np.eye(2) - X_PLUS


def _mub_pair():
    return MeasurementAssemblage((DiscretePovm((Z_PLUS, Z_MINUS)), DiscretePovm((X_PLUS, X_MINUS))))


def test_scalar_program():
    """Test a one-variable program: minimize t subject to t >= 3."""
    program = ConicProgram()
    program.add_scalar('t')
    program.succeq(AffineExpr(1, scalars={'t': np.eye(1)}, constant=-3 * np.eye(1)))
    program.minimize({'t': 1.0})
    solution = solve(program)
    assert solution.status == 'optimal'
    assert abs(solution.objective_value - 3.0) < 1e-6


def test_program_validation():
    """Test that constraints on unknown variables are refused."""
    program = ConicProgram()
    program.add_block('X', 2)
    with pytest.raises(InvalidInputError):
        program.equal(AffineExpr(2, blocks={'Y': 1.0}))
    with pytest.raises(InvalidInputError):
        program.add_scalar('X')
    with pytest.raises(InvalidInputError):
        program.minimize({'t': 1.0})


def test_program_json_keeps_fingerprint():
    """Test that a program read back from JSON has the same fingerprint."""
    program = ConicProgram()
    program.add_block('G0', 2)
    program.add_scalar('t')
    program.equal(AffineExpr(2, blocks={'G0': 1.0}, scalars={'t': -np.eye(2)}, constant=-np.eye(2)))
    program.minimize({'t': 1.0})
    assert ConicProgram.from_json(program.to_json()).fingerprint() == program.fingerprint()


def test_solver_failure_is_reported(monkeypatch):
    """Test that a cvxpy solver failure becomes SolverError."""
    def broken(self, *args, **kwargs):
        raise cp.error.SolverError("diverged")
    monkeypatch.setattr(cp.Problem, 'solve', broken)
    program = ConicProgram()
    program.add_scalar('t')
    program.succeq(AffineExpr(1, scalars={'t': np.eye(1)}))
    program.minimize({'t': 1.0})
    with pytest.raises(SolverError):
        solve(program)


def test_mub_pair_robustness():
    """Test the Z/X pair is incompatible with robustness below the flipped-noise construction."""
    ir = incompatibility_robustness(_mub_pair())
    # mixing each projector with its complement reaches Bloch length 1/sqrt(2) at t = 3 - 2 sqrt(2)
    assert 0.1 < ir <= 3 - 2 * np.sqrt(2) + 1e-5


def test_bisection_agrees_with_direct_solve():
    """Test the feasibility bisection against the direct program."""
    assemblage = _mub_pair()
    direct = incompatibility_robustness(assemblage)
    bisected = incompatibility_robustness_bisection(assemblage, tol=1e-6)
    assert abs(direct - bisected) < 1e-4


def test_certificate_is_verified():
    """Test the joint observable and recovered noise of an optimal solution."""
    cert = solve_incompatibility_robustness(_mub_pair())
    assert cert.verify(1e-6)
    assert np.allclose(sum(cert.joint), (1 + cert.value) * np.eye(2), atol=1e-6)
    for row in cert.noise:
        assert np.allclose(sum(row), np.eye(2), atol=1e-5)
        assert all(np.linalg.eigvalsh(N)[0] > -1e-5 for N in row)


def test_commuting_pair_is_compatible():
    """Test that commuting observables have zero robustness."""
    mixed = MeasurementAssemblage((DiscretePovm((Z_PLUS, Z_MINUS)),
                                   DiscretePovm((0.7 * Z_PLUS + 0.2 * Z_MINUS, 0.3 * Z_PLUS + 0.8 * Z_MINUS))))
    assert incompatibility_robustness(mixed) < 1e-6
    assert is_jointly_measurable(mixed)


def test_robustness_equals_steering_robustness():
    """Test IR of the steering-equivalent observables equals CSR of the assemblage."""
    rng = np.random.default_rng(30)
    for trial in range(20):
        rho = random_bipartite_state(2, 2, rng)
        measurements = MeasurementAssemblage((random_povm(2, 2, rng), random_povm(2, 2, rng)))
        assemblage = assemblage_from_state(rho, measurements)
        ir = incompatibility_robustness(steering_equivalent_observables(assemblage))
        csr = consistent_steering_robustness(assemblage)
        assert abs(ir - csr) < 1e-4


def test_unitary_invariance():
    """Test that conjugating every effect by a unitary leaves IR unchanged."""
    rng = np.random.default_rng(31)
    assemblage = _mub_pair()
    U = random_unitary(2, rng)
    assert abs(incompatibility_robustness(assemblage.conjugate(U)) - incompatibility_robustness(assemblage)) < 1e-5


def test_coarse_graining_does_not_increase_robustness():
    """Test post-processing monotonicity on random three-outcome pairs."""
    rng = np.random.default_rng(32)
    for trial in range(5):
        assemblage = MeasurementAssemblage((random_povm(2, 3, rng), random_povm(2, 3, rng)))
        merged = MeasurementAssemblage(tuple(p.coarse_grained([[0, 1], [2]]) for p in assemblage.settings))
        assert incompatibility_robustness(merged) <= incompatibility_robustness(assemblage) + 1e-6


def test_bisect_critical_noise_synthetic():
    """Test the threshold search on a synthetic robustness curve."""
    result = bisect_critical_noise(lambda eta: eta, (0.0, 1.0), tol=1e-4,
                                   robustness=lambda eta: max(0.0, eta - 0.3))
    assert abs(result.eta_c - 0.3) < 1e-4
    assert result.bracket[0] <= 0.3 <= result.bracket[1] + 1e-6


def test_bisect_critical_noise_bad_brackets():
    """Test that same-sign and decreasing brackets are refused."""
    with pytest.raises(BracketError):
        bisect_critical_noise(lambda eta: eta, (0.0, 1.0), robustness=lambda eta: 0.0)
    with pytest.raises(BracketError, match="decreases"):
        bisect_critical_noise(lambda eta: eta, (0.0, 1.0), robustness=lambda eta: max(0.0, 0.5 - eta))
    with pytest.raises(InvalidInputError):
        bisect_critical_noise(lambda eta: eta, (1.0, 0.0), robustness=lambda eta: eta)


def test_fallback_solver(monkeypatch):
    """Test that an uninstalled solver name falls back to SCS."""
    monkeypatch.setattr(cp, 'installed_solvers', lambda: ['SCS'])
    assert robustness._select_solver('CLARABEL') == 'SCS'


def _lower_bound_program(bound):
    program = ConicProgram()
    program.add_scalar('t')
    program.succeq(AffineExpr(1, scalars={'t': np.eye(1)}, constant=-bound * np.eye(1)))
    program.minimize({'t': 1.0})
    return program


def test_large_duality_gap_is_inaccurate(monkeypatch):
    """Test that an optimum with a gap above tolerance is not reported as optimal."""
    monkeypatch.setattr(robustness, '_duality_gap', lambda constraints: 1e-3)
    solution = solve(_lower_bound_program(3.0))
    assert solution.status == 'inaccurate'
    assert solution.duality_gap == 1e-3


def test_inaccurate_solution_is_resolved_with_alternate(monkeypatch):
    """Test that an inaccurate answer triggers one re-solve on the other solver."""
    calls = []

    def fake(program, solver=None, verbose=False, options=None):
        calls.append((solver, options))
        if solver is None:
            return robustness.Solution('inaccurate', 0.5, solver='CLARABEL')
        return robustness.Solution('optimal', 0.25, scalar_values={'t': 0.25}, solver=solver)
    monkeypatch.setattr(robustness, 'solve', fake)
    monkeypatch.setattr(cp, 'installed_solvers', lambda: ['CLARABEL', 'SCS'])
    solution = robustness.solve_checked(_lower_bound_program(0.25))
    assert [solver for solver, _ in calls] == [None, 'SCS']
    assert calls[1][1] == robustness.SOLVER_OPTIONS['SCS']
    assert solution.objective_value == 0.25


def test_solver_error_is_resolved_with_alternate(monkeypatch):
    """Test that a solver exception also falls through to the alternate solver."""
    def fake(program, solver=None, verbose=False, options=None):
        if solver is None:
            raise SolverError("numerical trouble")
        return robustness.Solution('optimal', 1.0, scalar_values={'t': 1.0}, solver=solver)
    monkeypatch.setattr(robustness, 'solve', fake)
    monkeypatch.setattr(cp, 'installed_solvers', lambda: ['CLARABEL', 'SCS'])
    assert robustness.solve_checked(_lower_bound_program(1.0)).solver == 'SCS'


def test_inaccurate_robustness_is_an_error(monkeypatch):
    """Test that IR refuses a value no solver could certify."""
    def fake(program, solver=None, verbose=False, options=None):
        return robustness.Solution('inaccurate', 0.1, solver=solver or 'CLARABEL')
    monkeypatch.setattr(robustness, 'solve', fake)
    monkeypatch.setattr(cp, 'installed_solvers', lambda: ['CLARABEL', 'SCS'])
    with pytest.raises(SolverError, match="both failed"):
        incompatibility_robustness(_mub_pair())
    with pytest.raises(SolverError):
        is_jointly_measurable(_mub_pair())


def test_optimal_solutions_respect_gap_tolerance():
    """Test the duality gap of a real IR solve."""
    cert = solve_incompatibility_robustness(_mub_pair())
    assert cert.solution.status == 'optimal'
    assert cert.solution.duality_gap <= robustness.GAP_TOL
