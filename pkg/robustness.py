"""
Conic programs and the robustness measures built on them.

ConicProgram is a small solver-independent description: Hermitian PSD block
variables, real scalar variables, affine Hermitian equality and PSD
constraints, and a linear objective in the scalars. solve() compiles it to
cvxpy. Programs and solutions serialize to JSON; the snapshot store can
replay recorded solutions instead of calling the solver.

The incompatibility robustness (IR) of a measurement assemblage and the
consistent steering robustness (CSR) of a state assemblage are both solved
as one SDP over deterministic strategies lambda = (a_1, ..., a_n):

    minimize t  s.t.  G_lambda >= 0,  sum_lambda G_lambda = (1 + t) R,
                      sum_{lambda_x = a} G_lambda - X_{a|x} >= 0

with R = identity and X = M for IR, R = sigma and X = sigma for CSR.
"""

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

import snapshots
from errors import BracketError, InvalidInputError, SolverError
from finite import DeterministicStrategy
from matcore import matrix_from_json, matrix_to_json, min_eigenvalue

logger = logging.getLogger(__name__)

SDP_SOLVER = os.getenv('STEERING_SDP_SOLVER', 'CLARABEL').upper()
FALLBACK_SOLVER = 'SCS'
SOLVER_VERBOSE = os.getenv('STEERING_SOLVER_VERBOSE', 'false').lower() == 'true'
GAP_TOL = float(os.getenv('STEERING_GAP_TOL', '1e-7'))

# tight settings for the re-solve; SCS defaults stop near 1e-4
SOLVER_OPTIONS = {'SCS': {'eps_abs': 1e-9, 'eps_rel': 1e-9, 'max_iters': 200000}}
USABLE_STATUSES = ('optimal', 'infeasible')

# IR at or below ZERO_TOL is compatible; above POSITIVE_TOL it is incompatible
ZERO_TOL = 1e-7
POSITIVE_TOL = 1e-6
CERTIFICATE_TOL = 1e-7


def _pair(z):
    return [float(np.real(z)), float(np.imag(z))]


@dataclass
class AffineExpr:
    """
    sum_b w_b X_b + sum_b F_b tr(X_b) + sum_s F_s s + constant, a dim x dim matrix.
    """
    dim: int
    blocks: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    constant: np.ndarray = None

    def __post_init__(self):
        if self.constant is None:
            self.constant = np.zeros((self.dim, self.dim))
        self.constant = np.asarray(self.constant)
        for label, F in list(self.traces.items()) + list(self.scalars.items()):
            if np.shape(F) != (self.dim, self.dim):
                raise InvalidInputError(f"coefficient of {label} has shape {np.shape(F)}, expected {self.dim}")
        if self.constant.shape != (self.dim, self.dim):
            raise InvalidInputError(f"constant has shape {self.constant.shape}, expected {self.dim}")

    def to_json(self):
        return {"dim": self.dim,
                "blocks": {k: _pair(w) for k, w in self.blocks.items()},
                "traces": {k: matrix_to_json(np.asarray(F)) for k, F in self.traces.items()},
                "scalars": {k: matrix_to_json(np.asarray(F)) for k, F in self.scalars.items()},
                "constant": matrix_to_json(self.constant)}

    @classmethod
    def from_json(cls, obj):
        return cls(int(obj["dim"]),
                   {k: complex(*w) for k, w in obj.get("blocks", {}).items()},
                   {k: matrix_from_json(F) for k, F in obj.get("traces", {}).items()},
                   {k: matrix_from_json(F) for k, F in obj.get("scalars", {}).items()},
                   matrix_from_json(obj["constant"]))


@dataclass
class ConicProgram:
    psd_blocks: dict = field(default_factory=dict)
    scalar_vars: list = field(default_factory=list)
    equality_constraints: list = field(default_factory=list)
    psd_constraints: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)

    def add_block(self, label, dim):
        if label in self.psd_blocks or label in self.scalar_vars:
            raise InvalidInputError(f"duplicate variable label {label!r}")
        self.psd_blocks[label] = int(dim)
        return label

    def add_scalar(self, label):
        if label in self.psd_blocks or label in self.scalar_vars:
            raise InvalidInputError(f"duplicate variable label {label!r}")
        self.scalar_vars.append(label)
        return label

    def equal(self, expr):
        """expr == 0"""
        self._check(expr)
        self.equality_constraints.append(expr)

    def succeq(self, expr):
        """expr >= 0 in the PSD order"""
        self._check(expr)
        self.psd_constraints.append(expr)

    def minimize(self, weights):
        for label in weights:
            if label not in self.scalar_vars:
                raise InvalidInputError(f"objective refers to unknown scalar {label!r}")
        self.objective = dict(weights)

    def _check(self, expr):
        for label in expr.blocks:
            if label not in self.psd_blocks:
                raise InvalidInputError(f"unknown block {label!r}")
            if self.psd_blocks[label] != expr.dim:
                raise InvalidInputError(f"block {label!r} has dim {self.psd_blocks[label]}, expression {expr.dim}")
        for label in expr.traces:
            if label not in self.psd_blocks:
                raise InvalidInputError(f"unknown block {label!r}")
        for label in expr.scalars:
            if label not in self.scalar_vars:
                raise InvalidInputError(f"unknown scalar {label!r}")
        if np.max(np.abs(expr.constant - expr.constant.conj().T), initial=0.0) > 1e-12:
            raise InvalidInputError("constraint constant is not Hermitian")

    def to_json(self):
        return {"psd_blocks": [{"label": k, "dim": d} for k, d in self.psd_blocks.items()],
                "scalar_vars": list(self.scalar_vars),
                "equality_constraints": [e.to_json() for e in self.equality_constraints],
                "psd_constraints": [e.to_json() for e in self.psd_constraints],
                "objective": dict(self.objective)}

    @classmethod
    def from_json(cls, obj):
        return cls({b["label"]: int(b["dim"]) for b in obj.get("psd_blocks", [])},
                   list(obj.get("scalar_vars", [])),
                   [AffineExpr.from_json(e) for e in obj.get("equality_constraints", [])],
                   [AffineExpr.from_json(e) for e in obj.get("psd_constraints", [])],
                   {k: float(w) for k, w in obj.get("objective", {}).items()})

    def fingerprint(self):
        text = json.dumps(self.to_json(), sort_keys=True)
        return hashlib.sha256(text.encode('utf-8')).hexdigest()


@dataclass
class Solution:
    status: str
    objective_value: float
    block_values: dict = field(default_factory=dict)
    scalar_values: dict = field(default_factory=dict)
    duality_gap: float = float('nan')
    solver: str = ''
    solve_time: float = 0.0

    def to_json(self):
        return {"status": self.status,
                "objective_value": self.objective_value,
                "block_values": {k: matrix_to_json(np.asarray(v, dtype=complex))
                                 for k, v in self.block_values.items()},
                "scalar_values": dict(self.scalar_values),
                "duality_gap": self.duality_gap,
                "solver": self.solver}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["status"], obj["objective_value"],
                   {k: matrix_from_json(v) for k, v in obj.get("block_values", {}).items()},
                   {k: float(v) for k, v in obj.get("scalar_values", {}).items()},
                   float(obj.get("duality_gap", float('nan'))),
                   obj.get("solver", 'snapshot'))


def _select_solver(name=None):
    name = (name or SDP_SOLVER).upper()
    installed = cp.installed_solvers()
    if name in installed:
        return name
    logger.warning(f"Solver {name} not installed, falling back to {FALLBACK_SOLVER}")
    return FALLBACK_SOLVER


def _compile(program):
    X = {label: cp.Variable((d, d), hermitian=True, name=label) for label, d in program.psd_blocks.items()}
    s = {label: cp.Variable(name=label) for label in program.scalar_vars}

    def build(expr):
        out = cp.Constant(expr.constant)
        for label, w in expr.blocks.items():
            out = out + w * X[label]
        for label, F in expr.traces.items():
            out = out + cp.real(cp.trace(X[label])) * np.asarray(F)
        for label, F in expr.scalars.items():
            out = out + s[label] * np.asarray(F)
        return out

    constraints = [X[label] >> 0 for label in program.psd_blocks]
    constraints += [build(e) == 0 for e in program.equality_constraints]
    constraints += [build(e) >> 0 for e in program.psd_constraints]
    if program.objective:
        objective = cp.Minimize(sum(w * s[label] for label, w in program.objective.items()))
    else:
        objective = cp.Minimize(0)
    return cp.Problem(objective, constraints), X, s


def _duality_gap(constraints):
    """Complementary slackness sum_i |<Z_i, E_i>| over the PSD constraints, from cvxpy's dual values."""
    gap = 0.0
    for con in constraints:
        if not isinstance(con, cp.constraints.PSD):
            continue
        Z, E = con.dual_value, con.args[0].value
        if Z is None or E is None:
            return float('nan')
        gap += abs(np.real(np.vdot(np.asarray(Z), np.asarray(E))))
    return float(gap)


def solve(program, solver=None, verbose=False, options=None):
    """
    Solve a ConicProgram; status is 'optimal', 'infeasible', 'inaccurate' or 'max-iter'.
    An optimum whose duality gap exceeds GAP_TOL is reported as 'inaccurate'.
    """
    key = program.fingerprint()
    if snapshots.SNAPSHOT_MODE:
        cached = snapshots.get_snapshot(key)
        if cached is not None:
            logger.debug(f"Replaying snapshot {key[:12]}")
            return Solution.from_json(cached)
        logger.warning(f"No snapshot for program {key[:12]}, solving live")

    problem, X, s = _compile(program)
    name = _select_solver(solver)
    start = time.time()
    try:
        problem.solve(solver=name, verbose=verbose or SOLVER_VERBOSE, **(options or {}))
    except cp.error.SolverError as e:
        logger.error(f"Solver {name} failed: {e}")
        raise SolverError(f"solver {name} failed: {e}") from e
    elapsed = time.time() - start

    gap = float('nan')
    if problem.status == cp.OPTIMAL:
        status = 'optimal'
        gap = _duality_gap(problem.constraints)
        if gap > GAP_TOL:
            logger.warning(f"Solver {name} reported optimal with duality gap {gap:.3e} > {GAP_TOL:.0e}")
            status = 'inaccurate'
    elif problem.status == cp.OPTIMAL_INACCURATE:
        status = 'inaccurate'
        logger.warning(f"Solver {name} stopped with status {problem.status}")
    elif problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        status = 'infeasible'
    else:
        status = 'max-iter'
        logger.warning(f"Solver {name} stopped with status {problem.status}")

    solution = Solution(
        status=status,
        objective_value=float(problem.value) if problem.value is not None and np.isfinite(problem.value) else float('nan'),
        block_values={k: np.asarray(v.value) for k, v in X.items() if v.value is not None},
        scalar_values={k: float(v.value) for k, v in s.items() if v.value is not None},
        duality_gap=gap,
        solver=name,
        solve_time=elapsed,
    )
    logger.debug(f"Solved program {key[:12]} with {name}: {status}, objective {solution.objective_value:.3e}, "
                 f"{len(program.psd_blocks)} blocks in {elapsed:.2f}s")
    if snapshots.SNAPSHOT_CAPTURE and status in USABLE_STATUSES:
        snapshots.add_snapshot(key, solution.to_json())
    return solution


def solve_checked(program, verbose=False):
    """solve() with one re-solve on the other solver; raises SolverError unless the answer is usable."""
    try:
        solution = solve(program, verbose=verbose)
        if solution.status in USABLE_STATUSES:
            return solution
        first, reason = solution.solver, f"status {solution.status}"
    except SolverError as e:
        first, reason = _select_solver(), str(e)

    alternate = FALLBACK_SOLVER if first != FALLBACK_SOLVER else SDP_SOLVER
    if alternate == first or alternate not in cp.installed_solvers():
        raise SolverError(f"solver {first} gave {reason} and no alternate solver is installed")
    logger.warning(f"Solver {first} gave {reason}, re-solving with {alternate}")
    solution = solve(program, solver=alternate, verbose=verbose, options=SOLVER_OPTIONS.get(alternate))
    if solution.status not in USABLE_STATUSES:
        raise SolverError(f"solvers {first} and {alternate} both failed: last status {solution.status}")
    return solution


@dataclass
class RobustnessCertificate:
    """Optimal t with the joint observable (or hidden states) and recovered noise."""
    value: float
    strategy: DeterministicStrategy
    joint: list
    noise: list
    members: list
    reference: np.ndarray
    solution: Solution

    def marginal(self, x, a):
        return sum(self.joint[i] for i in self.strategy.responses(x, a))

    def violation(self):
        """Most negative eigenvalue of marginal - member, checked outside the solver."""
        worst = min(min_eigenvalue(self.marginal(x, a) - m)
                    for x, row in enumerate(self.members) for a, m in enumerate(row))
        total = sum(self.joint)
        norm = np.max(np.abs(total - (1 + self.value) * self.reference))
        return min(worst, -norm)

    def verify(self, tol=CERTIFICATE_TOL):
        return self.violation() >= -tol


def _robustness_program(members, reference, fixed_t=None):
    dim = reference.shape[0]
    strategy = DeterministicStrategy(tuple(len(row) for row in members))
    program = ConicProgram()
    labels = [program.add_block(f"G{i}", dim) for i in range(len(strategy))]
    total = AffineExpr(dim, blocks={label: 1.0 for label in labels})
    if fixed_t is None:
        program.add_scalar('t')
        total.scalars['t'] = -reference
        total.constant = -reference
        program.minimize({'t': 1.0})
    else:
        total.constant = -(1.0 + fixed_t) * reference
    program.equal(total)
    for x, row in enumerate(members):
        for a, m in enumerate(row):
            program.succeq(AffineExpr(dim, blocks={labels[i]: 1.0 for i in strategy.responses(x, a)},
                                      constant=-m))
    return program, strategy, labels


def _solve_robustness(members, reference, verbose=False):
    program, strategy, labels = _robustness_program(members, reference)
    solution = solve_checked(program, verbose=verbose)
    if solution.status == 'infeasible' or not np.isfinite(solution.objective_value):
        raise SolverError(f"robustness program returned status {solution.status}")
    t = max(solution.scalar_values.get('t', solution.objective_value), 0.0)
    joint = [solution.block_values[label] for label in labels]
    cert = RobustnessCertificate(t, strategy, joint, None, members, reference, solution)
    if t > ZERO_TOL:
        cert.noise = [[(cert.marginal(x, a) - m) / t for a, m in enumerate(row)]
                      for x, row in enumerate(members)]
    if not cert.verify():
        logger.warning(f"Robustness certificate violates constraints by {-cert.violation():.3e}")
    return cert


def solve_incompatibility_robustness(assemblage, verbose=False):
    members = [list(p.outcomes) for p in assemblage.settings]
    return _solve_robustness(members, np.eye(assemblage.dim), verbose)


def incompatibility_robustness(assemblage, verbose=False):
    """Minimal noise weight t making the measurement assemblage jointly measurable."""
    return solve_incompatibility_robustness(assemblage, verbose).value


def solve_consistent_steering_robustness(assemblage, verbose=False):
    members = [list(row) for row in assemblage.members]
    return _solve_robustness(members, assemblage.marginal(), verbose)


def consistent_steering_robustness(assemblage, verbose=False):
    """Minimal sigma-consistent noise weight t making the state assemblage unsteerable."""
    return solve_consistent_steering_robustness(assemblage, verbose).value


def is_jointly_measurable(assemblage, t=0.0):
    """Feasibility of a joint observable with total (1 + t) identity."""
    members = [list(p.outcomes) for p in assemblage.settings]
    program, _, _ = _robustness_program(members, np.eye(assemblage.dim), fixed_t=t)
    return solve_checked(program).status == 'optimal'


def incompatibility_robustness_bisection(assemblage, tol=1e-6):
    """IR by bisection on t over feasibility problems; t = n - 1 is always feasible."""
    if is_jointly_measurable(assemblage, 0.0):
        return 0.0
    lo, hi = 0.0, float(len(assemblage.settings) - 1)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if is_jointly_measurable(assemblage, mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class CriticalNoise:
    eta_c: float
    ir_at_eta_c: float
    steps: int
    bracket: tuple


def bisect_critical_noise(family, bracket, tol=1e-3, robustness=incompatibility_robustness,
                          positive_tol=POSITIVE_TOL):
    """
    Threshold eta where robustness(family(eta)) turns positive, to absolute tolerance tol.
    The lower bracket end must be compatible and the upper end incompatible.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise InvalidInputError(f"bracket must satisfy lo < hi, got {bracket}")
    ir_lo = robustness(family(lo))
    ir_hi = robustness(family(hi))
    logger.info(f"Critical noise bracket [{lo:.4f}, {hi:.4f}]: IR = {ir_lo:.3e}, {ir_hi:.3e}")
    if (ir_lo > positive_tol) == (ir_hi > positive_tol):
        raise BracketError(
            f"robustness has the same sign at both ends of [{lo}, {hi}]: {ir_lo:.3e}, {ir_hi:.3e}")
    if ir_lo > positive_tol:
        raise BracketError(f"robustness decreases across [{lo}, {hi}]: {ir_lo:.3e} > {ir_hi:.3e}")
    steps = 0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        ir = robustness(family(mid))
        steps += 1
        if ZERO_TOL < ir <= positive_tol:
            logger.warning(f"IR = {ir:.3e} at eta = {mid:.5f} lies between the zero and positive thresholds")
        if ir > positive_tol:
            hi, ir_hi = mid, ir
        else:
            lo = mid
        logger.debug(f"bisection step {steps}: eta = {mid:.5f}, IR = {ir:.3e}")
    return CriticalNoise((lo + hi) / 2, ir_hi, steps, (lo, hi))


def critical_noise(family, bracket, tol=1e-3, robustness=incompatibility_robustness):
    return bisect_critical_noise(family, bracket, tol, robustness).eta_c
