"""
Analytic joint measurability for qubit POVMs.

Continuous-outcome qubit POVMs are stored as Gaussian-weighted polynomial
kernels: the density at outcome q is P(q) * exp(-q^2)/sqrt(pi) with P a 2x2
matrix of polynomials. For such kernels this module provides the determinant
criterion for joint measurability together with its explicit joint
observable, closed-form coarse-graining over intervals, and Busch's exact
criterion for unbiased binary qubit observables.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import trapezoid
from scipy.special import erf

from errors import DomainError, InvalidInputError, UnsupportedError
from finite import DiscretePovm

logger = logging.getLogger(__name__)

# |q| <= 6 exhausts the Gaussian envelope numerically
EVALUATION_GRID = np.linspace(-6.0, 6.0, 2001)
ENVELOPE_CUTOFF = 1e-16
CONSTANT_VARIANCE = 1e-12
DELTA_TOL = 1e-12
SQRT_PI = np.sqrt(np.pi)


def envelope(q):
    return np.exp(-np.asarray(q, dtype=float) ** 2) / SQRT_PI


def _edge_term(x, k):
    if not np.isfinite(x):
        return 0.0
    return x ** (k - 1) * np.exp(-x * x)


def gaussian_moments(lo, hi, max_power):
    """m_k = int_lo^hi q^k exp(-q^2) dq / sqrt(pi) for k = 0..max_power."""
    m = np.zeros(max_power + 1)
    m[0] = (erf(hi) - erf(lo)) / 2
    if max_power >= 1:
        m[1] = (_edge_term(lo, 1) - _edge_term(hi, 1)) / (2 * SQRT_PI)
    for k in range(2, max_power + 1):
        m[k] = (k - 1) / 2 * m[k - 2] + (_edge_term(lo, k) - _edge_term(hi, k)) / (2 * SQRT_PI)
    return m


def validate_intervals(intervals):
    """Intervals must be ordered, adjacent and cover the whole real line."""
    intervals = [(float(lo), float(hi)) for lo, hi in intervals]
    if not intervals:
        raise InvalidInputError("empty partition")
    if intervals[0][0] != -np.inf or intervals[-1][1] != np.inf:
        raise InvalidInputError(f"partition does not cover the real line: {intervals}")
    for k, (lo, hi) in enumerate(intervals):
        if not lo < hi:
            raise InvalidInputError(f"interval {k} is empty: ({lo}, {hi})")
        if k and intervals[k - 1][1] != lo:
            raise InvalidInputError(
                f"intervals {k - 1} and {k} overlap or leave a gap at {intervals[k - 1][1]} / {lo}")
    return intervals


@dataclass(frozen=True, eq=False)
class QubitKernelPovm:
    """
    Qubit POVM with density P(q) exp(-q^2)/sqrt(pi) over the real line.

    coefficients[k] is the 2x2 Hermitian coefficient of q^k in P(q).
    """
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=complex)
        if coeffs.ndim != 3 or coeffs.shape[1:] != (2, 2):
            raise InvalidInputError(f"kernel coefficients must have shape (K, 2, 2), got {coeffs.shape}")
        if np.max(np.abs(coeffs - coeffs.conj().transpose(0, 2, 1))) > 1e-12:
            raise InvalidInputError("kernel coefficients are not Hermitian")
        object.__setattr__(self, 'coefficients', coeffs)

    @property
    def degree(self):
        return self.coefficients.shape[0] - 1

    def polynomial(self, q):
        """P(q) without the Gaussian envelope, shape (..., 2, 2)."""
        q = np.asarray(q, dtype=float)
        return np.moveaxis(P.polyval(q, self.coefficients), (0, 1), (-2, -1))

    def kernel(self, q):
        return self.polynomial(q) * envelope(q)[..., None, None]

    def weight(self, q):
        """p(q) = <0|kernel(q)|0>"""
        return self.kernel(q)[..., 0, 0].real

    def interval_effect(self, lo, hi):
        m = gaussian_moments(lo, hi, self.degree)
        effect = np.tensordot(m, self.coefficients, axes=1)
        return (effect + effect.conj().T) / 2

    def normalization_residual(self):
        return float(np.max(np.abs(self.interval_effect(-np.inf, np.inf) - np.eye(2))))

    def transformed(self, channel):
        """Heisenberg image under a qubit channel, applied coefficient by coefficient."""
        return QubitKernelPovm(np.array([channel.adjoint(C) for C in self.coefficients]))


@dataclass(frozen=True)
class BinaryQubitPovm:
    """Effects (1/2)((1 +- bias) 1 +- bloch . sigma)."""
    bias: float
    bloch: tuple

    def __post_init__(self):
        n = np.asarray(self.bloch, dtype=float)
        if n.shape != (3,):
            raise InvalidInputError(f"Bloch vector must have 3 components, got {n.shape}")
        if np.linalg.norm(n) > 1 - abs(self.bias) + 1e-12:
            raise InvalidInputError(
                f"|n| = {np.linalg.norm(n):.6f} exceeds 1 - |bias| = {1 - abs(self.bias):.6f}")
        object.__setattr__(self, 'bloch', tuple(float(v) for v in n))

    @classmethod
    def from_effect(cls, E):
        E = np.asarray(E)
        return cls(float(np.trace(E).real - 1.0),
                   (2 * E[1, 0].real, 2 * E[1, 0].imag, float((E[0, 0] - E[1, 1]).real)))

    def effects(self):
        nx, ny, nz = self.bloch
        n_sigma = np.array([[nz, nx - 1j * ny], [nx + 1j * ny, -nz]])
        plus = ((1 + self.bias) * np.eye(2) + n_sigma) / 2
        return DiscretePovm((plus, np.eye(2) - plus))


def coarse_grain(povm, intervals):
    """One effect per interval, computed from closed-form Gaussian moments."""
    intervals = validate_intervals(intervals)
    return DiscretePovm(tuple(povm.interval_effect(lo, hi) for lo, hi in intervals))


def busch_compatible(p1, p2):
    """Exact verdict for unbiased pairs: |n1 + n2| + |n1 - n2| <= 2."""
    if abs(p1.bias) > 1e-12 or abs(p2.bias) > 1e-12:
        raise UnsupportedError("Busch criterion is implemented for unbiased pairs only")
    n1, n2 = np.array(p1.bloch), np.array(p2.bloch)
    return bool(np.linalg.norm(n1 + n2) + np.linalg.norm(n1 - n2) <= 2 + 1e-12)


def _grid_profile(povm, grid):
    """(q, p, f, r) on the part of the grid where the envelope is non-negligible."""
    q = grid[envelope(grid) >= ENVELOPE_CUTOFF]
    Pq = povm.polynomial(q)
    p = Pq[:, 0, 0].real
    bad = np.flatnonzero(p <= 0)
    if bad.size:
        raise DomainError(f"weight p(q) vanishes at q = {q[bad[0]]:.6f}; criterion inapplicable")
    f = Pq[:, 1, 0] / p
    r = (Pq[:, 0, 0] * Pq[:, 1, 1] - np.abs(Pq[:, 1, 0]) ** 2).real / p ** 2
    return q, p, f, r


def _discrete_ratios(povm, intervals):
    ratios = []
    for lo, hi in validate_intervals(intervals):
        E = povm.interval_effect(lo, hi)
        p = E[0, 0].real
        if p <= 0:
            raise DomainError(f"weight vanishes on interval ({lo}, {hi}); criterion inapplicable")
        ratios.append(np.linalg.det(E).real / p ** 2)
    return np.array(ratios)


def _minimum(r):
    if np.var(r) < CONSTANT_VARIANCE:
        return float(np.mean(r)), None
    k = int(np.argmin(r))
    return float(r[k]), k


def delta_criterion(povms, outcome_sets=None, grid=EVALUATION_GRID):
    """
    Infimum of Delta(b_1..b_n) = sum_i r_i(b_i) - n + 1 over the evaluation points.

    r_i is the determinant ratio det(kernel)/p^2 of POVM i. With outcome_sets
    (one interval partition per POVM) the coarse-grained effects are used
    instead of the grid. The POVMs are jointly measurable when the result is
    non-negative.
    """
    n = len(povms)
    if n < 2:
        raise InvalidInputError(f"delta criterion needs at least two POVMs, got {n}")
    if outcome_sets is not None:
        if len(outcome_sets) != n:
            raise InvalidInputError(f"{len(outcome_sets)} outcome sets for {n} POVMs")
        mins = [_minimum(_discrete_ratios(povm, s))[0] for povm, s in zip(povms, outcome_sets)]
    else:
        mins = [_minimum(_grid_profile(povm, grid)[3])[0] for povm in povms]
    delta = sum(mins) - n + 1
    logger.debug(f"delta criterion over {n} POVMs: {delta:.3e}")
    return delta


@dataclass(frozen=True, eq=False)
class JointObservable:
    """
    G(b_1..b_n) = prod_i p_i(b_i) [[1, conj(F)], [F, |F|^2 + Delta]] with
    F = sum_i f_i(b_i); each POVM is recovered by integrating out the others.
    """
    povms: tuple
    grid: np.ndarray = field(default_factory=lambda: EVALUATION_GRID)

    def density(self, *points):
        if len(points) != len(self.povms):
            raise InvalidInputError(f"expected {len(self.povms)} outcome coordinates, got {len(points)}")
        n = len(self.povms)
        weight, F, delta = 1.0, 0.0, 1.0 - n
        for povm, b in zip(self.povms, points):
            Pb = povm.polynomial(b)
            p = Pb[..., 0, 0].real
            weight = weight * p * envelope(b)
            F = F + Pb[..., 1, 0] / p
            delta = delta + (Pb[..., 0, 0] * Pb[..., 1, 1] - np.abs(Pb[..., 1, 0]) ** 2).real / p ** 2
        G = np.empty(np.shape(weight) + (2, 2), dtype=complex)
        G[..., 0, 0] = 1.0
        G[..., 0, 1] = np.conj(F)
        G[..., 1, 0] = F
        G[..., 1, 1] = np.abs(F) ** 2 + delta
        return G * np.asarray(weight)[..., None, None]

    def _moments(self, povm):
        q, p, f, r = _grid_profile(povm, self.grid)
        w = p * envelope(q)
        mass = trapezoid(w, q)
        mean_f = trapezoid(w * f, q) / mass
        var_f = trapezoid(w * np.abs(f) ** 2, q) / mass - np.abs(mean_f) ** 2
        mean_r = trapezoid(w * r, q) / mass
        return mass, mean_f, var_f, mean_r

    def marginal(self, index, q):
        """Integrate out every coordinate but `index`, via per-coordinate expectations."""
        n = len(self.povms)
        q = np.asarray(q, dtype=float)
        Pq = self.povms[index].polynomial(q)
        p = Pq[:, 0, 0].real
        f = Pq[:, 1, 0] / p
        r = (Pq[:, 0, 0] * Pq[:, 1, 1] - np.abs(Pq[:, 1, 0]) ** 2).real / p ** 2
        mass, shift, spread, delta_rest = 1.0, 0.0, 0.0, 0.0
        for j, povm in enumerate(self.povms):
            if j == index:
                continue
            m, mean_f, var_f, mean_r = self._moments(povm)
            mass *= m
            shift += mean_f
            spread += var_f
            delta_rest += mean_r
        F = f + shift
        out = np.empty(q.shape + (2, 2), dtype=complex)
        out[:, 0, 0] = 1.0
        out[:, 0, 1] = np.conj(F)
        out[:, 1, 0] = F
        out[:, 1, 1] = np.abs(F) ** 2 + spread + r + delta_rest - n + 1
        return out * (mass * p * envelope(q))[:, None, None]


def joint_observable(povms, grid=EVALUATION_GRID, tol=DELTA_TOL):
    """Explicit joint observable; DomainError naming the grid point where Delta < 0."""
    povms = tuple(povms)
    if not povms:
        raise InvalidInputError("joint observable of zero POVMs")
    n = len(povms)
    mins, points = [], []
    for povm in povms:
        q, _, _, r = _grid_profile(povm, grid)
        value, k = _minimum(r)
        mins.append(value)
        points.append(float(q[k]) if k is not None else float(q[len(q) // 2]))
    delta = sum(mins) - n + 1
    if delta < -tol:
        raise DomainError(
            f"joint observable not positive: Delta = {delta:.3e} at grid point {tuple(points)}")
    logger.debug(f"joint observable for {n} POVMs, min Delta {delta:.3e}")
    return JointObservable(povms, grid)
