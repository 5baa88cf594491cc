"""
Noisy NOON-state steering pipeline.

The state rho_eta = eta |NOON><NOON| + (1 - eta)|00><00| lives on the 2 (x) 2
span of {|0>, |N>} per side (basis index 0 for |0>, 1 for |N>). Its channel
is an amplitude damping Lambda_r with r = sqrt(eta / (2 - eta)) followed by a
fixed unitary, so Alice's quadrature measurements are steering-equivalent to
damped truncated quadratures. Coarse-graining those over interval partitions
and bisecting the incompatibility robustness in eta gives the critical noise.

Pipeline angles are relative phases inside the {|0>, |N>} span: a setting
pair at theta means quadrature angles 0 and theta / N, so theta = pi / 2 is
the orthogonal pair for every photon number.
"""

import concurrent.futures
import logging
import math
import time
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite, polynomial

from errors import DomainError, InvalidInputError
from finite import (BipartiteState, KrausChannel, MeasurementAssemblage, amplitude_damping_channel,
                    assemblage_from_state)
from jointmeas import BinaryQubitPovm, QubitKernelPovm, coarse_grain
from robustness import bisect_critical_noise, consistent_steering_robustness, incompatibility_robustness

logger = logging.getLogger(__name__)

DEFAULT_CUTOFF = 1.4
# per-row cutoffs of the critical-noise table; other rows use DEFAULT_CUTOFF
TABLE1_CUTOFFS = {4: 1.0}
PARTITION_SCHEMES = ('tails', 'literal')
TABLE1_N_INT = (4, 6, 8, 10, 12, 14, 16, 18, 20)


@dataclass(frozen=True)
class NoonParams:
    photon_number: int = 1
    phase: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        if self.photon_number < 1:
            raise InvalidInputError(f"photon number must be >= 1, got {self.photon_number}")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidInputError(f"eta must lie in [0, 1], got {self.eta}")


@dataclass(frozen=True)
class IntervalPartition:
    """
    'tails': two tails beyond +-c plus n_int - 2 equal intervals on [-c, c],
    split at 0 for n_int = 2. 'literal': width c / n_int on [-c, c] plus two
    tails, 2 n_int + 2 outcomes.
    """
    n_int: int
    cutoff: float = DEFAULT_CUTOFF
    scheme: str = 'tails'

    def __post_init__(self):
        if self.n_int < 2 or self.n_int % 2:
            raise InvalidInputError(f"n_int must be an even integer >= 2, got {self.n_int}")
        if not self.cutoff > 0:
            raise InvalidInputError(f"cutoff must be positive, got {self.cutoff}")
        if self.scheme not in PARTITION_SCHEMES:
            raise InvalidInputError(f"unknown partition scheme {self.scheme!r}, expected one of {PARTITION_SCHEMES}")

    def edges(self):
        """Finite interior edges, strictly increasing."""
        c = self.cutoff
        if self.scheme == 'literal':
            return list(np.linspace(-c, c, 2 * self.n_int + 1))
        if self.n_int == 2:
            return [0.0]
        return list(np.linspace(-c, c, self.n_int - 1))

    def to_json(self):
        return {"c": self.cutoff, "n_int": self.n_int, "scheme": self.scheme,
                "edges": [float(e) for e in self.edges()]}

    @classmethod
    def from_json(cls, obj):
        return cls(int(obj["n_int"]), float(obj.get("c", DEFAULT_CUTOFF)), obj.get("scheme", 'tails'))


def partition_edges(partition):
    """Intervals (lo, hi) covering the real line, tails included."""
    points = [-np.inf] + [float(e) for e in partition.edges()] + [np.inf]
    return list(zip(points[:-1], points[1:]))


def noon_state(params):
    phi = params.photon_number * params.phase
    psi = np.zeros(4, dtype=complex)
    psi[1] = 1 / np.sqrt(2)                   # |0, N>
    psi[2] = -np.exp(1j * phi) / np.sqrt(2)   # |N, 0>
    vacuum = np.zeros(4)
    vacuum[0] = 1.0
    rho = params.eta * np.outer(psi, psi.conj()) + (1 - params.eta) * np.outer(vacuum, vacuum)
    return BipartiteState(2, 2, rho, {"basis": ["|0>", f"|{params.photon_number}>"]})


def damping_from_eta(eta):
    return float(np.sqrt(eta / (2.0 - eta)))


def eta_from_damping(r):
    return 2 * r ** 2 / (1 + r ** 2)


@dataclass(frozen=True, eq=False)
class NoonChannel:
    """Amplitude damping Lambda_r followed by the unitary U; T*(A) = U^dagger Lambda_r*(A) U."""
    r: float
    damping: KrausChannel
    unitary: np.ndarray

    def composite(self):
        return KrausChannel(2, 2, tuple(K @ self.unitary for K in self.damping.kraus_ops))


def noon_channel(eta, photon_number=1, phase=0.0):
    if eta == 0:
        raise DomainError("eta = 0 leaves a rank-deficient marginal; the duality needs eta > 0")
    if not 0.0 < eta <= 1.0:
        raise InvalidInputError(f"eta must lie in (0, 1], got {eta}")
    r = damping_from_eta(eta)
    U = np.array([[0.0, 1.0], [-np.exp(1j * photon_number * phase), 0.0]])
    return NoonChannel(r, amplitude_damping_channel(r), U)


def hermite_h(photon_number):
    """Power-basis coefficients of H_N(q) / sqrt(2^N N!)."""
    coeffs = hermite.herm2poly([0] * photon_number + [1])
    return coeffs / math.sqrt(2 ** photon_number * math.factorial(photon_number))


def truncated_quadrature(theta, photon_number):
    """Kernel [[1, e^{-iN theta} h], [e^{iN theta} h, h^2]] exp(-q^2)/sqrt(pi)."""
    if photon_number < 1:
        raise InvalidInputError(f"photon number must be >= 1, got {photon_number}")
    h = hermite_h(photon_number)
    h2 = polynomial.polymul(h, h)
    phase = np.exp(1j * photon_number * theta)
    coeffs = np.zeros((len(h2), 2, 2), dtype=complex)
    coeffs[0, 0, 0] = 1.0
    coeffs[:len(h), 0, 1] = np.conj(phase) * h
    coeffs[:len(h), 1, 0] = phase * h
    coeffs[:, 1, 1] = h2
    return QubitKernelPovm(coeffs)


def damped_quadrature(theta, photon_number, r):
    return truncated_quadrature(theta, photon_number).transformed(amplitude_damping_channel(r))


def setting_angles(theta, photon_number):
    """Quadrature angles of a setting pair with relative phase theta."""
    return 0.0, theta / photon_number


def damped_pair_assemblage(eta, theta, photon_number, partition):
    """Coarse-grained damped quadratures with relative phase theta, at noise eta."""
    r = damping_from_eta(eta)
    intervals = partition_edges(partition)
    settings = tuple(coarse_grain(damped_quadrature(angle, photon_number, r), intervals)
                     for angle in setting_angles(theta, photon_number))
    labels = tuple(f"{lo}..{hi}" for lo, hi in intervals)
    return MeasurementAssemblage(settings, ("theta=0", f"theta={theta:.6f}"), (labels, labels))


def noon_assemblage(params, theta, partition):
    """Bob's conditional states when Alice measures coarse-grained truncated quadratures with relative phase theta."""
    intervals = partition_edges(partition)
    settings = tuple(coarse_grain(truncated_quadrature(angle, params.photon_number), intervals)
                     for angle in setting_angles(theta, params.photon_number))
    return assemblage_from_state(noon_state(params), MeasurementAssemblage(settings))


@dataclass
class SteeringPoint:
    eta: float
    theta: float
    ir: float
    csr: float


def steering_point(params, theta, partition):
    """IR of the damped pair and CSR of the NOON assemblage at one noise level; the two agree."""
    if params.eta == 0:
        raise DomainError("eta = 0 leaves a rank-deficient marginal; the duality needs eta > 0")
    ir = incompatibility_robustness(
        damped_pair_assemblage(params.eta, theta, params.photon_number, partition))
    csr = consistent_steering_robustness(noon_assemblage(params, theta, partition))
    if abs(ir - csr) > 1e-4:
        logger.warning(f"IR {ir:.6f} and CSR {csr:.6f} disagree at eta={params.eta}")
    return SteeringPoint(params.eta, theta, ir, csr)


def binarized_pair(theta, r):
    """Split-at-zero binarizations of the N = 1 damped quadratures at angles 0 and theta."""
    split = [(-np.inf, 0.0), (0.0, np.inf)]
    return tuple(BinaryQubitPovm.from_effect(coarse_grain(damped_quadrature(angle, 1, r), split).outcomes[1])
                 for angle in (0.0, theta))


def eta_lower_bound(n_settings):
    """Below 2/(n+1) the damped quadratures have an explicit joint observable."""
    if n_settings < 1:
        raise InvalidInputError(f"number of settings must be >= 1, got {n_settings}")
    return 2.0 / (n_settings + 1)


def eta_upper_bound_binarized(theta):
    """
    Noise above which the split-at-zero binarizations (N = 1) are incompatible:
    r^2 >= pi / (2 (1 + sin theta)). None when that exceeds r^2 = 1.
    """
    if not 0.0 < theta < np.pi:
        raise DomainError(f"theta must lie strictly between 0 and pi, got {theta}")
    r2 = np.pi / (2 * (1 + np.sin(theta)))
    if r2 > 1.0:
        return None
    return float(eta_from_damping(np.sqrt(r2)))


@dataclass
class Table1Row:
    n_int: int
    eta_c: float = None
    ir_at_eta_c: float = None
    wall_time_s: float = 0.0
    steps: int = 0
    method: str = 'sdp'
    error: str = None


def critical_eta(n_int, theta=np.pi / 2, photon_number=1, cutoff=DEFAULT_CUTOFF, scheme='tails', tol=1e-3):
    """Bisect the critical noise of the coarse-grained damped pair for one partition."""
    partition = IntervalPartition(n_int, cutoff, scheme)
    return bisect_critical_noise(
        lambda eta: damped_pair_assemblage(eta, theta, photon_number, partition),
        (eta_lower_bound(2), 1.0), tol)


def table1_cutoff(n_int):
    return TABLE1_CUTOFFS.get(n_int, DEFAULT_CUTOFF)


def critical_row(n_int, theta=np.pi / 2, photon_number=1, cutoff=None, scheme='tails', tol=1e-3):
    """
    One critical-noise row; the n_int = 2, N = 1 split-at-zero case is closed form.
    cutoff None takes the per-row table value.
    """
    start = time.time()
    if cutoff is None:
        cutoff = table1_cutoff(n_int)
    if n_int == 2 and photon_number == 1 and scheme == 'tails':
        bound = eta_upper_bound_binarized(theta)
        return Table1Row(n_int, bound, None, time.time() - start, 0, 'closed-form',
                         None if bound is not None else 'no binarized bound')
    result = critical_eta(n_int, theta, photon_number, cutoff, scheme, tol)
    return Table1Row(n_int, result.eta_c, result.ir_at_eta_c, time.time() - start, result.steps)


def table1_pipeline(n_int_list, theta=np.pi / 2, photon_number=1, cutoff=None,
                    scheme='tails', tol=1e-3, max_workers=1):
    """Critical noise per partition size; rows come back in input order."""
    n_int_list = [int(n) for n in n_int_list]
    if not n_int_list:
        raise InvalidInputError("n_int list is empty")
    for n in n_int_list:
        IntervalPartition(n, table1_cutoff(n) if cutoff is None else cutoff, scheme)
    logger.info(f"Starting critical-noise pipeline for n_int={n_int_list}, theta={theta:.4f}, "
                f"N={photon_number}, c={cutoff or 'per row'} (max_workers={max_workers})")

    rows = []
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_n = {executor.submit(critical_row, n, theta, photon_number, cutoff, scheme, tol): n
                       for n in n_int_list}
        for future in concurrent.futures.as_completed(future_to_n):
            n = future_to_n[future]
            try:
                row = future.result()
                logger.info(f"n_int={n}: eta_c={row.eta_c} ({row.method}, {row.wall_time_s:.1f}s)")
            except Exception as exc:
                logger.error(f"n_int={n} generated an exception: {exc}")
                row = Table1Row(n, error=str(exc))
            rows.append(row)

    rows.sort(key=lambda row: n_int_list.index(row.n_int))
    computed = [row for row in rows if row.eta_c is not None]
    ordered = sorted(computed, key=lambda row: row.n_int)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.eta_c > prev.eta_c + 2 * tol:
            logger.warning(f"eta_c increases from n_int={prev.n_int} ({prev.eta_c:.4f}) "
                           f"to n_int={cur.n_int} ({cur.eta_c:.4f})")
    return rows
