"""
Amplitude damping by a Lorentzian bath.

The excited-state amplitude decays as
    G(t) = exp(-lambda t / 2) (cosh(w lambda t / 2) + sinh(w lambda t / 2) / w),
    w = sqrt(1 - 2u / lambda),
which is real for every coupling u: for u > lambda / 2, w is imaginary and the
hyperbolic functions turn into cos / sin. The damping parameter of the channel
is r(t) = |G(t)| and the time-local decay rate is gamma(t) = -2 Re G'(t) / G(t).
The dynamically damped NOON state stays steerable by the pair of quadratures
at angles 0 and pi/2 while r(t) >= r_c.
"""

import concurrent.futures
import logging
from dataclasses import dataclass

import numpy as np

from errors import InvalidInputError, PoleError

logger = logging.getLogger(__name__)

DEFAULT_RC = 1 / np.sqrt(2)
POLE_TOL = 1e-9


@dataclass(frozen=True)
class LorentzianBath:
    coupling: float
    linewidth: float = 1.0

    def __post_init__(self):
        if not self.linewidth > 0:
            raise InvalidInputError(f"linewidth must be positive, got {self.linewidth}")
        if not self.coupling > 0:
            raise InvalidInputError(f"coupling must be positive, got {self.coupling}")

    @property
    def w(self):
        return np.sqrt(complex(1 - 2 * self.coupling / self.linewidth))


def _sinhc(x):
    """sinh(x) / x, continuous at x = 0."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    return np.where(small, 1 + x ** 2 / 6, np.sinh(safe) / safe)


def _times(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidInputError("times must be non-negative")
    return t


def coherence_amplitude(bath, t):
    """G(t), real and signed."""
    t = _times(t)
    lam, w = bath.linewidth, bath.w
    x = w * lam * t / 2
    # sinh(x) / w = (lambda t / 2) sinhc(x) stays finite at w = 0
    G = np.exp(-lam * t / 2) * (np.cosh(x) + lam * t / 2 * _sinhc(x))
    return G.real


def damping_factor(bath, t):
    """r(t) = |G(t)|"""
    return np.abs(coherence_amplitude(bath, t))


def decay_rate(bath, t):
    """
    gamma(t) = 2u sinh(x) / (w cosh(x) + sinh(x)) with x = w lambda t / 2, from the
    analytic derivative G'(t) = -u exp(-lambda t / 2) sinh(x) / w.
    """
    t = _times(t)
    lam, u, w = bath.linewidth, bath.coupling, bath.w
    x = w * lam * t / 2
    numerator = 2 * u * (lam * t / 2) * _sinhc(x)
    denominator = np.cosh(x) + (lam * t / 2) * _sinhc(x)
    if np.any(np.abs(denominator) < POLE_TOL):
        k = np.flatnonzero(np.abs(np.atleast_1d(denominator)) < POLE_TOL)[0]
        raise PoleError(f"coherence amplitude vanishes at t = {np.atleast_1d(t)[k]:.6f}")
    return (numerator / denominator).real


def non_markovian_intervals(bath, t_grid):
    """Maximal runs of the grid where gamma(t) < 0, as (t_start, t_end) pairs."""
    t_grid = np.asarray(t_grid, dtype=float)
    gamma = decay_rate(bath, t_grid)
    return [(t_grid[i], t_grid[j]) for i, j in _runs(gamma < 0)]


def _runs(mask):
    """Index ranges [i, j] of consecutive True entries."""
    runs, start = [], None
    for k, flag in enumerate(mask):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            runs.append((start, k - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def count_windows(mask):
    return len(_runs(mask))


@dataclass
class SteerableRegion:
    couplings: np.ndarray
    times: np.ndarray
    r: np.ndarray
    steerable: np.ndarray
    windows: list
    r_c: float

    def rows(self):
        """(u, t, r, steerable) in grid order, u outermost."""
        for i, u in enumerate(self.couplings):
            for j, t in enumerate(self.times):
                yield float(u), float(t), float(self.r[i, j]), bool(self.steerable[i, j])


def steerable_region(couplings, times, r_c=DEFAULT_RC, linewidth=1.0, max_workers=1):
    """Grid of r(t) >= r_c verdicts with the number of steerable time windows per coupling."""
    couplings = np.asarray(couplings, dtype=float)
    times = _times(times)
    if np.any(np.diff(couplings) < 0) or np.any(np.diff(times) < 0):
        raise InvalidInputError("coupling and time grids must be sorted ascending")
    logger.info(f"Computing steerable region on {len(couplings)}x{len(times)} grid, r_c={r_c:.4f}")

    r = np.zeros((len(couplings), len(times)))
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_index = {executor.submit(damping_factor, LorentzianBath(u, linewidth), times): i
                           for i, u in enumerate(couplings)}
        for future in concurrent.futures.as_completed(future_to_index):
            r[future_to_index[future]] = future.result()

    steerable = r >= r_c
    windows = [count_windows(row) for row in steerable]
    return SteerableRegion(couplings, times, r, steerable, windows, r_c)
