"""
Gaussian steering calculus on parameter matrices.

Conventions: quadratures ordered (Q1, P1, Q2, P2, ...), symplectic form
Omega = direct sum of [[0, 1], [-1, 0]], vacuum covariance matrix V = 1.
A bipartite covariance matrix is V = [[V_A, Gamma^T], [Gamma, V_sigma]] with
Gamma of shape 2N_B x 2N_A. A channel (M, N, c) with M of shape
2N_in x 2N_out acts on states as V -> M^T V M + N, r -> M^T r + c, and a
measurement (K, L, m) with K of shape 2N x d has outcome mean K^T r + m and
covariance K^T V K + L.

A bipartite state with Bob marginal sigma of full symplectic rank is dual to
the channel M = (S^T Z S)^{-1} Gamma, N = V_A - M^T V_sigma M, and Bob can be
steered exactly when C_{M,N} = N - i M^T Omega M is not PSD.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from errors import DomainError, InvalidInputError
from matcore import (PSD_TOL, as_symmetric, direct_sum, min_eigenvalue, sqrt_psd,
                     symplectic_form, vector_from_json)

logger = logging.getLogger(__name__)

VACUUM_MARGIN = 1e-8
CHANNEL_TOL = 1e-8


def _modes(dim, name):
    if dim % 2:
        raise InvalidInputError(f"{name} has odd phase-space dimension {dim}")
    return dim // 2


def _real_matrix(M, shape, name):
    arr = np.asarray(M, dtype=float)
    if arr.ndim != 2 or (shape is not None and arr.shape != shape):
        raise InvalidInputError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def _vector(v, length, name):
    if v is None:
        return np.zeros(length)
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (length,):
        raise InvalidInputError(f"{name} has length {arr.shape[0]}, expected {length}")
    return arr


def _matrix_json(M):
    return [[float(x) for x in row] for row in np.atleast_2d(M)]


def _matrix_field(obj, key, context):
    if key not in obj:
        raise InvalidInputError(f"{context}: missing field '{key}'")
    try:
        return np.array(obj[key], dtype=float)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"{context}: field '{key}' is not a numeric matrix") from e


@dataclass(frozen=True, eq=False)
class GaussianState:
    V: np.ndarray
    r: np.ndarray = None

    def __post_init__(self):
        V = as_symmetric(self.V, 'covariance matrix')
        modes = _modes(V.shape[0], 'covariance matrix')
        margin = min_eigenvalue(V + 1j * symplectic_form(modes))
        if margin < -PSD_TOL:
            raise InvalidInputError(f"covariance matrix violates the uncertainty relation (margin {margin:.3e})")
        object.__setattr__(self, 'V', V)
        object.__setattr__(self, 'r', _vector(self.r, V.shape[0], 'displacement'))

    @property
    def modes(self):
        return self.V.shape[0] // 2

    def to_json(self):
        return {"modes": self.modes, "V": _matrix_json(self.V), "r": [float(x) for x in self.r]}

    @classmethod
    def from_json(cls, obj):
        V = _matrix_field(obj, "V", "state")
        return cls(V, vector_from_json(obj.get("r", [0.0] * V.shape[0]), V.shape[0], 'state.r'))


@dataclass(frozen=True, eq=False)
class GaussianBipartiteState:
    modes_a: int
    modes_b: int
    V: np.ndarray
    r: np.ndarray = None

    def __post_init__(self):
        V = as_symmetric(self.V, 'covariance matrix')
        dim = 2 * (self.modes_a + self.modes_b)
        if V.shape[0] != dim:
            raise InvalidInputError(f"covariance matrix has size {V.shape[0]}, expected {dim}")
        margin = min_eigenvalue(V + 1j * symplectic_form(self.modes_a + self.modes_b))
        if margin < -PSD_TOL:
            raise InvalidInputError(f"covariance matrix violates the uncertainty relation (margin {margin:.3e})")
        object.__setattr__(self, 'V', V)
        object.__setattr__(self, 'r', _vector(self.r, dim, 'displacement'))

    @classmethod
    def from_blocks(cls, V_A, V_sigma, Gamma, r_A=None, r_sigma=None):
        V_A, V_sigma, Gamma = np.asarray(V_A), np.asarray(V_sigma), np.asarray(Gamma)
        V = np.block([[V_A, Gamma.T], [Gamma, V_sigma]])
        na, nb = V_A.shape[0] // 2, V_sigma.shape[0] // 2
        r = np.concatenate([_vector(r_A, 2 * na, 'r_A'), _vector(r_sigma, 2 * nb, 'r_sigma')])
        return cls(na, nb, V, r)

    @property
    def _split(self):
        return 2 * self.modes_a

    @property
    def V_A(self):
        return self.V[:self._split, :self._split]

    @property
    def V_sigma(self):
        return self.V[self._split:, self._split:]

    @property
    def Gamma(self):
        return self.V[self._split:, :self._split]

    @property
    def r_A(self):
        return self.r[:self._split]

    @property
    def r_sigma(self):
        return self.r[self._split:]

    def marginal_b(self):
        return GaussianState(self.V_sigma, self.r_sigma)

    def to_json(self):
        return {"modes_a": self.modes_a, "modes_b": self.modes_b,
                "V": _matrix_json(self.V), "r": [float(x) for x in self.r]}

    @classmethod
    def from_json(cls, obj):
        try:
            na, nb = int(obj["modes_a"]), int(obj["modes_b"])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInputError(f"state: missing or invalid 'modes_a'/'modes_b' ({e})") from e
        V = _matrix_field(obj, "V", "state")
        dim = 2 * (na + nb)
        if V.shape != (dim, dim):
            raise InvalidInputError(f"state: 'V' has shape {V.shape}, expected {(dim, dim)}")
        return cls(na, nb, V, vector_from_json(obj.get("r", [0.0] * dim), dim, 'state.r'))


@dataclass(frozen=True, eq=False)
class GaussianChannel:
    """V -> M^T V M + N, r -> M^T r + c; M maps 2N_in x 2N_out."""
    M: np.ndarray
    N: np.ndarray
    c: np.ndarray = None

    def __post_init__(self):
        M = _real_matrix(self.M, None, 'M')
        N = as_symmetric(self.N, 'N')
        if N.shape[0] != M.shape[1]:
            raise InvalidInputError(f"N has size {N.shape[0]}, M has {M.shape[1]} columns")
        _modes(M.shape[0], 'channel input')
        modes_out = _modes(M.shape[1], 'channel output')
        object.__setattr__(self, 'M', M)
        object.__setattr__(self, 'N', N)
        object.__setattr__(self, 'c', _vector(self.c, M.shape[1], 'c'))
        margin = min_eigenvalue(channel_matrix(self) + 1j * symplectic_form(modes_out))
        if margin < -CHANNEL_TOL:
            raise InvalidInputError(f"channel is not completely positive (margin {margin:.3e})")

    @property
    def modes_in(self):
        return self.M.shape[0] // 2

    @property
    def modes_out(self):
        return self.M.shape[1] // 2

    def to_json(self):
        return {"M": _matrix_json(self.M), "N": _matrix_json(self.N), "c": [float(x) for x in self.c]}

    @classmethod
    def from_json(cls, obj):
        M = _matrix_field(obj, "M", "channel")
        return cls(M, _matrix_field(obj, "N", "channel"), obj.get("c"))


@dataclass(frozen=True, eq=False)
class GaussianMeasurement:
    """Outcome mean K^T r + m, covariance K^T V K + L; needs L - i K^T Omega K >= 0."""
    K: np.ndarray
    L: np.ndarray
    m: np.ndarray = None

    def __post_init__(self):
        K = _real_matrix(self.K, None, 'K')
        L = as_symmetric(np.atleast_2d(self.L), 'L')
        if L.shape[0] != K.shape[1]:
            raise InvalidInputError(f"L has size {L.shape[0]}, K has {K.shape[1]} columns")
        modes = _modes(K.shape[0], 'measured system')
        margin = min_eigenvalue(L - 1j * K.T @ symplectic_form(modes) @ K)
        if margin < -PSD_TOL:
            raise InvalidInputError(f"measurement violates the positivity condition (margin {margin:.3e})")
        object.__setattr__(self, 'K', K)
        object.__setattr__(self, 'L', L)
        object.__setattr__(self, 'm', _vector(self.m, K.shape[1], 'm'))

    def to_json(self):
        return {"K": _matrix_json(self.K), "L": _matrix_json(self.L), "m": [float(x) for x in self.m]}

    @classmethod
    def from_json(cls, obj):
        return cls(_matrix_field(obj, "K", "measurement"), _matrix_field(obj, "L", "measurement"), obj.get("m"))


@dataclass(frozen=True, eq=False)
class GaussianPostprocessing:
    """Classical Gaussian channel on outcomes; only N >= 0 is required."""
    M: np.ndarray
    N: np.ndarray
    c: np.ndarray = None

    def __post_init__(self):
        M = _real_matrix(self.M, None, 'M')
        N = as_symmetric(np.atleast_2d(self.N), 'N')
        if N.shape[0] != M.shape[1]:
            raise InvalidInputError(f"N has size {N.shape[0]}, M has {M.shape[1]} columns")
        if min_eigenvalue(N) < -PSD_TOL:
            raise InvalidInputError("postprocessing noise N is not PSD")
        object.__setattr__(self, 'M', M)
        object.__setattr__(self, 'N', N)
        object.__setattr__(self, 'c', _vector(self.c, M.shape[1], 'c'))


@dataclass(frozen=True, eq=False)
class WilliamsonDecomposition:
    """V = S^T diag(nu_1, nu_1, nu_2, nu_2, ...) S with S symplectic."""
    S: np.ndarray
    nu: np.ndarray

    @property
    def D(self):
        return np.diag(np.repeat(self.nu, 2))

    def Z(self):
        """Direct sum of sqrt(nu_i^2 - 1) sigma_z."""
        return direct_sum(*(np.sqrt(max(n * n - 1.0, 0.0)) * np.diag([1.0, -1.0]) for n in self.nu))


@dataclass(frozen=True, eq=False)
class GaussianLhs:
    """
    Hidden variable lambda ~ exp(-lambda^T V_A^{-1} lambda) (covariance V_A / 2),
    member states with covariance member_cm and displacement r_sigma + shift @ lambda.
    """
    weight_cm: np.ndarray
    member_cm: np.ndarray
    shift: np.ndarray
    center: np.ndarray

    @property
    def lambda_covariance(self):
        return self.weight_cm / 2

    def member_displacement(self, lam):
        return self.center + self.shift @ np.asarray(lam, dtype=float)

    def member_state(self, lam):
        return GaussianState(self.member_cm, self.member_displacement(lam))

    def ensemble_cm(self):
        """Covariance matrix of the mixture: member_cm + 2 Cov(r_lambda)."""
        return self.member_cm + 2 * self.shift @ self.lambda_covariance @ self.shift.T


def channel_matrix(channel):
    """C_{M,N} = N - i M^T Omega M"""
    omega = symplectic_form(channel.M.shape[0] // 2)
    return channel.N - 1j * channel.M.T @ omega @ channel.M


def williamson(V):
    """
    Symplectic diagonalization from the eigenvectors of i V^{1/2} Omega V^{1/2}.

    nu is sorted descending. Mode k of S is built from the eigenvector u_k of
    +nu_k as rows sqrt(2) Im u_k, sqrt(2) Re u_k. Each 2-row block of S is then
    signed so that its first non-negligible entry, scanning column by column,
    is positive; flipping both rows of a block leaves S symplectic and nu fixed.
    """
    V = as_symmetric(V, 'V')
    n = _modes(V.shape[0], 'V')
    w = np.linalg.eigvalsh(V)
    if w[0] <= 1e-12 * max(w[-1], 1.0):
        raise DomainError(f"V is not positive definite (min eigenvalue {w[0]:.3e})")
    R = sqrt_psd(V).real
    H = 1j * R @ symplectic_form(n) @ R
    evals, evecs = np.linalg.eigh((H + H.conj().T) / 2)
    nu = evals[n:][::-1]
    vecs = evecs[:, n:][:, ::-1]
    O = np.zeros((2 * n, 2 * n))
    for k in range(n):
        u = vecs[:, k]
        lead = np.flatnonzero(np.abs(u) > 1e-6 * np.max(np.abs(u)))[0]
        u = u * 1j * np.exp(-1j * np.angle(u[lead]))
        O[:, 2 * k] = np.sqrt(2) * u.imag
        O[:, 2 * k + 1] = np.sqrt(2) * u.real
    S = np.diag(1 / np.sqrt(np.repeat(nu, 2))) @ O.T @ R
    for k in range(n):
        block = S[2 * k:2 * k + 2].T.ravel()
        lead = block[np.flatnonzero(np.abs(block) > 1e-9 * np.max(np.abs(block)))[0]]
        if lead < 0:
            S[2 * k:2 * k + 2] *= -1
    return WilliamsonDecomposition(S, nu)


def symplectic_eigenvalues(V):
    return williamson(V).nu


def apply_channel_state(channel, state):
    if state.V.shape[0] != channel.M.shape[0]:
        raise InvalidInputError(f"state has dimension {state.V.shape[0]}, channel expects {channel.M.shape[0]}")
    M = channel.M
    return GaussianState(M.T @ state.V @ M + channel.N, M.T @ state.r + channel.c)


def compose_channels(first, second):
    """second after first."""
    if first.M.shape[1] != second.M.shape[0]:
        raise InvalidInputError(f"cannot compose: {first.M.shape[1]} != {second.M.shape[0]}")
    M2 = second.M
    return GaussianChannel(first.M @ M2, M2.T @ first.N @ M2 + second.N, M2.T @ first.c + second.c)


def apply_channel_measurement(channel, measurement):
    """(K, L, m) -> (M K, L + K^T N K, m + K^T c)"""
    K = measurement.K
    if K.shape[0] != channel.M.shape[1]:
        raise InvalidInputError(f"measurement acts on dimension {K.shape[0]}, channel outputs {channel.M.shape[1]}")
    return GaussianMeasurement(channel.M @ K, measurement.L + K.T @ channel.N @ K, measurement.m + K.T @ channel.c)


def postprocess(measurement, post):
    """(K, L, m) -> (K M, N + M^T L M, c + M^T m)"""
    if post.M.shape[0] != measurement.K.shape[1]:
        raise InvalidInputError(f"postprocessing expects {post.M.shape[0]} outcomes, got {measurement.K.shape[1]}")
    M = post.M
    return GaussianMeasurement(measurement.K @ M, post.N + M.T @ measurement.L @ M, post.c + M.T @ measurement.m)


def outcome_moments(measurement, state):
    """(mean, covariance matrix) of the outcome distribution, same normalization as V."""
    K = measurement.K
    return K.T @ state.r + measurement.m, K.T @ state.V @ K + measurement.L


def noisy_quadrature(x, xi):
    """Quadrature x^T R with Gaussian noise of variance xi^2: K = x, L = 2 xi^2."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    return GaussianMeasurement(x, [[2 * xi ** 2]])


def quadrature_marginal(measurement, index):
    """Marginal of one outcome coordinate by the projection postprocessing."""
    d = measurement.K.shape[1]
    M = np.zeros((d, 1))
    M[index, 0] = 1.0
    return postprocess(measurement, GaussianPostprocessing(M, [[0.0]]))


def channel_as_measurement(channel):
    """Read a channel with C_{M,N} >= 0 as a joint observable (K, L, m) = (M, N, c)."""
    margin = min_eigenvalue(channel_matrix(channel))
    if margin < -PSD_TOL:
        raise DomainError(f"C_MN is not PSD (min eigenvalue {margin:.3e}); channel is not incompatibility breaking")
    return GaussianMeasurement(channel.M, channel.N, channel.c)


def measurement_as_postprocessing(measurement):
    return GaussianPostprocessing(measurement.K, measurement.L, measurement.m)


def gaussian_state_to_channel(state):
    wd = williamson(state.V_sigma)
    if np.any(wd.nu <= 1 + VACUUM_MARGIN):
        raise DomainError(
            f"Bob marginal has a vacuum mode (symplectic eigenvalues {np.round(wd.nu, 10).tolist()}); "
            "factor out vacuum modes before building the channel")
    T = wd.S.T @ wd.Z() @ wd.S
    M = np.linalg.solve(T, state.Gamma)
    N = state.V_A - M.T @ state.V_sigma @ M
    c = state.r_A - M.T @ state.r_sigma
    return GaussianChannel(M, N, c)


def gaussian_channel_to_state(channel, sigma):
    wd = williamson(sigma.V)
    if np.any(wd.nu <= 1 + VACUUM_MARGIN):
        raise DomainError(f"state has a vacuum mode (symplectic eigenvalues {np.round(wd.nu, 10).tolist()})")
    if channel.M.shape[0] != sigma.V.shape[0]:
        raise InvalidInputError(f"channel input dimension {channel.M.shape[0]} != state dimension {sigma.V.shape[0]}")
    T = wd.S.T @ wd.Z() @ wd.S
    M = channel.M
    return GaussianBipartiteState.from_blocks(
        M.T @ sigma.V @ M + channel.N, sigma.V, T @ M, M.T @ sigma.r + channel.c, sigma.r)


def purification_cm(V_sigma):
    """Covariance matrix of the Gaussian purification [[V, S^T Z S], [S^T Z S, V]]."""
    wd = williamson(V_sigma)
    T = wd.S.T @ wd.Z() @ wd.S
    return np.block([[V_sigma, T], [T, V_sigma]])


def steering_margin(state):
    """Minimum eigenvalue of V + i(0 (+) Omega_B)."""
    omega = direct_sum(np.zeros((2 * state.modes_a, 2 * state.modes_a)), symplectic_form(state.modes_b))
    return min_eigenvalue(state.V + 1j * omega)


def is_steerable(state, tol=PSD_TOL):
    return steering_margin(state) < -tol


def is_steerable_by_channel(state, tol=PSD_TOL):
    """Same verdict from the dual channel: C_{M,N} not PSD."""
    return min_eigenvalue(channel_matrix(gaussian_state_to_channel(state))) < -tol


def is_gaussian_incompatibility_breaking(channel, tol=PSD_TOL):
    return min_eigenvalue(channel_matrix(channel)) >= -tol


def noisy_quadratures_jm(x, xi, y, xi_prime):
    """Noisy quadratures are jointly measurable iff xi xi' >= |x^T Omega y| / 2."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if xi < 0 or xi_prime < 0:
        raise InvalidInputError("noise parameters must be non-negative")
    commutator = x @ symplectic_form(_modes(len(x), 'x')) @ y
    return bool(xi * xi_prime >= abs(commutator) / 2 - 1e-12)


def breaks_canonical_pair(channel, x, y):
    """True when the channel images of the quadratures x, y are jointly measurable."""
    xi = np.sqrt(max(x @ channel.N @ x, 0.0) / 2)
    xi_prime = np.sqrt(max(y @ channel.N @ y, 0.0) / 2)
    return noisy_quadratures_jm(channel.M @ x, xi, channel.M @ y, xi_prime)


@dataclass
class SteeringWitness:
    x: np.ndarray
    y: np.ndarray
    xi: float
    xi_prime: float
    commutator: float
    margin: float
    min_eigenvalue: float

    def to_json(self):
        return {"x": self.x.tolist(), "y": self.y.tolist(), "xi": self.xi, "xi_prime": self.xi_prime,
                "commutator": self.commutator, "violation_margin": self.margin,
                "min_eigenvalue": self.min_eigenvalue}


def channel_steering_witness(channel, tol=PSD_TOL):
    """Canonical pair x^T Omega y = 1 whose channel images are incompatible."""
    C = channel_matrix(channel)
    evals, evecs = np.linalg.eigh(C)
    if evals[0] >= -tol:
        raise DomainError(f"C_MN is PSD (min eigenvalue {evals[0]:.3e}); no steering witness exists")
    v = evecs[:, 0]
    lead = np.flatnonzero(np.abs(v) > 1e-6 * np.max(np.abs(v)))[0]
    v = v * np.exp(-1j * np.angle(v[lead]))
    y, x = v.real, v.imag
    omega_out = symplectic_form(channel.modes_out)
    scale = x @ omega_out @ y
    x, y = x / np.sqrt(scale), y / np.sqrt(scale)
    xi = float(np.sqrt(max(x @ channel.N @ x, 0.0) / 2))
    xi_prime = float(np.sqrt(max(y @ channel.N @ y, 0.0) / 2))
    commutator = float((channel.M @ x) @ symplectic_form(channel.modes_in) @ (channel.M @ y))
    margin = abs(commutator) / 2 - xi * xi_prime
    logger.debug(f"steering witness: commutator {commutator:.6f}, noise product {xi * xi_prime:.6f}")
    return SteeringWitness(x, y, xi, xi_prime, commutator, margin, float(evals[0]))


def steering_witness(state):
    if not is_steerable(state):
        raise DomainError(f"state is not steerable (margin {steering_margin(state):.3e})")
    return channel_steering_witness(gaussian_state_to_channel(state))


def covariant_joint_measurement(xi, xi_prime):
    """
    Joint measurement of the noisy canonical pair Q (noise xi) and P (noise xi'):
    K = 1, m = 0, L = [[2 xi^2, -w/c], [-w/c, 2 xi'^2]] with c = 1/(4 xi^2),
    w = sqrt(c xi'^2 - c^2), so that det L = 1.
    """
    if xi <= 0 or xi_prime <= 0 or xi * xi_prime < 0.5 - 1e-12:
        raise DomainError(f"xi * xi' = {xi * xi_prime:.6f} < 1/2: the noisy pair is not jointly measurable")
    c = 1 / (4 * xi ** 2)
    w = np.sqrt(max(c * xi_prime ** 2 - c ** 2, 0.0))
    L = np.array([[2 * xi ** 2, -w / c], [-w / c, 2 * xi_prime ** 2]])
    return GaussianMeasurement(np.eye(2), L)


def gaussian_lhs(state):
    """Local hidden state model of an unsteerable state."""
    if is_steerable(state):
        raise DomainError(f"state is steerable (margin {steering_margin(state):.3e}); no LHS model exists")
    V_A = state.V_A
    if min_eigenvalue(V_A) <= 0:
        raise DomainError("V_A is not positive definite")
    shift = -np.linalg.solve(V_A, state.Gamma.T).T
    member = state.V_sigma + shift @ state.Gamma.T
    member = (member + member.T) / 2
    return GaussianLhs(V_A, member, shift, state.r_sigma)


def thermal_state(modes, nu):
    return GaussianState(nu * np.eye(2 * modes))


def two_mode_squeezed_state(squeezing):
    ch, sh = np.cosh(2 * squeezing), np.sinh(2 * squeezing)
    Z = np.diag([1.0, -1.0])
    return GaussianBipartiteState.from_blocks(ch * np.eye(2), ch * np.eye(2), sh * Z)


def product_state(V_A, V_B):
    V_A, V_B = np.asarray(V_A, dtype=float), np.asarray(V_B, dtype=float)
    return GaussianBipartiteState.from_blocks(V_A, V_B, np.zeros((V_B.shape[0], V_A.shape[0])))


def with_bob_noise(state, eps):
    """V_sigma -> V_sigma + eps 1"""
    return GaussianBipartiteState.from_blocks(state.V_A, state.V_sigma + eps * np.eye(2 * state.modes_b),
                                              state.Gamma, state.r_A, state.r_sigma)


def random_symplectic(modes, rng, scale=0.5):
    H = rng.normal(scale=scale, size=(2 * modes, 2 * modes))
    return expm(symplectic_form(modes) @ (H + H.T) / 2)


def random_covariance_matrix(modes, rng, nu_range=(1.2, 3.0)):
    S = random_symplectic(modes, rng)
    nu = rng.uniform(*nu_range, size=modes)
    return S.T @ np.diag(np.repeat(nu, 2)) @ S


def random_gaussian_channel(modes_in, modes_out, rng, noise=0.0, scale=0.7):
    """Random M with the least noise N making it a channel, plus noise * 1."""
    M = rng.normal(scale=scale, size=(2 * modes_in, 2 * modes_out))
    A = symplectic_form(modes_out) - M.T @ symplectic_form(modes_in) @ M
    w, U = np.linalg.eigh(1j * A)
    N = ((U * np.abs(w)) @ U.conj().T).real
    return GaussianChannel(M, N + noise * np.eye(2 * modes_out))


def random_bipartite_state(modes_a, modes_b, rng, noise=None):
    """A random channel applied to the purification of a random Bob marginal."""
    sigma = GaussianState(random_covariance_matrix(modes_b, rng))
    noise = rng.uniform(0.0, 1.5) if noise is None else noise
    return gaussian_channel_to_state(random_gaussian_channel(modes_b, modes_a, rng, noise), sigma)
