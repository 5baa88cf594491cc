"""
Finite-dimensional quantum objects and the state-channel duality.

A bipartite state rho on A (x) B with full-rank Bob marginal sigma corresponds
to a unique channel T from Bob's space to Alice's space with
rho = (T (x) Id)(|Omega_sigma><Omega_sigma|).

Tensor ordering is Alice-major: index = a * dim_b + b. The purification is
|Omega_sigma> = sum_n sqrt(s_n) |w_n>|w_n> with w_n the eigenvectors of sigma
(eigenvalues descending, largest-magnitude component of each eigenvector real
positive), so both of its marginals equal sigma. Transposes in the duality
are taken in the basis {w_n}; the basis travels in channel metadata.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import unitary_group

from errors import DomainError, InvalidInputError
from matcore import (PSD_TOL, RANK_TOL, as_hermitian, inv_sqrt_psd, matrix_from_json,
                     matrix_to_json, min_eigenvalue, sqrt_psd)

logger = logging.getLogger(__name__)

TRACE_TOL = 1e-9
TP_TOL = 1e-8


def _check_state(matrix, name):
    if min_eigenvalue(matrix) < -PSD_TOL:
        raise InvalidInputError(f"{name} is not PSD (min eigenvalue {min_eigenvalue(matrix):.3e})")
    tr = np.trace(matrix).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvalidInputError(f"{name} has trace {tr:.12f}, expected 1")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        matrix = as_hermitian(self.matrix, tol=1e-10, name='density matrix')
        _check_state(matrix, 'density matrix')
        object.__setattr__(self, 'matrix', matrix)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def to_json(self):
        return {"matrix": matrix_to_json(self.matrix)}

    @classmethod
    def from_json(cls, obj):
        return cls(matrix_from_json(obj.get("matrix"), 'density matrix'))


@dataclass(frozen=True, eq=False)
class BipartiteState:
    dim_a: int
    dim_b: int
    matrix: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        matrix = as_hermitian(self.matrix, tol=1e-10, name='bipartite state')
        if matrix.shape[0] != self.dim_a * self.dim_b:
            raise InvalidInputError(
                f"bipartite state has size {matrix.shape[0]}, expected {self.dim_a}*{self.dim_b}")
        _check_state(matrix, 'bipartite state')
        object.__setattr__(self, 'matrix', matrix)

    def _blocks(self):
        return self.matrix.reshape(self.dim_a, self.dim_b, self.dim_a, self.dim_b)

    def marginal_a(self):
        """tr_B rho"""
        return np.einsum('ibjb->ij', self._blocks())

    def marginal_b(self):
        """tr_A rho"""
        return np.einsum('aiaj->ij', self._blocks())

    def to_json(self):
        return {"dim_a": self.dim_a, "dim_b": self.dim_b,
                "matrix": matrix_to_json(self.matrix), "metadata": self.metadata}

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(int(obj["dim_a"]), int(obj["dim_b"]),
                       matrix_from_json(obj["matrix"], 'bipartite state'),
                       dict(obj.get("metadata", {})))
        except KeyError as e:
            raise InvalidInputError(f"bipartite state: missing field {e}") from e


@dataclass(frozen=True, eq=False)
class DiscretePovm:
    outcomes: tuple

    def __post_init__(self):
        effects = tuple(as_hermitian(E, tol=1e-10, name='effect') for E in self.outcomes)
        if not effects:
            raise InvalidInputError("a POVM needs at least one outcome")
        dim = effects[0].shape[0]
        for k, E in enumerate(effects):
            if E.shape[0] != dim:
                raise InvalidInputError(f"effect {k} has dim {E.shape[0]}, expected {dim}")
            if min_eigenvalue(E) < -PSD_TOL:
                raise InvalidInputError(f"effect {k} is not PSD (min eigenvalue {min_eigenvalue(E):.3e})")
        total = sum(effects)
        err = np.max(np.abs(total - np.eye(dim)))
        if err > PSD_TOL:
            raise InvalidInputError(f"effects sum to identity only within {err:.3e}")
        object.__setattr__(self, 'outcomes', effects)

    @property
    def dim(self):
        return self.outcomes[0].shape[0]

    def __len__(self):
        return len(self.outcomes)

    def coarse_grained(self, groups):
        """Merge outcomes: groups is a list of index lists covering every outcome exactly once."""
        flat = sorted(i for g in groups for i in g)
        if flat != list(range(len(self.outcomes))):
            raise InvalidInputError(f"groups {groups} do not partition {len(self.outcomes)} outcomes")
        return DiscretePovm(tuple(sum(self.outcomes[i] for i in g) for g in groups))

    def to_json(self):
        return {"dim": self.dim, "outcomes": [matrix_to_json(E) for E in self.outcomes]}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(matrix_from_json(E, 'effect') for E in obj.get("outcomes", [])))


@dataclass(frozen=True, eq=False)
class MeasurementAssemblage:
    settings: tuple
    setting_labels: tuple = None
    outcome_labels: tuple = None

    def __post_init__(self):
        settings = tuple(self.settings)
        if not settings:
            raise InvalidInputError("an assemblage needs at least one setting")
        dims = {povm.dim for povm in settings}
        if len(dims) != 1:
            raise InvalidInputError(f"settings act on different dimensions {sorted(dims)}")
        object.__setattr__(self, 'settings', settings)
        if self.setting_labels is None:
            object.__setattr__(self, 'setting_labels', tuple(f"x{x}" for x in range(len(settings))))
        if self.outcome_labels is None:
            object.__setattr__(self, 'outcome_labels',
                               tuple(tuple(str(a) for a in range(len(p))) for p in settings))

    @property
    def dim(self):
        return self.settings[0].dim

    @property
    def outcome_counts(self):
        return tuple(len(p) for p in self.settings)

    def effect(self, a, x):
        return self.settings[x].outcomes[a]

    def conjugate(self, U):
        """U M U^dagger for every effect."""
        return MeasurementAssemblage(
            tuple(DiscretePovm(tuple(U @ E @ U.conj().T for E in p.outcomes)) for p in self.settings),
            self.setting_labels, self.outcome_labels)

    def to_json(self):
        return {"settings": [p.to_json() for p in self.settings],
                "setting_labels": list(self.setting_labels),
                "outcome_labels": [list(o) for o in self.outcome_labels]}

    @classmethod
    def from_json(cls, obj):
        settings = tuple(DiscretePovm.from_json(p) for p in obj.get("settings", []))
        labels = obj.get("setting_labels")
        outcomes = obj.get("outcome_labels")
        return cls(settings, tuple(labels) if labels else None,
                   tuple(tuple(o) for o in outcomes) if outcomes else None)


@dataclass(frozen=True, eq=False)
class StateAssemblage:
    """Conditional states members[x][a] = sigma_{a|x}."""
    members: tuple
    setting_labels: tuple = None
    outcome_labels: tuple = None

    def __post_init__(self):
        members = tuple(tuple(as_hermitian(s, tol=1e-10, name='conditional state') for s in row)
                        for row in self.members)
        if not members or not all(members):
            raise InvalidInputError("a state assemblage needs at least one setting and outcome")
        for x, row in enumerate(members):
            for a, s in enumerate(row):
                if min_eigenvalue(s) < -PSD_TOL:
                    raise InvalidInputError(f"sigma_{{{a}|{x}}} is not PSD")
        marginals = [sum(row) for row in members]
        for x, m in enumerate(marginals[1:], start=1):
            err = np.max(np.abs(m - marginals[0]))
            if err > PSD_TOL:
                raise InvalidInputError(f"assemblage is signalling: setting {x} marginal differs by {err:.3e}")
        tr = np.trace(marginals[0]).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidInputError(f"assemblage has total trace {tr:.12f}, expected 1")
        object.__setattr__(self, 'members', members)
        if self.setting_labels is None:
            object.__setattr__(self, 'setting_labels', tuple(f"x{x}" for x in range(len(members))))
        if self.outcome_labels is None:
            object.__setattr__(self, 'outcome_labels',
                               tuple(tuple(str(a) for a in range(len(row))) for row in members))

    @property
    def dim(self):
        return self.members[0][0].shape[0]

    @property
    def outcome_counts(self):
        return tuple(len(row) for row in self.members)

    def marginal(self):
        return sum(self.members[0])

    def to_json(self):
        return {"members": [[matrix_to_json(s) for s in row] for row in self.members],
                "setting_labels": list(self.setting_labels),
                "outcome_labels": [list(o) for o in self.outcome_labels]}

    @classmethod
    def from_json(cls, obj):
        members = tuple(tuple(matrix_from_json(s, 'conditional state') for s in row)
                        for row in obj.get("members", []))
        labels = obj.get("setting_labels")
        outcomes = obj.get("outcome_labels")
        return cls(members, tuple(labels) if labels else None,
                   tuple(tuple(o) for o in outcomes) if outcomes else None)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Channel B(H_in) -> B(H_out), T(X) = sum_k K_k X K_k^dagger."""
    dim_in: int
    dim_out: int
    kraus_ops: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ops = tuple(np.asarray(K, dtype=complex) for K in self.kraus_ops)
        if not ops:
            raise InvalidInputError("a channel needs at least one Kraus operator")
        for k, K in enumerate(ops):
            if K.shape != (self.dim_out, self.dim_in):
                raise InvalidInputError(
                    f"Kraus operator {k} has shape {K.shape}, expected {(self.dim_out, self.dim_in)}")
        total = sum(K.conj().T @ K for K in ops)
        err = np.max(np.abs(total - np.eye(self.dim_in)))
        if err > TP_TOL:
            raise InvalidInputError(f"channel is not trace preserving (deviation {err:.3e})")
        object.__setattr__(self, 'kraus_ops', ops)

    def apply(self, rho):
        rho = np.asarray(rho)
        if rho.shape != (self.dim_in, self.dim_in):
            raise InvalidInputError(f"input has shape {rho.shape}, channel expects dim {self.dim_in}")
        return sum(K @ rho @ K.conj().T for K in self.kraus_ops)

    def adjoint(self, A):
        A = np.asarray(A)
        if A.shape != (self.dim_out, self.dim_out):
            raise InvalidInputError(f"observable has shape {A.shape}, channel output dim is {self.dim_out}")
        return sum(K.conj().T @ A @ K for K in self.kraus_ops)

    def compose(self, first):
        """self after first."""
        if first.dim_out != self.dim_in:
            raise InvalidInputError(f"cannot compose: {first.dim_out} != {self.dim_in}")
        ops = tuple(K2 @ K1 for K2 in self.kraus_ops for K1 in first.kraus_ops)
        return KrausChannel(first.dim_in, self.dim_out, ops)

    def to_json(self):
        return {"dim_in": self.dim_in, "dim_out": self.dim_out,
                "kraus_ops": [{"rows": K.shape[0], "cols": K.shape[1],
                               "entries": [[[z.real, z.imag] for z in row] for row in K]}
                              for K in self.kraus_ops],
                "metadata": self.metadata}

    @classmethod
    def from_json(cls, obj):
        try:
            ops = tuple(np.array([[complex(re, im) for re, im in row] for row in K["entries"]])
                        for K in obj["kraus_ops"])
            return cls(int(obj["dim_in"]), int(obj["dim_out"]), ops, dict(obj.get("metadata", {})))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInputError(f"malformed channel: {e}") from e


@dataclass(frozen=True)
class DeterministicStrategy:
    """Deterministic response functions lambda -> (a_1, ..., a_n) over all joint outcomes."""
    outcome_counts: tuple

    def labels(self):
        return list(itertools.product(*(range(m) for m in self.outcome_counts)))

    def responses(self, x, a):
        """Indices of the joint outcomes lambda with lambda_x = a."""
        return [i for i, lam in enumerate(self.labels()) if lam[x] == a]

    def __len__(self):
        return int(np.prod(self.outcome_counts))


def eigenbasis(sigma):
    """
    Eigenvalues (descending) and eigenvectors of sigma as columns of W. Each
    eigenvector has its largest-magnitude component made real and positive.
    """
    s, W = np.linalg.eigh(np.asarray(sigma, dtype=complex))
    s, W = s[::-1], W[:, ::-1].copy()
    for n in range(W.shape[1]):
        k = np.argmax(np.abs(W[:, n]))
        W[:, n] *= np.exp(-1j * np.angle(W[k, n]))
    return s, W


def transpose_in_basis(X, W):
    """Transpose of X taken in the orthonormal basis given by the columns of W."""
    return W @ (W.conj().T @ X @ W).T @ W.conj().T


def _check_full_rank(s, rank_tol):
    if s[-1] < rank_tol * s[0]:
        raise DomainError(
            f"marginal is rank deficient: eigenvalue {s[-1]:.3e} below {rank_tol:g} * {s[0]:.3e}")


def purify(sigma):
    """|Omega_sigma> = sum_n sqrt(s_n) |w_n w_n> as a pure BipartiteState on d (x) d."""
    sigma = sigma if isinstance(sigma, DensityMatrix) else DensityMatrix(sigma)
    s, W = eigenbasis(sigma.matrix)
    d = sigma.dim
    psi = (W * np.sqrt(np.clip(s, 0.0, None))) @ W.T
    vec = psi.reshape(d * d)
    return BipartiteState(d, d, np.outer(vec, vec.conj()),
                          {"transpose_basis": matrix_to_json(W)})


def state_to_channel(rho, rank_tol=RANK_TOL):
    """
    Channel T from Bob's space to Alice's with channel_to_state(T, tr_A rho) = rho.

    Kraus operators K_k = Psi_k conj(W) D^{-1/2} W^dagger, one per eigenvector of
    rho (Psi_k the eigenvector reshaped to dim_a x dim_b, D the eigenvalues of
    sigma = tr_A rho in the basis W).
    """
    sigma = rho.marginal_b()
    s, W = eigenbasis(sigma)
    _check_full_rank(s, rank_tol)
    mu, V = np.linalg.eigh(rho.matrix)
    keep = mu > rank_tol * mu[-1]
    right = W.conj() @ np.diag(1.0 / np.sqrt(s)) @ W.conj().T
    ops = []
    for m, v in zip(mu[keep][::-1], V[:, keep][:, ::-1].T):
        Psi = (np.sqrt(m) * v).reshape(rho.dim_a, rho.dim_b)
        ops.append(Psi @ right)
    logger.debug(f"state_to_channel: {len(ops)} Kraus operators, min marginal eigenvalue {s[-1]:.3e}")
    return KrausChannel(rho.dim_b, rho.dim_a, tuple(ops),
                        {"transpose_basis": matrix_to_json(W),
                         "convention": "transpose in eigenbasis of tr_A rho"})


def channel_to_state(channel, sigma):
    """rho = (T (x) Id)(|Omega_sigma><Omega_sigma|); tr_A rho = sigma."""
    sigma = sigma if isinstance(sigma, DensityMatrix) else DensityMatrix(sigma)
    if channel.dim_in != sigma.dim:
        raise InvalidInputError(f"channel input dim {channel.dim_in} != state dim {sigma.dim}")
    s, W = eigenbasis(sigma.matrix)
    omega = (W * np.sqrt(np.clip(s, 0.0, None))) @ W.T
    dim = channel.dim_out * sigma.dim
    rho = np.zeros((dim, dim), dtype=complex)
    for K in channel.kraus_ops:
        vec = (K @ omega).reshape(dim)
        rho += np.outer(vec, vec.conj())
    return BipartiteState(channel.dim_out, sigma.dim, rho,
                          {"transpose_basis": matrix_to_json(W),
                           "convention": "tr_A rho = sigma; transpose in eigenbasis of sigma"})


def heisenberg(channel, A):
    """T*(A) = sum_k K_k^dagger A K_k"""
    return channel.adjoint(A)


def heisenberg_assemblage(channel, assemblage):
    return MeasurementAssemblage(
        tuple(DiscretePovm(tuple(channel.adjoint(E) for E in p.outcomes)) for p in assemblage.settings),
        assemblage.setting_labels, assemblage.outcome_labels)


def assemblage_from_state(rho, measurements):
    """sigma_{a|x} = tr_A[(A_{a|x} (x) 1) rho]"""
    if measurements.dim != rho.dim_a:
        raise InvalidInputError(f"measurements act on dim {measurements.dim}, Alice has dim {rho.dim_a}")
    blocks = rho._blocks()
    members = tuple(tuple(np.einsum('ij,jbic->bc', E, blocks) for E in p.outcomes)
                    for p in measurements.settings)
    return StateAssemblage(members, measurements.setting_labels, measurements.outcome_labels)


def steering_equivalent_observables(assemblage, rank_tol=RANK_TOL):
    """B_{a|x} = sigma^{-1/2} sigma_{a|x} sigma^{-1/2}"""
    sigma = assemblage.marginal()
    s, _ = eigenbasis(sigma)
    _check_full_rank(s, rank_tol)
    S = inv_sqrt_psd(sigma, rank_tol)
    return MeasurementAssemblage(
        tuple(DiscretePovm(tuple(S @ m @ S for m in row)) for row in assemblage.members),
        assemblage.setting_labels, assemblage.outcome_labels)


def hidden_states_from_povm(povm, sigma):
    """sigma_lambda = sigma^{1/2} G_lambda sigma^{1/2}"""
    sigma = sigma if isinstance(sigma, DensityMatrix) else DensityMatrix(sigma)
    if povm.dim != sigma.dim:
        raise InvalidInputError(f"POVM dim {povm.dim} != state dim {sigma.dim}")
    R = sqrt_psd(sigma.matrix)
    return [R @ G @ R for G in povm.outcomes]


def unitary_from_pure_state(rho, rank_tol=RANK_TOL):
    """Single Kraus operator of the channel of a pure state with full Schmidt rank."""
    if rho.dim_a != rho.dim_b:
        raise DomainError(f"unitary channel needs equal dimensions, got {rho.dim_a} and {rho.dim_b}")
    channel = state_to_channel(rho, rank_tol)
    if len(channel.kraus_ops) != 1:
        raise DomainError(f"state has rank {len(channel.kraus_ops)}, expected a pure state")
    return channel.kraus_ops[0]


def separable_state(weights, states_a, states_b):
    """sum_i p_i rho_A^i (x) rho_B^i"""
    matrix = sum(p * np.kron(ra, rb) for p, ra, rb in zip(weights, states_a, states_b))
    return BipartiteState(states_a[0].shape[0], states_b[0].shape[0], matrix)


def entanglement_breaking_form(weights, states_b, rank_tol=RANK_TOL):
    """
    Measurement effects F_i of the measure-and-prepare channel of a separable
    state, T*(A) = sum_i tr[rho_A^i A] F_i with F_i = p_i sigma^{-1/2} tau(rho_B^i) sigma^{-1/2}.
    """
    sigma = sum(p * rb for p, rb in zip(weights, states_b))
    s, W = eigenbasis(sigma)
    _check_full_rank(s, rank_tol)
    S = inv_sqrt_psd(sigma, rank_tol)
    return [p * S @ transpose_in_basis(rb, W) @ S for p, rb in zip(weights, states_b)]


def identity_channel(dim):
    return KrausChannel(dim, dim, (np.eye(dim),))


def unitary_channel(U):
    U = np.asarray(U, dtype=complex)
    return KrausChannel(U.shape[1], U.shape[0], (U,))


def amplitude_damping_channel(r):
    """Kraus operators diag(1, r) and sqrt(1 - r^2)|0><1|."""
    if not 0.0 <= r <= 1.0:
        raise InvalidInputError(f"damping parameter r must lie in [0, 1], got {r}")
    K0 = np.array([[1.0, 0.0], [0.0, r]])
    K1 = np.array([[0.0, np.sqrt(1.0 - r ** 2)], [0.0, 0.0]])
    return KrausChannel(2, 2, (K0, K1))


def completely_depolarizing_channel(dim_in, dim_out):
    """T(X) = tr(X) 1/dim_out"""
    ops = []
    for i in range(dim_out):
        for j in range(dim_in):
            K = np.zeros((dim_out, dim_in))
            K[i, j] = 1.0 / np.sqrt(dim_out)
            ops.append(K)
    return KrausChannel(dim_in, dim_out, tuple(ops))


def random_density_matrix(dim, rng, rank=None):
    rank = rank or dim
    G = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_bipartite_state(dim_a, dim_b, rng, rank=None):
    return BipartiteState(dim_a, dim_b, random_density_matrix(dim_a * dim_b, rng, rank))


def random_unitary(dim, rng):
    return unitary_group.rvs(dim, random_state=rng)


def random_povm(dim, n_outcomes, rng):
    parts = [random_density_matrix(dim, rng) for _ in range(n_outcomes)]
    S = inv_sqrt_psd(sum(parts))
    return DiscretePovm(tuple(S @ P @ S for P in parts))
