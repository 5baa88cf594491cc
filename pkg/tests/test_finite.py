import numpy as np
import pytest

from errors import DomainError, InvalidInputError
from finite import (BipartiteState, DensityMatrix, DiscretePovm, KrausChannel, MeasurementAssemblage,
                    amplitude_damping_channel, assemblage_from_state, channel_to_state,
                    completely_depolarizing_channel, eigenbasis, entanglement_breaking_form, heisenberg,
                    heisenberg_assemblage, hidden_states_from_povm, identity_channel, purify,
                    random_bipartite_state, random_density_matrix, random_povm, random_unitary,
                    separable_state, state_to_channel, steering_equivalent_observables, transpose_in_basis,
                    unitary_channel, unitary_from_pure_state)


@pytest.mark.parametrize("dim_a,dim_b", [(2, 2), (3, 3), (2, 4)])
def test_state_channel_round_trip(dim_a, dim_b):
    """Test that a random state with full-rank marginal is rebuilt from its channel."""
    rng = np.random.default_rng(10 + dim_a * dim_b)
    for trial in range(5):
        rho = random_bipartite_state(dim_a, dim_b, rng)
        channel = state_to_channel(rho)
        back = channel_to_state(channel, rho.marginal_b())
        assert np.max(np.abs(back.matrix - rho.matrix)) < 1e-8


def test_channel_state_round_trip_unitary():
    """Test that channel -> state -> channel keeps the Heisenberg action."""
    rng = np.random.default_rng(11)
    U = random_unitary(3, rng)
    sigma = random_density_matrix(3, rng)
    rho = channel_to_state(unitary_channel(U), sigma)
    channel = state_to_channel(rho)
    A = random_density_matrix(3, rng)
    assert np.allclose(heisenberg(channel, A), U.conj().T @ A @ U, atol=1e-8)


def test_channel_to_state_marginal_is_sigma():
    """Test that the state of a channel has Bob marginal sigma."""
    rng = np.random.default_rng(12)
    sigma = random_density_matrix(2, rng)
    rho = channel_to_state(amplitude_damping_channel(0.6), sigma)
    assert np.allclose(rho.marginal_b(), sigma, atol=1e-12)


def test_purification_marginals():
    """Test that both marginals of the purification equal sigma."""
    rng = np.random.default_rng(13)
    sigma = random_density_matrix(3, rng)
    psi = purify(sigma)
    assert np.allclose(psi.marginal_a(), sigma, atol=1e-12)
    assert np.allclose(psi.marginal_b(), sigma, atol=1e-12)
    assert np.isclose(np.trace(psi.matrix @ psi.matrix).real, 1.0)


def test_rank_deficient_marginal_is_domain_error():
    """Test that a product state with pure Bob marginal has no channel."""
    rho_b = np.diag([1.0, 0.0])
    rho = BipartiteState(2, 2, np.kron(np.eye(2) / 2, rho_b))
    with pytest.raises(DomainError):
        state_to_channel(rho)


def test_steering_equivalent_observables_are_transposed_heisenberg_images():
    """Test B_{a|x} = transpose of T*(A_{a|x}) in sigma's eigenbasis."""
    rng = np.random.default_rng(14)
    rho = random_bipartite_state(2, 3, rng)
    measurements = MeasurementAssemblage((random_povm(2, 3, rng), random_povm(2, 2, rng)))
    assemblage = assemblage_from_state(rho, measurements)
    observables = steering_equivalent_observables(assemblage)
    channel = state_to_channel(rho)
    _, W = eigenbasis(rho.marginal_b())
    for x, povm in enumerate(measurements.settings):
        for a, A in enumerate(povm.outcomes):
            expected = transpose_in_basis(heisenberg(channel, A), W)
            assert np.allclose(observables.effect(a, x), expected, atol=1e-8)


def test_hidden_states_reproduce_assemblage():
    """Test that hidden states of a parent POVM reproduce the marginal."""
    rng = np.random.default_rng(15)
    sigma = random_density_matrix(2, rng)
    povm = random_povm(2, 4, rng)
    states = hidden_states_from_povm(povm, sigma)
    assert np.allclose(sum(states), sigma, atol=1e-10)
    assert all(np.linalg.eigvalsh(s)[0] > -1e-12 for s in states)


def test_entanglement_breaking_form():
    """Test the measure-and-prepare form of the channel of a separable state."""
    rng = np.random.default_rng(16)
    weights = [0.5, 0.3, 0.2]
    states_a = [random_density_matrix(2, rng) for _ in weights]
    states_b = [random_density_matrix(2, rng) for _ in weights]
    rho = separable_state(weights, states_a, states_b)
    effects = entanglement_breaking_form(weights, states_b)
    assert np.allclose(sum(effects), np.eye(2), atol=1e-10)
    assert all(np.linalg.eigvalsh(F)[0] > -1e-10 for F in effects)

    channel = state_to_channel(rho)
    A = random_density_matrix(2, rng)
    expected = sum(np.trace(ra @ A) * F for ra, F in zip(states_a, effects))
    assert np.allclose(heisenberg(channel, A), expected, atol=1e-8)


def test_pure_state_gives_unitary():
    """Test that a pure state of full Schmidt rank has a unitary channel."""
    rng = np.random.default_rng(17)
    psi = rng.normal(size=9) + 1j * rng.normal(size=9)
    psi /= np.linalg.norm(psi)
    rho = BipartiteState(3, 3, np.outer(psi, psi.conj()))
    U = unitary_from_pure_state(rho)
    assert np.allclose(U.conj().T @ U, np.eye(3), atol=1e-8)
    assert np.allclose(U @ U.conj().T, np.eye(3), atol=1e-8)


def test_mixed_state_has_no_unitary():
    """Test that a mixed state is refused by the unitary extraction."""
    rng = np.random.default_rng(18)
    with pytest.raises(DomainError):
        unitary_from_pure_state(random_bipartite_state(2, 2, rng))


def test_heisenberg_assemblage_of_identity():
    """Test that the identity channel leaves an assemblage unchanged."""
    rng = np.random.default_rng(19)
    assemblage = MeasurementAssemblage((random_povm(2, 2, rng),))
    image = heisenberg_assemblage(identity_channel(2), assemblage)
    assert np.allclose(image.effect(1, 0), assemblage.effect(1, 0))


def test_kraus_channel_rejects_non_trace_preserving():
    """Test that a Kraus set not summing to identity is invalid."""
    with pytest.raises(InvalidInputError):
        KrausChannel(2, 2, (np.diag([1.0, 0.5]),))


def test_density_matrix_rejects_bad_trace():
    """Test that a state with trace 2 is invalid."""
    with pytest.raises(InvalidInputError):
        DensityMatrix(np.eye(2))


def test_compose_and_depolarize():
    """Test composition order and the completely depolarizing channel."""
    damp = amplitude_damping_channel(0.0)
    flip = unitary_channel(np.array([[0, 1], [1, 0]]))
    rho = np.diag([1.0, 0.0])
    # flip after damp sends everything to |1>
    assert np.allclose(flip.compose(damp).apply(rho), np.diag([0.0, 1.0]))
    out = completely_depolarizing_channel(2, 3).apply(rho)
    assert np.allclose(out, np.eye(3) / 3)


def test_povm_coarse_graining():
    """Test that merged outcomes sum the effects and bad groupings are refused."""
    rng = np.random.default_rng(20)
    povm = random_povm(2, 4, rng)
    merged = povm.coarse_grained([[0, 1], [2, 3]])
    assert np.allclose(merged.outcomes[0], povm.outcomes[0] + povm.outcomes[1])
    with pytest.raises(InvalidInputError):
        povm.coarse_grained([[0, 1], [1, 2, 3]])


def test_povm_rejects_non_normalized():
    """Test that effects not summing to identity are invalid."""
    with pytest.raises(InvalidInputError):
        DiscretePovm((np.eye(2) / 2,))
