import numpy as np
import pytest

from errors import DomainError, InvalidInputError
from gaussian import (GaussianBipartiteState, GaussianChannel, GaussianMeasurement, GaussianPostprocessing,
                      GaussianState, apply_channel_measurement, apply_channel_state, breaks_canonical_pair,
                      channel_as_measurement, channel_matrix, channel_steering_witness, compose_channels, covariant_joint_measurement,
                      gaussian_channel_to_state, gaussian_lhs, gaussian_state_to_channel,
                      is_gaussian_incompatibility_breaking, is_steerable, is_steerable_by_channel,
                      measurement_as_postprocessing, noisy_quadrature, noisy_quadratures_jm, outcome_moments,
                      postprocess, product_state, purification_cm, quadrature_marginal, random_bipartite_state,
                      random_covariance_matrix, random_gaussian_channel, steering_witness,
                      symplectic_eigenvalues, two_mode_squeezed_state, williamson, with_bob_noise)
from matcore import direct_sum, schur_complement, symplectic_form

TMSV_SQUEEZING = np.arccosh(5 / 3) / 2


def test_williamson_of_thermal_state():
    """Test that a thermal covariance matrix has S = 1."""
    wd = williamson(2.5 * np.eye(2))
    assert np.allclose(wd.S, np.eye(2))
    assert np.allclose(wd.nu, [2.5])


def test_williamson_of_squeezed_vacuum():
    """Test that squeezed vacuum decomposes with the squeezing matrix."""
    s = 0.4
    wd = williamson(np.diag([np.exp(2 * s), np.exp(-2 * s)]))
    assert np.allclose(wd.S, np.diag([np.exp(s), np.exp(-s)]))
    assert np.allclose(wd.nu, [1.0])


@pytest.mark.parametrize("modes", [1, 2, 3])
def test_williamson_reconstructs(modes):
    """Test V = S^T D S with S symplectic and nu descending."""
    rng = np.random.default_rng(40 + modes)
    V = random_covariance_matrix(modes, rng)
    wd = williamson(V)
    omega = symplectic_form(modes)
    assert np.allclose(wd.S.T @ wd.D @ wd.S, V, atol=1e-9)
    assert np.allclose(wd.S @ omega @ wd.S.T, omega, atol=1e-9)
    assert np.all(np.diff(wd.nu) <= 1e-12)


def test_williamson_sign_convention():
    """Test that every symplectic block of S starts with a positive entry."""
    V = random_covariance_matrix(2, np.random.default_rng(47))
    wd = williamson(V)
    for k in range(2):
        block = wd.S[2 * k:2 * k + 2].T.ravel()
        lead = block[np.flatnonzero(np.abs(block) > 1e-9 * np.max(np.abs(block)))[0]]
        assert lead > 0
    assert np.allclose(wd.S.T @ wd.D @ wd.S, V, atol=1e-9)
    assert np.allclose(williamson(V).S, wd.S)


def test_williamson_rejects_singular():
    """Test that a singular matrix has no decomposition."""
    with pytest.raises(DomainError):
        williamson(np.diag([1.0, 0.0]))


def test_invalid_covariance_matrix():
    """Test that a covariance below the vacuum is refused."""
    with pytest.raises(InvalidInputError):
        GaussianState(0.5 * np.eye(2))


def test_purification_is_pure():
    """Test that the purification has all symplectic eigenvalues equal to one."""
    rng = np.random.default_rng(44)
    V = random_covariance_matrix(2, rng)
    assert np.allclose(symplectic_eigenvalues(purification_cm(V)), 1.0, atol=1e-8)


@pytest.mark.parametrize("modes_a,modes_b", [(1, 1), (1, 2), (2, 1)])
def test_state_channel_round_trip(modes_a, modes_b):
    """Test that a random state is rebuilt from its channel and marginal."""
    rng = np.random.default_rng(50 + 3 * modes_a + modes_b)
    for trial in range(10):
        state = random_bipartite_state(modes_a, modes_b, rng)
        channel = gaussian_state_to_channel(state)
        back = gaussian_channel_to_state(channel, state.marginal_b())
        assert np.max(np.abs(back.V - state.V)) < 1e-8
        assert np.max(np.abs(back.r - state.r)) < 1e-8


def test_channel_state_round_trip():
    """Test that channel -> state -> channel returns the same parameters."""
    rng = np.random.default_rng(53)
    channel = random_gaussian_channel(1, 1, rng, noise=0.4)
    sigma = GaussianState(random_covariance_matrix(1, rng), [0.3, -0.2])
    again = gaussian_state_to_channel(gaussian_channel_to_state(channel, sigma))
    assert np.allclose(again.M, channel.M, atol=1e-8)
    assert np.allclose(again.N, channel.N, atol=1e-8)
    assert np.allclose(again.c, channel.c, atol=1e-8)


def test_vacuum_marginal_is_domain_error():
    """Test that a vacuum mode in Bob's marginal blocks the channel construction."""
    state = product_state(np.eye(2), np.eye(2))
    assert not is_steerable(state)
    with pytest.raises(DomainError, match="vacuum"):
        gaussian_state_to_channel(state)


def test_two_mode_squeezed_state():
    """Test the TMSV verdict and its canonical witness pair."""
    state = two_mode_squeezed_state(TMSV_SQUEEZING)
    assert np.isclose(state.V[0, 0], 5 / 3)
    assert is_steerable(state)
    assert is_steerable_by_channel(state)
    witness = steering_witness(state)
    assert abs(witness.x @ symplectic_form(1) @ witness.y - 1.0) < 1e-10
    # witness pair lies along single quadratures
    assert abs(witness.y[1]) < 1e-10 and abs(witness.x[0]) < 1e-10
    assert witness.margin > 0.4


def test_noisy_tmsv_loses_steerability():
    """Test that enough noise on Bob's side removes steering."""
    state = two_mode_squeezed_state(TMSV_SQUEEZING)
    assert not is_steerable(with_bob_noise(state, 5.0))


@pytest.mark.parametrize("squeezing", [0.1, 0.5, 1.0])
def test_tmsv_noise_threshold(squeezing):
    """Test that Bob noise removes TMSV steering exactly at 1 - 1/cosh(2r)."""
    state = two_mode_squeezed_state(squeezing)
    assert is_steerable(state)
    assert steering_witness(state).margin > 0

    lo, hi = 0.0, 1.0
    while hi - lo > 1e-6:
        mid = (lo + hi) / 2
        if is_steerable(with_bob_noise(state, mid)):
            lo = mid
        else:
            hi = mid
    assert abs(hi - (1 - 1 / np.cosh(2 * squeezing))) < 1e-5


def test_product_state_lhs():
    """Test the LHS model of a product state."""
    state = product_state(np.eye(2), 2 * np.eye(2))
    lhs = gaussian_lhs(state)
    assert np.allclose(lhs.shift, 0.0)
    assert np.allclose(lhs.member_cm, 2 * np.eye(2))
    with pytest.raises(DomainError):
        steering_witness(state)


def test_steerable_state_has_no_lhs():
    """Test that the LHS construction refuses steerable input."""
    with pytest.raises(DomainError):
        gaussian_lhs(two_mode_squeezed_state(TMSV_SQUEEZING))


def test_schur_complement_gives_channel_matrix():
    """Test that the Schur complement of V + i(0 + Omega_B) is C_MN."""
    rng = np.random.default_rng(60)
    state = random_bipartite_state(1, 2, rng)
    block = state.V + 1j * direct_sum(np.zeros((2, 2)), symplectic_form(2))
    C = channel_matrix(gaussian_state_to_channel(state))
    assert np.allclose(schur_complement(block, 2), C, atol=1e-8)


def test_steering_tests_agree_on_random_states():
    """Test both steering tests, witnesses and LHS models over random two-mode states."""
    rng = np.random.default_rng(61)
    seen = {True: 0, False: 0}
    for trial in range(100):
        state = random_bipartite_state(1, 1, rng)
        verdict = is_steerable(state)
        assert verdict == is_steerable_by_channel(state)
        seen[verdict] += 1
        if verdict:
            witness = steering_witness(state)
            assert abs(witness.x @ symplectic_form(1) @ witness.y - 1.0) < 1e-10
            assert witness.margin > 0
            channel = gaussian_state_to_channel(state)
            assert not noisy_quadratures_jm(channel.M @ witness.x, witness.xi,
                                            channel.M @ witness.y, witness.xi_prime)
        else:
            lhs = gaussian_lhs(state)
            margin = np.linalg.eigvalsh(lhs.member_cm + 1j * symplectic_form(1))[0]
            assert margin >= -1e-9
            assert np.allclose(lhs.ensemble_cm(), state.V_sigma, atol=1e-8)
    assert seen[True] and seen[False]


def test_lhs_member_states():
    """Test displaced member states of an unsteerable correlated state."""
    rng = np.random.default_rng(62)
    state = random_bipartite_state(1, 1, rng, noise=1.5)
    assert not is_steerable(state)
    lhs = gaussian_lhs(state)
    member = lhs.member_state([0.5, -1.0])
    assert np.allclose(member.r, lhs.center + lhs.shift @ np.array([0.5, -1.0]))


def test_noisy_quadratures_jm_threshold():
    """Test the product-of-noise criterion for canonical pairs."""
    q, p = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert noisy_quadratures_jm(q, 1 / np.sqrt(2), p, 1 / np.sqrt(2))
    assert not noisy_quadratures_jm(q, 0.5, p, 0.5)
    assert noisy_quadratures_jm(q, 0.0, q, 0.0)


def test_covariant_joint_measurement_marginals():
    """Test the joint measurement reproduces both noisy quadratures."""
    xi, xi_prime = 0.6, 1.1
    joint = covariant_joint_measurement(xi, xi_prime)
    assert np.isclose(np.linalg.det(joint.L), 1.0)
    for index, (x, noise) in enumerate([([1.0, 0.0], xi), ([0.0, 1.0], xi_prime)]):
        marginal = quadrature_marginal(joint, index)
        expected = noisy_quadrature(x, noise)
        assert np.allclose(marginal.K, expected.K)
        assert np.allclose(marginal.L, expected.L)
        assert np.allclose(marginal.m, expected.m)


def test_covariant_joint_measurement_below_threshold():
    """Test that xi xi' < 1/2 has no joint measurement."""
    with pytest.raises(DomainError):
        covariant_joint_measurement(0.5, 0.5)


def test_channel_composition():
    """Test composition of channels acting on a state."""
    rng = np.random.default_rng(70)
    first = random_gaussian_channel(1, 2, rng, noise=0.2)
    second = random_gaussian_channel(2, 1, rng, noise=0.3)
    state = GaussianState(random_covariance_matrix(1, rng), [0.1, 0.4])
    direct = apply_channel_state(second, apply_channel_state(first, state))
    composed = apply_channel_state(compose_channels(first, second), state)
    assert np.allclose(composed.V, direct.V)
    assert np.allclose(composed.r, direct.r)


def test_channel_then_measurement():
    """Test that measuring after a channel equals the Heisenberg-transformed measurement."""
    rng = np.random.default_rng(71)
    noisy = random_gaussian_channel(1, 1, rng, noise=0.5)
    channel = GaussianChannel(noisy.M, noisy.N, [0.2, -0.1])
    measurement = covariant_joint_measurement(0.8, 0.9)
    state = GaussianState(random_covariance_matrix(1, rng), [1.0, 0.5])
    mean_a, cov_a = outcome_moments(apply_channel_measurement(channel, measurement), state)
    mean_b, cov_b = outcome_moments(measurement, apply_channel_state(channel, state))
    assert np.allclose(mean_a, mean_b)
    assert np.allclose(cov_a, cov_b)


def test_measurement_then_postprocessing():
    """Test outcome moments of a post-processed measurement."""
    rng = np.random.default_rng(72)
    measurement = covariant_joint_measurement(1.0, 0.7)
    post = GaussianPostprocessing(rng.normal(size=(2, 3)), 0.5 * np.eye(3), [0.1, 0.2, 0.3])
    state = GaussianState(random_covariance_matrix(1, rng), [0.3, 0.3])
    mean, cov = outcome_moments(measurement, state)
    mean_p, cov_p = outcome_moments(postprocess(measurement, post), state)
    assert np.allclose(mean_p, post.M.T @ mean + post.c)
    assert np.allclose(cov_p, post.M.T @ cov @ post.M + post.N)


def test_incompatibility_breaking_channel():
    """Test the joint-observable reading of a channel with C_MN >= 0."""
    channel = GaussianChannel(0.5 * np.eye(2), np.eye(2), [0.1, 0.0])
    assert is_gaussian_incompatibility_breaking(channel)
    q, p = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert breaks_canonical_pair(channel, q, p)

    measurement = covariant_joint_measurement(0.8, 0.7)
    via_parent = postprocess(channel_as_measurement(channel), measurement_as_postprocessing(measurement))
    direct = apply_channel_measurement(channel, measurement)
    assert np.allclose(via_parent.K, direct.K)
    assert np.allclose(via_parent.L, direct.L)
    assert np.allclose(via_parent.m, direct.m)


def test_unbroken_canonical_pairs_need_incompatibility():
    """Test that a canonical pair survives only channels that keep incompatibility."""
    rng = np.random.default_rng(91)
    omega = symplectic_form(1)
    channels = [GaussianChannel(np.eye(2), 0.2 * np.eye(2))]
    channels += [random_gaussian_channel(1, 1, rng, noise=rng.uniform(0.0, 1.5)) for _ in range(19)]
    unbroken = 0
    for channel in channels:
        breaking = is_gaussian_incompatibility_breaking(channel)
        pairs = 0
        while pairs < 10:
            x, y = rng.normal(size=2), rng.normal(size=2)
            s = x @ omega @ y
            if abs(s) < 1e-3:
                continue
            if s < 0:
                y = -y
            x, y = x / np.sqrt(abs(s)), y / np.sqrt(abs(s))
            pairs += 1
            if not breaks_canonical_pair(channel, x, y):
                assert not breaking
                unbroken += 1
        if not breaking:
            witness = channel_steering_witness(channel)
            assert abs(witness.x @ omega @ witness.y - 1.0) < 1e-10
            if witness.margin > 1e-9:
                assert not breaks_canonical_pair(channel, witness.x, witness.y)
                unbroken += 1
    assert unbroken > 0


def test_identity_channel_keeps_incompatibility():
    """Test that the identity channel breaks neither the canonical pair nor incompatibility."""
    channel = GaussianChannel(np.eye(2), np.zeros((2, 2)))
    assert not is_gaussian_incompatibility_breaking(channel)
    assert not breaks_canonical_pair(channel, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        channel_as_measurement(channel)


def test_channel_rejects_non_physical():
    """Test that the identity map without noise cannot amplify."""
    with pytest.raises(InvalidInputError):
        GaussianChannel(2 * np.eye(2), np.zeros((2, 2)))


def test_measurement_rejects_noiseless_heterodyne():
    """Test that measuring Q and P jointly without noise is refused."""
    with pytest.raises(InvalidInputError):
        GaussianMeasurement(np.eye(2), np.zeros((2, 2)))


def test_state_json():
    """Test JSON reading of states and its error locations."""
    state = two_mode_squeezed_state(0.3)
    again = GaussianBipartiteState.from_json(state.to_json())
    assert np.allclose(again.V, state.V)
    with pytest.raises(InvalidInputError, match="'V'"):
        GaussianBipartiteState.from_json({"modes_a": 1, "modes_b": 1})
    with pytest.raises(InvalidInputError, match="shape"):
        GaussianBipartiteState.from_json({"modes_a": 1, "modes_b": 1, "V": np.eye(2).tolist()})
    with pytest.raises(InvalidInputError, match="modes_a"):
        GaussianBipartiteState.from_json({"V": np.eye(4).tolist()})
