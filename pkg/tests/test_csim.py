"""Classical ensembles: sampling, exact and Verlet propagation"""

import math

import numpy as np
import pytest

from hscaler.csim import Ensemble, ensemble_moments, propagate_exact, propagate_verlet, sample_gaussian
from hscaler.errors import BadCovariance
from hscaler.moments import MomentState, fundamental_matrix, propagate_second_moments, relative_drift
from hscaler.protocol import FrequencyProgram, build_protocol

from .conftest import MOMENTUM_FACTORS, POSITION_FACTORS, SIGMA, momentum_spec, position_spec

EPSILON = 1e-12


def scaling_error(before: np.ndarray, after: np.ndarray, factor: float) -> float:
    return float(np.max(np.abs(after - factor * before) / np.maximum(np.abs(before), EPSILON)))


@pytest.fixture(scope="module")
def reference_ensemble():
    return sample_gaussian(MomentState.gaussian(1.0, 1.0, SIGMA), n=100_000, seed=0)


# ============================================================================
# Sampling
# ============================================================================

def test_sampling_is_deterministic(reference_state):
    a = sample_gaussian(reference_state, n=10_000, seed=42)
    b = sample_gaussian(reference_state, n=10_000, seed=42)
    np.testing.assert_array_equal(a.q, b.q)
    np.testing.assert_array_equal(a.p, b.p)
    assert a.rng_seed == 42


def test_sampling_ignores_thread_count(reference_state):
    serial = sample_gaussian(reference_state, n=20_000, seed=3, workers=1)
    threaded = sample_gaussian(reference_state, n=20_000, seed=3, workers=4)
    np.testing.assert_array_equal(serial.q, threaded.q)
    np.testing.assert_array_equal(serial.p, threaded.p)


def test_seeds_give_different_ensembles(reference_state):
    a = sample_gaussian(reference_state, n=1_000, seed=1)
    b = sample_gaussian(reference_state, n=1_000, seed=2)
    assert not np.array_equal(a.p, b.p)


def test_large_sample_mean(reference_state):
    ensemble = sample_gaussian(reference_state, n=1_000_000, seed=0)
    summary = ensemble_moments(ensemble)
    assert abs(summary.state.p_mean - 1.0) <= 3 * SIGMA / 1e3
    assert abs(summary.state.q_mean - 1.0) <= 3 * SIGMA / 1e3
    assert summary.se_p_mean == pytest.approx(SIGMA / 1e3, rel=0.01)


def test_weights_are_uniform(reference_ensemble):
    assert len(reference_ensemble) == 100_000
    assert reference_ensemble.weight.sum() == pytest.approx(1.0)
    assert np.all(reference_ensemble.weight == reference_ensemble.weight[0])


def test_zero_covariance_rejected():
    with pytest.raises(BadCovariance):
        sample_gaussian(MomentState.from_covariance((0.0, 0.0), np.zeros((2, 2))), n=10)


def test_sub_floor_covariance_rejected():
    with pytest.raises(BadCovariance):
        sample_gaussian(MomentState.gaussian(0.0, 0.0, 0.3, sigma_p=0.3), n=10)


def test_ensemble_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        Ensemble(np.zeros(3), np.zeros(3), np.full(3, 0.5))


# ============================================================================
# Exact propagation
# ============================================================================

def test_free_motion_drift(reference_ensemble):
    moved = propagate_exact(reference_ensemble, FrequencyProgram.constant(0.0), 1.0)
    np.testing.assert_allclose(moved.q, reference_ensemble.q + reference_ensemble.p, atol=1e-10)
    np.testing.assert_allclose(moved.p, reference_ensemble.p, atol=1e-12)
    assert moved.time == 1.0


def test_fifth_protocol_scales_every_momentum(reference_ensemble):
    _, program = build_protocol(momentum_spec(0.2))
    moved = propagate_exact(reference_ensemble, program, 1.0)
    assert scaling_error(reference_ensemble.p, moved.p, 0.2) <= 1e-10


@pytest.mark.parametrize("factor", MOMENTUM_FACTORS)
def test_momentum_protocols_scale_every_point(reference_ensemble, factor):
    _, program = build_protocol(momentum_spec(factor))
    moved = propagate_exact(reference_ensemble, program, 1.0)
    assert scaling_error(reference_ensemble.p, moved.p, factor) <= 1e-8


def test_mirror_inverts_every_momentum(reference_ensemble, mirror_protocol):
    _, program = mirror_protocol
    moved = propagate_exact(reference_ensemble, program, 1.0)
    assert np.all(np.sign(moved.p) == -np.sign(reference_ensemble.p))
    assert scaling_error(reference_ensemble.p, moved.p, -1.0) <= 1e-8


@pytest.mark.parametrize("factor", POSITION_FACTORS)
def test_position_protocols_scale_every_point(reference_ensemble, factor):
    _, program = build_protocol(position_spec(factor))
    moved = propagate_exact(reference_ensemble, program, 1.0)
    assert scaling_error(reference_ensemble.q, moved.q, factor) <= 1e-8


def test_exact_map_preserves_area(reference_ensemble, fifth_protocol):
    _, program = fifth_protocol
    triangle = Ensemble(np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]), np.full(3, 1 / 3))
    moved = propagate_exact(triangle, program, 0.6)
    (q0, q1, q2), (p0, p1, p2) = moved.q, moved.p
    area = 0.5 * abs((q1 - q0) * (p2 - p0) - (q2 - q0) * (p1 - p0))
    assert area == pytest.approx(0.5, rel=1e-9)


@pytest.mark.parametrize("factor", [0.2, -1.0])
def test_ensemble_moments_track_moment_dynamics(reference_ensemble, reference_state, factor):
    _, program = build_protocol(momentum_spec(factor))
    for t in np.linspace(0.0, 1.0, 13):
        summary = ensemble_moments(propagate_exact(reference_ensemble, program, float(t)))
        exact = propagate_second_moments(fundamental_matrix(program, float(t)), reference_state)
        assert abs(summary.state.q_mean - exact.q_mean) <= 5 * summary.se_q_mean
        assert abs(summary.state.p_mean - exact.p_mean) <= 5 * summary.se_p_mean
        assert abs(summary.state.p2 - exact.p2) <= 5 * summary.se_p2


# ============================================================================
# Verlet propagation
# ============================================================================

def test_verlet_is_exact_for_free_motion(reference_ensemble):
    program = FrequencyProgram.constant(0.0)
    verlet = propagate_verlet(reference_ensemble, program, dt=0.3)
    exact = propagate_exact(reference_ensemble, program, 1.0)
    np.testing.assert_allclose(verlet.q, exact.q, atol=1e-10)
    np.testing.assert_allclose(verlet.p, exact.p, atol=1e-10)


def test_verlet_converges_at_second_order(fifth_protocol):
    _, program = fifth_protocol
    ensemble = sample_gaussian(MomentState.gaussian(1.0, 1.0, SIGMA), n=2_000, seed=5)
    exact = propagate_exact(ensemble, program, 1.0)

    def error(dt):
        moved = propagate_verlet(ensemble, program, dt)
        return max(np.max(np.abs(moved.q - exact.q)), np.max(np.abs(moved.p - exact.p)))

    assert error(1e-3) / error(5e-4) == pytest.approx(4.0, abs=0.3)


def test_verlet_ignores_thread_count(reference_ensemble, fifth_protocol):
    _, program = fifth_protocol
    serial = propagate_verlet(reference_ensemble, program, 1e-2, workers=1)
    threaded = propagate_verlet(reference_ensemble, program, 1e-2, workers=3)
    np.testing.assert_array_equal(serial.q, threaded.q)
    np.testing.assert_array_equal(serial.p, threaded.p)


def test_verlet_keeps_linear_invariant(reference_state, fifth_protocol):
    traj, program = fifth_protocol
    ensemble = sample_gaussian(reference_state, n=2_000, seed=11)
    G = []
    for t_end in (0.25, 0.5, 0.75, 1.0):
        moved = propagate_verlet(ensemble, program, 1e-3, t_end=t_end)
        summary = ensemble_moments(moved)
        G.append(float(traj.u(t_end)) * summary.state.p_mean - float(traj.udot(t_end)) * summary.state.q_mean)
    initial = ensemble_moments(ensemble).state
    G.insert(0, float(traj.u(0.0)) * initial.p_mean)
    assert relative_drift(G) <= 1e-4


def test_standard_errors_shrink_with_size(reference_state):
    small = ensemble_moments(sample_gaussian(reference_state, n=1_000, seed=0))
    large = ensemble_moments(sample_gaussian(reference_state, n=100_000, seed=0))
    assert large.se_p_mean == pytest.approx(small.se_p_mean / 10, rel=0.1)
    assert math.isfinite(large.se_q2)
