"""Fundamental solution, moment propagation and the closed-form integrals"""

import math

import numpy as np
import pytest

from hscaler.errors import BadCovariance, ConfigurationError, SingularIntegrand
from hscaler.moments import (
    CovariancePropagator,
    MomentState,
    fundamental_matrices,
    fundamental_matrix,
    integral_from_propagator,
    invariant_corrected,
    invariant_expectations,
    max_position_excursion,
    position_mode_first_moments,
    propagate_first_moments,
    propagate_second_moments,
    propagate_trajectory,
    quadrature_integrals,
    relative_drift,
    uncertainty_defect,
)
from hscaler.protocol import FrequencyProgram, build_protocol

from .conftest import MOMENTUM_FACTORS, POSITION_FACTORS, all_specs, momentum_spec, position_spec, spec_id


def random_correlated_states(count: int, seed: int = 7):
    """Quantum-admissible Gaussian moments with random means and correlations"""
    rng = np.random.default_rng(seed)
    states = []
    for _ in range(count):
        var_q, var_p = rng.uniform(0.5, 2.0, size=2)
        cov = rng.uniform(-1, 1) * math.sqrt(var_q * var_p - 0.25)
        mean = rng.normal(size=2)
        states.append(MomentState.from_covariance(mean, np.array([[var_q, cov], [cov, var_p]])))
    return states


# ============================================================================
# Moment state
# ============================================================================

def test_gaussian_moments(reference_state):
    assert reference_state.var_q == pytest.approx(0.5)
    assert reference_state.var_p == pytest.approx(0.5)
    assert reference_state.cov_qp == pytest.approx(0.0, abs=1e-15)
    assert reference_state.uncertainty_product() == pytest.approx(0.25)
    assert reference_state.quantum_admissible() is reference_state


def test_uncertainty_floor_rejected():
    state = MomentState.gaussian(0.0, 0.0, 0.5, sigma_p=0.5)
    with pytest.raises(BadCovariance):
        state.quantum_admissible()


def test_negative_variance_rejected():
    with pytest.raises(ValueError):
        MomentState(q_mean=1.0, p_mean=0.0, q2=0.5, p2=1.0, qp_sym=0.0)


# ============================================================================
# Fundamental solution
# ============================================================================

@pytest.mark.parametrize("spec", all_specs(), ids=spec_id)
def test_determinant_is_one(spec):
    _, program = build_protocol(spec)
    for M in fundamental_matrices(program, np.linspace(0.0, spec.t_f, 41)):
        assert M.det == pytest.approx(1.0, abs=1e-10)


def test_free_motion_matrix():
    program = FrequencyProgram.constant(0.0, t_f=2.0)
    M = fundamental_matrix(program, 1.5, mass=3.0)
    np.testing.assert_allclose(M.matrix, [[1.0, 0.5], [0.0, 1.0]], atol=1e-12)


def test_constant_trap_matrix():
    program = FrequencyProgram.constant(4.0, t_f=1.0)
    M = fundamental_matrix(program, 0.7)
    c, s = math.cos(1.4), math.sin(1.4)
    np.testing.assert_allclose(M.matrix, [[c, s / 2], [-2 * s, c]], atol=1e-11)


def test_matrices_follow_request_order(fifth_protocol):
    _, program = fifth_protocol
    forward = fundamental_matrices(program, [0.25, 0.5, 1.0])
    shuffled = fundamental_matrices(program, [1.0, 0.25, 0.5])
    assert [M.time for M in shuffled] == [1.0, 0.25, 0.5]
    assert shuffled[0].m12 == pytest.approx(forward[2].m12, rel=1e-9)


def test_times_outside_protocol_rejected(fifth_protocol):
    _, program = fifth_protocol
    with pytest.raises(ConfigurationError):
        fundamental_matrix(program, 1.5)


def test_fifth_final_matrix(fifth_protocol):
    _, program = fifth_protocol
    M = fundamental_matrix(program, 1.0)
    assert M.m22 == pytest.approx(0.2, rel=1e-9)
    assert M.m21 == pytest.approx(0.0, abs=1e-9)
    assert M.m11 == pytest.approx(5.0, rel=1e-9)


@pytest.mark.parametrize("factor", MOMENTUM_FACTORS)
def test_momentum_mode_final_row(factor):
    _, program = build_protocol(momentum_spec(factor, t_f=2.0, mass=1.7))
    M = fundamental_matrix(program, 2.0, mass=1.7)
    assert M.m22 == pytest.approx(factor, rel=1e-9)
    assert abs(M.m21) < 1e-8


@pytest.mark.parametrize("factor", POSITION_FACTORS)
def test_position_mode_final_row(factor):
    _, program = build_protocol(position_spec(factor, t_f=0.5))
    M = fundamental_matrix(program, 0.5)
    assert M.m11 == pytest.approx(factor, rel=1e-9)
    assert abs(M.m12) < 1e-9


@pytest.mark.parametrize("spec", all_specs(), ids=spec_id)
def test_invariant_correction_is_consistent(spec):
    traj, program = build_protocol(spec)
    for M in fundamental_matrices(program, np.linspace(0.0, spec.t_f, 9)):
        corrected = invariant_corrected(M, traj)
        np.testing.assert_allclose(corrected.matrix, M.matrix, atol=1e-8)
        assert corrected.det == pytest.approx(1.0, abs=1e-9)


def test_invariant_correction_makes_scaling_exact(mirror_protocol):
    traj, program = mirror_protocol
    M = invariant_corrected(fundamental_matrix(program, 1.0), traj)
    assert M.m21 == 0.0
    assert M.m22 == -1.0


# ============================================================================
# Moment propagation
# ============================================================================

def test_first_moments_keep_covariance(fifth_protocol, reference_state):
    _, program = fifth_protocol
    state = propagate_first_moments(fundamental_matrix(program, 1.0), reference_state)
    assert state.p_mean == pytest.approx(0.2, rel=1e-9)
    np.testing.assert_allclose(state.covariance(), reference_state.covariance(), atol=1e-14)


def test_initial_moments_must_start_at_zero(fifth_protocol, reference_state):
    _, program = fifth_protocol
    late = reference_state.model_copy(update={"time": 0.5})
    with pytest.raises(ConfigurationError):
        propagate_second_moments(fundamental_matrix(program, 1.0), late)
    with pytest.raises(ConfigurationError):
        propagate_first_moments(fundamental_matrix(program, 1.0), late)


@pytest.mark.parametrize("factor", MOMENTUM_FACTORS)
def test_variance_law_for_random_states(factor):
    traj, program = build_protocol(momentum_spec(factor))
    M = invariant_corrected(fundamental_matrix(program, 1.0), traj)
    for state in random_correlated_states(20):
        final = propagate_second_moments(M, state)
        assert final.var_p == pytest.approx(factor ** 2 * state.var_p, rel=1e-10)
        assert final.p_mean == pytest.approx(factor * state.p_mean, rel=1e-9, abs=1e-10)
        assert final.kinetic_energy() == pytest.approx(factor ** 2 * state.kinetic_energy(), rel=1e-10)


def test_identity_keeps_momentum_variance(reference_state):
    _, program = build_protocol(momentum_spec(1.0))
    for state, _ in propagate_trajectory(program, reference_state, np.linspace(0.0, 1.0, 11)):
        assert state.var_p == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("spec", all_specs(), ids=spec_id)
def test_invariants_are_conserved(spec, reference_state):
    _, program = build_protocol(spec)
    records = propagate_trajectory(program, reference_state, np.linspace(0.0, spec.t_f, 13))
    G = [inv.G_mean for _, inv in records]
    I = [inv.I_mean for _, inv in records]
    assert relative_drift(G) <= 1e-8
    assert relative_drift(I) <= 1e-8


def test_mirror_moments_are_finite(mirror_protocol, reference_state):
    _, program = mirror_protocol
    records = propagate_trajectory(program, reference_state, np.linspace(0.0, 1.0, 101))
    assert all(math.isfinite(state.var_q) and math.isfinite(state.var_p) for state, _ in records)
    assert records[-1][0].p_mean == pytest.approx(-1.0, rel=1e-9)


def test_trajectory_without_reference_has_no_invariants(reference_state):
    records = propagate_trajectory(FrequencyProgram.constant(1.0), reference_state, [0.0, 0.5])
    assert all(inv is None for _, inv in records)


# ============================================================================
# Closed-form integrals
# ============================================================================

def test_fifth_integral_matches_propagator(fifth_protocol):
    traj, program = fifth_protocol
    integrals = quadrature_integrals(traj, 1.0)
    M = fundamental_matrix(program, 1.0)
    assert integrals.U == pytest.approx(5.0, rel=1e-14)
    assert integrals.I == pytest.approx(integral_from_propagator(M, traj), rel=1e-8)
    assert integrals.A == pytest.approx(1.0, abs=1e-10)
    assert integrals.J is None


@pytest.mark.parametrize("t_f", [0.1, 1.0, 10.0])
def test_integral_is_linear_in_process_time(t_f):
    reference, _ = build_protocol(momentum_spec(0.2))
    traj, _ = build_protocol(momentum_spec(0.2, t_f=t_f))
    assert quadrature_integrals(traj, t_f).I == pytest.approx(t_f * quadrature_integrals(reference, 1.0).I, rel=1e-10)


def test_mirror_quadrature_is_singular(mirror_protocol):
    traj, _ = mirror_protocol
    quadrature_integrals(traj, 0.4)
    with pytest.raises(SingularIntegrand):
        quadrature_integrals(traj, 1.0)


def test_mirror_cancellation_at_node(mirror_protocol):
    # u·I stays finite at the node: m·M₁₂ = −u0²/u̇(t0) = 4/15
    _, program = mirror_protocol
    M = fundamental_matrix(program, 0.5)
    assert M.mass * M.m12 == pytest.approx(4.0 / 15.0, rel=1e-8)


def test_mirror_integral_past_node(mirror_protocol):
    traj, program = mirror_protocol
    M = fundamental_matrix(program, 1.0)
    assert integral_from_propagator(M, traj) == pytest.approx(-M.m12, rel=1e-14)
    with pytest.raises(SingularIntegrand):
        integral_from_propagator(fundamental_matrix(program, 0.5), traj)


def test_position_mode_integral_and_first_moments(reference_state):
    traj, program = build_protocol(position_spec(-0.5))
    integrals = quadrature_integrals(traj, 0.1, program)
    assert integrals.I is None and integrals.J is not None
    closed = position_mode_first_moments(traj, 0.1, reference_state, program)
    exact = propagate_first_moments(fundamental_matrix(program, 0.1), reference_state)
    assert closed.q_mean == pytest.approx(exact.q_mean, rel=1e-8)
    assert closed.p_mean == pytest.approx(exact.p_mean, rel=1e-8)


@pytest.mark.parametrize("factor", POSITION_FACTORS)
def test_position_mode_first_moments_at_end(factor, reference_state):
    traj, program = build_protocol(position_spec(factor))
    state = position_mode_first_moments(traj, 1.0, reference_state, program)
    assert state.q_mean == pytest.approx(factor, rel=1e-8)


def test_position_first_moments_need_position_mode(fifth_protocol, reference_state):
    traj, _ = fifth_protocol
    with pytest.raises(ConfigurationError):
        position_mode_first_moments(traj, 0.5, reference_state)


# ============================================================================
# Derived diagnostics
# ============================================================================

def test_linear_invariant_at_start(fifth_protocol, reference_state):
    traj, _ = fifth_protocol
    record = invariant_expectations(traj, reference_state)
    assert record.G_mean == pytest.approx(1.0)
    assert record.I_mean == pytest.approx((1.0 + 0.5) / 2)


def test_free_motion_excursion(reference_state):
    _, program = build_protocol(momentum_spec(1.0))
    assert max_position_excursion(program, reference_state) == pytest.approx(2.0, rel=1e-10)


def test_uncertainty_defect_vanishes_for_short_protocols(reference_state):
    short = uncertainty_defect(build_protocol(momentum_spec(0.2, t_f=0.01))[1], reference_state)
    regular = uncertainty_defect(build_protocol(momentum_spec(0.2, t_f=1.0))[1], reference_state)
    assert short < 1e-3
    assert short <= regular


def test_relative_drift():
    assert relative_drift([]) == 0.0
    assert relative_drift([2.0, 2.0, 2.2]) == pytest.approx(0.1)
    assert relative_drift([0.0, 1e-3]) == pytest.approx(1e-3)


def test_identity_propagator():
    M = CovariancePropagator.identity(mass=2.0)
    assert M.det == 1.0
    assert M.mass == 2.0
    np.testing.assert_allclose(M.matrix, np.eye(2))
