"""Reference trajectories, frequency synthesis and protocol validation"""

import math

import numpy as np
import pytest
import sympy
from numpy.polynomial import Polynomial
from pydantic import ValidationError

from hscaler.errors import ConfigurationError, GenuineSingularity
from hscaler.protocol import (
    FrequencyProgram,
    ReferenceTrajectory,
    ScalingMode,
    build_protocol,
    design_momentum_trajectory,
    design_position_trajectory,
    position_basis,
    symmetry_defect,
    synthesize_omega2,
    validate_protocol,
)

from .conftest import MOMENTUM_FACTORS, POSITION_FACTORS, all_specs, momentum_spec, position_spec, spec_id

s = sympy.Symbol("s")


def exact_quintic(u0, uf):
    return u0 + (uf - u0) * s ** 3 * (10 - 15 * s + 6 * s ** 2)


# ============================================================================
# Momentum mode
# ============================================================================

def test_fifth_quintic_coefficients():
    traj = design_momentum_trajectory(momentum_spec(0.2))
    assert traj.coeffs == pytest.approx([1.0, 0.0, 0.0, 40.0, -60.0, 24.0], abs=1e-12)


@pytest.mark.parametrize("factor", MOMENTUM_FACTORS)
def test_quintic_boundary_conditions(factor):
    spec = momentum_spec(factor, t_f=2.5, u0=1.5)
    traj = design_momentum_trajectory(spec)
    t_f = spec.t_f
    assert traj.u(0.0) == pytest.approx(1.5, rel=1e-14)
    assert traj.u(t_f) == pytest.approx(1.5 / factor, rel=1e-13)
    for t in (0.0, t_f):
        assert abs(traj.udot(t)) < 1e-12
        assert abs(traj.uddot(t)) < 1e-12


@pytest.mark.parametrize("factor", MOMENTUM_FACTORS)
def test_quintic_matches_exact_polynomial(factor):
    traj = design_momentum_trajectory(momentum_spec(factor))
    expected = sympy.Poly(exact_quintic(sympy.Integer(1), 1 / sympy.nsimplify(factor)), s).all_coeffs()[::-1]
    expected = [float(c) for c in expected] + [0.0] * (6 - len(expected))
    assert traj.coeffs == pytest.approx(expected, abs=1e-12)


def test_momentum_design_rejects_position_spec():
    with pytest.raises(ConfigurationError):
        design_momentum_trajectory(position_spec(-0.5))


def test_zero_scale_factor_rejected():
    with pytest.raises(ValidationError):
        momentum_spec(0.0)


def test_nonpositive_process_time_rejected():
    with pytest.raises(ValidationError):
        momentum_spec(0.2, t_f=0.0)


def test_identity_protocol_is_free_motion():
    traj, program = build_protocol(momentum_spec(1.0))
    table = program.tabulate(101)
    assert np.all(table["omega2"] == 0.0)
    assert program.peak_abs_omega2 == 0.0
    assert validate_protocol(traj, program).passed


# ============================================================================
# Momentum mirror
# ============================================================================

def test_mirror_node_is_exact():
    u = exact_quintic(sympy.Integer(1), sympy.Integer(-1))
    half = sympy.Rational(1, 2)
    assert u.subs(s, half) == 0
    assert sympy.diff(u, s, 2).subs(s, half) == 0
    assert sympy.diff(u, s, 1).subs(s, half) == sympy.Rational(-15, 4)
    assert sympy.diff(u, s, 3).subs(s, half) == 60


def test_mirror_frequency_at_node(mirror_protocol):
    traj, program = mirror_protocol
    assert [n.s for n in program.nodes] == [pytest.approx(0.5, abs=1e-12)]
    assert program.omega2(0.5) == pytest.approx(16.0, rel=1e-12)


@pytest.mark.parametrize("t_f", [0.5, 2.0, 10.0])
def test_mirror_frequency_scales_with_process_time(t_f):
    _, program = build_protocol(momentum_spec(-1.0, t_f=t_f))
    assert program.omega2(t_f / 2) == pytest.approx(16.0 / t_f ** 2, rel=1e-12)


def test_mirror_is_finite_everywhere(mirror_protocol):
    _, program = mirror_protocol
    values = program.tabulate(10001)["omega2"]
    assert np.all(np.isfinite(values))


def test_mirror_validation(mirror_protocol):
    report = validate_protocol(*mirror_protocol)
    assert report.passed
    assert report.symmetry_defect == pytest.approx(0.0, abs=1e-13)
    assert max(report.boundary_residuals.values()) <= 1e-10


def test_unmatched_zero_is_a_genuine_singularity():
    # u = s² + s − 1/2 vanishes inside [0, 1] while ü = 2
    traj = ReferenceTrajectory(Polynomial([-0.5, 1.0, 1.0]), 1.0, ScalingMode.MOMENTUM)
    with pytest.raises(GenuineSingularity):
        synthesize_omega2(traj)


# ============================================================================
# Position mode
# ============================================================================

def test_position_basis_conditions():
    basis_a, basis_b = position_basis()
    for coeffs, slopes in ((basis_a, (1, 0)), (basis_b, (0, 1))):
        u = sum(c * s ** k for k, c in enumerate(coeffs))
        for point in (0, 1):
            assert u.subs(s, point) == 0
            assert sympy.diff(u, s, 2).subs(s, point) == 0
            assert sympy.diff(u, s, 3).subs(s, point) == 0
        assert sympy.diff(u, s).subs(s, 0) == slopes[0]
        assert sympy.diff(u, s).subs(s, 1) == slopes[1]


@pytest.mark.parametrize("factor", POSITION_FACTORS)
def test_position_trajectory_boundaries(factor):
    spec = position_spec(factor, t_f=3.0, udot0=0.7)
    traj = design_position_trajectory(spec)
    assert abs(traj.u(0.0)) < 1e-12
    assert abs(traj.u(3.0)) < 1e-12
    assert traj.udot0 == pytest.approx(0.7, rel=1e-13)
    assert traj.udotf == pytest.approx(0.7 / factor, rel=1e-12)


@pytest.mark.parametrize("factor", POSITION_FACTORS)
def test_position_frequency_vanishes_at_ends(factor):
    _, program = build_protocol(position_spec(factor))
    assert abs(program.omega2(0.0)) < 1e-9
    assert abs(program.omega2(1.0)) < 1e-9


def test_position_identity_protocol():
    # u is odd about s = 1/2, so ü vanishes at the interior zero
    traj, program = build_protocol(position_spec(1.0))
    assert [node.s for node in program.nodes] == pytest.approx([0.0, 0.5, 1.0], abs=1e-10)
    assert traj.udotf == pytest.approx(traj.udot0, rel=1e-12)
    assert math.isfinite(program.omega2(0.5))
    assert program.omega2(0.5) > 0
    assert validate_protocol(traj, program).passed


@pytest.mark.parametrize("factor", [2.0, 0.5])
def test_other_positive_position_factors_are_singular(factor):
    with pytest.raises(GenuineSingularity):
        build_protocol(position_spec(factor))


def test_position_design_rejects_momentum_spec():
    with pytest.raises(ConfigurationError):
        design_position_trajectory(momentum_spec(0.2))


# ============================================================================
# Validation and scaling properties
# ============================================================================

@pytest.mark.parametrize("spec", all_specs(), ids=spec_id)
def test_all_protocols_validate(spec):
    traj, program = build_protocol(spec)
    report = validate_protocol(traj, program)
    assert report.passed, report.model_dump()
    assert report.eom_residual <= 1e-10


@pytest.mark.parametrize("factor", MOMENTUM_FACTORS)
def test_quintic_symmetry_defect(factor):
    traj = design_momentum_trajectory(momentum_spec(factor))
    assert symmetry_defect(traj) <= 1e-13


@pytest.mark.parametrize("spec", all_specs(), ids=spec_id)
def test_peak_scales_inverse_square_in_process_time(spec):
    _, short = build_protocol(spec)
    _, long = build_protocol(spec.model_copy(update={"t_f": 4.0, "udot0": spec.udot0 / 4.0}))
    assert long.peak_abs_omega2 == pytest.approx(short.peak_abs_omega2 / 16.0, rel=1e-12)


def test_peak_is_located_by_refinement(fifth_protocol):
    _, program = fifth_protocol
    dense = np.abs(program.tabulate(200001)["omega2"])
    assert program.peak_abs_omega2 >= dense.max() * (1 - 1e-12)
    assert program.peak_abs_omega2 == pytest.approx(dense.max(), rel=1e-8)


def test_symmetric_peak_between_samples(mirror_protocol):
    # s = 1/2 falls between two equal samples of the coarse scan
    _, program = mirror_protocol
    assert program.peak_abs_omega2 == pytest.approx(16.0, rel=1e-10)
    assert program.peak_location == pytest.approx(0.5, abs=1e-6)


def test_position_identity_peak_is_refined():
    _, program = build_protocol(position_spec(1.0))
    dense = np.abs(program.tabulate(200001)["omega2"])
    assert program.peak_abs_omega2 >= dense.max() * (1 - 1e-12)
    assert program.peak_abs_omega2 == pytest.approx(abs(program.omega2(program.peak_location)), rel=1e-14)


def test_constant_program():
    program = FrequencyProgram.constant(2.0, t_f=3.0)
    assert program.omega2(1.7) == pytest.approx(2.0)
    assert program.Omega2(0.2) == pytest.approx(18.0)
    assert program.dimensionless().Omega2(0.2) == pytest.approx(18.0)
