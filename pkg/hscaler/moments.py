"""
Phase-space moment propagation

Exact propagation of first and second moments through the fundamental
solution of q̈ = −ω²(t) q, closed-form quadrature integrals used as a
cross-check, and expectation values of the linear and quadratic invariants.
"""

import logging
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import quad, solve_ivp

from hscaler.errors import BadCovariance, ConfigurationError, IntegratorFailure, SingularIntegrand
from hscaler.protocol import FrequencyProgram, ReferenceTrajectory, ScalingMode, synthesize_omega2

logger = logging.getLogger(__name__)

ODE_RTOL = 1e-12
ODE_ATOL = 1e-14
DET_TOLERANCE = 1e-9
QUAD_EPSREL = 1e-10
# |u| (or |u̇|) below this fraction of its maximum counts as a zero of the integrand denominator
SINGULAR_THRESHOLD = 1e-8
EXCURSION_SAMPLES = 2001
# invariant row rebuild only where |u| (or |u̇|) exceeds this fraction of its maximum
CORRECTION_FLOOR = 0.05


class MomentState(BaseModel):
    """First and second phase-space moments at one time"""

    q_mean: float = Field(..., description="<q>")
    p_mean: float = Field(..., description="<p>")
    q2: float = Field(..., description="<q^2>")
    p2: float = Field(..., description="<p^2>")
    qp_sym: float = Field(..., description="<qp + pq>")
    time: float = Field(default=0.0, description="Time the moments refer to")

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def validate_variances(self) -> "MomentState":
        for name, second, mean in (("q", self.q2, self.q_mean), ("p", self.p2, self.p_mean)):
            var = second - mean * mean
            if var < -1e-12 * max(1.0, abs(second)):
                raise ValueError(f"Var({name}) = {var:g} is negative")
        return self

    @property
    def var_q(self) -> float:
        return max(self.q2 - self.q_mean ** 2, 0.0)

    @property
    def var_p(self) -> float:
        return max(self.p2 - self.p_mean ** 2, 0.0)

    @property
    def cov_qp(self) -> float:
        """Symmetrized covariance <qp+pq>/2 − <q><p>"""
        return self.qp_sym / 2 - self.q_mean * self.p_mean

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.q_mean, self.p_mean])

    def covariance(self) -> np.ndarray:
        return np.array([[self.var_q, self.cov_qp], [self.cov_qp, self.var_p]])

    def uncertainty_product(self) -> float:
        """Robertson-Schrödinger determinant Var(q)Var(p) − cov²"""
        return self.var_q * self.var_p - self.cov_qp ** 2

    def kinetic_energy(self, mass: float = 1.0) -> float:
        return self.p2 / (2 * mass)

    def quantum_admissible(self, hbar: float = 1.0) -> "MomentState":
        """
        Check the uncertainty floor for an initial state

        Raises:
            BadCovariance: If det Σ < (ħ/2)² beyond rounding
        """
        floor = (hbar / 2) ** 2
        product = self.uncertainty_product()
        if product < floor * (1 - 1e-10):
            raise BadCovariance(
                f"Uncertainty product {product:.6g} is below the floor (hbar/2)^2 = {floor:.6g}",
                details={"uncertainty_product": product, "floor": floor},
            )
        return self

    @classmethod
    def from_covariance(cls, mean: Sequence[float], cov: np.ndarray, time: float = 0.0) -> "MomentState":
        q, p = float(mean[0]), float(mean[1])
        cov = np.asarray(cov, dtype=float)
        return cls(
            q_mean=q,
            p_mean=p,
            q2=float(cov[0, 0]) + q * q,
            p2=float(cov[1, 1]) + p * p,
            qp_sym=2 * (float(cov[0, 1]) + q * p),
            time=time,
        )

    @classmethod
    def gaussian(
        cls,
        q_mean: float,
        p_mean: float,
        sigma_q: float,
        sigma_p: Optional[float] = None,
        cov_qp: float = 0.0,
        hbar: float = 1.0
    ) -> "MomentState":
        """Gaussian moments; sigma_p defaults to the minimum-uncertainty value ħ/(2σ_q)"""
        if sigma_q <= 0:
            raise BadCovariance("sigma_q must be positive")
        if sigma_p is None:
            sigma_p = hbar / (2 * sigma_q)
        cov = np.array([[sigma_q ** 2, cov_qp], [cov_qp, sigma_p ** 2]])
        return cls.from_covariance((q_mean, p_mean), cov)


class CovariancePropagator(BaseModel):
    """
    Fundamental-solution matrix M(t): (q, p)_0 ↦ (q, p)_t

    M = [[v1, v2/m], [m v̇1, v̇2]] with v1(0) = 1, v̇1(0) = 0, v2(0) = 0, v̇2(0) = 1.
    """

    m11: float
    m12: float
    m21: float
    m22: float
    time: float
    mass: float = 1.0

    model_config = ConfigDict(frozen=True)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    @classmethod
    def identity(cls, mass: float = 1.0) -> "CovariancePropagator":
        return cls(m11=1.0, m12=0.0, m21=0.0, m22=1.0, time=0.0, mass=mass)


class InvariantRecord(BaseModel):
    """Expectation values of the linear and quadratic invariants"""

    G_mean: float = Field(..., description="<G> = u<p> − m u̇ <q>")
    I_mean: float = Field(..., description="<I> = u²<p²>/2m + m u̇²<q²>/2 − u u̇ <qp+pq>/2")
    time: float

    model_config = ConfigDict(frozen=True)


class QuadratureIntegrals(NamedTuple):
    """Closed-form ingredients; entries that do not apply to the mode are None"""

    U: Optional[float]
    I: Optional[float]
    A: Optional[float]
    J: Optional[float]


# ============================================================================
# Fundamental solution
# ============================================================================

def _check_times(program: FrequencyProgram, times: np.ndarray) -> None:
    if times.size and (times.min() < 0 or times.max() > program.t_f * (1 + 1e-12)):
        raise ConfigurationError(
            f"Times must lie in [0, {program.t_f:g}], got [{times.min():g}, {times.max():g}]"
        )


def fundamental_matrices(
    program: FrequencyProgram,
    times: Sequence[float],
    mass: float = 1.0
) -> List[CovariancePropagator]:
    """
    Fundamental-solution matrices at several times from one integration

    The ODE w'' = −Ω²(s) w is integrated in s = t/t_f with DOP853 and
    converted back: v1 = w1, v̇1 = w1'/t_f, v2 = t_f w2, v̇2 = w2'.

    Args:
        program: Frequency program
        times: Times in [0, t_f]
        mass: Particle mass

    Returns:
        One CovariancePropagator per requested time, in the given order

    Raises:
        IntegratorFailure: If the integrator fails or det M drifts from 1
    """
    times = np.asarray(times, dtype=float)
    _check_times(program, times)
    t_f = program.t_f
    s_eval = np.clip(times / t_f, 0.0, 1.0)
    s_end = float(s_eval.max()) if s_eval.size else 0.0

    if s_end == 0.0:
        return [CovariancePropagator.identity(mass).model_copy(update={"time": float(t)}) for t in times]

    order = np.argsort(s_eval, kind="stable")
    s_sorted = s_eval[order]

    def rhs(s, y):
        omega2 = float(program.Omega2(s))
        return [y[1], -omega2 * y[0], y[3], -omega2 * y[2]]

    sol = solve_ivp(
        rhs,
        (0.0, s_end),
        [1.0, 0.0, 0.0, 1.0],
        method="DOP853",
        t_eval=s_sorted,
        rtol=ODE_RTOL,
        atol=ODE_ATOL,
    )
    if not sol.success:
        raise IntegratorFailure(f"Fundamental-solution integration failed: {sol.message}")
    logger.debug(f"Fundamental solution to s={s_end:g}: {sol.nfev} evaluations")

    result: List[Optional[CovariancePropagator]] = [None] * len(times)
    for column, index in enumerate(order):
        w1, w1p, w2, w2p = sol.y[:, column]
        M = CovariancePropagator(
            m11=float(w1),
            m12=float(t_f * w2 / mass),
            m21=float(mass * w1p / t_f),
            m22=float(w2p),
            time=float(times[index]),
            mass=mass,
        )
        if abs(M.det - 1.0) > DET_TOLERANCE:
            raise IntegratorFailure(
                f"det M = {M.det:.15g} at t={M.time:g} deviates from 1",
                details={"det": M.det, "time": M.time},
            )
        result[index] = M
    return result  # type: ignore[return-value]


def fundamental_matrix(program: FrequencyProgram, t: float, mass: float = 1.0) -> CovariancePropagator:
    """
    Fundamental-solution matrix at time t

    Args:
        program: Frequency program
        t: Time in [0, t_f]
        mass: Particle mass

    Returns:
        CovariancePropagator with det M = 1 to integrator tolerance
    """
    return fundamental_matrices(program, [t], mass)[0]


def invariant_corrected(M: CovariancePropagator, traj: ReferenceTrajectory) -> CovariancePropagator:
    """
    Rebuild one row of M from the linear invariant G = u p − m u̇ q

    Momentum mode rebuilds the momentum row, position mode the position row.
    The identities are exact, so the boundary scalings M₂₂ = u0/uf (momentum)
    and M₁₁ = u̇0/u̇f (position) hold to rounding instead of integrator
    tolerance. M is returned unchanged where u (or u̇) is small.
    """
    t, m = M.time, M.mass
    u_t = float(traj.u(t))
    udot_t = float(traj.udot(t))
    if traj.mode is ScalingMode.MOMENTUM:
        if abs(u_t) < CORRECTION_FLOOR * traj.max_abs(0):
            return M
        return M.model_copy(update={
            "m21": m * (udot_t * M.m11 - traj.udot0) / u_t,
            "m22": (m * udot_t * M.m12 + traj.u0) / u_t,
        })
    if abs(udot_t) < CORRECTION_FLOOR * traj.max_abs(1) / traj.t_f:
        return M
    return M.model_copy(update={
        "m11": (u_t * M.m21 + m * traj.udot0) / (m * udot_t),
        "m12": (u_t * M.m22 - traj.u0) / (m * udot_t),
    })


def propagate_first_moments(M: CovariancePropagator, initial: MomentState) -> MomentState:
    """
    Map the means through M

    The central second moments are carried over unchanged; use
    propagate_second_moments for the full state.
    """
    if initial.time != 0.0:
        raise ConfigurationError(f"Initial moments must refer to t=0, got t={initial.time:g}")
    q, p = M.matrix @ initial.mean
    return MomentState.from_covariance((q, p), initial.covariance(), time=M.time)


def propagate_second_moments(M: CovariancePropagator, initial: MomentState) -> MomentState:
    """Σ_t = M Σ_0 Mᵀ and means mapped through M"""
    if initial.time != 0.0:
        raise ConfigurationError(f"Initial moments must refer to t=0, got t={initial.time:g}")
    matrix = M.matrix
    mean = matrix @ initial.mean
    cov = matrix @ initial.covariance() @ matrix.T
    return MomentState.from_covariance(mean, cov, time=M.time)


def propagate_trajectory(
    program: FrequencyProgram,
    initial: MomentState,
    times: Sequence[float],
    mass: float = 1.0
) -> List[Tuple[MomentState, Optional[InvariantRecord]]]:
    """
    Full moment states at several times

    Returns:
        (state, invariants) pairs; invariants are None when the program has no trajectory attached
    """
    matrices = fundamental_matrices(program, times, mass)
    records = []
    for M in matrices:
        state = propagate_second_moments(M, initial)
        invariants = None
        if program.trajectory is not None:
            invariants = invariant_expectations(program.trajectory, state, mass)
        records.append((state, invariants))
    logger.info(f"Propagated moments to {len(records)} times (t_f={program.t_f:g})")
    return records


# ============================================================================
# Closed-form integrals
# ============================================================================

def _assert_regular(values: np.ndarray, what: str, s_end: float) -> None:
    scale = float(np.max(np.abs(values)))
    if scale == 0.0:
        raise SingularIntegrand(f"{what} vanishes identically on [0, {s_end:g}]")
    signs = np.sign(values)
    if np.any(signs[1:] * signs[:-1] < 0) or np.any(np.abs(values) < SINGULAR_THRESHOLD * scale):
        raise SingularIntegrand(
            f"{what} vanishes inside [0, s={s_end:g}]; use fundamental_matrix instead",
            details={"s": s_end},
        )


def quadrature_integrals(traj: ReferenceTrajectory, t: float, program: Optional[FrequencyProgram] = None) -> QuadratureIntegrals:
    """
    U_t, I_t, A_t (momentum mode) or J_t (position mode) by adaptive quadrature

    I_t = ∫_0^t u_0²/u² dt' and J_t = ∫_0^t ω² u̇_0²/u̇² dt', evaluated in s
    with a relative tolerance of 1e−10.

    Args:
        traj: Reference trajectory
        t: Upper limit in [0, t_f]
        program: Frequency program (synthesized from traj when omitted)

    Returns:
        QuadratureIntegrals

    Raises:
        SingularIntegrand: If u (or u̇ for J) vanishes on [0, t]
    """
    t_f = traj.t_f
    if t < 0 or t > t_f * (1 + 1e-12):
        raise ConfigurationError(f"t must lie in [0, {t_f:g}], got {t:g}")
    s_end = min(t / t_f, 1.0)
    grid = np.linspace(0.0, s_end, 2001)
    P = traj.poly
    dP = traj.derivative_poly(1)

    if traj.mode is ScalingMode.MOMENTUM:
        _assert_regular(P(grid), "u", s_end)
        u0 = float(P(0.0))
        U = float(P(s_end)) / u0
        Udot = float(dP(s_end)) / (t_f * u0)
        if s_end == 0.0:
            return QuadratureIntegrals(U=U, I=0.0, A=1.0, J=None)
        value, error = quad(lambda s: u0 * u0 / float(P(s)) ** 2, 0.0, s_end, epsabs=0.0, epsrel=QUAD_EPSREL, limit=200)
        I = t_f * value
        logger.debug(f"I_t quadrature at s={s_end:g}: {I:.15g} (error estimate {error:.2e})")
        return QuadratureIntegrals(U=U, I=I, A=1.0 + U * Udot * I, J=None)

    if program is None:
        program = synthesize_omega2(traj)
    _assert_regular(dP(grid), "u̇", s_end)
    if s_end == 0.0:
        return QuadratureIntegrals(U=None, I=None, A=None, J=0.0)
    slope0 = float(dP(0.0))
    value, error = quad(
        lambda s: float(program.Omega2(s)) * slope0 * slope0 / float(dP(s)) ** 2,
        0.0, s_end, epsabs=1e-14, epsrel=QUAD_EPSREL, limit=200,
    )
    J = value / t_f
    logger.debug(f"J_t quadrature at s={s_end:g}: {J:.15g} (error estimate {error:.2e})")
    return QuadratureIntegrals(U=None, I=None, A=None, J=J)


def integral_from_propagator(M: CovariancePropagator, traj: ReferenceTrajectory) -> float:
    """
    I_t = m M₁₂ / U_t, valid also past a zero of u where the quadrature diverges

    Raises:
        SingularIntegrand: If U_t itself vanishes (the product U_t·I_t = m M₁₂ stays finite)
    """
    U = float(traj.u(M.time)) / traj.u0
    if abs(U) < SINGULAR_THRESHOLD:
        raise SingularIntegrand(f"U_t vanishes at t={M.time:g}; only U_t I_t = {M.mass * M.m12:.15g} is finite")
    return M.mass * M.m12 / U


def position_mode_first_moments(
    traj: ReferenceTrajectory,
    t: float,
    initial: MomentState,
    program: Optional[FrequencyProgram] = None,
    mass: float = 1.0
) -> MomentState:
    """
    First moments in position mode from the closed forms

    <p>_t = (−m J_t <q>_0 + <p>_0) u̇_t/u̇_0
    <q>_t = <p>_0 u_t/(m u̇_0) + <q>_0 (u̇_0/u̇_t − u_t J_t/u̇_0)

    Falls back to the fundamental matrix when u̇ vanishes on [0, t].
    """
    if traj.mode is not ScalingMode.POSITION:
        raise ConfigurationError("position_mode_first_moments needs a position-mode trajectory")
    if program is None:
        program = synthesize_omega2(traj)
    try:
        _, _, _, J = quadrature_integrals(traj, t, program)
    except SingularIntegrand:
        logger.debug(f"u̇ vanishes before t={t:g}; using the fundamental matrix")
        return propagate_first_moments(fundamental_matrix(program, t, mass), initial)

    u_t = float(traj.u(t))
    udot_t = float(traj.udot(t))
    udot0 = traj.udot0
    q0, p0 = initial.q_mean, initial.p_mean
    p = (-mass * J * q0 + p0) * udot_t / udot0
    q = p0 * u_t / (mass * udot0) + q0 * (udot0 / udot_t - u_t * J / udot0)
    return MomentState.from_covariance((q, p), initial.covariance(), time=t)


# ============================================================================
# Invariants and derived diagnostics
# ============================================================================

def invariant_expectations(traj: ReferenceTrajectory, state: MomentState, mass: float = 1.0) -> InvariantRecord:
    """<G> and <I> for the given moments at the state's time"""
    u = float(traj.u(state.time))
    udot = float(traj.udot(state.time))
    G = u * state.p_mean - mass * udot * state.q_mean
    I = (
        u * u * state.p2 / (2 * mass)
        + mass * udot * udot * state.q2 / 2
        - u * udot * state.qp_sym / 2
    )
    return InvariantRecord(G_mean=G, I_mean=I, time=state.time)


def max_position_excursion(
    program: FrequencyProgram,
    initial: MomentState,
    mass: float = 1.0,
    samples: int = EXCURSION_SAMPLES
) -> float:
    """max over [0, t_f] of |<q>_t| on a uniform grid"""
    times = np.linspace(0.0, program.t_f, samples)
    matrices = fundamental_matrices(program, times, mass)
    q = [M.m11 * initial.q_mean + M.m12 * initial.p_mean for M in matrices]
    return float(np.max(np.abs(q)))


def uncertainty_defect(program: FrequencyProgram, initial: MomentState, mass: float = 1.0) -> float:
    """
    |Δq_f Δp_f − Δq_0 Δp_0|

    Not an invariant: for uncorrelated initial states it vanishes as t_f → 0.
    """
    final = propagate_second_moments(fundamental_matrix(program, program.t_f, mass), initial)
    return abs(math.sqrt(final.var_q * final.var_p) - math.sqrt(initial.var_q * initial.var_p))


def relative_drift(values: Sequence[float]) -> float:
    """max |x − x_0| / |x_0| along a sequence (absolute when x_0 = 0)"""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    deviation = float(np.max(np.abs(values - values[0])))
    reference = abs(float(values[0]))
    return deviation / reference if reference > 0 else deviation
