"""
Grid-based wave-packet dynamics in code units

Everything here works with m = ħ = t_f = 1: positions Q, momenta P and the
process variable s ∈ [0, 1]. The Hamiltonian is H = P²/2 + Ω²(s) Q²/2.
Frequency programs and reference trajectories are expected in the same
units (see FrequencyProgram.dimensionless and units.code_units_spec).
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.fft
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from hscaler.errors import GridTooSmall, MirrorNode, SingularIntegrand, StabilityWarning
from hscaler.moments import (
    MomentState,
    fundamental_matrix,
    quadrature_integrals,
)
from hscaler.protocol import FrequencyProgram, ReferenceTrajectory, ScalingMode, synthesize_omega2

logger = logging.getLogger(__name__)

SUPPORT_SIGMAS = 6.0
EDGE_CELLS = 6
EDGE_PROBABILITY = 1e-10
NODE_THRESHOLD = 1e-8
DEFAULT_SNAPSHOTS = 12


class GridSpec(BaseModel):
    """Uniform periodic grid in Q with its conjugate momentum grid"""

    n_points: int = Field(default=2048, ge=16, description="Number of grid points (power of two)")
    q_min: float = Field(default=-40.0, description="Left edge (inclusive)")
    q_max: float = Field(default=40.0, description="Right edge (exclusive)")
    dt: float = Field(default=2e-4, gt=0, description="Time step in s")

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("n_points")
    @classmethod
    def validate_power_of_two(cls, v: int) -> int:
        if v & (v - 1):
            raise ValueError(f"n_points must be a power of two, got {v}")
        return v

    @model_validator(mode="after")
    def validate_bounds(self) -> "GridSpec":
        if not self.q_max > self.q_min:
            raise ValueError("q_max must exceed q_min")
        return self

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_points

    @property
    def q(self) -> np.ndarray:
        return self.q_min + self.dq * np.arange(self.n_points)

    @property
    def p(self) -> np.ndarray:
        """Conjugate momenta in FFT order, spanning ±π/dq"""
        return 2 * np.pi * scipy.fft.fftfreq(self.n_points, d=self.dq)

    @property
    def dp(self) -> float:
        return 2 * np.pi / (self.n_points * self.dq)

    @property
    def p_max(self) -> float:
        return np.pi / self.dq


class WaveFunction:
    """Complex amplitudes Ψ(Q) on a grid at process time s"""

    def __init__(self, amplitudes: np.ndarray, grid: GridSpec, time: float = 0.0):
        self.amplitudes = np.asarray(amplitudes, dtype=complex)
        self.grid = grid
        self.time = float(time)
        if self.amplitudes.shape != (grid.n_points,):
            raise ValueError(f"Amplitudes of shape {self.amplitudes.shape} do not match {grid.n_points} points")

    def norm(self) -> float:
        """∑|Ψ|² dQ"""
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dq)

    def probability(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def momentum_amplitudes(self) -> np.ndarray:
        """Ψ̃(P) in FFT order, normalized so that ∑|Ψ̃|² dP = ∑|Ψ|² dQ"""
        g = self.grid
        phase = np.exp(-1j * g.p * g.q_min)
        return g.dq / math.sqrt(2 * np.pi) * phase * scipy.fft.fft(self.amplitudes)

    def edge_probability(self, cells: int = EDGE_CELLS) -> float:
        prob = self.probability() * self.grid.dq
        return float(np.sum(prob[:cells]) + np.sum(prob[-cells:]))

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.amplitudes.copy(), self.grid, self.time)

    def __repr__(self) -> str:
        return f"WaveFunction(n_points={self.grid.n_points}, time={self.time:g}, norm={self.norm():.15g})"


def gaussian_state(grid: GridSpec, q0_mean: float, p0_mean: float, sigma_q: float) -> WaveFunction:
    """
    Minimum-uncertainty Gaussian

    Ψ(Q) ∝ exp(−(Q − Q0)²/(4σ²) + i P0 Q), normalized on the grid.

    Raises:
        GridTooSmall: If ±6σ in Q or P does not fit inside the grid
    """
    if sigma_q <= 0:
        raise GridTooSmall(f"sigma_q must be positive, got {sigma_q}")
    sigma_p = 1.0 / (2.0 * sigma_q)
    reach_q = SUPPORT_SIGMAS * sigma_q
    reach_p = SUPPORT_SIGMAS * sigma_p
    if q0_mean - reach_q < grid.q_min or q0_mean + reach_q > grid.q_max:
        raise GridTooSmall(
            f"Packet support [{q0_mean - reach_q:g}, {q0_mean + reach_q:g}] exceeds the grid "
            f"[{grid.q_min:g}, {grid.q_max:g})",
            details={"q0_mean": q0_mean, "sigma_q": sigma_q},
        )
    if abs(p0_mean) + reach_p > grid.p_max:
        raise GridTooSmall(
            f"Momentum support |P0|+6σ_P = {abs(p0_mean) + reach_p:g} exceeds the grid limit {grid.p_max:g}",
            details={"p0_mean": p0_mean, "sigma_p": sigma_p},
        )

    q = grid.q
    psi = (2 * np.pi * sigma_q ** 2) ** -0.25 * np.exp(
        -((q - q0_mean) ** 2) / (4 * sigma_q ** 2) + 1j * p0_mean * q
    )
    wf = WaveFunction(psi, grid)
    wf.amplitudes /= math.sqrt(wf.norm())
    return wf


def measure_moments(wf: WaveFunction) -> MomentState:
    """<Q>, <P>, <Q²>, <P²> and <QP+PQ> with momenta taken spectrally"""
    g = wf.grid
    psi = wf.amplitudes
    q = g.q
    prob = np.abs(psi) ** 2 * g.dq
    total = float(np.sum(prob))

    spectrum = scipy.fft.fft(psi)
    dpsi = scipy.fft.ifft(1j * g.p * spectrum)  # dΨ/dQ
    p_psi = -1j * dpsi
    p2_psi = scipy.fft.ifft(g.p ** 2 * spectrum)

    q_mean = float(np.sum(q * prob)) / total
    q2 = float(np.sum(q * q * prob)) / total
    p_mean = float(np.real(np.sum(np.conj(psi) * p_psi)) * g.dq) / total
    p2 = float(np.real(np.sum(np.conj(psi) * p2_psi)) * g.dq) / total
    qp_sym = 2 * float(np.real(np.sum(np.conj(psi) * q * p_psi)) * g.dq) / total
    return MomentState(q_mean=q_mean, p_mean=p_mean, q2=q2, p2=p2, qp_sym=qp_sym, time=wf.time)


def _step_count(dt: float, snapshots: int) -> int:
    n = max(int(math.ceil(1.0 / dt)), snapshots)
    return int(math.ceil(n / snapshots) * snapshots)


def propagate(
    wf: WaveFunction,
    program: FrequencyProgram,
    snapshots: int = DEFAULT_SNAPSHOTS,
    dt: Optional[float] = None,
    workers: Optional[int] = None
) -> List[WaveFunction]:
    """
    Strang split-step propagation over s ∈ [0, 1]

    Each step is a potential half-step with Ω² at the interval midpoint, a
    spectral kinetic full step and a second potential half-step. The step
    count is rounded up to a multiple of the snapshot count so snapshots fall
    on step boundaries.

    Args:
        wf: Initial wave function at s = 0
        program: Frequency program in code units (t_f = 1)
        snapshots: Number of equal intervals; snapshots + 1 states are returned
        dt: Time step (defaults to the grid's dt)
        workers: FFT worker threads

    Returns:
        Wave functions at s = k/snapshots, k = 0..snapshots
    """
    if program.t_f != 1.0:
        program = program.dimensionless()
    g = wf.grid
    n_steps = _step_count(dt or g.dt, snapshots)
    h = 1.0 / n_steps
    every = n_steps // snapshots

    q2_half = -0.5j * g.q ** 2 * (h / 2)
    kinetic = np.exp(-0.5j * g.p ** 2 * h)
    psi = wf.amplitudes.copy()
    out = [WaveFunction(psi.copy(), g, 0.0)]
    warned = False

    logger.info(f"Split-step propagation: {n_steps} steps (ds={h:.3g}), {snapshots} snapshots, N={g.n_points}")
    for k in range(n_steps):
        potential = np.exp(q2_half * float(program.Omega2((k + 0.5) * h)))
        psi *= potential
        psi = scipy.fft.ifft(kinetic * scipy.fft.fft(psi, workers=workers), workers=workers)
        psi *= potential
        if (k + 1) % every == 0:
            snap = WaveFunction(psi.copy(), g, (k + 1) * h)
            edge = snap.edge_probability()
            if edge > EDGE_PROBABILITY and not warned:
                warnings.warn(
                    f"Probability {edge:.2e} within {EDGE_CELLS} cells of the grid boundary at s={snap.time:.4g}",
                    StabilityWarning,
                    stacklevel=2,
                )
                logger.warning(f"Boundary probability {edge:.2e} at s={snap.time:.4g}")
                warned = True
            out.append(snap)

    logger.debug(f"Final norm drift {abs(out[-1].norm() - out[0].norm()):.2e}")
    return out


# ============================================================================
# Invariant eigenbasis
# ============================================================================

def _sign_changes(values: np.ndarray) -> int:
    signs = np.sign(values[np.abs(values) > 0])
    return int(np.sum(signs[1:] != signs[:-1]))


def _momentum_integral(traj: ReferenceTrajectory, t: float, program: Optional[FrequencyProgram]) -> float:
    """I_t by quadrature, or m·M₁₂/U_t once u has passed through zero"""
    try:
        return quadrature_integrals(traj, t).I
    except SingularIntegrand:
        program = program or synthesize_omega2(traj)
        M = fundamental_matrix(program, t)
        return M.m12 * traj.u0 / float(traj.u(t))


def invariant_eigenfunction(
    traj: ReferenceTrajectory,
    p0: float,
    q_grid: np.ndarray,
    t: float,
    program: Optional[FrequencyProgram] = None
) -> np.ndarray:
    """
    Eigenfunction φ_{p0}(q, t) of the linear invariant (momentum mode, m = ħ = 1)

    φ = |u0/u_t|^{1/2} e^{−iπk/2} e^{−i p0² I_t/2} (2π)^{−1/2} exp(i(u0 p0 q + u̇_t q²/2)/u_t)

    with k the number of zeros of u passed on [0, t].

    Raises:
        MirrorNode: If u_t vanishes
    """
    u0 = traj.u0
    u_t = float(traj.u(t))
    if abs(u_t) < NODE_THRESHOLD * traj.max_abs(0):
        raise MirrorNode(f"u vanishes at t={t:g}; the eigenfunction is not defined there", details={"t": t})
    udot_t = float(traj.udot(t))
    I_t = _momentum_integral(traj, t, program)
    crossings = _sign_changes(np.asarray(traj.u(np.linspace(0.0, t, 2001)))) if t > 0 else 0

    q = np.asarray(q_grid, dtype=float)
    amplitude = math.sqrt(abs(u0 / u_t)) / math.sqrt(2 * np.pi)
    phase = -0.5 * np.pi * crossings - 0.5 * p0 * p0 * I_t
    return amplitude * np.exp(1j * (phase + (u0 * p0 * q + 0.5 * udot_t * q * q) / u_t))


def position_eigenfunction(
    traj: ReferenceTrajectory,
    q0: float,
    p_grid: np.ndarray,
    t: float,
    program: Optional[FrequencyProgram] = None
) -> np.ndarray:
    """
    Eigenfunction φ_{q0}(p, t) of the position-mode invariant, in momentum representation

    φ = |u̇0/u̇_t|^{1/2} e^{−iπk/2} (2π)^{−1/2} exp(−i(q0 u̇0 p + u_t p²/2)/u̇_t) exp(−i q0² J_t/2)

    with k the number of zeros of u̇ passed on [0, t]. At t = 0 this is <p|q0>.

    Raises:
        MirrorNode: If u̇_t vanishes
    """
    if traj.mode is not ScalingMode.POSITION:
        raise MirrorNode("position_eigenfunction needs a position-mode trajectory")
    udot0 = traj.udot0
    udot_t = float(traj.udot(t))
    scale = traj.max_abs(1) / traj.t_f
    if abs(udot_t) < NODE_THRESHOLD * scale:
        raise MirrorNode(f"u̇ vanishes at t={t:g}; the eigenfunction is not defined there", details={"t": t})
    u_t = float(traj.u(t))

    program = program or synthesize_omega2(traj)
    try:
        J_t = quadrature_integrals(traj, t, program).J
    except SingularIntegrand:
        M = fundamental_matrix(program, t)
        J_t = -M.m21 * udot0 / udot_t
    crossings = _sign_changes(np.asarray(traj.udot(np.linspace(0.0, t, 2001)))) if t > 0 else 0

    p = np.asarray(p_grid, dtype=float)
    amplitude = math.sqrt(abs(udot0 / udot_t)) / math.sqrt(2 * np.pi)
    phase = -0.5 * np.pi * crossings - 0.5 * q0 * q0 * J_t
    return amplitude * np.exp(1j * (phase - (q0 * udot0 * p + 0.5 * u_t * p * p) / udot_t))


def reconstruct_via_expansion(
    initial_wf: WaveFunction,
    traj: ReferenceTrajectory,
    t: float,
    program: Optional[FrequencyProgram] = None,
    chunk_rows: int = 256
) -> WaveFunction:
    """
    Ψ(Q, t) from the invariant eigenbasis

    Ψ(Q, t) = Σ_k Ψ̃_0(P_k) φ_{P_k}(Q, t) ΔP with Ψ̃_0 the spectral momentum
    amplitudes of the initial state. At t = 0 the sum is the exact inverse
    of the discrete transform.

    Args:
        initial_wf: Wave function at s = 0
        traj: Momentum-mode trajectory in code units
        t: Process time
        program: Frequency program (used once u has crossed zero)
        chunk_rows: Grid rows evaluated per block

    Raises:
        MirrorNode: If u_t vanishes
    """
    g = initial_wf.grid
    u0 = traj.u0
    u_t = float(traj.u(t))
    if abs(u_t) < NODE_THRESHOLD * traj.max_abs(0):
        raise MirrorNode(f"u vanishes at t={t:g}; reconstruction is not defined there", details={"t": t})
    udot_t = float(traj.udot(t))
    I_t = _momentum_integral(traj, t, program) if t > 0 else 0.0
    crossings = _sign_changes(np.asarray(traj.u(np.linspace(0.0, t, 2001)))) if t > 0 else 0

    q = g.q
    p = g.p
    dq = g.dq
    # Ψ̃_0(P_k) = dq/√(2π) Σ_j Ψ_j e^{−i P_k Q_j}
    coefficients = dq / math.sqrt(2 * np.pi) * np.exp(-1j * p * g.q_min) * scipy.fft.fft(initial_wf.amplitudes)
    weights = coefficients * np.exp(-0.5j * p * p * I_t) * g.dp

    prefactor = (
        math.sqrt(abs(u0 / u_t)) / math.sqrt(2 * np.pi)
        * np.exp(-0.5j * np.pi * crossings)
        * np.exp(0.5j * udot_t * q * q / u_t)
    )
    ratio = u0 / u_t
    psi = np.empty(g.n_points, dtype=complex)
    for start in range(0, g.n_points, chunk_rows):
        rows = slice(start, min(start + chunk_rows, g.n_points))
        kernel = np.exp(1j * ratio * np.outer(q[rows], p))
        psi[rows] = kernel @ weights
    psi *= prefactor
    return WaveFunction(psi, g, t)


# ============================================================================
# Wigner function
# ============================================================================

@dataclass
class WignerGrid:
    """W(Q_i, P_k) on rows of the position grid and an oversampled momentum grid"""

    q: np.ndarray
    p: np.ndarray
    W: np.ndarray
    time: float

    @property
    def dq(self) -> float:
        return float(self.q[1] - self.q[0]) if self.q.size > 1 else 0.0

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0]) if self.p.size > 1 else 0.0

    def total(self) -> float:
        return float(np.sum(self.W) * self.dq * self.dp)

    def position_marginal(self) -> np.ndarray:
        return np.sum(self.W, axis=1) * self.dp

    def momentum_marginal(self) -> np.ndarray:
        return np.sum(self.W, axis=0) * self.dq


def wigner(
    wf: WaveFunction,
    oversample: int = 2,
    q_window: Optional[Tuple[float, float]] = None,
    p_window: Optional[Tuple[float, float]] = None,
    chunk_rows: int = 64,
    workers: Optional[int] = None
) -> WignerGrid:
    """
    Wigner function by row-wise transforms of the symmetric autocorrelation

    W(Q_i, P) = (dq/π) Σ_j Ψ*(Q_{i+j}) Ψ(Q_{i−j}) e^{2iP j dq}

    The displacement sum is zero-padded to M = oversample·N and evaluated by
    FFT, giving P_k = πk/(M dq). The position marginal is exact.

    Args:
        wf: Normalized wave function
        oversample: Padding factor (≥ 2 avoids wrap-around)
        q_window: Restrict to rows with Q in [a, b]
        p_window: Restrict to columns with P in [a, b]
        chunk_rows: Rows transformed per block
        workers: FFT worker threads

    Returns:
        WignerGrid with real W
    """
    if oversample < 2:
        raise ValueError("oversample must be at least 2")
    g = wf.grid
    n = g.n_points
    size = oversample * n
    psi = wf.amplitudes
    q = g.q

    rows = np.arange(n)
    if q_window is not None:
        rows = rows[(q >= q_window[0]) & (q <= q_window[1])]

    p = np.pi * scipy.fft.fftshift(scipy.fft.fftfreq(size, d=1.0 / size)) / (size * g.dq)
    cols = np.arange(size)
    if p_window is not None:
        cols = cols[(p >= p_window[0]) & (p <= p_window[1])]

    shifts = np.arange(-(n - 1), n)
    slots = np.mod(shifts, size)
    W = np.empty((rows.size, cols.size))
    for start in range(0, rows.size, chunk_rows):
        block = rows[start:start + chunk_rows]
        plus = block[:, None] + shifts[None, :]
        minus = block[:, None] - shifts[None, :]
        valid = (plus >= 0) & (plus < n) & (minus >= 0) & (minus < n)
        products = np.where(
            valid,
            np.conj(psi[np.clip(plus, 0, n - 1)]) * psi[np.clip(minus, 0, n - 1)],
            0.0,
        )
        padded = np.zeros((block.size, size), dtype=complex)
        padded[:, slots] = products
        spectrum = scipy.fft.ifft(padded, axis=1, workers=workers) * size
        values = (g.dq / np.pi) * np.real(scipy.fft.fftshift(spectrum, axes=1))
        W[start:start + block.size] = values[:, cols]

    logger.debug(f"Wigner grid {rows.size}x{cols.size} at s={wf.time:g}")
    return WignerGrid(q=q[rows], p=p[cols], W=W, time=wf.time)


def level_set_area(grid: WignerGrid, level: float) -> float:
    """Phase-space area of {W ≥ level} by pixel counting"""
    return float(np.count_nonzero(grid.W >= level)) * grid.dq * grid.dp
