"""
Classical ensembles sampled from a Gaussian Wigner distribution

Points are drawn in fixed-size chunks, each from its own SeedSequence child,
so an ensemble depends only on (moments, n, seed) and never on the number of
worker threads.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from hscaler.errors import BadCovariance
from hscaler.moments import MomentState, fundamental_matrix, invariant_corrected
from hscaler.protocol import FrequencyProgram

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
DEFAULT_POINTS = 100_000


class Ensemble:
    """Weighted classical phase-space points (q, p, weight) at one time"""

    def __init__(self, q: np.ndarray, p: np.ndarray, weight: np.ndarray, time: float = 0.0, rng_seed: Optional[int] = None):
        self.q = np.asarray(q, dtype=float)
        self.p = np.asarray(p, dtype=float)
        self.weight = np.asarray(weight, dtype=float)
        self.time = float(time)
        self.rng_seed = rng_seed
        if not (self.q.shape == self.p.shape == self.weight.shape):
            raise ValueError("q, p and weight must have the same shape")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ValueError("Ensemble coordinates must be finite")
        if self.weight.size and abs(float(np.sum(self.weight)) - 1.0) > 1e-9:
            raise ValueError("Ensemble weights must sum to 1")

    def __len__(self) -> int:
        return self.q.size

    def with_coordinates(self, q: np.ndarray, p: np.ndarray, time: float) -> "Ensemble":
        return Ensemble(q, p, self.weight, time, self.rng_seed)

    def __repr__(self) -> str:
        return f"Ensemble(n={len(self)}, time={self.time:g}, seed={self.rng_seed})"


class EnsembleSummary(BaseModel):
    """Weighted ensemble moments with their standard errors"""

    state: MomentState
    n: int
    se_q_mean: float = Field(..., description="Standard error of <q>")
    se_p_mean: float = Field(..., description="Standard error of <p>")
    se_q2: float = Field(..., description="Standard error of <q^2>")
    se_p2: float = Field(..., description="Standard error of <p^2>")

    model_config = ConfigDict(frozen=True)


def _chunks(n: int, size: int = CHUNK_SIZE) -> List[Tuple[int, int]]:
    return [(start, min(start + size, n)) for start in range(0, n, size)]


def _run_chunks(work: Callable[[int, int, int], Tuple[np.ndarray, np.ndarray]], n: int, workers: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    spans = _chunks(n)
    jobs = [(i, a, b) for i, (a, b) in enumerate(spans)]
    if workers is not None and workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(lambda job: work(*job), jobs))
    else:
        parts = [work(*job) for job in jobs]
    if not parts:
        return np.empty(0), np.empty(0)
    return np.concatenate([x for x, _ in parts]), np.concatenate([y for _, y in parts])


def sample_gaussian(
    moments: MomentState,
    n: int = DEFAULT_POINTS,
    seed: int = 0,
    hbar: float = 1.0,
    workers: Optional[int] = None
) -> Ensemble:
    """
    Draw n equally weighted points from the Gaussian with the given moments

    Args:
        moments: Initial first and second moments
        n: Number of points
        seed: Root seed; chunk k uses the k-th SeedSequence child
        hbar: Sets the uncertainty floor (ħ/2)²
        workers: Threads used to fill chunks

    Returns:
        Ensemble at time 0

    Raises:
        BadCovariance: If the covariance is not positive definite or below the uncertainty floor
    """
    if n < 1:
        raise BadCovariance(f"Ensemble size must be positive, got {n}")
    cov = moments.covariance()
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise BadCovariance(f"Covariance {cov.tolist()} is not positive definite") from exc
    moments.quantum_admissible(hbar)

    mean = moments.mean
    children = np.random.SeedSequence(seed).spawn(len(_chunks(n)))

    def draw(index: int, start: int, stop: int) -> Tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(children[index])
        z = rng.standard_normal((stop - start, 2))
        x = mean + z @ factor.T
        return x[:, 0], x[:, 1]

    q, p = _run_chunks(draw, n, workers)
    logger.info(f"Sampled {n} points (seed={seed}, {len(children)} chunks)")
    return Ensemble(q, p, np.full(n, 1.0 / n), time=moments.time, rng_seed=seed)


def propagate_exact(ensemble: Ensemble, program: FrequencyProgram, t: float, mass: float = 1.0) -> Ensemble:
    """
    Map every point through the fundamental matrix M(t)

    When the program carries its reference trajectory, the scaled row of M is
    rebuilt from the linear invariant so that boundary scalings hold pointwise.
    """
    M = fundamental_matrix(program, t, mass)
    if program.trajectory is not None:
        M = invariant_corrected(M, program.trajectory)
    q = M.m11 * ensemble.q + M.m12 * ensemble.p
    p = M.m21 * ensemble.q + M.m22 * ensemble.p
    return ensemble.with_coordinates(q, p, t)


def propagate_verlet(
    ensemble: Ensemble,
    program: FrequencyProgram,
    dt: float,
    t_end: Optional[float] = None,
    mass: float = 1.0,
    workers: Optional[int] = None
) -> Ensemble:
    """
    Velocity-Verlet stepping under the force −m ω²(t) q

    The interval [ensemble.time, t_end] is split into equal steps no longer
    than dt. Second order in dt; exact when ω² ≡ 0.
    """
    t0 = ensemble.time
    t_end = program.t_f if t_end is None else t_end
    n_steps = max(1, int(math.ceil((t_end - t0) / dt - 1e-12)))
    h = (t_end - t0) / n_steps
    omega2 = np.asarray(program.omega2(t0 + h * np.arange(n_steps + 1)), dtype=float)

    def run(index: int, start: int, stop: int) -> Tuple[np.ndarray, np.ndarray]:
        q = ensemble.q[start:stop].copy()
        p = ensemble.p[start:stop].copy()
        for k in range(n_steps):
            p -= 0.5 * h * mass * omega2[k] * q
            q += h * p / mass
            p -= 0.5 * h * mass * omega2[k + 1] * q
        return q, p

    q, p = _run_chunks(run, len(ensemble), workers)
    logger.info(f"Verlet propagation of {len(ensemble)} points: {n_steps} steps of {h:.3g}")
    return ensemble.with_coordinates(q, p, t_end)


def ensemble_moments(ensemble: Ensemble) -> EnsembleSummary:
    """Weighted moments and standard errors (n_eff from the weights)"""
    w = ensemble.weight
    q, p = ensemble.q, ensemble.p
    q_mean = float(np.sum(w * q))
    p_mean = float(np.sum(w * p))
    q2 = float(np.sum(w * q * q))
    p2 = float(np.sum(w * p * p))
    qp_sym = 2 * float(np.sum(w * q * p))
    n_eff = 1.0 / float(np.sum(w * w))

    def se(values: np.ndarray, mean: float) -> float:
        return math.sqrt(max(float(np.sum(w * (values - mean) ** 2)), 0.0) / n_eff)

    state = MomentState(q_mean=q_mean, p_mean=p_mean, q2=q2, p2=p2, qp_sym=qp_sym, time=ensemble.time)
    return EnsembleSummary(
        state=state,
        n=len(ensemble),
        se_q_mean=se(q, q_mean),
        se_p_mean=se(p, p_mean),
        se_q2=se(q * q, q2),
        se_p2=se(p * p, p2),
    )
