"""
Reference trajectories and frequency programs

Designs the auxiliary trajectory u(t) for a requested momentum or position
scaling and turns it into the squared trap frequency ω²(t) = −ü(t)/u(t).

u is always a polynomial in s = t/t_f, so zeros of u that are cancelled by
zeros of ü (the momentum mirror at s = 1/2, both endpoints in position mode)
are removed by exact polynomial deflation instead of runtime guards.
"""

import logging
import math
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import sympy
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.optimize import minimize_scalar

from hscaler.errors import ConfigurationError, GenuineSingularity

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# |u| below this fraction of max|u| is treated as a node when checking residuals
NODE_THRESHOLD = 1e-8
# relative size of ü^(j)(r) accepted as zero when matching a root r of u
ROOT_MATCH_TOLERANCE = 1e-8
PEAK_SAMPLES = 4096
PEAK_TOLERANCE = 1e-10
RESIDUAL_GRID = 10_000

# s^3 (10 - 15 s + 6 s^2): zero slope and curvature at both ends
_SMOOTHSTEP = Polynomial([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])


class ScalingMode(str, Enum):
    MOMENTUM = "momentum"
    POSITION = "position"


class ScalingSpec(BaseModel):
    """What the user wants: which quantity to scale, by how much, and how fast"""

    mode: ScalingMode = Field(default=ScalingMode.MOMENTUM, description="Scale momenta or positions")
    scale_factor: float = Field(
        ...,
        description="Momentum mode: u0/uf (final momentum / initial momentum). "
                    "Position mode: u̇0/u̇f (final position / initial position)."
    )
    t_f: float = Field(default=1.0, gt=0, description="Process time")
    u0: float = Field(default=1.0, description="Initial reference amplitude (momentum mode)")
    udot0: float = Field(default=1.0, description="Initial reference velocity (position mode)")
    mass: float = Field(default=1.0, gt=0, description="Particle mass")
    hbar: float = Field(default=1.0, gt=0, description="Reduced Planck constant")

    model_config = ConfigDict(
        frozen=True,
        extra="forbid",
        json_schema_extra={
            "example": {
                "mode": "momentum",
                "scale_factor": 0.2,
                "t_f": 1.0,
                "u0": 1.0
            }
        }
    )

    @field_validator("scale_factor", "t_f", "u0", "udot0", "mass", "hbar")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("value must be finite")
        return v

    @field_validator("scale_factor")
    @classmethod
    def validate_scale_factor(cls, v: float) -> float:
        if v == 0:
            raise ValueError("scale_factor must be nonzero (the final reference value would be infinite)")
        return v

    @model_validator(mode="after")
    def validate_reference(self) -> "ScalingSpec":
        if self.mode is ScalingMode.MOMENTUM and self.u0 == 0:
            raise ValueError("momentum scaling requires u0 != 0")
        if self.mode is ScalingMode.POSITION and self.udot0 == 0:
            raise ValueError("position scaling requires udot0 != 0")
        return self

    @property
    def uf(self) -> float:
        """Final reference amplitude u0/scale_factor (momentum mode)"""
        return self.u0 / self.scale_factor

    @property
    def udotf(self) -> float:
        """Final reference velocity u̇0/scale_factor (position mode)"""
        return self.udot0 / self.scale_factor


def _as_output(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


class ReferenceTrajectory:
    """
    Polynomial reference trajectory u(t) = P(t/t_f)

    Derivatives are exact polynomial derivatives in s with the chain rule
    applied: d^k u/dt^k = P^(k)(s) / t_f^k.
    """

    def __init__(self, poly: Polynomial, t_f: float, mode: ScalingMode, spec: Optional[ScalingSpec] = None):
        self.poly = poly
        self.t_f = float(t_f)
        self.mode = mode
        self.spec = spec
        self._derivatives = [poly] + [poly.deriv(k) for k in range(1, 4)]

    @property
    def coeffs(self) -> Tuple[float, ...]:
        """Coefficients of P in ascending powers of s"""
        return tuple(float(c) for c in self.poly.coef)

    def derivative_poly(self, order: int) -> Polynomial:
        """P^(order) as a polynomial in s (no t_f scaling)"""
        if order < len(self._derivatives):
            return self._derivatives[order]
        return self.poly.deriv(order)

    def _eval(self, order: int, t: ArrayLike) -> ArrayLike:
        scalar = np.ndim(t) == 0
        s = np.asarray(t, dtype=float) / self.t_f
        values = self.derivative_poly(order)(s) / self.t_f ** order
        return _as_output(values, scalar)

    def u(self, t: ArrayLike) -> ArrayLike:
        return self._eval(0, t)

    def udot(self, t: ArrayLike) -> ArrayLike:
        return self._eval(1, t)

    def uddot(self, t: ArrayLike) -> ArrayLike:
        return self._eval(2, t)

    def udddot(self, t: ArrayLike) -> ArrayLike:
        return self._eval(3, t)

    @property
    def u0(self) -> float:
        return float(self.poly(0.0))

    @property
    def uf(self) -> float:
        return float(self.poly(1.0))

    @property
    def udot0(self) -> float:
        return float(self._derivatives[1](0.0)) / self.t_f

    @property
    def udotf(self) -> float:
        return float(self._derivatives[1](1.0)) / self.t_f

    def max_abs(self, order: int = 0, samples: int = RESIDUAL_GRID) -> float:
        """max over s in [0,1] of |P^(order)(s)| on a uniform grid"""
        s = np.linspace(0.0, 1.0, samples)
        return float(np.max(np.abs(self.derivative_poly(order)(s))))

    def __repr__(self) -> str:
        return f"ReferenceTrajectory(mode={self.mode.value}, t_f={self.t_f}, coeffs={self.coeffs})"


def design_momentum_trajectory(spec: ScalingSpec) -> ReferenceTrajectory:
    """
    Quintic reference trajectory for momentum scaling

    u(s) = u0 + (uf − u0) s³(10 − 15 s + 6 s²) with uf = u0/scale_factor,
    so that u̇ and ü vanish at both ends and p_f = (u0/uf) p_0.

    Args:
        spec: Momentum-mode scaling spec

    Returns:
        ReferenceTrajectory with the quintic coefficients

    Raises:
        ConfigurationError: If the scaling is not in momentum mode
    """
    if spec.mode is not ScalingMode.MOMENTUM:
        raise ConfigurationError(f"design_momentum_trajectory needs mode=momentum, got {spec.mode.value}")

    u0, uf = spec.u0, spec.uf
    poly = Polynomial([u0]) + (uf - u0) * _SMOOTHSTEP
    logger.info(f"Designed momentum trajectory: u0={u0:g}, uf={uf:g}, t_f={spec.t_f:g}")
    return ReferenceTrajectory(poly, spec.t_f, ScalingMode.MOMENTUM, spec)


@lru_cache(maxsize=None)
def position_basis() -> Tuple[Tuple[sympy.Rational, ...], Tuple[sympy.Rational, ...]]:
    """
    Exact degree-7 basis for position-mode trajectories

    Solves, once and in rational arithmetic, the 8×8 system
    u = ü = u⃛ = 0 at s = 0 and s = 1 together with u'(0) = a, u'(1) = b,
    for (a, b) = (1, 0) and (0, 1). Any position trajectory is then
    a·B_a(s) + b·B_b(s).

    Returns:
        Ascending coefficients of B_a and B_b as sympy Rationals
    """
    s = sympy.Symbol("s")
    c = sympy.symbols("c0:8")
    u = sum(c[k] * s ** k for k in range(8))
    d1, d2, d3 = (sympy.diff(u, s, k) for k in (1, 2, 3))
    a, b = sympy.symbols("a b")

    equations = [
        u.subs(s, 0), d2.subs(s, 0), d3.subs(s, 0), d1.subs(s, 0) - a,
        u.subs(s, 1), d2.subs(s, 1), d3.subs(s, 1), d1.subs(s, 1) - b,
    ]
    matrix, rhs = sympy.linear_eq_to_matrix(equations, c)
    solution = matrix.LUsolve(rhs)

    basis_a = tuple(sympy.Rational(sympy.expand(x).subs({a: 1, b: 0})) for x in solution)
    basis_b = tuple(sympy.Rational(sympy.expand(x).subs({a: 0, b: 1})) for x in solution)
    logger.debug(f"Position basis B_a={basis_a}, B_b={basis_b}")
    return basis_a, basis_b


def design_position_trajectory(spec: ScalingSpec) -> ReferenceTrajectory:
    """
    Degree-7 reference trajectory for position scaling

    u(s) vanishes together with ü and u⃛ at both ends, so that the linear
    invariant is proportional to q at the boundaries and ω²(t_b) = 0.
    The end slopes are u̇(0) = udot0 and u̇(t_f) = udot0/scale_factor,
    giving q_f = (u̇0/u̇f) q_0.

    Args:
        spec: Position-mode scaling spec

    Returns:
        ReferenceTrajectory with the degree-7 coefficients

    Raises:
        ConfigurationError: If the scaling is not in position mode
    """
    if spec.mode is not ScalingMode.POSITION:
        raise ConfigurationError(f"design_position_trajectory needs mode=position, got {spec.mode.value}")

    basis_a, basis_b = position_basis()
    slope0 = spec.udot0 * spec.t_f
    slopef = spec.udotf * spec.t_f
    coef = [slope0 * float(ca) + slopef * float(cb) for ca, cb in zip(basis_a, basis_b)]
    poly = Polynomial(coef)
    logger.info(
        f"Designed position trajectory: udot0={spec.udot0:g}, udotf={spec.udotf:g}, t_f={spec.t_f:g}"
    )
    return ReferenceTrajectory(poly, spec.t_f, ScalingMode.POSITION, spec)


def design_trajectory(spec: ScalingSpec) -> ReferenceTrajectory:
    """Dispatch on the scaling mode"""
    if spec.mode is ScalingMode.MOMENTUM:
        return design_momentum_trajectory(spec)
    return design_position_trajectory(spec)


# ============================================================================
# Frequency program
# ============================================================================

class Node(BaseModel):
    """A zero of u(s) in [0, 1] that was cancelled against ü(s)"""

    s: float = Field(..., description="Location in s = t/t_f")
    multiplicity: int = Field(..., ge=1)

    model_config = ConfigDict(frozen=True)


class FrequencyProgram:
    """
    ω²(t) = N(s) / (D(s) t_f²) with s = t/t_f

    N and D are the deflated −P'' and P: every zero of P on [0, 1] has been
    divided out of both, so D has no zero on [0, 1] and the ratio is finite.
    """

    def __init__(
        self,
        numerator: Polynomial,
        denominator: Polynomial,
        t_f: float,
        nodes: Tuple[Node, ...] = (),
        trajectory: Optional[ReferenceTrajectory] = None
    ):
        self.numerator = numerator
        self.denominator = denominator
        self.t_f = float(t_f)
        self.nodes = tuple(nodes)
        self.trajectory = trajectory
        self._peak: Optional[Tuple[float, float]] = None

    @classmethod
    def constant(cls, omega2: float, t_f: float = 1.0) -> "FrequencyProgram":
        """A constant squared frequency over [0, t_f] (ω² = 0 is free motion)"""
        return cls(Polynomial([omega2 * t_f * t_f]), Polynomial([1.0]), t_f)

    def Omega2(self, s: ArrayLike) -> ArrayLike:
        """Dimensionless Ω²(s) = t_f² ω²(s t_f)"""
        scalar = np.ndim(s) == 0
        s_arr = np.asarray(s, dtype=float)
        values = self.numerator(s_arr) / self.denominator(s_arr)
        return _as_output(values, scalar)

    def omega2(self, t: ArrayLike) -> ArrayLike:
        """Squared trap frequency at time t"""
        scalar = np.ndim(t) == 0
        s = np.asarray(t, dtype=float) / self.t_f
        values = np.asarray(self.Omega2(s)) / (self.t_f * self.t_f)
        return _as_output(values, scalar)

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return self.omega2(t)

    def dimensionless(self) -> "FrequencyProgram":
        """The same program in code units (t_f = 1)"""
        return FrequencyProgram(self.numerator, self.denominator, 1.0, self.nodes, self.trajectory)

    def _locate_peak(self) -> Tuple[float, float]:
        s = np.linspace(0.0, 1.0, PEAK_SAMPLES)
        values = np.abs(np.asarray(self.Omega2(s)))
        best_s, best_v = float(s[np.argmax(values)]), float(np.max(values))

        interior = np.flatnonzero(
            (values[1:-1] >= values[:-2]) & (values[1:-1] >= values[2:])
        ) + 1
        ranked = interior[np.argsort(values[interior], kind="stable")[::-1][:3]]
        for i in ranked:
            # bounded on [s_{i-1}, s_{i+1}]: a maximum between two equal samples is still enclosed
            result = minimize_scalar(
                lambda x: -abs(float(self.Omega2(x))),
                bounds=(s[i - 1], s[i + 1]),
                method="bounded",
                options={"xatol": PEAK_TOLERANCE},
            )
            x = float(np.clip(result.x, 0.0, 1.0))
            v = abs(float(self.Omega2(x)))
            if v > best_v:
                best_s, best_v = x, v
        return best_s, best_v

    @property
    def peak_location(self) -> float:
        """Time of the peak |ω²|"""
        if self._peak is None:
            self._peak = self._locate_peak()
        return self._peak[0] * self.t_f

    @property
    def peak_abs_omega2(self) -> float:
        """max over [0, t_f] of |ω²(t)|"""
        if self._peak is None:
            self._peak = self._locate_peak()
        return self._peak[1] / (self.t_f * self.t_f)

    def tabulate(self, n: int = 1001) -> Dict[str, np.ndarray]:
        """
        Uniform tabulation on [0, t_f]

        Returns:
            Columns s, t, u, udot, omega2 (u and udot only when a trajectory is attached)
        """
        s = np.linspace(0.0, 1.0, n)
        t = s * self.t_f
        table = {"s": s, "t": t}
        if self.trajectory is not None:
            table["u"] = np.asarray(self.trajectory.u(t))
            table["udot"] = np.asarray(self.trajectory.udot(t))
        else:
            table["u"] = np.full(n, np.nan)
            table["udot"] = np.full(n, np.nan)
        table["omega2"] = np.asarray(self.omega2(t))
        return table

    def __repr__(self) -> str:
        return f"FrequencyProgram(t_f={self.t_f}, nodes={[n.s for n in self.nodes]})"


def _unit_interval_roots(poly: Polynomial) -> List[Tuple[float, int]]:
    """Real zeros of poly in [0, 1], clustered into (location, multiplicity)"""
    if poly.degree() < 1:
        return []
    roots = poly.roots()
    candidates = sorted(
        float(r.real) for r in roots
        if abs(r.imag) <= 1e-4 and -1e-6 <= r.real <= 1.0 + 1e-6
    )
    clusters: List[List[float]] = []
    for r in candidates:
        if clusters and r - clusters[-1][-1] <= 1e-4:
            clusters[-1].append(r)
        else:
            clusters.append([r])

    located = []
    for cluster in clusters:
        r = float(np.mean(cluster))
        if abs(r) < 1e-9:
            r = 0.0
        elif abs(r - 1.0) < 1e-9:
            r = 1.0
        located.append((r, len(cluster)))
    return located


def synthesize_omega2(traj: ReferenceTrajectory) -> FrequencyProgram:
    """
    Frequency program ω²(t) = −ü(t)/u(t) with removable singularities deflated

    Every zero r of u(s) on [0, 1] must be a zero of ü(s) of at least the
    same multiplicity; the common factor (s − r)^k is divided out of both.

    Args:
        traj: Reference trajectory

    Returns:
        FrequencyProgram finite on [0, t_f]

    Raises:
        GenuineSingularity: If a zero of u is not matched by ü
    """
    numerator = -traj.derivative_poly(2)
    denominator = traj.poly
    nodes: List[Node] = []

    for r, multiplicity in _unit_interval_roots(denominator):
        for j in range(multiplicity):
            dj = numerator.deriv(j) if j else numerator
            scale = max(1.0, traj.max_abs(2 + j))
            if abs(float(dj(r))) > ROOT_MATCH_TOLERANCE * scale:
                raise GenuineSingularity(
                    f"u(s) vanishes at s={r:.12g} but ü does not vanish to order {multiplicity} there",
                    details={"s": r, "multiplicity": multiplicity, "order_failed": j},
                )
        factor = Polynomial.fromroots([r] * multiplicity)
        numerator, num_rem = divmod(numerator, factor)
        denominator, den_rem = divmod(denominator, factor)
        logger.debug(
            f"Deflated node s={r:.15g} (multiplicity {multiplicity}); "
            f"dropped remainders {np.max(np.abs(num_rem.coef)):.2e}, {np.max(np.abs(den_rem.coef)):.2e}"
        )
        nodes.append(Node(s=r, multiplicity=multiplicity))

    if _unit_interval_roots(denominator):
        raise GenuineSingularity("Deflated denominator still vanishes on [0, 1]")

    program = FrequencyProgram(numerator, denominator, traj.t_f, tuple(nodes), traj)
    logger.info(
        f"Synthesized frequency program: t_f={traj.t_f:g}, nodes={[n.s for n in nodes]}, "
        f"peak |omega^2|={program.peak_abs_omega2:.6g}"
    )
    return program


# ============================================================================
# Validation
# ============================================================================

class ValidationReport(BaseModel):
    """Boundary, equation-of-motion and symmetry checks for a designed protocol"""

    mode: ScalingMode
    scale_factor: Optional[float] = None
    t_f: float
    boundary_residuals: Dict[str, float] = Field(
        ..., description="Boundary-condition residuals, relative to the size of the matching derivative"
    )
    eom_residual: float = Field(..., description="sup |ü + ω²u| / max|ü| on the residual grid, away from nodes")
    symmetry_defect: Optional[float] = Field(
        None, description="sup |u(t_f/2+τ) + u(t_f/2−τ) − u_f − u_0| / (|u_0| + |u_f|) (momentum mode)"
    )
    peak_abs_omega2: float
    peak_time: float
    nodes: List[float] = Field(default_factory=list, description="Cancelled zeros of u, in s")
    max_position_excursion: Optional[float] = Field(
        None, description="max_t |<q>_t| for the supplied initial moments"
    )
    boundary_ok: bool
    residual_ok: bool
    symmetry_ok: bool
    passed: bool


BOUNDARY_TOLERANCE = 1e-10
EOM_TOLERANCE = 1e-10
SYMMETRY_TOLERANCE = 1e-13


def _boundary_residuals(traj: ReferenceTrajectory, program: FrequencyProgram) -> Dict[str, float]:
    P = [traj.derivative_poly(k) for k in range(4)]
    scale = [max(traj.max_abs(k), 1e-300) for k in range(4)]

    def rel(k: int, s: float, target: float = 0.0) -> float:
        return abs(float(P[k](s)) - target) / scale[k]

    omega_scale = max(abs(float(program.Omega2(0.5))), program.peak_abs_omega2 * program.t_f ** 2, 1.0)
    residuals = {
        "omega2_0": abs(float(program.Omega2(0.0))) / omega_scale,
        "omega2_f": abs(float(program.Omega2(1.0))) / omega_scale,
        "uddot_0": rel(2, 0.0),
        "uddot_f": rel(2, 1.0),
    }
    spec = traj.spec
    if traj.mode is ScalingMode.MOMENTUM:
        u0 = spec.u0 if spec else traj.u0
        uf = spec.uf if spec else traj.uf
        residuals.update({
            "u_0": rel(0, 0.0, u0),
            "u_f": rel(0, 1.0, uf),
            "udot_0": rel(1, 0.0),
            "udot_f": rel(1, 1.0),
        })
    else:
        slope0 = (spec.udot0 if spec else traj.udot0) * traj.t_f
        slopef = (spec.udotf if spec else traj.udotf) * traj.t_f
        residuals.update({
            "u_0": rel(0, 0.0),
            "u_f": rel(0, 1.0),
            "udot_0": rel(1, 0.0, slope0),
            "udot_f": rel(1, 1.0, slopef),
            "udddot_0": rel(3, 0.0),
            "udddot_f": rel(3, 1.0),
        })
    return residuals


def eom_residual(traj: ReferenceTrajectory, program: FrequencyProgram, samples: int = RESIDUAL_GRID) -> float:
    """sup |ü + ω²u| / max|ü| over points where |u| exceeds the node threshold"""
    s = np.linspace(0.0, 1.0, samples)
    u = traj.poly(s)
    uddot = traj.derivative_poly(2)(s)
    scale = float(np.max(np.abs(uddot)))
    if scale == 0.0:
        scale = 1.0
    mask = np.abs(u) > NODE_THRESHOLD * float(np.max(np.abs(u)))
    residual = uddot[mask] + np.asarray(program.Omega2(s[mask])) * u[mask]
    return float(np.max(np.abs(residual))) / scale if residual.size else 0.0


def symmetry_defect(traj: ReferenceTrajectory, samples: int = RESIDUAL_GRID) -> float:
    """sup over τ of |u(1/2+τ) + u(1/2−τ) − u_f − u_0| / (|u_0| + |u_f|), in s"""
    tau = np.linspace(0.0, 0.5, samples)
    u0, uf = traj.u0, traj.uf
    defect = traj.poly(0.5 + tau) + traj.poly(0.5 - tau) - uf - u0
    return float(np.max(np.abs(defect))) / (abs(u0) + abs(uf))


def validate_protocol(
    traj: ReferenceTrajectory,
    program: FrequencyProgram,
    initial=None
) -> ValidationReport:
    """
    Check a designed protocol

    Never raises on a failed check: the verdict is carried in the report.

    Args:
        traj: Reference trajectory
        program: Frequency program synthesized from it
        initial: Optional initial MomentState for the spatial excursion bound

    Returns:
        ValidationReport with residuals and pass/fail flags
    """
    residuals = _boundary_residuals(traj, program)
    eom = eom_residual(traj, program)
    sym = symmetry_defect(traj) if traj.mode is ScalingMode.MOMENTUM else None

    excursion = None
    if initial is not None:
        from hscaler.moments import max_position_excursion
        excursion = max_position_excursion(program, initial)

    boundary_ok = all(v <= BOUNDARY_TOLERANCE for v in residuals.values())
    residual_ok = eom <= EOM_TOLERANCE
    symmetry_ok = sym is None or sym <= SYMMETRY_TOLERANCE
    report = ValidationReport(
        mode=traj.mode,
        scale_factor=traj.spec.scale_factor if traj.spec else None,
        t_f=traj.t_f,
        boundary_residuals=residuals,
        eom_residual=eom,
        symmetry_defect=sym,
        peak_abs_omega2=program.peak_abs_omega2,
        peak_time=program.peak_location,
        nodes=[n.s for n in program.nodes],
        max_position_excursion=excursion,
        boundary_ok=boundary_ok,
        residual_ok=residual_ok,
        symmetry_ok=symmetry_ok,
        passed=boundary_ok and residual_ok and symmetry_ok,
    )
    if report.passed:
        logger.info(f"Protocol validated: eom residual {eom:.2e}, peak |omega^2| {report.peak_abs_omega2:.6g}")
    else:
        logger.warning(
            f"Protocol validation failed: boundary_ok={boundary_ok}, residual_ok={residual_ok}, "
            f"symmetry_ok={symmetry_ok}"
        )
    return report


def build_protocol(spec: ScalingSpec) -> Tuple[ReferenceTrajectory, FrequencyProgram]:
    """Design the trajectory for a spec and synthesize its frequency program"""
    traj = design_trajectory(spec)
    return traj, synthesize_omega2(traj)
