"""
Scaling service

Thin orchestration over the protocol and moments modules shared by the MCP
tools, the REST routes and the CLI. All methods are synchronous and
CPU-bound; they hold no mutable state between calls.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np

from hscaler.features.moment_propagation.models import (
    MomentRow,
    MomentsRequest,
    MomentsResponse,
    ScalingCheck,
)
from hscaler.features.protocol_design.models import ProtocolRequest, ProtocolResponse, ProtocolTable
from hscaler.moments import MomentState, propagate_trajectory, relative_drift
from hscaler.protocol import (
    FrequencyProgram,
    ScalingMode,
    ScalingSpec,
    build_protocol,
    validate_protocol,
)

logger = logging.getLogger(__name__)


class ScalingService:
    """
    Designs protocols and propagates moments through them

    Features:
        - Momentum and position scaling protocols with exact polynomial trajectories
        - Removable singularities of ω² deflated exactly
        - Moments, invariants and the final scaling check in one call
    """

    def __init__(self, threads: Optional[int] = None):
        """
        Initialize the service

        Args:
            threads: Thread cap for any parallel work
        """
        self.threads = threads
        logger.info(f"ScalingService initialized (threads={threads})")

    def design(self, request: ProtocolRequest) -> ProtocolResponse:
        """
        Design and validate a protocol

        Args:
            request: Scaling spec with the requested tabulation size

        Returns:
            ProtocolResponse

        Raises:
            GenuineSingularity: If the trajectory has an unmatched zero
        """
        spec = request.to_spec()
        traj, program = build_protocol(spec)
        report = validate_protocol(traj, program)

        table = None
        if request.samples:
            columns = program.tabulate(request.samples)
            table = ProtocolTable(**{k: v.tolist() for k, v in columns.items()})

        return ProtocolResponse(
            spec=spec,
            coefficients=list(traj.coeffs),
            nodes=[n.s for n in program.nodes],
            peak_abs_omega2=program.peak_abs_omega2,
            peak_time=program.peak_location,
            validation=report,
            table=table,
        )

    def moment_rows(
        self,
        program: FrequencyProgram,
        initial: MomentState,
        times: Sequence[float],
        mass: float = 1.0
    ) -> List[MomentRow]:
        """Moments, invariants and kinetic energy at each time"""
        rows = []
        for state, invariants in propagate_trajectory(program, initial, times, mass):
            rows.append(MomentRow(
                t=state.time,
                q_mean=state.q_mean,
                p_mean=state.p_mean,
                var_q=state.var_q,
                var_p=state.var_p,
                cov_qp=state.cov_qp,
                G_mean=invariants.G_mean if invariants else float("nan"),
                I_mean=invariants.I_mean if invariants else float("nan"),
                kinetic_energy=state.kinetic_energy(mass),
            ))
        return rows

    @staticmethod
    def scaling_check(spec: ScalingSpec, rows: Sequence[MomentRow]) -> ScalingCheck:
        """Final/initial ratio of <p> (momentum mode) or <q> (position mode)"""
        quantity = "p_mean" if spec.mode is ScalingMode.MOMENTUM else "q_mean"
        first = getattr(rows[0], quantity)
        last = getattr(rows[-1], quantity)
        drift = max(
            relative_drift([r.G_mean for r in rows]),
            relative_drift([r.I_mean for r in rows]),
        )
        return ScalingCheck(
            quantity=quantity,
            expected_ratio=spec.scale_factor,
            observed_ratio=last / first if first != 0 else None,
            invariant_drift=drift,
        )

    def propagate(self, request: MomentsRequest) -> MomentsResponse:
        """
        Propagate Gaussian moments through the protocol of the request

        Args:
            request: Spec, initial state and times

        Returns:
            MomentsResponse with one row per time and the scaling check
        """
        spec = request.spec
        _, program = build_protocol(spec)
        initial = request.initial_state.to_moments(spec.hbar)
        times = request.times
        if times is None:
            times = np.linspace(0.0, spec.t_f, request.intervals + 1).tolist()

        rows = self.moment_rows(program, initial, times, spec.mass)
        check = self.scaling_check(spec, rows)
        logger.info(
            f"Propagated moments for {spec.mode.value} scale_factor={spec.scale_factor:g}: "
            f"ratio {check.observed_ratio}, invariant drift {check.invariant_drift:.2e}"
        )
        return MomentsResponse(spec=spec, rows=rows, scaling=check)
