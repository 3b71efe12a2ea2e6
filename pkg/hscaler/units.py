"""
Code-unit conventions

Internally the wave-packet engine works with Q = q/l, s = t/t_f,
P = p·l/ħ and Ω = t_f·ω, where l = (ħ t_f / m)^{1/2}. In these units
m = ħ = t_f = 1. The helpers below convert between the dimensional
quantities of a ScalingSpec and code units.
"""

import math
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from hscaler.protocol import ScalingSpec


CODE_UNITS_NOTE = "code units: m = hbar = t_f = 1; Q = q/l, s = t/t_f, P = p*l/hbar, l = sqrt(hbar*t_f/m)"


def length_unit(t_f: float, mass: float = 1.0, hbar: float = 1.0) -> float:
    """l = (ħ t_f / m)^{1/2}"""
    return math.sqrt(hbar * t_f / mass)


def position_to_code(q: float, t_f: float, mass: float = 1.0, hbar: float = 1.0) -> float:
    return q / length_unit(t_f, mass, hbar)


def position_from_code(Q: float, t_f: float, mass: float = 1.0, hbar: float = 1.0) -> float:
    return Q * length_unit(t_f, mass, hbar)


def momentum_to_code(p: float, t_f: float, mass: float = 1.0, hbar: float = 1.0) -> float:
    return p * length_unit(t_f, mass, hbar) / hbar


def momentum_from_code(P: float, t_f: float, mass: float = 1.0, hbar: float = 1.0) -> float:
    return P * hbar / length_unit(t_f, mass, hbar)


def time_to_code(t: float, t_f: float) -> float:
    return t / t_f


def time_from_code(s: float, t_f: float) -> float:
    return s * t_f


def omega2_to_code(omega2: float, t_f: float) -> float:
    """Ω² = t_f² ω²"""
    return omega2 * t_f * t_f


def omega2_from_code(Omega2: float, t_f: float) -> float:
    return Omega2 / (t_f * t_f)


def code_units_spec(spec: "ScalingSpec") -> "ScalingSpec":
    """
    The same protocol expressed with t_f = m = ħ = 1

    The scale factor is dimensionless and carries over unchanged. In
    position mode the reference velocity is rescaled with t_f so that
    the polynomial in s is identical.
    """
    return spec.model_copy(
        update={
            "t_f": 1.0,
            "mass": 1.0,
            "hbar": 1.0,
            "udot0": spec.udot0 * spec.t_f,
        }
    )
