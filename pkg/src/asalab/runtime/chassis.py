"""Three-phase planar pose regulation for the differential-drive chassis.

Sequential proportional control: rotate in place onto the bearing line,
translate, then rotate onto the target yaw.  Alignment is bi-directional:
when the reverse bearing needs less rotation the chassis backs up instead.
Commands are zero inside the dead zones or clamped into the magnitude
bands [v_min, v_max] and [w_min, w_max]; phases only progress forward for
a given target.
"""

from __future__ import annotations

import enum
import math

from ..config import ControllerConfig
from ..geometry import ChassisState, wrap_angle


class ControllerPhase(enum.Enum):
    HEADING_ALIGNMENT = 1
    LINEAR_APPROACH = 2
    FINAL_ORIENTATION = 3
    DONE = 4


def _band(value: float, lo: float, hi: float) -> float:
    """Clamp |value| into [lo, hi], preserving sign; zero stays zero."""
    if value == 0.0:
        return 0.0
    return math.copysign(min(hi, max(lo, abs(value))), value)


def _bearing_error(current: ChassisState, target: ChassisState):
    dx = target.x - current.x
    dy = target.y - current.y
    e_psi = wrap_angle(math.atan2(dy, dx) - current.yaw)
    direction = 1.0
    if abs(e_psi) > math.pi / 2:
        e_psi = wrap_angle(e_psi + math.pi)
        direction = -1.0
    return e_psi, direction


def chassis_step(current: ChassisState, target: ChassisState,
                 phase: ControllerPhase,
                 cfg: ControllerConfig | None = None
                 ) -> tuple[float, float, ControllerPhase]:
    """One control decision: (v, omega, next phase)."""
    cfg = cfg or ControllerConfig()
    e_d = math.hypot(target.x - current.x, target.y - current.y)

    if phase is ControllerPhase.DONE:
        return 0.0, 0.0, ControllerPhase.DONE

    if phase is ControllerPhase.HEADING_ALIGNMENT:
        if e_d <= cfg.eps_p:
            phase = ControllerPhase.FINAL_ORIENTATION
        else:
            e_psi, _ = _bearing_error(current, target)
            if abs(e_psi) <= cfg.eps_psi:
                phase = ControllerPhase.LINEAR_APPROACH
            else:
                w = _band(cfg.k_w * e_psi, cfg.w_min, cfg.w_max)
                return 0.0, w, ControllerPhase.HEADING_ALIGNMENT

    if phase is ControllerPhase.LINEAR_APPROACH:
        if e_d <= cfg.eps_p:
            phase = ControllerPhase.FINAL_ORIENTATION
        else:
            e_psi, direction = _bearing_error(current, target)
            w = 0.0
            if abs(e_psi) > cfg.eps_theta:
                w = _band(cfg.k_w * e_psi, cfg.w_min, cfg.w_max)
            v = 0.0
            if abs(e_psi) <= cfg.eps_psi:
                v = direction * _band(cfg.k_v * e_d, cfg.v_min, cfg.v_max)
            return v, w, ControllerPhase.LINEAR_APPROACH

    e_theta = wrap_angle(target.yaw - current.yaw)
    if abs(e_theta) <= cfg.eps_theta:
        return 0.0, 0.0, ControllerPhase.DONE
    w = _band(cfg.k_w * e_theta, cfg.w_min, cfg.w_max)
    return 0.0, w, ControllerPhase.FINAL_ORIENTATION
