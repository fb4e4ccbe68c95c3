"""Decentralized autonomous controller (DAC): barrier-function set-point filter.

The DAC sits between the secondary dispatcher and the droop loop of one
grid-forming inverter.  Inside the safe band it passes the dispatched
set-point through untouched; outside it, the set-point is moved just enough
for the barrier derivative condition ``tau*dB/dt >= -alpha*B**q`` to hold
with equality, then clipped to the inverter's apparent-power headroom.

Every function here is pure and works on scalars.  The vectorised engine
kernel (:func:`gfmdac.kernels.dac_batch`) computes the same thing.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

from .models import DacConfig, InverterParams


class DacMode(enum.IntEnum):
    PASSTHROUGH = 0
    LOW_BARRIER = 1
    HIGH_BARRIER = 2


class InfeasibleOperatingPoint(ValueError):
    """Reactive injection alone already exceeds the inverter rating."""


@dataclass(frozen=True)
class DacInputs:
    omega: float
    p_inv: float
    q_inv: float
    p_set_star: float

    def __post_init__(self):
        for name in ("omega", "p_inv", "q_inv", "p_set_star"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class DacDecision:
    p_set: float
    p_set_low: float
    p_set_up: float
    active: DacMode
    clamped: bool
    inverted_bounds: bool = False


def barrier_eval(omega: float, cfg: DacConfig) -> tuple[float, float]:
    """Lower and upper barrier values; safe iff ``b_min >= 0`` and ``b_max <= 0``."""
    return omega - cfg.omega_min, omega - cfg.omega_max


def p_set_low(omega: float, p_inv: float, inv: InverterParams, cfg: DacConfig) -> float:
    return p_inv + (omega - inv.omega0 - cfg.alpha * (omega - cfg.omega_min) ** cfg.q) / inv.m_p


def p_set_up(omega: float, p_inv: float, inv: InverterParams, cfg: DacConfig) -> float:
    return p_inv + (omega - inv.omega0 - cfg.alpha * (omega - cfg.omega_max) ** cfg.q) / inv.m_p


def dac_select(p_set_star: float, p_low: float, p_up: float, omega: float, cfg: DacConfig):
    """Combine the two bounds with the dispatched set-point.

    Returns ``(p_set, mode, inverted)``; ``inverted`` flags ``p_low > p_up``,
    which odd ``q`` rules out for a one-sided violation.  In that case the
    bound on the violated side is returned.
    """
    if cfg.omega_min <= omega <= cfg.omega_max:
        return p_set_star, DacMode.PASSTHROUGH, False
    mode = DacMode.LOW_BARRIER if omega < cfg.omega_min else DacMode.HIGH_BARRIER
    if p_low > p_up:
        return (p_low if mode is DacMode.LOW_BARRIER else p_up), mode, True
    return min(p_up, max(p_low, p_set_star)), mode, False


def capacity_headroom(q_inv: float) -> float:
    if abs(q_inv) > 1.0:
        raise InfeasibleOperatingPoint(f"|q_inv|={abs(q_inv)} exceeds the rating (1 pu)")
    return math.sqrt(1.0 - q_inv * q_inv)


def capacity_clamp(p_set: float, q_inv: float, inv: InverterParams, cfg: DacConfig) -> tuple[float, bool]:
    p_max = capacity_headroom(q_inv)
    out = min(p_max, max(cfg.p_set_min, p_set))
    return out, out != p_set


def dac_compute(inputs: DacInputs, inv: InverterParams, cfg: DacConfig) -> DacDecision:
    """Map local measurements and the dispatched set-point to the applied set-point."""
    p_low = p_set_low(inputs.omega, inputs.p_inv, inv, cfg)
    p_up = p_set_up(inputs.omega, inputs.p_inv, inv, cfg)
    if cfg.enabled:
        p_set, mode, inverted = dac_select(inputs.p_set_star, p_low, p_up, inputs.omega, cfg)
    else:
        p_set, mode, inverted = inputs.p_set_star, DacMode.PASSTHROUGH, False
    p_set, clamped = capacity_clamp(p_set, inputs.q_inv, inv, cfg)
    return DacDecision(p_set, p_low, p_up, mode, clamped, inverted)


def design_warnings(cfg: DacConfig, resolution: float = 1e-3) -> list[str]:
    """Flag gains too small to register a violation of one band half-width.

    With ``alpha * half_width**q`` below the frequency resolution the barrier
    term is numerically invisible and the DAC reduces to holding the
    boundary.  The equations are still applied as written.
    """
    half_width = 0.5 * (cfg.omega_max - cfg.omega_min)
    strength = cfg.alpha * half_width ** cfg.q
    msgs = []
    if strength < resolution:
        msgs.append(
            f"alpha*(half-width)^q = {strength:.3g} Hz is below the frequency resolution "
            f"{resolution:g} Hz; the barrier term will barely register"
        )
    return msgs


def warn_design(cfg: DacConfig, resolution: float = 1e-3) -> None:
    for msg in design_warnings(cfg, resolution):
        warnings.warn(msg, stacklevel=2)
