"""Device models: grid-forming droop inverter, diesel-generator surrogate and
grid-following injection with a frequency ride-through relay.

Conventions used throughout the package:

* frequencies are in Hz, angles in rad, so ``d(delta)/dt = 2*pi*(omega - omega0)``;
* device powers are per-unit on the device's own rating;
* droop gains are in Hz per per-unit power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

TWO_PI = 2.0 * math.pi


class ParameterError(ValueError):
    """Raised for physically invalid device or controller parameters."""


@dataclass(frozen=True)
class InverterParams:
    s_inv: float  # kVA
    m_p: float  # Hz/pu
    tau: float  # s
    p_min: float = 0.0
    p_max: float = 1.0
    omega0: float = 60.0
    tau_f: float = 0.0  # optional p_inv measurement filter, 0 = bypass
    storage: bool = False

    def __post_init__(self):
        if not self.s_inv > 0:
            raise ParameterError(f"s_inv must be > 0, got {self.s_inv}")
        if not self.tau > 0:
            raise ParameterError(f"tau must be > 0, got {self.tau}")
        if not self.m_p > 0:
            raise ParameterError(f"m_p must be > 0, got {self.m_p}")
        if self.p_min > self.p_max:
            raise ParameterError(f"p_min ({self.p_min}) > p_max ({self.p_max})")
        if self.p_min < 0 and not self.storage:
            raise ParameterError("p_min < 0 requires storage capability")
        if self.tau_f < 0:
            raise ParameterError(f"tau_f must be >= 0, got {self.tau_f}")


@dataclass(frozen=True)
class DacConfig:
    enabled: bool = True
    omega_min: float = 59.9
    omega_max: float = 60.1
    alpha: float = 1.0
    q: int = 3
    p_set_min: float = 0.0

    def __post_init__(self):
        if not self.omega_min < self.omega_max:
            raise ParameterError(
                f"omega_min ({self.omega_min}) must be below omega_max ({self.omega_max})"
            )
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")
        if int(self.q) != self.q or self.q < 1 or self.q % 2 == 0:
            raise ParameterError(f"q must be an odd positive integer (sign preservation), got {self.q}")

    def check_nominal(self, omega0: float) -> None:
        if not self.omega_min < omega0 < self.omega_max:
            raise ParameterError(
                f"safe band [{self.omega_min}, {self.omega_max}] must contain omega0={omega0}"
            )


@dataclass
class GfmState:
    delta: float = 0.0
    omega: float = 60.0
    p_inv: float = 0.0
    q_inv: float = 0.0
    p_set_star: float = 0.0
    p_set_applied: float = 0.0


@dataclass(frozen=True)
class DgParams:
    rating: float  # kVA
    m_p: float  # Hz/pu
    tau: float  # governor time constant, s
    omega0: float = 60.0

    def __post_init__(self):
        for name in ("rating", "m_p", "tau", "omega0"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class GflState:
    rating: float  # kVA
    p_out: float  # pu
    frt_dwell: float = 0.0
    tripped: bool = False
    f_trip: float = 56.5
    t_dwell: float = 0.160

    def __post_init__(self):
        if not self.rating > 0:
            raise ParameterError(f"rating must be > 0, got {self.rating}")
        if self.frt_dwell < 0:
            raise ParameterError("frt_dwell must be >= 0")

    @property
    def injection(self) -> float:
        """Power actually delivered to the network (pu on own rating)."""
        return 0.0 if self.tripped else self.p_out


# Dwell comparison slack: a run of n steps of dt accumulates rounding error,
# so n*dt == t_dwell must still trip on step n.
DWELL_EPS = 1e-9


def droop_derivatives(omega, omega0, m_p, tau, p_set, p_inv):
    d_delta = TWO_PI * (omega - omega0)
    d_omega = (-(omega - omega0) + m_p * (p_set - p_inv)) / tau
    return d_delta, d_omega


def gfm_derivatives(state: GfmState, params: InverterParams, p_set: float, p_inv: float):
    """P-f droop right-hand side ``(d_delta [rad/s], d_omega [Hz/s])``."""
    return droop_derivatives(state.omega, params.omega0, params.m_p, params.tau, p_set, p_inv)


def dg_derivatives(state: GfmState, params: DgParams, p_set: float, p_inj: float):
    """Diesel generator surrogate; same droop form with governor constants."""
    return droop_derivatives(state.omega, params.omega0, params.m_p, params.tau, p_set, p_inj)


def droop_step_response(t, omega0, m_p, tau, p_set, p_inv, omega_init=None):
    """Closed-form frequency under constant set-point and injection."""
    if omega_init is None:
        omega_init = omega0
    target = omega0 + m_p * (p_set - p_inv)
    return target + (omega_init - target) * math.exp(-t / tau)


def gfl_frt_step(state: GflState, f_local: float, dt: float) -> GflState:
    """Advance the under-frequency ride-through relay by one step.

    Dwell counts consecutive time below ``f_trip`` and resets on recovery.
    The trip latches.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if state.tripped:
        return state
    dwell = state.frt_dwell + dt if f_local < state.f_trip else 0.0
    if dwell >= state.t_dwell - DWELL_EPS:
        return replace(state, frt_dwell=dwell, tripped=True, p_out=0.0)
    return replace(state, frt_dwell=dwell)
