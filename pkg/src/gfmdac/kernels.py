"""Hot numeric kernels: batched DAC, droop right-hand side, RK4 segments.

Everything is written as vectorised numpy so the interpreted fallback
(``GFMDAC_DISABLE_NUMBA=1``) stays reasonable; with numba the same source
is compiled.  Source arrays are ordered like ``NetworkModel.sources``.
"""
import numpy as np

from ._jit import njit

TWO_PI = 2.0 * np.pi
DWELL_EPS = 1e-9

MODE_PASSTHROUGH = 0
MODE_LOW = 1
MODE_HIGH = 2


@njit
def dac_batch(omega, p_inv, q_inv, p_star, omega0, m_p, w_min, w_max, alpha, q, p_floor, enabled):
    """Vectorised DAC: returns ``(p_set, p_low, p_up, mode, clamped)``."""
    p_low = p_inv + (omega - omega0 - alpha * (omega - w_min) ** q) / m_p
    p_up = p_inv + (omega - omega0 - alpha * (omega - w_max) ** q) / m_p
    below = omega < w_min
    above = omega > w_max
    act = enabled & (below | above)
    combined = np.minimum(p_up, np.maximum(p_low, p_star))
    # odd q keeps p_low <= p_up on a one-sided violation; guard regardless
    inverted = p_low > p_up
    combined = np.where(inverted, np.where(below, p_low, p_up), combined)
    p_sel = np.where(act, combined, p_star)
    head = np.sqrt(np.maximum(0.0, 1.0 - q_inv * q_inv))
    p_set = np.minimum(head, np.maximum(p_floor, p_sel))
    mode = np.where(act & below, MODE_LOW, np.where(act & above, MODE_HIGH, MODE_PASSTHROUGH))
    return p_set, p_low, p_up, mode.astype(np.int8), p_set != p_sel


@njit
def applied_setpoints(omega, p_meas, q_inv, p_star, has_dac, omega0, m_p, w_min, w_max, alpha, q, p_floor, enabled):
    p_dac, _, _, mode, _ = dac_batch(omega, p_meas, q_inv, p_star, omega0, m_p, w_min, w_max, alpha, q, p_floor, enabled)
    p_set = np.where(has_dac, p_dac, p_star)
    mode = np.where(has_dac, mode, np.int8(MODE_PASSTHROUGH)).astype(np.int8)
    return p_set, mode


@njit
def injections(K, c0, G, delta, gfl_p):
    out = K @ delta + c0
    if G.shape[1] > 0:
        out = out + G @ gfl_p
    return out


@njit
def droop_rhs(delta, omega, pmeas, p_star, p_hold, use_hold, has_dac, has_filt,
              omega0, m_p, tau, tau_f, q_inv, w_min, w_max, alpha, q, p_floor, enabled,
              K, c0, G, gfl_p):
    p_inv = injections(K, c0, G, delta, gfl_p)
    p_meas = np.where(has_filt, pmeas, p_inv)
    if use_hold:
        p_set = p_hold
    else:
        p_set, _ = applied_setpoints(omega, p_meas, q_inv, p_star, has_dac, omega0, m_p,
                                     w_min, w_max, alpha, q, p_floor, enabled)
    d_delta = TWO_PI * (omega - omega0)
    d_omega = (-(omega - omega0) + m_p * (p_set - p_meas)) / tau
    d_pm = np.where(has_filt, (p_inv - pmeas) / np.where(has_filt, tau_f, 1.0), 0.0)
    return d_delta, d_omega, d_pm


@njit
def rk4_step(dt, delta, omega, pmeas, p_star, p_hold, use_hold, has_dac, has_filt,
             omega0, m_p, tau, tau_f, q_inv, w_min, w_max, alpha, q, p_floor, enabled,
             K, c0, G, gfl_p):
    a1, b1, c1 = droop_rhs(delta, omega, pmeas, p_star, p_hold, use_hold, has_dac, has_filt,
                           omega0, m_p, tau, tau_f, q_inv, w_min, w_max, alpha, q, p_floor, enabled,
                           K, c0, G, gfl_p)
    h = 0.5 * dt
    a2, b2, c2 = droop_rhs(delta + h * a1, omega + h * b1, pmeas + h * c1, p_star, p_hold, use_hold,
                           has_dac, has_filt, omega0, m_p, tau, tau_f, q_inv, w_min, w_max, alpha, q,
                           p_floor, enabled, K, c0, G, gfl_p)
    a3, b3, c3 = droop_rhs(delta + h * a2, omega + h * b2, pmeas + h * c2, p_star, p_hold, use_hold,
                           has_dac, has_filt, omega0, m_p, tau, tau_f, q_inv, w_min, w_max, alpha, q,
                           p_floor, enabled, K, c0, G, gfl_p)
    a4, b4, c4 = droop_rhs(delta + dt * a3, omega + dt * b3, pmeas + dt * c3, p_star, p_hold, use_hold,
                           has_dac, has_filt, omega0, m_p, tau, tau_f, q_inv, w_min, w_max, alpha, q,
                           p_floor, enabled, K, c0, G, gfl_p)
    s = dt / 6.0
    return (delta + s * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            omega + s * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
            pmeas + s * (c1 + 2.0 * c2 + 2.0 * c3 + c4))


@njit
def euler_step(dt, delta, omega, pmeas, p_star, p_hold, use_hold, has_dac, has_filt,
               omega0, m_p, tau, tau_f, q_inv, w_min, w_max, alpha, q, p_floor, enabled,
               K, c0, G, gfl_p):
    a1, b1, c1 = droop_rhs(delta, omega, pmeas, p_star, p_hold, use_hold, has_dac, has_filt,
                           omega0, m_p, tau, tau_f, q_inv, w_min, w_max, alpha, q, p_floor, enabled,
                           K, c0, G, gfl_p)
    return delta + dt * a1, omega + dt * b1, pmeas + dt * c1


@njit
def frt_update(dt, f_gfl, energized, gfl_p, dwell, tripped, f_trip, t_dwell):
    """Vectorised ride-through relay; returns ``(gfl_p, dwell, tripped, any_new_trip)``."""
    live = energized & ~tripped
    below = f_gfl < f_trip
    dwell = np.where(live, np.where(below, dwell + dt, 0.0), dwell)
    new_trip = live & (dwell >= t_dwell - DWELL_EPS)
    tripped = tripped | new_trip
    gfl_p = np.where(tripped, 0.0, gfl_p)
    return gfl_p, dwell, tripped, np.any(new_trip)


@njit
def island_freqs(W, omega):
    return W @ omega


@njit
def gather(values, idx):
    out = np.empty(idx.shape[0])
    for i in range(idx.shape[0]):
        out[i] = values[idx[i]] if idx[i] >= 0 else np.nan
    return out


@njit
def integrate_segment(k0, k1, dt, stride, use_rk4, hold_dac,
                      delta, omega, pmeas, p_star, has_dac, has_filt,
                      omega0, m_p, tau, tau_f, q_inv, w_min, w_max, alpha, q, p_floor, enabled,
                      K, c0, G, W, bus_island, gfl_island, monitor_island, f_collapse_lo, f_collapse_hi,
                      gfl_p, gfl_dwell, gfl_tripped, f_trip, t_dwell,
                      rec_t, rec_omega, rec_pinv, rec_pstar, rec_pset, rec_mode,
                      rec_gfl_p, rec_gfl_trip, rec_fbus, rec_i):
    """Advance steps ``k0 .. k1-1`` (no discrete events inside the segment).

    Records the pre-step state and its DAC decision whenever ``k % stride == 0``.
    Returns ``(k_reached, rec_i, collapsed, delta, omega, pmeas, gfl_p, gfl_dwell,
    gfl_tripped)``; a collapse stops the segment after the offending step.
    """
    gfl_energized = gfl_island >= 0
    collapsed = False
    k = k0
    while k < k1:
        p_inv = injections(K, c0, G, delta, gfl_p)
        p_meas = np.where(has_filt, pmeas, p_inv)
        p_set, mode = applied_setpoints(omega, p_meas, q_inv, p_star, has_dac, omega0, m_p,
                                        w_min, w_max, alpha, q, p_floor, enabled)
        if k % stride == 0:
            f_isl = island_freqs(W, omega)
            rec_t[rec_i] = k * dt
            rec_omega[rec_i] = omega
            rec_pinv[rec_i] = p_inv
            rec_pstar[rec_i] = p_star
            rec_pset[rec_i] = p_set
            rec_mode[rec_i] = mode
            rec_gfl_p[rec_i] = gfl_p
            rec_gfl_trip[rec_i] = gfl_tripped
            rec_fbus[rec_i] = gather(f_isl, bus_island)
            rec_i += 1
        if use_rk4:
            delta, omega, pmeas = rk4_step(dt, delta, omega, pmeas, p_star, p_set, hold_dac, has_dac,
                                           has_filt, omega0, m_p, tau, tau_f, q_inv, w_min, w_max,
                                           alpha, q, p_floor, enabled, K, c0, G, gfl_p)
        else:
            delta, omega, pmeas = euler_step(dt, delta, omega, pmeas, p_star, p_set, hold_dac, has_dac,
                                             has_filt, omega0, m_p, tau, tau_f, q_inv, w_min, w_max,
                                             alpha, q, p_floor, enabled, K, c0, G, gfl_p)
        k += 1
        f_isl = island_freqs(W, omega)
        if gfl_p.shape[0] > 0:
            f_gfl = gather(f_isl, gfl_island)
            gfl_p, gfl_dwell, gfl_tripped, _ = frt_update(dt, f_gfl, gfl_energized, gfl_p, gfl_dwell,
                                                          gfl_tripped, f_trip, t_dwell)
        if not np.all(np.isfinite(omega)):
            collapsed = True
        elif monitor_island >= 0:
            f_mon = f_isl[monitor_island]
            if f_mon < f_collapse_lo or f_mon > f_collapse_hi:
                collapsed = True
        if collapsed:
            break
    return k, rec_i, collapsed, delta, omega, pmeas, gfl_p, gfl_dwell, gfl_tripped
