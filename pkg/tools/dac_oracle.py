"""Straight-line reference for the DAC set-point law.

Deliberately written without the package: scalar math only, one branch per
case, no shared helpers.  Used to generate src/gfmdac/data/dac_vectors.csv
and by the test-suite as an independent check.
"""
import math


def reference_p_set(omega, p_inv, q_inv, p_set_star, omega0, m_p, w_min, w_max, alpha, q, p_set_min, enabled=True):
    if enabled and omega < w_min:
        lo = p_inv + (omega - omega0 - alpha * (omega - w_min) ** q) / m_p
        hi = p_inv + (omega - omega0 - alpha * (omega - w_max) ** q) / m_p
        if lo > hi:
            p = lo
        else:
            p = p_set_star
            if p < lo:
                p = lo
            if p > hi:
                p = hi
    elif enabled and omega > w_max:
        lo = p_inv + (omega - omega0 - alpha * (omega - w_min) ** q) / m_p
        hi = p_inv + (omega - omega0 - alpha * (omega - w_max) ** q) / m_p
        if lo > hi:
            p = hi
        else:
            p = p_set_star
            if p < lo:
                p = lo
            if p > hi:
                p = hi
    else:
        p = p_set_star
    cap = math.sqrt(1.0 - q_inv * q_inv)
    if p < p_set_min:
        p = p_set_min
    if p > cap:
        p = cap
    return p
