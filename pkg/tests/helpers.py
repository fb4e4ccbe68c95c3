"""Scenario builders and closed-form references shared by the tests."""
import copy
import math

import numpy as np

from gfmdac.scenario import validate_document


def single_gfm_doc(load=0.5, p_set=0.5, m_p=1.0, tau=0.02, s_inv=1000.0, dac=None, t_end=1.0, dt=1e-3,
                   stride=1, events=(), q_inv=0.0):
    """One GFM alone on one bus; its injection equals the bus load."""
    return {
        "name": "single",
        "sim": {"t_end": t_end, "dt": dt, "stride": stride},
        "network": {"s_base_kva": s_inv, "buses": [{"id": 0}], "lines": [], "loads": [{"bus": 0, "p": load}]},
        "devices": [{"id": "g", "kind": "gfm", "bus": 0, "s_inv": s_inv, "m_p": m_p, "tau": tau,
                     "p_set": p_set, "q_inv": q_inv}],
        "dac": dict(dac or {"enabled": False}),
        "events": list(events),
        "metrics": {"monitor_bus": 0},
    }


def two_bus_doc(t_end=2.0):
    return {
        "name": "two_bus",
        "sim": {"t_end": t_end, "dt": 1e-3, "stride": 10},
        "network": {
            "buses": [{"id": 0}, {"id": 1}],
            "lines": [{"id": "l01", "from": 0, "to": 1, "b": 5.0}],
            "loads": [{"bus": 1, "p": 0.6}],
        },
        "devices": [
            {"id": "gfm1", "kind": "gfm", "bus": 0, "s_inv": 500.0, "m_p": 2.0, "tau": 0.1, "p_set": 0.5},
            {"id": "dg1", "kind": "dg", "bus": 1, "rating": 500.0, "m_p": 2.0, "tau": 0.5, "p_set": 0.7},
            {"id": "gfl1", "kind": "gfl", "bus": 1, "rating": 100.0, "p_out": 0.5},
        ],
        "dac": {"enabled": True, "alpha": 100.0},
        "metrics": {"monitor_bus": 0},
    }


def build(doc, **changes):
    doc = copy.deepcopy(doc)
    doc.update(changes)
    return validate_document(doc)


def cubic_barrier_distance(t, x0, alpha, tau):
    """Exact solution of tau*dx/dt = -alpha*x**3 for x = omega_min - omega."""
    return x0 / np.sqrt(1.0 + 2.0 * alpha * x0 * x0 * np.asarray(t) / tau)


def rk4_scalar(f, y0, t_end, h):
    """Plain scalar RK4, independent of the package kernels."""
    n = int(round(t_end / h))
    ys = [y0]
    y = y0
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys.append(y)
    return np.array(ys)


def droop_closed_form(t, omega0, m_p, tau, p_set, p_inv, omega_init):
    target = omega0 + m_p * (p_set - p_inv)
    return target + (omega_init - target) * np.exp(-np.asarray(t) / tau)


def frt_trace(segments, dt=1e-3):
    """Expand ``[(f, seconds), ...]`` into a per-step frequency list."""
    out = []
    for f, secs in segments:
        out += [f] * int(round(secs / dt))
    return out


def isclose_rel(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


__all__ = ["single_gfm_doc", "two_bus_doc", "build", "cubic_barrier_distance", "rk4_scalar", "droop_closed_form",
           "frt_trace", "isclose_rel", "math"]
