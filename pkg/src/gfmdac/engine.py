"""Fixed-step hybrid simulation of networked microgrids.

Each step runs, in order: due discrete events, secondary tick plus attack
filter, DAC decisions from local measurements, RK4 integration of all droop
states (DAC and injections re-evaluated at the stage points), the GFL
ride-through relays, and trace capture.  Between discrete happenings the
work is done by :func:`gfmdac.kernels.integrate_segment`.
"""
from __future__ import annotations

import os
import types
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _jit, kernels
from .events import Event, EventKind
from .network import apply_switch_event, build_operator
from .scenario import MetricsConfig, ScenarioDoc, SimConfig, with_overrides
from .secondary import AttackSpec, attack_filter, secondary_update

__all__ = [
    "Simulator", "Trace", "Metrics", "SimConfig", "Event", "run_scenario", "compute_metrics",
    "band_occupancy", "parameter_sweep", "size_sweep", "kernels_for",
]

MODE_NAMES = ("passthrough", "low", "high")
_KERNEL_NAMES = ("dac_batch", "applied_setpoints", "injections", "droop_rhs", "rk4_step", "euler_step",
                 "frt_update", "island_freqs", "gather", "integrate_segment")


def default_backend() -> str:
    env = os.environ.get("GFMDAC_BACKEND", "").strip().lower()
    if env in ("numba", "numpy"):
        return env if (env == "numpy" or _jit.NUMBA_ENABLED) else "numpy"
    return _jit.backend_name()


_interp_cache = None


def _interpreted() -> types.SimpleNamespace:
    """Kernels rebound so that nested calls also stay in the interpreter."""
    global _interp_cache
    if _interp_cache is None:
        g = dict(vars(kernels))
        ns = {}
        for name in _KERNEL_NAMES:
            py = _jit.python_impl(getattr(kernels, name))
            ns[name] = types.FunctionType(py.__code__, g, name, py.__defaults__, py.__closure__)
        g.update(ns)
        _interp_cache = types.SimpleNamespace(**ns)
    return _interp_cache


def kernels_for(backend: str | None = None) -> types.SimpleNamespace:
    backend = backend or default_backend()
    if backend == "numpy":
        return _interpreted()
    if backend != "numba":
        raise ValueError(f"unknown backend {backend!r}")
    if not _jit.NUMBA_ENABLED:
        raise RuntimeError("numba backend requested but numba is disabled or missing")
    return types.SimpleNamespace(**{n: getattr(kernels, n) for n in _KERNEL_NAMES})


@dataclass
class Trace:
    t: np.ndarray
    source_ids: list
    gfl_ids: list
    bus_ids: list
    omega: np.ndarray
    p_inv: np.ndarray
    q_inv: np.ndarray
    p_set_star: np.ndarray
    p_set: np.ndarray
    mode: np.ndarray
    gfl_p: np.ndarray
    gfl_tripped: np.ndarray
    f_bus: np.ndarray
    collapsed: bool = False
    collapse_time: float | None = None
    log: list = field(default_factory=list)

    def source(self, dev_id) -> int:
        return self.source_ids.index(dev_id)

    def f_at(self, bus) -> np.ndarray:
        return self.f_bus[:, self.bus_ids.index(bus)]

    def column_names(self) -> list[str]:
        cols = ["t"]
        for s in self.source_ids:
            cols += [f"{s}.omega", f"{s}.p_inv", f"{s}.q_inv", f"{s}.p_set_star", f"{s}.p_set", f"{s}.dac"]
        for g in self.gfl_ids:
            cols += [f"{g}.p_out", f"{g}.tripped"]
        cols += [f"f.bus{b}" for b in self.bus_ids]
        return cols


@dataclass(frozen=True)
class Metrics:
    violation_time: float
    nadir: float
    peak: float
    safe_band_occupancy: float
    settled_frequency: float
    collapsed: bool
    collapse_time: float | None = None
    violation_threshold: float = 56.5
    monitor_bus: int | None = None

    def as_dict(self) -> dict:
        return {
            "violation_time": self.violation_time,
            "violation_threshold": self.violation_threshold,
            "nadir": self.nadir,
            "peak": self.peak,
            "safe_band_occupancy": self.safe_band_occupancy,
            "settled_frequency": self.settled_frequency,
            "collapsed": self.collapsed,
            "collapse_time": self.collapse_time,
            "monitor_bus": self.monitor_bus,
        }


def _record_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t)
    if len(t) > 1:
        w[:-1] = np.diff(t)
    return w


def band_occupancy(t, f, lo, hi, tol=0.0, windows=None) -> float:
    """Time fraction with ``lo - tol <= f <= hi + tol``; non-finite ``f`` counts as outside.

    ``windows`` optionally restricts the evaluation to ``[(t0, t1), ...]``.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    w = _record_weights(t)
    mask = np.ones(len(t), dtype=bool)
    if windows is not None:
        mask = np.zeros(len(t), dtype=bool)
        for t0, t1 in windows:
            mask |= (t >= t0) & (t < t1)
    inside = np.isfinite(f) & (f >= lo - tol) & (f <= hi + tol)
    total = w[mask].sum()
    if total <= 0:
        return float(inside[mask].mean()) if mask.any() else float("nan")
    return float(w[mask & inside].sum() / total)


def compute_metrics(trace: Trace, thresholds: MetricsConfig) -> Metrics:
    """Metrics of the island frequency seen at the monitored bus."""
    t = trace.t
    if len(t) == 0:
        raise ValueError("empty trace")
    f = trace.f_at(thresholds.monitor_bus)
    w = _record_weights(t)
    # a de-energized monitored bus counts as violating
    violating = ~np.isfinite(f) | (f < thresholds.violation_threshold)
    finite = f[np.isfinite(f)]
    tail = (t >= t[-1] - thresholds.settle_window) & np.isfinite(f)
    return Metrics(
        violation_time=float(w[violating].sum()),
        nadir=float(finite.min()) if finite.size else float("nan"),
        peak=float(finite.max()) if finite.size else float("nan"),
        safe_band_occupancy=band_occupancy(t, f, thresholds.omega_min, thresholds.omega_max,
                                           thresholds.band_tolerance),
        settled_frequency=float(f[tail].mean()) if tail.any() else float("nan"),
        collapsed=bool(trace.collapsed),
        collapse_time=trace.collapse_time,
        violation_threshold=thresholds.violation_threshold,
        monitor_bus=thresholds.monitor_bus,
    )


class Simulator:
    """Deterministic single-run simulator for one validated scenario."""

    def __init__(self, scenario: ScenarioDoc, backend: str | None = None):
        self.scenario = sc = scenario
        self.backend = backend or default_backend()
        self.kern = kernels_for(self.backend)
        sim = sc.sim
        self.dt = sim.dt
        self.n_steps = sim.n_steps
        self.stride = sim.stride
        self.use_rk4 = sim.integrator == "rk4"
        self.hold_dac = sim.dac_rate == "step"

        srcs = sc.sources
        n_gfm = len(sc.gfms)
        self.src_ids = [s.id for s in srcs]
        others = [*sc.dgs, *sc.grids]
        self.ratings = np.array([s.params.s_inv for s in sc.gfms] + [s.params.rating for s in others], dtype=float)
        self.omega0 = np.array([s.params.omega0 for s in srcs], dtype=float)
        self.m_p = np.array([s.params.m_p for s in srcs], dtype=float)
        self.tau = np.array([s.params.tau for s in srcs], dtype=float)
        self.tau_f = np.array([s.params.tau_f for s in sc.gfms] + [0.0] * len(others), dtype=float)
        self.q_inv = np.array([s.q_inv for s in sc.gfms] + [0.0] * len(others), dtype=float)
        self.has_dac = np.arange(len(srcs)) < n_gfm
        self.has_filt = self.tau_f > 0
        cfgs = [g.dac for g in sc.gfms] + [sc.dac] * len(others)
        self.w_min = np.array([c.omega_min for c in cfgs], dtype=float)
        self.w_max = np.array([c.omega_max for c in cfgs], dtype=float)
        self.alpha = np.array([c.alpha for c in cfgs], dtype=float)
        self.q = np.array([c.q for c in cfgs], dtype=np.int64)
        self.p_floor = np.array([c.p_set_min for c in cfgs], dtype=float)
        self.enabled = np.array([c.enabled for c in cfgs], dtype=bool) & self.has_dac
        self.secondary_mask = np.array([g.secondary for g in sc.gfms] + [False] * len(others), dtype=bool)

        self.p_sec = np.array([s.p_set for s in srcs], dtype=float)
        self.p_star = self.p_sec.copy()

        self.gfl_ids = [g.id for g in sc.gfls]
        self.gfl_rating = np.array([g.state.rating for g in sc.gfls], dtype=float)
        self.gfl_p = np.array([g.state.p_out for g in sc.gfls], dtype=float)
        self.gfl_dwell = np.array([g.state.frt_dwell for g in sc.gfls], dtype=float)
        self.gfl_tripped = np.array([g.state.tripped for g in sc.gfls], dtype=bool)
        self.f_trip = np.array([g.state.f_trip for g in sc.gfls], dtype=float)
        self.t_dwell = np.array([g.state.t_dwell for g in sc.gfls], dtype=float)
        self.gfl_p = np.where(self.gfl_tripped, 0.0, self.gfl_p)

        self.metrics_cfg = sc.metrics
        self.network = sc.network
        self.bus_ids = list(self.network.buses)
        self.log: list = []
        self.collapsed = False
        self.collapse_time = None
        self._rebuild(0)

        self.delta = np.zeros(len(srcs))
        self.omega = self.omega0.copy()
        self.pmeas = np.zeros(len(srcs))
        self._init_steady_state()

        self.attack = None
        self.snapshot: dict = {}
        events = list(sc.events)
        if sc.attack is not None:
            k_on, k_off = self._step_of(sc.attack.t_on), self._step_of(sc.attack.t_off)
            self.attack = AttackSpec(sc.attack.targets, k_on * self.dt, k_off * self.dt, sc.attack.mode)
            events.append(Event(sc.attack.t_on, EventKind.ATTACK_START, order=-2))
            events.append(Event(sc.attack.t_off, EventKind.ATTACK_END, order=-1))
        self.events: dict = {}
        for ev in sorted(events, key=lambda e: e.sort_key):
            self.events.setdefault(self._step_of(ev.at), []).append(ev)
        self.tick_steps = set()
        if sc.secondary.enabled:
            period = max(1, self._step_of(sc.secondary.period))
            self.tick_steps = set(range(period, self.n_steps + 1, period))
        self.breaks = sorted({0, *self.events, *self.tick_steps, self.n_steps})
        self.kstep = 0
        self._done_discrete = -1

        rec_steps = list(range(0, self.n_steps + 1, self.stride))
        if rec_steps[-1] != self.n_steps:
            rec_steps.append(self.n_steps)
        self.rec_steps = rec_steps
        n_rec, n_src, n_gfl, n_bus = len(rec_steps), len(srcs), len(self.gfl_ids), len(self.bus_ids)
        self.rec_t = np.zeros(n_rec)
        self.rec_omega = np.zeros((n_rec, n_src))
        self.rec_pinv = np.zeros((n_rec, n_src))
        self.rec_pstar = np.zeros((n_rec, n_src))
        self.rec_pset = np.zeros((n_rec, n_src))
        self.rec_mode = np.zeros((n_rec, n_src), dtype=np.int8)
        self.rec_gfl_p = np.zeros((n_rec, n_gfl))
        self.rec_gfl_trip = np.zeros((n_rec, n_gfl), dtype=bool)
        self.rec_fbus = np.zeros((n_rec, n_bus))
        self.rec_i = 0

    def _step_of(self, t: float) -> int:
        return int(round(t / self.dt))

    # -- topology -------------------------------------------------------
    def _rebuild(self, k: int) -> None:
        self.op = build_operator(self.network, self.ratings, self.gfl_ids, self.gfl_rating)
        for isl in self.op.dead_islands:
            self.log.append((k * self.dt, f"de-energized island with load: buses {list(isl.buses)}"))
        self.monitor_island = int(self.op.bus_island[self.bus_ids.index(self.metrics_cfg.monitor_bus)])
        if self.monitor_island < 0:
            self._collapse(k, "monitored bus lost all frequency sources")

    def _collapse(self, k: int, why: str) -> None:
        if not self.collapsed:
            self.collapsed = True
            self.collapse_time = k * self.dt
            self.log.append((self.collapse_time, f"collapse: {why}"))

    def _init_steady_state(self) -> None:
        """Droop equilibrium per energized island at the initial set-points."""
        p_set, _ = self.kern.applied_setpoints(self.omega0, np.zeros_like(self.omega0), self.q_inv, self.p_star,
                                               self.has_dac, self.omega0, self.m_p, self.w_min, self.w_max,
                                               self.alpha, self.q, self.p_floor, self.enabled & False)
        op = self.op
        demand = op.c0 + (op.G @ self.gfl_p if len(self.gfl_ids) else 0.0)
        for row in range(op.W.shape[0]):
            mem = np.flatnonzero(op.W[row] > 0)
            s, m = self.ratings[mem], self.m_p[mem]
            load_kw = float(s @ demand[mem])
            w_star = (s @ p_set[mem] + s @ (self.omega0[mem] / m) - load_kw) / (s / m).sum()
            p_eq = p_set[mem] - (w_star - self.omega0[mem]) / m
            Kb = op.K[np.ix_(mem, mem)]
            theta = np.linalg.lstsq(Kb, p_eq - demand[mem], rcond=None)[0]
            self.delta[mem] = theta - theta[0]
            self.omega[mem] = w_star
            self.pmeas[mem] = p_eq

    # -- discrete happenings -------------------------------------------
    def _discrete(self, k: int) -> None:
        changed = False
        for ev in self.events.get(k, ()):
            if ev.kind in (EventKind.BREAKER_OPEN, EventKind.BREAKER_CLOSE, EventKind.LOAD_STEP):
                self.network = apply_switch_event(self.network, ev)
                changed = True
            elif ev.kind is EventKind.DG_REDISPATCH:
                self._redispatch(ev)
            elif ev.kind is EventKind.ATTACK_START:
                self.snapshot = {d: float(self.p_sec[self.src_ids.index(d)]) for d in self.attack.targets}
            self.log.append((k * self.dt, f"{ev.kind.value} {ev.target if ev.target is not None else ''}".strip()))
        if changed:
            self._rebuild(k)
        if k in self.tick_steps:
            self._secondary_tick()
        self._apply_attack(k)

    def _secondary_tick(self) -> None:
        cfg = self.scenario.secondary
        f_isl = self.op.W @ self.omega
        for row in range(self.op.W.shape[0]):
            mem = np.flatnonzero((self.op.W[row] > 0) & self.secondary_mask)
            if mem.size:
                self.p_sec[mem] = secondary_update(f_isl[row], self.ratings[mem], self.p_sec[mem], cfg)

    def _apply_attack(self, k: int) -> None:
        live = dict(zip(self.src_ids, self.p_sec))
        masked = attack_filter(live, self.attack, k * self.dt, self.snapshot)
        self.p_star = np.array([masked[d] for d in self.src_ids], dtype=float)

    def _redispatch(self, ev: Event) -> None:
        idx = [self.src_ids.index(d) for d in ev.targets]
        if not ev.restore:
            self.p_sec[idx] = ev.value
            return
        row = self.op.W[:, idx[0]].argmax()
        mem = np.flatnonzero(self.op.W[row] > 0)
        demand = self.op.c0 + (self.op.G @ self.gfl_p if len(self.gfl_ids) else 0.0)
        load_kw = float(self.ratings[mem] @ demand[mem])
        p_now = np.minimum(self.p_star, np.where(self.has_dac, np.sqrt(1.0 - self.q_inv ** 2), np.inf))
        # droop equilibrium at omega0 needs sum(s*p_set) = load (+ offsets of off-nominal omega0)
        need = load_kw - float(self.ratings[mem] @ (p_now[mem] + (self.omega0[mem] - self.scenario.secondary.omega0) / self.m_p[mem]))
        self.p_sec[idx] += need / self.ratings[idx].sum()

    # -- continuous part -----------------------------------------------
    def _integrate(self, k0: int, k1: int) -> None:
        kn = self.kern
        op = self.op
        (k, self.rec_i, collapsed, self.delta, self.omega, self.pmeas,
         self.gfl_p, self.gfl_dwell, self.gfl_tripped) = kn.integrate_segment(
            k0, k1, self.dt, self.stride, self.use_rk4, self.hold_dac,
            self.delta, self.omega, self.pmeas, self.p_star, self.has_dac, self.has_filt,
            self.omega0, self.m_p, self.tau, self.tau_f, self.q_inv, self.w_min, self.w_max,
            self.alpha, self.q, self.p_floor, self.enabled,
            op.K, op.c0, op.G, op.W, op.bus_island, op.gfl_island, self.monitor_island,
            self.metrics_cfg.collapse_f_min, self.metrics_cfg.collapse_f_max,
            self.gfl_p, self.gfl_dwell, self.gfl_tripped, self.f_trip, self.t_dwell,
            self.rec_t, self.rec_omega, self.rec_pinv, self.rec_pstar, self.rec_pset, self.rec_mode,
            self.rec_gfl_p, self.rec_gfl_trip, self.rec_fbus, self.rec_i)
        self.kstep = int(k)
        if collapsed:
            self._collapse(self.kstep, "island frequency left the survivable range")

    def _record(self, k: int) -> None:
        kn, op = self.kern, self.op
        p_inv = kn.injections(op.K, op.c0, op.G, self.delta, self.gfl_p)
        p_meas = np.where(self.has_filt, self.pmeas, p_inv)
        p_set, mode = kn.applied_setpoints(self.omega, p_meas, self.q_inv, self.p_star, self.has_dac,
                                           self.omega0, self.m_p, self.w_min, self.w_max, self.alpha,
                                           self.q, self.p_floor, self.enabled)
        i = self.rec_i
        self.rec_t[i] = k * self.dt
        self.rec_omega[i] = self.omega
        self.rec_pinv[i] = p_inv
        self.rec_pstar[i] = self.p_star
        self.rec_pset[i] = p_set
        self.rec_mode[i] = mode
        self.rec_gfl_p[i] = self.gfl_p
        self.rec_gfl_trip[i] = self.gfl_tripped
        self.rec_fbus[i] = kn.gather(kn.island_freqs(op.W, self.omega), op.bus_island)
        self.rec_i += 1

    def advance(self, k_target: int) -> None:
        """Integrate up to step ``k_target`` (state then sits at ``t = k_target*dt``)."""
        k_target = min(k_target, self.n_steps)
        while self.kstep < k_target and not self.collapsed:
            if self._done_discrete < self.kstep:
                self._discrete(self.kstep)
                self._done_discrete = self.kstep
                if self.collapsed:
                    break
            nxt = next(b for b in self.breaks if b > self.kstep)
            self._integrate(self.kstep, min(nxt, k_target))

    def step(self) -> None:
        self.advance(self.kstep + 1)

    def run(self) -> Trace:
        self.advance(self.n_steps)
        if not self.collapsed and self._done_discrete < self.n_steps:
            self._discrete(self.n_steps)
            self._done_discrete = self.n_steps
        # frozen after a collapse: remaining records repeat the last state
        while self.rec_i < len(self.rec_steps):
            self._record(self.rec_steps[self.rec_i])
        return self.trace()

    def trace(self) -> Trace:
        n = self.rec_i
        return Trace(
            t=self.rec_t[:n].copy(), source_ids=list(self.src_ids), gfl_ids=list(self.gfl_ids),
            bus_ids=list(self.bus_ids), omega=self.rec_omega[:n].copy(), p_inv=self.rec_pinv[:n].copy(),
            q_inv=np.broadcast_to(self.q_inv, (n, len(self.q_inv))).copy(),
            p_set_star=self.rec_pstar[:n].copy(), p_set=self.rec_pset[:n].copy(),
            mode=self.rec_mode[:n].copy(), gfl_p=self.rec_gfl_p[:n].copy(),
            gfl_tripped=self.rec_gfl_trip[:n].copy(), f_bus=self.rec_fbus[:n].copy(),
            collapsed=self.collapsed, collapse_time=self.collapse_time, log=list(self.log),
        )


def run_scenario(scenario: ScenarioDoc, backend: str | None = None) -> tuple[Trace, Metrics]:
    trace = Simulator(scenario, backend).run()
    return trace, compute_metrics(trace, scenario.metrics)


@dataclass(frozen=True)
class SweepRow:
    value: float
    dac: bool
    metrics: Metrics


def _sweep_job(args):
    scenario, param, value, dac, backend = args
    sc = with_overrides(scenario, dac=dac, params={param: value})
    _, m = run_scenario(sc, backend)
    return SweepRow(value, dac, m)


def parameter_sweep(scenario: ScenarioDoc, param: str, values, jobs: int = 1,
                    backend: str | None = None) -> list[SweepRow]:
    """One run per (value, dac flag), DAC on first; rows in declaration order."""
    backend = backend or default_backend()
    tasks = [(scenario, param, v, dac, backend) for v in values for dac in (True, False)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_sweep_job, tasks))
    return [_sweep_job(t) for t in tasks]


def size_sweep(scenario: ScenarioDoc, sizes, device: str = "gfm1", jobs: int = 1,
               backend: str | None = None) -> list[SweepRow]:
    sizes = list(sizes)
    if any(s <= 0 for s in sizes) or sizes != sorted(sizes):
        raise ValueError("sizes must be positive and sorted")
    return parameter_sweep(scenario, f"{device}.s_inv", sizes, jobs, backend)
